//! A configuration-driven sweep written as CSV to stdout.

use dqd_demon::cli::{run_sweep, RunConfig};

const CONFIG: &str = r#"
model = "fast-generator"
Gamma = 0.1
g = 0.1
T = 1.0
bias = 3.0
eps_u = 5.0
gamma_1 = 10.0
lambda_1 = 1.0
sweep = "lambda_ratio=0.01:1000:11:log"
"#;

fn main() -> dqd_demon::Result<()> {
    let cfg = RunConfig::from_toml_str(CONFIG)?;
    run_sweep(&cfg).write_csv(std::io::stdout().lock())
}
