use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dqd_demon::cli::{self, Sweep};
use dqd_demon::{DemonError, Result};

#[derive(Parser)]
#[command(name = "demon", version, about = "Feedback-controlled double-dot demon: steady states, sweeps and trajectories")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one point or a sweep and write a CSV table.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// `field=start:stop:points[:log]` or `field=v1,v2,...`; overrides the file.
        #[arg(long)]
        sweep: Option<String>,
        /// Output CSV; defaults to `output` in the config, else stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate the data of a named figure preset.
    Figure {
        tag: String,
        #[arg(long, default_value = "figures")]
        out: PathBuf,
    },
    /// Run quantum-jump trajectories.
    Traj {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "trajectories")]
        out: PathBuf,
    },
    /// Affine coefficients mapping arbitrary detector couplings onto the canonical ones.
    Postprocess {
        /// `a0,aL,aR,b0,bL,bR`
        #[arg(long, allow_hyphen_values = true)]
        couplings: String,
    },
}

fn run(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Solve { config, sweep, out } => {
            let mut cfg = cli::load_config(&config)?;
            if let Some(s) = sweep {
                cfg.sweep = Some(Sweep::parse(&s)?);
            }
            let table = cli::run_sweep(&cfg);
            match out.or(cfg.output.clone()) {
                Some(path) => {
                    table.write_files(&path)?;
                    eprintln!("wrote {}", path.display());
                }
                None => table.write_csv(std::io::stdout().lock())?,
            }
        }
        Cmd::Figure { tag, out } => {
            for p in cli::reproduce_figure(&tag, &out)? {
                eprintln!("wrote {}", p.display());
            }
        }
        Cmd::Traj { config, n, seed, out } => {
            let mut cfg = cli::load_config(&config)?;
            if let Some(n) = n {
                cfg.trajectory.count = n;
            }
            if let Some(s) = seed {
                cfg.trajectory.seed = s;
            }
            let r = cli::run_trajectory_cmd(&cfg, &out)?;
            let s = &r.summary;
            writeln!(
                std::io::stdout(),
                "trajectories={} P={:.6e} P_se={:.3e} Qdot={:.6e} Qdot_se={:.3e}",
                s.trajectories, s.power, s.power_se, s.heat, s.heat_se
            )?;
        }
        Cmd::Postprocess { couplings } => {
            let [a0, al, ar, b0, bl, br] = cli::parse_couplings(&couplings)?;
            let c = cli::postprocess_coefficients(a0, al, ar, b0, bl, br)?;
            // `+ 0.0` turns negative zeros into zeros.
            let mut o = std::io::stdout().lock();
            for (k, v) in [("x", c.x), ("y", c.y), ("z", c.z), ("w", c.w), ("D0", c.d0), ("D0p", c.d0p)] {
                writeln!(o, "{k}={:.15e}", v + 0.0)?;
            }
            writeln!(o, "normalizer={:.15e}", c.normalizer)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        // A closed pipe (e.g. `| head`) is not a failure of the run.
        Err(DemonError::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
