//! Configuration, sweep, figure and trajectory plumbing, plus the `demon` binary.

use std::path::PathBuf;
use std::process::Command;

use dqd_demon::cli::{
    figure_series, run_sweep, run_trajectory_cmd, Model, RunConfig, Sweep, SweepField, COLUMNS, FIGURE_TAGS,
};
use dqd_demon::DemonError;

const FIG3: &str = r#"
model = "fast-analytic"
Gamma = 0.1
g = 0.1
T = 1.0
bias = 3.0
eps_u = 5.0
gamma_1 = 10.0
lambda_1 = 1.0
"#;

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dqd-demon-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn with(extra: &str) -> RunConfig {
    RunConfig::from_toml_str(&format!("{FIG3}{extra}")).unwrap()
}

fn with_model(model: &str, extra: &str) -> RunConfig {
    let base = FIG3.replace("model = \"fast-analytic\"\n", "");
    RunConfig::from_toml_str(&format!("model = \"{model}\"\n{base}{extra}")).unwrap()
}

fn csv_text(cfg: &RunConfig) -> String {
    let mut buf = Vec::new();
    run_sweep(cfg).write_csv(&mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

/// `(sweep value, column)` pairs of a CSV produced by `write_csv`.
fn column(text: &str, name: &str) -> Vec<(f64, f64)> {
    let body: String = text.lines().filter(|l| !l.starts_with('#')).map(|l| format!("{l}\n")).collect();
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            (rec[0].parse().unwrap(), rec[idx].parse().unwrap())
        })
        .collect()
}

#[test]
fn minimal_config_resolves() {
    let c = with("");
    assert_eq!(c.model, Model::FastAnalytic);
    assert_eq!((c.params.gamma, c.params.mu_l, c.params.mu_r), (0.1, -1.5, 1.5));
    assert_eq!((c.params.eps_u, c.params.eps_d, c.params.eps_0), (5.0, -5.0, 0.0));
    assert_eq!((c.detector.gamma_1, c.detector.lambda_1), (10.0, 1.0));
}

#[test]
fn config_errors() {
    let missing = FIG3.replace("T = 1.0\n", "");
    match RunConfig::from_toml_str(&missing) {
        Err(DemonError::Validation(v)) => assert!(v.iter().any(|m| m.contains("'T'")), "{v:?}"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(
        RunConfig::from_toml_str(&format!("{FIG3}sweep = \"temperature=1:2:3\"\n")),
        Err(_)
    ));
    match RunConfig::from_toml_str(&format!("{FIG3}colour = 3\n")) {
        Err(DemonError::Parse(m)) => assert!(m.contains("colour") && m.contains("line"), "{m}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn sweep_syntax() {
    let s = Sweep::parse("lambda_ratio=0.01:100:5:log").unwrap();
    assert_eq!(s.field, SweepField::LambdaRatio);
    let want = [0.01, 0.1, 1.0, 10.0, 100.0];
    for (a, b) in s.values.iter().zip(want) {
        assert!((a / b - 1.0).abs() < 1e-14);
    }
    assert_eq!(Sweep::parse("g=0:1:3").unwrap().values, vec![0.0, 0.5, 1.0]);
    assert_eq!(Sweep::parse("eps_u = 4, 20").unwrap().values, vec![4.0, 20.0]);
    for bad in ["g", "g=", "g=1:2", "g=a,b", "g=0:1:3:cubic", "g=0:1:3:log", "nope=1"] {
        assert!(Sweep::parse(bad).is_err(), "{bad}");
    }
}

#[test]
fn sweep_output_is_deterministic_and_sorted() {
    let c = with("sweep = \"lambda_ratio=1,0.01,100,0.1\"\n");
    let a = csv_text(&c);
    assert_eq!(a, csv_text(&c));
    let header = a.lines().find(|l| !l.starts_with('#')).unwrap();
    let mut want = vec!["lambda_ratio"];
    want.extend(COLUMNS);
    assert_eq!(header, want.join(","));
    assert!(a.contains("# sweep=lambda_ratio="));
    let p = column(&a, "P");
    assert!(p.windows(2).all(|w| w[0].0 < w[1].0));
    assert!(p.iter().all(|x| x.1 < 0.0));
}

#[test]
fn per_point_failures_are_recorded() {
    let c = with("sweep = \"Gamma=-1,0.1\"\n");
    let t = run_sweep(&c);
    assert!(t.rows[0].flags.starts_with("error:") && t.rows[0].flows.p.is_nan());
    assert!(!t.rows[1].flags.starts_with("error:"));
}

#[test]
fn measurement_sweep_has_an_interior_optimum() {
    let c = with("sweep = \"lambda_ratio=0.01:1000:21:log\"\n");
    let p = column(&csv_text(&c), "P");
    let (imax, _) = p.iter().enumerate().fold((0, 0.0), |b, (i, x)| if -x.1 > b.1 { (i, -x.1) } else { b });
    assert!(imax > 0 && imax < p.len() - 1);
}

#[test]
fn detuning_sweep_decays() {
    let c = with_model("fast-generator", "sweep = \"eps_u=4:40:10\"\n");
    let p = column(&csv_text(&c), "P");
    let imax = (0..p.len()).max_by(|&i, &j| p[j].1.total_cmp(&p[i].1)).unwrap();
    assert!(imax > 0, "{p:?}");
    assert!(p[imax..].windows(2).all(|w| w[1].1 > w[0].1), "{p:?}");
    assert!(p.last().unwrap().1.abs() < 0.1 * p[imax].1.abs(), "{p:?}");
}

#[test]
fn dephasing_sweep_merges_branches() {
    let extra = "solver = \"spectral\"\nN = 100\ngamma_1 = 1.0\nsweep = \"Gamma_phi=0.1,100\"\n";
    let base = FIG3.replace("gamma_1 = 10.0\n", "").replace("model = \"fast-analytic\"\n", "");
    let q = RunConfig::from_toml_str(&format!("model = \"spectral-quantum\"\n{base}{extra}")).unwrap();
    let c = RunConfig::from_toml_str(&format!("model = \"spectral-classical\"\n{base}{extra}")).unwrap();
    let (q, c) = (column(&csv_text(&q), "P"), column(&csv_text(&c), "P"));
    let gap = |i: usize| (q[i].1 - c[i].1).abs() / q[i].1.abs();
    assert!(gap(1) < gap(0), "{q:?} {c:?}");
}

#[test]
fn figure_presets() {
    for tag in FIGURE_TAGS {
        let s = figure_series(tag).unwrap();
        assert!(!s.is_empty(), "{tag}");
        assert!(s.iter().all(|x| x.config.sweep.is_some()));
    }
    let names = |tag| figure_series(tag).unwrap().into_iter().map(|s| s.name).collect::<Vec<_>>();
    assert_eq!(names("fig3b"), ["ideal", "fast", "energy_conserving"]);
    let fig4a = figure_series("fig4a").unwrap();
    let models: std::collections::BTreeSet<_> = fig4a.iter().map(|s| s.config.model.name()).collect();
    let gammas: std::collections::BTreeSet<_> = fig4a.iter().map(|s| s.config.detector.gamma_1.to_bits()).collect();
    assert_eq!((models.len(), gammas.len()), (3, 3));
    let fig8 = figure_series("fig8").unwrap();
    let gs: std::collections::BTreeSet<_> = fig8.iter().map(|s| s.config.params.g.to_bits()).collect();
    assert_eq!(gs, [0.05f64, 0.1, 0.5].iter().map(|g| g.to_bits()).collect());
    assert!(figure_series("fig6").is_err());
}

#[test]
fn trajectory_files_repeat_with_the_seed() {
    let cfg = with_model("trajectory", "dt = 1e-3\nt_end = 20.0\nseed = 11\ntrajectories = 2\n");
    let (a, b) = (scratch("traj-a"), scratch("traj-b"));
    let oa = run_trajectory_cmd(&cfg, &a).unwrap();
    let ob = run_trajectory_cmd(&cfg, &b).unwrap();
    assert_eq!(oa.files.len(), ob.files.len());
    for (x, y) in oa.files.iter().zip(&ob.files) {
        assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap(), "{x:?}");
    }
    let first = std::fs::read_to_string(a.join("traj_0000.csv")).unwrap();
    assert!(first.contains("# seed=11"));
    assert_eq!(oa.summary.trajectories, 2);
    assert!(run_trajectory_cmd(&with(""), &a).is_err());
}

fn demon(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_demon")).args(args).output().unwrap()
}

#[test]
fn binary_subcommands() {
    let out = demon(&["postprocess", "--couplings", "0,-1,1,1,-1,-1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let value = |key: &str| -> f64 {
        let line = text.lines().find(|l| l.split('=').next() == Some(key)).unwrap();
        line.split_once('=').unwrap().1.parse().unwrap()
    };
    for (key, want) in [("x", 1.0), ("y", 0.0), ("z", 0.0), ("w", 1.0), ("D0", 0.0), ("D0p", 0.0)] {
        assert_eq!(value(key), want, "{text}");
    }
    assert!(!demon(&["postprocess", "--couplings", "0,1,2,0,1,2"]).status.success());
    assert!(!demon(&["figure", "fig42"]).status.success());

    let dir = scratch("bin");
    let cfg = dir.join("fig3.toml");
    std::fs::write(&cfg, FIG3).unwrap();
    let csv = dir.join("out.csv");
    let out = demon(&[
        "solve",
        "--config",
        cfg.to_str().unwrap(),
        "--sweep",
        "lambda_ratio=0.1:10:3:log",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(column(&std::fs::read_to_string(&csv).unwrap(), "P").len(), 3);
    assert!(dir.join("out.csv.json").exists());
}
