//! Named presets that regenerate the data behind each comparison plot.
//!
//! A preset is a list of series; each series is one [`RunConfig`] with a sweep
//! and is written to `<out>/<tag>_<series>.csv`.

use std::path::{Path, PathBuf};

use super::config::{Model, RawConfig, RunConfig};
use super::sweep::run_sweep;
use crate::error::{DemonError, Result};

pub const FIGURE_TAGS: [&str; 10] = [
    "fig3a", "fig3b", "fig3c", "fig4a", "fig4b", "fig5a", "fig5b", "fig5c", "fig7", "fig8",
];

#[derive(Clone, Debug)]
pub struct Series {
    pub name: String,
    pub config: RunConfig,
}

fn base(gamma_1: f64, eps_u: f64) -> RawConfig {
    RawConfig {
        Gamma: Some(0.1),
        g: Some(0.1),
        T: Some(1.0),
        bias: Some(3.0),
        eps_u: Some(eps_u),
        gamma_1: Some(gamma_1),
        lambda_ratio: Some(1.0),
        ..RawConfig::default()
    }
}

fn series(name: String, model: Model, mut raw: RawConfig, sweep: &str) -> Result<Series> {
    raw.model = Some(model.name().to_string());
    raw.sweep = Some(sweep.to_string());
    Ok(Series {
        name,
        config: RunConfig::from_raw(raw)?,
    })
}

/// The ideal, fast-detector and energy-conserving triple shared by several plots.
fn triple(out: &mut Vec<Series>, prefix: &str, raw: &RawConfig, sweep: &str) -> Result<()> {
    out.push(series(format!("{prefix}ideal"), Model::SpectralQuantum, raw.clone(), sweep)?);
    out.push(series(format!("{prefix}fast"), Model::FastGenerator, raw.clone(), sweep)?);
    let ec = RawConfig {
        energy_conserving: Some(true),
        ..raw.clone()
    };
    out.push(series(format!("{prefix}energy_conserving"), Model::SpectralQuantum, ec, sweep)?);
    Ok(())
}

pub fn figure_series(tag: &str) -> Result<Vec<Series>> {
    let mut out = Vec::new();
    let lam = |r: RawConfig, l: f64| RawConfig {
        lambda_1: Some(l),
        lambda_ratio: None,
        ..r
    };
    match tag {
        "fig3a" => triple(&mut out, "", &lam(base(10.0, 5.0), 1.0), "g=0.01:30:15:log")?,
        "fig3b" => triple(&mut out, "", &base(10.0, 5.0), "lambda_ratio=0.01:1000:21:log")?,
        "fig3c" => {
            for g1 in [10.0, 100.0, 1000.0] {
                let raw = lam(base(g1, 5.0), 1.0);
                triple(&mut out, &format!("gamma1_{g1}_"), &raw, "eps_u=2:40:20")?;
            }
        }
        "fig4a" => {
            for g1 in [1.0, 10.0, 100.0] {
                for eu in [5.0, 15.0] {
                    let raw = base(g1, eu);
                    let sweep = "lambda_ratio=0.1:10:9:log";
                    let p = format!("gamma1_{g1}_epsu_{eu}_");
                    out.push(series(format!("{p}ideal"), Model::SpectralQuantum, raw.clone(), sweep)?);
                    out.push(series(format!("{p}fast"), Model::FastGenerator, raw.clone(), sweep)?);
                    out.push(series(format!("{p}analytic"), Model::FastAnalytic, raw, sweep)?);
                }
            }
        }
        "fig4b" => {
            for eu in [5.0, 15.0] {
                let raw = base(10.0, eu);
                let sweep = "lambda_ratio=0.01:100:17:log";
                let p = format!("epsu_{eu}_");
                out.push(series(format!("{p}ideal"), Model::SpectralQuantum, raw.clone(), sweep)?);
                let ec = RawConfig {
                    energy_conserving: Some(true),
                    ..raw
                };
                out.push(series(format!("{p}energy_conserving"), Model::SpectralQuantum, ec, sweep)?);
            }
        }
        "fig5a" | "fig5b" | "fig5c" => {
            let (g1, eu) = match tag {
                "fig5a" => (0.1, 5.0),
                "fig5b" => (1.0, 5.0),
                _ => (10.0, 15.0),
            };
            let raw = base(g1, eu);
            let sweep = "lambda_ratio=0.01:10:13:log";
            out.push(series("quantum".into(), Model::SpectralQuantum, raw.clone(), sweep)?);
            out.push(series("classical".into(), Model::SpectralClassical, raw, sweep)?);
        }
        "fig7" => {
            let raw = lam(base(1.0, 5.0), 1.0);
            let sweep = "Gamma_phi=0.01:100:17:log";
            out.push(series("quantum".into(), Model::SpectralQuantum, raw.clone(), sweep)?);
            out.push(series("classical".into(), Model::SpectralClassical, raw, sweep)?);
        }
        "fig8" => {
            for g in [0.05, 0.1, 0.5] {
                let raw = RawConfig {
                    g: Some(g),
                    ..base(10.0, 5.0)
                };
                let sweep = "lambda_ratio=0.01:1000:21:log";
                out.push(series(format!("g_{g}_global"), Model::GlobalFcs, raw.clone(), sweep)?);
                out.push(series(format!("g_{g}_local"), Model::FastGenerator, raw, sweep)?);
            }
        }
        other => {
            return Err(DemonError::Config(format!(
                "unknown figure '{other}'; known: {}",
                FIGURE_TAGS.join(", ")
            )))
        }
    }
    Ok(out)
}

/// Runs every series of `tag` and writes one CSV (plus JSON sidecar) per series.
pub fn reproduce_figure(tag: &str, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let all = figure_series(tag)?;
    std::fs::create_dir_all(out_dir)?;
    let mut paths = Vec::with_capacity(all.len());
    for s in all {
        let table = run_sweep(&s.config);
        let path = out_dir.join(format!("{tag}_{}.csv", s.name));
        table.write_files(&path)?;
        paths.push(path);
    }
    Ok(paths)
}
