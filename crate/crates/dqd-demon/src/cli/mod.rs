//! Command-line plumbing: configuration, sweeps, figure presets and
//! trajectory output. The `demon` binary is a thin wrapper over this module.

pub mod config;
pub mod figures;
pub mod postprocess;
pub mod sweep;

use std::io::Write;
use std::path::{Path, PathBuf};

pub use config::{load_config, Model, RawConfig, RunConfig, Sweep, SweepField, TrajectorySettings};
pub use figures::{figure_series, reproduce_figure, FIGURE_TAGS};
pub use postprocess::{parse_couplings, postprocess_coefficients, PostProcessCoefficients};
pub use sweep::{run_point, run_sweep, PointResult, SweepTable, COLUMNS};

use crate::error::{DemonError, Result};
use crate::trajectory::{estimate_currents, run_trajectory, CurrentEstimate, StepConfig, TrajectoryRecord};

#[derive(Clone, Debug)]
pub struct TrajectoryOutput {
    pub files: Vec<PathBuf>,
    pub summary: CurrentEstimate,
}

fn write_header<W: Write>(out: &mut W, cfg: &RunConfig, extra: &[(&str, String)]) -> Result<()> {
    for (k, v) in cfg.echo() {
        writeln!(out, "# {k}={v}")?;
    }
    for (k, v) in extra {
        writeln!(out, "# {k}={v}")?;
    }
    Ok(())
}

fn write_record(dir: &Path, cfg: &RunConfig, r: &TrajectoryRecord) -> Result<[PathBuf; 2]> {
    let extra = [
        ("seed", r.seed.to_string()),
        ("stream", r.stream.to_string()),
        ("steps", r.steps.to_string()),
    ];
    let samples = dir.join(format!("traj_{:04}.csv", r.stream));
    let mut f = std::io::BufWriter::new(std::fs::File::create(&samples)?);
    write_header(&mut f, cfg, &extra)?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(["t", "D1", "A1", "config", "rho_LR_re", "rho_LR_im"])?;
    for s in &r.samples {
        w.write_record([
            format!("{:.10e}", s.t),
            format!("{:.10e}", s.d1),
            format!("{:.10e}", s.a1),
            s.config.tag().to_string(),
            format!("{:.10e}", s.coherence_re),
            format!("{:.10e}", s.coherence_im),
        ])?;
    }
    w.flush()?;

    let jumps = dir.join(format!("traj_{:04}_jumps.csv", r.stream));
    let mut f = std::io::BufWriter::new(std::fs::File::create(&jumps)?);
    write_header(&mut f, cfg, &extra)?;
    let mut w = csv::Writer::from_writer(f);
    w.write_record(["t", "kind", "energy", "config"])?;
    for j in &r.jumps {
        w.write_record([
            format!("{:.10e}", j.t),
            j.kind.name().to_string(),
            format!("{:.10e}", j.energy),
            j.config.tag().to_string(),
        ])?;
    }
    w.flush()?;
    Ok([samples, jumps])
}

/// Runs `cfg.trajectory.count` trajectories and writes, per trajectory, a
/// sample file and a jump file, plus `summary.csv` with the ensemble estimate.
pub fn run_trajectory_cmd(cfg: &RunConfig, out_dir: &Path) -> Result<TrajectoryOutput> {
    if cfg.model != Model::Trajectory {
        return Err(DemonError::Config(format!(
            "traj needs model = \"trajectory\", got '{}'",
            cfg.model
        )));
    }
    let t = &cfg.trajectory;
    if t.count == 0 {
        return Err(DemonError::Config("trajectory count must be at least 1".into()));
    }
    std::fs::create_dir_all(out_dir)?;
    let step = StepConfig {
        dt: t.dt,
        seed: t.seed,
        record_stride: t.record_stride,
    };
    let mut files = Vec::new();
    let mut records = Vec::with_capacity(t.count);
    // Streams are independent, so sequential output order does not affect the data.
    for chunk in (0..t.count as u64).collect::<Vec<_>>().chunks(rayon::current_num_threads().max(1)) {
        use rayon::prelude::*;
        let batch: Vec<TrajectoryRecord> = chunk
            .par_iter()
            .map(|&k| run_trajectory(&cfg.params, &cfg.detector, &cfg.overrides, &step, t.t_end, k))
            .collect::<Result<_>>()?;
        for r in batch {
            files.extend(write_record(out_dir, cfg, &r)?);
            // Only jumps are needed for the estimate.
            records.push(TrajectoryRecord {
                samples: Vec::new(),
                ..r
            });
        }
    }
    let summary = estimate_currents(&records, &cfg.params)?;

    let path = out_dir.join("summary.csv");
    let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
    write_header(&mut f, cfg, &[("seed", t.seed.to_string())])?;
    let mut w = csv::Writer::from_writer(f);
    let mut head = vec!["trajectories", "t_start", "t_stop", "P", "P_se", "Qdot", "Qdot_se"];
    head.extend(["n_dot_L1", "n_dot_L2", "n_dot_L3", "n_dot_R1", "n_dot_R2", "n_dot_R3"]);
    w.write_record(&head)?;
    let mut row = vec![
        summary.trajectories.to_string(),
        format!("{:.10e}", summary.window.0),
        format!("{:.10e}", summary.window.1),
        format!("{:.10e}", summary.power),
        format!("{:.10e}", summary.power_se),
        format!("{:.10e}", summary.heat),
        format!("{:.10e}", summary.heat_se),
    ];
    row.extend(summary.currents.flat().iter().map(|x| format!("{x:.10e}")));
    w.write_record(&row)?;
    w.flush()?;
    files.push(path);
    Ok(TrajectoryOutput { files, summary })
}
