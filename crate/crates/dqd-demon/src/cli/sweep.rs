//! Parallel parameter sweeps and their tabular output.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Model, RunConfig, SweepField};
use crate::energetics::{energy_flows, heat_from_currents, power_from_currents, EnergyFlows, ParticleCurrents};
use crate::error::{DemonError, Result};
use crate::model::{DetectorParams, LevelConfiguration, RateOverride, SystemParams};
use crate::reduced::{
    classical_ideal_steady, error_probability, fast_detector_generator, fcs_currents, heat_analytic,
    power_analytic, xi_effective, ValidityFlags,
};
use crate::solver::{solve_steady, Method, SolverOptions};
use crate::spectral::Branch;
use crate::trajectory::{estimate_currents, run_ensemble, StepConfig};

use super::config::TrajectorySettings;

/// Columns after the sweep value, in output order.
pub const COLUMNS: [&str; 18] = [
    "P", "Qdot", "EdotD", "EdotM", "EdotB", "EdotG", "n_dot_L1", "n_dot_L2", "n_dot_L3", "n_dot_R1", "n_dot_R2",
    "n_dot_R3", "eta", "xi", "residual", "gap", "N_used", "flags",
];

/// One computed point. Quantities a model does not produce are NaN.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointResult {
    pub value: f64,
    pub flows: EnergyFlows,
    pub currents: [f64; 6],
    pub eta: f64,
    pub xi: f64,
    pub residual: f64,
    pub gap: f64,
    pub n_used: Option<usize>,
    pub flags: String,
}

fn nan_flows() -> EnergyFlows {
    EnergyFlows {
        p: f64::NAN,
        qdot: f64::NAN,
        edot_d: f64::NAN,
        edot_m: f64::NAN,
        edot_b: f64::NAN,
        edot_g: f64::NAN,
    }
}

fn closure_only(p: f64, qdot: f64) -> EnergyFlows {
    EnergyFlows {
        p,
        qdot,
        edot_d: -(p + qdot),
        ..nan_flows()
    }
}

struct Computed {
    flows: EnergyFlows,
    note: Option<String>,
    currents: [f64; 6],
    residual: f64,
    gap: f64,
    n_used: Option<usize>,
    method: Option<Method>,
}

fn compute(
    model: Model,
    p: &SystemParams,
    d: &DetectorParams,
    ov: &RateOverride,
    solver: &SolverOptions,
    traj: &TrajectorySettings,
) -> Result<Computed> {
    let none6 = [f64::NAN; 6];
    Ok(match model {
        Model::SpectralQuantum | Model::SpectralClassical => {
            let branch = if model == Model::SpectralQuantum {
                Branch::Quantum
            } else {
                Branch::Classical
            };
            let s = solve_steady(branch, p, d, ov, solver)?;
            let mut flows = energy_flows(&s.masses, p, d, ov);
            if branch == Branch::Classical {
                flows.edot_m = f64::NAN;
                flows.edot_b = f64::NAN;
                flows.edot_g = f64::NAN;
            }
            Computed {
                flows,
                note: None,
                currents: crate::energetics::particle_currents(&s.masses, p, ov).flat(),
                residual: s.residual,
                gap: s.gap,
                n_used: Some(s.size),
                method: Some(s.method),
            }
        }
        Model::FastAnalytic => Computed {
            flows: closure_only(power_analytic(p, d, ov), heat_analytic(p, d, ov)),
            note: None,
            currents: none6,
            residual: f64::NAN,
            gap: f64::NAN,
            n_used: None,
            method: None,
        },
        Model::FastGenerator => {
            let m = fast_detector_generator(p, d, ov);
            let s = m.steady_state(p, d, ov)?;
            let r = m.generator.apply(&s.rho);
            let res = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
                / s.rho.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            Computed {
                flows: s.flows,
                note: None,
                currents: s.currents.flat(),
                residual: res,
                gap: s.gap,
                n_used: None,
                method: None,
            }
        }
        Model::ClassicalIdeal => {
            let s = classical_ideal_steady(p, d, ov)?;
            let mut n = ParticleCurrents::default();
            n.n[0][LevelConfiguration::C1.index()] = s.current;
            n.n[1][LevelConfiguration::C3.index()] = -s.current;
            Computed {
                flows: closure_only(power_from_currents(&n, p), heat_from_currents(&n, p)),
                note: None,
                currents: n.flat(),
                residual: f64::NAN,
                gap: f64::NAN,
                n_used: None,
                method: None,
            }
        }
        Model::GlobalFcs => {
            let r = fcs_currents(p, d, ov, true)?;
            Computed {
                flows: closure_only(r.power, r.heat),
                note: None,
                currents: r.currents.flat(),
                residual: f64::NAN,
                gap: r.gap,
                n_used: None,
                method: None,
            }
        }
        Model::Trajectory => {
            let cfg = StepConfig {
                dt: traj.dt,
                seed: traj.seed,
                record_stride: 0,
            };
            let recs = run_ensemble(p, d, ov, &cfg, traj.t_end, traj.count)?;
            let e = estimate_currents(&recs, p)?;
            Computed {
                flows: closure_only(e.power, e.heat),
                note: Some(format!("P_se={:.3e}|Qdot_se={:.3e}", e.power_se, e.heat_se)),
                currents: e.currents.flat(),
                residual: f64::NAN,
                gap: f64::NAN,
                n_used: Some(recs.len()),
                method: None,
            }
        }
    })
}

/// Evaluates one parameter point; failures are reported in the flags.
pub fn run_point(
    model: Model,
    value: f64,
    p: &SystemParams,
    d: &DetectorParams,
    ov: &RateOverride,
    solver: &SolverOptions,
    traj: &TrajectorySettings,
) -> PointResult {
    let validity = ValidityFlags::evaluate(p, d, ov);
    let eta = error_probability(d.lambda_1, d.gamma_1);
    let xi = xi_effective(p, d, ov);
    let invalid = p.validate().and_then(|_| d.validate());
    match invalid.and_then(|_| compute(model, p, d, ov, solver, traj)) {
        Ok(c) => {
            let mut flags = validity.to_string();
            if c.method == Some(Method::Grid) {
                flags.push_str("|grid");
            }
            if let Some(n) = c.note {
                flags.push('|');
                flags.push_str(&n);
            }
            PointResult {
                value,
                flows: c.flows,
                currents: c.currents,
                eta,
                xi,
                residual: c.residual,
                gap: c.gap,
                n_used: c.n_used,
                flags,
            }
        }
        Err(e) => PointResult {
            value,
            flows: nan_flows(),
            currents: [f64::NAN; 6],
            eta,
            xi,
            residual: f64::NAN,
            gap: f64::NAN,
            n_used: None,
            flags: format!("error: {e}"),
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepTable {
    pub field: String,
    pub model: String,
    pub header: Vec<(String, String)>,
    pub rows: Vec<PointResult>,
}

/// One row per sweep value (a single row without a sweep), sorted by value.
pub fn run_sweep(cfg: &RunConfig) -> SweepTable {
    let (field, mut values) = match &cfg.sweep {
        Some(s) => (Some(s.field), s.values.clone()),
        None => (None, vec![f64::NAN]),
    };
    values.sort_by(|a, b| a.total_cmp(b));
    let rows = values
        .par_iter()
        .map(|&v| {
            let (p, d) = match field {
                Some(f) => cfg.point(f, v),
                None => (cfg.params, cfg.detector),
            };
            run_point(cfg.model, v, &p, &d, &cfg.overrides, &cfg.solver, &cfg.trajectory)
        })
        .collect();
    SweepTable {
        field: field.map(SweepField::name).unwrap_or("point").to_string(),
        model: cfg.model.name().to_string(),
        header: cfg.echo(),
        rows,
    }
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.10e}")
    }
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, v) in &self.header {
            writeln!(out, "# {k}={v}")?;
        }
        let mut w = csv::Writer::from_writer(out);
        let mut head = vec![self.field.clone()];
        head.extend(COLUMNS.iter().map(|c| c.to_string()));
        w.write_record(&head)?;
        for r in &self.rows {
            let f = &r.flows;
            let mut rec = vec![num(r.value), num(f.p), num(f.qdot), num(f.edot_d), num(f.edot_m), num(f.edot_b), num(f.edot_g)];
            rec.extend(r.currents.iter().map(|&x| num(x)));
            rec.push(num(r.eta));
            rec.push(num(r.xi));
            rec.push(num(r.residual));
            rec.push(num(r.gap));
            rec.push(r.n_used.map(|n| n.to_string()).unwrap_or_default());
            rec.push(r.flags.clone());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `path` and a JSON sidecar `path.json` with the resolved configuration.
    pub fn write_files(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))?;
        let side = sidecar_path(path);
        let meta: serde_json::Map<String, serde_json::Value> = self
            .header
            .iter()
            .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
            .collect();
        let text = serde_json::to_string_pretty(&meta).map_err(|e| DemonError::Config(e.to_string()))?;
        std::fs::write(side, text + "\n")?;
        Ok(())
    }
}

pub fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    s.into()
}
