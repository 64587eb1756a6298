//! Quantum-jump trajectories: a Zeno-pinned single run and an ensemble
//! estimate of the power compared with the fast-detector closed form.

use dqd_demon::model::{DetectorParams, LevelConfiguration, RateOverride, SystemParams};
use dqd_demon::reduced::power_analytic;
use dqd_demon::trajectory::{estimate_currents, run_ensemble, run_trajectory, StepConfig};

fn main() -> dqd_demon::Result<()> {
    let ov = RateOverride::none();
    let p = SystemParams::symmetric(0.1, 0.1, 3.0, 5.0);
    let d = DetectorParams::with_ratio(10.0, 8.0);
    let cfg = StepConfig {
        dt: 1e-4,
        seed: 3,
        record_stride: 200,
    };
    let r = run_trajectory(&p, &d, &ov, &cfg, 100.0, 0)?;
    let pinned = r.samples.iter().filter(|s| s.a1.abs() > 0.99 || s.config == LevelConfiguration::C1).count();
    println!(
        "strong measurement: {} jumps, {:.1}% of samples empty or pinned to a dot",
        r.jumps.len(),
        100.0 * pinned as f64 / r.samples.len() as f64
    );

    let p = SystemParams::symmetric(0.1, 0.1, 3.0, 15.0);
    let d = DetectorParams::with_ratio(10.0, 3.0);
    let cfg = StepConfig {
        dt: 1e-3,
        seed: 5,
        record_stride: 0,
    };
    let recs = run_ensemble(&p, &d, &ov, &cfg, 1000.0, 64)?;
    let e = estimate_currents(&recs, &p)?;
    println!(
        "ensemble of {}: P = {:.3e} ± {:.1e}, closed form {:.3e}",
        e.trajectories,
        e.power,
        e.power_se,
        power_analytic(&p, &d, &ov)
    );
    Ok(())
}
