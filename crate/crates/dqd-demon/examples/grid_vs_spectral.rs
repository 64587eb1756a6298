//! The spectral and finite-volume solvers side by side across measurement strengths.

use std::time::Instant;

use dqd_demon::energetics::energy_flows;
use dqd_demon::model::{DetectorParams, RateOverride, SystemParams};
use dqd_demon::solver::{solve_steady, SolverOptions};
use dqd_demon::spectral::Branch;

fn main() -> dqd_demon::Result<()> {
    let p = SystemParams::symmetric(0.1, 0.1, 3.0, 5.0);
    let ov = RateOverride::none();
    println!("{:>10} {:>14} {:>14} {:>10} {:>8}", "lambda/g1", "P spectral", "P grid", "rel diff", "t [s]");
    for ratio in [0.03, 0.1, 0.3, 1.0, 3.0, 10.0] {
        let d = DetectorParams::with_ratio(10.0, ratio);
        let t = Instant::now();
        let s = solve_steady(Branch::Quantum, &p, &d, &ov, &SolverOptions::spectral(200))?;
        let g = solve_steady(Branch::Quantum, &p, &d, &ov, &SolverOptions::grid())?;
        let (ps, pg) = (energy_flows(&s.masses, &p, &d, &ov).p, energy_flows(&g.masses, &p, &d, &ov).p);
        println!(
            "{ratio:>10} {ps:>14.6e} {pg:>14.6e} {:>10.2e} {:>8.2}",
            (ps - pg).abs() / ps.abs(),
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
