//! Stationary state of the joint dot–detector equation at one operating point:
//! energy flows, diagnostics and the detector marginal.

use dqd_demon::energetics::{energy_flows, particle_currents};
use dqd_demon::model::{DetectorParams, RateOverride, SystemParams};
use dqd_demon::solver::{solve_steady, SolverOptions};
use dqd_demon::spectral::{marginal_distribution, Branch};

fn main() -> dqd_demon::Result<()> {
    let p = SystemParams::symmetric(0.1, 0.1, 3.0, 5.0);
    let d = DetectorParams::with_ratio(10.0, 1.0);
    let ov = RateOverride::none();

    let s = solve_steady(Branch::Quantum, &p, &d, &ov, &SolverOptions::default())?;
    let f = energy_flows(&s.masses, &p, &d, &ov);
    println!("method {:?}, N = {}, residual {:.2e}, gap {:.2e}", s.method, s.size, s.residual, s.gap);
    println!("P = {:.6e}  Qdot = {:.6e}  EdotD = {:.6e}", f.p, f.qdot, f.edot_d);
    println!("EdotM = {:.6e}  EdotB = {:.6e}  EdotG = {:.6e}", f.edot_m, f.edot_b, f.edot_g);
    let n = particle_currents(&s.masses, &p, &ov);
    println!("net charge current {:.2e}", n.total());

    if let Some(rep) = &s.spectral {
        let xs: Vec<f64> = (-12..=12).map(|k| k as f64 * 0.25).collect();
        println!("\n{:>6} {:>12} {:>12} {:>12}", "D1", "rho00", "rhoLL", "rhoRR");
        for (x, m) in xs.iter().zip(marginal_distribution(&rep.coefficients, &xs)) {
            println!("{x:>6.2} {:>12.4e} {:>12.4e} {:>12.4e}", m[0], m[1], m[2]);
        }
    }
    Ok(())
}
