//! Quantum and classical descriptions as environmental dephasing grows, plus
//! the classical rate equation and the error-free classical cycle.

use dqd_demon::energetics::energy_flows;
use dqd_demon::model::{DetectorParams, RateOverride, SystemParams};
use dqd_demon::reduced::{classical_ideal_steady, classical_rates, ClassicalRateModel};
use dqd_demon::solver::{solve_steady, SolverOptions};
use dqd_demon::spectral::Branch;

fn main() -> dqd_demon::Result<()> {
    let ov = RateOverride::none();
    let d = DetectorParams::new(1.0, 1.0);
    println!(
        "{:>9} {:>13} {:>13} {:>13} {:>10} {:>10}",
        "Gamma_phi", "P quantum", "P classical", "P rate eq.", "xi2", "xi3"
    );
    for gphi in [0.01, 0.1, 1.0, 10.0, 100.0] {
        let mut p = SystemParams::symmetric(0.1, 0.1, 3.0, 5.0);
        p.gamma_phi = gphi;
        let q = solve_steady(Branch::Quantum, &p, &d, &ov, &SolverOptions::spectral(100))?;
        let c = solve_steady(Branch::Classical, &p, &d, &ov, &SolverOptions::spectral(100))?;
        let (xi2, xi3) = classical_rates(&p, &d, &ov);
        println!(
            "{gphi:>9} {:>13.5e} {:>13.5e} {:>13.5e} {xi2:>10.3e} {xi3:>10.3e}",
            energy_flows(&q.masses, &p, &d, &ov).p,
            energy_flows(&c.masses, &p, &d, &ov).p,
            ClassicalRateModel::new(&p, &d, &ov).power(&p, &ov)?,
        );
    }
    let p = SystemParams::symmetric(0.1, 0.1, 3.0, 5.0);
    let ideal = classical_ideal_steady(&p, &DetectorParams::new(10.0, 1.0), &ov)?;
    println!("\nerror-free cycle: populations {:?}, current {:.4e}", ideal.populations, ideal.current);
    Ok(())
}
