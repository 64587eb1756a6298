//! Fast-detector reduction: error probability, effective interdot rate,
//! closed-form power and heat, the demon condition and the 5×5 generator.

use dqd_demon::model::{DetectorParams, RateOverride, SystemParams};
use dqd_demon::reduced::{
    demon_condition, error_probability, fast_detector_generator, heat_analytic, power_analytic, xi_effective,
};

fn main() -> dqd_demon::Result<()> {
    let p = SystemParams::symmetric(0.1, 0.1, 3.0, 15.0);
    let ov = RateOverride::none();
    println!(
        "{:>10} {:>10} {:>11} {:>12} {:>12} {:>12} {:>6}",
        "lambda/g1", "eta", "xi", "P closed", "P generator", "Qdot", "demon"
    );
    for ratio in [0.01, 0.1, 0.3, 1.0, 3.0, 10.0, 100.0, 1e4] {
        let d = DetectorParams::with_ratio(10.0, ratio);
        let m = fast_detector_generator(&p, &d, &ov);
        let s = m.steady_state(&p, &d, &ov)?;
        println!(
            "{ratio:>10} {:>10.3e} {:>11.4e} {:>12.5e} {:>12.5e} {:>12.5e} {:>6}",
            error_probability(d.lambda_1, d.gamma_1),
            xi_effective(&p, &d, &ov),
            power_analytic(&p, &d, &ov),
            s.flows.p,
            heat_analytic(&p, &d, &ov),
            demon_condition(&p, &d, &ov).holds
        );
    }
    Ok(())
}
