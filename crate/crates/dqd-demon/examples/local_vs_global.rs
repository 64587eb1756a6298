//! Power from counting fields with site (local) and eigenbasis (global)
//! dissipators in the fast-detector limit.

use dqd_demon::model::{locality_diagnostics, DetectorParams, RateOverride, SystemParams};
use dqd_demon::reduced::{global_power_fcs, local_power_fcs};

fn main() -> dqd_demon::Result<()> {
    let ov = RateOverride::none();
    for g in [0.05, 0.1, 0.5] {
        let mut p = SystemParams::symmetric(0.1, 0.1, 3.0, 5.0);
        p.g = g;
        println!("g = {g} (g/Delta = {:.3})", locality_diagnostics(&p).g_over_delta);
        for ratio in [0.01, 0.1, 1.0, 10.0, 100.0] {
            let d = DetectorParams::with_ratio(10.0, ratio);
            let (gl, lo) = (global_power_fcs(&p, &d, &ov)?, local_power_fcs(&p, &d, &ov)?);
            println!("  lambda/g1 = {ratio:>6}: global {gl:>12.5e}  local {lo:>12.5e}  rel {:.2e}", (gl - lo).abs() / lo.abs());
        }
    }
    Ok(())
}
