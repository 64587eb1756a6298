//! Affine map sending arbitrary detector couplings to the canonical outcome triangle.

use dqd_demon::cli::postprocess_coefficients;

fn main() -> dqd_demon::Result<()> {
    let (a, b) = ([0.2, -0.7, 1.3], [0.9, -1.2, -0.8]);
    let c = postprocess_coefficients(a[0], a[1], a[2], b[0], b[1], b[2])?;
    println!("{c:?}");
    for (k, name) in ["empty", "left", "right"].iter().enumerate() {
        let (x, y) = c.apply(a[k], b[k]);
        println!("{name:>5}: ({:+.3}, {:+.3}) -> ({:+.12}, {:+.12})", a[k], b[k], x + 0.0, y + 0.0);
    }
    Ok(())
}
