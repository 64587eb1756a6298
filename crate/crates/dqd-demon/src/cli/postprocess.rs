//! Affine recalibration of a detector with arbitrary couplings.
//!
//! A detector whose signal drifts towards `(a_j, b_j)` for the three charge
//! states is mapped onto the canonical targets `(0,1)`, `(−1,−1)`, `(1,−1)`.

use serde::Serialize;

use crate::error::{DemonError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PostProcessCoefficients {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
    pub d0: f64,
    pub d0p: f64,
    pub normalizer: f64,
}

impl PostProcessCoefficients {
    /// `(D, D') = [[x, y], [z, w]]·(D_A, D_B) + (D0, D0')`.
    pub fn apply(&self, da: f64, db: f64) -> (f64, f64) {
        (
            self.x * da + self.y * db + self.d0,
            self.z * da + self.w * db + self.d0p,
        )
    }
}

/// Couplings ordered `(empty, left, right)` for each detector channel.
pub fn postprocess_coefficients(a0: f64, al: f64, ar: f64, b0: f64, bl: f64, br: f64) -> Result<PostProcessCoefficients> {
    let n = a0 * (br - bl) + al * (b0 - br) + ar * (bl - b0);
    let scale = [a0, al, ar, b0, bl, br].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !n.is_finite() || n.abs() <= 64.0 * f64::EPSILON * scale * scale {
        return Err(DemonError::DegenerateGeometry(format!(
            "coupling points are collinear (normalizer {n:e})"
        )));
    }
    Ok(PostProcessCoefficients {
        x: (bl + br - 2.0 * b0) / n,
        y: (2.0 * a0 - al - ar) / n,
        z: 2.0 * (br - bl) / n,
        w: 2.0 * (al - ar) / n,
        d0: (b0 * (al + ar) - a0 * (bl + br)) / n,
        d0p: (a0 * (bl - br) - al * (b0 + br) + ar * (b0 + bl)) / n,
        normalizer: n,
    })
}

/// Parses `a0,aL,aR,b0,bL,bR`.
pub fn parse_couplings(s: &str) -> Result<[f64; 6]> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| DemonError::Parse(format!("'{t}' is not a number")))
        })
        .collect::<Result<_>>()?;
    v.try_into()
        .map_err(|v: Vec<f64>| DemonError::Parse(format!("expected 6 couplings, got {}", v.len())))
}
