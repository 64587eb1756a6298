//! Normalized probabilists' Hermite functions and their half-line overlaps.

use nalgebra::DMatrix;

use crate::error::{DemonError, Result};

pub const MAX_ORDER: usize = 512;

/// `ln k!` and `ln k!!` for `0 ≤ k ≤ n`, with `(-1)!! = 0!! = 1`.
struct LogFactorials {
    fact: Vec<f64>,
    dfact: Vec<f64>,
}

impl LogFactorials {
    fn new(n: usize) -> Self {
        let mut fact = vec![0.0; n + 1];
        let mut dfact = vec![0.0; n + 1];
        for k in 1..=n {
            let lk = (k as f64).ln();
            fact[k] = fact[k - 1] + lk;
            dfact[k] = if k >= 2 { dfact[k - 2] + lk } else { lk };
        }
        LogFactorials { fact, dfact }
    }

    /// `ln k!!` accepting `k = -1`.
    fn dfact(&self, k: isize) -> f64 {
        if k <= 0 {
            0.0
        } else {
            self.dfact[k as usize]
        }
    }
}

/// `I_mn = ∫_0^∞ He_m(x) He_n(x) e^{-x²/2} / sqrt(2π m! n!) dx`.
///
/// The entries do not depend on the variance of the basis because the
/// integral is scale invariant on the half-line.
#[derive(Clone, Debug)]
pub struct HalfLineTable {
    n: usize,
    entries: DMatrix<f64>,
}

impl HalfLineTable {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_ORDER {
            return Err(DemonError::InvalidParameter(format!(
                "half-line table order must be in 1..={MAX_ORDER}, got {n}"
            )));
        }
        let lf = LogFactorials::new(n);
        let mut entries = DMatrix::zeros(n, n);
        for m in 0..n {
            for k in m..n {
                let v = entry_with(&lf, m, k);
                if !v.is_finite() {
                    return Err(DemonError::NumericalRange(format!("I[{m},{k}] is not finite")));
                }
                entries[(m, k)] = v;
                entries[(k, m)] = v;
            }
        }
        Ok(HalfLineTable { n, entries })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.entries[(m, n)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Mass of the expansion `Σ c_n φ_n` on `D > 0`.
    pub fn right_mass(&self, c: &[f64]) -> f64 {
        c.iter().enumerate().map(|(k, ck)| self.entries[(0, k)] * ck).sum()
    }
}

fn entry_with(lf: &LogFactorials, m: usize, n: usize) -> f64 {
    if m == n {
        return 0.5;
    }
    if (m + n) % 2 == 0 {
        return 0.0;
    }
    let (e, o) = if m % 2 == 0 { (m, n) } else { (n, m) };
    let ln_mag = lf.dfact(o as isize) + lf.dfact(e as isize - 1)
        - 0.5 * ((2.0 * std::f64::consts::PI).ln() + lf.fact[e] + lf.fact[o]);
    let sign = if ((e + o - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
    sign * ln_mag.exp() / (o as f64 - e as f64)
}

/// Single table entry without building the whole table.
pub fn halfline_entry(m: usize, n: usize) -> f64 {
    entry_with(&LogFactorials::new(m.max(n)), m, n)
}

/// `He_k(x)/sqrt(k!)` for `k < n`, each multiplied by `weight`, via the
/// normalized three-term recurrence.
pub fn hermite_functions(x: f64, n: usize, weight: f64, out: &mut Vec<f64>) {
    out.clear();
    if n == 0 {
        return;
    }
    out.push(weight);
    if n == 1 {
        return;
    }
    out.push(x * weight);
    for k in 1..n - 1 {
        let kf = k as f64;
        let next = (x * out[k] - kf.sqrt() * out[k - 1]) / (kf + 1.0).sqrt();
        out.push(next);
    }
}

/// First row `I_0k`, `k < n`; enough to split any expansion into half-line masses.
pub fn halfline_row0(n: usize) -> Vec<f64> {
    let lf = LogFactorials::new(n.max(1));
    (0..n).map(|k| entry_with(&lf, 0, k)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `He_k(x)/sqrt(k!)·e^{-x²/4}` from the unnormalized recurrence, for the quadrature oracle.
    fn oracle_functions(x: f64, n: usize) -> Vec<f64> {
        let mut he = vec![1.0, x];
        for k in 1..n {
            he.push(x * he[k] - k as f64 * he[k - 1]);
        }
        let mut fact = 1.0f64;
        (0..n)
            .map(|k| {
                if k > 0 {
                    fact *= k as f64;
                }
                he[k] / fact.sqrt() * (-0.25 * x * x).exp()
            })
            .collect()
    }

    fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
                let mut dp = 0.0;
                for _ in 0..100 {
                    let (mut p0, mut p1) = (1.0, x);
                    for k in 2..=n {
                        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                        p0 = p1;
                        p1 = p2;
                    }
                    dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
                    let dx = p1 / dp;
                    x -= dx;
                    if dx.abs() < 1e-16 {
                        break;
                    }
                }
                (x, 2.0 / ((1.0 - x * x) * dp * dp))
            })
            .collect()
    }

    /// Composite 20-point Gauss–Legendre on `[0, 24]` with interval halving until stable.
    fn quadrature_table(n: usize, panels: usize) -> Vec<Vec<f64>> {
        let rule = gauss_legendre(20);
        let mut acc = vec![vec![0.0; n]; n];
        let h = 24.0 / panels as f64;
        for p in 0..panels {
            let mid = (p as f64 + 0.5) * h;
            for &(x, w) in &rule {
                let xx = mid + 0.5 * h * x;
                let f = oracle_functions(xx, n);
                let ww = 0.5 * h * w / (2.0 * std::f64::consts::PI).sqrt();
                for i in 0..n {
                    for j in 0..n {
                        acc[i][j] += ww * f[i] * f[j];
                    }
                }
            }
        }
        acc
    }

    #[test]
    fn table_matches_quadrature_below_order_forty() {
        let t = HalfLineTable::new(40).unwrap();
        let coarse = quadrature_table(40, 96);
        let fine = quadrature_table(40, 192);
        for m in 0..40 {
            for n in 0..40 {
                // The two quadrature levels agree far below the tolerance.
                assert!((coarse[m][n] - fine[m][n]).abs() < 1e-13);
                let err = (t.get(m, n) - fine[m][n]).abs();
                assert!(err <= 1e-10, "I[{m},{n}] = {} vs {}", t.get(m, n), fine[m][n]);
            }
        }
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(halfline_entry(0, 0), 0.5);
        assert_eq!(halfline_entry(0, 2), 0.0);
        assert!((halfline_entry(0, 1) - 1.0 / (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-16);
        assert_eq!(halfline_entry(3, 5), 0.0);
    }

    #[test]
    fn table_structure_up_to_maximal_order() {
        let t = HalfLineTable::new(MAX_ORDER).unwrap();
        for m in 0..MAX_ORDER {
            assert_eq!(t.get(m, m), 0.5);
            for n in 0..MAX_ORDER {
                let v = t.get(m, n);
                assert!(v.is_finite());
                assert_eq!(v, t.get(n, m));
                if m != n && (m + n) % 2 == 0 {
                    assert_eq!(v, 0.0);
                }
            }
        }
        assert!(HalfLineTable::new(MAX_ORDER + 1).is_err());
        assert!(HalfLineTable::new(0).is_err());
    }

    #[test]
    fn row_zero_matches_table() {
        let t = HalfLineTable::new(64).unwrap();
        let r = halfline_row0(64);
        for (k, v) in r.iter().enumerate() {
            assert_eq!(*v, t.get(0, k));
        }
    }

    #[test]
    fn recurrence_matches_unnormalized_polynomials() {
        let mut out = Vec::new();
        for x in [-3.0, -0.4, 0.0, 1.3, 4.5] {
            hermite_functions(x, 30, (-0.25 * x * x).exp(), &mut out);
            let o = oracle_functions(x, 30);
            for k in 0..30 {
                assert!((out[k] - o[k]).abs() < 1e-12 * (1.0 + o[k].abs()), "{x} {k}");
            }
        }
    }
}
