//! Finite-volume solver for the same stationary problem as [`crate::spectral`].
//!
//! Cell-centred grid on `[-L, L]` with an even number of cells so that `D = 0`
//! is a face and the feedback step is resolved exactly. Transport uses the
//! Scharfetter–Gummel flux, which is exact for the linear drift within a face,
//! with zero flux at both ends. Unknowns are ordered node-major so the matrix
//! is banded with half-bandwidth equal to the number of components.

use crate::error::{DemonError, Result};
use crate::model::{DetectorParams, RateOverride, SystemParams};
use crate::solver::HalfLineMasses;
use crate::spectral::{drift_offsets, local_couplings, Branch};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridOptions {
    /// Half-width is `1 + widths·√σ`.
    pub widths: f64,
    /// Target spacing is `min(√σ/cells_per_std, max_spacing)`.
    pub cells_per_std: f64,
    pub max_spacing: f64,
    pub min_cells: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            widths: 12.0,
            cells_per_std: 40.0,
            max_spacing: 0.05,
            min_cells: 2000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct GridSolution {
    pub branch: Branch,
    pub x: Vec<f64>,
    pub h: f64,
    /// `density[k][i]` of component `k` in cell `i`.
    pub density: Vec<Vec<f64>>,
    pub residual_norm: f64,
}

impl GridSolution {
    pub fn cells(&self) -> usize {
        self.x.len()
    }

    pub fn halfline_masses(&self) -> HalfLineMasses {
        let g = self.cells();
        let mut m = HalfLineMasses::default();
        for (k, slot) in [0usize, 1, 2, 3].iter().enumerate() {
            if *slot >= self.density.len() {
                continue;
            }
            let rho = &self.density[*slot];
            m.left[k] = rho[..g / 2].iter().sum::<f64>() * self.h;
            m.right[k] = rho[g / 2..].iter().sum::<f64>() * self.h;
        }
        m
    }
}

/// Banded matrix in LAPACK layout with room for the fill of partial pivoting.
struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ld: usize,
    ab: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn new(n: usize, kl: usize, ku: usize) -> Self {
        let ld = 2 * kl + ku + 1;
        BandLu {
            n,
            kl,
            ku,
            ld,
            ab: vec![0.0; ld * n],
            piv: vec![0; n],
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ld + (self.kl + self.ku + i - j)
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i + self.ku >= j && j + self.kl >= i);
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    fn set_row_unit(&mut self, i: usize) {
        let lo = i.saturating_sub(self.ku);
        let hi = (i + self.kl).min(self.n - 1);
        for j in lo..=hi {
            let k = self.idx(i, j);
            self.ab[k] = 0.0;
        }
        let k = self.idx(i, i);
        self.ab[k] = 1.0;
    }

    fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for (i, yi) in y.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *yi += self.ab[self.idx(i, j)] * x[j];
            }
        }
        y
    }

    fn factor(&mut self) -> Result<()> {
        let (n, kl, kv) = (self.n, self.kl, self.kl + self.ku);
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = 0.0f64;
            for t in 0..=km {
                let v = self.ab[j * self.ld + kv + t].abs();
                if v > best {
                    best = v;
                    jp = t;
                }
            }
            self.piv[j] = j + jp;
            if best == 0.0 {
                return Err(DemonError::DegenerateSteadyState { gap: 1.0 });
            }
            ju = ju.max((j + self.ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    let a = self.idx(j, c);
                    let b = self.idx(j + jp, c);
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[j * self.ld + kv];
            for t in 1..=km {
                self.ab[j * self.ld + kv + t] /= pivot;
            }
            for c in j + 1..=ju {
                let ujc = self.ab[self.idx(j, c)];
                if ujc == 0.0 {
                    continue;
                }
                for t in 1..=km {
                    let l = self.ab[j * self.ld + kv + t];
                    let k = self.idx(j + t, c);
                    self.ab[k] -= l * ujc;
                }
            }
        }
        Ok(())
    }

    fn solve(&self, b: &mut [f64]) {
        let (n, kl, kv) = (self.n, self.kl, self.kl + self.ku);
        for j in 0..n {
            let p = self.piv[j];
            if p != j {
                b.swap(j, p);
            }
            let km = kl.min(n - 1 - j);
            for t in 1..=km {
                b[j + t] -= self.ab[j * self.ld + kv + t] * b[j];
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.ab[j * self.ld + kv];
            let lo = j.saturating_sub(kv);
            for i in lo..j {
                b[i] -= self.ab[self.idx(i, j)] * b[j];
            }
        }
    }
}

/// `x/(eˣ − 1)`, continuous at 0.
fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-12 {
        1.0 - 0.5 * x
    } else {
        x / x.exp_m1()
    }
}

pub fn solve_grid(
    branch: Branch,
    p: &SystemParams,
    d: &DetectorParams,
    ov: &RateOverride,
    opts: &GridOptions,
) -> Result<GridSolution> {
    p.validate()?;
    d.validate()?;
    let sigma = d.sigma();
    let s = sigma.sqrt();
    let half = 1.0 + opts.widths * s;
    let target = (s / opts.cells_per_std).min(opts.max_spacing);
    let mut g = ((2.0 * half / target).ceil() as usize).max(opts.min_cells);
    if g % 2 == 1 {
        g += 1;
    }
    let h = 2.0 * half / g as f64;
    let x: Vec<f64> = (0..g).map(|i| -half + (i as f64 + 0.5) * h).collect();
    let nc = branch.components();
    let n = nc * g;
    let mut band = BandLu::new(n, nc, nc);
    let couplings = local_couplings(branch, p, d, ov);

    for (i, &xi) in x.iter().enumerate() {
        let above = xi > 0.0;
        for &(r, c, lo, hi) in &couplings {
            let v = if above { hi } else { lo };
            if v != 0.0 {
                band.add(i * nc + r, i * nc + c, v);
            }
        }
    }
    let diff = d.gamma_1 * sigma / h;
    for (k, &off) in drift_offsets(branch).iter().enumerate() {
        for i in 0..g - 1 {
            let xf = -half + (i + 1) as f64 * h;
            let ah = (xf + off) / sigma * h;
            // J = diff·(B(ah)ρ_i − B(−ah)ρ_{i+1}); cell i loses J/h, cell i+1 gains it.
            let wi = diff * bernoulli(ah) / h;
            let wj = diff * bernoulli(-ah) / h;
            let (ri, rj) = (i * nc + k, (i + 1) * nc + k);
            band.add(ri, ri, -wi);
            band.add(ri, rj, wj);
            band.add(rj, ri, wi);
            band.add(rj, rj, -wj);
        }
    }

    let original = BandLu {
        n: band.n,
        kl: band.kl,
        ku: band.ku,
        ld: band.ld,
        ab: band.ab.clone(),
        piv: vec![],
    };
    let pin = (g / 2) * nc;
    band.set_row_unit(pin);
    band.factor()?;
    let mut sol = vec![0.0; n];
    sol[pin] = 1.0;
    band.solve(&mut sol);

    let trace: f64 = (0..g).map(|i| sol[i * nc] + sol[i * nc + 1] + sol[i * nc + 2]).sum::<f64>() * h;
    if !(trace.is_finite() && trace > 0.0) {
        return Err(DemonError::NumericalRange(format!("grid solution has trace {trace}")));
    }
    for v in sol.iter_mut() {
        *v /= trace;
    }
    let res = original.mul(&sol);
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let residual_norm = norm(&res) / norm(&sol);
    let density = (0..nc).map(|k| (0..g).map(|i| sol[i * nc + k]).collect()).collect();
    Ok(GridSolution {
        branch,
        x,
        h,
        density,
        residual_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energetics::{particle_currents, power_from_currents};
    use crate::solver::solve_spectral;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};

    #[test]
    fn banded_lu_matches_dense_solve() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let (n, kl, ku) = (40, 3, 3);
        let mut band = BandLu::new(n, kl, ku);
        let mut dense = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // Weak diagonal forces row exchanges.
                let v: f64 = rng.random_range(-1.0..1.0) + if i == j { 0.01 } else { 0.0 };
                band.add(i, j, v);
                dense[(i, j)] = v;
            }
        }
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let want = dense.clone().lu().solve(&DVector::from_vec(b.clone())).unwrap();
        let y = band.mul(want.as_slice());
        for (a, c) in y.iter().zip(&b) {
            assert!((a - c).abs() < 1e-10);
        }
        band.factor().unwrap();
        let mut x = b;
        band.solve(&mut x);
        for (a, c) in x.iter().zip(want.iter()) {
            assert!((a - c).abs() < 1e-9 * (1.0 + c.abs()), "{a} {c}");
        }
    }

    #[test]
    fn bernoulli_is_continuous_at_zero() {
        assert_eq!(bernoulli(0.0), 1.0);
        assert!((bernoulli(1e-11) - bernoulli(-1e-11) + 1e-11).abs() < 1e-15);
        assert!((bernoulli(1.0) - 1.0 / (std::f64::consts::E - 1.0)).abs() < 1e-15);
        // B(x) − B(−x) = −x.
        assert!((bernoulli(3.0) - bernoulli(-3.0) + 3.0).abs() < 1e-13);
    }

    #[test]
    fn grid_and_spectral_powers_agree() {
        let p = SystemParams::symmetric(0.1, 0.1, 3.0, 5.0);
        let ov = RateOverride::none();
        for ratio in [0.1, 1.0, 10.0] {
            let d = DetectorParams::with_ratio(10.0, ratio);
            for branch in [Branch::Quantum, Branch::Classical] {
                let gs = solve_grid(branch, &p, &d, &ov, &GridOptions::default()).unwrap();
                let m = gs.halfline_masses();
                assert!((m.trace() - 1.0).abs() < 1e-12);
                assert!(gs.density.iter().flatten().take(3 * gs.cells()).all(|&v| v > -1e-12));
                let pg = power_from_currents(&particle_currents(&m, &p, &ov), &p);
                let sp = solve_spectral(branch, &p, &d, &ov, 200).unwrap();
                let ps = power_from_currents(&particle_currents(&sp.masses, &p, &ov), &p);
                assert!((pg - ps).abs() <= 1e-4 * ps.abs(), "{ratio} {branch:?}: {pg} vs {ps}");
            }
        }
    }
}
