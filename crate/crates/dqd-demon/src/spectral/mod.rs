//! Generalized-Hermite expansion of the one-dimensional Fokker–Planck master
//! equation with an ideal charge detector.
//!
//! Each density-matrix component is expanded as
//! `ρ(D) = Σ_n c_n G_b(D) He_n(D/√σ_b)/√n!` where `G_b` is the centred
//! Gaussian of variance `σ_b`. With `σ_b = σ = γ₁/(8λ₁)` this is the natural
//! basis of the detector; a wider `σ_b` is used for sharp detectors, where the
//! kink of the densities at `D = 0` converges faster in a broader basis.
//!
//! The matrix is assembled in real form. Quantum unknowns are ordered
//! `[c00, cLL, cRR, Re cLR, Im cLR]` (blocks of `N`), classical unknowns
//! `[c00, cLL, cRR]`.

pub mod hermite;

use nalgebra::{DMatrix, DVector};

use crate::error::{DemonError, Result};
use crate::model::{smallest_with_gap, DetectorParams, RateOverride, RateTable, SystemParams, C64};
use crate::reduced::classical_rates;
use crate::solver::HalfLineMasses;
pub use hermite::{halfline_entry, halfline_row0, hermite_functions, HalfLineTable, MAX_ORDER};

pub const MIN_ORDER: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Branch {
    Quantum,
    Classical,
}

impl Branch {
    pub fn components(self) -> usize {
        match self {
            Branch::Quantum => 5,
            Branch::Classical => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Negative,
    Positive,
}

/// Basis variance used for order `n`. Broad detectors (`1/σ ≤ 8`) use the
/// natural variance; sharp ones widen it by `1 + 2(n/100)^0.6`, a rule
/// calibrated against the finite-volume solver.
pub fn default_basis_variance(sigma: f64, n: usize) -> f64 {
    if 1.0 / sigma <= 8.0 {
        sigma
    } else {
        sigma * (1.0 + 2.0 * (n as f64 / 100.0).powf(0.6))
    }
}

/// Assembled real-form spectral matrix with the metadata needed to decode its null vector.
#[derive(Clone, Debug)]
pub struct SpectralMatrix {
    pub matrix: DMatrix<f64>,
    pub branch: Branch,
    pub n: usize,
    pub sigma: f64,
    pub sigma_basis: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCoefficients {
    pub n: usize,
    pub sigma: f64,
    pub sigma_basis: f64,
    pub branch: Branch,
    pub c00: Vec<f64>,
    pub cll: Vec<f64>,
    pub crr: Vec<f64>,
    /// Zero for the classical branch.
    pub clr: Vec<C64>,
}

#[derive(Clone, Debug)]
pub struct SteadyStateReport {
    pub coefficients: SpectralCoefficients,
    pub residual_norm: f64,
    pub singular_gap: f64,
    pub n_used: usize,
}

fn check_order(n: usize) -> Result<()> {
    if !(MIN_ORDER..=MAX_ORDER).contains(&n) {
        return Err(DemonError::InvalidParameter(format!(
            "truncation order must be in {MIN_ORDER}..={MAX_ORDER}, got {n}"
        )));
    }
    Ok(())
}

/// Drift ladder of one component whose detector mean sits at `-k`.
fn add_drift(m: &mut DMatrix<f64>, block: usize, n: usize, gamma_1: f64, k: f64, sigma: f64, sigma_b: f64) {
    let o = block * n;
    let spread = 1.0 - sigma / sigma_b;
    for i in 0..n {
        let fi = i as f64;
        m[(o + i, o + i)] -= gamma_1 * fi;
        if i >= 1 && k != 0.0 {
            m[(o + i, o + i - 1)] -= gamma_1 * k * (fi / sigma_b).sqrt();
        }
        if i >= 2 && spread != 0.0 {
            m[(o + i, o + i - 2)] -= gamma_1 * spread * (fi * (fi - 1.0)).sqrt();
        }
    }
}

fn add_diag(m: &mut DMatrix<f64>, bi: usize, bj: usize, n: usize, v: f64) {
    if v == 0.0 {
        return;
    }
    for i in 0..n {
        m[(bi * n + i, bj * n + i)] += v;
    }
}

/// Adds `below·Id + (above − below)·θ` where `θ` acts as the half-line table.
fn add_step(m: &mut DMatrix<f64>, bi: usize, bj: usize, t: &HalfLineTable, below: f64, above: f64) {
    let n = t.order();
    add_diag(m, bi, bj, n, below);
    let jump = above - below;
    if jump == 0.0 {
        return;
    }
    for i in 0..n {
        for j in 0..n {
            let e = t.get(i, j);
            if e != 0.0 {
                m[(bi * n + i, bj * n + j)] += jump * e;
            }
        }
    }
}

/// Drift offsets `k` of each component: the detector mean of the component sits at `-k`.
pub(crate) fn drift_offsets(branch: Branch) -> &'static [f64] {
    match branch {
        Branch::Quantum => &[0.0, 1.0, -1.0, 0.0, 0.0],
        Branch::Classical => &[0.0, 1.0, -1.0],
    }
}

/// Local couplings `(row, col, value for D ≤ 0, value for D > 0)` between
/// components at a fixed detector outcome. The feedback switches between the
/// second and third gate configuration across `D = 0`.
pub(crate) fn local_couplings(
    branch: Branch,
    p: &SystemParams,
    d: &DetectorParams,
    ov: &RateOverride,
) -> Vec<(usize, usize, f64, f64)> {
    let r = RateTable::new(p, ov);
    let (a, b, c) = (0, 1, 2);
    let mut out = vec![
        (a, a, -r.g_l0 - r.g_ru, -r.g_l0 - r.g_ru),
        (a, b, r.k_ld, r.k_lu),
        (a, c, r.k_rd, r.k_r0),
        (b, a, r.g_l0, r.g_l0),
        (c, a, r.g_ru, r.g_ru),
    ];
    match branch {
        Branch::Quantum => {
            let (u, v) = (3, 4);
            let g = p.g;
            let gt = d.gamma_tilde(p);
            let det = p.eps_u - p.eps_0;
            let alpha2 = -(r.k_ld + r.k_rd) / 2.0 - 2.0 * gt;
            let alpha3 = -(r.k_lu + r.k_r0) / 2.0 - 2.0 * gt;
            out.extend([
                (b, b, -r.k_ld, -r.k_lu),
                (b, v, -2.0 * g, -2.0 * g),
                (c, c, -r.k_rd, -r.k_r0),
                (c, v, 2.0 * g, 2.0 * g),
                (u, u, alpha2, alpha3),
                (u, v, 0.0, det),
                (v, b, g, g),
                (v, c, -g, -g),
                (v, u, 0.0, -det),
                (v, v, alpha2, alpha3),
            ]);
        }
        Branch::Classical => {
            let (xi2, xi3) = classical_rates(p, d, ov);
            out.extend([
                (b, b, -r.k_ld - xi2, -r.k_lu - xi3),
                (b, c, xi2, xi3),
                (c, b, xi2, xi3),
                (c, c, -r.k_rd - xi2, -r.k_r0 - xi3),
            ]);
        }
    }
    out
}

/// Quantum branch with the default basis variance.
pub fn assemble_m(p: &SystemParams, d: &DetectorParams, ov: &RateOverride, n: usize) -> Result<SpectralMatrix> {
    assemble_with_basis(Branch::Quantum, p, d, ov, n, default_basis_variance(d.sigma(), n))
}

pub fn assemble_m_with_basis(
    p: &SystemParams,
    d: &DetectorParams,
    ov: &RateOverride,
    n: usize,
    sigma_b: f64,
) -> Result<SpectralMatrix> {
    assemble_with_basis(Branch::Quantum, p, d, ov, n, sigma_b)
}

/// Classical branch with the default basis variance.
pub fn assemble_m_classical(
    p: &SystemParams,
    d: &DetectorParams,
    ov: &RateOverride,
    n: usize,
) -> Result<SpectralMatrix> {
    assemble_with_basis(Branch::Classical, p, d, ov, n, default_basis_variance(d.sigma(), n))
}

pub fn assemble_m_classical_with_basis(
    p: &SystemParams,
    d: &DetectorParams,
    ov: &RateOverride,
    n: usize,
    sigma_b: f64,
) -> Result<SpectralMatrix> {
    assemble_with_basis(Branch::Classical, p, d, ov, n, sigma_b)
}

pub fn assemble_with_basis(
    branch: Branch,
    p: &SystemParams,
    d: &DetectorParams,
    ov: &RateOverride,
    n: usize,
    sigma_b: f64,
) -> Result<SpectralMatrix> {
    p.validate()?;
    d.validate()?;
    check_order(n)?;
    if !(sigma_b > 0.0 && sigma_b.is_finite()) {
        return Err(DemonError::InvalidParameter(format!("basis variance {sigma_b}")));
    }
    let sigma = d.sigma();
    let t = HalfLineTable::new(n)?;
    let nc = branch.components();
    let mut m = DMatrix::zeros(nc * n, nc * n);
    for (i, j, below, above) in local_couplings(branch, p, d, ov) {
        add_step(&mut m, i, j, &t, below, above);
    }
    for (blk, &k) in drift_offsets(branch).iter().enumerate() {
        add_drift(&mut m, blk, n, d.gamma_1, k, sigma, sigma_b);
    }
    Ok(SpectralMatrix {
        matrix: m,
        branch,
        n,
        sigma,
        sigma_basis: sigma_b,
    })
}

fn check_shape(sm: &SpectralMatrix) -> Result<()> {
    let dim = sm.branch.components() * sm.n;
    let m = &sm.matrix;
    if m.nrows() != m.ncols() || m.nrows() != dim {
        return Err(DemonError::InvalidParameter(format!(
            "matrix is {}x{}, expected {dim}x{dim}",
            m.nrows(),
            m.ncols(),
        )));
    }
    Ok(())
}

/// Normalizes a null vector to unit trace and unpacks the blocks.
fn report(sm: &SpectralMatrix, x: DVector<f64>, gap: f64) -> Result<SteadyStateReport> {
    let n = sm.n;
    let trace = x[0] + x[n] + x[2 * n];
    if trace == 0.0 || !trace.is_finite() {
        return Err(DemonError::NumericalRange("null vector has zero trace".into()));
    }
    let x = x / trace;
    let residual_norm = (&sm.matrix * &x).norm() / x.norm();
    let block = |k: usize| x.rows(k * n, n).iter().copied().collect::<Vec<f64>>();
    let clr = match sm.branch {
        Branch::Quantum => (0..n).map(|i| C64::new(x[3 * n + i], x[4 * n + i])).collect(),
        Branch::Classical => vec![C64::new(0.0, 0.0); n],
    };
    Ok(SteadyStateReport {
        coefficients: SpectralCoefficients {
            n,
            sigma: sm.sigma,
            sigma_basis: sm.sigma_basis,
            branch: sm.branch,
            c00: block(0),
            cll: block(1),
            crr: block(2),
            clr,
        },
        residual_norm,
        singular_gap: gap,
        n_used: n,
    })
}

/// Null vector via a full singular-value decomposition. Exact gap, but
/// `O(30×)` slower than [`steady_state`]; kept as a reference.
pub fn steady_state_svd(sm: &SpectralMatrix) -> Result<SteadyStateReport> {
    check_shape(sm)?;
    let svd = sm.matrix.clone().svd(false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| DemonError::NumericalRange("singular value decomposition failed".into()))?;
    let (imin, gap) = smallest_with_gap(svd.singular_values.as_slice());
    if gap < 1e3 {
        return Err(DemonError::DegenerateSteadyState { gap });
    }
    report(sm, v_t.row(imin).transpose(), gap)
}

/// Bordering vector: no zero entries and no structure aligned with the basis.
fn border(dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |i, _| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_749_895).fract())
}

/// Null vector from the bordered system `[[M, r], [tᵀ, 0]]`, where `t` is the
/// trace functional, so the solution is already normalized.
///
/// The bordered matrix is regular exactly when the null space of `M` is one
/// dimensional. The singular gap `σ₂/σ₁` is estimated with `σ₁ = ‖M v‖`
/// (floored at `ε σ_max`) and `1/σ₂ = ‖M⁺‖`, obtained by power iteration on
/// `M⁺ᵀ M⁺` applied through the bordered factorizations. Power iteration
/// approaches `‖M⁺‖` from below, so the gap estimate is an upper bound that
/// is tight to the stopping tolerance.
pub fn steady_state(sm: &SpectralMatrix) -> Result<SteadyStateReport> {
    check_shape(sm)?;
    let n = sm.n;
    let m = &sm.matrix;
    let dim = m.nrows();
    let r = border(dim);
    let mut t = DVector::zeros(dim);
    for k in 0..3 {
        t[k * n] = 1.0;
    }
    let mut b = DMatrix::zeros(dim + 1, dim + 1);
    b.view_mut((0, 0), (dim, dim)).copy_from(m);
    b.view_mut((0, dim), (dim, 1)).copy_from(&r);
    b.view_mut((dim, 0), (1, dim)).copy_from(&t.transpose());
    let f = Bordered::new(b);
    let mut e = DVector::zeros(dim + 1);
    e[dim] = 1.0;
    let degenerate = || DemonError::DegenerateSteadyState { gap: 1.0 };
    let sol = f.solve(&e, false).ok_or_else(degenerate)?;
    let left = f.solve(&e, true).ok_or_else(degenerate)?;
    if sol.iter().chain(left.iter()).any(|v| !v.is_finite()) {
        return Err(degenerate());
    }
    let x: DVector<f64> = sol.rows(0, dim).into_owned();
    let v = x.normalize();
    let u = left.rows(0, dim).into_owned().normalize();

    let smax = norm2_estimate(m);
    let s1 = (m * &v).norm().max(f64::EPSILON * smax);

    let project = |w: &mut DVector<f64>, q: &DVector<f64>| {
        let c = q.dot(w);
        w.axpy(-c, q, 1.0);
    };
    let pinv = |w: &DVector<f64>, transpose: bool, qin: &DVector<f64>, qout: &DVector<f64>| {
        let mut top = w.clone();
        project(&mut top, qin);
        let mut rhs = DVector::zeros(dim + 1);
        rhs.rows_mut(0, dim).copy_from(&top);
        let s = f.solve(&rhs, transpose)?;
        let mut y = s.rows(0, dim).into_owned();
        project(&mut y, qout);
        Some(y)
    };
    let mut w = border(dim).map(|z| z - 1.25);
    project(&mut w, &u);
    w.normalize_mut();
    let mut est = 0.0;
    for _ in 0..200 {
        let y = pinv(&w, false, &u, &v).ok_or_else(degenerate)?;
        let ny = y.norm();
        let z = pinv(&y, true, &v, &u).ok_or_else(degenerate)?;
        let nz = z.norm();
        if !(nz > 0.0 && nz.is_finite()) {
            break;
        }
        let prev = est;
        est = ny;
        w = z / nz;
        if (est - prev).abs() <= 1e-6 * est {
            break;
        }
    }
    let gap = if est > 0.0 { 1.0 / (est * s1) } else { f64::INFINITY };
    if gap < 1e3 {
        return Err(DemonError::DegenerateSteadyState { gap });
    }
    report(sm, x, gap)
}

/// One LU factorization `P B = L U` serving solves with `B` and `Bᵀ`.
struct Bordered {
    l: DMatrix<f64>,
    u: DMatrix<f64>,
    p: nalgebra::PermutationSequence<nalgebra::Dyn>,
}

impl Bordered {
    fn new(b: DMatrix<f64>) -> Self {
        let lu = b.lu();
        Bordered {
            l: lu.l(),
            u: lu.u(),
            p: lu.p().clone(),
        }
    }

    /// `None` when a pivot vanishes.
    fn solve(&self, rhs: &DVector<f64>, transpose: bool) -> Option<DVector<f64>> {
        let mut x = rhs.clone();
        if transpose {
            // Bᵀ = Uᵀ Lᵀ P.
            if !self.u.tr_solve_upper_triangular_mut(&mut x) || !self.l.tr_solve_lower_triangular_mut(&mut x) {
                return None;
            }
            self.p.inv_permute_rows(&mut x);
        } else {
            self.p.permute_rows(&mut x);
            if !self.l.solve_lower_triangular_mut(&mut x) || !self.u.solve_upper_triangular_mut(&mut x) {
                return None;
            }
        }
        x.iter().all(|v| v.is_finite()).then_some(x)
    }
}

/// Largest singular value by power iteration on `MᵀM`.
fn norm2_estimate(m: &DMatrix<f64>) -> f64 {
    let mut w = DVector::from_element(m.ncols(), 1.0).normalize();
    let mut est = 0.0;
    for _ in 0..100 {
        let y = m * &w;
        let z = m.tr_mul(&y);
        let nz = z.norm();
        if nz == 0.0 {
            return 0.0;
        }
        let prev = est;
        est = y.norm();
        w = z / nz;
        if (est - prev).abs() <= 1e-6 * est {
            break;
        }
    }
    est
}

impl SpectralCoefficients {
    pub fn crl(&self) -> Vec<C64> {
        self.clr.iter().map(|z| z.conj()).collect()
    }

    /// Zeroth-coefficient sum of the three populations.
    pub fn trace(&self) -> f64 {
        self.c00[0] + self.cll[0] + self.crr[0]
    }

    pub fn halfline_masses(&self) -> HalfLineMasses {
        let row = halfline_row0(self.n);
        let right = |c: &[f64]| c.iter().zip(&row).map(|(a, b)| a * b).sum::<f64>();
        let re: Vec<f64> = self.clr.iter().map(|z| z.re).collect();
        let comps: [&[f64]; 4] = [&self.c00, &self.cll, &self.crr, &re];
        let mut m = HalfLineMasses::default();
        for (k, c) in comps.iter().enumerate() {
            m.right[k] = right(c);
            m.left[k] = c[0] - m.right[k];
        }
        m
    }
}

/// Masses of `(ρ00, ρLL, ρRR)` on one half-line.
pub fn populations_halfline(c: &SpectralCoefficients, side: Side) -> [f64; 3] {
    let m = c.halfline_masses();
    let src = match side {
        Side::Negative => m.left,
        Side::Positive => m.right,
    };
    [src[0], src[1], src[2]]
}

/// Densities `(ρ00(D), ρLL(D), ρRR(D))` at each grid point.
pub fn marginal_distribution(c: &SpectralCoefficients, grid: &[f64]) -> Vec<[f64; 3]> {
    let sb = c.sigma_basis;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sb).sqrt();
    let mut h = Vec::with_capacity(c.n);
    grid.iter()
        .map(|&d| {
            let x = d / sb.sqrt();
            hermite_functions(x, c.n, norm * (-0.5 * x * x).exp(), &mut h);
            let dot = |v: &[f64]| v.iter().zip(&h).map(|(a, b)| a * b).sum::<f64>();
            [dot(&c.c00), dot(&c.cll), dot(&c.crr)]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SystemParams;

    fn fig3() -> (SystemParams, DetectorParams) {
        (SystemParams::symmetric(0.1, 0.1, 3.0, 5.0), DetectorParams::new(10.0, 1.0))
    }

    #[test]
    fn coherences_decouple_without_interdot_coupling() {
        let (mut p, d) = fig3();
        p.g = 0.0;
        let n = 20;
        let sm = assemble_m(&p, &d, &RateOverride::none(), n).unwrap();
        for i in 0..3 * n {
            for j in 3 * n..5 * n {
                assert_eq!(sm.matrix[(i, j)], 0.0);
                assert_eq!(sm.matrix[(j, i)], 0.0);
            }
        }
    }

    #[test]
    fn zeroth_population_rows_sum_to_zero() {
        let (p, d) = fig3();
        for branch in [Branch::Quantum, Branch::Classical] {
            for sb in [d.sigma(), 3.0 * d.sigma()] {
                let n = 40;
                let sm = assemble_with_basis(branch, &p, &d, &RateOverride::none(), n, sb).unwrap();
                let scale = sm.matrix.abs().max();
                for col in 0..sm.matrix.ncols() {
                    let s = sm.matrix[(0, col)] + sm.matrix[(n, col)] + sm.matrix[(2 * n, col)];
                    assert!(s.abs() <= 1e-10 * scale, "{branch:?} col {col}: {s}");
                }
            }
        }
    }

    #[test]
    fn empty_block_diagonal_is_the_drift_ladder() {
        let (p, d) = fig3();
        let r = RateTable::new(&p, &RateOverride::none());
        let n = 30;
        let sm = assemble_m(&p, &d, &RateOverride::none(), n).unwrap();
        for i in 0..n {
            let drift = sm.matrix[(i, i)] + r.g_l0 + r.g_ru;
            assert!((drift + d.gamma_1 * i as f64).abs() < 1e-12, "{i}");
        }
    }

    #[test]
    fn order_bounds() {
        let (p, d) = fig3();
        assert!(assemble_m(&p, &d, &RateOverride::none(), MIN_ORDER - 1).is_err());
        assert!(assemble_m(&p, &d, &RateOverride::none(), MAX_ORDER + 1).is_err());
        let c = assemble_m_classical(&p, &d, &RateOverride::none(), 16).unwrap();
        assert_eq!(c.matrix.shape(), (48, 48));
    }

    #[test]
    fn isolated_dot_is_degenerate() {
        let (mut p, d) = fig3();
        p.gamma = 0.0;
        p.g = 0.0;
        let sm = assemble_m(&p, &d, &RateOverride::none(), 20).unwrap();
        assert!(matches!(steady_state(&sm), Err(DemonError::DegenerateSteadyState { .. })));
        assert!(matches!(steady_state_svd(&sm), Err(DemonError::DegenerateSteadyState { .. })));
    }

    #[test]
    fn steady_state_is_accepted_at_reference_point() {
        let (p, d) = fig3();
        let sm = assemble_m(&p, &d, &RateOverride::none(), 100).unwrap();
        let r = steady_state(&sm).unwrap();
        assert!(r.residual_norm <= 1e-9, "{}", r.residual_norm);
        assert!(r.singular_gap >= 1e6, "{}", r.singular_gap);
        assert!((r.coefficients.trace() - 1.0).abs() < 1e-14);
        let crl = r.coefficients.crl();
        for (a, b) in r.coefficients.clr.iter().zip(&crl) {
            assert_eq!(*a, b.conj());
        }
    }

    #[test]
    fn bordered_solve_matches_svd() {
        let (p, _) = fig3();
        for ratio in [0.01, 0.3, 3.0] {
            let d = DetectorParams::with_ratio(10.0, ratio);
            for branch in [Branch::Quantum, Branch::Classical] {
                let sm = assemble_with_basis(branch, &p, &d, &RateOverride::none(), 40, default_basis_variance(d.sigma(), 40))
                    .unwrap();
                let a = steady_state(&sm).unwrap();
                let b = steady_state_svd(&sm).unwrap();
                let ca = &a.coefficients;
                let cb = &b.coefficients;
                let scale = ca.c00.iter().chain(&ca.cll).chain(&ca.crr).fold(1.0f64, |m, x| m.max(x.abs()));
                for (x, y) in ca.c00.iter().chain(&ca.cll).chain(&ca.crr).zip(cb.c00.iter().chain(&cb.cll).chain(&cb.crr)) {
                    assert!((x - y).abs() < 1e-10 * scale, "{ratio} {branch:?}: {x} {y}");
                }
                // The estimate approaches the exact gap from above.
                let rel = a.singular_gap / b.singular_gap - 1.0;
                assert!((-1e-6..1e-3).contains(&rel), "{ratio} {branch:?}: {rel}");
            }
        }
    }

    /// Coefficients of a Gaussian of variance `σ` centred at `a`, in the basis of variance `σ`.
    fn shifted_gaussian(a: f64, sigma: f64, n: usize) -> Vec<f64> {
        let s = a / sigma.sqrt();
        let mut c = vec![1.0];
        for k in 1..n {
            c.push(c[k - 1] * s / (k as f64).sqrt());
        }
        c
    }

    fn pinned_left(sigma: f64, n: usize) -> SpectralCoefficients {
        SpectralCoefficients {
            n,
            sigma,
            sigma_basis: sigma,
            branch: Branch::Classical,
            c00: vec![0.0; n],
            cll: shifted_gaussian(-1.0, sigma, n),
            crr: vec![0.0; n],
            clr: vec![C64::new(0.0, 0.0); n],
        }
    }

    #[test]
    fn pinned_state_mass_sits_left() {
        let sigma = 0.1;
        let c = pinned_left(sigma, 80);
        let left = populations_halfline(&c, Side::Negative);
        let right = populations_halfline(&c, Side::Positive);
        // P(D ≤ 0) for N(−1, σ).
        let want = 1.0 - 0.5 * libm::erfc(1.0 / (2.0 * sigma).sqrt());
        assert!((left[1] - want).abs() < 1e-12, "{} vs {want}", left[1]);
        assert!((left[1] + right[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn centred_detector_splits_evenly() {
        let n = 10;
        let mut c = pinned_left(0.5, n);
        c.c00 = vec![0.0; n];
        c.c00[0] = 1.0;
        c.cll = vec![0.0; n];
        let left = populations_halfline(&c, Side::Negative);
        assert_eq!(left[0], 0.5);
    }

    #[test]
    fn pinned_marginal_is_the_detector_gaussian() {
        let sigma = 0.1;
        let c = pinned_left(sigma, 80);
        let grid: Vec<f64> = (0..=200).map(|k| -3.0 + 0.02 * k as f64).collect();
        let rho = marginal_distribution(&c, &grid);
        for (x, r) in grid.iter().zip(&rho) {
            let g = (-(x + 1.0).powi(2) / (2.0 * sigma)).exp() / (2.0 * std::f64::consts::PI * sigma).sqrt();
            assert!((r[1] - g).abs() < 1e-10, "{x}");
        }
    }

    #[test]
    fn marginals_integrate_to_populations() {
        let (p, d) = fig3();
        let sm = assemble_m(&p, &d, &RateOverride::none(), 100).unwrap();
        let c = steady_state(&sm).unwrap().coefficients;
        let half = 8.0 * d.sigma().sqrt() + 2.0;
        let k = 20_000;
        let h = 2.0 * half / k as f64;
        let grid: Vec<f64> = (0..=k).map(|i| -half + h * i as f64).collect();
        let rho = marginal_distribution(&c, &grid);
        let pops = [c.c00[0], c.cll[0], c.crr[0]];
        for s in 0..3 {
            let mut acc = 0.0;
            for i in 0..k {
                acc += 0.5 * h * (rho[i][s] + rho[i + 1][s]);
            }
            assert!((acc - pops[s]).abs() < 1e-6, "{s}: {acc} vs {}", pops[s]);
            assert!(rho.iter().all(|r| r[s] > -1e-8));
        }
        // Both half-lines carry occupied mass.
        let m = c.halfline_masses();
        assert!(m.left[1] > 1e-3 && m.right[1] > 1e-3 && m.left[2] > 1e-3 && m.right[2] > 1e-3);
    }
}
