//! Steady-state driver choosing between the spectral and finite-volume solvers.

use serde::{Deserialize, Serialize};

use crate::energetics::{particle_currents, power_from_currents};
use crate::error::Result;
use crate::grid::{solve_grid, GridOptions};
use crate::model::{DetectorParams, RateOverride, SystemParams};
use crate::spectral::{assemble_with_basis, default_basis_variance, steady_state, Branch, SteadyStateReport};

pub const C00: usize = 0;
pub const CLL: usize = 1;
pub const CRR: usize = 2;
pub const CLR_RE: usize = 3;

/// Integrated masses on `D ≤ 0` and `D > 0` of `[ρ00, ρLL, ρRR, Re ρLR]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct HalfLineMasses {
    pub left: [f64; 4],
    pub right: [f64; 4],
}

impl HalfLineMasses {
    pub fn total(&self, k: usize) -> f64 {
        self.left[k] + self.right[k]
    }

    pub fn trace(&self) -> f64 {
        self.total(C00) + self.total(CLL) + self.total(CRR)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Spectral,
    Grid,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum MethodChoice {
    /// Spectral with order doubling until the power drift, residual and gap are acceptable;
    /// finite volume for sharp detectors or when doubling stalls.
    Auto,
    Spectral { n: usize },
    Grid,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub method: MethodChoice,
    pub n_start: usize,
    pub n_max: usize,
    /// Relative power change between `N` and `2N` accepted as converged.
    pub tolerance: f64,
    /// Above this `λ₁/γ₁` the automatic mode goes straight to the grid.
    pub grid_ratio: f64,
    pub grid: GridOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            method: MethodChoice::Auto,
            n_start: 100,
            n_max: 512,
            tolerance: 1e-6,
            grid_ratio: 20.0,
            grid: GridOptions::default(),
        }
    }
}

impl SolverOptions {
    pub fn spectral(n: usize) -> Self {
        SolverOptions {
            method: MethodChoice::Spectral { n },
            ..Self::default()
        }
    }

    pub fn grid() -> Self {
        SolverOptions {
            method: MethodChoice::Grid,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug)]
pub struct SteadySolution {
    pub branch: Branch,
    pub masses: HalfLineMasses,
    pub method: Method,
    /// Spectral order, or number of cells for the grid.
    pub size: usize,
    pub residual: f64,
    /// Singular gap; NaN for the grid.
    pub gap: f64,
    /// Relative power change of the last order doubling, if one was made.
    pub drift: Option<f64>,
    pub spectral: Option<SteadyStateReport>,
}

pub fn solve_spectral(
    branch: Branch,
    p: &SystemParams,
    d: &DetectorParams,
    ov: &RateOverride,
    n: usize,
) -> Result<SteadySolution> {
    let sm = assemble_with_basis(branch, p, d, ov, n, default_basis_variance(d.sigma(), n))?;
    let rep = steady_state(&sm)?;
    Ok(SteadySolution {
        branch,
        masses: rep.coefficients.halfline_masses(),
        method: Method::Spectral,
        size: n,
        residual: rep.residual_norm,
        gap: rep.singular_gap,
        drift: None,
        spectral: Some(rep),
    })
}

fn solve_on_grid(
    branch: Branch,
    p: &SystemParams,
    d: &DetectorParams,
    ov: &RateOverride,
    opts: &GridOptions,
) -> Result<SteadySolution> {
    let gs = solve_grid(branch, p, d, ov, opts)?;
    Ok(SteadySolution {
        branch,
        masses: gs.halfline_masses(),
        method: Method::Grid,
        size: gs.cells(),
        residual: gs.residual_norm,
        gap: f64::NAN,
        drift: None,
        spectral: None,
    })
}

fn power_of(s: &SteadySolution, p: &SystemParams, ov: &RateOverride) -> f64 {
    power_from_currents(&particle_currents(&s.masses, p, ov), p)
}

/// Residual and singular gap bounds a spectral solution must meet in automatic mode.
pub const ACCEPT_RESIDUAL: f64 = 1e-9;
pub const ACCEPT_GAP: f64 = 1e6;

fn accepted(s: &SteadySolution) -> bool {
    s.residual <= ACCEPT_RESIDUAL && s.gap >= ACCEPT_GAP
}

/// Relative change `|a − b| / max(|b|, 1e-15)`.
pub fn relative_drift(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-15)
}

pub fn solve_steady(
    branch: Branch,
    p: &SystemParams,
    d: &DetectorParams,
    ov: &RateOverride,
    opts: &SolverOptions,
) -> Result<SteadySolution> {
    match opts.method {
        MethodChoice::Spectral { n } => solve_spectral(branch, p, d, ov, n),
        MethodChoice::Grid => solve_on_grid(branch, p, d, ov, &opts.grid),
        MethodChoice::Auto => {
            d.validate()?;
            if d.ratio() > opts.grid_ratio {
                return solve_on_grid(branch, p, d, ov, &opts.grid);
            }
            // Any spectral failure (degenerate gap, no convergence) falls through to the grid.
            let mut n = opts.n_start.min(opts.n_max);
            let mut last_drift = None;
            if let Ok(mut prev) = solve_spectral(branch, p, d, ov, n) {
                while n < opts.n_max {
                    let next_n = (2 * n).min(opts.n_max);
                    let Ok(mut next) = solve_spectral(branch, p, d, ov, next_n) else {
                        break;
                    };
                    let drift = relative_drift(power_of(&prev, p, ov), power_of(&next, p, ov));
                    next.drift = Some(drift);
                    last_drift = Some(drift);
                    if drift < opts.tolerance && accepted(&next) {
                        return Ok(next);
                    }
                    prev = next;
                    n = next_n;
                }
            }
            let mut g = solve_on_grid(branch, p, d, ov, &opts.grid)?;
            g.drift = last_drift;
            Ok(g)
        }
    }
}
