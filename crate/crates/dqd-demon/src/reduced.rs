//! Reduced descriptions valid when the detector is fast compared to the dot:
//! the Markovian feedback generator, its closed-form power and heat, the
//! classical rate equations and the eigenbasis (global) cross-check.

use std::fmt;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::energetics::{energy_flows, particle_currents, power_from_currents, EnergyFlows, ParticleCurrents};
use crate::error::{DemonError, Result};
use crate::model::{
    dephasing_superop, global_channels, hamiltonian, local_channels, locality_diagnostics, smallest_with_gap,
    superop_from_channels, Bath, Channel, CountingFields, DetectorParams, LevelConfiguration, RateOverride,
    RateTable, SuperOp5, SystemParams, C64, COMPONENTS, I00, ILL, ILR, IRR,
};
use crate::solver::{HalfLineMasses, C00, CLL, CLR_RE, CRR};

/// Probability `[1 − erf(2√(λ₁/γ₁))]/2` that the filtered outcome points at the wrong dot.
pub fn error_probability(lambda_1: f64, gamma_1: f64) -> f64 {
    0.5 * libm::erfc(2.0 * (lambda_1 / gamma_1).sqrt())
}

fn eta_of(d: &DetectorParams) -> f64 {
    error_probability(d.lambda_1, d.gamma_1)
}

/// Interdot rate of the fast-detector model with `κ_L(ε_u)` and `κ_R(ε_0)`.
pub fn xi_effective(p: &SystemParams, d: &DetectorParams, ov: &RateOverride) -> f64 {
    let r = RateTable::new(p, ov);
    let s = r.k_lu + r.k_r0 + 8.0 * d.gamma_tilde(p);
    let det = p.eps_u - p.eps_0;
    let den = s * s + 4.0 * det * det;
    if den == 0.0 {
        return if p.g == 0.0 { 0.0 } else { f64::INFINITY };
    }
    8.0 * p.g * p.g * s / den
}

/// Symbols of the closed forms: `γ_L(ε_0)`, `κ_L(ε_u)`, `κ_R(ε_0)`, `ξ`, `η`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticRates {
    pub gamma_l: f64,
    pub kappa_l: f64,
    pub kappa_r: f64,
    pub xi: f64,
    pub eta: f64,
}

impl AnalyticRates {
    pub fn new(p: &SystemParams, d: &DetectorParams, ov: &RateOverride) -> Self {
        let r = RateTable::new(p, ov);
        AnalyticRates {
            gamma_l: r.g_l0,
            kappa_l: r.k_lu,
            kappa_r: r.k_r0,
            xi: xi_effective(p, d, ov),
            eta: eta_of(d),
        }
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    pub fn power(&self, p: &SystemParams) -> f64 {
        let AnalyticRates {
            gamma_l: gl,
            kappa_l: kl,
            kappa_r: kr,
            xi,
            eta,
        } = *self;
        let den = (gl + eta * kl) * (xi + (1.0 - eta) * kr) + xi * (gl + (1.0 - eta) * kr);
        if den == 0.0 {
            return 0.0;
        }
        (p.mu_l - p.mu_r) * (1.0 - eta) * gl * xi * kr / den
    }

    pub fn heat(&self, p: &SystemParams) -> f64 {
        let AnalyticRates {
            gamma_l: gl,
            kappa_l: kl,
            kappa_r: kr,
            xi,
            eta,
        } = *self;
        let inner = xi + (1.0 - eta) * kr;
        let mix = if inner == 0.0 { 0.0 } else { xi * (gl + (1.0 - eta) * kr) / inner };
        let den = gl + eta * kl + mix;
        let heating = if den == 0.0 {
            0.0
        } else {
            -(p.eps_u - p.eps_0) * eta * kl * gl / den
        };
        heating - self.power(p)
    }
}

/// Closed-form power; negative when work is extracted.
pub fn power_analytic(p: &SystemParams, d: &DetectorParams, ov: &RateOverride) -> f64 {
    AnalyticRates::new(p, d, ov).power(p)
}

pub fn heat_analytic(p: &SystemParams, d: &DetectorParams, ov: &RateOverride) -> f64 {
    AnalyticRates::new(p, d, ov).heat(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemonCondition {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs/rhs`; infinite when the right side vanishes.
    pub margin: f64,
    pub rhs_infinite: bool,
}

/// Bias-to-detuning ratio against the feedback-error bound.
pub fn demon_condition(p: &SystemParams, d: &DetectorParams, ov: &RateOverride) -> DemonCondition {
    let a = AnalyticRates::new(p, d, ov);
    let lhs = (p.mu_r - p.mu_l) / (p.eps_u - p.eps_0);
    let num = a.kappa_l * (a.xi + (1.0 - a.eta) * a.kappa_r);
    let den = a.xi * a.kappa_r;
    let rhs = if a.eta == 0.0 {
        0.0
    } else if den == 0.0 || a.eta >= 1.0 || !den.is_finite() {
        f64::INFINITY
    } else {
        a.eta / (1.0 - a.eta) * num / den
    };
    let rhs_infinite = rhs.is_infinite();
    DemonCondition {
        holds: !rhs_infinite && lhs > rhs,
        lhs,
        rhs,
        margin: lhs / rhs,
        rhs_infinite,
    }
}

/// Markovian generator averaged over the feedback errors.
#[derive(Clone, Debug)]
pub struct FastDetectorModel {
    pub generator: SuperOp5,
    pub eta: f64,
    pub gamma_l: f64,
    pub gamma_r: f64,
    pub kappa_l: f64,
    pub kappa_r: f64,
    pub alpha: C64,
    rates: RateTable,
}

#[derive(Clone, Debug)]
pub struct FastSteadyState {
    pub rho: [C64; 5],
    pub gap: f64,
    /// Configuration-resolved masses; `left` is configuration 2, `right` configuration 3.
    pub masses: HalfLineMasses,
    pub currents: ParticleCurrents,
    pub flows: EnergyFlows,
}

pub fn fast_detector_generator(p: &SystemParams, d: &DetectorParams, ov: &RateOverride) -> FastDetectorModel {
    let r = RateTable::new(p, ov);
    let eta = eta_of(d);
    let gamma_l = r.g_l0;
    let gamma_r = r.g_ru;
    let kappa_l = (1.0 - eta) * r.k_ld + eta * r.k_lu;
    let kappa_r = (1.0 - eta) * r.k_r0 + eta * r.k_rd;
    let alpha = C64::new(
        -(r.k_lu + r.k_r0 + r.k_ld + r.k_rd) / 4.0 - 2.0 * d.gamma_tilde(p),
        -(p.eps_u - p.eps_0) / 2.0,
    );
    let ig = C64::new(0.0, p.g);
    let z = C64::new(0.0, 0.0);
    let re = |x: f64| C64::new(x, 0.0);
    #[rustfmt::skip]
    let m = nalgebra::Matrix5::new(
        re(-gamma_l - gamma_r), re(kappa_l), re(kappa_r), z, z,
        re(gamma_l), re(-kappa_l), z, ig, -ig,
        re(gamma_r), z, re(-kappa_r), -ig, ig,
        z, ig, -ig, alpha, z,
        z, -ig, ig, z, alpha.conj(),
    );
    FastDetectorModel {
        generator: SuperOp5(m),
        eta,
        gamma_l,
        gamma_r,
        kappa_l,
        kappa_r,
        alpha,
        rates: r,
    }
}

/// Splits populations between configurations 2 and 3 with the feedback error weights.
fn feedback_masses(r0: f64, rl: f64, rr: f64, u: f64, eta: f64) -> HalfLineMasses {
    let mut m = HalfLineMasses::default();
    m.left[C00] = 0.5 * r0;
    m.right[C00] = 0.5 * r0;
    m.left[CLL] = (1.0 - eta) * rl;
    m.right[CLL] = eta * rl;
    m.left[CRR] = eta * rr;
    m.right[CRR] = (1.0 - eta) * rr;
    m.left[CLR_RE] = 0.5 * u;
    m.right[CLR_RE] = 0.5 * u;
    m
}

impl FastDetectorModel {
    pub fn rates(&self) -> &RateTable {
        &self.rates
    }

    pub fn steady_state(&self, p: &SystemParams, d: &DetectorParams, ov: &RateOverride) -> Result<FastSteadyState> {
        let (rho, gap) = self.generator.steady_state()?;
        let masses = feedback_masses(rho[I00].re, rho[ILL].re, rho[IRR].re, rho[ILR].re, self.eta);
        let currents = particle_currents(&masses, p, ov);
        let flows = energy_flows(&masses, p, d, ov);
        Ok(FastSteadyState {
            rho,
            gap,
            masses,
            currents,
            flows,
        })
    }
}

/// Incoherent interdot rates `(ξ₂, ξ₃)` of configurations 2 and 3.
pub fn classical_rates(p: &SystemParams, d: &DetectorParams, ov: &RateOverride) -> (f64, f64) {
    let r = RateTable::new(p, ov);
    let gt = d.gamma_tilde(p);
    let g2 = 4.0 * p.g * p.g;
    let den2 = r.k_ld + r.k_rd + 4.0 * gt;
    let xi2 = if g2 == 0.0 { 0.0 } else if den2 == 0.0 { f64::INFINITY } else { g2 / den2 };
    let s = r.k_lu + r.k_r0 + 4.0 * gt;
    let det = p.eps_u - p.eps_0;
    let den3 = s * s + 4.0 * det * det;
    let xi3 = if g2 == 0.0 { 0.0 } else if den3 == 0.0 { f64::INFINITY } else { g2 * s / den3 };
    (xi2, xi3)
}

/// Populations `(ρ00, ρLL, ρRR)` of a 3×3 rate matrix with unit trace.
fn rate_steady(m: &Matrix3<f64>) -> Result<[f64; 3]> {
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let (imin, gap) = smallest_with_gap(svd.singular_values.as_slice());
    if gap < 1e3 {
        return Err(DemonError::DegenerateSteadyState { gap });
    }
    let v = [v_t[(imin, 0)], v_t[(imin, 1)], v_t[(imin, 2)]];
    let s: f64 = v.iter().sum();
    Ok([v[0] / s, v[1] / s, v[2] / s])
}

/// Feedback-averaged classical rate equation on `(ρ00, ρLL, ρRR)`.
#[derive(Clone, Debug)]
pub struct ClassicalRateModel {
    pub matrix: Matrix3<f64>,
    pub xi2: f64,
    pub xi3: f64,
    pub eta: f64,
}

impl ClassicalRateModel {
    pub fn new(p: &SystemParams, d: &DetectorParams, ov: &RateOverride) -> Self {
        let r = RateTable::new(p, ov);
        let (xi2, xi3) = classical_rates(p, d, ov);
        let eta = eta_of(d);
        let e = 1.0 - eta;
        let out_l = e * r.k_ld + eta * r.k_lu;
        let out_r = e * r.k_r0 + eta * r.k_rd;
        let l_to_r = e * xi2 + eta * xi3;
        let r_to_l = e * xi3 + eta * xi2;
        #[rustfmt::skip]
        let matrix = Matrix3::new(
            -r.g_l0 - r.g_ru, out_l, out_r,
            r.g_l0, -out_l - l_to_r, r_to_l,
            r.g_ru, l_to_r, -out_r - r_to_l,
        );
        ClassicalRateModel { matrix, xi2, xi3, eta }
    }

    pub fn steady_masses(&self) -> Result<HalfLineMasses> {
        let [r0, rl, rr] = rate_steady(&self.matrix)?;
        Ok(feedback_masses(r0, rl, rr, 0.0, self.eta))
    }

    pub fn power(&self, p: &SystemParams, ov: &RateOverride) -> Result<f64> {
        let m = self.steady_masses()?;
        Ok(power_from_currents(&particle_currents(&m, p, ov), p))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassicalIdealSteady {
    /// `(ρ0, ρL, ρR)`.
    pub populations: [f64; 3],
    /// Electrons per unit time through the cycle.
    pub current: f64,
}

/// Error-free classical cycle `0 → L → R → 0` with rates `γ_L(ε_0)`, `ξ₂`, `κ_R(ε_0)`.
pub fn classical_ideal_steady(p: &SystemParams, d: &DetectorParams, ov: &RateOverride) -> Result<ClassicalIdealSteady> {
    let r = RateTable::new(p, ov);
    let (xi2, _) = classical_rates(p, d, ov);
    let (gl, kr) = (r.g_l0, r.k_r0);
    if gl + kr + xi2 == 0.0 || !xi2.is_finite() {
        return Err(DemonError::DegenerateSteadyState { gap: 0.0 });
    }
    #[rustfmt::skip]
    let m = Matrix3::new(
        -gl, 0.0, kr,
        gl, -xi2, 0.0,
        0.0, xi2, -kr,
    );
    let populations = rate_steady(&m)?;
    Ok(ClassicalIdealSteady {
        populations,
        current: gl * populations[0],
    })
}

/// Column weights of the feedback average for configuration `cfg`.
fn feedback_weights(cfg: LevelConfiguration, eta: f64) -> [f64; 5] {
    match cfg {
        LevelConfiguration::C1 => [1.0, 0.0, 0.0, 0.0, 0.0],
        LevelConfiguration::C2 => [0.0, 1.0 - eta, eta, 0.5, 0.5],
        LevelConfiguration::C3 => [0.0, eta, 1.0 - eta, 0.5, 0.5],
    }
}

/// Channel lists of each configuration: eigenbasis channels for 1 and 3 when
/// `global`, site channels otherwise. Configuration 2 has equal levels and
/// always uses site channels.
fn fcs_channels(p: &SystemParams, ov: &RateOverride, global: bool) -> Result<[Vec<Channel>; 3]> {
    let pick = |cfg: LevelConfiguration| -> Result<Vec<Channel>> {
        if global && cfg != LevelConfiguration::C2 {
            global_channels(cfg, p, ov)
        } else {
            Ok(local_channels(cfg, p, ov))
        }
    };
    Ok([
        pick(LevelConfiguration::C1)?,
        pick(LevelConfiguration::C2)?,
        pick(LevelConfiguration::C3)?,
    ])
}

/// Fast-detector generator with counting fields; `global` selects eigenbasis dissipators.
pub fn counting_generator(
    p: &SystemParams,
    d: &DetectorParams,
    ov: &RateOverride,
    global: bool,
    chi: &CountingFields,
) -> Result<SuperOp5> {
    let eta = eta_of(d);
    let channels = fcs_channels(p, ov, global)?;
    let mut total = dephasing_superop(d.gamma_tilde(p));
    for cfg in LevelConfiguration::ALL {
        let (el, er) = cfg.levels(p);
        let l = superop_from_channels(&hamiltonian(el, er, p.g), &channels[cfg.index()], chi);
        let w = feedback_weights(cfg, eta);
        let mut m = l.0;
        for (col, wc) in w.iter().enumerate() {
            for row in 0..5 {
                m[(row, col)] *= *wc;
            }
        }
        total = total + SuperOp5(m);
    }
    Ok(total)
}

#[derive(Clone, Debug)]
pub struct FcsResult {
    pub currents: ParticleCurrents,
    pub power: f64,
    /// Heat with each exchange weighted by the energy of its channel.
    pub heat: f64,
    pub gap: f64,
}

/// First counting-field derivatives `−i∂_χ` evaluated analytically as
/// rate-weighted populations of the stationary state.
pub fn fcs_currents(p: &SystemParams, d: &DetectorParams, ov: &RateOverride, global: bool) -> Result<FcsResult> {
    let eta = eta_of(d);
    let l = counting_generator(p, d, ov, global, &CountingFields::zero())?;
    let (rho, gap) = l.steady_state()?;
    let channels = fcs_channels(p, ov, global)?;
    let mut currents = ParticleCurrents::default();
    let mut heat = 0.0;
    for cfg in LevelConfiguration::ALL {
        let w = feedback_weights(cfg, eta);
        let mut x = nalgebra::Matrix3::<C64>::zeros();
        for (k, &(a, b)) in COMPONENTS.iter().enumerate() {
            x[(a, b)] = rho[k] * w[k];
        }
        for ch in &channels[cfg.index()] {
            let n = ch.flux(&x);
            currents.n[ch.bath.index()][cfg.index()] += n;
            heat += (ch.energy - p.mu(ch.bath)) * n;
        }
    }
    Ok(FcsResult {
        power: power_from_currents(&currents, p),
        currents,
        heat,
        gap,
    })
}

/// Power of the fast-detector model with eigenbasis dissipators.
pub fn global_power_fcs(p: &SystemParams, d: &DetectorParams, ov: &RateOverride) -> Result<f64> {
    Ok(fcs_currents(p, d, ov, true)?.power)
}

/// Same construction with site dissipators; equals the fast-detector generator.
pub fn local_power_fcs(p: &SystemParams, d: &DetectorParams, ov: &RateOverride) -> Result<f64> {
    Ok(fcs_currents(p, d, ov, false)?.power)
}

/// Regime diagnostics attached to every computed point; never errors.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidityFlags {
    /// Some `|ε_{u/d} − μ_{L/R}| < 5T`.
    pub shallow_levels: bool,
    /// `γ₁ < 10·max(Γ, ξ)`.
    pub slow_detector: bool,
    /// `g/Δ > 0.1`.
    pub nonlocal: bool,
}

impl ValidityFlags {
    pub fn evaluate(p: &SystemParams, d: &DetectorParams, ov: &RateOverride) -> Self {
        let mut shallow = false;
        for eps in [p.eps_u, p.eps_d] {
            for bath in Bath::ALL {
                if (eps - p.mu(bath)).abs() < 5.0 * p.temperature {
                    shallow = true;
                }
            }
        }
        let xi = xi_effective(p, d, ov);
        ValidityFlags {
            shallow_levels: shallow,
            slow_detector: d.gamma_1 < 10.0 * p.gamma.max(xi),
            nonlocal: locality_diagnostics(p).warn,
        }
    }
}

impl fmt::Display for ValidityFlags {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.shallow_levels {
            parts.push("shallow");
        }
        if self.slow_detector {
            parts.push("slow");
        }
        if self.nonlocal {
            parts.push("nonlocal");
        }
        if parts.is_empty() {
            write!(f, "ok")
        } else {
            write!(f, "{}", parts.join("|"))
        }
    }
}
