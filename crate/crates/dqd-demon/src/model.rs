//! Physical parameters, tunneling rates, Hamiltonians and the vectorized
//! generators acting on `[ρ00, ρLL, ρRR, ρLR, ρRL]`.
//!
//! Every quantity is expressed in units of the temperature `T` with
//! `k_B = ħ = 1`; the structs store raw numbers.

use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{Matrix3, Matrix5, Vector5};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{DemonError, Result};

pub type C64 = Complex64;

pub const I00: usize = 0;
pub const ILL: usize = 1;
pub const IRR: usize = 2;
pub const ILR: usize = 3;
pub const IRL: usize = 4;

/// Matrix element `(row, col)` of the 3×3 density matrix stored in each slot
/// of the vectorized state.
pub const COMPONENTS: [(usize, usize); 5] = [(0, 0), (1, 1), (2, 2), (1, 2), (2, 1)];

const SITE_0: usize = 0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Bath {
    L,
    R,
}

impl Bath {
    pub const ALL: [Bath; 2] = [Bath::L, Bath::R];

    pub fn index(self) -> usize {
        match self {
            Bath::L => 0,
            Bath::R => 1,
        }
    }

    /// Index of the dot state coupled to this bath in the `{0, L, R}` basis.
    pub fn site(self) -> usize {
        match self {
            Bath::L => 1,
            Bath::R => 2,
        }
    }
}

impl fmt::Display for Bath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bath::L => write!(f, "L"),
            Bath::R => write!(f, "R"),
        }
    }
}

/// Named gate level; the numerical value lives in [`SystemParams`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    Eps0,
    EpsU,
    EpsD,
}

impl Level {
    pub fn energy(self, p: &SystemParams) -> f64 {
        match self {
            Level::Eps0 => p.eps_0,
            Level::EpsU => p.eps_u,
            Level::EpsD => p.eps_d,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Level::Eps0 => "eps_0",
            Level::EpsU => "eps_u",
            Level::EpsD => "eps_d",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Bare tunneling rate to each bath.
    pub gamma: f64,
    /// Interdot coupling.
    pub g: f64,
    pub temperature: f64,
    pub mu_l: f64,
    pub mu_r: f64,
    pub eps_0: f64,
    pub eps_u: f64,
    pub eps_d: f64,
    /// Environmental dephasing rate.
    pub gamma_phi: f64,
}

impl SystemParams {
    /// Default convention: `T = 1`, `μ_R = −μ_L = bias/2`, `ε_0 = 0`, `ε_d = −ε_u`.
    pub fn symmetric(gamma: f64, g: f64, bias: f64, eps_u: f64) -> Self {
        SystemParams {
            gamma,
            g,
            temperature: 1.0,
            mu_l: -bias / 2.0,
            mu_r: bias / 2.0,
            eps_0: 0.0,
            eps_u,
            eps_d: -eps_u,
            gamma_phi: 0.0,
        }
    }

    pub fn with_dephasing(mut self, gamma_phi: f64) -> Self {
        self.gamma_phi = gamma_phi;
        self
    }

    pub fn mu(&self, bath: Bath) -> f64 {
        match bath {
            Bath::L => self.mu_l,
            Bath::R => self.mu_r,
        }
    }

    pub fn bias(&self) -> f64 {
        self.mu_r - self.mu_l
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let fields = [
            ("Gamma", self.gamma),
            ("g", self.g),
            ("T", self.temperature),
            ("mu_L", self.mu_l),
            ("mu_R", self.mu_r),
            ("eps_0", self.eps_0),
            ("eps_u", self.eps_u),
            ("eps_d", self.eps_d),
            ("Gamma_phi", self.gamma_phi),
        ];
        for (name, x) in fields {
            if !x.is_finite() {
                v.push(format!("{name} must be finite"));
            }
        }
        if !(self.temperature > 0.0) {
            v.push("T must be > 0".into());
        }
        if !(self.gamma >= 0.0) {
            v.push("Gamma must be >= 0".into());
        }
        if !(self.gamma_phi >= 0.0) {
            v.push("Gamma_phi must be >= 0".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(DemonError::InvalidParameter(v.join("; ")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub gamma_1: f64,
    pub lambda_1: f64,
    /// Detector 2 is noise-free and infinitely fast.
    pub ideal_charge_detection: bool,
}

impl DetectorParams {
    pub fn new(gamma_1: f64, lambda_1: f64) -> Self {
        DetectorParams {
            gamma_1,
            lambda_1,
            ideal_charge_detection: true,
        }
    }

    /// Detector with `λ₁ = ratio·γ₁`.
    pub fn with_ratio(gamma_1: f64, ratio: f64) -> Self {
        Self::new(gamma_1, ratio * gamma_1)
    }

    /// Stationary variance `γ₁/(8λ₁)` of the filtered outcome around a charge eigenvalue.
    pub fn sigma(&self) -> f64 {
        self.gamma_1 / (8.0 * self.lambda_1)
    }

    pub fn ratio(&self) -> f64 {
        self.lambda_1 / self.gamma_1
    }

    /// Total dephasing `Γ̃ = λ₁ + Γ_φ`.
    pub fn gamma_tilde(&self, p: &SystemParams) -> f64 {
        self.lambda_1 + p.gamma_phi
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.gamma_1 > 0.0 && self.gamma_1.is_finite()) {
            v.push("gamma_1 must be finite and > 0".into());
        }
        if !(self.lambda_1 > 0.0 && self.lambda_1.is_finite()) {
            v.push("lambda_1 must be finite and > 0".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(DemonError::InvalidParameter(v.join("; ")))
        }
    }
}

/// Gate setting chosen by the feedback: C1 `(ε0, εu)`, C2 `(εd, εd)`, C3 `(εu, ε0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LevelConfiguration {
    C1,
    C2,
    C3,
}

impl LevelConfiguration {
    pub const ALL: [LevelConfiguration; 3] =
        [LevelConfiguration::C1, LevelConfiguration::C2, LevelConfiguration::C3];

    pub fn index(self) -> usize {
        match self {
            LevelConfiguration::C1 => 0,
            LevelConfiguration::C2 => 1,
            LevelConfiguration::C3 => 2,
        }
    }

    pub fn tag(self) -> u8 {
        self.index() as u8 + 1
    }

    /// Level labels `(left dot, right dot)`.
    pub fn labels(self) -> (Level, Level) {
        match self {
            LevelConfiguration::C1 => (Level::Eps0, Level::EpsU),
            LevelConfiguration::C2 => (Level::EpsD, Level::EpsD),
            LevelConfiguration::C3 => (Level::EpsU, Level::Eps0),
        }
    }

    pub fn label(self, bath: Bath) -> Level {
        let (l, r) = self.labels();
        match bath {
            Bath::L => l,
            Bath::R => r,
        }
    }

    /// Level energies `(ε_L, ε_R)`.
    pub fn levels(self, p: &SystemParams) -> (f64, f64) {
        let (l, r) = self.labels();
        (l.energy(p), r.energy(p))
    }
}

impl fmt::Display for LevelConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.tag())
    }
}

/// Bath/level pairs whose in and out rates are forced to zero.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateOverride {
    zeroed: BTreeSet<(Bath, Level)>,
}

impl RateOverride {
    pub fn none() -> Self {
        Self::default()
    }

    /// All four `{ε_u, ε_d} × {L, R}` channels closed.
    pub fn energy_conserving() -> Self {
        let mut ov = Self::default();
        for bath in Bath::ALL {
            for level in [Level::EpsU, Level::EpsD] {
                ov.zeroed.insert((bath, level));
            }
        }
        ov
    }

    pub fn zero(mut self, bath: Bath, level: Level) -> Result<Self> {
        if level == Level::Eps0 {
            return Err(DemonError::InvalidParameter(
                "only eps_u and eps_d channels can be overridden".into(),
            ));
        }
        self.zeroed.insert((bath, level));
        Ok(self)
    }

    pub fn is_zeroed(&self, bath: Bath, level: Level) -> bool {
        self.zeroed.contains(&(bath, level))
    }

    pub fn is_empty(&self) -> bool {
        self.zeroed.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(Bath, Level)> {
        self.zeroed.iter()
    }
}

/// `1/(e^x + 1)` evaluated on the branch that never exponentiates a large positive argument.
pub fn fermi_dirac(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

pub fn fermi(eps: f64, bath: Bath, p: &SystemParams) -> Result<f64> {
    let mu = p.mu(bath);
    if !eps.is_finite() || !mu.is_finite() || !p.temperature.is_finite() || p.temperature <= 0.0 {
        return Err(DemonError::InvalidParameter(format!(
            "fermi: non-finite or non-positive input (eps={eps}, mu={mu}, T={})",
            p.temperature
        )));
    }
    Ok(fermi_dirac((eps - mu) / p.temperature))
}

/// In/out rates `(Γf, Γ(1−f))` at energy `eps`. The smaller member is computed
/// directly and the larger as its complement, so the pair sums to `Γ` within one ulp.
pub fn bath_rates(eps: f64, bath: Bath, p: &SystemParams) -> (f64, f64) {
    let x = (eps - p.mu(bath)) / p.temperature;
    if x > 0.0 {
        let gin = p.gamma * fermi_dirac(x);
        (gin, p.gamma - gin)
    } else {
        let kout = p.gamma * fermi_dirac(-x);
        (p.gamma - kout, kout)
    }
}

/// `(γ_in, κ_out)` for a named level, honoring the override.
pub fn rates(level: Level, bath: Bath, p: &SystemParams, ov: &RateOverride) -> (f64, f64) {
    if ov.is_zeroed(bath, level) {
        (0.0, 0.0)
    } else {
        bath_rates(level.energy(p), bath, p)
    }
}

pub fn gamma_in(level: Level, bath: Bath, p: &SystemParams, ov: &RateOverride) -> f64 {
    rates(level, bath, p, ov).0
}

pub fn kappa_out(level: Level, bath: Bath, p: &SystemParams, ov: &RateOverride) -> f64 {
    rates(level, bath, p, ov).1
}

/// DQD Hamiltonian in the `{|0⟩, |L⟩, |R⟩}` basis.
pub fn hamiltonian(eps_l: f64, eps_r: f64, g: f64) -> Matrix3<C64> {
    let mut h = Matrix3::zeros();
    h[(1, 1)] = C64::new(eps_l, 0.0);
    h[(2, 2)] = C64::new(eps_r, 0.0);
    h[(1, 2)] = C64::new(g, 0.0);
    h[(2, 1)] = C64::new(g, 0.0);
    h
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    In,
    Out,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::In => 1.0,
            Direction::Out => -1.0,
        }
    }
}

/// Counting-field slots `(L_d, R_d, L_1, R_1, L_2, R_2)`. Exchanges at `ε_d`
/// use the `d` slots, exchanges near `ε_u` slot 1 and near `ε_0` slot 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CountingField {
    Ld,
    Rd,
    L1,
    R1,
    L2,
    R2,
}

impl CountingField {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn for_level(bath: Bath, level: Level) -> Self {
        match (bath, level) {
            (Bath::L, Level::EpsD) => CountingField::Ld,
            (Bath::R, Level::EpsD) => CountingField::Rd,
            (Bath::L, Level::EpsU) => CountingField::L1,
            (Bath::R, Level::EpsU) => CountingField::R1,
            (Bath::L, Level::Eps0) => CountingField::L2,
            (Bath::R, Level::Eps0) => CountingField::R2,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CountingFields(pub [f64; 6]);

impl CountingFields {
    pub fn zero() -> Self {
        CountingFields([0.0; 6])
    }

    pub fn single(field: CountingField, chi: f64) -> Self {
        let mut c = [0.0; 6];
        c[field.index()] = chi;
        CountingFields(c)
    }

    pub fn get(&self, field: CountingField) -> f64 {
        self.0[field.index()]
    }
}

/// One dissipative channel `rate · D[op]` exchanging an electron with `bath`.
#[derive(Clone, Debug)]
pub struct Channel {
    pub bath: Bath,
    pub direction: Direction,
    /// Level the exchange is attributed to (the parent local level for eigenbasis channels).
    pub level: Level,
    pub field: CountingField,
    /// Energy carried by the exchanged electron.
    pub energy: f64,
    pub rate: f64,
    pub op: Matrix3<C64>,
}

impl Channel {
    /// Signed particle current `±rate·tr{op X op†}` into the dot for a (possibly partial) state `X`.
    pub fn flux(&self, x: &Matrix3<C64>) -> f64 {
        let y = self.op * x * self.op.adjoint();
        self.direction.sign() * self.rate * y.trace().re
    }
}

fn projector(a: usize, b: usize) -> Matrix3<C64> {
    let mut m = Matrix3::zeros();
    m[(a, b)] = C64::new(1.0, 0.0);
    m
}

/// Site-basis channels of one configuration.
pub fn local_channels(cfg: LevelConfiguration, p: &SystemParams, ov: &RateOverride) -> Vec<Channel> {
    let mut out = Vec::with_capacity(4);
    for bath in Bath::ALL {
        let level = cfg.label(bath);
        let (gin, kout) = rates(level, bath, p, ov);
        let field = CountingField::for_level(bath, level);
        let energy = level.energy(p);
        out.push(Channel {
            bath,
            direction: Direction::In,
            level,
            field,
            energy,
            rate: gin,
            op: projector(bath.site(), SITE_0),
        });
        out.push(Channel {
            bath,
            direction: Direction::Out,
            level,
            field,
            energy,
            rate: kout,
            op: projector(SITE_0, bath.site()),
        });
    }
    out
}

/// Eigenbasis channels of C1 or C3 with weights `⟨α|E_j⟩²`.
pub fn global_channels(
    cfg: LevelConfiguration,
    p: &SystemParams,
    ov: &RateOverride,
) -> Result<Vec<Channel>> {
    if cfg == LevelConfiguration::C2 {
        return Err(DemonError::Unsupported(
            "the eigenbasis description covers configurations 1 and 3 only".into(),
        ));
    }
    let (el, er) = cfg.levels(p);
    let eb = EigenBasisData::new(el, er, p.g);
    let (upper, lower) = if p.eps_u >= p.eps_0 {
        (Level::EpsU, Level::Eps0)
    } else {
        (Level::Eps0, Level::EpsU)
    };
    let mut out = Vec::with_capacity(8);
    for (energy, vec, parent) in [(eb.e1, eb.v1(), upper), (eb.e2, eb.v2(), lower)] {
        let ket = nalgebra::Vector3::new(C64::new(0.0, 0.0), C64::new(vec.0, 0.0), C64::new(vec.1, 0.0));
        let vacuum = nalgebra::Vector3::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
        let raise = ket * vacuum.adjoint();
        let lower_op = vacuum * ket.adjoint();
        for bath in Bath::ALL {
            let weight = match bath {
                Bath::L => vec.0 * vec.0,
                Bath::R => vec.1 * vec.1,
            };
            let (gin, kout) = if ov.is_zeroed(bath, parent) {
                (0.0, 0.0)
            } else {
                bath_rates(energy, bath, p)
            };
            let field = CountingField::for_level(bath, parent);
            out.push(Channel {
                bath,
                direction: Direction::In,
                level: parent,
                field,
                energy,
                rate: weight * gin,
                op: raise,
            });
            out.push(Channel {
                bath,
                direction: Direction::Out,
                level: parent,
                field,
                energy,
                rate: weight * kout,
                op: lower_op,
            });
        }
    }
    Ok(out)
}

/// Vectorized `−i[H,·] + Σ rate·D^{(±)}_χ[op]`; the gain term of each channel
/// carries `e^{±iχ}` of its counting field.
pub fn superop_from_channels(h: &Matrix3<C64>, channels: &[Channel], chi: &CountingFields) -> SuperOp5 {
    let mut m = Matrix5::zeros();
    let minus_i = C64::new(0.0, -1.0);
    for (col, &(a, b)) in COMPONENTS.iter().enumerate() {
        let x = projector(a, b);
        let mut y = (h * x - x * h) * minus_i;
        for ch in channels {
            if ch.rate == 0.0 {
                continue;
            }
            let cd = ch.op.adjoint();
            let cdc = cd * ch.op;
            let phase = C64::from_polar(1.0, ch.direction.sign() * chi.get(ch.field));
            y += (ch.op * x * cd * phase - (cdc * x + x * cdc) * C64::new(0.5, 0.0)) * C64::new(ch.rate, 0.0);
        }
        for (row, &(r, c)) in COMPONENTS.iter().enumerate() {
            m[(row, col)] = y[(r, c)];
        }
    }
    SuperOp5(m)
}

/// Local generator of one configuration, without measurement dephasing.
pub fn local_liouvillian(cfg: LevelConfiguration, p: &SystemParams, ov: &RateOverride) -> SuperOp5 {
    local_liouvillian_fcs(cfg, p, ov, &CountingFields::zero())
}

pub fn local_liouvillian_fcs(
    cfg: LevelConfiguration,
    p: &SystemParams,
    ov: &RateOverride,
    chi: &CountingFields,
) -> SuperOp5 {
    let (el, er) = cfg.levels(p);
    superop_from_channels(&hamiltonian(el, er, p.g), &local_channels(cfg, p, ov), chi)
}

/// Eigenbasis generator of C1 or C3 with counting fields.
pub fn global_liouvillian_fcs(
    cfg: LevelConfiguration,
    p: &SystemParams,
    ov: &RateOverride,
    chi: &CountingFields,
) -> Result<SuperOp5> {
    let (el, er) = cfg.levels(p);
    let channels = global_channels(cfg, p, ov)?;
    Ok(superop_from_channels(&hamiltonian(el, er, p.g), &channels, chi))
}

/// `Γ̃ D[Â₁]` in vectorized form.
pub fn dephasing_superop(gamma_tilde: f64) -> SuperOp5 {
    let mut m = Matrix5::zeros();
    m[(ILR, ILR)] = C64::new(-2.0 * gamma_tilde, 0.0);
    m[(IRL, IRL)] = C64::new(-2.0 * gamma_tilde, 0.0);
    SuperOp5(m)
}

/// Feedback rule with `θ(0) = 0`.
pub fn feedback_levels(d1: f64, d2: f64) -> LevelConfiguration {
    if d2 > 0.0 {
        LevelConfiguration::C1
    } else if d1 > 0.0 {
        LevelConfiguration::C3
    } else {
        LevelConfiguration::C2
    }
}

/// 5×5 complex generator on the vectorized state.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperOp5(pub Matrix5<C64>);

impl SuperOp5 {
    pub fn zeros() -> Self {
        SuperOp5(Matrix5::zeros())
    }

    pub fn matrix(&self) -> &Matrix5<C64> {
        &self.0
    }

    pub fn apply(&self, v: &[C64; 5]) -> [C64; 5] {
        let x = Vector5::from_column_slice(v);
        let y = self.0 * x;
        [y[0], y[1], y[2], y[3], y[4]]
    }

    /// Sum of the population rows in every column.
    pub fn population_column_sums(&self) -> [C64; 5] {
        let mut s = [C64::new(0.0, 0.0); 5];
        for (col, sc) in s.iter_mut().enumerate() {
            *sc = self.0[(I00, col)] + self.0[(ILL, col)] + self.0[(IRR, col)];
        }
        s
    }

    pub fn is_trace_preserving(&self, tol: f64) -> bool {
        self.population_column_sums().iter().all(|z| z.norm() <= tol)
    }

    /// `M[σ(i), σ(j)] = conj(M[i, j])` with σ swapping the coherence slots.
    pub fn is_conjugation_symmetric(&self, tol: f64) -> bool {
        let swap = |i: usize| match i {
            ILR => IRL,
            IRL => ILR,
            k => k,
        };
        (0..5).all(|i| (0..5).all(|j| (self.0[(swap(i), swap(j))] - self.0[(i, j)].conj()).norm() <= tol))
    }

    /// Unique stationary vector with unit population trace, and the singular gap.
    pub fn steady_state(&self) -> Result<([C64; 5], f64)> {
        let svd = self.0.svd(false, true);
        let v_t = svd.v_t.expect("requested right singular vectors");
        let (imin, gap) = smallest_with_gap(svd.singular_values.as_slice());
        if gap < 1e3 {
            return Err(DemonError::DegenerateSteadyState { gap });
        }
        let mut v = [C64::new(0.0, 0.0); 5];
        for (k, vk) in v.iter_mut().enumerate() {
            *vk = v_t[(imin, k)].conj();
        }
        let tr = v[I00] + v[ILL] + v[IRR];
        for vk in v.iter_mut() {
            *vk /= tr;
        }
        Ok((v, gap))
    }
}

impl std::ops::Add for SuperOp5 {
    type Output = SuperOp5;
    fn add(self, rhs: SuperOp5) -> SuperOp5 {
        SuperOp5(self.0 + rhs.0)
    }
}

impl std::ops::Mul<f64> for SuperOp5 {
    type Output = SuperOp5;
    fn mul(self, rhs: f64) -> SuperOp5 {
        SuperOp5(self.0 * C64::new(rhs, 0.0))
    }
}

/// Index of the smallest singular value and the ratio of the second smallest
/// to it. The smallest value is floored at `ε·σ_max`, below which it is
/// indistinguishable from rounding.
pub(crate) fn smallest_with_gap(s: &[f64]) -> (usize, f64) {
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[a].total_cmp(&s[b]));
    let i0 = order[0];
    if s.len() < 2 {
        return (i0, f64::INFINITY);
    }
    let smax = s[order[s.len() - 1]];
    let floor = (s[i0]).max(f64::EPSILON * smax);
    let gap = if floor == 0.0 { 0.0 } else { s[order[1]] / floor };
    (i0, gap)
}

/// Eigen-decomposition of the occupied 2×2 block: `|E1⟩ = a|L⟩ + b|R⟩`,
/// `|E2⟩ = c|L⟩ + d|R⟩`, `E_{1/2} = ε̄ ± sqrt(Δ² + g²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EigenBasisData {
    pub e0: f64,
    pub e1: f64,
    pub e2: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl EigenBasisData {
    pub fn new(eps_l: f64, eps_r: f64, g: f64) -> Self {
        let mean = 0.5 * (eps_l + eps_r);
        let delta = 0.5 * (eps_l - eps_r);
        let s = delta.hypot(g);
        // Δ ± s without cancellation.
        let plus = if delta >= 0.0 { delta + s } else { g * g / (s - delta) };
        let minus = if delta <= 0.0 { delta - s } else { -g * g / (s + delta) };
        let n1 = g.hypot(plus);
        let n2 = g.hypot(minus);
        let ((a, b), (c, d)) = if n1 == 0.0 && n2 == 0.0 {
            ((1.0, 0.0), (0.0, 1.0))
        } else {
            let first = if n1 == 0.0 { (0.0, 1.0) } else { (plus / n1, g / n1) };
            let second = if n2 == 0.0 { (0.0, 1.0) } else { (minus / n2, g / n2) };
            (first, second)
        };
        EigenBasisData {
            e0: 0.0,
            e1: mean + s,
            e2: mean - s,
            a,
            b,
            c,
            d,
        }
    }

    pub fn v1(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn v2(&self) -> (f64, f64) {
        (self.c, self.d)
    }

    /// Largest of the three orthonormality residuals.
    pub fn orthonormality_residual(&self) -> f64 {
        let r1 = (self.a * self.a + self.b * self.b - 1.0).abs();
        let r2 = (self.c * self.c + self.d * self.d - 1.0).abs();
        let r3 = (self.a * self.c + self.b * self.d).abs();
        r1.max(r2).max(r3)
    }
}

/// Ratio `g/Δ` with `Δ = (ε_u − ε_0)/2`; the local description is flagged above 0.1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalityDiagnostics {
    pub g_over_delta: f64,
    pub warn: bool,
}

pub fn locality_diagnostics(p: &SystemParams) -> LocalityDiagnostics {
    let delta = 0.5 * (p.eps_u - p.eps_0).abs();
    let r = if delta == 0.0 { f64::INFINITY } else { p.g.abs() / delta };
    LocalityDiagnostics {
        g_over_delta: r,
        warn: r > 0.1,
    }
}

/// All twelve bath rates of the three gate levels, after overrides.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateTable {
    pub g_l0: f64,
    pub k_l0: f64,
    pub g_lu: f64,
    pub k_lu: f64,
    pub g_ld: f64,
    pub k_ld: f64,
    pub g_r0: f64,
    pub k_r0: f64,
    pub g_ru: f64,
    pub k_ru: f64,
    pub g_rd: f64,
    pub k_rd: f64,
}

impl RateTable {
    pub fn new(p: &SystemParams, ov: &RateOverride) -> Self {
        let (g_l0, k_l0) = rates(Level::Eps0, Bath::L, p, ov);
        let (g_lu, k_lu) = rates(Level::EpsU, Bath::L, p, ov);
        let (g_ld, k_ld) = rates(Level::EpsD, Bath::L, p, ov);
        let (g_r0, k_r0) = rates(Level::Eps0, Bath::R, p, ov);
        let (g_ru, k_ru) = rates(Level::EpsU, Bath::R, p, ov);
        let (g_rd, k_rd) = rates(Level::EpsD, Bath::R, p, ov);
        RateTable {
            g_l0,
            k_l0,
            g_lu,
            k_lu,
            g_ld,
            k_ld,
            g_r0,
            k_r0,
            g_ru,
            k_ru,
            g_rd,
            k_rd,
        }
    }

    /// `(γ_in, κ_out)` of `bath` in configuration `cfg`.
    pub fn in_config(&self, bath: Bath, cfg: LevelConfiguration) -> (f64, f64) {
        match (bath, cfg.label(bath)) {
            (Bath::L, Level::Eps0) => (self.g_l0, self.k_l0),
            (Bath::L, Level::EpsU) => (self.g_lu, self.k_lu),
            (Bath::L, Level::EpsD) => (self.g_ld, self.k_ld),
            (Bath::R, Level::Eps0) => (self.g_r0, self.k_r0),
            (Bath::R, Level::EpsU) => (self.g_ru, self.k_ru),
            (Bath::R, Level::EpsD) => (self.g_rd, self.k_rd),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fig3() -> SystemParams {
        SystemParams::symmetric(0.1, 0.1, 3.0, 5.0)
    }

    fn params() -> impl Strategy<Value = SystemParams> {
        (0.0..1.0f64, -2.0..2.0f64, 0.2..5.0f64, -6.0..6.0f64, -6.0..6.0f64, 0.0..20.0f64, 0.0..3.0f64).prop_map(
            |(gamma, g, t, mu_l, mu_r, eps_u, gamma_phi)| SystemParams {
                gamma,
                g,
                temperature: t,
                mu_l,
                mu_r,
                eps_0: 0.0,
                eps_u,
                eps_d: -eps_u,
                gamma_phi,
            },
        )
    }

    fn overrides() -> impl Strategy<Value = RateOverride> {
        prop::collection::vec((0..2usize, prop::bool::ANY), 0..4).prop_map(|v| {
            v.into_iter().fold(RateOverride::none(), |ov, (b, up)| {
                let level = if up { Level::EpsU } else { Level::EpsD };
                ov.zero(Bath::ALL[b], level).unwrap()
            })
        })
    }

    #[test]
    fn fermi_at_chemical_potential_is_half() {
        let p = fig3();
        assert_eq!(fermi(p.mu_l, Bath::L, &p).unwrap(), 0.5);
    }

    #[test]
    fn fermi_deep_tail() {
        let p = fig3();
        let f = fermi(p.mu_l + 50.0, Bath::L, &p).unwrap();
        assert!(f > 0.0 && f < 1e-21);
    }

    #[test]
    fn fermi_closed_form_value() {
        // 1/(e^1.5 + 1), 30-digit evaluation.
        let f = fermi(0.0, Bath::L, &fig3()).unwrap();
        assert!((f - 0.182_425_523_806_356_34).abs() < 1e-16);
    }

    #[test]
    fn fermi_rejects_non_finite() {
        let p = fig3();
        assert!(matches!(fermi(f64::NAN, Bath::R, &p), Err(DemonError::InvalidParameter(_))));
        assert!(fermi(f64::INFINITY, Bath::R, &p).is_err());
    }

    #[test]
    fn fermi_is_stable_far_from_the_edge() {
        for x in [-800.0, -700.0, 700.0, 800.0] {
            let f = fermi_dirac(x);
            assert!(f.is_finite() && (0.0..=1.0).contains(&f));
        }
        assert!(fermi_dirac(700.0) > 0.0);
    }

    #[test]
    fn rates_at_chemical_potential() {
        let p = fig3();
        let (gin, kout) = bath_rates(p.mu_r, Bath::R, &p);
        assert_eq!((gin, kout), (0.05, 0.05));
    }

    #[test]
    fn overridden_rates_vanish() {
        let p = fig3();
        let ov = RateOverride::none().zero(Bath::L, Level::EpsU).unwrap();
        assert_eq!(rates(Level::EpsU, Bath::L, &p, &ov), (0.0, 0.0));
        assert_ne!(rates(Level::EpsU, Bath::R, &p, &ov), (0.0, 0.0));
    }

    #[test]
    fn rates_closed_form_value() {
        // Γ/(e^3.5 + 1) at Γ = 0.1, 30-digit evaluation.
        let p = fig3();
        let (gin, kout) = bath_rates(p.mu_l + 3.5, Bath::L, &p);
        assert!((gin - 0.002_931_223_075_135_632).abs() < 1e-17);
        assert!((gin + kout - 0.1).abs() <= f64::EPSILON * 0.1);
    }

    #[test]
    fn zeroing_the_fixed_level_is_rejected() {
        assert!(RateOverride::none().zero(Bath::L, Level::Eps0).is_err());
        let ec = RateOverride::energy_conserving();
        assert_eq!(ec.iter().count(), 4);
    }

    #[test]
    fn parameter_validation() {
        let mut p = fig3();
        p.temperature = 0.0;
        assert!(p.validate().is_err());
        let mut p = fig3();
        p.gamma = -1.0;
        p.gamma_phi = -1.0;
        assert_eq!(p.violations().len(), 2);
        assert!(DetectorParams::new(0.0, 1.0).validate().is_err());
        assert!(DetectorParams::new(1.0, -1.0).validate().is_err());
    }

    #[test]
    fn hamiltonian_without_coupling_is_diagonal() {
        let h = hamiltonian(2.0, -1.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(h[(i, j)], C64::new(0.0, 0.0));
                }
            }
        }
    }

    fn occupied_eigenvalues(h: &Matrix3<C64>) -> Vec<f64> {
        let re = h.map(|z| z.re);
        let mut e: Vec<f64> = re.symmetric_eigen().eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        e
    }

    #[test]
    fn degenerate_levels_split_by_twice_the_coupling() {
        let e = occupied_eigenvalues(&hamiltonian(1.5, 1.5, 0.3));
        let want = [0.0, 1.2, 1.8];
        for (a, b) in e.iter().zip(want) {
            assert!((a - b).abs() < 1e-14, "{e:?}");
        }
    }

    #[test]
    fn detuned_eigenvalues_match_eigenbasis_data() {
        let e = occupied_eigenvalues(&hamiltonian(5.0, 0.0, 0.1));
        let eb = EigenBasisData::new(5.0, 0.0, 0.1);
        let s = (2.5f64 * 2.5 + 0.01).sqrt();
        assert!((eb.e1 - (2.5 + s)).abs() < 1e-14 && (eb.e2 - (2.5 - s)).abs() < 1e-14);
        assert!((e[0] - eb.e2).abs() < 1e-13 && (e[1] - eb.e0).abs() < 1e-13 && (e[2] - eb.e1).abs() < 1e-13);
    }

    #[test]
    fn eigenvectors_diagonalize_the_block() {
        let eb = EigenBasisData::new(5.0, 0.0, 0.1);
        let h = [[5.0, 0.1], [0.1, 0.0]];
        for ((x, y), e) in [(eb.v1(), eb.e1), (eb.v2(), eb.e2)] {
            let hx = h[0][0] * x + h[0][1] * y;
            let hy = h[1][0] * x + h[1][1] * y;
            assert!((hx - e * x).abs() < 1e-14 && (hy - e * y).abs() < 1e-14);
        }
    }

    #[test]
    fn bare_generator_only_rotates_coherences() {
        let mut p = fig3();
        p.g = 0.0;
        p.gamma = 0.0;
        for cfg in LevelConfiguration::ALL {
            let l = local_liouvillian(cfg, &p, &RateOverride::none());
            let (el, er) = cfg.levels(&p);
            for i in 0..5 {
                for j in 0..5 {
                    let want = match (i, j) {
                        (ILR, ILR) => C64::new(0.0, -(el - er)),
                        (IRL, IRL) => C64::new(0.0, el - er),
                        _ => C64::new(0.0, 0.0),
                    };
                    assert!((l.0[(i, j)] - want).norm() < 1e-15, "{cfg} {i} {j}");
                }
            }
        }
    }

    #[test]
    fn configuration_two_matrix_entries() {
        let p = fig3();
        let ov = RateOverride::none();
        let l = local_liouvillian(LevelConfiguration::C2, &p, &ov);
        let kl = kappa_out(Level::EpsD, Bath::L, &p, &ov);
        let kr = kappa_out(Level::EpsD, Bath::R, &p, &ov);
        let gl = gamma_in(Level::EpsD, Bath::L, &p, &ov);
        let gr = gamma_in(Level::EpsD, Bath::R, &p, &ov);
        let alpha2 = -(kl + kr) / 2.0;
        // Equal levels: no detuning rotation, coherence decay only.
        assert!((l.0[(ILR, ILR)] - C64::new(alpha2, 0.0)).norm() < 1e-15);
        assert!((l.0[(IRL, IRL)] - C64::new(alpha2, 0.0)).norm() < 1e-15);
        assert!((l.0[(I00, I00)].re + gl + gr).abs() < 1e-15);
        assert!((l.0[(I00, ILL)].re - kl).abs() < 1e-15);
        assert!((l.0[(ILL, ILR)] - C64::new(0.0, p.g)).norm() < 1e-15);
        assert!((l.0[(ILL, IRL)] - C64::new(0.0, -p.g)).norm() < 1e-15);
    }

    #[test]
    fn dephasing_superop_entries() {
        assert_eq!(dephasing_superop(0.0), SuperOp5::zeros());
        let d = dephasing_superop(1.0);
        assert_eq!(d.0[(ILR, ILR)], C64::new(-2.0, 0.0));
        assert_eq!(d.0[(IRL, IRL)], C64::new(-2.0, 0.0));
        let mut v = [C64::new(0.0, 0.0); 5];
        v[ILR] = C64::new(0.3, 0.0);
        v[IRL] = C64::new(0.3, 0.0);
        let dv = d.apply(&v);
        assert!((dv[ILR] - C64::new(-0.6, 0.0)).norm() < 1e-15);
        assert!(dv[..3].iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn feedback_rule() {
        use LevelConfiguration::*;
        assert_eq!(feedback_levels(0.7, 0.9), C1);
        assert_eq!(feedback_levels(-0.8, -0.9), C2);
        assert_eq!(feedback_levels(0.0, -1.0), C2);
        assert_eq!(feedback_levels(0.4, -1.0), C3);
        assert_eq!(feedback_levels(0.4, 0.0), C3);
        assert_eq!(C1.levels(&fig3()), (0.0, 5.0));
        assert_eq!(C2.levels(&fig3()), (-5.0, -5.0));
        assert_eq!(C3.levels(&fig3()), (5.0, 0.0));
    }

    #[test]
    fn global_generator_rejects_configuration_two() {
        let r = global_liouvillian_fcs(LevelConfiguration::C2, &fig3(), &RateOverride::none(), &CountingFields::zero());
        assert!(matches!(r, Err(DemonError::Unsupported(_))));
    }

    #[test]
    fn global_generator_reduces_to_local_without_coupling() {
        let mut p = fig3();
        p.g = 1e-9;
        for cfg in [LevelConfiguration::C1, LevelConfiguration::C3] {
            let gl = global_liouvillian_fcs(cfg, &p, &RateOverride::none(), &CountingFields::zero()).unwrap();
            let lo = local_liouvillian(cfg, &p, &RateOverride::none());
            let diff = (gl.0 - lo.0).map(|z| z.norm()).max();
            assert!(diff < 1e-9, "{cfg}: {diff}");
        }
    }

    #[test]
    fn eigenenergies_close_to_local_levels_at_large_detuning() {
        // Δ/g = 25.
        let eb = EigenBasisData::new(5.0, 0.0, 0.1);
        let r = 0.1 / 2.5;
        assert!((eb.e1 - 5.0).abs() <= 2.5 * r * r && (eb.e2 - 0.0).abs() <= 2.5 * r * r);
        let diag = locality_diagnostics(&fig3());
        assert!((diag.g_over_delta - 0.04).abs() < 1e-15 && !diag.warn);
    }

    #[test]
    fn singular_gap_flags_degeneracy() {
        let mut p = fig3();
        p.gamma = 0.0;
        p.g = 0.0;
        let l = local_liouvillian(LevelConfiguration::C1, &p, &RateOverride::none());
        assert!(matches!(l.steady_state(), Err(DemonError::DegenerateSteadyState { .. })));
    }

    proptest! {
        #[test]
        fn rates_sum_to_gamma(p in params(), eps in -30.0..30.0f64, right in prop::bool::ANY) {
            let bath = if right { Bath::R } else { Bath::L };
            let (gin, kout) = bath_rates(eps, bath, &p);
            prop_assert!(gin >= 0.0 && kout >= 0.0);
            prop_assert!((gin + kout - p.gamma).abs() <= f64::EPSILON * p.gamma);
        }

        #[test]
        fn fermi_monotone(a in -40.0..40.0f64, b in -40.0..40.0f64) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(fermi_dirac(lo) >= fermi_dirac(hi));
            // Strictly inside (0, 1) while e^{-|x|} exceeds half an ulp of 1.
            if a.abs() < 30.0 {
                prop_assert!(fermi_dirac(a) > 0.0 && fermi_dirac(a) < 1.0);
            }
        }

        #[test]
        fn local_generator_is_trace_preserving(p in params(), ov in overrides()) {
            for cfg in LevelConfiguration::ALL {
                let l = local_liouvillian(cfg, &p, &ov);
                prop_assert!(l.is_trace_preserving(1e-12));
                prop_assert!(l.is_conjugation_symmetric(1e-14));
            }
        }

        #[test]
        fn global_generator_is_a_lindblad_generator(p in params(), ov in overrides()) {
            for cfg in [LevelConfiguration::C1, LevelConfiguration::C3] {
                let l = global_liouvillian_fcs(cfg, &p, &ov, &CountingFields::zero()).unwrap();
                prop_assert!(l.is_trace_preserving(1e-12));
                prop_assert!(l.is_conjugation_symmetric(1e-14));
                for i in 0..3 {
                    for j in 0..3 {
                        if i != j {
                            prop_assert!(l.0[(i, j)].re >= 0.0);
                        }
                    }
                }
            }
        }

        #[test]
        fn eigenbasis_is_orthonormal(el in -50.0..50.0f64, er in -50.0..50.0f64, g in -5.0..5.0f64) {
            let eb = EigenBasisData::new(el, er, g);
            prop_assert!(eb.orthonormality_residual() <= 1e-12);
            prop_assert!(eb.e1 >= eb.e2);
        }
    }

    #[test]
    fn eigenbasis_orthonormal_on_a_thousand_draws() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let delta: f64 = rng.random_range(-1e3..1e3);
            let g: f64 = rng.random_range(-10.0..10.0) * 10f64.powi(rng.random_range(-8..2));
            let eb = EigenBasisData::new(delta, -delta, g);
            assert!(eb.orthonormality_residual() <= 1e-12, "{delta} {g}");
        }
    }
}
