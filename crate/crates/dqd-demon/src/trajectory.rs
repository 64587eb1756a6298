//! Quantum-jump unraveling with a continuously monitored, filtered detector
//! and an ideal charge detector driving the gate feedback.
//!
//! One step of length `dt` applies, in order: the Gaussian measurement of
//! `Â₁`, the exponential filter, the projective measurement of occupation,
//! the feedback rule, and a jump or no-jump update. Environmental dephasing is
//! unraveled as a second, unrecorded Gaussian measurement of `Â₁`.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energetics::ParticleCurrents;
use crate::error::{DemonError, Result};
use crate::model::{
    feedback_levels, hamiltonian, Bath, DetectorParams, LevelConfiguration, RateOverride, RateTable, SystemParams,
    C64,
};

/// Cap on the total jump probability of one step.
pub const MAX_JUMP_PROBABILITY: f64 = 0.1;

/// Eigenvalues of `Â₁` on `(|0⟩, |L⟩, |R⟩)`.
const A1: [f64; 3] = [0.0, -1.0, 1.0];

pub type TrajRng = ChaCha8Rng;

/// Independent generator for trajectory `stream` of an ensemble seeded by `seed`.
pub fn trajectory_rng(seed: u64, stream: u64) -> TrajRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionalState {
    /// Amplitudes on `(|0⟩, |L⟩, |R⟩)`.
    pub c: [C64; 3],
    pub d1: f64,
    pub d2: f64,
    pub t: f64,
    pub config: LevelConfiguration,
}

impl ConditionalState {
    pub fn empty() -> Self {
        ConditionalState {
            c: [C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0)],
            d1: 0.0,
            d2: 1.0,
            t: 0.0,
            config: LevelConfiguration::C1,
        }
    }

    pub fn pinned(site: usize) -> Self {
        let mut s = Self::empty();
        s.c = [C64::new(0.0, 0.0); 3];
        s.c[site] = C64::new(1.0, 0.0);
        s.d1 = A1[site];
        s.d2 = if site == 0 { 1.0 } else { -1.0 };
        s
    }

    pub fn from_amplitudes(c: [C64; 3]) -> Self {
        let mut s = Self::empty();
        s.c = c;
        s
    }

    pub fn norm_sqr(&self) -> f64 {
        self.c.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> [f64; 3] {
        [self.c[0].norm_sqr(), self.c[1].norm_sqr(), self.c[2].norm_sqr()]
    }

    /// `⟨Â₁⟩_c = |c_R|² − |c_L|²`.
    pub fn a1_expectation(&self) -> f64 {
        self.c[2].norm_sqr() - self.c[1].norm_sqr()
    }

    /// `ρ_LR = c_L c_R*`.
    pub fn coherence(&self) -> C64 {
        self.c[1] * self.c[2].conj()
    }

    /// Either empty or occupied, never a superposition of the two.
    pub fn is_charge_definite(&self, tol: f64) -> bool {
        let p0 = self.c[0].norm_sqr();
        p0 <= tol || p0 >= 1.0 - tol
    }

    pub fn density_matrix(&self) -> Matrix3<C64> {
        let v = Vector3::new(self.c[0], self.c[1], self.c[2]);
        v * v.adjoint()
    }

    fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        for z in self.c.iter_mut() {
            *z /= n;
        }
    }

    fn check_normalized(&self) -> Result<()> {
        let n = self.norm_sqr();
        if (n - 1.0).abs() > 1e-8 || !n.is_finite() {
            return Err(DemonError::InvalidParameter(format!("state norm {n} is not 1")));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    pub dt: f64,
    pub seed: u64,
    /// Record one sample every this many steps; 0 disables sampling.
    pub record_stride: usize,
}

impl StepConfig {
    pub fn new(dt: f64, seed: u64) -> Self {
        StepConfig {
            dt,
            seed,
            record_stride: 100,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum JumpKind {
    InL,
    OutL,
    InR,
    OutR,
}

impl JumpKind {
    pub fn bath(self) -> Bath {
        match self {
            JumpKind::InL | JumpKind::OutL => Bath::L,
            JumpKind::InR | JumpKind::OutR => Bath::R,
        }
    }

    /// `+1` into the dot, `−1` out of it.
    pub fn sign(self) -> f64 {
        match self {
            JumpKind::InL | JumpKind::InR => 1.0,
            JumpKind::OutL | JumpKind::OutR => -1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            JumpKind::InL => "in-L",
            JumpKind::OutL => "out-L",
            JumpKind::InR => "in-R",
            JumpKind::OutR => "out-R",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub t: f64,
    pub kind: JumpKind,
    /// Level energy of the bath side in the active configuration.
    pub energy: f64,
    pub config: LevelConfiguration,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub d1: f64,
    pub a1: f64,
    pub config: LevelConfiguration,
    pub coherence_re: f64,
    pub coherence_im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub stream: u64,
    pub dt: f64,
    pub t_end: f64,
    pub steps: u64,
    pub samples: Vec<Sample>,
    pub jumps: Vec<JumpEvent>,
}

/// Weights `exp(−s(z − a)²)` of a diagonal Gaussian Kraus operator, scaled so the largest is 1.
fn gaussian_kraus(state: &mut ConditionalState, z: f64, s: f64) {
    let e: [f64; 3] = std::array::from_fn(|k| s * (z - A1[k]) * (z - A1[k]));
    let emin = e.iter().copied().fold(f64::INFINITY, f64::min);
    for k in 0..3 {
        state.c[k] *= (-(e[k] - emin)).exp();
    }
    state.normalize();
}

/// Draws `ξ` from the Born weights, then `z ~ N(ξ, 1/(4λdt))`; applies the
/// Kraus operator of `z` and returns `z`.
pub fn sample_detector1<R: Rng + ?Sized>(state: &mut ConditionalState, lambda_1: f64, dt: f64, rng: &mut R) -> f64 {
    let probs = state.probabilities();
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let k = if u < probs[1] {
        1
    } else if u < probs[1] + probs[0] {
        0
    } else {
        2
    };
    let noise: f64 = rng.sample(StandardNormal);
    let z = A1[k] + noise / (4.0 * lambda_1 * dt).sqrt();
    gaussian_kraus(state, z, lambda_1 * dt);
    z
}

/// Projective occupation measurement: `+1` and `|0⟩` when empty, `−1` and
/// the occupied projection otherwise.
pub fn sample_detector2_ideal<R: Rng + ?Sized>(state: &mut ConditionalState, rng: &mut R) -> f64 {
    let p0 = state.c[0].norm_sqr() / state.norm_sqr();
    let u: f64 = rng.random();
    if u < p0 {
        let phase = state.c[0] / state.c[0].norm();
        state.c = [phase, C64::new(0.0, 0.0), C64::new(0.0, 0.0)];
        1.0
    } else {
        if p0 > 0.0 {
            state.c[0] = C64::new(0.0, 0.0);
            state.normalize();
        }
        -1.0
    }
}

/// `D ← dt·γ·z + (1 − dt·γ)·D`.
pub fn update_filter(d_prev: f64, z: f64, gamma: f64, dt: f64) -> Result<f64> {
    let a = gamma * dt;
    if !(a > 0.0 && a <= 1.0) {
        return Err(DemonError::Config(format!("filter requires 0 < gamma*dt <= 1, got {a}")));
    }
    Ok(a * z + (1.0 - a) * d_prev)
}

/// Per-configuration jump rates and no-jump propagators for a fixed `dt`.
#[derive(Clone, Debug)]
pub struct Stepper {
    pub p: SystemParams,
    pub d: DetectorParams,
    pub dt: f64,
    /// `[γ_L, κ_L, γ_R, κ_R]` per configuration.
    rates: [[f64; 4]; 3],
    energies: [(f64, f64); 3],
    propagators: [Matrix3<C64>; 3],
}

impl Stepper {
    pub fn new(p: &SystemParams, d: &DetectorParams, ov: &RateOverride, dt: f64) -> Result<Self> {
        p.validate()?;
        d.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(DemonError::Config(format!("time step must be positive, got {dt}")));
        }
        if d.gamma_1 * dt > 1.0 {
            return Err(DemonError::Config(format!(
                "filter requires gamma_1*dt <= 1, got {}",
                d.gamma_1 * dt
            )));
        }
        let table = RateTable::new(p, ov);
        let mut rates = [[0.0; 4]; 3];
        let mut energies = [(0.0, 0.0); 3];
        let mut propagators = [Matrix3::zeros(); 3];
        for cfg in LevelConfiguration::ALL {
            let (gl, kl) = table.in_config(Bath::L, cfg);
            let (gr, kr) = table.in_config(Bath::R, cfg);
            let (el, er) = cfg.levels(p);
            let mut h = hamiltonian(el, er, p.g);
            h[(0, 0)] -= C64::new(0.0, 0.5 * (gl + gr));
            h[(1, 1)] -= C64::new(0.0, 0.5 * kl);
            h[(2, 2)] -= C64::new(0.0, 0.5 * kr);
            let i = cfg.index();
            rates[i] = [gl, kl, gr, kr];
            energies[i] = (el, er);
            propagators[i] = (h * C64::new(0.0, -dt)).exp();
        }
        Ok(Stepper {
            p: *p,
            d: *d,
            dt,
            rates,
            energies,
            propagators,
        })
    }

    /// One full update; returns the jump that occurred, if any.
    pub fn step<R: Rng + ?Sized>(&self, s: &mut ConditionalState, rng: &mut R) -> Result<Option<JumpEvent>> {
        let dt = self.dt;
        let z1 = sample_detector1(s, self.d.lambda_1, dt, rng);
        if self.p.gamma_phi > 0.0 {
            sample_detector1(s, self.p.gamma_phi, dt, rng);
        }
        s.d1 = update_filter(s.d1, z1, self.d.gamma_1, dt)?;
        s.d2 = sample_detector2_ideal(s, rng);
        s.config = feedback_levels(s.d1, s.d2);
        s.t += dt;

        let i = s.config.index();
        let [gl, kl, gr, kr] = self.rates[i];
        let pr = s.probabilities();
        let probs = [gl * pr[0] * dt, kl * pr[1] * dt, gr * pr[0] * dt, kr * pr[2] * dt];
        let total: f64 = probs.iter().sum();
        if total > MAX_JUMP_PROBABILITY {
            return Err(DemonError::StepSize(total));
        }
        let u: f64 = rng.random();
        if u < total {
            let mut acc = 0.0;
            let mut which = 3;
            for (k, pk) in probs.iter().enumerate() {
                acc += pk;
                if u < acc {
                    which = k;
                    break;
                }
            }
            let (kind, from, to) = match which {
                0 => (JumpKind::InL, 0, 1),
                1 => (JumpKind::OutL, 1, 0),
                2 => (JumpKind::InR, 0, 2),
                _ => (JumpKind::OutR, 2, 0),
            };
            let phase = s.c[from] / s.c[from].norm();
            s.c = [C64::new(0.0, 0.0); 3];
            s.c[to] = phase;
            let (el, er) = self.energies[i];
            let energy = if kind.bath() == Bath::L { el } else { er };
            return Ok(Some(JumpEvent {
                t: s.t,
                kind,
                energy,
                config: s.config,
            }));
        }
        let v = self.propagators[i] * Vector3::new(s.c[0], s.c[1], s.c[2]);
        s.c = [v[0], v[1], v[2]];
        s.normalize();
        Ok(None)
    }

    fn sample(s: &ConditionalState) -> Sample {
        let rho = s.coherence();
        Sample {
            t: s.t,
            d1: s.d1,
            a1: s.a1_expectation(),
            config: s.config,
            coherence_re: rho.re,
            coherence_im: rho.im,
        }
    }

    /// Runs from `start` for `t_end` and records samples and jumps.
    pub fn run<R: Rng + ?Sized>(
        &self,
        start: ConditionalState,
        t_end: f64,
        record_stride: usize,
        rng: &mut R,
    ) -> Result<(ConditionalState, Vec<Sample>, Vec<JumpEvent>, u64)> {
        start.check_normalized()?;
        let steps = (t_end / self.dt).round().max(0.0) as u64;
        let mut s = start;
        let mut samples = Vec::new();
        let mut jumps = Vec::new();
        for k in 0..steps {
            if let Some(j) = self.step(&mut s, rng)? {
                jumps.push(j);
            }
            if record_stride > 0 && (k + 1) % record_stride as u64 == 0 {
                samples.push(Self::sample(&s));
            }
        }
        Ok((s, samples, jumps, steps))
    }
}

/// Standalone step building the propagators on the fly; prefer [`Stepper`] in loops.
pub fn step<R: Rng + ?Sized>(
    state: &mut ConditionalState,
    p: &SystemParams,
    d: &DetectorParams,
    ov: &RateOverride,
    cfg: &StepConfig,
    rng: &mut R,
) -> Result<Option<JumpEvent>> {
    state.check_normalized()?;
    Stepper::new(p, d, ov, cfg.dt)?.step(state, rng)
}

/// Single trajectory from the empty dot using stream `stream` of `cfg.seed`.
pub fn run_trajectory(
    p: &SystemParams,
    d: &DetectorParams,
    ov: &RateOverride,
    cfg: &StepConfig,
    t_end: f64,
    stream: u64,
) -> Result<TrajectoryRecord> {
    let stepper = Stepper::new(p, d, ov, cfg.dt)?;
    let mut rng = trajectory_rng(cfg.seed, stream);
    let (_, samples, jumps, steps) = stepper.run(ConditionalState::empty(), t_end, cfg.record_stride, &mut rng)?;
    Ok(TrajectoryRecord {
        seed: cfg.seed,
        stream,
        dt: cfg.dt,
        t_end: steps as f64 * cfg.dt,
        steps,
        samples,
        jumps,
    })
}

/// `count` trajectories on streams `0..count`, computed in parallel.
pub fn run_ensemble(
    p: &SystemParams,
    d: &DetectorParams,
    ov: &RateOverride,
    cfg: &StepConfig,
    t_end: f64,
    count: usize,
) -> Result<Vec<TrajectoryRecord>> {
    (0..count as u64)
        .into_par_iter()
        .map(|k| run_trajectory(p, d, ov, cfg, t_end, k))
        .collect()
}

/// Mean and jackknife standard error of per-trajectory values.
pub fn jackknife(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let total: f64 = values.iter().sum();
    let loo: Vec<f64> = values.iter().map(|v| (total - v) / (n - 1) as f64).collect();
    let lbar = loo.iter().sum::<f64>() / n as f64;
    let var = (n - 1) as f64 / n as f64 * loo.iter().map(|x| (x - lbar).powi(2)).sum::<f64>();
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurrentEstimate {
    pub currents: ParticleCurrents,
    pub currents_se: ParticleCurrents,
    pub power: f64,
    pub power_se: f64,
    pub heat: f64,
    pub heat_se: f64,
    pub trajectories: usize,
    pub window: (f64, f64),
}

/// Jump-counting estimators over `[t_start, t_stop]`. Standard errors are NaN for a single trajectory.
pub fn estimate_currents_window(
    records: &[TrajectoryRecord],
    p: &SystemParams,
    t_start: f64,
    t_stop: f64,
) -> Result<CurrentEstimate> {
    if records.is_empty() {
        return Err(DemonError::Range("no trajectories".into()));
    }
    if !(t_stop > t_start && t_start >= 0.0) {
        return Err(DemonError::Range(format!("empty window [{t_start}, {t_stop}]")));
    }
    if let Some(r) = records.iter().find(|r| r.t_end + 1e-9 * r.dt.max(1.0) < t_stop) {
        return Err(DemonError::Range(format!(
            "window ends at {t_stop} but trajectory {} ends at {}",
            r.stream, r.t_end
        )));
    }
    let span = t_stop - t_start;
    let per: Vec<([f64; 6], f64, f64)> = records
        .iter()
        .map(|r| {
            let mut n = ParticleCurrents::default();
            for j in r.jumps.iter().filter(|j| j.t > t_start && j.t <= t_stop) {
                n.n[j.kind.bath().index()][j.config.index()] += j.kind.sign() / span;
            }
            let mut pw = 0.0;
            let mut q = 0.0;
            for j in r.jumps.iter().filter(|j| j.t > t_start && j.t <= t_stop) {
                let mu = p.mu(j.kind.bath());
                pw += mu * j.kind.sign() / span;
                q += (j.energy - mu) * j.kind.sign() / span;
            }
            (n.flat(), pw, q)
        })
        .collect();
    let mut currents = ParticleCurrents::default();
    let mut currents_se = ParticleCurrents::default();
    for k in 0..6 {
        let vals: Vec<f64> = per.iter().map(|x| x.0[k]).collect();
        let (m, se) = jackknife(&vals);
        currents.n[k / 3][k % 3] = m;
        currents_se.n[k / 3][k % 3] = se;
    }
    let (power, power_se) = jackknife(&per.iter().map(|x| x.1).collect::<Vec<_>>());
    let (heat, heat_se) = jackknife(&per.iter().map(|x| x.2).collect::<Vec<_>>());
    Ok(CurrentEstimate {
        currents,
        currents_se,
        power,
        power_se,
        heat,
        heat_se,
        trajectories: records.len(),
        window: (t_start, t_stop),
    })
}

/// Estimators over the stationary window: the first 20% of each trajectory is discarded.
pub fn estimate_currents(records: &[TrajectoryRecord], p: &SystemParams) -> Result<CurrentEstimate> {
    let t_end = records
        .iter()
        .map(|r| r.t_end)
        .fold(f64::INFINITY, f64::min);
    if !t_end.is_finite() {
        return Err(DemonError::Range("no trajectories".into()));
    }
    estimate_currents_window(records, p, 0.2 * t_end, t_end)
}
