//! Steady-state particle currents and energy flows.
//!
//! Sign convention: currents count electrons entering the dot, so `P < 0`
//! when the device pushes electrons against the bias.

use serde::{Deserialize, Serialize};

use crate::model::{Bath, DetectorParams, LevelConfiguration, RateOverride, RateTable, SystemParams};
use crate::solver::{HalfLineMasses, C00, CLL, CLR_RE, CRR};

/// `n[bath][configuration]`, positive into the dot.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParticleCurrents {
    pub n: [[f64; 3]; 2],
}

impl ParticleCurrents {
    pub fn get(&self, bath: Bath, cfg: LevelConfiguration) -> f64 {
        self.n[bath.index()][cfg.index()]
    }

    pub fn total(&self) -> f64 {
        self.n.iter().flatten().sum()
    }

    pub fn bath_total(&self, bath: Bath) -> f64 {
        self.n[bath.index()].iter().sum()
    }

    /// Flat order `L1, L2, L3, R1, R2, R3`.
    pub fn flat(&self) -> [f64; 6] {
        let [l, r] = self.n;
        [l[0], l[1], l[2], r[0], r[1], r[2]]
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyFlows {
    pub p: f64,
    pub qdot: f64,
    pub edot_d: f64,
    pub edot_m: f64,
    /// Diagnostic; excluded from the closure identities.
    pub edot_b: f64,
    pub edot_g: f64,
}

/// Currents under ideal charge detection: the empty dot is always in
/// configuration 1, occupied states on `D ≤ 0` in 2 and on `D > 0` in 3.
pub fn particle_currents(m: &HalfLineMasses, p: &SystemParams, ov: &RateOverride) -> ParticleCurrents {
    let r = RateTable::new(p, ov);
    let empty = m.total(C00);
    ParticleCurrents {
        n: [
            [r.g_l0 * empty, -r.k_ld * m.left[CLL], -r.k_lu * m.right[CLL]],
            [r.g_ru * empty, -r.k_rd * m.left[CRR], -r.k_r0 * m.right[CRR]],
        ],
    }
}

pub fn power_from_currents(n: &ParticleCurrents, p: &SystemParams) -> f64 {
    Bath::ALL.iter().map(|&b| p.mu(b) * n.bath_total(b)).sum()
}

pub fn heat_from_currents(n: &ParticleCurrents, p: &SystemParams) -> f64 {
    let mut q = 0.0;
    for bath in Bath::ALL {
        for cfg in LevelConfiguration::ALL {
            let eps = cfg.label(bath).energy(p);
            q += (eps - p.mu(bath)) * n.get(bath, cfg);
        }
    }
    q
}

/// `−4gΓ̃ Re ρLR`, integrated over the detector outcome.
pub fn measurement_power(m: &HalfLineMasses, p: &SystemParams, d: &DetectorParams) -> f64 {
    -4.0 * p.g * d.gamma_tilde(p) * m.total(CLR_RE)
}

/// Coherence-weighted bath term, resolved by configuration.
pub fn coherence_flux(m: &HalfLineMasses, p: &SystemParams, ov: &RateOverride) -> f64 {
    let r = RateTable::new(p, ov);
    -p.g * ((r.k_ld + r.k_rd) * m.left[CLR_RE] + (r.k_lu + r.k_r0) * m.right[CLR_RE])
}

pub fn energy_flows(m: &HalfLineMasses, p: &SystemParams, d: &DetectorParams, ov: &RateOverride) -> EnergyFlows {
    let n = particle_currents(m, p, ov);
    let pw = power_from_currents(&n, p);
    let qdot = heat_from_currents(&n, p);
    let edot_m = measurement_power(m, p, d);
    EnergyFlows {
        p: pw,
        qdot,
        edot_d: -(pw + qdot),
        edot_m,
        edot_b: coherence_flux(m, p, ov),
        edot_g: -(pw + qdot + edot_m),
    }
}
