//! Dipole-dipole matrix elements in atomic units (energies in hartree,
//! lengths in bohr, dipoles in e·a0).

use serde::{Deserialize, Serialize};

use crate::basis::{InteractionOrder, Level};
use crate::error::{Error, Result};

/// Bohr radii per micrometer (CODATA 2018 bohr radius).
pub const BOHR_PER_MICROMETER: f64 = 1e-6 / 5.291_772_109_03e-11;
/// Microseconds per atomic unit of time.
pub const MICROSECONDS_PER_AU_TIME: f64 = 2.418_884_326_585_7e-11;

/// γμ/δ of the default constants in µm³: Ω₃ at 11 µm equals Ω₂ at 50 µm.
pub const DEFAULT_GAMMA_MU_OVER_DELTA_UM3: f64 = 1_771_561.0 / 140_625.0;

pub fn au_time_to_us(t_au: f64) -> f64 {
    t_au * MICROSECONDS_PER_AU_TIME
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HopKind {
    PS,
    PSPrime,
    SSPrime,
}

impl HopKind {
    pub const ALL: [HopKind; 3] = [HopKind::PS, HopKind::PSPrime, HopKind::SSPrime];

    /// Exchange kind for two distinct labels; `None` for equal labels.
    pub fn between(a: Level, b: Level) -> Option<HopKind> {
        match (a.min(b), a.max(b)) {
            (Level::P, Level::S) => Some(HopKind::PS),
            (Level::P, Level::SPrime) => Some(HopKind::PSPrime),
            (Level::S, Level::SPrime) => Some(HopKind::SSPrime),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            HopKind::PS => "p-s",
            HopKind::PSPrime => "p-s'",
            HopKind::SSPrime => "s-s'",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoppingFlags {
    pub p_s: bool,
    pub p_sprime: bool,
    pub s_sprime: bool,
}

impl HoppingFlags {
    pub const ALL_ON: Self = Self {
        p_s: true,
        p_sprime: true,
        s_sprime: true,
    };
    pub const ALL_OFF: Self = Self {
        p_s: false,
        p_sprime: false,
        s_sprime: false,
    };

    pub fn enabled(&self, kind: HopKind) -> bool {
        match kind {
            HopKind::PS => self.p_s,
            HopKind::PSPrime => self.p_sprime,
            HopKind::SSPrime => self.s_sprime,
        }
    }
}

impl Default for HoppingFlags {
    fn default() -> Self {
        Self::ALL_ON
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingConstants {
    /// p to s dipole.
    pub mu: f64,
    /// p to s' dipole.
    pub nu: f64,
    /// s to s' dipole.
    pub gamma: f64,
    /// Intermediate-state detuning.
    pub delta: f64,
    /// Scale of the direct two-body field-tuned element only.
    pub alpha: f64,
    pub hopping: HoppingFlags,
}

impl Default for CouplingConstants {
    fn default() -> Self {
        let (mu, nu, gamma) = (1000.0, 1000.0, 1000.0);
        let ratio_bohr3 = DEFAULT_GAMMA_MU_OVER_DELTA_UM3 * BOHR_PER_MICROMETER.powi(3);
        Self {
            mu,
            nu,
            gamma,
            delta: gamma * mu / ratio_bohr3,
            alpha: 1.0,
            hopping: HoppingFlags::ALL_ON,
        }
    }
}

impl CouplingConstants {
    /// μ = ν = γ = δ = α = 1, all hopping on.
    pub fn unit() -> Self {
        Self {
            mu: 1.0,
            nu: 1.0,
            gamma: 1.0,
            delta: 1.0,
            alpha: 1.0,
            hopping: HoppingFlags::ALL_ON,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("mu", self.mu),
            ("nu", self.nu),
            ("gamma", self.gamma),
            ("delta", self.delta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Config(format!("alpha must lie in (0, 1], got {}", self.alpha)));
        }
        Ok(())
    }

    pub(crate) fn hop_strength(&self, kind: HopKind) -> f64 {
        if !self.hopping.enabled(kind) {
            return 0.0;
        }
        match kind {
            HopKind::PS => self.mu * self.mu,
            HopKind::PSPrime => self.nu * self.nu,
            HopKind::SSPrime => self.gamma * self.gamma,
        }
    }

    pub(crate) fn omega2_strength(&self) -> f64 {
        self.alpha * self.mu * self.nu
    }

    pub(crate) fn omega3_prefactor(&self) -> f64 {
        self.gamma * self.mu * self.mu * self.nu / self.delta
    }

    pub(crate) fn omega4_prefactor(&self) -> f64 {
        self.gamma * self.gamma * self.mu.powi(3) * self.nu / (self.delta * self.delta)
    }
}

fn check_distance(r: f64) -> Result<()> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Domain(format!("distance must be positive and finite, got {r}")));
    }
    Ok(())
}

fn check_distinct(idx: &[usize], n: usize) -> Result<()> {
    for (a, &i) in idx.iter().enumerate() {
        if i >= n {
            return Err(Error::Domain(format!("atom index {i} out of range for {n} atoms")));
        }
        if idx[..a].contains(&i) {
            return Err(Error::Domain(format!("repeated atom index {i} in {idx:?}")));
        }
    }
    Ok(())
}

fn inv_cube(positions: &[f64], i: usize, j: usize) -> Result<f64> {
    let r = (positions[i] - positions[j]).abs();
    check_distance(r)?;
    Ok(1.0 / (r * r * r))
}

/// αμν/R³ with R in bohr.
pub fn omega2(r_bohr: f64, c: &CouplingConstants) -> Result<f64> {
    check_distance(r_bohr)?;
    Ok(c.omega2_strength() / r_bohr.powi(3))
}

/// μ²/R³, ν²/R³ or γ²/R³; zero when the kind is disabled.
pub fn hop_element(kind: HopKind, r_bohr: f64, c: &CouplingConstants) -> Result<f64> {
    check_distance(r_bohr)?;
    Ok(c.hop_strength(kind) / r_bohr.powi(3))
}

/// Three-body element; atoms i, j end in s', atom k ends in s.
pub fn omega3(positions_bohr: &[f64], i: usize, j: usize, k: usize, c: &CouplingConstants) -> Result<f64> {
    check_distinct(&[i, j, k], positions_bohr.len())?;
    let p = positions_bohr;
    Ok(omega3_from_inverse_cubes(
        inv_cube(p, i, j)?,
        inv_cube(p, i, k)?,
        inv_cube(p, j, k)?,
        c.omega3_prefactor(),
    ))
}

/// Four-body element; atoms i, j, k end in s', atom l ends in s.
pub fn omega4(
    positions_bohr: &[f64],
    i: usize,
    j: usize,
    k: usize,
    l: usize,
    c: &CouplingConstants,
) -> Result<f64> {
    check_distinct(&[i, j, k, l], positions_bohr.len())?;
    let p = positions_bohr;
    Ok(omega4_from_inverse_cubes(
        [
            inv_cube(p, i, j)?,
            inv_cube(p, i, k)?,
            inv_cube(p, j, k)?,
            inv_cube(p, i, l)?,
            inv_cube(p, j, l)?,
            inv_cube(p, k, l)?,
        ],
        c.omega4_prefactor(),
    ))
}

#[inline]
pub(crate) fn omega3_from_inverse_cubes(r_ij: f64, r_ik: f64, r_jk: f64, prefactor: f64) -> f64 {
    prefactor * r_ij * (r_ik + r_jk)
}

/// `r` holds inverse cubes in the order ij, ik, jk, il, jl, kl.
#[inline]
pub(crate) fn omega4_from_inverse_cubes(r: [f64; 6], prefactor: f64) -> f64 {
    let [r_ij, r_ik, r_jk, r_il, r_jl, r_kl] = r;
    prefactor
        * (r_il * (r_ij * r_jk + r_ik * r_jk)
            + r_jl * (r_ij * r_ik + r_ik * r_jk)
            + r_kl * (r_ij * r_ik + r_ij * r_jk))
}

/// Nearest-neighbour N-body element at spacing `spacing_bohr`, last atom in s.
pub fn nearest_neighbour_element(order: InteractionOrder, spacing_bohr: f64, c: &CouplingConstants) -> Result<f64> {
    check_distance(spacing_bohr)?;
    let chain: Vec<f64> = (0..order.value()).map(|i| i as f64 * spacing_bohr).collect();
    match order {
        InteractionOrder::Two => omega2(spacing_bohr, c),
        InteractionOrder::Three => omega3(&chain, 0, 1, 2, c),
        InteractionOrder::Four => omega4(&chain, 0, 1, 2, 3, c),
    }
}

/// 1/|Ω_N| in atomic units of time, spacing given in bohr.
pub fn natural_time_unit(order: InteractionOrder, spacing_bohr: f64, c: &CouplingConstants) -> Result<f64> {
    Ok(1.0 / nearest_neighbour_element(order, spacing_bohr, c)?.abs())
}

/// [`natural_time_unit`] with the spacing in micrometers.
pub fn natural_time_unit_um(order: InteractionOrder, spacing_um: f64, c: &CouplingConstants) -> Result<f64> {
    natural_time_unit(order, spacing_um * BOHR_PER_MICROMETER, c)
}
