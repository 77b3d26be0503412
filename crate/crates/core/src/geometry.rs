use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::coupling::BOHR_PER_MICROMETER;
use crate::error::{Error, Result};

/// Atom positions along the chain axis, in micrometers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainGeometry {
    spacing_um: f64,
    disorder_w: f64,
    seed: Option<u64>,
    positions_um: Vec<f64>,
}

/// Stream seed of disorder sample `sample`.
pub fn sample_seed(base_seed: u64, sample: u64) -> u64 {
    base_seed ^ sample.wrapping_add(1)
}

impl ChainGeometry {
    pub fn ordered(n_atoms: usize, spacing_um: f64) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::Domain("n_atoms must be at least 1".into()));
        }
        if !(spacing_um > 0.0 && spacing_um.is_finite()) {
            return Err(Error::Domain(format!(
                "spacing must be positive and finite, got {spacing_um}"
            )));
        }
        Ok(Self {
            spacing_um,
            disorder_w: 0.0,
            seed: None,
            positions_um: (0..n_atoms).map(|i| i as f64 * spacing_um).collect(),
        })
    }

    /// Shifts atom i by u_i * d with u_i uniform on [-w, w], drawn from ChaCha8.
    pub fn apply_disorder(&self, disorder_w: f64, seed: u64) -> Result<Self> {
        if !(0.0..0.5).contains(&disorder_w) {
            return Err(Error::Domain(format!(
                "disorder w must satisfy 0 <= w < 0.5, got {disorder_w}"
            )));
        }
        let d = self.spacing_um;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let positions_um = (0..self.n_atoms())
            .map(|i| {
                let u = unit_uniform(&mut rng);
                let shift = disorder_w * (2.0 * u - 1.0);
                i as f64 * d + shift * d
            })
            .collect();
        Ok(Self {
            spacing_um: d,
            disorder_w,
            seed: Some(seed),
            positions_um,
        })
    }

    pub fn disordered(n_atoms: usize, spacing_um: f64, disorder_w: f64, seed: u64) -> Result<Self> {
        Self::ordered(n_atoms, spacing_um)?.apply_disorder(disorder_w, seed)
    }

    /// Arbitrary positions, used by tests and by callers working in atomic units.
    pub fn from_positions(positions_um: Vec<f64>) -> Result<Self> {
        if positions_um.is_empty() || positions_um.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("positions must be nonempty and finite".into()));
        }
        for i in 0..positions_um.len() {
            for j in 0..i {
                if positions_um[i] == positions_um[j] {
                    return Err(Error::Domain(format!("atoms {j} and {i} coincide")));
                }
            }
        }
        let spacing_um = if positions_um.len() > 1 {
            (positions_um[positions_um.len() - 1] - positions_um[0]).abs()
                / (positions_um.len() - 1) as f64
        } else {
            1.0
        };
        Ok(Self {
            spacing_um,
            disorder_w: 0.0,
            seed: None,
            positions_um,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.positions_um.len()
    }

    pub fn spacing_um(&self) -> f64 {
        self.spacing_um
    }

    pub fn disorder_w(&self) -> f64 {
        self.disorder_w
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn positions_um(&self) -> &[f64] {
        &self.positions_um
    }

    pub fn positions_bohr(&self) -> Vec<f64> {
        self.positions_um
            .iter()
            .map(|x| x * BOHR_PER_MICROMETER)
            .collect()
    }

    pub fn pair_distance(&self, i: usize, j: usize) -> Result<f64> {
        let n = self.n_atoms();
        if i >= n || j >= n {
            return Err(Error::Domain(format!("atom index out of range for {n} atoms")));
        }
        if i == j {
            return Err(Error::Domain(format!("pair distance needs distinct atoms, got ({i}, {i})")));
        }
        Ok((self.positions_um[i] - self.positions_um[j]).abs())
    }
}

/// Uniform on [0, 1) from the top 53 bits; fixed arithmetic for cross-platform identity.
fn unit_uniform(rng: &mut ChaCha8Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}
