//! Dense effective Hamiltonian on the resonant sector.
//!
//! Rows are built independently: every process leaving a state (hopping,
//! forward N-body conversion, reverse conversion) is evaluated from the same
//! inverse-cube table with the same argument order as its mirror, so the
//! matrix comes out symmetric bit for bit without a mirroring pass.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{InteractionOrder, Level, MemoryBudget, SectorBasis, SectorState};
use crate::coupling::{omega3_from_inverse_cubes, omega4_from_inverse_cubes, CouplingConstants, HopKind};
use crate::error::{Error, Result};
use crate::geometry::ChainGeometry;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Process {
    Hop(HopKind),
    FieldTuned,
}

impl Process {
    pub fn label(&self) -> String {
        match self {
            Process::Hop(k) => format!("hop {}", k.label()),
            Process::FieldTuned => "field-tuned".to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SectorHamiltonian {
    dim: usize,
    order: InteractionOrder,
    positions_um: Vec<f64>,
    constants: CouplingConstants,
    data: Vec<f64>,
}

pub fn matrix_bytes(dim: usize) -> u64 {
    (dim as u64).saturating_mul(dim as u64).saturating_mul(8)
}

pub fn assemble(
    basis: &SectorBasis,
    geometry: &ChainGeometry,
    constants: &CouplingConstants,
    budget: MemoryBudget,
) -> Result<SectorHamiltonian> {
    constants.validate()?;
    let n = basis.n_atoms();
    if geometry.n_atoms() != n {
        return Err(Error::Domain(format!(
            "basis has {n} atoms but geometry has {}",
            geometry.n_atoms()
        )));
    }
    let dim = basis.dim();
    budget.check(&format!("dense Hamiltonian of dimension {dim}"), matrix_bytes(dim))?;

    let inv = inverse_cubes(&geometry.positions_bohr())?;
    let mut data = vec![0.0; dim * dim];
    data.par_chunks_mut(dim).enumerate().for_each(|(a, row)| {
        let mut entries = Vec::new();
        for_each_transition(basis.state(a), basis.order(), &inv, constants, |code, v, _| {
            let b = basis
                .lookup_code(code)
                .expect("sector-preserving process left the basis");
            entries.push((b, v));
        });
        entries.sort_unstable_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)));
        for (b, v) in entries {
            row[b] += v;
        }
    });
    Ok(SectorHamiltonian {
        dim,
        order: basis.order(),
        positions_um: geometry.positions_um().to_vec(),
        constants: *constants,
        data,
    })
}

/// Symmetric n×n table of 1/R³ in bohr⁻³; the diagonal is unused.
fn inverse_cubes(positions_bohr: &[f64]) -> Result<Vec<f64>> {
    let n = positions_bohr.len();
    let mut inv = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let r = (positions_bohr[i] - positions_bohr[j]).abs();
            if !(r > 0.0) {
                return Err(Error::Domain(format!("atoms {i} and {j} coincide")));
            }
            let v = 1.0 / (r * r * r);
            inv[i * n + j] = v;
            inv[j * n + i] = v;
        }
    }
    Ok(inv)
}

fn for_each_combination(items: &[usize], m: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(items: &[usize], m: usize, start: usize, buf: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if buf.len() == m {
            f(buf);
            return;
        }
        let need = m - buf.len();
        for i in start..=items.len() - need {
            buf.push(items[i]);
            rec(items, m, i + 1, buf, f);
            buf.pop();
        }
    }
    if m <= items.len() {
        rec(items, m, 0, &mut Vec::with_capacity(m), f);
    }
}

/// Field-tuned element for s' atoms `sprime` (ascending) and s atom `s`.
#[inline]
fn field_element(sprime: &[usize], s: usize, n: usize, inv: &[f64], c: &CouplingConstants) -> f64 {
    let r = |a: usize, b: usize| inv[a * n + b];
    match sprime {
        [i] => c.omega2_strength() * r(*i, s),
        [i, j] => omega3_from_inverse_cubes(r(*i, *j), r(*i, s), r(*j, s), c.omega3_prefactor()),
        [i, j, k] => omega4_from_inverse_cubes(
            [r(*i, *j), r(*i, *k), r(*j, *k), r(*i, s), r(*j, s), r(*k, s)],
            c.omega4_prefactor(),
        ),
        _ => unreachable!("field-tuned group size"),
    }
}

/// Visits every process leaving `state` as (target code, matrix element, process).
fn for_each_transition(
    state: SectorState,
    order: InteractionOrder,
    inv: &[f64],
    c: &CouplingConstants,
    mut f: impl FnMut(u64, f64, Process),
) {
    let n = state.len();
    let levels: Vec<Level> = state.levels().collect();

    for i in 0..n {
        for j in i + 1..n {
            if let Some(kind) = HopKind::between(levels[i], levels[j]) {
                let strength = c.hop_strength(kind);
                if strength != 0.0 {
                    let target = state.with_level(i, levels[j]).with_level(j, levels[i]);
                    f(target.code(), strength * inv[i * n + j], Process::Hop(kind));
                }
            }
        }
    }

    let sites = |l: Level| -> Vec<usize> { (0..n).filter(|&i| levels[i] == l).collect() };
    let p_sites = sites(Level::P);
    let s_sites = sites(Level::S);
    let sp_sites = sites(Level::SPrime);
    let m = order.value();

    for_each_combination(&p_sites, m, &mut |group| {
        for (pos, &s) in group.iter().enumerate() {
            let others: Vec<usize> = group.iter().enumerate().filter(|&(q, _)| q != pos).map(|(_, &x)| x).collect();
            let mut target = state.with_level(s, Level::S);
            for &o in &others {
                target = target.with_level(o, Level::SPrime);
            }
            f(target.code(), field_element(&others, s, n, inv, c), Process::FieldTuned);
        }
    });

    for &s in &s_sites {
        for_each_combination(&sp_sites, m - 1, &mut |others| {
            let mut target = state.with_level(s, Level::P);
            for &o in others {
                target = target.with_level(o, Level::P);
            }
            f(target.code(), field_element(others, s, n, inv, c), Process::FieldTuned);
        });
    }
}

/// Process linking two states, found by diffing their labels.
pub fn classify_transition(a: &SectorState, b: &SectorState, order: InteractionOrder) -> Option<Process> {
    if a.len() != b.len() {
        return None;
    }
    let diff: Vec<usize> = (0..a.len()).filter(|&i| a.level(i) != b.level(i)).collect();
    if let [i, j] = diff[..] {
        if a.level(i) == b.level(j) && a.level(j) == b.level(i) {
            return HopKind::between(a.level(i), a.level(j)).map(Process::Hop);
        }
    }
    if diff.len() != order.value() {
        return None;
    }
    let converts = |from: &SectorState, to: &SectorState| {
        diff.iter().all(|&i| from.level(i) == Level::P)
            && diff.iter().filter(|&&i| to.level(i) == Level::S).count() == 1
            && diff.iter().filter(|&&i| to.level(i) == Level::SPrime).count() == order.value() - 1
    };
    (converts(a, b) || converts(b, a)).then_some(Process::FieldTuned)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub dim: usize,
    pub nonzeros_per_row: Vec<usize>,
    pub by_process: BTreeMap<String, usize>,
    /// Nonzeros whose states are not linked by any allowed process.
    pub unclassified: usize,
}

impl SparsityReport {
    pub fn total_nonzeros(&self) -> usize {
        self.nonzeros_per_row.iter().sum()
    }
}

pub fn row_sparsity_report(h: &SectorHamiltonian, basis: &SectorBasis) -> SparsityReport {
    let mut report = SparsityReport {
        dim: h.dim,
        nonzeros_per_row: vec![0; h.dim],
        by_process: BTreeMap::new(),
        unclassified: 0,
    };
    for a in 0..h.dim {
        for (b, &v) in h.row(a).iter().enumerate() {
            if v == 0.0 {
                continue;
            }
            report.nonzeros_per_row[a] += 1;
            match classify_transition(&basis.state(a), &basis.state(b), h.order) {
                Some(p) => *report.by_process.entry(p.label()).or_default() += 1,
                None => report.unclassified += 1,
            }
        }
    }
    report
}

impl SectorHamiltonian {
    /// Wraps a row-major dense matrix, e.g. one read back from a dump.
    pub fn from_dense(
        dim: usize,
        order: InteractionOrder,
        data: Vec<f64>,
        positions_um: Vec<f64>,
        constants: CouplingConstants,
    ) -> Result<Self> {
        if data.len() != dim * dim {
            return Err(Error::Domain(format!(
                "dense matrix of dimension {dim} needs {} entries, got {}",
                dim * dim,
                data.len()
            )));
        }
        Ok(Self { dim, order, positions_um, constants, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> InteractionOrder {
        self.order
    }

    pub fn positions_um(&self) -> &[f64] {
        &self.positions_um
    }

    pub fn constants(&self) -> &CouplingConstants {
        &self.constants
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.data[a * self.dim + b]
    }

    pub fn row(&self, a: usize) -> &[f64] {
        &self.data[a * self.dim..(a + 1) * self.dim]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn is_exactly_symmetric(&self) -> bool {
        (0..self.dim).all(|a| (a + 1..self.dim).all(|b| self.get(a, b).to_bits() == self.get(b, a).to_bits()))
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// y = H x.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|a| self.row(a).iter().zip(x).map(|(h, v)| h * v).sum())
            .collect()
    }
}
