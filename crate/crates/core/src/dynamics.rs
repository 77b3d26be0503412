//! Quench evolution by spectral decomposition.
//!
//! Times are in natural units; callers pass eigenvalues already multiplied by
//! the natural time unit (see [`natural_energies`]).

use std::collections::BTreeMap;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, MatRef, Par};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{saturation_fraction, SectorBasis, SectorState};
use crate::coupling::au_time_to_us;
use crate::error::{Error, Result};
use crate::spectral::EigenSystem;

/// Time points evolved per matrix product.
const TIME_CHUNK: usize = 64;

#[derive(Clone, Debug, PartialEq)]
pub struct QuenchSpec {
    pub initial: SectorState,
    pub times: Vec<f64>,
    pub cut: usize,
}

/// Left block size ⌈n/2⌉.
pub fn default_cut(n_atoms: usize) -> usize {
    n_atoms.div_ceil(2)
}

impl QuenchSpec {
    pub fn new(basis: &SectorBasis, initial: SectorState, times: Vec<f64>, cut: usize) -> Result<Self> {
        initial.check_sector(basis.n_atoms(), basis.order())?;
        validate_times(&times)?;
        check_cut(cut, basis.n_atoms())?;
        Ok(Self { initial, times, cut })
    }

    /// All-p start, default cut.
    pub fn all_p(basis: &SectorBasis, times: Vec<f64>) -> Result<Self> {
        Self::new(basis, SectorState::all_p(basis.n_atoms())?, times, default_cut(basis.n_atoms()))
    }
}

fn validate_times(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Domain("time grid is empty".into()));
    }
    if !(times[0] >= 0.0) || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("time grid must be finite and start at t >= 0".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("time grid must be strictly increasing".into()));
    }
    Ok(())
}

fn check_cut(cut: usize, n_atoms: usize) -> Result<()> {
    if cut == 0 || cut >= n_atoms {
        return Err(Error::Domain(format!("cut must satisfy 0 < cut < {n_atoms}, got {cut}")));
    }
    Ok(())
}

/// `points` log-spaced times in [t_min, t_max], optionally preceded by t = 0.
pub fn log_time_grid(t_min: f64, t_max: f64, points: usize, include_zero: bool) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) || points < 2 {
        return Err(Error::Domain(format!(
            "log grid needs 0 < t_min < t_max and >= 2 points, got [{t_min}, {t_max}] x {points}"
        )));
    }
    let (a, b) = (t_min.ln(), t_max.ln());
    let mut out = Vec::with_capacity(points + include_zero as usize);
    if include_zero {
        out.push(0.0);
    }
    for k in 0..points {
        let t = if k == points - 1 { t_max } else { (a + (b - a) * k as f64 / (points - 1) as f64).exp() };
        out.push(if k == 0 { t_min } else { t });
    }
    Ok(out)
}

pub fn natural_energies(eig: &EigenSystem, t_unit_au: f64) -> Vec<f64> {
    eig.eigenvalues().iter().map(|e| e * t_unit_au).collect()
}

/// c_i = ⟨ψ_i|Ψ(0)⟩ for the quench's initial basis state.
pub fn initial_overlaps(eig: &EigenSystem, basis: &SectorBasis, quench: &QuenchSpec) -> Result<Vec<f64>> {
    let idx = basis.rank(&quench.initial)?;
    Ok((0..eig.dim()).map(|i| eig.component(i, idx)).collect())
}

/// F(t) = |Σ |c_i|² e^{−iE_i t}|², clamped to [0, 1] against roundoff.
pub fn fidelity_series(c: &[f64], energies: &[f64], times: &[f64]) -> Vec<f64> {
    let p: Vec<f64> = c.iter().map(|x| x * x).collect();
    times
        .iter()
        .map(|&t| {
            let (mut re, mut im) = (0.0, 0.0);
            for (pi, e) in p.iter().zip(energies) {
                let (s, co) = (e * t).sin_cos();
                re += pi * co;
                im -= pi * s;
            }
            (re * re + im * im).clamp(0.0, 1.0)
        })
        .collect()
}

/// Ψ(t) = Σ_i c_i e^{−iE_i t} ψ_i.
pub fn evolve_state(eig: &EigenSystem, c: &[f64], energies: &[f64], t: f64) -> Vec<Complex64> {
    let mut psi = vec![Complex64::new(0.0, 0.0); eig.dim()];
    for i in 0..eig.dim() {
        let phase = Complex64::from_polar(c[i], -energies[i] * t);
        for (b, v) in eig.eigenvector(i).iter().enumerate() {
            psi[b] += phase * v;
        }
    }
    psi
}

/// Evolved states for a block of times, as (real, imaginary) D×T matrices.
fn evolve_block(v: MatRef<'_, f64>, c: &[f64], energies: &[f64], times: &[f64]) -> (Mat<f64>, Mat<f64>) {
    let d = c.len();
    let phi_re = Mat::<f64>::from_fn(d, times.len(), |i, k| c[i] * (energies[i] * times[k]).cos());
    let phi_im = Mat::<f64>::from_fn(d, times.len(), |i, k| -c[i] * (energies[i] * times[k]).sin());
    let mut re = Mat::<f64>::zeros(d, times.len());
    let mut im = Mat::<f64>::zeros(d, times.len());
    matmul(re.as_mut(), Accum::Replace, v, phi_re.as_ref(), 1.0, Par::Seq);
    matmul(im.as_mut(), Accum::Replace, v, phi_im.as_ref(), 1.0, Par::Seq);
    (re, im)
}

/// Calls `f(k, ψ(t_k))` for every time point, in order.
fn for_each_state(eig: &EigenSystem, c: &[f64], energies: &[f64], times: &[f64], mut f: impl FnMut(usize, &[Complex64])) {
    let d = eig.dim();
    let vectors: Vec<f64> = (0..d).flat_map(|i| eig.eigenvector(i).iter().copied()).collect();
    let v = MatRef::from_column_major_slice(&vectors, d, d);
    let mut psi = vec![Complex64::new(0.0, 0.0); d];
    for (chunk_no, chunk) in times.chunks(TIME_CHUNK).enumerate() {
        let (re, im) = evolve_block(v, c, energies, chunk);
        for k in 0..chunk.len() {
            for b in 0..d {
                psi[b] = Complex64::new(re[(b, k)], im[(b, k)]);
            }
            f(chunk_no * TIME_CHUNK + k, &psi);
        }
    }
}

/// Sector split into left sites [0, cut) and right sites [cut, n).
#[derive(Clone, Debug)]
pub struct Bipartition {
    pub cut: usize,
    left: Vec<usize>,
    right: Vec<usize>,
    d_a: usize,
    d_b: usize,
}

impl Bipartition {
    pub fn new(basis: &SectorBasis, cut: usize) -> Result<Self> {
        let n = basis.n_atoms();
        check_cut(cut, n)?;
        let shift = 2 * (n - cut) as u32;
        let mask = (1u64 << shift) - 1;
        let mut lmap = BTreeMap::new();
        let mut rmap = BTreeMap::new();
        for s in basis.states() {
            lmap.insert(s.code() >> shift, 0usize);
            rmap.insert(s.code() & mask, 0usize);
        }
        for (i, v) in lmap.values_mut().enumerate() {
            *v = i;
        }
        for (i, v) in rmap.values_mut().enumerate() {
            *v = i;
        }
        let left = basis.states().iter().map(|s| lmap[&(s.code() >> shift)]).collect();
        let right = basis.states().iter().map(|s| rmap[&(s.code() & mask)]).collect();
        Ok(Self { cut, left, right, d_a: lmap.len(), d_b: rmap.len() })
    }

    /// Distinct left configurations in the sector.
    pub fn d_a(&self) -> usize {
        self.d_a
    }

    /// Distinct right configurations in the sector.
    pub fn d_b(&self) -> usize {
        self.d_b
    }

    /// von Neumann entropy −Σ λ ln λ of the reduced density matrix.
    pub fn entropy(&self, psi: &[Complex64]) -> f64 {
        let swap = self.d_a > self.d_b;
        let m = self.d_a.min(self.d_b);
        let (rows, cols) = if swap { (&self.right, &self.left) } else { (&self.left, &self.right) };
        let other = self.d_a.max(self.d_b);
        let mut a = vec![Complex64::new(0.0, 0.0); m * other];
        for (b, amp) in psi.iter().enumerate() {
            a[rows[b] * other + cols[b]] = *amp;
        }
        let gram = Mat::<Complex64>::from_fn(m, m, |i, j| {
            let (ri, rj) = (&a[i * other..(i + 1) * other], &a[j * other..(j + 1) * other]);
            ri.iter().zip(rj).map(|(x, y)| x * y.conj()).sum()
        });
        let mut s = faer::diag::Diag::<Complex64>::zeros(m);
        let mut mem = MemBuffer::new(evd::self_adjoint_evd_scratch::<Complex64>(
            m,
            ComputeEigenvectors::No,
            Par::Seq,
            Default::default(),
        ));
        let ok = evd::self_adjoint_evd(gram.as_ref(), s.as_mut(), None, Par::Seq, MemStack::new(&mut mem), Default::default());
        assert!(ok.is_ok(), "Hermitian eigensolver failed on a {m}x{m} Gram matrix");
        s.column_vector()
            .iter()
            .map(|l| l.re)
            .filter(|&l| l > 0.0)
            .map(|l| -l * l.ln())
            .sum::<f64>()
            .max(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub s_fraction: bool,
    pub entanglement: bool,
}

impl Default for Metrics {
    fn default() -> Self {
        Self { s_fraction: true, entanglement: true }
    }
}

pub fn s_fraction_series(eig: &EigenSystem, c: &[f64], energies: &[f64], basis: &SectorBasis, times: &[f64]) -> Vec<f64> {
    let weights: Vec<f64> = basis.states().iter().map(|s| s.s_count() as f64 / basis.n_atoms() as f64).collect();
    let mut out = vec![0.0; times.len()];
    for_each_state(eig, c, energies, times, |k, psi| out[k] = s_fraction_of(psi, &weights));
    out
}

pub fn entanglement_entropy_series(
    eig: &EigenSystem,
    c: &[f64],
    energies: &[f64],
    basis: &SectorBasis,
    cut: usize,
    times: &[f64],
) -> Result<Vec<f64>> {
    let bip = Bipartition::new(basis, cut)?;
    let mut states = Vec::with_capacity(times.len());
    for_each_state(eig, c, energies, times, |_, psi| states.push(psi.to_vec()));
    Ok(states.par_iter().map(|psi| bip.entropy(psi)).collect())
}

fn s_fraction_of(psi: &[Complex64], weights: &[f64]) -> f64 {
    psi.iter().zip(weights).map(|(a, w)| a.norm_sqr() * w).sum::<f64>().clamp(0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub times_natural: Vec<f64>,
    pub times_us: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub s_fraction: Option<Vec<f64>>,
    pub s_over_saturation: Option<Vec<f64>>,
    pub ee_raw: Option<Vec<f64>>,
    pub ee_normalized: Option<Vec<f64>>,
    /// Largest |‖Ψ(t)‖² − 1| seen on the grid (0 when states were not evolved).
    pub max_norm_error: f64,
    pub saturation: f64,
    pub t_heisenberg_natural: f64,
    pub t_unit_au: f64,
    /// Distinct left and right configurations of the cut.
    pub d_a: usize,
    pub d_b: usize,
}

/// Every enabled metric of one quench, evolving each time point once.
pub fn observe(
    basis: &SectorBasis,
    eig: &EigenSystem,
    quench: &QuenchSpec,
    t_unit_au: f64,
    metrics: Metrics,
) -> Result<ObservableSeries> {
    validate_times(&quench.times)?;
    let c = initial_overlaps(eig, basis, quench)?;
    let energies = natural_energies(eig, t_unit_au);
    let times = &quench.times;
    let fidelity = fidelity_series(&c, &energies, times);
    let saturation = saturation_fraction(basis.n_atoms(), basis.order())?;
    let bip = Bipartition::new(basis, quench.cut)?;
    let t_h = crate::spectral::heisenberg_time(&energies).unwrap_or(f64::INFINITY);

    let mut s = metrics.s_fraction.then(|| vec![0.0; times.len()]);
    let mut norm_err = 0.0f64;
    let mut kept = Vec::new();
    if metrics.s_fraction || metrics.entanglement {
        let weights: Vec<f64> = basis.states().iter().map(|st| st.s_count() as f64 / basis.n_atoms() as f64).collect();
        for_each_state(eig, &c, &energies, times, |k, psi| {
            norm_err = norm_err.max((psi.iter().map(|a| a.norm_sqr()).sum::<f64>() - 1.0).abs());
            if let Some(s) = s.as_mut() {
                s[k] = s_fraction_of(psi, &weights);
            }
            if metrics.entanglement {
                kept.push(psi.to_vec());
            }
        });
    }
    let ee_raw: Option<Vec<f64>> = metrics.entanglement.then(|| kept.par_iter().map(|psi| bip.entropy(psi)).collect());
    let ln_da = (bip.d_a() as f64).ln();
    let ee_normalized = ee_raw.as_ref().map(|v| v.iter().map(|x| if ln_da > 0.0 { x / ln_da } else { 0.0 }).collect());
    Ok(ObservableSeries {
        times_natural: times.clone(),
        times_us: times.iter().map(|t| au_time_to_us(t * t_unit_au)).collect(),
        fidelity,
        s_over_saturation: s.as_ref().map(|v| v.iter().map(|x| x / saturation).collect()),
        s_fraction: s,
        ee_raw,
        ee_normalized,
        max_norm_error: norm_err,
        saturation,
        t_heisenberg_natural: t_h,
        t_unit_au,
        d_a: bip.d_a(),
        d_b: bip.d_b(),
    })
}

/// Σ_i |c_i|² ⟨ψ_i|n_s/n|ψ_i⟩, the infinite-time average of the s fraction.
pub fn diagonal_ensemble_s_fraction(eig: &EigenSystem, c: &[f64], basis: &SectorBasis) -> f64 {
    let n = basis.n_atoms() as f64;
    (0..eig.dim())
        .map(|i| {
            let v = eig.eigenvector(i);
            let ns: f64 = basis.states().iter().zip(v).map(|(s, a)| a * a * s.s_count() as f64 / n).sum();
            c[i] * c[i] * ns
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{enumerate_sector, InteractionOrder, MemoryBudget};
    use crate::coupling::{natural_time_unit_um, CouplingConstants};
    use crate::geometry::ChainGeometry;
    use crate::hamiltonian::assemble;
    use crate::spectral::{diagonalize, Parallelism};

    fn system(n: usize, order: InteractionOrder, d: f64) -> (SectorBasis, EigenSystem, f64) {
        let basis = enumerate_sector(n, order, MemoryBudget::default()).unwrap();
        let c = CouplingConstants::default();
        let g = ChainGeometry::ordered(n, d).unwrap();
        let h = assemble(&basis, &g, &c, MemoryBudget::default()).unwrap();
        let eig = diagonalize(&h, Parallelism::Sequential).unwrap().with_initial_state(0).unwrap();
        (basis, eig, natural_time_unit_um(order, d, &c).unwrap())
    }

    #[test]
    fn grid() {
        let g = log_time_grid(1e-2, 1e2, 401, true).unwrap();
        assert_eq!(g.len(), 402);
        assert_eq!((g[0], g[1], g[401]), (0.0, 1e-2, 1e2));
        assert!((g[101] - 1e-1).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(log_time_grid(1.0, 1.0, 5, false).is_err());
    }

    #[test]
    fn two_level_fidelity() {
        let c = [0.5f64.sqrt(), 0.5f64.sqrt()];
        let omega = 1.7;
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 0.13).collect();
        let f = fidelity_series(&c, &[-omega, omega], &times);
        for (t, f) in times.iter().zip(f) {
            assert!((f - (omega * t).cos().powi(2)).abs() < 1e-14);
        }
    }

    #[test]
    fn quench_spec_validation() {
        let basis = enumerate_sector(4, InteractionOrder::Two, MemoryBudget::default()).unwrap();
        let good: SectorState = "ss'pp".parse().unwrap();
        assert!(QuenchSpec::new(&basis, good, vec![0.0, 1.0], 2).is_ok());
        let short: SectorState = "ss'p".parse().unwrap();
        assert!(QuenchSpec::new(&basis, short, vec![0.0, 1.0], 2).is_err());
        let bad: SectorState = "sspp".parse().unwrap();
        assert!(matches!(QuenchSpec::new(&basis, bad, vec![0.0], 2), Err(Error::Membership(_))));
        let p = SectorState::all_p(4).unwrap();
        assert!(QuenchSpec::new(&basis, p, vec![1.0, 0.5], 2).is_err());
        assert!(QuenchSpec::new(&basis, p, vec![-1.0], 2).is_err());
        assert!(QuenchSpec::new(&basis, p, vec![0.0], 0).is_err());
        assert!(QuenchSpec::new(&basis, p, vec![0.0], 4).is_err());
    }

    #[test]
    fn bell_pair_entropy() {
        let basis = enumerate_sector(2, InteractionOrder::Two, MemoryBudget::default()).unwrap();
        let bip = Bipartition::new(&basis, 1).unwrap();
        let h = Complex64::new(0.5f64.sqrt(), 0.0);
        let psi = [Complex64::new(0.0, 0.0), h, h];
        assert!((bip.entropy(&psi) - 2f64.ln()).abs() < 1e-14);
        let product = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)];
        assert!(bip.entropy(&product).abs() < 1e-14);
    }

    #[test]
    fn batch_matches_single_state_and_invariants() {
        let (basis, eig, tu) = system(6, InteractionOrder::Two, 20.0);
        let q = QuenchSpec::all_p(&basis, log_time_grid(1e-2, 1e2, 100, true).unwrap()).unwrap();
        let obs = observe(&basis, &eig, &q, tu, Metrics::default()).unwrap();
        assert!((obs.fidelity[0] - 1.0).abs() < 1e-12);
        assert!(obs.max_norm_error < 1e-10);
        let c = initial_overlaps(&eig, &basis, &q).unwrap();
        let e = natural_energies(&eig, tu);
        let s = obs.s_fraction.as_ref().unwrap();
        let ee = obs.ee_raw.as_ref().unwrap();
        let bip = Bipartition::new(&basis, q.cut).unwrap();
        let bound = (obs.d_a.min(obs.d_b) as f64).ln();
        for (k, &t) in q.times.iter().enumerate().step_by(17) {
            let psi = evolve_state(&eig, &c, &e, t);
            assert!((psi[0].norm_sqr() - obs.fidelity[k]).abs() < 1e-12);
            assert!((bip.entropy(&psi) - ee[k]).abs() < 1e-12);
            assert!(ee[k] >= 0.0 && ee[k] <= bound + 1e-12);
            assert!((0.0..=1.0).contains(&s[k]));
        }
        assert!(s[0].abs() < 1e-14);
        assert!(ee[0].abs() < 1e-12);
    }

    #[test]
    fn long_time_averages_match_diagonal_ensemble() {
        let (basis, eig, tu) = system(6, InteractionOrder::Three, 11.0);
        let q = QuenchSpec::all_p(&basis, vec![0.0]).unwrap();
        let c = initial_overlaps(&eig, &basis, &q).unwrap();
        let e = natural_energies(&eig, tu);
        let ipr: f64 = c.iter().map(|x| x.powi(4)).sum();
        let times: Vec<f64> = (0..20000).map(|k| (k as f64 + 0.5) * 0.5).collect();
        let f = fidelity_series(&c, &e, &times);
        let mean_f = f.iter().sum::<f64>() / f.len() as f64;
        let lo = e.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        assert!(lo > 1e-6, "spectrum has near-degeneracies");
        assert!((mean_f - ipr).abs() < 0.02 * ipr.max(0.05), "{mean_f} vs {ipr}");
        let s = s_fraction_series(&eig, &c, &e, &basis, &times);
        let mean_s = s.iter().sum::<f64>() / s.len() as f64;
        let de = diagonal_ensemble_s_fraction(&eig, &c, &basis);
        assert!((mean_s - de).abs() < 0.01 * de, "{mean_s} vs {de}");
    }
}
