use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self, ComputeEigenvectors};
use faer::{Mat, Par};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::SectorHamiltonian;

/// Overlaps at or below this are treated as exact zeros from symmetry.
pub const OVERLAP_FLOOR: f64 = 1e-12;

/// Threading inside one eigendecomposition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Parallelism {
    #[default]
    Sequential,
    Threads(usize),
}

impl Parallelism {
    fn to_faer(self) -> Par {
        match self {
            Parallelism::Sequential | Parallelism::Threads(0 | 1) => Par::Seq,
            Parallelism::Threads(n) => Par::rayon(n),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenSystem {
    dim: usize,
    eigenvalues: Vec<f64>,
    /// Eigenvector i occupies `vectors[i * dim..(i + 1) * dim]`.
    vectors: Vec<f64>,
    initial_index: Option<usize>,
    overlaps: Vec<f64>,
}

/// Eigenpairs of a row-major symmetric matrix, ascending, sign-fixed.
pub fn symmetric_eigen(dim: usize, data: &[f64], par: Parallelism) -> Result<(Vec<f64>, Vec<f64>)> {
    if data.len() != dim * dim {
        return Err(Error::Domain(format!("expected {} entries, got {}", dim * dim, data.len())));
    }
    if dim == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(Error::Solver(format!("matrix of dimension {dim} has non-finite entries")));
    }
    // Power-of-two normalization keeps entries exact and the solver away from tiny magnitudes.
    let peak = data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let scale = if peak > 0.0 { 2f64.powi(-(peak.log2().ceil() as i32)) } else { 1.0 };
    let a = Mat::<f64>::from_fn(dim, dim, |i, j| data[i * dim + j] * scale);
    let mut u = Mat::<f64>::zeros(dim, dim);
    let mut s = faer::diag::Diag::<f64>::zeros(dim);
    let fpar = par.to_faer();
    let mut mem = MemBuffer::new(evd::self_adjoint_evd_scratch::<f64>(
        dim,
        ComputeEigenvectors::Yes,
        fpar,
        Default::default(),
    ));
    evd::self_adjoint_evd(
        a.as_ref(),
        s.as_mut(),
        Some(u.as_mut()),
        fpar,
        MemStack::new(&mut mem),
        Default::default(),
    )
    .map_err(|e| Error::Solver(format!("eigensolver failed on dimension {dim}: {e:?}")))?;

    let values: Vec<f64> = s.column_vector().iter().map(|x| x / scale).collect();
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::Solver(format!("non-finite eigenvalue for dimension {dim}")));
    }
    let mut vectors = Vec::with_capacity(dim * dim);
    for j in 0..dim {
        let col = u.col(j);
        let mut pivot = 0.0f64;
        for i in 0..dim {
            if col[i].abs() > pivot.abs() {
                pivot = col[i];
            }
        }
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        vectors.extend((0..dim).map(|i| sign * col[i]));
    }
    Ok((values, vectors))
}

/// Full eigendecomposition of an exactly symmetric sector Hamiltonian.
pub fn diagonalize(h: &SectorHamiltonian, par: Parallelism) -> Result<EigenSystem> {
    if !h.is_exactly_symmetric() {
        return Err(Error::Solver(format!(
            "Hamiltonian (dimension {}, order {}) is not exactly symmetric",
            h.dim(),
            h.order()
        )));
    }
    let (eigenvalues, vectors) = symmetric_eigen(h.dim(), h.as_slice(), par).map_err(|e| match e {
        Error::Solver(m) => Error::Solver(format!(
            "{m}; order {}, positions_um {:?}",
            h.order(),
            h.positions_um()
        )),
        other => other,
    })?;
    Ok(EigenSystem {
        dim: h.dim(),
        eigenvalues,
        vectors,
        initial_index: None,
        overlaps: Vec::new(),
    })
}

impl EigenSystem {
    pub fn from_parts(eigenvalues: Vec<f64>, vectors: Vec<f64>) -> Result<Self> {
        let dim = eigenvalues.len();
        if vectors.len() != dim * dim {
            return Err(Error::Domain("eigenvector storage does not match dimension".into()));
        }
        Ok(Self { dim, eigenvalues, vectors, initial_index: None, overlaps: Vec::new() })
    }

    /// Records overlaps |⟨ψ_i|b⟩|² with basis state `index`.
    pub fn with_initial_state(mut self, index: usize) -> Result<Self> {
        if index >= self.dim {
            return Err(Error::Membership(format!("initial index {index} outside dimension {}", self.dim)));
        }
        self.overlaps = (0..self.dim).map(|i| self.component(i, index).powi(2)).collect();
        self.initial_index = Some(index);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvector(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn component(&self, i: usize, basis_index: usize) -> f64 {
        self.vectors[i * self.dim + basis_index]
    }

    pub fn initial_index(&self) -> Option<usize> {
        self.initial_index
    }

    /// Empty until [`with_initial_state`](Self::with_initial_state).
    pub fn overlaps(&self) -> &[f64] {
        &self.overlaps
    }

    pub fn overlap_sum(&self) -> f64 {
        self.overlaps.iter().sum()
    }

    /// ‖H v_i − E_i v_i‖₂.
    pub fn residual_norm(&self, h: &SectorHamiltonian, i: usize) -> f64 {
        let v = self.eigenvector(i);
        let hv = h.apply(v);
        hv.iter()
            .zip(v)
            .map(|(a, b)| (a - self.eigenvalues[i] * b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// max |(VᵀV − I)_ij|.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..=i {
                let dot: f64 = self.eigenvector(i).iter().zip(self.eigenvector(j)).map(|(a, b)| a * b).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - want).abs());
            }
        }
        worst
    }

    /// ‖V diag(E) Vᵀ − H‖_F.
    pub fn reconstruction_error(&self, h: &SectorHamiltonian) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for a in 0..d {
            for b in 0..d {
                let v: f64 = (0..d).map(|i| self.eigenvalues[i] * self.component(i, a) * self.component(i, b)).sum();
                acc += (v - h.get(a, b)).powi(2);
            }
        }
        acc.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSpacingStats {
    pub mean_r: f64,
    /// Number of ratios averaged.
    pub count: usize,
    pub trim_fraction: f64,
    /// Ratios with both gaps zero, assigned r = 1.
    pub degenerate_pairs: usize,
    /// Ratios with exactly one zero gap, assigned r = 0.
    pub single_zero_gaps: usize,
    /// Counts over equal bins of [0, 1].
    pub histogram: Vec<usize>,
}

pub fn level_spacing_ratio(eigenvalues: &[f64], trim_fraction: f64, bins: usize) -> Result<LevelSpacingStats> {
    if !(0.0..0.5).contains(&trim_fraction) {
        return Err(Error::Domain(format!("trim fraction must lie in [0, 0.5), got {trim_fraction}")));
    }
    if bins == 0 {
        return Err(Error::Domain("histogram needs at least one bin".into()));
    }
    let mut e = eigenvalues.to_vec();
    e.sort_by(f64::total_cmp);
    let cut = (trim_fraction * e.len() as f64).floor() as usize;
    if e.len() < 2 * cut + 3 {
        return Err(Error::Domain(format!(
            "{} levels leave fewer than 3 after trimming {cut} per edge",
            e.len()
        )));
    }
    let span = e[e.len() - 1] - e[0];
    let tol = 1e-12 * span;
    let kept = &e[cut..e.len() - cut];
    let gaps: Vec<f64> = kept.windows(2).map(|w| w[1] - w[0]).collect();

    let mut stats = LevelSpacingStats {
        mean_r: 0.0,
        count: 0,
        trim_fraction,
        degenerate_pairs: 0,
        single_zero_gaps: 0,
        histogram: vec![0; bins],
    };
    let mut sum = 0.0;
    for g in gaps.windows(2) {
        let (z0, z1) = (g[0] <= tol, g[1] <= tol);
        let r = match (z0, z1) {
            (true, true) => {
                stats.degenerate_pairs += 1;
                1.0
            }
            (true, false) | (false, true) => {
                stats.single_zero_gaps += 1;
                0.0
            }
            _ => g[0].min(g[1]) / g[0].max(g[1]),
        };
        sum += r;
        stats.count += 1;
        stats.histogram[((r * bins as f64) as usize).min(bins - 1)] += 1;
    }
    stats.mean_r = sum / stats.count as f64;
    Ok(stats)
}

/// 2π / mean level spacing, in inverse units of the eigenvalues; infinite if fully degenerate.
pub fn heisenberg_time(eigenvalues: &[f64]) -> Result<f64> {
    if eigenvalues.len() < 2 {
        return Err(Error::Domain("Heisenberg time needs at least 2 eigenvalues".into()));
    }
    let lo = eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    if span <= 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(2.0 * std::f64::consts::PI * (eigenvalues.len() - 1) as f64 / span)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ldos {
    /// n_bins + 1 edges spanning [E_min, E_max].
    pub edges: Vec<f64>,
    /// Overlap mass per bin.
    pub weights: Vec<f64>,
    /// (E_i, overlap_i) per eigenstate.
    pub scatter: Vec<(f64, f64)>,
}

impl Ldos {
    pub fn n_bins(&self) -> usize {
        self.weights.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.edges[self.n_bins()] - self.edges[0]) / self.n_bins() as f64
    }

    pub fn bin_of(&self, energy: f64) -> usize {
        bin_index(self.edges[0], self.bin_width(), self.n_bins(), energy)
    }

    pub fn centers(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Re-bins the scatter list with this histogram's edges.
    pub fn rebin_scatter(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n_bins()];
        for &(e, p) in &self.scatter {
            w[self.bin_of(e)] += p;
        }
        w
    }
}

fn bin_index(lo: f64, width: f64, n_bins: usize, x: f64) -> usize {
    if width <= 0.0 {
        return 0;
    }
    (((x - lo) / width).floor().max(0.0) as usize).min(n_bins - 1)
}

pub fn ldos(eig: &EigenSystem, n_bins: usize) -> Result<Ldos> {
    if n_bins < 2 {
        return Err(Error::Domain(format!("LDOS needs at least 2 bins, got {n_bins}")));
    }
    if eig.initial_index().is_none() {
        return Err(Error::Domain("LDOS needs overlaps with an initial state".into()));
    }
    let e = eig.eigenvalues();
    let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / n_bins as f64;
    let edges: Vec<f64> = (0..=n_bins).map(|k| if k == n_bins { hi } else { lo + k as f64 * width }).collect();
    let scatter: Vec<(f64, f64)> = e.iter().copied().zip(eig.overlaps().iter().copied()).collect();
    let mut out = Ldos { edges, weights: vec![0.0; n_bins], scatter };
    out.weights = out.rebin_scatter();
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    /// Peak density, in overlap per unit energy.
    pub amplitude: f64,
    pub mean: f64,
    pub width: f64,
    pub r_squared: f64,
    /// Width pinned at the resolution floor.
    pub at_resolution_floor: bool,
    /// Poor Gaussian description (R² < 0.5).
    pub sparse: bool,
}

/// Least-squares Gaussian to the LDOS density at bin centers.
///
/// Widths are floored at the σ whose FWHM spans three bins: narrower peaks are
/// not resolved by the histogram.
pub fn gaussian_fit(l: &Ldos) -> Result<GaussianFit> {
    let nonempty = l.weights.iter().filter(|&&w| w > 0.0).count();
    if nonempty < 5 {
        return Err(Error::Domain(format!("Gaussian fit needs at least 5 nonempty bins, got {nonempty}")));
    }
    let dx = l.bin_width();
    if !(dx > 0.0) {
        return Err(Error::Domain("Gaussian fit needs a nondegenerate energy range".into()));
    }
    let x = l.centers();
    let y: Vec<f64> = l.weights.iter().map(|w| w / dx).collect();
    let s_min = 3.0 * dx / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());

    let mass: f64 = l.weights.iter().sum();
    let m0 = l.weights.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() / mass;
    let v0 = l.weights.iter().zip(&x).map(|(w, x)| w * (x - m0).powi(2)).sum::<f64>() / mass;
    let s0 = v0.sqrt().max(s_min);
    let peak = (0..y.len()).max_by(|&a, &b| y[a].total_cmp(&y[b])).unwrap();

    let starts = [
        [mass / (s0 * (2.0 * std::f64::consts::PI).sqrt()), m0, s0],
        [y[peak], x[peak], 2.0 * s_min],
    ];
    let mut best: Option<([f64; 3], f64)> = None;
    for p0 in starts {
        let (p, ssr) = levenberg_marquardt(&x, &y, p0, s_min);
        if best.map_or(true, |(_, b)| ssr < b) {
            best = Some((p, ssr));
        }
    }
    let ([a, m, s], ssr) = best.unwrap();
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
    let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else { 0.0 };
    Ok(GaussianFit {
        amplitude: a,
        mean: m,
        width: s,
        r_squared,
        at_resolution_floor: s <= s_min * (1.0 + 1e-9),
        sparse: r_squared < 0.5,
    })
}

fn gauss(p: &[f64; 3], x: f64) -> f64 {
    p[0] * (-(x - p[1]).powi(2) / (2.0 * p[2] * p[2])).exp()
}

fn ssr_of(x: &[f64], y: &[f64], p: &[f64; 3]) -> f64 {
    x.iter().zip(y).map(|(&x, &y)| (y - gauss(p, x)).powi(2)).sum()
}

/// Projected LM on (amplitude, mean, width) with width ≥ `s_min`.
fn levenberg_marquardt(x: &[f64], y: &[f64], mut p: [f64; 3], s_min: f64) -> ([f64; 3], f64) {
    p[2] = p[2].max(s_min);
    let mut ssr = ssr_of(x, y, &p);
    let mut lambda = 1e-3;
    for _ in 0..500 {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (&xi, &yi) in x.iter().zip(y) {
            let e = (-(xi - p[1]).powi(2) / (2.0 * p[2] * p[2])).exp();
            let g = p[0] * e;
            let d = xi - p[1];
            let j = [e, g * d / (p[2] * p[2]), g * d * d / p[2].powi(3)];
            let r = yi - g;
            for a in 0..3 {
                jtr[a] += j[a] * r;
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let mut improved = false;
        while lambda < 1e12 {
            let mut m = jtj;
            for a in 0..3 {
                m[a][a] += lambda * jtj[a][a].max(1e-300);
            }
            let Some(step) = solve3(m, jtr) else {
                lambda *= 10.0;
                continue;
            };
            let mut q = [p[0] + step[0], p[1] + step[1], (p[2] + step[2]).max(s_min)];
            q[0] = q[0].max(0.0);
            let s = ssr_of(x, y, &q);
            if s < ssr {
                let rel = (ssr - s) / ssr.max(1e-300);
                p = q;
                ssr = s;
                lambda = (lambda / 10.0).max(1e-12);
                improved = rel > 1e-14;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    (p, ssr)
}

fn solve3(m: [[f64; 3]; 3], b: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if !(d.abs() > 0.0) || !d.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for c in 0..3 {
        let mut mc = m;
        for r in 0..3 {
            mc[r][c] = b[r];
        }
        out[c] = det(&mc) / d;
    }
    out.iter().all(|v| v.is_finite()).then_some(out)
}

/// Eigenstates whose overlap exceeds `threshold` × the median overlap within an
/// energy window of width `window_width` centered on them (default span/50).
/// Overlaps at or below [`OVERLAP_FLOOR`] are ignored.
pub fn detect_scar_candidates(eig: &EigenSystem, window_width: Option<f64>, threshold: f64) -> Vec<usize> {
    let e = eig.eigenvalues();
    let p = eig.overlaps();
    if p.is_empty() || e.len() < 2 {
        return Vec::new();
    }
    let span = e[e.len() - 1] - e[0];
    let half = 0.5 * window_width.unwrap_or(span / 50.0);
    let mut out = Vec::new();
    let (mut lo, mut hi) = (0usize, 0usize);
    let mut window = Vec::new();
    for i in 0..e.len() {
        while e[lo] < e[i] - half {
            lo += 1;
        }
        while hi < e.len() && e[hi] <= e[i] + half {
            hi += 1;
        }
        if p[i] <= OVERLAP_FLOOR {
            continue;
        }
        window.clear();
        window.extend(p[lo..hi].iter().copied().filter(|&v| v > OVERLAP_FLOOR));
        window.sort_by(f64::total_cmp);
        let k = window.len();
        let median = if k % 2 == 1 { window[k / 2] } else { 0.5 * (window[k / 2 - 1] + window[k / 2]) };
        if p[i] > threshold * median {
            out.push(i);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::InteractionOrder;
    use crate::coupling::CouplingConstants;

    fn matrix(dim: usize, data: Vec<f64>) -> SectorHamiltonian {
        SectorHamiltonian::from_dense(dim, InteractionOrder::Two, data, vec![], CouplingConstants::unit()).unwrap()
    }

    #[test]
    fn two_by_two() {
        let h = matrix(2, vec![0.0, 0.7, 0.7, 0.0]);
        let e = diagonalize(&h, Parallelism::Sequential).unwrap();
        assert!((e.eigenvalues()[0] + 0.7).abs() < 1e-15 && (e.eigenvalues()[1] - 0.7).abs() < 1e-15);
        assert!(e.orthonormality_error() < 1e-14);
    }

    #[test]
    fn three_by_three_and_overlaps() {
        let h = matrix(3, vec![0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0]);
        let e = diagonalize(&h, Parallelism::Sequential).unwrap().with_initial_state(0).unwrap();
        let want = [-1.0, -1.0, 2.0];
        for (a, b) in e.eigenvalues().iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((e.overlap_sum() - 1.0).abs() < 1e-14);
        assert!((e.overlaps()[2] - 1.0 / 3.0).abs() < 1e-14);
        for i in 0..3 {
            assert!(e.residual_norm(&h, i) < 1e-14);
            let v = e.eigenvector(i);
            let big = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(big > 0.0);
        }
        assert!(e.reconstruction_error(&h) < 1e-14);
    }

    #[test]
    fn tiny_scale_residuals() {
        let d = 120;
        let mut data = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..a {
                let v = 1e-12 * (((a * 31 + b * 17) % 23) as f64 - 11.0) / ((a - b) as f64).powi(3);
                data[a * d + b] = v;
                data[b * d + a] = v;
            }
        }
        let h = matrix(d, data);
        let e = diagonalize(&h, Parallelism::Sequential).unwrap();
        let norm = h.frobenius_norm();
        for i in 0..d {
            assert!(e.residual_norm(&h, i) <= 1e-13 * norm);
        }
    }

    #[test]
    fn asymmetric_rejected() {
        let h = matrix(2, vec![0.0, 1.0, 1.0 + 1e-15, 0.0]);
        assert!(matches!(diagonalize(&h, Parallelism::Sequential), Err(Error::Solver(_))));
    }

    #[test]
    fn spacing_ratio_rules() {
        let ladder: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let s = level_spacing_ratio(&ladder, 0.1, 10).unwrap();
        assert_eq!(s.mean_r, 1.0);
        assert_eq!(s.histogram[9], s.count);
        let affine: Vec<f64> = ladder.iter().map(|x| 3.5 * x * x - 2.0).collect();
        let base: Vec<f64> = ladder.iter().map(|x| x * x).collect();
        let (a, b) = (level_spacing_ratio(&affine, 0.1, 10).unwrap(), level_spacing_ratio(&base, 0.1, 10).unwrap());
        assert!((a.mean_r - b.mean_r).abs() < 1e-12);

        let degenerate = [0.0, 1.0, 1.0, 1.0, 2.0];
        let s = level_spacing_ratio(&degenerate, 0.0, 4).unwrap();
        assert_eq!((s.degenerate_pairs, s.single_zero_gaps, s.count), (1, 2, 3));
        assert!((s.mean_r - 1.0 / 3.0).abs() < 1e-15);
        assert!(level_spacing_ratio(&[0.0, 1.0], 0.0, 4).is_err());
        assert!(level_spacing_ratio(&ladder[..5], 0.4, 4).is_err());
    }

    #[test]
    fn heisenberg() {
        let e: Vec<f64> = (0..=10).map(|i| i as f64).collect();
        assert!((heisenberg_time(&e).unwrap() - 2.0 * std::f64::consts::PI).abs() < 1e-14);
        let scaled: Vec<f64> = e.iter().map(|x| 4.0 * x).collect();
        assert!((heisenberg_time(&scaled).unwrap() * 4.0 - 2.0 * std::f64::consts::PI).abs() < 1e-14);
        assert_eq!(heisenberg_time(&[1.0, 1.0]).unwrap(), f64::INFINITY);
        assert!(heisenberg_time(&[1.0]).is_err());
    }

    fn synthetic(energies: Vec<f64>, overlaps: Vec<f64>) -> EigenSystem {
        let d = energies.len();
        let mut vectors = vec![0.0; d * d];
        for i in 0..d {
            vectors[i * d + i] = 1.0;
        }
        let mut e = EigenSystem::from_parts(energies, vectors).unwrap().with_initial_state(0).unwrap();
        e.overlaps = overlaps;
        e
    }

    #[test]
    fn ldos_mass_and_rebinning() {
        let e = synthetic(vec![-1.0, 0.0, 0.5, 2.0], vec![0.0, 0.0, 1.0, 0.0]);
        let l = ldos(&e, 4).unwrap();
        assert_eq!(l.weights.iter().filter(|&&w| w == 1.0).count(), 1);
        assert_eq!(l.rebin_scatter(), l.weights);
        assert!(ldos(&e, 1).is_err());
    }

    fn histogram(lo: f64, hi: f64, weights: Vec<f64>) -> Ldos {
        let n = weights.len();
        let edges = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
        Ldos { edges, weights, scatter: Vec::new() }
    }

    #[test]
    fn gaussian_recovery_and_sparse_flag() {
        let (mu, sigma, n) = (0.7, 2.3, 60);
        let dx = 20.0 / n as f64;
        let w: Vec<f64> = (0..n)
            .map(|k| {
                let x = -10.0 + (k as f64 + 0.5) * dx;
                dx * (-(x - mu) * (x - mu) / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
            })
            .collect();
        let fit = gaussian_fit(&histogram(-10.0, 10.0, w)).unwrap();
        assert!((fit.mean - mu).abs() < 0.01 * mu);
        assert!((fit.width - sigma).abs() < 0.01 * sigma);
        assert!(fit.r_squared > 0.999 && !fit.sparse);

        let mut spike = vec![1e-4 / (n - 1) as f64; n];
        spike[30] = 1.0 - 1e-4;
        let fit = gaussian_fit(&histogram(-10.0, 10.0, spike)).unwrap();
        assert!(fit.r_squared < 0.5 && fit.sparse && fit.at_resolution_floor, "{fit:?}");
    }

    #[test]
    fn gaussian_fit_needs_support() {
        let e = synthetic(vec![0.0, 1.0, 2.0, 3.0], vec![0.25; 4]);
        assert!(gaussian_fit(&ldos(&e, 4).unwrap()).is_err());
    }

    #[test]
    fn scars() {
        let energies: Vec<f64> = (0..500).map(|i| i as f64).collect();
        let flat = synthetic(energies.clone(), vec![1.0 / 500.0; 500]);
        assert!(detect_scar_candidates(&flat, None, 100.0).is_empty());
        let mut p = vec![1e-5; 500];
        p[250] = 1.0 - 499.0 * 1e-5;
        let spiky = synthetic(energies, p);
        assert_eq!(detect_scar_candidates(&spiky, None, 100.0), vec![250]);
    }
}
