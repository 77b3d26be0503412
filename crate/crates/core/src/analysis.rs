//! Decay fits, phase classification, entanglement growth laws and the α scan.
//!
//! All times are in natural units.

use serde::{Deserialize, Serialize};

use crate::basis::{enumerate_sector, InteractionOrder, MemoryBudget};
use crate::coupling::{natural_time_unit_um, CouplingConstants};
use crate::error::{Error, Result};
use crate::geometry::ChainGeometry;
use crate::hamiltonian::assemble;
use crate::spectral::{diagonalize, Parallelism};

/// F below this marks departure from the initial state.
pub const DEPARTURE_FIDELITY: f64 = 0.9;
/// Half-width, in decades, of the local log-log slope window.
pub const SLOPE_HALF_WINDOW_DECADES: f64 = 0.25;
/// Largest slope drift allowed over the stability span.
pub const SLOPE_TOLERANCE: f64 = 0.2;
/// F̄ ceiling beyond 5 t_c for the rapid-collapse short-circuit.
pub const RAPID_COLLAPSE_CEILING: f64 = 0.02;
pub const MIN_FIT_POINTS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollapseMethod {
    SlopeStabilized,
    FidelityThreshold,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum Collapse {
    At { time: f64, method: CollapseMethod },
    /// F never left 1.
    NotApplicable,
    /// F departed but neither criterion fired.
    Undetermined,
}

impl Collapse {
    pub fn time(&self) -> Option<f64> {
        match self {
            Collapse::At { time, .. } => Some(*time),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Delocalized,
    Intermediate,
    Nonergodic,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Delocalized => "delocalized",
            Phase::Intermediate => "intermediate",
            Phase::Nonergodic => "nonergodic",
        }
    }
}

/// γ ≥ 2 or rapid collapse: delocalized; 1 ≤ γ < 2: intermediate; otherwise nonergodic.
pub fn classify(gamma: Option<f64>, rapid_collapse: bool) -> Phase {
    if rapid_collapse {
        return Phase::Delocalized;
    }
    match gamma {
        Some(g) if g >= 2.0 => Phase::Delocalized,
        Some(g) if g >= 1.0 => Phase::Intermediate,
        _ => Phase::Nonergodic,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    pub points: usize,
}

fn line_fit(x: &[f64], y: &[f64]) -> LineFit {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    LineFit { slope, intercept, residual: (rss / n).sqrt(), points: x.len() }
}

/// Slope of ln F against ln t over ±[`SLOPE_HALF_WINDOW_DECADES`] around each point.
pub fn local_log_slopes(times: &[f64], f: &[f64]) -> Vec<Option<f64>> {
    let half = SLOPE_HALF_WINDOW_DECADES * std::f64::consts::LN_10;
    let lt: Vec<f64> = times.iter().map(|t| if *t > 0.0 { t.ln() } else { f64::NEG_INFINITY }).collect();
    (0..times.len())
        .map(|k| {
            if times[k] <= 0.0 {
                return None;
            }
            let idx: Vec<usize> = (0..times.len()).filter(|&j| times[j] > 0.0 && (lt[j] - lt[k]).abs() <= half).collect();
            if idx.len() < 3 || idx.iter().any(|&j| f[j] <= 0.0) {
                return None;
            }
            let x: Vec<f64> = idx.iter().map(|&j| lt[j]).collect();
            let y: Vec<f64> = idx.iter().map(|&j| f[j].ln()).collect();
            Some(line_fit(&x, &y).slope)
        })
        .collect()
}

/// End of the initial collapse: the earliest time after departure from F ≈ 1 at
/// which the local log-log slope stays within [`SLOPE_TOLERANCE`] for half a
/// decade, searched no later than the first local minimum of F; otherwise the
/// first time F < e⁻².
pub fn detect_collapse(times: &[f64], f: &[f64]) -> Collapse {
    let Some(depart) = f.iter().position(|&v| v < DEPARTURE_FIDELITY) else {
        return Collapse::NotApplicable;
    };
    let first_min = (depart.max(1)..times.len().saturating_sub(1)).find(|&k| f[k] < f[k - 1] && f[k] <= f[k + 1]);
    let slopes = local_log_slopes(times, f);
    let t_max = times[times.len() - 1];
    let span = 10f64.sqrt();
    for k in depart..times.len() {
        if first_min.is_some_and(|m| k > m) {
            break;
        }
        let (tk, Some(sk)) = (times[k], slopes[k]) else { continue };
        if tk <= 0.0 || tk * span > t_max {
            continue;
        }
        let stable = (k..times.len())
            .take_while(|&j| times[j] <= tk * span)
            .all(|j| matches!(slopes[j], Some(s) if (s - sk).abs() < SLOPE_TOLERANCE));
        if stable {
            return Collapse::At { time: tk, method: CollapseMethod::SlopeStabilized };
        }
    }
    let floor = (-2.0f64).exp();
    match f.iter().position(|&v| v < floor) {
        Some(k) => Collapse::At { time: times[k], method: CollapseMethod::FidelityThreshold },
        None => Collapse::Undetermined,
    }
}

/// F̄ < [`RAPID_COLLAPSE_CEILING`] at every one of at least [`MIN_FIT_POINTS`] times beyond 5 t_c.
pub fn is_rapid_collapse(times: &[f64], f: &[f64], collapse: &Collapse) -> bool {
    let Some(tc) = collapse.time() else { return false };
    let late: Vec<f64> = times.iter().zip(f).filter(|(t, _)| **t > 5.0 * tc).map(|(_, v)| *v).collect();
    late.len() >= MIN_FIT_POINTS && late.iter().all(|&v| v < RAPID_COLLAPSE_CEILING)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// −slope clamped at 0.
    pub gamma: f64,
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual of ln F.
    pub residual: f64,
    pub window: (f64, f64),
    pub points: usize,
    pub excluded_nonpositive: usize,
}

/// Least-squares line of ln F against ln t on `window`; nonpositive F values are excluded and counted.
pub fn fit_gamma(times: &[f64], f: &[f64], window: (f64, f64)) -> Result<PowerLawFit> {
    let (t0, t1) = window;
    if !(t0 < t1) {
        return Err(Error::Domain(format!("fit window [{t0}, {t1}] is empty")));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut excluded = 0;
    for (&t, &v) in times.iter().zip(f) {
        if t > 0.0 && t >= t0 && t <= t1 {
            if v > 0.0 {
                x.push(t.ln());
                y.push(v.ln());
            } else {
                excluded += 1;
            }
        }
    }
    if x.len() < MIN_FIT_POINTS {
        return Err(Error::WindowTooSmall { points: x.len(), required: MIN_FIT_POINTS });
    }
    let line = line_fit(&x, &y);
    Ok(PowerLawFit {
        gamma: (-line.slope).max(0.0),
        slope: line.slope,
        intercept: line.intercept,
        residual: line.residual,
        window,
        points: line.points,
        excluded_nonpositive: excluded,
    })
}

/// [3 t_c, min(t_H, t_max)], widened to start at t_c when that leaves too few
/// points, or starting at the first positive time without a usable t_c.
pub fn default_fit_window(times: &[f64], collapse: &Collapse, t_heisenberg: f64) -> Result<(f64, f64)> {
    let t_max = times.last().copied().ok_or_else(|| Error::Domain("empty time grid".into()))?;
    let cap = t_heisenberg.min(t_max);
    let first = times.iter().copied().find(|&t| t > 0.0).ok_or_else(|| Error::Domain("no positive times".into()))?;
    let count = |a: f64| times.iter().filter(|&&t| t > 0.0 && t >= a && t <= cap).count();
    let start = match collapse.time() {
        Some(tc) if tc < cap => {
            if count(3.0 * tc) >= MIN_FIT_POINTS {
                3.0 * tc
            } else {
                tc
            }
        }
        _ => first,
    };
    if !(start < cap) {
        return Err(Error::WindowTooSmall { points: count(start), required: MIN_FIT_POINTS });
    }
    Ok((start, cap))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub collapse: Collapse,
    pub rapid_collapse: bool,
    /// Absent for rapid collapse or when no window could be fitted.
    pub fit: Option<PowerLawFit>,
    pub fit_error: Option<String>,
    pub classification: Phase,
}

impl DecayFit {
    pub fn gamma(&self) -> Option<f64> {
        self.fit.map(|f| f.gamma)
    }
}

/// Collapse detection, rapid-collapse short-circuit, γ fit on the default window, classification.
pub fn analyze_decay(times: &[f64], f: &[f64], t_heisenberg: f64) -> DecayFit {
    let collapse = detect_collapse(times, f);
    let rapid = is_rapid_collapse(times, f, &collapse);
    let (fit, fit_error) = if rapid {
        (None, None)
    } else {
        match default_fit_window(times, &collapse, t_heisenberg).and_then(|w| fit_gamma(times, f, w)) {
            Ok(fit) => (Some(fit), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    DecayFit {
        collapse,
        rapid_collapse: rapid,
        classification: classify(fit.map(|x| x.gamma), rapid),
        fit,
        fit_error,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GrowthLabel {
    FasterThanLogarithmic,
    LogarithmicOrSlower,
}

impl GrowthLabel {
    pub fn label(self) -> &'static str {
        match self {
            GrowthLabel::FasterThanLogarithmic => "faster-than-logarithmic",
            GrowthLabel::LogarithmicOrSlower => "logarithmic-or-slower",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EeGrowthFit {
    pub label: GrowthLabel,
    pub window: (f64, f64),
    pub points: usize,
    /// S = log_a + log_b ln t.
    pub log_a: f64,
    pub log_b: f64,
    pub log_residual: f64,
    /// S = power_a t^power_p.
    pub power_a: f64,
    pub power_p: f64,
    pub power_residual: f64,
    pub margin: f64,
    /// S decreased somewhere in the window by more than 1% of its range.
    pub nonmonotone: bool,
}

pub const DEFAULT_GROWTH_MARGIN: f64 = 0.1;

/// Window from `start` to where S first reaches 75% of its maximum, at least 2 × start.
pub fn default_ee_window(times: &[f64], s: &[f64], start: f64) -> (f64, f64) {
    let t_max = times.last().copied().unwrap_or(start);
    let peak = s.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let reach = times
        .iter()
        .zip(s)
        .find(|(t, v)| **t >= start && **v >= 0.75 * peak)
        .map(|(t, _)| *t)
        .unwrap_or(t_max);
    (start, reach.max(2.0 * start).min(t_max))
}

/// Compares S = a + b ln t with S = a t^p on `window`; the power law wins when
/// p > 0 and its residual is at least `margin` lower.
pub fn fit_ee_growth(times: &[f64], s: &[f64], window: (f64, f64), margin: f64) -> Result<EeGrowthFit> {
    let (t0, t1) = window;
    let (t, y): (Vec<f64>, Vec<f64>) =
        times.iter().zip(s).filter(|(t, _)| **t > 0.0 && **t >= t0 && **t <= t1).map(|(a, b)| (*a, *b)).unzip();
    if t.len() < 5 {
        return Err(Error::WindowTooSmall { points: t.len(), required: 5 });
    }
    let lt: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let log = line_fit(&lt, &y);

    let positive: Vec<usize> = (0..t.len()).filter(|&k| y[k] > 0.0).collect();
    let (mut a, mut p) = if positive.len() >= 2 {
        let l = line_fit(
            &positive.iter().map(|&k| lt[k]).collect::<Vec<_>>(),
            &positive.iter().map(|&k| y[k].ln()).collect::<Vec<_>>(),
        );
        (l.intercept.exp(), l.slope)
    } else {
        (y.iter().sum::<f64>() / y.len() as f64, 0.0)
    };
    let rss = |a: f64, p: f64| -> f64 { t.iter().zip(&y).map(|(t, y)| (y - a * t.powf(p)).powi(2)).sum() };
    let mut cur = rss(a, p);
    let mut lambda = 1e-3;
    for _ in 0..200 {
        let (mut j11, mut j12, mut j22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (k, (&tk, &yk)) in t.iter().zip(&y).enumerate() {
            let tp = tk.powf(p);
            let r = yk - a * tp;
            let da = tp;
            let dp = a * tp * lt[k];
            j11 += da * da;
            j12 += da * dp;
            j22 += dp * dp;
            g1 += da * r;
            g2 += dp * r;
        }
        let mut moved = false;
        while lambda < 1e12 {
            let (m11, m22) = (j11 * (1.0 + lambda), j22 * (1.0 + lambda));
            let det = m11 * m22 - j12 * j12;
            if det.abs() > 0.0 && det.is_finite() {
                let (da, dp) = ((g1 * m22 - g2 * j12) / det, (m11 * g2 - j12 * g1) / det);
                let next = rss(a + da, p + dp);
                if next.is_finite() && next < cur {
                    let rel = (cur - next) / cur.max(1e-300);
                    a += da;
                    p += dp;
                    cur = next;
                    lambda = (lambda / 10.0).max(1e-12);
                    moved = rel > 1e-13;
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !moved {
            break;
        }
    }
    let power_residual = (cur / t.len() as f64).sqrt();
    let range = y.iter().copied().fold(f64::NEG_INFINITY, f64::max) - y.iter().copied().fold(f64::INFINITY, f64::min);
    let nonmonotone = y.windows(2).any(|w| w[1] < w[0] - 0.01 * range);
    let label = if p > 0.0 && power_residual <= (1.0 - margin) * log.residual {
        GrowthLabel::FasterThanLogarithmic
    } else {
        GrowthLabel::LogarithmicOrSlower
    };
    Ok(EeGrowthFit {
        label,
        window,
        points: t.len(),
        log_a: log.intercept,
        log_b: log.slope,
        log_residual: log.residual,
        power_a: a,
        power_p: p,
        power_residual,
        margin,
        nonmonotone,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaPoint {
    pub alpha: f64,
    /// Time-averaged survival probability over [0, horizon].
    pub mean_probability: f64,
}

/// ⟨P⟩ = (1/T)∫₀ᵀ F dt = Σ_ij p_i p_j sinc(ω_ij T), exactly.
pub fn time_averaged_fidelity(p: &[f64], energies: &[f64], horizon: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..p.len() {
        for j in 0..p.len() {
            let x = (energies[i] - energies[j]) * horizon;
            let sinc = if x.abs() < 1e-12 { 1.0 } else { x.sin() / x };
            acc += p[i] * p[j] * sinc;
        }
    }
    acc
}

/// Two-body ordered chain with α scaled, averaged over `horizon` natural units of each α.
pub fn alpha_scan(
    alphas: &[f64],
    n_atoms: usize,
    spacing_um: f64,
    constants: &CouplingConstants,
    horizon: f64,
) -> Result<Vec<AlphaPoint>> {
    let basis = enumerate_sector(n_atoms, InteractionOrder::Two, MemoryBudget::default())?;
    let geometry = ChainGeometry::ordered(n_atoms, spacing_um)?;
    alphas
        .iter()
        .map(|&alpha| {
            let c = CouplingConstants { alpha, ..*constants };
            let h = assemble(&basis, &geometry, &c, MemoryBudget::default())?;
            let eig = diagonalize(&h, Parallelism::Sequential)?.with_initial_state(0)?;
            let tu = natural_time_unit_um(InteractionOrder::Two, spacing_um, &c)?;
            let e: Vec<f64> = eig.eigenvalues().iter().map(|x| x * tu).collect();
            Ok(AlphaPoint { alpha, mean_probability: time_averaged_fidelity(eig.overlaps(), &e, horizon) })
        })
        .collect()
}
