//! Disorder-ensemble execution over a (spacing, disorder) grid.

use rayon::prelude::*;
use rydchain_core::analysis::{analyze_decay, default_ee_window, fit_ee_growth, DecayFit, EeGrowthFit};
use rydchain_core::basis::{enumerate_sector, SectorBasis};
use rydchain_core::coupling::natural_time_unit_um;
use rydchain_core::dynamics::{observe, QuenchSpec};
use rydchain_core::geometry::{sample_seed, ChainGeometry};
use rydchain_core::hamiltonian::assemble;
use rydchain_core::spectral::{diagonalize, level_spacing_ratio, Parallelism};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{AppError, AppResult};

const SPACING_RATIO_BINS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSeries {
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub index: usize,
    pub seed: u64,
    pub positions_um: Vec<f64>,
    pub mean_r: Option<f64>,
    pub t_heisenberg_natural: f64,
    pub max_norm_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub index: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub spacing_um: f64,
    pub disorder_w: f64,
    pub samples: usize,
    pub succeeded: usize,
    pub failures: Vec<SampleFailure>,
    pub t_unit_au: f64,
    pub times_natural: Vec<f64>,
    pub times_us: Vec<f64>,
    pub fidelity: MeanSeries,
    pub s_over_saturation: Option<MeanSeries>,
    pub ee_normalized: Option<MeanSeries>,
    pub ee_raw: Option<MeanSeries>,
    pub saturation: f64,
    pub d_a: usize,
    pub d_b: usize,
    pub mean_r: Option<f64>,
    pub mean_r_stderr: Option<f64>,
    pub t_heisenberg_natural: f64,
    pub max_norm_error: f64,
    pub decay: DecayFit,
    pub ee_growth: Option<EeGrowthFit>,
    pub ee_growth_error: Option<String>,
    pub sample_summaries: Vec<SampleSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub base_seed: u64,
    pub samples: usize,
    pub time_points: usize,
    pub code_version: String,
    pub sample_seeds: Vec<u64>,
}

impl Provenance {
    pub fn of(config: &RunConfig) -> Self {
        Self {
            config_hash: config.hash(),
            base_seed: config.base_seed,
            samples: config.samples,
            time_points: config.time_grid.points + usize::from(config.time_grid.include_zero),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            sample_seeds: seeds(config),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub spacing_um: f64,
    pub disorder_w: f64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub provenance: Provenance,
    pub cells: Vec<CellResult>,
    pub failures: Vec<CellFailure>,
}

/// Same seeds in every cell, so cells differ only through d and w.
pub fn seeds(config: &RunConfig) -> Vec<u64> {
    (0..config.samples as u64).map(|s| sample_seed(config.base_seed, s)).collect()
}

/// Mean and standard error with the first sample as shift, exact when all samples agree.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let x0 = xs[0];
    let m = x0 + xs.iter().map(|x| x - x0).sum::<f64>() / n as f64;
    if n == 1 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (m, (var / n as f64).sqrt())
}

fn pointwise(rows: &[&[f64]]) -> MeanSeries {
    let len = rows.first().map_or(0, |r| r.len());
    let mut col = vec![0.0; rows.len()];
    let (mut mean, mut stderr) = (Vec::with_capacity(len), Vec::with_capacity(len));
    for k in 0..len {
        for (c, r) in col.iter_mut().zip(rows) {
            *c = r[k];
        }
        let (m, e) = mean_stderr(&col);
        mean.push(m);
        stderr.push(e);
    }
    MeanSeries { mean, stderr }
}

struct SampleOutput {
    summary: SampleSummary,
    fidelity: Vec<f64>,
    s_over_saturation: Option<Vec<f64>>,
    ee_normalized: Option<Vec<f64>>,
    ee_raw: Option<Vec<f64>>,
    saturation: f64,
    d_a: usize,
    d_b: usize,
}

struct CellSetup<'a> {
    config: &'a RunConfig,
    basis: &'a SectorBasis,
    quench: QuenchSpec,
    spacing_um: f64,
    disorder_w: f64,
    t_unit_au: f64,
}

fn run_sample(cell: &CellSetup, index: usize, seed: u64) -> AppResult<SampleOutput> {
    let cfg = cell.config;
    let geometry = ChainGeometry::disordered(cfg.n_atoms, cell.spacing_um, cell.disorder_w, seed)?;
    let h = assemble(cell.basis, &geometry, &cfg.constants, cfg.memory_budget)?;
    let start = cell.basis.rank(&cell.quench.initial)?;
    let eig = diagonalize(&h, Parallelism::Sequential)?.with_initial_state(start)?;
    drop(h);
    let mean_r = level_spacing_ratio(eig.eigenvalues(), cfg.trim_fraction, SPACING_RATIO_BINS).ok().map(|s| s.mean_r);
    let series = observe(cell.basis, &eig, &cell.quench, cell.t_unit_au, cfg.metrics)?;
    Ok(SampleOutput {
        summary: SampleSummary {
            index,
            seed,
            positions_um: geometry.positions_um().to_vec(),
            mean_r,
            t_heisenberg_natural: series.t_heisenberg_natural,
            max_norm_error: series.max_norm_error,
        },
        fidelity: series.fidelity,
        s_over_saturation: series.s_over_saturation,
        ee_normalized: series.ee_normalized,
        ee_raw: series.ee_raw,
        saturation: series.saturation,
        d_a: series.d_a,
        d_b: series.d_b,
    })
}

fn pool(workers: usize) -> AppResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| AppError::Config(format!("cannot start {workers} worker threads: {e}")))
}

/// Runs every sample of one cell. Fails if more than 1% of samples fail.
pub fn run_cell(config: &RunConfig, basis: &SectorBasis, spacing_um: f64, disorder_w: f64) -> AppResult<CellResult> {
    let workers = config.effective_workers()?;
    pool(workers)?.install(|| run_cell_in_pool(config, basis, spacing_um, disorder_w))
}

fn run_cell_in_pool(config: &RunConfig, basis: &SectorBasis, spacing_um: f64, disorder_w: f64) -> AppResult<CellResult> {
    let times = config.time_grid.times()?;
    let quench = QuenchSpec::new(basis, config.initial_state()?, times.clone(), config.cut())?;
    let t_unit_au = natural_time_unit_um(config.order, spacing_um, &config.constants)?;
    let setup = CellSetup { config, basis, quench, spacing_um, disorder_w, t_unit_au };
    let seeds = seeds(config);
    let outcomes: Vec<AppResult<SampleOutput>> =
        seeds.par_iter().enumerate().map(|(i, &seed)| run_sample(&setup, i, seed)).collect();

    let mut ok = Vec::with_capacity(outcomes.len());
    let mut failures = Vec::new();
    for (i, r) in outcomes.into_iter().enumerate() {
        match r {
            Ok(s) => ok.push(s),
            Err(e) => failures.push(SampleFailure { index: i, seed: seeds[i], error: e.to_string() }),
        }
    }
    if ok.is_empty() || failures.len() * 100 > config.samples {
        return Err(AppError::CellFailed {
            spacing_um,
            disorder_w,
            failed: failures.len(),
            samples: config.samples,
            first: failures.first().map_or_else(String::new, |f| f.error.clone()),
        });
    }

    let fidelity = pointwise(&ok.iter().map(|s| s.fidelity.as_slice()).collect::<Vec<_>>());
    let optional = |get: fn(&SampleOutput) -> Option<&Vec<f64>>| -> Option<MeanSeries> {
        let rows: Option<Vec<&[f64]>> = ok.iter().map(|s| get(s).map(|v| v.as_slice())).collect();
        rows.map(|r| pointwise(&r))
    };
    let s_over_saturation = optional(|s| s.s_over_saturation.as_ref());
    let ee_normalized = optional(|s| s.ee_normalized.as_ref());
    let ee_raw = optional(|s| s.ee_raw.as_ref());

    let rs: Vec<f64> = ok.iter().filter_map(|s| s.summary.mean_r).collect();
    let (mean_r, mean_r_stderr) = if rs.is_empty() {
        (None, None)
    } else {
        let (m, e) = mean_stderr(&rs);
        (Some(m), Some(e))
    };
    let t_h = mean_stderr(&ok.iter().map(|s| s.summary.t_heisenberg_natural).collect::<Vec<_>>()).0;
    let decay = analyze_decay(&times, &fidelity.mean, t_h);
    let (ee_growth, ee_growth_error) = match &ee_normalized {
        Some(ee) => {
            let window = default_ee_window(&times, &ee.mean, config.ee_fit_start);
            match fit_ee_growth(&times, &ee.mean, window, config.ee_margin) {
                Ok(f) => (Some(f), None),
                Err(e) => (None, Some(e.to_string())),
            }
        }
        None => (None, None),
    };
    let first = &ok[0];
    Ok(CellResult {
        spacing_um,
        disorder_w,
        samples: config.samples,
        succeeded: ok.len(),
        failures,
        t_unit_au,
        times_us: times.iter().map(|t| rydchain_core::coupling::au_time_to_us(t * t_unit_au)).collect(),
        times_natural: times,
        fidelity,
        s_over_saturation,
        ee_normalized,
        ee_raw,
        saturation: first.saturation,
        d_a: first.d_a,
        d_b: first.d_b,
        mean_r,
        mean_r_stderr,
        t_heisenberg_natural: t_h,
        max_norm_error: ok.iter().map(|s| s.summary.max_norm_error).fold(0.0, f64::max),
        decay,
        ee_growth,
        ee_growth_error,
        sample_summaries: ok.into_iter().map(|s| s.summary).collect(),
    })
}

/// All cells, spacing-major. Cells run one after another, samples in parallel.
pub fn run_grid(config: &RunConfig) -> AppResult<GridResult> {
    config.validate()?;
    let basis = enumerate_sector(config.n_atoms, config.order, config.memory_budget)?;
    let pool = pool(config.effective_workers()?)?;
    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for &d in &config.spacings_um {
        for &w in &config.disorders {
            match pool.install(|| run_cell_in_pool(config, &basis, d, w)) {
                Ok(c) => cells.push(c),
                Err(e) => failures.push(CellFailure { spacing_um: d, disorder_w: w, error: e.to_string() }),
            }
        }
    }
    Ok(GridResult { provenance: Provenance::of(config), cells, failures })
}

impl GridResult {
    pub fn into_checked(self) -> AppResult<Self> {
        if self.failures.is_empty() {
            Ok(self)
        } else {
            Err(AppError::GridFailed {
                failed: self.failures.len(),
                cells: self.failures.len() + self.cells.len(),
                reports: self
                    .failures
                    .iter()
                    .map(|f| format!("d = {}, w = {}: {}", f.spacing_um, f.disorder_w, f.error))
                    .collect(),
            })
        }
    }

    pub fn cell(&self, spacing_um: f64, disorder_w: f64) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.spacing_um == spacing_um && c.disorder_w == disorder_w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rydchain_core::basis::InteractionOrder;

    fn toy() -> RunConfig {
        RunConfig {
            order: InteractionOrder::Two,
            n_atoms: 5,
            spacings_um: vec![8.0],
            disorders: vec![0.0],
            samples: 5,
            time_grid: crate::config::TimeGridSpec { t_min: 0.01, t_max: 10.0, points: 60, include_zero: true },
            ..RunConfig::default()
        }
    }

    #[test]
    fn ordered_cell_has_zero_stderr() {
        let g = run_grid(&toy()).unwrap().into_checked().unwrap();
        let c = &g.cells[0];
        assert_eq!(c.succeeded, 5);
        assert!(c.fidelity.stderr.iter().all(|e| *e == 0.0));
        assert!(c.ee_normalized.as_ref().unwrap().stderr.iter().all(|e| *e == 0.0));
        assert_eq!(c.mean_r_stderr, Some(0.0));
        assert_eq!(c.fidelity.mean[0], 1.0);
    }

    #[test]
    fn grid_shape_and_seed_sharing() {
        let cfg = RunConfig { spacings_um: vec![6.0, 8.0, 10.0], disorders: vec![0.1, 0.3], samples: 2, ..toy() };
        let g = run_grid(&cfg).unwrap();
        assert_eq!(g.cells.len(), 6);
        assert!(g.failures.is_empty());
        for c in &g.cells {
            let s: Vec<u64> = c.sample_summaries.iter().map(|s| s.seed).collect();
            assert_eq!(s, g.provenance.sample_seeds);
        }
        assert_eq!(g.cell(8.0, 0.3).unwrap().disorder_w, 0.3);
    }

    proptest! {
        #[test]
        fn mean_stderr_matches_naive(xs in proptest::collection::vec(-1e3f64..1e3, 2..40)) {
            let (m, e) = mean_stderr(&xs);
            let n = xs.len() as f64;
            let naive = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - naive).powi(2)).sum::<f64>() / (n - 1.0);
            prop_assert!((m - naive).abs() <= 1e-9 * (1.0 + naive.abs()));
            prop_assert!((e - (var / n).sqrt()).abs() <= 1e-9 * (1.0 + e));
        }

        #[test]
        fn constant_samples_have_exact_mean(x in -1e6f64..1e6, n in 1usize..50) {
            let (m, e) = mean_stderr(&vec![x; n]);
            prop_assert_eq!(m, x);
            prop_assert_eq!(e, 0.0);
        }
    }
}
