//! Flat `key = value` run configuration.
//!
//! Every key is optional and falls back to [`RunConfig::default`]; unknown or
//! repeated keys are errors. Floats are written in shortest round-trip form so
//! `parse(serialize(c)) == c` holds exactly.

use std::fmt::Write as _;
use std::path::PathBuf;

use rydchain_core::basis::{sector_dimension, InteractionOrder, MemoryBudget, SectorState};
use rydchain_core::coupling::{CouplingConstants, HoppingFlags};
use rydchain_core::dynamics::{default_cut, log_time_grid, Metrics};
use rydchain_core::hamiltonian::matrix_bytes;
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult};

/// Environment variable overriding the configured worker count.
pub const WORKERS_ENV: &str = "RYDCHAIN_WORKERS";

#[derive(Clone, Debug, PartialEq)]
pub struct TimeGridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub include_zero: bool,
}

impl Default for TimeGridSpec {
    fn default() -> Self {
        Self { t_min: 1e-2, t_max: 1e2, points: 400, include_zero: true }
    }
}

impl TimeGridSpec {
    pub fn times(&self) -> AppResult<Vec<f64>> {
        Ok(log_time_grid(self.t_min, self.t_max, self.points, self.include_zero)?)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub order: InteractionOrder,
    pub n_atoms: usize,
    pub spacings_um: Vec<f64>,
    pub disorders: Vec<f64>,
    pub samples: usize,
    pub base_seed: u64,
    pub time_grid: TimeGridSpec,
    pub constants: CouplingConstants,
    /// `None` means all p.
    pub initial: Option<SectorState>,
    /// `None` means ⌈n/2⌉.
    pub cut: Option<usize>,
    pub output_dir: PathBuf,
    pub metrics: Metrics,
    pub memory_budget: MemoryBudget,
    pub workers: usize,
    pub trim_fraction: f64,
    pub ldos_bins: usize,
    pub ee_fit_start: f64,
    pub ee_margin: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            order: InteractionOrder::Three,
            n_atoms: 9,
            spacings_um: vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0],
            disorders: vec![0.05, 0.15, 0.25, 0.35, 0.45],
            samples: 100,
            base_seed: 1,
            time_grid: TimeGridSpec::default(),
            constants: CouplingConstants::default(),
            initial: None,
            cut: None,
            output_dir: PathBuf::from("results"),
            metrics: Metrics::default(),
            memory_budget: MemoryBudget::default(),
            workers: 1,
            trim_fraction: 0.1,
            ldos_bins: 50,
            ee_fit_start: 1.0,
            ee_margin: 0.1,
        }
    }
}

const KEYS: &[&str] = &[
    "order",
    "n_atoms",
    "spacings_um",
    "disorders",
    "samples",
    "base_seed",
    "t_min",
    "t_max",
    "time_points",
    "include_zero",
    "mu",
    "nu",
    "gamma",
    "delta",
    "alpha",
    "hop_p_s",
    "hop_p_sprime",
    "hop_s_sprime",
    "initial",
    "cut",
    "output_dir",
    "metric_s_fraction",
    "metric_entanglement",
    "memory_budget_bytes",
    "workers",
    "trim_fraction",
    "ldos_bins",
    "ee_fit_start",
    "ee_margin",
];

fn bad(line: usize, key: &str, msg: impl std::fmt::Display) -> AppError {
    AppError::Config(format!("line {line}: {key}: {msg}"))
}

fn num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> AppResult<T>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| bad(line, key, format!("{e} ({v:?})")))
}

fn list(line: usize, key: &str, v: &str) -> AppResult<Vec<f64>> {
    v.split(',').map(|x| num::<f64>(line, key, x.trim())).collect()
}

fn flag(line: usize, key: &str, v: &str) -> AppResult<bool> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(line, key, format!("expected true or false, got {v:?}"))),
    }
}

fn float(x: f64) -> String {
    format!("{x:?}")
}

impl RunConfig {
    pub fn parse(text: &str) -> AppResult<Self> {
        let mut c = RunConfig::default();
        let mut seen = std::collections::BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| AppError::Config(format!("line {line_no}: expected `key = value`, got {raw:?}")))?;
            let (key, v) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(AppError::Config(format!("line {line_no}: unknown key {key:?}")));
            }
            if !seen.insert(key.to_string()) {
                return Err(AppError::Config(format!("line {line_no}: duplicate key {key:?}")));
            }
            let l = line_no;
            match key {
                "order" => c.order = v.parse().map_err(|e| bad(l, key, e))?,
                "n_atoms" => c.n_atoms = num(l, key, v)?,
                "spacings_um" => c.spacings_um = list(l, key, v)?,
                "disorders" => c.disorders = list(l, key, v)?,
                "samples" => c.samples = num(l, key, v)?,
                "base_seed" => c.base_seed = num(l, key, v)?,
                "t_min" => c.time_grid.t_min = num(l, key, v)?,
                "t_max" => c.time_grid.t_max = num(l, key, v)?,
                "time_points" => c.time_grid.points = num(l, key, v)?,
                "include_zero" => c.time_grid.include_zero = flag(l, key, v)?,
                "mu" => c.constants.mu = num(l, key, v)?,
                "nu" => c.constants.nu = num(l, key, v)?,
                "gamma" => c.constants.gamma = num(l, key, v)?,
                "delta" => c.constants.delta = num(l, key, v)?,
                "alpha" => c.constants.alpha = num(l, key, v)?,
                "hop_p_s" => c.constants.hopping.p_s = flag(l, key, v)?,
                "hop_p_sprime" => c.constants.hopping.p_sprime = flag(l, key, v)?,
                "hop_s_sprime" => c.constants.hopping.s_sprime = flag(l, key, v)?,
                "initial" => {
                    c.initial = if v == "all-p" { None } else { Some(v.parse().map_err(|e| bad(l, key, e))?) }
                }
                "cut" => c.cut = if v == "auto" { None } else { Some(num(l, key, v)?) },
                "output_dir" => c.output_dir = PathBuf::from(v),
                "metric_s_fraction" => c.metrics.s_fraction = flag(l, key, v)?,
                "metric_entanglement" => c.metrics.entanglement = flag(l, key, v)?,
                "memory_budget_bytes" => c.memory_budget = MemoryBudget(num(l, key, v)?),
                "workers" => c.workers = num(l, key, v)?,
                "trim_fraction" => c.trim_fraction = num(l, key, v)?,
                "ldos_bins" => c.ldos_bins = num(l, key, v)?,
                "ee_fit_start" => c.ee_fit_start = num(l, key, v)?,
                "ee_margin" => c.ee_margin = num(l, key, v)?,
                _ => unreachable!("key list and match arms disagree"),
            }
        }
        Ok(c)
    }

    pub fn serialize(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| float(*x)).collect::<Vec<_>>().join(", ");
        let c = &self.constants;
        let h = &c.hopping;
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("order", self.order.to_string());
        kv("n_atoms", self.n_atoms.to_string());
        kv("spacings_um", join(&self.spacings_um));
        kv("disorders", join(&self.disorders));
        kv("samples", self.samples.to_string());
        kv("base_seed", self.base_seed.to_string());
        kv("t_min", float(self.time_grid.t_min));
        kv("t_max", float(self.time_grid.t_max));
        kv("time_points", self.time_grid.points.to_string());
        kv("include_zero", self.time_grid.include_zero.to_string());
        kv("mu", float(c.mu));
        kv("nu", float(c.nu));
        kv("gamma", float(c.gamma));
        kv("delta", float(c.delta));
        kv("alpha", float(c.alpha));
        kv("hop_p_s", h.p_s.to_string());
        kv("hop_p_sprime", h.p_sprime.to_string());
        kv("hop_s_sprime", h.s_sprime.to_string());
        kv("initial", self.initial.map_or("all-p".to_string(), |s| s.to_string()));
        kv("cut", self.cut.map_or("auto".to_string(), |c| c.to_string()));
        kv("output_dir", self.output_dir.display().to_string());
        kv("metric_s_fraction", self.metrics.s_fraction.to_string());
        kv("metric_entanglement", self.metrics.entanglement.to_string());
        kv("memory_budget_bytes", self.memory_budget.0.to_string());
        kv("workers", self.workers.to_string());
        kv("trim_fraction", float(self.trim_fraction));
        kv("ldos_bins", self.ldos_bins.to_string());
        kv("ee_fit_start", float(self.ee_fit_start));
        kv("ee_margin", float(self.ee_margin));
        s
    }

    pub fn load(path: &std::path::Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::parse(&text)
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.serialize().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn cut(&self) -> usize {
        self.cut.unwrap_or_else(|| default_cut(self.n_atoms))
    }

    pub fn initial_state(&self) -> AppResult<SectorState> {
        Ok(match self.initial {
            Some(s) => s,
            None => SectorState::all_p(self.n_atoms)?,
        })
    }

    /// Worker count after the environment override.
    pub fn effective_workers(&self) -> AppResult<usize> {
        match std::env::var(WORKERS_ENV) {
            Ok(v) => {
                let n: usize =
                    v.trim().parse().map_err(|_| AppError::Config(format!("{WORKERS_ENV} must be a positive integer, got {v:?}")))?;
                if n == 0 {
                    return Err(AppError::Config(format!("{WORKERS_ENV} must be at least 1")));
                }
                Ok(n)
            }
            Err(_) => Ok(self.workers),
        }
    }

    /// Dense matrix, eigenvectors and evolution buffers of one sample.
    pub fn bytes_per_worker(&self) -> AppResult<u64> {
        let dim = sector_dimension(self.n_atoms, self.order)?;
        Ok(matrix_bytes(dim as usize).saturating_mul(4))
    }

    pub fn validate(&self) -> AppResult<()> {
        let cfg = |m: String| Err(AppError::Config(m));
        if self.n_atoms < 2 {
            return cfg(format!("n_atoms must be at least 2, got {}", self.n_atoms));
        }
        if self.samples < 1 {
            return cfg("samples must be at least 1".into());
        }
        if self.workers < 1 {
            return cfg("workers must be at least 1".into());
        }
        if self.spacings_um.is_empty() || self.spacings_um.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return cfg("spacings_um must be a nonempty list of positive numbers".into());
        }
        if self.disorders.is_empty() || self.disorders.iter().any(|w| !(0.0..0.5).contains(w)) {
            return cfg("disorders must be a nonempty list in [0, 0.5)".into());
        }
        self.constants.validate()?;
        self.time_grid.times()?;
        if !(0.0..0.5).contains(&self.trim_fraction) {
            return cfg(format!("trim_fraction must lie in [0, 0.5), got {}", self.trim_fraction));
        }
        if self.ldos_bins < 2 {
            return cfg("ldos_bins must be at least 2".into());
        }
        if !(self.ee_fit_start > 0.0) || !(0.0..1.0).contains(&self.ee_margin) {
            return cfg("ee_fit_start must be positive and ee_margin in [0, 1)".into());
        }
        let cut = self.cut();
        if cut == 0 || cut >= self.n_atoms {
            return cfg(format!("cut must satisfy 0 < cut < {}, got {cut}", self.n_atoms));
        }
        let initial = self.initial_state()?;
        initial.check_sector(self.n_atoms, self.order)?;
        let need = self.bytes_per_worker()?.saturating_mul(self.effective_workers()? as u64);
        let dim = sector_dimension(self.n_atoms, self.order)?;
        self.memory_budget.check(&format!("{} workers on sector dimension {dim}", self.effective_workers()?), need)?;
        Ok(())
    }

    pub fn hopping_off(mut self) -> Self {
        self.constants.hopping = HoppingFlags::ALL_OFF;
        self
    }
}
