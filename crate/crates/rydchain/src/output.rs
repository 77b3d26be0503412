//! Result files: CSV tables, JSON sidecars, basis and matrix dumps.
//!
//! CSV floats use 17 significant digits, UNIX newlines and a header row.
//! Only `provenance.json` carries a timestamp.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rydchain_core::basis::{InteractionOrder, SectorBasis};
use rydchain_core::coupling::CouplingConstants;
use rydchain_core::dynamics::ObservableSeries;
use rydchain_core::hamiltonian::SectorHamiltonian;
use rydchain_core::spectral::{EigenSystem, Ldos};
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::ensemble::{CellResult, GridResult, MeanSeries, Provenance};
use crate::error::{AppError, AppResult};

pub const SERIES_HEADER: &str = "t_natural,t_us,fidelity,s_fraction,s_over_saturation,ee_raw,ee_normalized";
pub const SUMMARY_HEADER: &str = "order,d_um,w,samples,succeeded,gamma,residual,fit_start,fit_end,classification,\
rapid_collapse,collapse_time,mean_r,mean_r_stderr,t_heisenberg,ee_growth_label";
const SECH_MAGIC: &[u8; 4] = b"SECH";

pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_f(x: Option<f64>) -> String {
    x.map(fmt_f).unwrap_or_default()
}

pub fn write_text(path: &Path, text: &str) -> AppResult<()> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

pub fn write_json(path: &Path, v: &Value) -> AppResult<()> {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    write_text(path, &s)
}

fn to_value<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("result types serialize to JSON")
}

pub fn constants_json(c: &CouplingConstants) -> Value {
    to_value(c)
}

fn series_rows(
    times: &[f64],
    times_us: &[f64],
    columns: [Option<&[f64]>; 5],
) -> String {
    let mut s = String::with_capacity(times.len() * 160);
    s.push_str(SERIES_HEADER);
    s.push('\n');
    for k in 0..times.len() {
        let _ = write!(s, "{},{}", fmt_f(times[k]), fmt_f(times_us[k]));
        for col in columns {
            s.push(',');
            if let Some(c) = col {
                s.push_str(&fmt_f(c[k]));
            }
        }
        s.push('\n');
    }
    s
}

pub fn series_csv(o: &ObservableSeries) -> String {
    series_rows(
        &o.times_natural,
        &o.times_us,
        [
            Some(&o.fidelity),
            o.s_fraction.as_deref(),
            o.s_over_saturation.as_deref(),
            o.ee_raw.as_deref(),
            o.ee_normalized.as_deref(),
        ],
    )
}

pub fn series_sidecar(o: &ObservableSeries, order: InteractionOrder, c: &CouplingConstants) -> Value {
    json!({
        "order": order.value(),
        "t_heisenberg_natural": o.t_heisenberg_natural,
        "t_unit_au": o.t_unit_au,
        "saturation": o.saturation,
        "d_a": o.d_a,
        "d_b": o.d_b,
        "max_norm_error": o.max_norm_error,
        "constants": constants_json(c),
    })
}

fn scaled(s: Option<&MeanSeries>, by: f64, pick: fn(&MeanSeries) -> &Vec<f64>) -> Option<Vec<f64>> {
    s.map(|m| pick(m).iter().map(|x| x * by).collect())
}

/// Ensemble means and their standard errors as two series tables.
pub fn cell_series_csv(c: &CellResult) -> (String, String) {
    let sat = c.saturation;
    let s_mean = scaled(c.s_over_saturation.as_ref(), sat, |m| &m.mean);
    let s_err = scaled(c.s_over_saturation.as_ref(), sat, |m| &m.stderr);
    let mean = series_rows(
        &c.times_natural,
        &c.times_us,
        [
            Some(&c.fidelity.mean),
            s_mean.as_deref(),
            c.s_over_saturation.as_ref().map(|m| m.mean.as_slice()),
            c.ee_raw.as_ref().map(|m| m.mean.as_slice()),
            c.ee_normalized.as_ref().map(|m| m.mean.as_slice()),
        ],
    );
    let err = series_rows(
        &c.times_natural,
        &c.times_us,
        [
            Some(&c.fidelity.stderr),
            s_err.as_deref(),
            c.s_over_saturation.as_ref().map(|m| m.stderr.as_slice()),
            c.ee_raw.as_ref().map(|m| m.stderr.as_slice()),
            c.ee_normalized.as_ref().map(|m| m.stderr.as_slice()),
        ],
    );
    (mean, err)
}

pub fn fit_json(c: &CellResult, order: InteractionOrder, constants: &CouplingConstants) -> Value {
    let fit = c.decay.fit.as_ref();
    json!({
        "order": order.value(),
        "d_um": c.spacing_um,
        "w": c.disorder_w,
        "gamma": c.decay.gamma(),
        "residual": fit.map(|f| f.residual),
        "window": fit.map(|f| [f.window.0, f.window.1]),
        "classification": c.decay.classification.label(),
        "mean_r": c.mean_r,
        "ee_growth_label": c.ee_growth.as_ref().map(|g| g.label.label()),
        "decay": to_value(&c.decay),
        "ee_growth": to_value(&c.ee_growth),
        "ee_growth_error": c.ee_growth_error,
        "constants": constants_json(constants),
    })
}

pub fn cell_spectrum_json(c: &CellResult) -> Value {
    let samples: Vec<Value> = c
        .sample_summaries
        .iter()
        .map(|s| json!({"index": s.index, "seed": s.seed, "mean_r": s.mean_r, "t_heisenberg_natural": s.t_heisenberg_natural}))
        .collect();
    json!({
        "mean_r": c.mean_r,
        "mean_r_stderr": c.mean_r_stderr,
        "t_heisenberg_natural": c.t_heisenberg_natural,
        "t_unit_au": c.t_unit_au,
        "samples": c.samples,
        "succeeded": c.succeeded,
        "failures": to_value(&c.failures),
        "max_norm_error": c.max_norm_error,
        "per_sample": samples,
    })
}

pub fn geometry_csv(c: &CellResult) -> String {
    let mut s = String::from("sample,atom,position_um\n");
    for ss in &c.sample_summaries {
        for (a, x) in ss.positions_um.iter().enumerate() {
            let _ = writeln!(s, "{},{a},{}", ss.index, fmt_f(*x));
        }
    }
    s
}

pub fn summary_csv(g: &GridResult, order: InteractionOrder) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for c in &g.cells {
        let fit = c.decay.fit.as_ref();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            order.value(),
            fmt_f(c.spacing_um),
            fmt_f(c.disorder_w),
            c.samples,
            c.succeeded,
            opt_f(c.decay.gamma()),
            opt_f(fit.map(|f| f.residual)),
            opt_f(fit.map(|f| f.window.0)),
            opt_f(fit.map(|f| f.window.1)),
            c.decay.classification.label(),
            c.decay.rapid_collapse,
            opt_f(c.decay.collapse.time()),
            opt_f(c.mean_r),
            opt_f(c.mean_r_stderr),
            fmt_f(c.t_heisenberg_natural),
            c.ee_growth.as_ref().map_or("", |e| e.label.label()),
        );
    }
    s
}

pub fn cell_dir_name(d: f64, w: f64) -> String {
    format!("d{d}_w{w}")
}

pub fn write_cell(dir: &Path, c: &CellResult, config: &RunConfig) -> AppResult<()> {
    let (mean, err) = cell_series_csv(c);
    write_text(&dir.join("series.csv"), &mean)?;
    write_text(&dir.join("series_stderr.csv"), &err)?;
    write_json(&dir.join("fit.json"), &fit_json(c, config.order, &config.constants))?;
    write_json(&dir.join("spectrum.json"), &cell_spectrum_json(c))?;
    write_text(&dir.join("geometry.csv"), &geometry_csv(c))
}

pub fn provenance_json(p: &Provenance, config: &RunConfig) -> Value {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    json!({
        "config_hash": p.config_hash,
        "base_seed": p.base_seed,
        "samples": p.samples,
        "time_points": p.time_points,
        "code_version": p.code_version,
        "sample_seeds": p.sample_seeds,
        "constants": constants_json(&config.constants),
        "created_unix_seconds": now,
    })
}

/// Writes `config.cfg`, `summary.csv`, `provenance.json` and one directory per cell.
pub fn write_grid(dir: &Path, g: &GridResult, config: &RunConfig) -> AppResult<()> {
    write_text(&dir.join("config.cfg"), &config.serialize())?;
    write_text(&dir.join("summary.csv"), &summary_csv(g, config.order))?;
    for c in &g.cells {
        write_cell(&dir.join("cells").join(cell_dir_name(c.spacing_um, c.disorder_w)), c, config)?;
    }
    if !g.failures.is_empty() {
        write_json(&dir.join("failures.json"), &to_value(&g.failures))?;
    }
    write_json(&dir.join("provenance.json"), &provenance_json(&g.provenance, config))
}

pub fn spectrum_csv(eig: &EigenSystem) -> String {
    let mut s = String::from("index,energy_au\n");
    for (i, e) in eig.eigenvalues().iter().enumerate() {
        let _ = writeln!(s, "{i},{}", fmt_f(*e));
    }
    s
}

pub fn ldos_scatter_csv(l: &Ldos) -> String {
    let mut s = String::from("energy_au,overlap\n");
    for (e, p) in &l.scatter {
        let _ = writeln!(s, "{},{}", fmt_f(*e), fmt_f(*p));
    }
    s
}

pub fn ldos_histogram_csv(l: &Ldos) -> String {
    let mut s = String::from("bin_low_au,bin_high_au,weight\n");
    for (k, w) in l.weights.iter().enumerate() {
        let _ = writeln!(s, "{},{},{}", fmt_f(l.edges[k]), fmt_f(l.edges[k + 1]), fmt_f(*w));
    }
    s
}

pub fn basis_dump(b: &SectorBasis) -> String {
    let mut s = format!("{} {} {}\n", b.order(), b.n_atoms(), b.dim());
    for st in b.states() {
        let _ = writeln!(s, "{st}");
    }
    s
}

pub fn sech_bytes(h: &SectorHamiltonian) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + h.as_slice().len() * 8);
    out.extend_from_slice(SECH_MAGIC);
    out.extend_from_slice(&(h.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(h.order().value() as u32).to_le_bytes());
    out.extend_from_slice(&[0u8; 4]);
    for x in h.as_slice() {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

/// Dimension, order and row-major entries of a matrix dump.
pub fn read_sech(bytes: &[u8]) -> AppResult<(usize, InteractionOrder, Vec<f64>)> {
    let bad = |m: &str| AppError::Config(format!("matrix dump: {m}"));
    if bytes.len() < 16 || &bytes[..4] != SECH_MAGIC {
        return Err(bad("missing SECH header"));
    }
    let dim = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let order = InteractionOrder::try_from(u32::from_le_bytes(bytes[8..12].try_into().unwrap()))?;
    let body = &bytes[16..];
    if body.len() != dim * dim * 8 {
        return Err(bad(&format!("expected {} payload bytes for dimension {dim}, found {}", dim * dim * 8, body.len())));
    }
    let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    Ok((dim, order, data))
}

/// Header and string cells of a CSV file without quoting.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> AppResult<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| AppError::Config("empty CSV".into()))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(|s| s.trim().to_string()).collect()).collect();
        if let Some(r) = rows.iter().find(|r| r.len() != header.len()) {
            return Err(AppError::Config(format!("CSV row has {} fields, header has {}", r.len(), header.len())));
        }
        Ok(Self { header, rows })
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        Self::parse(&fs::read_to_string(path).map_err(|e| AppError::io(path, e))?)
    }

    pub fn column_index(&self, name: &str) -> AppResult<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| AppError::Config(format!("CSV has no column {name:?}")))
    }

    pub fn strings(&self, name: &str) -> AppResult<Vec<String>> {
        let i = self.column_index(name)?;
        Ok(self.rows.iter().map(|r| r[i].clone()).collect())
    }

    /// Empty cells become `None`.
    pub fn floats(&self, name: &str) -> AppResult<Vec<Option<f64>>> {
        let i = self.column_index(name)?;
        self.rows
            .iter()
            .map(|r| {
                let v = &r[i];
                if v.is_empty() {
                    Ok(None)
                } else {
                    v.parse::<f64>().map(Some).map_err(|_| AppError::Config(format!("{name}: not a number: {v:?}")))
                }
            })
            .collect()
    }
}

pub fn cell_dirs(grid_dir: &Path) -> AppResult<Vec<PathBuf>> {
    let cells = grid_dir.join("cells");
    let mut out: Vec<PathBuf> = fs::read_dir(&cells)
        .map_err(|e| AppError::io(&cells, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    out.sort();
    Ok(out)
}
