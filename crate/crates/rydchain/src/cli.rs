use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rydchain_core::analysis::{analyze_decay, fit_gamma};
use rydchain_core::basis::{enumerate_sector, sector_dimension, InteractionOrder, MemoryBudget, SectorState};
use rydchain_core::coupling::{natural_time_unit_um, CouplingConstants, HoppingFlags};
use rydchain_core::dynamics::{default_cut, log_time_grid, observe, Metrics, QuenchSpec};
use rydchain_core::geometry::ChainGeometry;
use rydchain_core::hamiltonian::{assemble, row_sparsity_report};
use rydchain_core::spectral::{detect_scar_candidates, diagonalize, gaussian_fit, heisenberg_time, ldos, level_spacing_ratio, Parallelism};
use serde_json::json;

use crate::config::RunConfig;
use crate::ensemble::{run_cell, run_grid, GridResult, Provenance};
use crate::error::{AppError, AppResult};
use crate::output::{self, write_json, write_text, Table};
use crate::plot;

#[derive(Parser, Debug)]
#[command(name = "rydchain", version, about = "Exact-diagonalization quench dynamics of multi-body Rydberg chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sector dimension or full basis listing.
    Basis {
        #[arg(long)]
        order: InteractionOrder,
        #[arg(long)]
        atoms: usize,
        #[arg(long)]
        count_only: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build one Hamiltonian; print its sparsity report, optionally dump it.
    Assemble {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Eigenvalues, LDOS, level statistics and scar candidates.
    Spectrum {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long)]
        initial: Option<SectorState>,
        #[arg(long, default_value_t = 50)]
        bins: usize,
        #[arg(long, default_value_t = 0.1)]
        trim: f64,
        #[arg(long, default_value = "spectrum")]
        out_dir: PathBuf,
    },
    /// Quench series for a single geometry.
    Evolve {
        #[command(flatten)]
        system: SystemArgs,
        #[arg(long)]
        initial: Option<SectorState>,
        #[arg(long)]
        cut: Option<usize>,
        #[arg(long, default_value_t = 1e-2)]
        t_min: f64,
        #[arg(long, default_value_t = 1e2)]
        t_max: f64,
        #[arg(long, default_value_t = 400)]
        points: usize,
        #[arg(long)]
        no_entanglement: bool,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One disorder-ensemble cell.
    Ensemble {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        d: f64,
        #[arg(long)]
        w: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Every (d, w) cell of a config.
    Grid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Power-law decay fit of a series CSV.
    Fit {
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        t_heisenberg: Option<f64>,
        #[arg(long, num_args = 2, value_names = ["START", "END"])]
        window: Option<Vec<f64>>,
    },
    /// Render SVG figures.
    Plot {
        #[arg(long, conflicts_with = "series")]
        grid: Option<GridQuantity>,
        #[arg(long)]
        series: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SeriesKind::Fidelity)]
        kind: SeriesKind,
        /// Grid output directory.
        #[arg(long, default_value = "results")]
        dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Linear-time extent of the early EE panel.
        #[arg(long, default_value_t = 2.0)]
        early_until: f64,
    },
    /// Text table of a grid summary.
    Report {
        #[arg(long, default_value = "results")]
        dir: PathBuf,
    },
}

#[derive(Args, Debug, Clone)]
pub struct SystemArgs {
    #[arg(long)]
    pub order: InteractionOrder,
    #[arg(long)]
    pub atoms: usize,
    /// Mean spacing in micrometres.
    #[arg(long)]
    pub d: f64,
    #[arg(long, default_value_t = 0.0)]
    pub w: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub no_hopping: bool,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub memory_budget: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum GridQuantity {
    Gamma,
    R,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
pub enum SeriesKind {
    Fidelity,
    Ee,
}

impl SystemArgs {
    fn constants(&self) -> CouplingConstants {
        let mut c = CouplingConstants::default();
        if self.no_hopping {
            c.hopping = HoppingFlags::ALL_OFF;
        }
        if let Some(a) = self.alpha {
            c.alpha = a;
        }
        c
    }

    fn budget(&self) -> MemoryBudget {
        self.memory_budget.map_or_else(MemoryBudget::default, MemoryBudget)
    }

    fn geometry(&self) -> AppResult<ChainGeometry> {
        Ok(if self.w == 0.0 {
            ChainGeometry::ordered(self.atoms, self.d)?
        } else {
            ChainGeometry::disordered(self.atoms, self.d, self.w, self.seed)?
        })
    }
}

fn emit(out: &mut dyn Write, text: &str) -> AppResult<()> {
    out.write_all(text.as_bytes()).map_err(|e| AppError::io(Path::new("<stdout>"), e))
}

fn emit_json(out: &mut dyn Write, v: &serde_json::Value) -> AppResult<()> {
    emit(out, &format!("{}\n", serde_json::to_string_pretty(v).expect("JSON values serialize")))
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> AppResult<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            return emit(out, &e.to_string());
        }
        Err(e) => return Err(AppError::Usage(e.to_string().trim_end().to_string())),
    };
    execute(cli.command, out)
}

fn sample_times(t_min: f64, t_max: f64, points: usize) -> AppResult<Vec<f64>> {
    Ok(log_time_grid(t_min, t_max, points, true)?)
}

fn execute(command: Command, out: &mut dyn Write) -> AppResult<()> {
    match command {
        Command::Basis { order, atoms, count_only, out: path } => {
            if count_only {
                return emit(out, &format!("{}\n", sector_dimension(atoms, order)?));
            }
            let basis = enumerate_sector(atoms, order, MemoryBudget::default())?;
            let dump = output::basis_dump(&basis);
            match path {
                Some(p) => write_text(&p, &dump),
                None => emit(out, &dump),
            }
        }
        Command::Assemble { system, out: path } => {
            let basis = enumerate_sector(system.atoms, system.order, system.budget())?;
            let h = assemble(&basis, &system.geometry()?, &system.constants(), system.budget())?;
            let report = row_sparsity_report(&h, &basis);
            if let Some(p) = &path {
                std::fs::write(p, output::sech_bytes(&h)).map_err(|e| AppError::io(p, e))?;
            }
            let rows = &report.nonzeros_per_row;
            emit_json(
                out,
                &json!({
                    "order": system.order.value(),
                    "dim": report.dim,
                    "total_nonzeros": report.total_nonzeros(),
                    "max_row_nonzeros": rows.iter().max(),
                    "mean_row_nonzeros": report.total_nonzeros() as f64 / rows.len().max(1) as f64,
                    "by_process": report.by_process,
                    "unclassified": report.unclassified,
                    "exactly_symmetric": h.is_exactly_symmetric(),
                    "frobenius_norm": h.frobenius_norm(),
                    "positions_um": h.positions_um(),
                    "constants": output::constants_json(h.constants()),
                }),
            )
        }
        Command::Spectrum { system, initial, bins, trim, out_dir } => {
            let basis = enumerate_sector(system.atoms, system.order, system.budget())?;
            let c = system.constants();
            let h = assemble(&basis, &system.geometry()?, &c, system.budget())?;
            let initial = match initial {
                Some(s) => s,
                None => SectorState::all_p(system.atoms)?,
            };
            initial.check_sector(system.atoms, system.order)?;
            let eig = diagonalize(&h, Parallelism::Sequential)?.with_initial_state(basis.rank(&initial)?)?;
            let l = ldos(&eig, bins)?;
            let fit = gaussian_fit(&l);
            let stats = level_spacing_ratio(eig.eigenvalues(), trim, 20).ok();
            let scars = detect_scar_candidates(&eig, None, 100.0);
            write_text(&out_dir.join("spectrum.csv"), &output::spectrum_csv(&eig))?;
            write_text(&out_dir.join("ldos.csv"), &output::ldos_scatter_csv(&l))?;
            write_text(&out_dir.join("ldos_histogram.csv"), &output::ldos_histogram_csv(&l))?;
            let summary = json!({
                "order": system.order.value(),
                "dim": eig.dim(),
                "initial": initial.to_string(),
                "positions_um": h.positions_um(),
                "t_heisenberg_au": heisenberg_time(eig.eigenvalues()).ok(),
                "level_spacing": stats,
                "ldos_sum": l.weights.iter().sum::<f64>(),
                "gaussian_fit": fit.as_ref().ok(),
                "gaussian_fit_error": fit.as_ref().err().map(|e| e.to_string()),
                "scar_candidates": scars.iter().map(|&i| json!({"index": i, "energy_au": eig.eigenvalues()[i], "overlap": eig.overlaps()[i]})).collect::<Vec<_>>(),
                "constants": output::constants_json(&c),
            });
            write_json(&out_dir.join("spectrum.json"), &summary)?;
            emit_json(out, &summary)
        }
        Command::Evolve { system, initial, cut, t_min, t_max, points, no_entanglement, out: path } => {
            let basis = enumerate_sector(system.atoms, system.order, system.budget())?;
            let c = system.constants();
            let h = assemble(&basis, &system.geometry()?, &c, system.budget())?;
            let initial = match initial {
                Some(s) => s,
                None => SectorState::all_p(system.atoms)?,
            };
            let quench = QuenchSpec::new(&basis, initial, sample_times(t_min, t_max, points)?, cut.unwrap_or_else(|| default_cut(system.atoms)))?;
            let eig = diagonalize(&h, Parallelism::Sequential)?.with_initial_state(basis.rank(&quench.initial)?)?;
            let tu = natural_time_unit_um(system.order, system.d, &c)?;
            let metrics = Metrics { s_fraction: true, entanglement: !no_entanglement };
            let series = observe(&basis, &eig, &quench, tu, metrics)?;
            let csv = output::series_csv(&series);
            match path {
                Some(p) => {
                    write_text(&p, &csv)?;
                    let mut side = output::series_sidecar(&series, system.order, &c);
                    side["positions_um"] = json!(h.positions_um());
                    write_json(&p.with_extension("json"), &side)
                }
                None => emit(out, &csv),
            }
        }
        Command::Ensemble { config, d, w, out: dir } => {
            let cfg = RunConfig::load(&config)?;
            cfg.validate()?;
            let basis = enumerate_sector(cfg.n_atoms, cfg.order, cfg.memory_budget)?;
            let cell = run_cell(&cfg, &basis, d, w)?;
            let dir = dir.unwrap_or_else(|| cfg.output_dir.join("cells").join(output::cell_dir_name(d, w)));
            output::write_cell(&dir, &cell, &cfg)?;
            write_json(&dir.join("provenance.json"), &output::provenance_json(&Provenance::of(&cfg), &cfg))?;
            emit_json(out, &output::fit_json(&cell, cfg.order, &cfg.constants))
        }
        Command::Grid { config, out: dir } => {
            let cfg = RunConfig::load(&config)?;
            let g: GridResult = run_grid(&cfg)?;
            let dir = dir.unwrap_or_else(|| cfg.output_dir.clone());
            output::write_grid(&dir, &g, &cfg)?;
            let g = g.into_checked()?;
            emit(out, &format!("{} cells written to {}\n", g.cells.len(), dir.display()))
        }
        Command::Fit { series, t_heisenberg, window } => {
            let t = Table::load(&series)?;
            let times: Vec<f64> = t.floats("t_natural")?.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect();
            let f: Vec<f64> = t.floats("fidelity")?.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect();
            let t_h = t_heisenberg.unwrap_or(f64::INFINITY);
            let v = match window {
                Some(w) => serde_json::to_value(fit_gamma(&times, &f, (w[0], w[1]))?),
                None => serde_json::to_value(analyze_decay(&times, &f, t_h)),
            }
            .expect("fit results serialize");
            emit_json(out, &v)
        }
        Command::Plot { grid, series, kind, dir, out: path, early_until } => {
            let (svg, default_path) = if let Some(q) = grid {
                let (svg, name) = plot_grid(&dir, q)?;
                (svg, dir.join(name))
            } else if let Some(s) = series {
                let (svg, name) = plot_series(&s, kind, early_until)?;
                (svg, s.with_file_name(name))
            } else {
                return Err(AppError::Usage("plot needs --grid <gamma|r> or --series <csv>".into()));
            };
            let p = path.unwrap_or(default_path);
            write_text(&p, &svg)?;
            emit(out, &format!("{}\n", p.display()))
        }
        Command::Report { dir } => {
            let t = Table::load(&dir.join("summary.csv"))?;
            let cols = ["d_um", "w", "gamma", "classification", "mean_r", "ee_growth_label"];
            let idx: Vec<usize> = cols.iter().map(|c| t.column_index(c)).collect::<AppResult<_>>()?;
            let mut s = format!("{:>8} {:>6} {:>8} {:>14} {:>8} {}\n", "d_um", "w", "gamma", "class", "<r>", "ee_growth");
            for r in &t.rows {
                let num = |i: usize| r[idx[i]].parse::<f64>().map_or("-".to_string(), |x| format!("{x:.4}"));
                s.push_str(&format!(
                    "{:>8} {:>6} {:>8} {:>14} {:>8} {}\n",
                    num(0),
                    num(1),
                    num(2),
                    r[idx[3]],
                    num(4),
                    r[idx[5]]
                ));
            }
            emit(out, &s)
        }
    }
}

fn sorted_unique(v: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = v.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

fn plot_grid(dir: &Path, q: GridQuantity) -> AppResult<(String, &'static str)> {
    let t = Table::load(&dir.join("summary.csv"))?;
    let ds: Vec<f64> = t.floats("d_um")?.into_iter().flatten().collect();
    let ws: Vec<f64> = t.floats("w")?.into_iter().flatten().collect();
    let (col, title, name) = match q {
        GridQuantity::Gamma => ("gamma", "fitted decay exponent gamma", "gamma.svg"),
        GridQuantity::R => ("mean_r", "mean level-spacing ratio <r>", "mean_r.svg"),
    };
    let vals = t.floats(col)?;
    let lookup = |d: f64, w: f64| ds.iter().zip(&ws).zip(&vals).find(|((dd, ww), _)| **dd == d && **ww == w).and_then(|(_, v)| *v);
    let svg = plot::intensity_svg(title, &sorted_unique(ds.iter().copied()), &sorted_unique(ws.iter().copied()), lookup);
    Ok((svg, name))
}

fn plot_series(path: &Path, kind: SeriesKind, early_until: f64) -> AppResult<(String, &'static str)> {
    let t = Table::load(path)?;
    let times: Vec<f64> = t.floats("t_natural")?.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect();
    let sidecar_fit = path.with_file_name("fit.json");
    let sidecar_series = path.with_extension("json");
    let read_json = |p: &Path| -> Option<serde_json::Value> {
        std::fs::read_to_string(p).ok().and_then(|s| serde_json::from_str(&s).ok())
    };
    match kind {
        SeriesKind::Fidelity => {
            let f: Vec<f64> = t.floats("fidelity")?.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect();
            let (fit, t_h) = match read_json(&sidecar_fit) {
                Some(j) => {
                    let fit = j["decay"]["fit"].as_object().and_then(|o| {
                        Some(plot::FitOverlay {
                            slope: o.get("slope")?.as_f64()?,
                            intercept: o.get("intercept")?.as_f64()?,
                            window: (o.get("window")?[0].as_f64()?, o.get("window")?[1].as_f64()?),
                        })
                    });
                    let t_h = read_json(&path.with_file_name("spectrum.json")).and_then(|s| s["t_heisenberg_natural"].as_f64());
                    (fit, t_h)
                }
                None => {
                    let d = analyze_decay(&times, &f, read_json(&sidecar_series).and_then(|s| s["t_heisenberg_natural"].as_f64()).unwrap_or(f64::INFINITY));
                    let fit = d.fit.map(|p| plot::FitOverlay { slope: p.slope, intercept: p.intercept, window: p.window });
                    (fit, read_json(&sidecar_series).and_then(|s| s["t_heisenberg_natural"].as_f64()))
                }
            };
            Ok((plot::fidelity_svg("survival probability", &times, &f, t_h, fit), "fidelity.svg"))
        }
        SeriesKind::Ee => {
            let s: Vec<f64> = t.floats("ee_normalized")?.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect();
            Ok((plot::ee_dual_svg("normalized entanglement entropy", &times, &s, early_until), "ee.svg"))
        }
    }
}
