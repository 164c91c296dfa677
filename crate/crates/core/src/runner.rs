//! Executes a parsed [`Config`] into an output directory.
//!
//! Every run writes `config.toml` (canonical echo), `manifest.json` and the
//! experiment's CSV files. CSV content depends only on the config.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::config::{Config, ExperimentKind};
use crate::diagnostics::Failure;
use crate::error::{Error, Result};
use crate::experiments::{
    compute_reference, run_convergence, run_m2_sweep, run_simulate, run_stability_map, with_pool, ConvergenceCase,
    InitialCondition, SimulateSpec, StabilityMapSpec,
};
use crate::grid::{Field, SpectralGrid};
use crate::steppers::{plan_steps, SchemeConfig};

/// Dry-run summary printed by `validate`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Plan {
    pub experiment: ExperimentKind,
    /// Independent runs (sweep cells, convergence points or 1).
    pub cells: usize,
    /// Total time steps over all runs, including references and preparation.
    pub step_budget: u64,
    pub grid_points: usize,
}

impl std::fmt::Display for Plan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "experiment: {}", self.experiment.name())?;
        writeln!(f, "grid points: {}", self.grid_points)?;
        writeln!(f, "cells: {}", self.cells)?;
        write!(f, "step budget: {}", self.step_budget)
    }
}

fn steps(t0: f64, t_end: f64, h: f64) -> Result<u64> {
    Ok(plan_steps(t0, t_end, h)?.0 as u64)
}

pub fn plan(cfg: &Config) -> Result<Plan> {
    cfg.validate()?;
    let grid_points = cfg.grid.n.iter().product();
    let t0 = cfg.run.t0;
    let t_end = cfg.run.t_end.unwrap_or(t0);
    let mut budget = match cfg.ic {
        InitialCondition::Prepared { t_prep, h_prep } => steps(0.0, t_prep, h_prep)?,
        _ => 0,
    };
    let reference_steps = |r: &crate::experiments::ReferenceSpec| -> Result<u64> {
        Ok(match *r {
            crate::experiments::ReferenceSpec::Manufactured => 0,
            crate::experiments::ReferenceSpec::Richardson { h_fine, .. } => 3 * steps(t0, t_end, h_fine)?,
        })
    };
    let cells = match cfg.experiment {
        ExperimentKind::Simulate => {
            budget += steps(t0, t_end, cfg.run.h.unwrap_or(1.0))?;
            1
        }
        ExperimentKind::Converge => {
            let c = cfg.converge.as_ref().expect("validated");
            let cases = cfg.convergence_cases().len();
            for &h in &c.h {
                budget += cases as u64 * steps(t0, t_end, h)?;
            }
            budget += reference_steps(&c.reference)?;
            cases * c.h.len()
        }
        ExperimentKind::M2sweep => {
            let s = cfg.m2sweep.as_ref().expect("validated");
            let n = s.schemes.len() * s.m2.len();
            budget += n as u64 * steps(t0, t_end, cfg.run.h.unwrap_or(1.0))?;
            budget += reference_steps(&s.reference)?;
            n
        }
        ExperimentKind::Stabmap => {
            let s = cfg.stabmap.as_ref().expect("validated");
            let n = s.h().len() * s.values().len();
            budget += n as u64 * s.steps as u64;
            n
        }
    };
    Ok(Plan {
        experiment: cfg.experiment,
        cells,
        step_budget: budget,
        grid_points,
    })
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    package: &'static str,
    version: &'static str,
    experiment: &'static str,
    seed: u64,
    threads: usize,
    /// Canonical TOML; parsing it reproduces the run.
    config: String,
    plan: &'a Plan,
    timings_s: Vec<(String, f64)>,
    files: Vec<String>,
    failure: Option<String>,
}

/// Result of [`execute`].
#[derive(Debug)]
pub struct Outcome {
    /// Text for standard output.
    pub summary: String,
    pub files: Vec<PathBuf>,
    /// Numerical failure of a simulate run; the record up to it is on disk.
    pub failure: Option<Failure>,
}

struct Writer<'a> {
    dir: &'a Path,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn put(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.files.push(path);
        Ok(())
    }
}

/// Runs the experiment, writing outputs into `out`. Per-cell instabilities
/// of sweeps are results, not errors.
pub fn execute(cfg: &Config, out: &Path) -> Result<Outcome> {
    let plan = plan(cfg)?;
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let threads = cfg.threads.unwrap_or_else(rayon::current_num_threads);
    let mut w = Writer {
        dir: out,
        files: Vec::new(),
    };
    w.put("config.toml", &cfg.to_toml())?;
    let mut timings = Vec::new();
    let clock = Instant::now();

    let grid = cfg.grid.spec().build()?;
    let u0 = initial_state(cfg, &grid, out)?;
    timings.push(("initial_state".to_string(), clock.elapsed().as_secs_f64()));

    let started = Instant::now();
    let (summary, failure) = with_pool(Some(threads), || dispatch(cfg, &u0, &mut w))??;
    timings.push((cfg.experiment.name().to_string(), started.elapsed().as_secs_f64()));

    let manifest = Manifest {
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        experiment: cfg.experiment.name(),
        seed: cfg.seed,
        threads,
        config: cfg.to_toml(),
        plan: &plan,
        timings_s: timings,
        files: w
            .files
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
        failure: failure
            .as_ref()
            .map(|f| format!("step {} (t = {}): {}", f.step, f.time, f.reason())),
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    w.put("manifest.json", &json)?;
    Ok(Outcome {
        summary,
        files: w.files,
        failure,
    })
}

fn initial_state(cfg: &Config, grid: &Arc<SpectralGrid>, out: &Path) -> Result<Field> {
    let cache = match (&cfg.ic, &cfg.cache) {
        (InitialCondition::Prepared { .. }, Some(c)) => Some(c.clone()),
        (InitialCondition::Prepared { .. }, None) => Some(out.join("prepared_state.snap")),
        _ => None,
    };
    cfg.ic.build(grid, &cfg.model, cfg.seed, cache.as_deref())
}

fn dispatch(cfg: &Config, u0: &Field, w: &mut Writer) -> Result<(String, Option<Failure>)> {
    let model = &cfg.model;
    let t0 = cfg.run.t0;
    let t_end = cfg.run.t_end.unwrap_or(t0);
    match cfg.experiment {
        ExperimentKind::Simulate => {
            let spec = SimulateSpec {
                scheme: cfg.run.scheme_config(),
                split: cfg.split,
                t0,
                t_end,
                h: cfg.run.h.expect("validated"),
                snapshot_times: cfg.simulate.clone().unwrap_or_default().snapshot_times,
                sample_every: cfg.run.sample_every,
                energy_tol: cfg.run.energy_tol,
            };
            let outcome = run_simulate(model, u0.clone(), &spec, Some(w.dir))?;
            w.files.extend(outcome.snapshots.iter().map(|s| s.1.clone()));
            let rec = outcome.record;
            let mut csv = Vec::new();
            rec.write_csv(&mut csv).expect("writing to memory");
            w.put("record.csv", &String::from_utf8(csv).expect("ascii"))?;
            let mut summary = format!(
                "steps: {}\nfinal time: {}\nenergy monotone: {}\nrelative mass drift: {:.3e}\n",
                rec.steps,
                rec.final_time,
                rec.energy_monotone,
                rec.relative_mass_drift()
            );
            if let Some(f) = &rec.failure {
                let text = format!("step,time,reason\n{},{:.16e},\"{}\"\n", f.step, f.time, f.reason());
                w.put("failure.csv", &text)?;
                summary.push_str(&format!("FAILED at step {} (t = {}): {}\n", f.step, f.time, f.reason()));
            }
            Ok((summary, rec.failure))
        }
        ExperimentKind::Converge => {
            let c = cfg.converge.as_ref().expect("validated");
            let reference = compute_reference(&c.reference, model, &cfg.split, u0, t0, t_end)?;
            let cases: Vec<ConvergenceCase> = cfg
                .convergence_cases()
                .into_iter()
                .map(|(s, sp)| ConvergenceCase::new(s, sp))
                .collect();
            let table = run_convergence(model, u0, t0, t_end, &cases, &c.h, &reference)?;
            let csv = table.to_csv();
            w.put("convergence.csv", &csv)?;
            let mut summary = csv;
            let mut slopes = String::from("case,slope\n");
            for (i, case) in table.cases.iter().enumerate() {
                let s = table.slope(i).map_or("nan".into(), |s| format!("{s:.6}"));
                slopes.push_str(&format!("{},{s}\n", case.label));
                summary.push_str(&format!("slope {}: {s}\n", case.label));
            }
            w.put("slopes.csv", &slopes)?;
            Ok((summary, None))
        }
        ExperimentKind::M2sweep => {
            let s = cfg.m2sweep.as_ref().expect("validated");
            let reference = compute_reference(&s.reference, model, &cfg.split, u0, t0, t_end)?;
            let schemes: Vec<SchemeConfig> = s.schemes.iter().map(|k| SchemeConfig::new(*k)).collect();
            let sweep = run_m2_sweep(
                model,
                u0,
                t0,
                t_end,
                cfg.run.h.expect("validated"),
                &schemes,
                &s.m2,
                s.m1,
                &reference,
            )?;
            w.put("m2sweep.csv", &sweep.to_csv())?;
            let th = sweep.thresholds_csv();
            w.put("thresholds.csv", &th)?;
            Ok((format!("mobility max: {:.6}\n{th}", sweep.mobility_max), None))
        }
        ExperimentKind::Stabmap => {
            let s = cfg.stabmap.as_ref().expect("validated");
            let spec = StabilityMapSpec {
                scheme: cfg.run.scheme_config(),
                base_split: cfg.split,
                param: s.param,
                h: s.h(),
                values: s.values(),
                steps: s.steps,
                energy_tol: cfg.run.energy_tol,
            };
            let map = run_stability_map(model, u0, t0, &spec)?;
            w.put("stability_map.csv", &map.to_csv())?;
            let boundary = map.boundary_csv();
            w.put("boundary.csv", &boundary)?;
            w.put("cells.csv", &map.digests_csv())?;
            let mut summary = boundary;
            let viol = map.monotonicity_violations();
            if !viol.is_empty() {
                summary.push_str(&format!("non-monotone rows (h index): {viol:?}\n"));
            }
            Ok((summary, None))
        }
    }
}
