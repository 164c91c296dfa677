//! Reproduction harness: initial conditions, convergence studies, fixed-h
//! sweeps over the biharmonic coefficient, energy-stability maps and long
//! simulations.
//!
//! Sweep cells run on a rayon pool; results are always collected in cell
//! order so outputs do not depend on scheduling.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{check_energy_stability, fit_slope, l1_error, RunRecord};
use crate::error::{Error, Result};
use crate::grid::{Field, SpectralGrid};
use crate::models::{manufactured_solution, ModelPreset, PhaseFieldModel};
use crate::snapshot::{read_snapshot_on, write_snapshot};
use crate::splitting::{M2Rule, SplitConfig};
use crate::steppers::{AdvanceOptions, Integrator, SchemeConfig, SchemeKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// `mean + amp·cos(mode·Σ xᵢ)`.
    CosinePerturbed {
        mean: f64,
        amp: f64,
        #[serde(default = "one")]
        mode: f64,
    },
    /// `mean + eta·ξ` with `ξ` uniform on `(−1, 1)` per grid point.
    RandomPerturbed {
        mean: f64,
        eta: f64,
        /// Falls back to the run seed when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
    FromSnapshot {
        path: PathBuf,
    },
    /// The manufactured thin-film solution at `t0`.
    Manufactured {
        #[serde(default)]
        t0: f64,
    },
    /// `0.35 + 0.1·cos(x + y)` evolved by the configured thin-film model to
    /// `t_prep` with IMEX2, dynamic `α = 1`, step `h_prep`.
    Prepared {
        #[serde(default = "default_t_prep")]
        t_prep: f64,
        #[serde(default = "default_h_prep")]
        h_prep: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn default_t_prep() -> f64 {
    100.0
}

fn default_h_prep() -> f64 {
    0.01
}

impl InitialCondition {
    /// Builds the field; `seed` is used by `RandomPerturbed` without its own
    /// seed, `cache` by `Prepared`.
    pub fn build(
        &self,
        grid: &Arc<SpectralGrid>,
        model: &ModelPreset,
        seed: u64,
        cache: Option<&Path>,
    ) -> Result<Field> {
        match *self {
            InitialCondition::CosinePerturbed { mean, amp, mode } => Ok(cosine_perturbed(grid, mean, amp, mode)),
            InitialCondition::RandomPerturbed { mean, eta, seed: own } => {
                Ok(random_perturbed(grid, mean, eta, own.unwrap_or(seed)))
            }
            InitialCondition::FromSnapshot { ref path } => Ok(read_snapshot_on(path, grid)?.field),
            InitialCondition::Manufactured { t0 } => Ok(manufactured_solution(grid, t0)),
            InitialCondition::Prepared { t_prep, h_prep } => {
                prepare_test1_state(grid, model.epsilon(), t_prep, h_prep, cache)
            }
        }
    }
}

pub fn cosine_perturbed(grid: &Arc<SpectralGrid>, mean: f64, amp: f64, mode: f64) -> Field {
    Field::from_fn(grid, |x| mean + amp * (mode * x.iter().sum::<f64>()).cos())
}

/// Reproducible from `seed`; values are drawn in row-major order.
pub fn random_perturbed(grid: &Arc<SpectralGrid>, mean: f64, eta: f64, seed: u64) -> Field {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Field::from_fn(grid, |_| mean + eta * rng.gen_range(-1.0..1.0))
}

/// Thin-film state after `t_prep` time units from `0.35 + 0.1·cos(x + y)`.
/// With a cache path, an existing snapshot at that path on the same grid is
/// reused and a fresh result is written there.
pub fn prepare_test1_state(
    grid: &Arc<SpectralGrid>,
    epsilon: f64,
    t_prep: f64,
    h_prep: f64,
    cache: Option<&Path>,
) -> Result<Field> {
    if let Some(path) = cache {
        if path.exists() {
            if let Ok(s) = read_snapshot_on(path, grid) {
                if s.header.t == t_prep && s.header.model_name == prepared_tag(epsilon, h_prep) {
                    return Ok(s.field);
                }
            }
        }
    }
    let model = ModelPreset::ThinFilm { epsilon };
    let u0 = cosine_perturbed(grid, 0.35, 0.1, 1.0);
    let integ = Integrator {
        scheme: SchemeConfig::new(SchemeKind::Imex2),
        split: SplitConfig::dynamic(1.0),
        model: &model,
    };
    let opts = AdvanceOptions {
        sample_every: usize::MAX,
        track_energy: false,
        ..AdvanceOptions::default()
    };
    let rec = integ
        .advance(u0, 0.0, t_prep, h_prep, &opts, &mut |_| {})?
        .into_result()?;
    if let Some(path) = cache {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        write_snapshot(&rec.final_state, t_prep, &prepared_tag(epsilon, h_prep), path)?;
    }
    Ok(rec.final_state)
}

fn prepared_tag(epsilon: f64, h_prep: f64) -> String {
    format!("thin_film(eps={epsilon}) prepared with IMEX2 h={h_prep}")
}

/// Where reference solutions come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSpec {
    /// The manufactured solution (forced thin film only).
    Manufactured,
    /// Richardson extrapolation of two runs at `h_fine` and `h_fine/2`.
    Richardson { h_fine: f64, scheme: SchemeKind },
}

/// Reference state at `t_end` for a run starting at `t0`.
pub fn compute_reference(
    spec: &ReferenceSpec,
    model: &dyn PhaseFieldModel,
    split: &SplitConfig,
    u0: &Field,
    t0: f64,
    t_end: f64,
) -> Result<Field> {
    match *spec {
        ReferenceSpec::Manufactured => Ok(manufactured_solution(u0.grid(), t_end)),
        ReferenceSpec::Richardson { h_fine, scheme } => {
            if t0 != 0.0 && model.forcing(u0.grid(), t0)?.is_some() {
                return Err(Error::ConfigError(
                    "Richardson references of forced models must start at t = 0".into(),
                ));
            }
            crate::diagnostics::richardson_reference(model, &SchemeConfig::new(scheme), split, u0, t_end - t0, h_fine)
        }
    }
}

/// Runs `f` on a pool with `threads` workers (all cores when `None`).
pub fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n.max(1));
    }
    let pool = b
        .build()
        .map_err(|e| Error::ConfigError(format!("cannot build thread pool: {e}")))?;
    Ok(pool.install(f))
}

fn quiet_options() -> AdvanceOptions {
    AdvanceOptions {
        sample_every: usize::MAX,
        track_energy: false,
        ..AdvanceOptions::default()
    }
}

/// One scheme/splitting pair of a convergence study.
#[derive(Debug, Clone)]
pub struct ConvergenceCase {
    pub label: String,
    pub scheme: SchemeConfig,
    pub split: SplitConfig,
}

impl ConvergenceCase {
    pub fn new(scheme: SchemeConfig, split: SplitConfig) -> Self {
        Self {
            label: format!("{} {}", scheme.label(), split_label(&split)),
            scheme,
            split,
        }
    }
}

pub fn split_label(split: &SplitConfig) -> String {
    let m2 = match split.m2 {
        M2Rule::Static(v) => format!("m2={v}"),
        M2Rule::Dynamic(a) => format!("alpha={a}"),
    };
    let mut s = m2;
    if split.m1 != 0.0 {
        let _ = write!(s, " m1={}", split.m1);
    }
    if split.m0 != 0.0 {
        let _ = write!(s, " m0={}", split.m0);
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergencePoint {
    pub case: usize,
    pub h: f64,
    /// `f64::INFINITY` for failed runs.
    pub error: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub cases: Vec<ConvergenceCase>,
    pub h: Vec<f64>,
    pub points: Vec<ConvergencePoint>,
}

impl ConvergenceTable {
    pub fn errors(&self, case: usize) -> Vec<(f64, f64)> {
        self.points
            .iter()
            .filter(|p| p.case == case)
            .map(|p| (p.h, p.error))
            .collect()
    }

    /// Fitted order over the points with `h_min ≤ h ≤ h_max`.
    pub fn slope_in(&self, case: usize, h_min: f64, h_max: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .errors(case)
            .into_iter()
            .filter(|&(h, _)| h >= h_min * (1.0 - 1e-12) && h <= h_max * (1.0 + 1e-12))
            .collect();
        fit_slope(&pts)
    }

    pub fn slope(&self, case: usize) -> Option<f64> {
        fit_slope(&self.errors(case))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("case,h,error\n");
        for p in &self.points {
            let _ = writeln!(s, "{},{:.16e},{:.16e}", self.cases[p.case].label, p.h, p.error);
        }
        s
    }
}

/// Advances every case at every `h` to `t_end` and measures the L¹ error
/// against `reference`. Failed runs get an infinite error.
pub fn run_convergence(
    model: &dyn PhaseFieldModel,
    u0: &Field,
    t0: f64,
    t_end: f64,
    cases: &[ConvergenceCase],
    h_list: &[f64],
    reference: &Field,
) -> Result<ConvergenceTable> {
    if cases.is_empty() || h_list.is_empty() {
        return Err(Error::ConfigError(
            "convergence study needs cases and step sizes".into(),
        ));
    }
    let cells: Vec<(usize, f64)> = (0..cases.len())
        .flat_map(|c| h_list.iter().map(move |&h| (c, h)))
        .collect();
    let opts = quiet_options();
    let results: Vec<Result<ConvergencePoint>> = cells
        .par_iter()
        .map(|&(c, h)| {
            let integ = Integrator {
                scheme: cases[c].scheme,
                split: cases[c].split,
                model,
            };
            let rec = integ.advance(u0.clone(), t0, t_end, h, &opts, &mut |_| {})?;
            let error = if rec.failed() {
                f64::INFINITY
            } else {
                let e = l1_error(&rec.final_state, reference)?;
                if e.is_finite() {
                    e
                } else {
                    f64::INFINITY
                }
            };
            Ok(ConvergencePoint { case: c, h, error })
        })
        .collect();
    Ok(ConvergenceTable {
        cases: cases.to_vec(),
        h: h_list.to_vec(),
        points: results.into_iter().collect::<Result<_>>()?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct M2SweepRow {
    pub scheme: String,
    pub m2: f64,
    pub alpha_bar: f64,
    /// `f64::INFINITY` when the run failed.
    pub error: f64,
    pub unstable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct M2Threshold {
    pub scheme: String,
    /// Midpoint between the last stable and the first unstable sample.
    pub m2_star: Option<f64>,
    /// Half the spacing of the bracketing samples.
    pub uncertainty: f64,
    pub alpha_star: Option<f64>,
    /// Places where the error increases with m2 above the threshold by more
    /// than 1 %.
    pub monotonicity_violations: usize,
}

#[derive(Debug, Clone)]
pub struct M2Sweep {
    pub h: f64,
    /// Largest mobility along the run at the largest m2 of the first scheme.
    pub mobility_max: f64,
    pub rows: Vec<M2SweepRow>,
    pub thresholds: Vec<M2Threshold>,
}

impl M2Sweep {
    pub fn threshold(&self, scheme: &str) -> Option<&M2Threshold> {
        self.thresholds.iter().find(|t| t.scheme == scheme)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("scheme,m2,alpha_bar,error,unstable\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.16e},{:.16e},{:.16e},{}",
                r.scheme, r.m2, r.alpha_bar, r.error, r.unstable as u8
            );
        }
        s
    }

    pub fn thresholds_csv(&self) -> String {
        let mut s = String::from("scheme,m2_star,uncertainty,alpha_star,monotonicity_violations\n");
        let f = |v: Option<f64>| v.map_or("nan".to_string(), |v| format!("{v:.16e}"));
        for t in &self.thresholds {
            let _ = writeln!(
                s,
                "{},{},{:.16e},{},{}",
                t.scheme,
                f(t.m2_star),
                t.uncertainty,
                f(t.alpha_star),
                t.monotonicity_violations
            );
        }
        s
    }
}

/// Fixed-`h` sweep over static biharmonic coefficients (`m2_list`
/// descending). A run is unstable if it fails or its error exceeds the error
/// at the largest coefficient.
#[allow(clippy::too_many_arguments)]
pub fn run_m2_sweep(
    model: &dyn PhaseFieldModel,
    u0: &Field,
    t0: f64,
    t_end: f64,
    h: f64,
    schemes: &[SchemeConfig],
    m2_list: &[f64],
    m1: f64,
    reference: &Field,
) -> Result<M2Sweep> {
    if schemes.is_empty() || m2_list.is_empty() {
        return Err(Error::ConfigError("m2 sweep needs schemes and m2 values".into()));
    }
    if m2_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::ConfigError("m2 values must be strictly descending".into()));
    }
    let cells: Vec<(usize, usize)> = (0..schemes.len())
        .flat_map(|s| (0..m2_list.len()).map(move |i| (s, i)))
        .collect();
    let opts = AdvanceOptions {
        track_energy: false,
        ..AdvanceOptions::default()
    };
    let runs: Vec<Result<(f64, f64)>> = cells
        .par_iter()
        .map(|&(s, i)| {
            let integ = Integrator {
                scheme: schemes[s],
                split: SplitConfig::fixed(m2_list[i]).with_m1(m1),
                model,
            };
            let rec = integ.advance(u0.clone(), t0, t_end, h, &opts, &mut |_| {})?;
            let mmax = rec.mobility_max.iter().cloned().fold(0.0, f64::max);
            let err = if rec.failed() {
                f64::INFINITY
            } else {
                l1_error(&rec.final_state, reference)?
            };
            Ok((if err.is_finite() { err } else { f64::INFINITY }, mmax))
        })
        .collect();
    let runs: Vec<(f64, f64)> = runs.into_iter().collect::<Result<_>>()?;
    let mobility_max = runs[0].1;

    let mut rows = Vec::with_capacity(cells.len());
    let mut thresholds = Vec::with_capacity(schemes.len());
    for (s, scheme) in schemes.iter().enumerate() {
        let errs: Vec<f64> = (0..m2_list.len()).map(|i| runs[s * m2_list.len() + i].0).collect();
        let base = errs[0];
        let unstable: Vec<bool> = errs.iter().map(|&e| !e.is_finite() || e > base).collect();
        let first_bad = unstable.iter().position(|&u| u);
        let (m2_star, uncertainty) = match first_bad {
            Some(i) if i > 0 => (
                Some(0.5 * (m2_list[i - 1] + m2_list[i])),
                0.5 * (m2_list[i - 1] - m2_list[i]),
            ),
            _ => (None, f64::NAN),
        };
        let stable_end = first_bad.unwrap_or(m2_list.len());
        let violations = (1..stable_end).filter(|&i| errs[i] > 1.01 * errs[i - 1]).count();
        thresholds.push(M2Threshold {
            scheme: scheme.label(),
            m2_star,
            uncertainty,
            alpha_star: m2_star.map(|m| m / mobility_max),
            monotonicity_violations: violations,
        });
        for (i, &m2) in m2_list.iter().enumerate() {
            rows.push(M2SweepRow {
                scheme: scheme.label(),
                m2,
                alpha_bar: m2 / mobility_max,
                error: errs[i],
                unstable: unstable[i],
            });
        }
    }
    Ok(M2Sweep {
        h,
        mobility_max,
        rows,
        thresholds,
    })
}

/// Splitting parameter varied along the second map axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapParam {
    /// Second-order coefficient `M₁`.
    M1,
    /// Dynamic ratio `α`.
    Alpha,
}

impl MapParam {
    pub fn apply(&self, base: &SplitConfig, value: f64) -> SplitConfig {
        match self {
            MapParam::M1 => SplitConfig { m1: value, ..*base },
            MapParam::Alpha => SplitConfig {
                m2: M2Rule::Dynamic(value),
                ..*base
            },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MapParam::M1 => "m1",
            MapParam::Alpha => "alpha",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StabilityMapSpec {
    pub scheme: SchemeConfig,
    pub base_split: SplitConfig,
    pub param: MapParam,
    pub h: Vec<f64>,
    pub values: Vec<f64>,
    /// Steps per cell, independent of `h`.
    pub steps: usize,
    pub energy_tol: f64,
}

#[derive(Debug, Clone)]
pub struct StabilityMap {
    pub param: MapParam,
    pub h: Vec<f64>,
    pub values: Vec<f64>,
    /// `stable[i][j]` for `h[i]` and `values[j]`.
    pub stable: Vec<Vec<bool>>,
    /// SHA-256 of each cell's diagnostics CSV.
    pub digests: Vec<Vec<String>>,
    /// Steps completed by each cell before it stopped.
    pub steps_done: Vec<Vec<usize>>,
}

impl StabilityMap {
    /// Per `h`, the smallest sampled value from which every larger value is
    /// stable.
    pub fn boundary(&self) -> Vec<Option<f64>> {
        let order = sorted_indices(&self.values);
        self.stable
            .iter()
            .map(|row| {
                let mut edge = None;
                for &j in order.iter().rev() {
                    if row[j] {
                        edge = Some(self.values[j]);
                    } else {
                        break;
                    }
                }
                edge
            })
            .collect()
    }

    /// Rows (by `h` index) where stability is not monotone in the parameter.
    pub fn monotonicity_violations(&self) -> Vec<usize> {
        let order = sorted_indices(&self.values);
        self.stable
            .iter()
            .enumerate()
            .filter(|(_, row)| order.windows(2).any(|w| row[w[0]] && !row[w[1]]))
            .map(|(i, _)| i)
            .collect()
    }

    /// Largest `h` whose cell at `values[j]` is stable.
    pub fn max_stable_h(&self, j: usize) -> Option<f64> {
        self.h
            .iter()
            .zip(&self.stable)
            .filter(|(_, row)| row[j])
            .map(|(&h, _)| h)
            .fold(None, |m: Option<f64>, h| Some(m.map_or(h, |m| m.max(h))))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("h");
        for v in &self.values {
            let _ = write!(s, ",{}={:.16e}", self.param.name(), v);
        }
        s.push('\n');
        for (h, row) in self.h.iter().zip(&self.stable) {
            let _ = write!(s, "{h:.16e}");
            for &ok in row {
                let _ = write!(s, ",{}", ok as u8);
            }
            s.push('\n');
        }
        s
    }

    pub fn boundary_csv(&self) -> String {
        let mut s = format!("h,min_stable_{}\n", self.param.name());
        for (h, b) in self.h.iter().zip(self.boundary()) {
            let b = b.map_or("nan".to_string(), |v| format!("{v:.16e}"));
            let _ = writeln!(s, "{h:.16e},{b}");
        }
        s
    }

    pub fn digests_csv(&self) -> String {
        let mut s = format!("h,{},stable,steps,sha256\n", self.param.name());
        for (i, h) in self.h.iter().enumerate() {
            for (j, v) in self.values.iter().enumerate() {
                let _ = writeln!(
                    s,
                    "{h:.16e},{v:.16e},{},{},{}",
                    self.stable[i][j] as u8, self.steps_done[i][j], self.digests[i][j]
                );
            }
        }
        s
    }
}

fn sorted_indices(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    idx
}

/// Runs one stability-map cell: `steps` steps of size `h`, stopping at the
/// first energy increase.
#[allow(clippy::too_many_arguments)]
pub fn stability_cell(
    model: &dyn PhaseFieldModel,
    u0: &Field,
    t0: f64,
    scheme: SchemeConfig,
    split: SplitConfig,
    h: f64,
    steps: usize,
    energy_tol: f64,
) -> Result<(bool, RunRecord)> {
    let integ = Integrator { scheme, split, model };
    let opts = AdvanceOptions {
        energy_tol,
        stop_on_energy_increase: true,
        ..AdvanceOptions::default()
    };
    let rec = integ.advance(u0.clone(), t0, t0 + steps as f64 * h, h, &opts, &mut |_| {})?;
    let ok = rec.steps == steps && check_energy_stability(&rec, energy_tol);
    Ok((ok, rec))
}

pub fn run_stability_map(
    model: &dyn PhaseFieldModel,
    u0: &Field,
    t0: f64,
    spec: &StabilityMapSpec,
) -> Result<StabilityMap> {
    if spec.h.is_empty() || spec.values.is_empty() || spec.steps == 0 {
        return Err(Error::ConfigError(
            "stability map needs h values, parameter values and steps".into(),
        ));
    }
    let nv = spec.values.len();
    let cells: Vec<(usize, usize)> = (0..spec.h.len()).flat_map(|i| (0..nv).map(move |j| (i, j))).collect();
    let out: Vec<Result<(bool, String, usize)>> = cells
        .par_iter()
        .map(|&(i, j)| {
            let split = spec.param.apply(&spec.base_split, spec.values[j]);
            let (ok, rec) = stability_cell(
                model,
                u0,
                t0,
                spec.scheme,
                split,
                spec.h[i],
                spec.steps,
                spec.energy_tol,
            )?;
            let mut csv = Vec::new();
            rec.write_csv(&mut csv).expect("writing to memory");
            if let Some(f) = &rec.failure {
                csv.extend_from_slice(format!("# failure at step {}: {}\n", f.step, f.reason()).as_bytes());
            }
            let digest = format!("{:x}", Sha256::digest(&csv));
            Ok((ok, digest, rec.steps))
        })
        .collect();
    let out: Vec<(bool, String, usize)> = out.into_iter().collect::<Result<_>>()?;
    let mut stable = vec![vec![false; nv]; spec.h.len()];
    let mut digests = vec![vec![String::new(); nv]; spec.h.len()];
    let mut steps_done = vec![vec![0; nv]; spec.h.len()];
    for ((i, j), (ok, d, n)) in cells.into_iter().zip(out) {
        stable[i][j] = ok;
        digests[i][j] = d;
        steps_done[i][j] = n;
    }
    Ok(StabilityMap {
        param: spec.param,
        h: spec.h.clone(),
        values: spec.values.clone(),
        stable,
        digests,
        steps_done,
    })
}

/// `count` values spaced evenly in `log10` from `from` to `to`.
pub fn log_space(from: f64, to: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![from],
        _ => {
            let (a, b) = (from.log10(), to.log10());
            (0..count)
                .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
                .collect()
        }
    }
}

/// `count` evenly spaced values from `from` to `to`.
pub fn lin_space(from: f64, to: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![from],
        _ => (0..count)
            .map(|i| from + (to - from) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone)]
pub struct SimulateSpec {
    pub scheme: SchemeConfig,
    pub split: SplitConfig,
    pub t0: f64,
    pub t_end: f64,
    pub h: f64,
    pub snapshot_times: Vec<f64>,
    pub sample_every: usize,
    pub energy_tol: f64,
}

#[derive(Debug)]
pub struct SimulateOutcome {
    pub record: RunRecord,
    pub snapshots: Vec<(f64, PathBuf)>,
}

/// Advances `u0`, writing the initial state and the first state at or after
/// each requested snapshot time into `out_dir`.
pub fn run_simulate(
    model: &dyn PhaseFieldModel,
    u0: Field,
    spec: &SimulateSpec,
    out_dir: Option<&Path>,
) -> Result<SimulateOutcome> {
    let integ = Integrator {
        scheme: spec.scheme,
        split: spec.split,
        model,
    };
    let opts = AdvanceOptions {
        sample_every: spec.sample_every,
        energy_tol: spec.energy_tol,
        ..AdvanceOptions::default()
    };
    let mut pending: Vec<f64> = spec
        .snapshot_times
        .iter()
        .copied()
        .filter(|&t| t > spec.t0 && t <= spec.t_end)
        .collect();
    pending.sort_by(f64::total_cmp);
    pending.reverse();
    let slack = 1e-9 * spec.h.max(1e-300);
    let mut snapshots = Vec::new();
    let mut io_error: Option<Error> = None;
    let name = model.name().to_owned();
    let mut observer = |info: &crate::steppers::StepInfo| {
        let due = info.step == 0 || pending.last().is_some_and(|&ts| info.t >= ts - slack);
        if !due {
            return;
        }
        while pending.last().is_some_and(|&ts| info.t >= ts - slack) {
            pending.pop();
        }
        if let Some(dir) = out_dir {
            let path = dir.join(format!("snapshot_{:04}.snap", snapshots.len()));
            if let Err(e) = write_snapshot(info.u, info.t, &name, &path) {
                io_error.get_or_insert(e);
            }
            snapshots.push((info.t, path));
        } else {
            snapshots.push((info.t, PathBuf::new()));
        }
    };
    let record = integ.advance(u0, spec.t0, spec.t_end, spec.h, &opts, &mut observer)?;
    if let Some(e) = io_error {
        return Err(e);
    }
    Ok(SimulateOutcome { record, snapshots })
}
