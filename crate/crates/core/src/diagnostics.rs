//! Run observables, the discrete energy-stability predicate and the L¹ error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::models::{energy, mass, mobility_max, PhaseFieldModel};
use crate::splitting::SplitConfig;
use crate::steppers::{AdvanceOptions, Integrator, SchemeConfig};

/// Default relative tolerance for `E(U_{n+1}) ≤ E(Uₙ) + tol·(1 + |E(Uₙ)|)`.
pub const ENERGY_TOL: f64 = 1e-12;

pub const CSV_HEADER: &str = "t,energy,mass,mobility_max,umin,umax";

/// First step error of a run.
#[derive(Debug)]
pub struct Failure {
    pub step: usize,
    pub time: f64,
    pub error: Error,
}

impl Failure {
    pub fn reason(&self) -> String {
        self.error.to_string()
    }
}

/// Sampled diagnostics of one run. All series share one length.
#[derive(Debug)]
pub struct RunRecord {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub mass: Vec<f64>,
    pub mobility_max: Vec<f64>,
    pub umin: Vec<f64>,
    pub umax: Vec<f64>,
    /// Tolerance used for `energy_monotone`.
    pub energy_tol: f64,
    /// Energy inequality held between every pair of consecutive steps,
    /// sampled or not.
    pub energy_monotone: bool,
    pub failure: Option<Failure>,
    /// Last successfully computed state.
    pub final_state: Field,
    pub final_time: f64,
    pub steps: usize,
    pub fex_evals: usize,
    /// Steps whose fixed-point residuals failed to decrease monotonically.
    pub residual_warnings: usize,
}

/// Diagnostics of a single state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub energy: f64,
    pub mass: f64,
    pub mobility_max: f64,
    pub umin: f64,
    pub umax: f64,
}

impl Sample {
    /// Sample with the energy left as NaN.
    pub fn of_without_energy(model: &dyn PhaseFieldModel, u: &Field, t: f64) -> Self {
        Self {
            t,
            energy: f64::NAN,
            mass: mass(u),
            mobility_max: mobility_max(model, u),
            umin: u.min(),
            umax: u.max(),
        }
    }

    /// Non-finite energies are recorded as NaN rather than rejected.
    pub fn of(model: &dyn PhaseFieldModel, u: &Field, t: f64) -> Self {
        Self {
            t,
            energy: energy(model, u).unwrap_or(f64::NAN),
            mass: mass(u),
            mobility_max: mobility_max(model, u),
            umin: u.min(),
            umax: u.max(),
        }
    }
}

impl RunRecord {
    pub(crate) fn new(first: Sample, state: Field, energy_tol: f64) -> Self {
        let mut r = Self {
            times: Vec::new(),
            energy: Vec::new(),
            mass: Vec::new(),
            mobility_max: Vec::new(),
            umin: Vec::new(),
            umax: Vec::new(),
            energy_tol,
            energy_monotone: first.energy.is_finite(),
            failure: None,
            final_time: first.t,
            final_state: state,
            steps: 0,
            fex_evals: 0,
            residual_warnings: 0,
        };
        r.push(first);
        r
    }

    pub(crate) fn push(&mut self, s: Sample) {
        self.times.push(s.t);
        self.energy.push(s.energy);
        self.mass.push(s.mass);
        self.mobility_max.push(s.mobility_max);
        self.umin.push(s.umin);
        self.umax.push(s.umax);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_sample(&self) -> Sample {
        let i = self.len() - 1;
        Sample {
            t: self.times[i],
            energy: self.energy[i],
            mass: self.mass[i],
            mobility_max: self.mobility_max[i],
            umin: self.umin[i],
            umax: self.umax[i],
        }
    }

    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    /// Converts a recorded failure into `Error::StepFailed`.
    pub fn into_result(self) -> Result<RunRecord> {
        match self.failure {
            Some(Failure { step, time, error }) => Err(Error::StepFailed {
                step,
                time,
                source: Box::new(error),
            }),
            None => Ok(self),
        }
    }

    /// Largest `|mass(t) − mass(t₀)| / |mass(t₀)|` over the samples.
    pub fn relative_mass_drift(&self) -> f64 {
        let m0 = self.mass[0];
        let scale = if m0 == 0.0 { 1.0 } else { m0.abs() };
        self.mass.iter().fold(0.0, |d, m| d.max((m - m0).abs() / scale))
    }

    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                self.times[i], self.energy[i], self.mass[i], self.mobility_max[i], self.umin[i], self.umax[i]
            )?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_csv(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))
    }
}

/// `E_{k+1} ≤ E_k + tol·(1 + |E_k|)`; NaN on either side fails.
pub fn energy_step_ok(prev: f64, next: f64, tol: f64) -> bool {
    next <= prev + tol * (1.0 + prev.abs())
}

/// True iff the run did not fail and no recorded consecutive energy pair
/// increases by more than the tolerance.
pub fn check_energy_stability(record: &RunRecord, tol: f64) -> bool {
    if record.failed() || record.energy.iter().any(|e| !e.is_finite()) {
        return false;
    }
    if !record.energy_monotone && tol <= record.energy_tol {
        return false;
    }
    energy_series_ok(&record.energy, tol)
}

pub fn energy_series_ok(energy: &[f64], tol: f64) -> bool {
    energy.iter().all(|e| e.is_finite()) && energy.windows(2).all(|w| energy_step_ok(w[0], w[1], tol))
}

/// `∫ |u − u_ref| dx` by uniform-cell quadrature.
pub fn l1_error(u: &Field, u_ref: &Field) -> Result<f64> {
    u.check_same_grid(u_ref)?;
    let sum: f64 = u.values().iter().zip(u_ref.values()).map(|(a, b)| (a - b).abs()).sum();
    Ok(sum * u.grid().cell_volume())
}

/// Extrapolates runs at `h_fine` and `h_fine/2` from `t = 0` to `t_end`
/// using the scheme's nominal order.
pub fn richardson_reference(
    model: &dyn PhaseFieldModel,
    scheme: &SchemeConfig,
    split: &SplitConfig,
    u0: &Field,
    t_end: f64,
    h_fine: f64,
) -> Result<Field> {
    let ratio = t_end / h_fine;
    if h_fine.is_nan() || h_fine <= 0.0 || (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::ConfigError(format!(
            "h_fine = {h_fine} does not divide t_end = {t_end}"
        )));
    }
    let integ = Integrator {
        scheme: *scheme,
        split: *split,
        model,
    };
    let opts = AdvanceOptions {
        sample_every: usize::MAX,
        track_energy: false,
        ..AdvanceOptions::default()
    };
    let coarse = integ
        .advance(u0.clone(), 0.0, t_end, h_fine, &opts, &mut |_| {})?
        .into_result()?;
    let fine = integ
        .advance(u0.clone(), 0.0, t_end, 0.5 * h_fine, &opts, &mut |_| {})?
        .into_result()?;
    let q = 2f64.powi(scheme.order() as i32);
    Ok(fine
        .final_state
        .lin_comb(q / (q - 1.0), &coarse.final_state, -1.0 / (q - 1.0)))
}

/// Least-squares slope of `log(err)` against `log(h)`; points with
/// nonpositive or non-finite entries are skipped.
pub fn fit_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(h, e)| *h > 0.0 && *e > 0.0 && h.is_finite() && e.is_finite())
        .map(|(h, e)| (h.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}
