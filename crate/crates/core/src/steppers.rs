//! Biharmonic-modified time steppers: fixed-point backward Euler (BE_J),
//! Crank-Nicolson (CN_J) and the two IMEX Runge-Kutta schemes.
//!
//! Every implicit stage solves `v − h·w·F_im(v) = r` diagonally in spectral
//! space. Forcing terms are evaluated at the time each stage approximates:
//! `tₙ` for `Uₙ`, `tₙ + h` for fixed-point iterates and the first IMEX1
//! stage, `tₙ` for the second IMEX1 stage and `tₙ + γh` for the IMEX2 stage.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{energy_step_ok, Failure, RunRecord, Sample, ENERGY_TOL};
use crate::error::{Error, Result};
use crate::grid::{Field, SpectralGrid};
use crate::models::{check_admissible, PhaseFieldModel};
use crate::splitting::{f_ex_hat, implicit_solve_hat, resolve_m2, SplitConfig};

/// `γ = 1 − 1/√2`.
pub const IMEX2_GAMMA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;
/// `δ = −1/√2`.
pub const IMEX2_DELTA: f64 = -std::f64::consts::FRAC_1_SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SchemeKind {
    Be { j: usize },
    Cn { j: usize },
    Imex1,
    Imex2,
}

/// Starting guess `U₍₀₎` of the fixed-point iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialIterate {
    /// `U₍₀₎ = Uₙ`.
    #[default]
    Previous,
    /// `U₍₀₎ = 2Uₙ − Uₙ₋₁` once a previous step exists.
    Extrapolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchemeConfig {
    pub kind: SchemeKind,
    pub initial_iterate: InitialIterate,
}

impl SchemeConfig {
    pub fn new(kind: SchemeKind) -> Self {
        Self {
            kind,
            initial_iterate: InitialIterate::Previous,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SchemeKind::Be { j: 0 } | SchemeKind::Cn { j: 0 } => {
                Err(Error::ConfigError("iteration count j must be at least 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// Nominal order of accuracy.
    pub fn order(&self) -> u32 {
        match self.kind {
            SchemeKind::Be { .. } | SchemeKind::Cn { j: 1 } => 1,
            SchemeKind::Cn { .. } | SchemeKind::Imex1 | SchemeKind::Imex2 => 2,
        }
    }

    /// Short name such as `BE4` or `IMEX2`.
    pub fn label(&self) -> String {
        match self.kind {
            SchemeKind::Be { j } => format!("BE{j}"),
            SchemeKind::Cn { j } => format!("CN{j}"),
            SchemeKind::Imex1 => "IMEX1".into(),
            SchemeKind::Imex2 => "IMEX2".into(),
        }
    }

    /// Explicit-operator evaluations per step.
    pub fn fex_evals(&self) -> usize {
        match self.kind {
            SchemeKind::Be { j } => j,
            SchemeKind::Cn { j } => j + 1,
            SchemeKind::Imex1 => 3,
            SchemeKind::Imex2 => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub u_next: Field,
    pub t_next: f64,
    pub fex_evals: usize,
    /// `max|U₍ⱼ₎ − U₍ⱼ₋₁₎|` per fixed-point iteration; empty for IMEX schemes.
    pub iterate_residuals: Vec<f64>,
    /// Set when the residuals fail to decrease monotonically.
    pub residual_warning: bool,
    /// Biharmonic coefficient used for the whole step.
    pub m2: f64,
}

fn check_h(h: f64) -> Result<()> {
    if h.is_finite() && h >= 0.0 {
        Ok(())
    } else {
        Err(Error::ConfigError(format!(
            "time step must be finite and nonnegative, got {h}"
        )))
    }
}

fn zeros(grid: &SpectralGrid) -> Vec<Complex64> {
    vec![Complex64::new(0.0, 0.0); grid.spectral_len()]
}

/// Inverse transform that consumes `hat`, then checks admissibility.
fn finish(model: &dyn PhaseFieldModel, u: &Field, hat: &mut [Complex64]) -> Result<Field> {
    let grid = u.grid();
    let mut out = Field::zeros(grid);
    grid.inverse_raw(hat, out.values_mut());
    check_admissible(model, &out)?;
    Ok(out)
}

/// Starting iterate and the time it approximates.
fn initial_iterate(scheme: &SchemeConfig, u_n: &Field, u_prev: Option<&Field>, t: f64, h: f64) -> (Field, bool, f64) {
    match (scheme.initial_iterate, u_prev) {
        (InitialIterate::Extrapolated, Some(p)) => (u_n.lin_comb(2.0, p, -1.0), false, t + h),
        _ => (u_n.clone(), true, t),
    }
}

fn residual_warning(res: &[f64]) -> bool {
    res.windows(2).any(|w| w[1] > w[0])
}

enum FixedPoint {
    Be,
    Cn,
}

#[allow(clippy::too_many_arguments)]
fn fixed_point(
    which: FixedPoint,
    scheme: &SchemeConfig,
    split: &SplitConfig,
    model: &dyn PhaseFieldModel,
    u_n: &Field,
    u_prev: Option<&Field>,
    t: f64,
    h: f64,
) -> Result<StepResult> {
    scheme.validate()?;
    check_h(h)?;
    let j_max = match scheme.kind {
        SchemeKind::Be { j } | SchemeKind::Cn { j } => j,
        _ => unreachable!("fixed-point iteration needs BE or CN"),
    };
    check_admissible(model, u_n)?;
    let grid = u_n.grid();
    let m2 = resolve_m2(split, model, u_n)?;
    let t_next = t + h;

    let mut un_hat = zeros(grid);
    grid.forward_raw(u_n.values(), &mut un_hat);
    // CN: base = ûₙ + ½h F̂(uₙ), implicit weight ½
    let (base, weight, explicit_scale) = match which {
        FixedPoint::Be => (un_hat, 1.0, h),
        FixedPoint::Cn => {
            let mut u_hat = zeros(grid);
            let mut f_hat = zeros(grid);
            crate::models::rhs_hat(model, u_n, t, &mut u_hat, &mut f_hat)?;
            let base: Vec<Complex64> = un_hat.iter().zip(&f_hat).map(|(u, f)| u + 0.5 * h * f).collect();
            (base, 0.5, 0.5 * h)
        }
    };

    let (mut iter, mut at_start, _) = initial_iterate(scheme, u_n, u_prev, t, h);
    let mut residuals = Vec::with_capacity(j_max);
    let mut u_hat = zeros(grid);
    let mut fe = zeros(grid);
    for _ in 0..j_max {
        let tj = if at_start { t } else { t_next };
        f_ex_hat(split, m2, model, &iter, tj, &mut u_hat, &mut fe)?;
        for (r, b) in fe.iter_mut().zip(&base) {
            *r = b + explicit_scale * *r;
        }
        implicit_solve_hat(split, grid, m2, &mut fe, weight, h);
        let next = finish(model, u_n, &mut fe)?;
        residuals.push(next.max_abs_diff(&iter));
        iter = next;
        at_start = false;
    }
    let warn = residual_warning(&residuals);
    Ok(StepResult {
        u_next: iter,
        t_next,
        fex_evals: scheme.fex_evals(),
        iterate_residuals: residuals,
        residual_warning: warn,
        m2,
    })
}

/// `U₍ⱼ₎ = solve(Uₙ + h·F_ex(U₍ⱼ₋₁₎), 1)` for `j = 1..J`.
pub fn step_be(
    scheme: &SchemeConfig,
    split: &SplitConfig,
    model: &dyn PhaseFieldModel,
    u_n: &Field,
    u_prev: Option<&Field>,
    t: f64,
    h: f64,
) -> Result<StepResult> {
    if !matches!(scheme.kind, SchemeKind::Be { .. }) {
        return Err(Error::ConfigError(format!("step_be called with {}", scheme.label())));
    }
    fixed_point(FixedPoint::Be, scheme, split, model, u_n, u_prev, t, h)
}

/// `U₍ⱼ₎ = solve(Uₙ + h·[½F_ex(U₍ⱼ₋₁₎) + ½F(Uₙ)], ½)` for `j = 1..J`.
pub fn step_cn(
    scheme: &SchemeConfig,
    split: &SplitConfig,
    model: &dyn PhaseFieldModel,
    u_n: &Field,
    u_prev: Option<&Field>,
    t: f64,
    h: f64,
) -> Result<StepResult> {
    if !matches!(scheme.kind, SchemeKind::Cn { .. }) {
        return Err(Error::ConfigError(format!("step_cn called with {}", scheme.label())));
    }
    fixed_point(FixedPoint::Cn, scheme, split, model, u_n, u_prev, t, h)
}

/// Three-stage scheme
/// `U₁ = solve(U₀ + hF_ex(U₀), 1)`,
/// `U₂ = solve(3/2·U₀ − ½U₁ + ½hF_ex(U₁), ½)`,
/// `U₃ = solve(U₂ + hF_ex(U₂), 1)`.
pub fn step_imex1(split: &SplitConfig, model: &dyn PhaseFieldModel, u_n: &Field, t: f64, h: f64) -> Result<StepResult> {
    check_h(h)?;
    check_admissible(model, u_n)?;
    let grid = u_n.grid();
    let m2 = resolve_m2(split, model, u_n)?;
    let mut u0_hat = zeros(grid);
    let mut uk_hat = zeros(grid);
    let mut fe = zeros(grid);

    f_ex_hat(split, m2, model, u_n, t, &mut u0_hat, &mut fe)?;
    for (r, u) in fe.iter_mut().zip(&u0_hat) {
        *r = u + h * *r;
    }
    implicit_solve_hat(split, grid, m2, &mut fe, 1.0, h);
    let u1 = finish(model, u_n, &mut fe)?;

    f_ex_hat(split, m2, model, &u1, t + h, &mut uk_hat, &mut fe)?;
    for ((r, u0), u1) in fe.iter_mut().zip(&u0_hat).zip(&uk_hat) {
        *r = 1.5 * u0 - 0.5 * u1 + 0.5 * h * *r;
    }
    implicit_solve_hat(split, grid, m2, &mut fe, 0.5, h);
    let u2 = finish(model, u_n, &mut fe)?;

    f_ex_hat(split, m2, model, &u2, t, &mut uk_hat, &mut fe)?;
    for (r, u) in fe.iter_mut().zip(&uk_hat) {
        *r = u + h * *r;
    }
    implicit_solve_hat(split, grid, m2, &mut fe, 1.0, h);
    let u3 = finish(model, u_n, &mut fe)?;

    Ok(StepResult {
        u_next: u3,
        t_next: t + h,
        fex_evals: 3,
        iterate_residuals: Vec::new(),
        residual_warning: false,
        m2,
    })
}

/// Two-stage scheme
/// `U₁ = solve(U₀ + hγF_ex(U₀), γ)`,
/// `U₂ = solve(U₀ + h[δF_ex(U₀) + (1−δ)F_ex(U₁) + (1−γ)F_im(U₁)], γ)`.
pub fn step_imex2(split: &SplitConfig, model: &dyn PhaseFieldModel, u_n: &Field, t: f64, h: f64) -> Result<StepResult> {
    check_h(h)?;
    check_admissible(model, u_n)?;
    let grid = u_n.grid();
    let m2 = resolve_m2(split, model, u_n)?;
    let (g, d) = (IMEX2_GAMMA, IMEX2_DELTA);
    let mut u0_hat = zeros(grid);
    let mut u1_hat = zeros(grid);
    let mut fe0 = zeros(grid);
    let mut fe1 = zeros(grid);

    f_ex_hat(split, m2, model, u_n, t, &mut u0_hat, &mut fe0)?;
    let mut r: Vec<Complex64> = u0_hat.iter().zip(&fe0).map(|(u, f)| u + h * g * f).collect();
    implicit_solve_hat(split, grid, m2, &mut r, g, h);
    let u1 = finish(model, u_n, &mut r)?;

    f_ex_hat(split, m2, model, &u1, t + g * h, &mut u1_hat, &mut fe1)?;
    for (i, r) in r.iter_mut().enumerate() {
        let f_im = -split.symbol(grid, m2, i) * u1_hat[i];
        *r = u0_hat[i] + h * (d * fe0[i] + (1.0 - d) * fe1[i] + (1.0 - g) * f_im);
    }
    implicit_solve_hat(split, grid, m2, &mut r, g, h);
    let u2 = finish(model, u_n, &mut r)?;

    Ok(StepResult {
        u_next: u2,
        t_next: t + h,
        fex_evals: 2,
        iterate_residuals: Vec::new(),
        residual_warning: false,
        m2,
    })
}

/// Runtime knobs for [`Integrator::advance`].
#[derive(Debug, Clone)]
pub struct AdvanceOptions {
    /// Record a sample every this many steps; the final state is always sampled.
    pub sample_every: usize,
    /// Tolerance of the per-step energy inequality.
    pub energy_tol: f64,
    /// Largest number of steps a run may request.
    pub max_steps: usize,
    /// End the run (without failure) at the first energy increase.
    pub stop_on_energy_increase: bool,
    /// Evaluate the energy after every step.
    pub track_energy: bool,
}

impl Default for AdvanceOptions {
    fn default() -> Self {
        Self {
            sample_every: 1,
            energy_tol: ENERGY_TOL,
            max_steps: 100_000_000,
            stop_on_energy_increase: false,
            track_energy: true,
        }
    }
}

/// State handed to observers after every completed step (and once for the
/// initial state with `step = 0`).
pub struct StepInfo<'a> {
    pub step: usize,
    pub t: f64,
    pub u: &'a Field,
    /// NaN when energy tracking is off.
    pub energy: f64,
    pub energy_ok: bool,
}

/// Scheme, splitting and model bundled for repeated stepping.
#[derive(Clone, Copy)]
pub struct Integrator<'a> {
    pub scheme: SchemeConfig,
    pub split: SplitConfig,
    pub model: &'a dyn PhaseFieldModel,
}

/// Step count and final step length for a run from `t0` to `t_end`.
pub fn plan_steps(t0: f64, t_end: f64, h: f64) -> Result<(usize, f64)> {
    if !(t0.is_finite() && t_end.is_finite()) || t_end < t0 {
        return Err(Error::ConfigError(format!("invalid time window [{t0}, {t_end}]")));
    }
    if t_end == t0 {
        return Ok((0, 0.0));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::ConfigError(format!("time step must be positive, got {h}")));
    }
    let ratio = (t_end - t0) / h;
    let nearest = ratio.round();
    if nearest >= 1.0 && (ratio - nearest).abs() <= 1e-9 * ratio {
        return Ok((nearest as usize, h));
    }
    let full = ratio.floor();
    Ok((full as usize + 1, t_end - (t0 + full * h)))
}

impl<'a> Integrator<'a> {
    pub fn step(&self, u_n: &Field, u_prev: Option<&Field>, t: f64, h: f64) -> Result<StepResult> {
        match self.scheme.kind {
            SchemeKind::Be { .. } => step_be(&self.scheme, &self.split, self.model, u_n, u_prev, t, h),
            SchemeKind::Cn { .. } => step_cn(&self.scheme, &self.split, self.model, u_n, u_prev, t, h),
            SchemeKind::Imex1 => step_imex1(&self.split, self.model, u_n, t, h),
            SchemeKind::Imex2 => step_imex2(&self.split, self.model, u_n, t, h),
        }
    }

    /// Steps from `t0` to `t_end`; the last step is shortened if `h` does not
    /// divide the interval. Step errors end the run and are stored in the
    /// record together with the last good state; invalid arguments are
    /// returned as errors.
    pub fn advance(
        &self,
        u0: Field,
        t0: f64,
        t_end: f64,
        h: f64,
        opts: &AdvanceOptions,
        observer: &mut dyn FnMut(&StepInfo),
    ) -> Result<RunRecord> {
        self.scheme.validate()?;
        self.split.validate()?;
        let (n_steps, last_h) = plan_steps(t0, t_end, h)?;
        if n_steps > opts.max_steps {
            return Err(Error::ConfigError(format!(
                "{n_steps} steps exceed the budget of {}",
                opts.max_steps
            )));
        }
        check_admissible(self.model, &u0)?;
        let model = self.model;
        let first = Sample::of(model, &u0, t0);
        observer(&StepInfo {
            step: 0,
            t: t0,
            u: &u0,
            energy: first.energy,
            energy_ok: first.energy.is_finite(),
        });
        let mut rec = RunRecord::new(first, u0, opts.energy_tol);
        let keep_prev = self.scheme.initial_iterate == InitialIterate::Extrapolated;
        let sample_every = opts.sample_every.max(1);
        let (lo, hi) = model.admissible_range();
        let mut warned_range = model.positivity_floor().is_some();
        let mut prev: Option<Field> = None;
        let mut e_prev = first.energy;
        let mut t = t0;

        for k in 1..=n_steps {
            let hk = if k == n_steps { last_h } else { h };
            let out = match self.step(&rec.final_state, prev.as_ref(), t, hk) {
                Ok(out) => out,
                Err(error) => {
                    rec.failure = Some(Failure {
                        step: k,
                        time: t,
                        error,
                    });
                    rec.energy_monotone = false;
                    break;
                }
            };
            t = if k == n_steps { t_end } else { t0 + k as f64 * h };
            rec.steps = k;
            rec.fex_evals += out.fex_evals;
            if out.residual_warning {
                rec.residual_warnings += 1;
            }
            let u = out.u_next;
            if !warned_range && (u.min() < lo || u.max() > hi) {
                log::warn!(
                    "{}: solution left [{lo}, {hi}] at t = {t} (min {}, max {})",
                    model.name(),
                    u.min(),
                    u.max()
                );
                warned_range = true;
            }
            let e = if opts.track_energy {
                crate::models::energy(model, &u).unwrap_or(f64::NAN)
            } else {
                f64::NAN
            };
            let ok = !opts.track_energy || energy_step_ok(e_prev, e, opts.energy_tol);
            if !ok {
                rec.energy_monotone = false;
            }
            observer(&StepInfo {
                step: k,
                t,
                u: &u,
                energy: e,
                energy_ok: ok,
            });
            let stop = !ok && opts.stop_on_energy_increase;
            if k % sample_every == 0 || k == n_steps || stop {
                let mut s = Sample::of_without_energy(model, &u, t);
                s.energy = e;
                rec.push(s);
            }
            e_prev = e;
            let old = std::mem::replace(&mut rec.final_state, u);
            if keep_prev {
                prev = Some(old);
            }
            rec.final_time = t;
            if stop {
                break;
            }
        }
        if !opts.track_energy {
            rec.energy_monotone = false;
        }
        Ok(rec)
    }
}
