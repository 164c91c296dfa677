//! Stabilizing linear operator `F_im(u) = −M₀u + M₁Δu − M₂Δ²u` and the
//! explicit remainder `F_ex = F − F_im`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, SpectralGrid};
use crate::models::{mobility_max, rhs_hat, PhaseFieldModel};

/// How the biharmonic coefficient is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum M2Rule {
    /// Fixed value.
    Static(f64),
    /// `α · max|M(Uₙ)|`, re-evaluated at the start of every step.
    #[serde(rename = "dynamic_alpha")]
    Dynamic(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default)]
    pub m0: f64,
    #[serde(default)]
    pub m1: f64,
    pub m2: M2Rule,
}

impl SplitConfig {
    pub fn fixed(m2: f64) -> Self {
        Self {
            m0: 0.0,
            m1: 0.0,
            m2: M2Rule::Static(m2),
        }
    }

    pub fn dynamic(alpha: f64) -> Self {
        Self {
            m0: 0.0,
            m1: 0.0,
            m2: M2Rule::Dynamic(alpha),
        }
    }

    pub fn with_m1(mut self, m1: f64) -> Self {
        self.m1 = m1;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(Error::ConfigError(format!(
                "{what} must be finite and nonnegative, got {v}"
            )))
        };
        if !(self.m0.is_finite() && self.m0 >= 0.0) {
            return bad("m0", self.m0);
        }
        if !(self.m1.is_finite() && self.m1 >= 0.0) {
            return bad("m1", self.m1);
        }
        match self.m2 {
            M2Rule::Static(v) if !(v.is_finite() && v >= 0.0) => bad("m2.static", v),
            M2Rule::Dynamic(a) if !(a.is_finite() && a > 0.0) => Err(Error::ConfigError(format!(
                "m2.dynamic_alpha must be finite and positive, got {a}"
            ))),
            _ => Ok(()),
        }
    }

    /// `M₀ + M₁k² + m2·k⁴` at spectral index `i`.
    #[inline]
    pub(crate) fn symbol(&self, grid: &SpectralGrid, m2: f64, i: usize) -> f64 {
        self.m0 + self.m1 * grid.ksq()[i] + m2 * grid.k4()[i]
    }
}

/// The biharmonic coefficient used for a step starting at `u`.
///
/// `Static(0)` is accepted as an explicit baseline; a dynamic rule that
/// resolves to a nonpositive value while the mobility is nonzero is rejected.
pub fn resolve_m2(cfg: &SplitConfig, model: &dyn PhaseFieldModel, u: &Field) -> Result<f64> {
    cfg.validate()?;
    match cfg.m2 {
        M2Rule::Static(v) => Ok(v),
        M2Rule::Dynamic(alpha) => {
            let mmax = mobility_max(model, u);
            let m2 = alpha * mmax;
            if !m2.is_finite() {
                return Err(Error::BlowupDetected("non-finite mobility maximum".into()));
            }
            if m2 <= 0.0 && mmax > 0.0 {
                return Err(Error::ConfigError(format!("resolved m2 = {m2} is not positive")));
            }
            Ok(m2)
        }
    }
}

pub fn apply_f_im(cfg: &SplitConfig, m2: f64, u: &Field) -> Result<Field> {
    u.check_finite()?;
    let grid = u.grid();
    let mut hat = vec![Complex64::new(0.0, 0.0); grid.spectral_len()];
    grid.forward_raw(u.values(), &mut hat);
    for (i, c) in hat.iter_mut().enumerate() {
        *c *= -cfg.symbol(grid, m2, i);
    }
    let mut out = Field::zeros(grid);
    grid.inverse_raw(&mut hat, out.values_mut());
    Ok(out)
}

/// Spectral `F̂_ex(u)`; fills `u_hat` with `û` and `out` with `F̂(u) − F̂_im(u)`.
pub(crate) fn f_ex_hat(
    cfg: &SplitConfig,
    m2: f64,
    model: &dyn PhaseFieldModel,
    u: &Field,
    t: f64,
    u_hat: &mut [Complex64],
    out: &mut [Complex64],
) -> Result<()> {
    rhs_hat(model, u, t, u_hat, out)?;
    let grid = u.grid();
    for (i, (o, c)) in out.iter_mut().zip(u_hat.iter()).enumerate() {
        *o += cfg.symbol(grid, m2, i) * c;
    }
    Ok(())
}

pub fn apply_f_ex(cfg: &SplitConfig, m2: f64, model: &dyn PhaseFieldModel, u: &Field, t: f64) -> Result<Field> {
    let grid = u.grid();
    let mut u_hat = vec![Complex64::new(0.0, 0.0); grid.spectral_len()];
    let mut out = u_hat.clone();
    f_ex_hat(cfg, m2, model, u, t, &mut u_hat, &mut out)?;
    let mut f = Field::zeros(grid);
    grid.inverse_raw(&mut out, f.values_mut());
    Ok(f)
}

/// In-place spectral solve `v̂ = r̂ / (1 + h·w·(M₀ + M₁k² + m2·k⁴))`.
pub(crate) fn implicit_solve_hat(
    cfg: &SplitConfig,
    grid: &SpectralGrid,
    m2: f64,
    rhs: &mut [Complex64],
    weight: f64,
    h: f64,
) {
    let hw = h * weight;
    for (i, c) in rhs.iter_mut().enumerate() {
        *c /= 1.0 + hw * cfg.symbol(grid, m2, i);
    }
}

/// Solves `v − h·w·F_im(v) = rhs`.
pub fn implicit_solve(cfg: &SplitConfig, m2: f64, rhs: &Field, weight: f64, h: f64) -> Result<Field> {
    rhs.check_finite()?;
    let grid = rhs.grid();
    let mut hat = vec![Complex64::new(0.0, 0.0); grid.spectral_len()];
    grid.forward_raw(rhs.values(), &mut hat);
    implicit_solve_hat(cfg, grid, m2, &mut hat, weight, h);
    let mut out = Field::zeros(grid);
    grid.inverse_raw(&mut hat, out.values_mut());
    Ok(out)
}

/// `σ(k) = 1 − h c0 k⁴ / (1 + h m2 k⁴)`.
pub fn amplification_factor(m2: f64, c0: f64, h: f64, k: f64) -> f64 {
    let s = h * k.powi(4);
    1.0 - c0 * s / (1.0 + m2 * s)
}

/// `max_{0 ≤ k ≤ kmax} |σ(k)|`. σ decreases monotonically in k from σ(0) = 1,
/// so the maximum is attained at one of the end points.
pub fn amplification_bound(m2: f64, c0: f64, h: f64, kmax: f64) -> f64 {
    amplification_factor(m2, c0, h, kmax).abs().max(1.0)
}

/// Largest wavenumber magnitude resolved on `grid`.
pub fn grid_kmax(grid: &SpectralGrid) -> f64 {
    grid.ksq().iter().fold(0.0f64, |m, &v| m.max(v)).sqrt()
}
