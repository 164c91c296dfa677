//! Variable-mobility fourth-order models
//! `u_t = ΔG(u) − ∇·(κ M(u) ∇Δu) + f(x, t)` with `G′ = M·W″`.
//!
//! `κ` is the gradient-energy coefficient: the chemical potential is
//! `w = W′(u) − κΔu` and the energy density `W(u) + κ/2 |∇u|²`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{apply_laplacian, Field, SpectralGrid};

pub trait PhaseFieldModel: Send + Sync {
    fn name(&self) -> &str;
    fn mobility(&self, u: f64) -> f64;
    fn mobility_is_constant(&self) -> bool {
        false
    }
    fn potential(&self, u: f64) -> f64;
    fn potential_deriv(&self, u: f64) -> f64;
    fn potential_second(&self, u: f64) -> f64;
    /// `G(u) = ∫ M(u) W″(u) du`.
    fn g_fun(&self, u: f64) -> f64;
    /// `G′(u) = M(u) W″(u)`, supplied in closed form.
    fn g_deriv(&self, u: f64) -> f64;
    fn gradient_coeff(&self) -> f64 {
        1.0
    }
    /// Values at or below the floor are inadmissible.
    fn positivity_floor(&self) -> Option<f64> {
        None
    }
    /// Nominal range of physically meaningful values.
    fn admissible_range(&self) -> (f64, f64);
    /// Source term added to the right-hand side, if any.
    fn forcing(&self, _grid: &Arc<SpectralGrid>, _t: f64) -> Result<Option<Field>> {
        Ok(None)
    }
}

/// The shipped model family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelPreset {
    /// `M = ε²`, `W = (u⁴ − 2u²)/(4ε²)`, `G = u³ − u`.
    ClassicCh { epsilon: f64 },
    /// `M = u³`, `W′ = Π = ε²/u³ − ε³/u⁴`.
    ThinFilm { epsilon: f64 },
    /// `M = 1 − ω²u²`, `W = u⁴/4 − u²/2`, gradient coefficient `ε²`.
    Chvm { omega: f64, epsilon: f64 },
    /// Thin film with the source that makes `0.3 + 0.1 sin x sin y e^{t/2}`
    /// an exact solution of the semi-discrete system.
    ForcedThinFilm { epsilon: f64 },
}

impl ModelPreset {
    pub fn epsilon(&self) -> f64 {
        match *self {
            ModelPreset::ClassicCh { epsilon }
            | ModelPreset::ThinFilm { epsilon }
            | ModelPreset::Chvm { epsilon, .. }
            | ModelPreset::ForcedThinFilm { epsilon } => epsilon,
        }
    }

    fn is_thin_film(&self) -> bool {
        matches!(self, ModelPreset::ThinFilm { .. } | ModelPreset::ForcedThinFilm { .. })
    }
}

/// Manufactured solution `0.3 + 0.1 sin x sin y e^{t/2}` (only `sin x` in 1D,
/// the third coordinate unused in 3D).
pub fn manufactured_solution(grid: &Arc<SpectralGrid>, t: f64) -> Field {
    let amp = 0.1 * (0.5 * t).exp();
    Field::from_fn(grid, |x| 0.3 + amp * manufactured_shape(x))
}

/// `∂u/∂t` of [`manufactured_solution`].
pub fn manufactured_rate(grid: &Arc<SpectralGrid>, t: f64) -> Field {
    let amp = 0.05 * (0.5 * t).exp();
    Field::from_fn(grid, |x| amp * manufactured_shape(x))
}

fn manufactured_shape(x: &[f64]) -> f64 {
    if x.len() == 1 {
        x[0].sin()
    } else {
        x[0].sin() * x[1].sin()
    }
}

impl PhaseFieldModel for ModelPreset {
    fn name(&self) -> &str {
        match self {
            ModelPreset::ClassicCh { .. } => "classic_ch",
            ModelPreset::ThinFilm { .. } => "thin_film",
            ModelPreset::Chvm { .. } => "chvm",
            ModelPreset::ForcedThinFilm { .. } => "forced_thin_film",
        }
    }

    fn mobility(&self, u: f64) -> f64 {
        match *self {
            ModelPreset::ClassicCh { epsilon } => epsilon * epsilon,
            ModelPreset::ThinFilm { .. } | ModelPreset::ForcedThinFilm { .. } => u * u * u,
            ModelPreset::Chvm { omega, .. } => 1.0 - omega * omega * u * u,
        }
    }

    fn mobility_is_constant(&self) -> bool {
        matches!(self, ModelPreset::ClassicCh { .. })
    }

    fn potential(&self, u: f64) -> f64 {
        match *self {
            ModelPreset::ClassicCh { epsilon } => (u.powi(4) - 2.0 * u * u) / (4.0 * epsilon * epsilon),
            ModelPreset::ThinFilm { epsilon } | ModelPreset::ForcedThinFilm { epsilon } => {
                let e2 = epsilon * epsilon;
                -e2 / (2.0 * u * u) + e2 * epsilon / (3.0 * u.powi(3))
            }
            ModelPreset::Chvm { .. } => 0.25 * u.powi(4) - 0.5 * u * u,
        }
    }

    fn potential_deriv(&self, u: f64) -> f64 {
        match *self {
            ModelPreset::ClassicCh { epsilon } => (u.powi(3) - u) / (epsilon * epsilon),
            ModelPreset::ThinFilm { epsilon } | ModelPreset::ForcedThinFilm { epsilon } => {
                let e2 = epsilon * epsilon;
                e2 / u.powi(3) - e2 * epsilon / u.powi(4)
            }
            ModelPreset::Chvm { .. } => u.powi(3) - u,
        }
    }

    fn potential_second(&self, u: f64) -> f64 {
        match *self {
            ModelPreset::ClassicCh { epsilon } => (3.0 * u * u - 1.0) / (epsilon * epsilon),
            ModelPreset::ThinFilm { epsilon } | ModelPreset::ForcedThinFilm { epsilon } => {
                let e2 = epsilon * epsilon;
                -3.0 * e2 / u.powi(4) + 4.0 * e2 * epsilon / u.powi(5)
            }
            ModelPreset::Chvm { .. } => 3.0 * u * u - 1.0,
        }
    }

    fn g_fun(&self, u: f64) -> f64 {
        match *self {
            ModelPreset::ClassicCh { .. } => u.powi(3) - u,
            ModelPreset::ThinFilm { epsilon } | ModelPreset::ForcedThinFilm { epsilon } => {
                -4.0 * epsilon.powi(3) / u - 3.0 * epsilon * epsilon * u.ln()
            }
            // ∫ (1 − ω²u²)(3u² − 1) du
            ModelPreset::Chvm { omega, .. } => {
                let w2 = omega * omega;
                u.powi(3) - u - 0.6 * w2 * u.powi(5) + w2 * u.powi(3) / 3.0
            }
        }
    }

    fn g_deriv(&self, u: f64) -> f64 {
        match *self {
            ModelPreset::ClassicCh { .. } => 3.0 * u * u - 1.0,
            ModelPreset::ThinFilm { epsilon } | ModelPreset::ForcedThinFilm { epsilon } => {
                4.0 * epsilon.powi(3) / (u * u) - 3.0 * epsilon * epsilon / u
            }
            ModelPreset::Chvm { omega, .. } => {
                let w2 = omega * omega;
                3.0 * u * u - 1.0 - 3.0 * w2 * u.powi(4) + w2 * u * u
            }
        }
    }

    fn gradient_coeff(&self) -> f64 {
        match *self {
            ModelPreset::Chvm { epsilon, .. } => epsilon * epsilon,
            _ => 1.0,
        }
    }

    fn positivity_floor(&self) -> Option<f64> {
        self.is_thin_film().then_some(0.0)
    }

    fn admissible_range(&self) -> (f64, f64) {
        match *self {
            ModelPreset::ClassicCh { .. } => (-1.0, 1.0),
            ModelPreset::ThinFilm { epsilon } | ModelPreset::ForcedThinFilm { epsilon } => (0.5 * epsilon, 2.0),
            ModelPreset::Chvm { .. } => (-1.0, 1.0),
        }
    }

    fn forcing(&self, grid: &Arc<SpectralGrid>, t: f64) -> Result<Option<Field>> {
        let ModelPreset::ForcedThinFilm { epsilon } = *self else {
            return Ok(None);
        };
        let base = ModelPreset::ThinFilm { epsilon };
        let exact = manufactured_solution(grid, t);
        let discrete = eval_rhs(&base, &exact, t)?;
        let rate = manufactured_rate(grid, t);
        Ok(Some(rate.lin_comb(1.0, &discrete, -1.0)))
    }
}

type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// A user-supplied model given by closures.
pub struct CustomModel {
    pub name: String,
    pub mobility: ScalarFn,
    pub mobility_is_constant: bool,
    pub potential: ScalarFn,
    pub potential_deriv: ScalarFn,
    pub potential_second: ScalarFn,
    pub g_fun: ScalarFn,
    pub g_deriv: ScalarFn,
    pub gradient_coeff: f64,
    pub positivity_floor: Option<f64>,
    pub admissible_range: (f64, f64),
}

impl CustomModel {
    /// Linear model `u_t = g Δu − m Δ²u` (constant mobility `m`, quadratic `W`).
    pub fn linear(m: f64, g: f64) -> Self {
        let w2 = g / m;
        Self {
            name: "linear".into(),
            mobility: Box::new(move |_| m),
            mobility_is_constant: true,
            potential: Box::new(move |u| 0.5 * w2 * u * u),
            potential_deriv: Box::new(move |u| w2 * u),
            potential_second: Box::new(move |_| w2),
            g_fun: Box::new(move |u| g * u),
            g_deriv: Box::new(move |_| g),
            gradient_coeff: 1.0,
            positivity_floor: None,
            admissible_range: (-1.0, 1.0),
        }
    }
}

impl PhaseFieldModel for CustomModel {
    fn name(&self) -> &str {
        &self.name
    }
    fn mobility(&self, u: f64) -> f64 {
        (self.mobility)(u)
    }
    fn mobility_is_constant(&self) -> bool {
        self.mobility_is_constant
    }
    fn potential(&self, u: f64) -> f64 {
        (self.potential)(u)
    }
    fn potential_deriv(&self, u: f64) -> f64 {
        (self.potential_deriv)(u)
    }
    fn potential_second(&self, u: f64) -> f64 {
        (self.potential_second)(u)
    }
    fn g_fun(&self, u: f64) -> f64 {
        (self.g_fun)(u)
    }
    fn g_deriv(&self, u: f64) -> f64 {
        (self.g_deriv)(u)
    }
    fn gradient_coeff(&self) -> f64 {
        self.gradient_coeff
    }
    fn positivity_floor(&self) -> Option<f64> {
        self.positivity_floor
    }
    fn admissible_range(&self) -> (f64, f64) {
        self.admissible_range
    }
}

/// Finite values, and strictly above the positivity floor when one is set.
pub fn check_admissible(model: &dyn PhaseFieldModel, u: &Field) -> Result<()> {
    u.check_finite()?;
    if let Some(floor) = model.positivity_floor() {
        let (min, index) = u.argmin();
        if min <= floor {
            return Err(Error::PositivityViolation { min, index });
        }
    }
    Ok(())
}

fn blowup(what: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::BlowupDetected(format!("non-finite {what} at index {i}"))),
        None => Ok(()),
    }
}

/// Spectral right-hand side: fills `u_hat` with `û` and `out` with `F̂(u)`.
pub(crate) fn rhs_hat(
    model: &dyn PhaseFieldModel,
    u: &Field,
    t: f64,
    u_hat: &mut [Complex64],
    out: &mut [Complex64],
) -> Result<()> {
    check_admissible(model, u)?;
    let grid = u.grid().clone();
    let values = u.values();
    grid.forward_raw(values, u_hat);

    let mut phys: Vec<f64> = values.iter().map(|&v| model.g_fun(v)).collect();
    blowup("G(u)", &phys)?;
    grid.forward_raw(&phys, out);
    grid.dealias_in_place(out);
    // ΔG as ∇·∇G: with the Nyquist derivative zeroed this keeps the
    // anti-diffusive second-order part from acting on modes that the
    // fourth-order flux cannot damp.
    for (i, o) in out.iter_mut().enumerate() {
        let s: f64 = (0..grid.dim()).map(|a| grid.deriv_symbol(a)[i].powi(2)).sum();
        *o *= -s;
    }

    let kappa = model.gradient_coeff();
    let mob: Vec<f64> = values.iter().map(|&v| kappa * model.mobility(v)).collect();
    blowup("mobility", &mob)?;
    let mut work = vec![Complex64::new(0.0, 0.0); grid.spectral_len()];
    for axis in 0..grid.dim() {
        let d = grid.deriv_symbol(axis);
        // ∂_a Δu ↔ i k_a (−k²) û
        for (((w, c), &k), &s) in work.iter_mut().zip(u_hat.iter()).zip(d).zip(grid.ksq()) {
            let f = -k * s;
            *w = Complex64::new(-f * c.im, f * c.re);
        }
        grid.inverse_raw(&mut work, &mut phys);
        for (p, &m) in phys.iter_mut().zip(&mob) {
            *p *= m;
        }
        blowup("flux", &phys)?;
        grid.forward_raw(&phys, &mut work);
        grid.dealias_in_place(&mut work);
        // out −= i k_a flux̂
        for ((o, w), &k) in out.iter_mut().zip(&work).zip(d) {
            o.re += k * w.im;
            o.im -= k * w.re;
        }
    }

    if let Some(f) = model.forcing(&grid, t)? {
        blowup("forcing", f.values())?;
        grid.forward_raw(f.values(), &mut work);
        for (o, w) in out.iter_mut().zip(&work) {
            *o += w;
        }
    }
    Ok(())
}

/// `F(u) = ΔG(u) − ∇·(κ M(u) ∇Δu) + f(x, t)`.
pub fn eval_rhs(model: &dyn PhaseFieldModel, u: &Field, t: f64) -> Result<Field> {
    let grid = u.grid();
    let mut u_hat = vec![Complex64::new(0.0, 0.0); grid.spectral_len()];
    let mut f_hat = u_hat.clone();
    rhs_hat(model, u, t, &mut u_hat, &mut f_hat)?;
    let mut out = Field::zeros(grid);
    grid.inverse_raw(&mut f_hat, out.values_mut());
    Ok(out)
}

/// `w = W′(u) − κΔu`.
pub fn chemical_potential(model: &dyn PhaseFieldModel, u: &Field) -> Result<Field> {
    check_admissible(model, u)?;
    let lap = apply_laplacian(u)?;
    let kappa = model.gradient_coeff();
    let mut w = u.map(|v| model.potential_deriv(v));
    for (wi, l) in w.values_mut().iter_mut().zip(lap.values()) {
        *wi -= kappa * l;
    }
    blowup("chemical potential", w.values())?;
    Ok(w)
}

/// `∫ W(u) + κ/2 |∇u|²` by uniform-cell quadrature; the gradient term is the
/// discrete Parseval sum of the spectral gradient.
pub fn energy(model: &dyn PhaseFieldModel, u: &Field) -> Result<f64> {
    check_admissible(model, u)?;
    let grid = u.grid();
    let mut u_hat = vec![Complex64::new(0.0, 0.0); grid.spectral_len()];
    grid.forward_raw(u.values(), &mut u_hat);
    let bulk: f64 = u.values().iter().map(|&v| model.potential(v)).sum();
    let grad_sq = gradient_norm_sq(grid, &u_hat);
    let e = grid.cell_volume() * bulk + 0.5 * model.gradient_coeff() * grad_sq;
    if e.is_finite() {
        Ok(e)
    } else {
        Err(Error::BlowupDetected("non-finite energy".into()))
    }
}

/// `∫ |∇u|²` from a half-complex spectrum.
pub(crate) fn gradient_norm_sq(grid: &SpectralGrid, u_hat: &[Complex64]) -> f64 {
    let dim = grid.dim();
    let nh = grid.spectral_shape()[dim - 1];
    let mut sum = 0.0;
    for (i, c) in u_hat.iter().enumerate() {
        let j = i % nh;
        let weight = if j == 0 || j == nh - 1 { 1.0 } else { 2.0 };
        let k2: f64 = (0..dim).map(|a| grid.deriv_symbol(a)[i].powi(2)).sum();
        sum += weight * k2 * c.norm_sqr();
    }
    let n = grid.len() as f64;
    sum * grid.volume() / (n * n)
}

pub fn mass(u: &Field) -> f64 {
    u.values().iter().sum::<f64>() * u.grid().cell_volume()
}

/// `max_x |M(u(x))|`.
pub fn mobility_max(model: &dyn PhaseFieldModel, u: &Field) -> f64 {
    u.values().iter().fold(0.0, |m, &v| m.max(model.mobility(v).abs()))
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use super::*;
    use crate::grid::gradient;

    fn presets() -> Vec<ModelPreset> {
        vec![
            ModelPreset::ClassicCh { epsilon: 0.02 },
            ModelPreset::ThinFilm { epsilon: 0.1 },
            ModelPreset::Chvm {
                omega: 0.95,
                epsilon: 0.1,
            },
            ModelPreset::ForcedThinFilm { epsilon: 0.1 },
        ]
    }

    fn sample_points(model: &dyn PhaseFieldModel, count: usize) -> Vec<f64> {
        let (lo, hi) = model.admissible_range();
        (0..count)
            .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / count as f64)
            .collect()
    }

    fn central_diff(f: impl Fn(f64) -> f64, u: f64) -> f64 {
        let h = 1e-5 * u.abs().max(1e-2);
        (f(u + h) - f(u - h)) / (2.0 * h)
    }

    #[test]
    fn closed_forms_are_mutually_consistent() {
        for m in presets() {
            for u in sample_points(&m, 100) {
                let gd = m.g_deriv(u);
                assert!(
                    (gd - m.mobility(u) * m.potential_second(u)).abs() <= 1e-6 * gd.abs().max(1e-8),
                    "{} at {u}",
                    m.name()
                );
                let num = central_diff(|v| m.g_fun(v), u);
                assert!((num - gd).abs() <= 1e-6 * gd.abs().max(1.0), "{} G′ at {u}", m.name());
                let num = central_diff(|v| m.potential(v), u);
                let wp = m.potential_deriv(u);
                assert!((num - wp).abs() <= 1e-6 * wp.abs().max(1.0), "{} W′ at {u}", m.name());
                let num = central_diff(|v| m.potential_deriv(v), u);
                let ws = m.potential_second(u);
                assert!((num - ws).abs() <= 1e-6 * ws.abs().max(1.0), "{} W″ at {u}", m.name());
                assert!(m.mobility(u) >= 0.0);
            }
        }
    }

    /// Composite Simpson quadrature of M·W″, independent of the closed-form G.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            s += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn chvm_g_matches_quadrature() {
        let m = ModelPreset::Chvm {
            omega: 0.95,
            epsilon: 0.1,
        };
        for &u in &[-0.9, -0.3, 0.2, 0.55, 1.0] {
            let q = simpson(|v| m.mobility(v) * m.potential_second(v), 0.0, u, 2000);
            assert!((q - (m.g_fun(u) - m.g_fun(0.0))).abs() < 1e-12, "u = {u}");
        }
    }

    fn grid2(n: usize, l: f64) -> Arc<SpectralGrid> {
        SpectralGrid::new(&[n, n], &[l, l]).unwrap()
    }

    #[test]
    fn rhs_of_constant_state_vanishes() {
        let g = grid2(16, 12.0 * PI);
        for m in presets().into_iter().filter(|m| m.name() != "forced_thin_film") {
            let c = if m.positivity_floor().is_some() { 0.35 } else { 0.3 };
            let f = eval_rhs(&m, &Field::constant(&g, c), 0.0).unwrap();
            assert!(f.max_abs() <= 1e-12 * m.g_fun(c).abs().max(1.0), "{}", m.name());
        }
    }

    #[test]
    fn rhs_linearization_matches_dispersion_relation() {
        let l = 12.0 * PI;
        let g = grid2(32, l);
        let k = 2.0 * PI * 3.0 / l;
        for m in presets().into_iter().filter(|m| m.name() != "forced_thin_film") {
            let ubar = if m.positivity_floor().is_some() { 0.35 } else { 0.2 };
            let shape = Field::from_fn(&g, |x| (k * x[0]).cos());
            let sigma = -m.mobility(ubar) * (m.potential_second(ubar) * k * k + m.gradient_coeff() * k.powi(4));
            let mut prev = f64::INFINITY;
            for &delta in &[1e-3, 1e-4] {
                let up = shape.map(|c| ubar + delta * c);
                let dn = shape.map(|c| ubar - delta * c);
                let fp = eval_rhs(&m, &up, 0.0).unwrap();
                let fm = eval_rhs(&m, &dn, 0.0).unwrap();
                let lin = fp.lin_comb(0.5 / delta, &fm, -0.5 / delta);
                let err = lin.max_abs_diff(&shape.map(|c| sigma * c));
                assert!(err < prev, "{}", m.name());
                prev = err;
            }
            assert!(prev <= 1e-5 * sigma.abs().max(1e-3), "{}: {prev}", m.name());
        }
    }

    #[test]
    fn forced_rhs_reproduces_exact_rate() {
        let g = grid2(32, 2.0 * PI);
        let m = ModelPreset::ForcedThinFilm { epsilon: 0.1 };
        for &t in &[0.0, 0.7] {
            let u = manufactured_solution(&g, t);
            let f = eval_rhs(&m, &u, t).unwrap();
            let rate = manufactured_rate(&g, t);
            assert!(f.max_abs_diff(&rate) < 1e-12);
        }
        let f0 = eval_rhs(&m, &manufactured_solution(&g, 0.0), 0.0).unwrap();
        let analytic = Field::from_fn(&g, |x| 0.05 * x[0].sin() * x[1].sin());
        assert!(f0.max_abs_diff(&analytic) < 1e-12);
    }

    #[test]
    fn rhs_has_zero_mean_without_forcing() {
        let g = grid2(32, 12.0 * PI);
        for m in presets().into_iter().filter(|m| m.name() != "forced_thin_film") {
            let base = if m.positivity_floor().is_some() { 0.35 } else { 0.0 };
            let u = Field::from_fn(&g, |x| {
                base + 0.1 * (x[0] / 6.0).sin() * (x[1] / 3.0).cos() + 0.05 * (x[1] / 2.0).cos()
            });
            let f = eval_rhs(&m, &u, 0.0).unwrap();
            assert!(f.mean().abs() <= 1e-12 * f.max_abs(), "{}", m.name());
        }
    }

    #[test]
    fn constant_mobility_rhs_is_laplacian_of_potential() {
        let g = grid2(32, PI);
        let m = ModelPreset::ClassicCh { epsilon: 0.05 };
        let u = Field::from_fn(&g, |x| 0.4 * (2.0 * x[0]).sin() + 0.3 * (4.0 * x[1]).cos());
        let f = eval_rhs(&m, &u, 0.0).unwrap();
        let w = chemical_potential(&m, &u).unwrap();
        let mw = apply_laplacian(&w).unwrap().map(|v| m.mobility(0.0) * v);
        assert!(f.max_abs_diff(&mw) <= 1e-10 * f.max_abs());
    }

    #[test]
    fn positivity_and_blowup_errors() {
        let g = grid2(8, 1.0);
        let m = ModelPreset::ThinFilm { epsilon: 0.1 };
        let mut u = Field::constant(&g, 0.3);
        u.values_mut()[9] = -0.01;
        match eval_rhs(&m, &u, 0.0) {
            Err(Error::PositivityViolation { min, index }) => {
                assert_eq!(index, 9);
                assert_eq!(min, -0.01);
            }
            other => panic!("unexpected {other:?}"),
        }
        let ch = ModelPreset::ClassicCh { epsilon: 0.1 };
        let big = Field::constant(&g, 1e120);
        assert!(matches!(eval_rhs(&ch, &big, 0.0), Err(Error::BlowupDetected(_))));
    }

    #[test]
    fn chemical_potential_examples() {
        let g = grid2(16, 2.0 * PI);
        let ch = ModelPreset::ClassicCh { epsilon: 0.02 };
        assert!(chemical_potential(&ch, &Field::constant(&g, 1.0)).unwrap().max_abs() < 1e-12);
        let tf = ModelPreset::ThinFilm { epsilon: 0.1 };
        assert!(chemical_potential(&tf, &Field::constant(&g, 0.1)).unwrap().max_abs() < 1e-12);
        let flat = CustomModel {
            potential_deriv: Box::new(|_| 0.0),
            ..CustomModel::linear(1.0, 0.0)
        };
        let u = Field::from_fn(&g, |x| x[0].cos());
        let w = chemical_potential(&flat, &u).unwrap();
        assert!(w.max_abs_diff(&u) < 1e-12);
    }

    #[test]
    fn energy_examples() {
        let tf = ModelPreset::ThinFilm { epsilon: 0.1 };
        let l = 12.0 * PI;
        let g = grid2(16, l);
        let e = energy(&tf, &Field::constant(&g, 0.35)).unwrap();
        let w = -0.01 / (2.0 * 0.35f64.powi(2)) + 0.001 / (3.0 * 0.35f64.powi(3));
        assert!((e - l * l * w).abs() < 1e-12 * e.abs());

        let g1 = SpectralGrid::new(&[64], &[2.0 * PI]).unwrap();
        let flat = CustomModel {
            potential: Box::new(|_| 0.0),
            ..CustomModel::linear(1.0, 0.0)
        };
        let e = energy(&flat, &Field::from_fn(&g1, |x| x[0].cos())).unwrap();
        assert!((e - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn parseval_gradient_matches_grid_quadrature() {
        for dims in [vec![32usize], vec![16, 8], vec![8, 4, 16]] {
            let lens: Vec<f64> = dims.iter().map(|&n| n as f64 * 0.3).collect();
            let g = SpectralGrid::new(&dims, &lens).unwrap();
            let u = Field::from_fn(&g, |x| {
                x.iter()
                    .enumerate()
                    .map(|(a, &v)| ((a + 1) as f64 * v).sin() * 0.3)
                    .sum::<f64>()
                    + (x[0] * 2.0).cos() * 0.1
            });
            let mut hat = vec![Complex64::new(0.0, 0.0); g.spectral_len()];
            g.forward_raw(u.values(), &mut hat);
            let parseval = gradient_norm_sq(&g, &hat);
            let quad: f64 = gradient(&u)
                .unwrap()
                .iter()
                .map(|c| c.values().iter().map(|v| v * v).sum::<f64>())
                .sum::<f64>()
                * g.cell_volume();
            assert!((parseval - quad).abs() <= 1e-12 * quad.abs().max(1e-12), "{dims:?}");
        }
    }

    #[test]
    fn mass_and_mobility_max() {
        let g = grid2(16, 2.0 * PI);
        let v = 4.0 * PI * PI;
        assert!((mass(&Field::constant(&g, 0.5)) - 0.5 * v).abs() < 1e-12);
        assert!(mass(&Field::from_fn(&g, |x| x[0].cos())).abs() < 1e-12);
        let tf = ModelPreset::ThinFilm { epsilon: 0.1 };
        assert_eq!(mobility_max(&tf, &Field::constant(&g, 0.5)), 0.125);
        let chvm = ModelPreset::Chvm {
            omega: 0.95,
            epsilon: 0.1,
        };
        assert_eq!(mobility_max(&chvm, &Field::constant(&g, 0.0)), 1.0);
    }
}
