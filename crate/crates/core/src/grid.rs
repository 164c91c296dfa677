//! Periodic uniform grids and Fourier pseudo-spectral operators.
//!
//! Transforms use the unnormalized-forward / normalized-inverse convention:
//! the mean of a field equals `Re(û[0]) / N` where `N` is the point count.
//! Spectra are stored in the non-redundant half-complex layout: every axis
//! but the last keeps all `n` modes in FFT order, the last keeps `n/2 + 1`.
//!
//! First-derivative symbols vanish at the Nyquist index; the even symbols
//! `k²` and `k⁴` keep it.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Residue (relative to the largest coefficient) above which a spectrum is
/// rejected as not real-producing.
pub const SPECTRUM_SYMMETRY_TOL: f64 = 1e-10;

/// Shape and extent of a periodic box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: Vec<usize>,
    pub length: Vec<f64>,
    #[serde(default)]
    pub dealias: bool,
}

impl GridSpec {
    pub fn new(n: &[usize], length: &[f64]) -> Self {
        Self {
            n: n.to_vec(),
            length: length.to_vec(),
            dealias: false,
        }
    }

    pub fn build(&self) -> Result<Arc<SpectralGrid>> {
        SpectralGrid::with_options(&self.n, &self.length, self.dealias)
    }
}

pub struct SpectralGrid {
    n: Vec<usize>,
    length: Vec<f64>,
    dealias: bool,
    wavenumbers: Vec<Vec<f64>>,
    spec_shape: Vec<usize>,
    /// Per-axis first-derivative symbol laid out over the full spectral array.
    deriv: Vec<Vec<f64>>,
    ksq: Vec<f64>,
    k4: Vec<f64>,
    keep: Option<Vec<bool>>,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    fwd: Vec<Arc<dyn Fft<f64>>>,
    inv: Vec<Arc<dyn Fft<f64>>>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("n", &self.n)
            .field("length", &self.length)
            .field("dealias", &self.dealias)
            .finish()
    }
}

impl SpectralGrid {
    pub fn new(n: &[usize], length: &[f64]) -> Result<Arc<Self>> {
        Self::with_options(n, length, false)
    }

    /// Builds a grid; `dealias` enables 2/3-rule truncation of nonlinear products.
    pub fn with_options(n: &[usize], length: &[f64], dealias: bool) -> Result<Arc<Self>> {
        let dim = n.len();
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if length.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "{} lengths given for a {dim}-dimensional grid",
                length.len()
            )));
        }
        for (axis, (&na, &la)) in n.iter().zip(length).enumerate() {
            if na < 2 || !na.is_power_of_two() {
                return Err(Error::InvalidGrid(format!(
                    "axis {axis}: mode count {na} is not a power of two >= 2"
                )));
            }
            if !(la.is_finite() && la > 0.0) {
                return Err(Error::InvalidGrid(format!("axis {axis}: length {la} must be positive")));
            }
        }

        let wavenumbers: Vec<Vec<f64>> = n
            .iter()
            .zip(length)
            .map(|(&na, &la)| {
                (0..na)
                    .map(|i| {
                        let j = if i < na / 2 { i as i64 } else { i as i64 - na as i64 };
                        2.0 * PI * j as f64 / la
                    })
                    .collect()
            })
            .collect();

        let mut spec_shape = n.to_vec();
        spec_shape[dim - 1] = n[dim - 1] / 2 + 1;
        let spec_len: usize = spec_shape.iter().product();

        let mut deriv = vec![vec![0.0; spec_len]; dim];
        let mut ksq = vec![0.0; spec_len];
        let mut keep = dealias.then(|| vec![true; spec_len]);
        let mut idx = vec![0usize; dim];
        for flat in 0..spec_len {
            let mut s = 0.0;
            for a in 0..dim {
                // The last axis stores j = 0..=n/2; index n/2 is the Nyquist mode
                // on every axis.
                let k = if a == dim - 1 {
                    2.0 * PI * idx[a] as f64 / length[a]
                } else {
                    wavenumbers[a][idx[a]]
                };
                s += k * k;
                let nyquist = idx[a] == n[a] / 2;
                deriv[a][flat] = if nyquist { 0.0 } else { k };
                if let Some(keep) = keep.as_mut() {
                    let j = if a == dim - 1 || idx[a] <= n[a] / 2 {
                        idx[a]
                    } else {
                        n[a] - idx[a]
                    };
                    if 3 * j > n[a] {
                        keep[flat] = false;
                    }
                }
            }
            ksq[flat] = s;
            for a in (0..dim).rev() {
                idx[a] += 1;
                if idx[a] < spec_shape[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        let k4 = ksq.iter().map(|&s| s * s).collect();

        let mut real_planner = RealFftPlanner::<f64>::new();
        let r2c = real_planner.plan_fft_forward(n[dim - 1]);
        let c2r = real_planner.plan_fft_inverse(n[dim - 1]);
        let mut planner = FftPlanner::<f64>::new();
        let fwd = n[..dim - 1].iter().map(|&na| planner.plan_fft_forward(na)).collect();
        let inv = n[..dim - 1].iter().map(|&na| planner.plan_fft_inverse(na)).collect();

        Ok(Arc::new(Self {
            n: n.to_vec(),
            length: length.to_vec(),
            dealias,
            wavenumbers,
            spec_shape,
            deriv,
            ksq,
            k4,
            keep,
            r2c,
            c2r,
            fwd,
            inv,
        }))
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            n: self.n.clone(),
            length: self.length.clone(),
            dealias: self.dealias,
        }
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn n(&self) -> &[usize] {
        &self.n
    }

    pub fn length(&self) -> &[f64] {
        &self.length
    }

    pub fn dealias(&self) -> bool {
        self.dealias
    }

    /// Number of physical grid points.
    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spectral_shape(&self) -> &[usize] {
        &self.spec_shape
    }

    pub fn spectral_len(&self) -> usize {
        self.ksq.len()
    }

    pub fn volume(&self) -> f64 {
        self.length.iter().product()
    }

    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.len() as f64
    }

    /// Physical wavenumbers of one axis in FFT order, `2πj/L` for
    /// `j = 0, 1, …, n/2−1, −n/2, …, −1`.
    pub fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.wavenumbers[axis]
    }

    /// `k²` over the spectral layout.
    pub fn ksq(&self) -> &[f64] {
        &self.ksq
    }

    /// `k⁴ = (k²)²` over the spectral layout.
    pub fn k4(&self) -> &[f64] {
        &self.k4
    }

    /// First-derivative symbol of `axis` over the spectral layout (`∂ ↔ i·k`).
    pub fn deriv_symbol(&self, axis: usize) -> &[f64] {
        &self.deriv[axis]
    }

    /// Grid coordinates `x_i = i·L/n` along one axis.
    pub fn coords(&self, axis: usize) -> Vec<f64> {
        let h = self.length[axis] / self.n[axis] as f64;
        (0..self.n[axis]).map(|i| i as f64 * h).collect()
    }

    pub fn same_as(&self, other: &SpectralGrid) -> bool {
        std::ptr::eq(self, other) || (self.n == other.n && self.length == other.length)
    }

    /// Zeroes modes outside the 2/3-rule band; no-op unless dealiasing is on.
    pub fn dealias_in_place(&self, coeffs: &mut [Complex64]) {
        if let Some(keep) = &self.keep {
            for (c, &k) in coeffs.iter_mut().zip(keep) {
                if !k {
                    *c = Complex64::new(0.0, 0.0);
                }
            }
        }
    }

    /// Unnormalized forward transform of `input` into `out` (no finiteness check).
    pub(crate) fn forward_raw(&self, input: &[f64], out: &mut [Complex64]) {
        let dim = self.dim();
        let nl = self.n[dim - 1];
        let nh = self.spec_shape[dim - 1];
        let mut line = self.r2c.make_input_vec();
        let mut scratch = self.r2c.make_scratch_vec();
        for (src, dst) in input.chunks_exact(nl).zip(out.chunks_exact_mut(nh)) {
            line.copy_from_slice(src);
            self.r2c
                .process_with_scratch(&mut line, dst, &mut scratch)
                .expect("buffer sizes match the plan");
        }
        for axis in (0..dim - 1).rev() {
            self.strided_fft(out, axis, &self.fwd[axis]);
        }
    }

    /// Normalized inverse transform; `spec` is used as scratch and left undefined.
    pub(crate) fn inverse_raw(&self, spec: &mut [Complex64], out: &mut [f64]) {
        let dim = self.dim();
        let nl = self.n[dim - 1];
        let nh = self.spec_shape[dim - 1];
        for axis in 0..dim - 1 {
            self.strided_fft(spec, axis, &self.inv[axis]);
        }
        let mut scratch = self.c2r.make_scratch_vec();
        let scale = 1.0 / self.len() as f64;
        for (src, dst) in spec.chunks_exact_mut(nh).zip(out.chunks_exact_mut(nl)) {
            // Residual imaginary parts of the DC and Nyquist entries are roundoff.
            src[0].im = 0.0;
            src[nh - 1].im = 0.0;
            self.c2r
                .process_with_scratch(src, dst, &mut scratch)
                .expect("buffer sizes match the plan");
            for v in dst.iter_mut() {
                *v *= scale;
            }
        }
    }

    fn strided_fft(&self, data: &mut [Complex64], axis: usize, fft: &Arc<dyn Fft<f64>>) {
        let len = self.spec_shape[axis];
        let inner: usize = self.spec_shape[axis + 1..].iter().product();
        let block = len * inner;
        let mut buf = vec![Complex64::new(0.0, 0.0); block];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for chunk in data.chunks_exact_mut(block) {
            for i in 0..len {
                let row = &chunk[i * inner..(i + 1) * inner];
                for (j, &v) in row.iter().enumerate() {
                    buf[j * len + i] = v;
                }
            }
            fft.process_with_scratch(&mut buf, &mut scratch);
            for i in 0..len {
                let row = &mut chunk[i * inner..(i + 1) * inner];
                for (j, v) in row.iter_mut().enumerate() {
                    *v = buf[j * len + i];
                }
            }
        }
    }

    /// Largest violation of conjugate symmetry in the self-conjugate planes of a
    /// half-complex spectrum, relative to the largest coefficient.
    pub(crate) fn symmetry_residue(&self, coeffs: &[Complex64]) -> f64 {
        let dim = self.dim();
        let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return 0.0;
        }
        let nh = self.spec_shape[dim - 1];
        let planes = [0usize, nh - 1];
        let outer_shape = &self.n[..dim - 1];
        let outer_len: usize = outer_shape.iter().product();
        let mut worst = 0.0f64;
        let mut idx = vec![0usize; dim - 1];
        for outer in 0..outer_len {
            let mut partner = 0usize;
            for (a, &i) in idx.iter().enumerate() {
                partner = partner * self.n[a] + (self.n[a] - i) % self.n[a];
            }
            for &p in &planes {
                let c = coeffs[outer * nh + p];
                let d = coeffs[partner * nh + p].conj();
                worst = worst.max((c - d).norm());
            }
            for a in (0..dim - 1).rev() {
                idx[a] += 1;
                if idx[a] < self.n[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        worst / scale
    }
}

/// Real-valued grid function in row-major order (last axis fastest).
#[derive(Clone)]
pub struct Field {
    grid: Arc<SpectralGrid>,
    values: Vec<f64>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Field")
            .field("n", &self.grid.n)
            .field("min", &self.min())
            .field("max", &self.max())
            .finish()
    }
}

impl Field {
    pub fn new(grid: Arc<SpectralGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &Arc<SpectralGrid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Arc<SpectralGrid>, c: f64) -> Self {
        Self {
            values: vec![c; grid.len()],
            grid: grid.clone(),
        }
    }

    /// Samples `f(x)` at every grid point.
    pub fn from_fn(grid: &Arc<SpectralGrid>, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let dim = grid.dim();
        let coords: Vec<Vec<f64>> = (0..dim).map(|a| grid.coords(a)).collect();
        let mut idx = vec![0usize; dim];
        let mut x = vec![0.0; dim];
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            for a in 0..dim {
                x[a] = coords[a][idx[a]];
            }
            values.push(f(&x));
            for a in (0..dim).rev() {
                idx[a] += 1;
                if idx[a] < grid.n[a] {
                    break;
                }
                idx[a] = 0;
            }
        }
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(index) => Err(Error::InvalidField {
                index,
                value: self.values[index],
            }),
            None => Ok(()),
        }
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid.same_as(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridError)
        }
    }

    /// Smallest value and its flat index.
    pub fn argmin(&self) -> (f64, usize) {
        self.values.iter().enumerate().fold(
            (f64::INFINITY, 0),
            |(m, i), (j, &v)| if v < m { (v, j) } else { (m, i) },
        )
    }

    pub fn min(&self) -> f64 {
        self.argmin().0
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Max-norm of `self − other`.
    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &Field, b: f64) -> Field {
        Field {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn scale(&mut self, a: f64) {
        for v in &mut self.values {
            *v *= a;
        }
    }
}

/// Half-complex spectrum of a real field.
#[derive(Clone)]
pub struct SpectralField {
    grid: Arc<SpectralGrid>,
    coeffs: Vec<Complex64>,
}

impl fmt::Debug for SpectralField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralField")
            .field("shape", &self.grid.spec_shape)
            .finish()
    }
}

impl SpectralField {
    pub fn new(grid: Arc<SpectralGrid>, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != grid.spectral_len() {
            return Err(Error::InvalidGrid(format!(
                "{} coefficients for a spectral layout of {}",
                coeffs.len(),
                grid.spectral_len()
            )));
        }
        Ok(Self { grid, coeffs })
    }

    pub fn zeros(grid: &Arc<SpectralGrid>) -> Self {
        Self {
            coeffs: vec![Complex64::new(0.0, 0.0); grid.spectral_len()],
            grid: grid.clone(),
        }
    }

    pub fn grid(&self) -> &Arc<SpectralGrid> {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Expands to the full `n`-point spectrum (FFT order on every axis).
    pub fn full_spectrum(&self) -> Vec<Complex64> {
        let grid = &self.grid;
        let dim = grid.dim();
        let nh = grid.spec_shape[dim - 1];
        let nl = grid.n[dim - 1];
        let mut out = Vec::with_capacity(grid.len());
        let mut idx = vec![0usize; dim];
        for _ in 0..grid.len() {
            let (flip, lookup) = if idx[dim - 1] < nh {
                (false, idx.clone())
            } else {
                (true, idx.iter().zip(&grid.n).map(|(&i, &n)| (n - i) % n).collect())
            };
            let mut flat = 0usize;
            for (a, &i) in lookup.iter().enumerate() {
                let extent = if a == dim - 1 { nh } else { grid.n[a] };
                flat = flat * extent + i;
            }
            let c = self.coeffs[flat];
            out.push(if flip { c.conj() } else { c });
            for a in (0..dim).rev() {
                idx[a] += 1;
                let extent = if a == dim - 1 { nl } else { grid.n[a] };
                if idx[a] < extent {
                    break;
                }
                idx[a] = 0;
            }
        }
        out
    }
}

pub fn forward_transform(f: &Field) -> Result<SpectralField> {
    f.check_finite()?;
    let mut out = SpectralField::zeros(&f.grid);
    f.grid.forward_raw(&f.values, &mut out.coeffs);
    Ok(out)
}

pub fn inverse_transform(spec: &SpectralField) -> Result<Field> {
    let grid = &spec.grid;
    if let Some(i) = spec.coeffs.iter().position(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(Error::InvalidField {
            index: i,
            value: spec.coeffs[i].re,
        });
    }
    let residue = grid.symmetry_residue(&spec.coeffs);
    if residue > SPECTRUM_SYMMETRY_TOL {
        return Err(Error::SpectrumError { residue });
    }
    let mut work = spec.coeffs.clone();
    let mut out = Field::zeros(grid);
    grid.inverse_raw(&mut work, &mut out.values);
    Ok(out)
}

/// Applies a real multiplier symbol to `f` in spectral space.
fn apply_real_symbol(f: &Field, symbol: impl Fn(usize) -> f64) -> Result<Field> {
    let mut spec = forward_transform(f)?;
    for (i, c) in spec.coeffs.iter_mut().enumerate() {
        *c *= symbol(i);
    }
    let mut out = Field::zeros(&f.grid);
    f.grid.inverse_raw(&mut spec.coeffs, &mut out.values);
    Ok(out)
}

pub fn apply_laplacian(f: &Field) -> Result<Field> {
    let ksq = f.grid.ksq();
    apply_real_symbol(f, |i| -ksq[i])
}

pub fn apply_biharmonic(f: &Field) -> Result<Field> {
    let k4 = f.grid.k4();
    apply_real_symbol(f, |i| k4[i])
}

/// Spectral gradient, one component per axis.
pub fn gradient(f: &Field) -> Result<Vec<Field>> {
    let spec = forward_transform(f)?;
    let grid = &f.grid;
    let mut work = vec![Complex64::new(0.0, 0.0); grid.spectral_len()];
    (0..grid.dim())
        .map(|axis| {
            let d = grid.deriv_symbol(axis);
            for ((w, c), &k) in work.iter_mut().zip(&spec.coeffs).zip(d) {
                *w = Complex64::new(-k * c.im, k * c.re);
            }
            let mut out = Field::zeros(grid);
            grid.inverse_raw(&mut work, &mut out.values);
            Ok(out)
        })
        .collect()
}

/// Spectral divergence `Σ ∂_a v_a`.
pub fn divergence(v: &[Field]) -> Result<Field> {
    let first = v.first().ok_or(Error::ArityError { expected: 1, got: 0 })?;
    let grid = first.grid.clone();
    if v.len() != grid.dim() {
        return Err(Error::ArityError {
            expected: grid.dim(),
            got: v.len(),
        });
    }
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.spectral_len()];
    let mut work = vec![Complex64::new(0.0, 0.0); grid.spectral_len()];
    for (axis, comp) in v.iter().enumerate() {
        first.check_same_grid(comp)?;
        comp.check_finite()?;
        grid.forward_raw(&comp.values, &mut work);
        for ((a, w), &k) in acc.iter_mut().zip(&work).zip(grid.deriv_symbol(axis)) {
            *a += Complex64::new(-k * w.im, k * w.re);
        }
    }
    let mut out = Field::zeros(&grid);
    grid.inverse_raw(&mut acc, &mut out.values);
    Ok(out)
}
