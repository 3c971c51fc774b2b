//! Discrete torus `[-1, 1]^d`, real fields on it and their Fourier
//! coefficients.
//!
//! Spectra are stored in the half-complex layout produced by a real-to-complex
//! transform along the last axis: shape `n x ... x (n/2 + 1)`. Coefficients are
//! normalised so that a constant field `c` has the single coefficient `c` at
//! `k = 0`, i.e. `f(x) = sum_k f_k exp(i pi k.x)`.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};

/// Per-axis period of the torus.
pub const SIDE: f64 = 2.0;

struct Plans {
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

struct GridInner {
    d: usize,
    n: usize,
    plans: Plans,
    /// `|zeta|^2` for every stored half-spectrum entry.
    zeta_sq: Vec<f64>,
    /// Number of full-lattice modes each stored entry stands for (1 or 2).
    multiplicity: Vec<f64>,
    /// Signed wavenumbers, `d` per stored entry.
    wavenumbers: Vec<i64>,
}

/// Geometry and FFT plans of the periodic grid. Cheap to clone.
#[derive(Clone)]
pub struct TorusGrid {
    inner: Arc<GridInner>,
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.d() == other.d() && self.n() == other.n()
    }
}

impl Eq for TorusGrid {}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TorusGrid(d={}, n={})", self.d(), self.n())
    }
}

impl fmt::Display for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "d={} n={}", self.d(), self.n())
    }
}

/// Builds the grid with `n` points per axis on `[-1, 1]^d`.
pub fn make_grid(d: usize, n: usize) -> Result<TorusGrid> {
    TorusGrid::new(d, n)
}

/// Signed wavenumber index for storage position `j` on a full axis.
#[inline]
pub(crate) fn signed_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

impl TorusGrid {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidGrid(format!("dimension {d} not in {{1,2,3}}")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "{n} points per axis; need a power of two >= 8"
            )));
        }
        let mut real = RealFftPlanner::<f64>::new();
        let mut cplx = FftPlanner::<f64>::new();
        let plans = Plans {
            r2c: real.plan_fft_forward(n),
            c2r: real.plan_fft_inverse(n),
            forward: cplx.plan_fft_forward(n),
            inverse: cplx.plan_fft_inverse(n),
        };
        let h = n / 2 + 1;
        let len = n.pow(d as u32 - 1) * h;
        let mut zeta_sq = Vec::with_capacity(len);
        let mut multiplicity = Vec::with_capacity(len);
        let mut wavenumbers = Vec::with_capacity(len * d);
        let mut k = vec![0i64; d];
        for idx in 0..len {
            unravel_half(idx, d, n, &mut k);
            wavenumbers.extend_from_slice(&k);
            let sq: i64 = k.iter().map(|&ki| ki * ki).sum();
            zeta_sq.push(std::f64::consts::PI.powi(2) * sq as f64);
            let last = k[d - 1];
            // Entries on the k_last = 0 and k_last = -n/2 planes have no stored
            // mirror image.
            let m = if last == 0 || last == -(n as i64) / 2 { 1.0 } else { 2.0 };
            multiplicity.push(m);
        }
        Ok(Self {
            inner: Arc::new(GridInner {
                d,
                n,
                plans,
                zeta_sq,
                multiplicity,
                wavenumbers,
            }),
        })
    }

    pub fn d(&self) -> usize {
        self.inner.d
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    /// Total number of grid points `n^d`.
    pub fn len(&self) -> usize {
        self.inner.n.pow(self.inner.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        SIDE / self.inner.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.inner.d as i32)
    }

    /// Lebesgue measure of the torus, `2^d`.
    pub fn volume(&self) -> f64 {
        SIDE.powi(self.inner.d as i32)
    }

    /// Length of the half-complex spectrum.
    pub fn spectrum_len(&self) -> usize {
        self.inner.zeta_sq.len()
    }

    /// `|zeta|^2` per half-spectrum entry, `zeta = pi k`.
    pub fn zeta_sq(&self) -> &[f64] {
        &self.inner.zeta_sq
    }

    /// How many full-lattice modes each half-spectrum entry represents.
    pub fn multiplicity(&self) -> &[f64] {
        &self.inner.multiplicity
    }

    /// Largest `|zeta|` on the lattice (a corner of the Nyquist cube).
    pub fn max_frequency(&self) -> f64 {
        std::f64::consts::PI * (self.inner.n / 2) as f64 * (self.inner.d as f64).sqrt()
    }

    /// Physical coordinate of the point with flat index `idx`.
    pub fn point(&self, idx: usize, out: &mut [f64]) {
        let (d, n) = (self.d(), self.n());
        let mut rem = idx;
        for axis in (0..d).rev() {
            let i = rem % n;
            rem /= n;
            out[axis] = -1.0 + self.spacing() * i as f64;
        }
    }

    /// Signed wavenumbers of the half-spectrum entry `idx`.
    pub fn wavenumber(&self, idx: usize) -> &[i64] {
        let d = self.d();
        &self.inner.wavenumbers[idx * d..(idx + 1) * d]
    }

    /// Half-spectrum position of the signed wavenumber `k`, and whether the
    /// stored value must be conjugated to obtain it.
    pub fn locate(&self, k: &[i64]) -> Result<(usize, bool)> {
        let (d, n) = (self.d(), self.n());
        if k.len() != d {
            return Err(invalid(format!("wavenumber has {} components, grid d = {d}", k.len())));
        }
        let half = (n / 2) as i64;
        if k.iter().any(|&ki| ki < -half || ki >= half) {
            return Err(invalid(format!("wavenumber {k:?} outside the lattice")));
        }
        let wrap = |ki: i64| -> usize { ki.rem_euclid(n as i64) as usize };
        let last = k[d - 1];
        let (kk, conj): (Vec<i64>, bool) = if last > 0 || last == -half {
            // Stored directly (Nyquist lives at storage column n/2).
            (k.to_vec(), false)
        } else if last == 0 {
            (k.to_vec(), false)
        } else {
            (k.iter().map(|&ki| -ki).collect(), true)
        };
        let h = n / 2 + 1;
        let mut idx = 0usize;
        for &ki in &kk[..d - 1] {
            idx = idx * n + wrap(ki);
        }
        let col = if kk[d - 1] == -half { n / 2 } else { kk[d - 1] as usize };
        idx = idx * h + col;
        Ok((idx, conj))
    }

    /// Forward transform: physical values to half spectrum (normalised).
    pub fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let (d, n) = (self.d(), self.n());
        let h = n / 2 + 1;
        let rows = values.len() / n;
        let mut out = vec![Complex64::new(0.0, 0.0); rows * h];
        let plans = &self.inner.plans;
        let mut row = vec![0.0; n];
        let mut scratch = plans.r2c.make_scratch_vec();
        for r in 0..rows {
            row.copy_from_slice(&values[r * n..(r + 1) * n]);
            plans
                .r2c
                .process_with_scratch(&mut row, &mut out[r * h..(r + 1) * h], &mut scratch)
                .expect("r2c length");
        }
        for axis in 0..d - 1 {
            self.axis_fft(&mut out, axis, &plans.forward);
        }
        let scale = 1.0 / self.len() as f64;
        for c in &mut out {
            *c *= scale;
        }
        out
    }

    /// Inverse transform: half spectrum to physical values.
    pub fn inverse(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let (d, n) = (self.d(), self.n());
        let h = n / 2 + 1;
        let mut work = spectrum.to_vec();
        let plans = &self.inner.plans;
        for axis in (0..d - 1).rev() {
            self.axis_fft(&mut work, axis, &plans.inverse);
        }
        let rows = work.len() / h;
        let mut out = vec![0.0; rows * n];
        let mut scratch = plans.c2r.make_scratch_vec();
        for r in 0..rows {
            let line = &mut work[r * h..(r + 1) * h];
            // The k_last = 0 and Nyquist columns are real for a real field;
            // drop round-off imaginary parts so the c2r transform accepts them.
            line[0].im = 0.0;
            line[h - 1].im = 0.0;
            plans
                .c2r
                .process_with_scratch(line, &mut out[r * n..(r + 1) * n], &mut scratch)
                .expect("c2r length");
        }
        out
    }

    /// In-place complex FFT along one of the leading (full-length) axes.
    fn axis_fft(&self, data: &mut [Complex64], axis: usize, fft: &Arc<dyn Fft<f64>>) {
        let (d, n) = (self.d(), self.n());
        let h = n / 2 + 1;
        // Shape is [n; d-1] x h. Stride of `axis` in elements:
        let mut stride = h;
        for _ in axis + 1..d - 1 {
            stride *= n;
        }
        let outer = data.len() / (stride * n);
        let lines = outer * stride;
        let mut buf = vec![Complex64::new(0.0, 0.0); lines * n];
        for o in 0..outer {
            let base = o * stride * n;
            for s in 0..stride {
                let line = &mut buf[(o * stride + s) * n..(o * stride + s + 1) * n];
                for (i, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + i * stride + s];
                }
            }
        }
        fft.process(&mut buf);
        for o in 0..outer {
            let base = o * stride * n;
            for s in 0..stride {
                let line = &buf[(o * stride + s) * n..(o * stride + s + 1) * n];
                for (i, v) in line.iter().enumerate() {
                    data[base + i * stride + s] = *v;
                }
            }
        }
    }
}

fn unravel_half(idx: usize, d: usize, n: usize, k: &mut [i64]) {
    let h = n / 2 + 1;
    let col = idx % h;
    let mut rem = idx / h;
    k[d - 1] = if col == n / 2 { -(n as i64) / 2 } else { col as i64 };
    for axis in (0..d - 1).rev() {
        k[axis] = signed_index(rem % n, n);
        rem /= n;
    }
}

/// A real scalar field on the torus. Immutable; the spectrum is computed on
/// first use and cached.
pub struct Field {
    grid: TorusGrid,
    values: Vec<f64>,
    spectrum: OnceLock<Vec<Complex64>>,
}

impl Clone for Field {
    fn clone(&self) -> Self {
        let spectrum = OnceLock::new();
        if let Some(s) = self.spectrum.get() {
            let _ = spectrum.set(s.clone());
        }
        Self {
            grid: self.grid.clone(),
            values: self.values.clone(),
            spectrum,
        }
    }
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Field({:?}, sup={:.3e})", self.grid, self.sup_norm())
    }
}

impl Field {
    pub fn from_values(grid: &TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(invalid(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self::from_values_unchecked(grid, values))
    }

    pub(crate) fn from_values_unchecked(grid: &TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self {
            grid: grid.clone(),
            values,
            spectrum: OnceLock::new(),
        }
    }

    /// Field with the given half spectrum; physical values are synthesised now.
    pub fn from_spectrum(grid: &TorusGrid, spectrum: Vec<Complex64>) -> Result<Self> {
        if spectrum.len() != grid.spectrum_len() {
            return Err(invalid(format!(
                "{} coefficients for a half spectrum of {}",
                spectrum.len(),
                grid.spectrum_len()
            )));
        }
        Ok(Self::from_spectrum_unchecked(grid, spectrum))
    }

    pub(crate) fn from_spectrum_unchecked(grid: &TorusGrid, spectrum: Vec<Complex64>) -> Self {
        let values = grid.inverse(&spectrum);
        let cell = OnceLock::new();
        let _ = cell.set(spectrum);
        Self {
            grid: grid.clone(),
            values,
            spectrum: cell,
        }
    }

    pub fn zeros(grid: &TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &TorusGrid, c: f64) -> Self {
        Self::from_values_unchecked(grid, vec![c; grid.len()])
    }

    /// Samples `f` at the grid points `x in [-1, 1)^d`.
    pub fn from_fn(grid: &TorusGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; grid.d()];
        let values = (0..grid.len())
            .map(|i| {
                grid.point(i, &mut x);
                f(&x)
            })
            .collect();
        Self::from_values_unchecked(grid, values)
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Half-complex Fourier coefficients (forward transform, cached).
    pub fn spectrum(&self) -> &[Complex64] {
        self.spectrum.get_or_init(|| self.grid.forward(&self.values))
    }

    /// Coefficient at the signed wavenumber `k`, using Hermitian symmetry for
    /// modes that are not stored.
    pub fn coefficient(&self, k: &[i64]) -> Result<Complex64> {
        let (idx, conj) = self.grid.locate(k)?;
        let c = self.spectrum()[idx];
        Ok(if conj { c.conj() } else { c })
    }

    pub fn check_same_grid(&self, other: &Field) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch {
                left: self.grid.to_string(),
                right: other.grid.to_string(),
            });
        }
        Ok(())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `L^p([-1,1]^d)` norm by cell-volume quadrature; `p = inf` is the grid max.
    pub fn lp_norm(&self, p: f64) -> f64 {
        lp_norm(&self.values, p, self.grid.cell_volume())
    }

    /// Spatial average.
    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `L^2` inner product.
    pub fn inner(&self, other: &Field) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Field {
        Self::from_values_unchecked(&self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(f64, f64) -> f64) -> Field {
        debug_assert!(self.grid == other.grid);
        Self::from_values_unchecked(
            &self.grid,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn scale(&self, a: f64) -> Field {
        let out = self.map(|v| a * v);
        if let Some(s) = self.spectrum.get() {
            let _ = out.spectrum.set(s.iter().map(|c| c * a).collect());
        }
        out
    }

    /// `sum_i a_i f_i`. Spectra are combined too when every input has one
    /// cached, which saves a transform downstream.
    pub fn linear_combination(terms: &[(f64, &Field)]) -> Field {
        let grid = terms[0].1.grid.clone();
        let mut values = vec![0.0; grid.len()];
        for (a, f) in terms {
            debug_assert!(f.grid == grid);
            for (o, v) in values.iter_mut().zip(&f.values) {
                *o += a * v;
            }
        }
        let out = Self::from_values_unchecked(&grid, values);
        if terms.iter().all(|(_, f)| f.spectrum.get().is_some()) {
            let mut spec = vec![Complex64::new(0.0, 0.0); grid.spectrum_len()];
            for (a, f) in terms {
                for (o, c) in spec.iter_mut().zip(f.spectrum.get().unwrap()) {
                    *o += c * a;
                }
            }
            let _ = out.spectrum.set(spec);
        }
        out
    }

    /// Spectral partial derivative along `axis`. Nyquist components are
    /// dropped so the result stays real.
    pub fn derivative(&self, axis: usize) -> Field {
        let grid = &self.grid;
        let half = (grid.n() / 2) as i64;
        let spec = self
            .spectrum()
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                let k = grid.wavenumber(idx);
                if k.iter().any(|&ki| ki == -half) {
                    Complex64::new(0.0, 0.0)
                } else {
                    c * Complex64::new(0.0, std::f64::consts::PI * k[axis] as f64)
                }
            })
            .collect();
        Field::from_spectrum_unchecked(grid, spec)
    }

    pub fn gradient(&self) -> Vec<Field> {
        (0..self.grid.d()).map(|a| self.derivative(a)).collect()
    }

    /// Pointwise Euclidean norm of the gradient.
    pub fn gradient_magnitude(&self) -> Field {
        let grads = self.gradient();
        let values = (0..self.grid.len())
            .map(|i| grads.iter().map(|g| g.values[i] * g.values[i]).sum::<f64>().sqrt())
            .collect();
        Field::from_values_unchecked(&self.grid, values)
    }

    /// Largest absolute value, or `None` if some value is not finite.
    pub fn checked_sup(&self) -> Option<f64> {
        let mut m: f64 = 0.0;
        for v in &self.values {
            if !v.is_finite() {
                return None;
            }
            m = m.max(v.abs());
        }
        Some(m)
    }
}

pub(crate) fn lp_norm(values: &[f64], p: f64, cell: f64) -> f64 {
    if p.is_infinite() {
        values.iter().fold(0.0, |m, v| m.max(v.abs()))
    } else if p == 2.0 {
        (values.iter().map(|v| v * v).sum::<f64>() * cell).sqrt()
    } else if p == 1.0 {
        values.iter().map(|v| v.abs()).sum::<f64>() * cell
    } else {
        // Scale by the maximum first: high powers overflow otherwise.
        let m = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if m == 0.0 {
            return 0.0;
        }
        let s: f64 = values.iter().map(|v| (v.abs() / m).powf(p)).sum();
        m * (s * cell).powf(1.0 / p)
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        Field::linear_combination(&[(1.0, self), (1.0, rhs)])
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        Field::linear_combination(&[(1.0, self), (-1.0, rhs)])
    }
}

/// Pointwise product on the grid (no dealiasing).
impl Mul for &Field {
    type Output = Field;
    fn mul(self, rhs: &Field) -> Field {
        self.zip_map(rhs, |a, b| a * b)
    }
}

impl Mul<&Field> for f64 {
    type Output = Field;
    fn mul(self, rhs: &Field) -> Field {
        rhs.scale(self)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        self.scale(-1.0)
    }
}

/// A real Fourier multiplier `m(|zeta|^2)` tabulated on the half spectrum.
#[derive(Clone, Debug)]
pub struct Multiplier {
    values: Vec<f64>,
}

impl Multiplier {
    pub fn from_fn(grid: &TorusGrid, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: grid.zeta_sq().iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn apply(&self, f: &Field) -> Field {
        let spec = f.spectrum().iter().zip(&self.values).map(|(c, m)| c * m).collect();
        Field::from_spectrum_unchecked(f.grid(), spec)
    }

    /// Heat semigroup `exp(-t(|zeta|^2 + mass))`.
    pub fn heat(grid: &TorusGrid, t: f64, mass: f64) -> Self {
        Self::from_fn(grid, |z| (-t * (z + mass)).exp())
    }

    /// `phi_1(-t(|zeta|^2 + mass))`.
    pub fn phi1(grid: &TorusGrid, t: f64, mass: f64) -> Self {
        Self::from_fn(grid, |z| phi1(-t * (z + mass)))
    }
}

/// `phi_1(z) = (e^z - 1) / z`, with the series used near zero.
pub fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-6 {
        1.0 + z / 2.0 + z * z / 6.0
    } else {
        z.exp_m1() / z
    }
}

pub fn apply_heat_semigroup(f: &Field, t: f64, mass: f64) -> Result<Field> {
    if !(t >= 0.0) {
        return Err(invalid(format!("heat semigroup needs t >= 0, got {t}")));
    }
    if !(mass >= 0.0) {
        return Err(invalid(format!("mass must be >= 0, got {mass}")));
    }
    if t == 0.0 && mass == 0.0 {
        return Ok(f.clone());
    }
    Ok(Multiplier::heat(f.grid(), t, mass).apply(f))
}

pub fn apply_phi1_weight(f: &Field, t: f64, mass: f64) -> Result<Field> {
    if !(t > 0.0) {
        return Err(invalid(format!("phi1 weight needs t > 0, got {t}")));
    }
    if !(mass >= 0.0) {
        return Err(invalid(format!("mass must be >= 0, got {mass}")));
    }
    Ok(Multiplier::phi1(f.grid(), t, mass).apply(f))
}

/// One exponential-Euler step for `du/dt = -(|zeta|^2 + mass) u + N`:
/// `u <- e^{-dt L} u + dt phi_1(-dt L) N`.
#[derive(Clone, Debug)]
pub struct ExpEuler {
    decay: Vec<f64>,
    weight: Vec<f64>,
    dt: f64,
}

impl ExpEuler {
    pub fn new(grid: &TorusGrid, dt: f64, mass: f64) -> Self {
        let decay = grid.zeta_sq().iter().map(|&z| (-dt * (z + mass)).exp()).collect();
        let weight = grid.zeta_sq().iter().map(|&z| dt * phi1(-dt * (z + mass))).collect();
        Self { decay, weight, dt }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step(&self, u: &Field, source: &Field) -> Field {
        let spec = u
            .spectrum()
            .iter()
            .zip(source.spectrum())
            .zip(self.decay.iter().zip(&self.weight))
            .map(|((a, s), (e, w))| a * e + s * w)
            .collect();
        Field::from_spectrum_unchecked(u.grid(), spec)
    }

    /// Same step with an additional spectral increment added verbatim.
    pub fn step_with(&self, u: &Field, source: &Field, extra: &[Complex64]) -> Field {
        let spec = u
            .spectrum()
            .iter()
            .zip(source.spectrum())
            .zip(self.decay.iter().zip(&self.weight))
            .zip(extra)
            .map(|(((a, s), (e, w)), x)| a * e + s * w + x)
            .collect();
        Field::from_spectrum_unchecked(u.grid(), spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_construction() {
        let g = make_grid(1, 8).unwrap();
        assert_eq!(g.len(), 8);
        assert_eq!(g.cell_volume(), 0.25);
        let g = make_grid(3, 16).unwrap();
        assert_eq!(g.len(), 4096);
        assert!((g.cell_volume() - 0.125f64.powi(3)).abs() < 1e-18);
        assert!(make_grid(2, 12).is_err());
        assert!(make_grid(4, 16).is_err());
        assert!(make_grid(1, 4).is_err());
    }

    #[test]
    fn constant_field_has_single_coefficient() {
        let g = make_grid(2, 8).unwrap();
        let f = Field::constant(&g, 1.0);
        let s = f.spectrum();
        assert!((s[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(s[1..].iter().all(|c| c.norm() < 1e-15));
    }

    #[test]
    fn cosine_coefficients() {
        let g = make_grid(1, 8).unwrap();
        let f = Field::from_fn(&g, |x| (PI * x[0]).cos());
        for k in [-1i64, 1] {
            let c = f.coefficient(&[k]).unwrap();
            assert!((c.norm() - 0.5).abs() < 1e-14, "{k}: {c}");
        }
        assert!(f.coefficient(&[2]).unwrap().norm() < 1e-14);
        assert!(f.coefficient(&[-4]).unwrap().norm() < 1e-14);
    }

    #[test]
    fn locate_agrees_with_wavenumber() {
        for d in 1..=3 {
            let g = make_grid(d, 8).unwrap();
            for idx in 0..g.spectrum_len() {
                let k = g.wavenumber(idx).to_vec();
                let (j, conj) = g.locate(&k).unwrap();
                assert_eq!(j, idx);
                assert!(!conj);
            }
        }
    }

    #[test]
    fn heat_examples() {
        let g = make_grid(1, 32).unwrap();
        let f = Field::from_fn(&g, |x| (PI * x[0]).cos());
        let same = apply_heat_semigroup(&f, 0.0, 0.0).unwrap();
        assert_eq!(same.values(), f.values());

        let h = apply_heat_semigroup(&f, 0.1, 0.0).unwrap();
        let factor = (-0.1 * PI * PI).exp();
        assert!((factor - 0.37271).abs() < 1e-5);
        for (a, b) in h.values().iter().zip(f.values()) {
            assert!((a - factor * b).abs() < 1e-14);
        }

        let one = Field::constant(&g, 1.0);
        let h = apply_heat_semigroup(&one, 5.0, 1.0).unwrap();
        assert!(h.values().iter().all(|v| (v - (-5.0f64).exp()).abs() < 1e-15));
        assert!(((-5.0f64).exp() - 0.0067379).abs() < 1e-7);

        assert!(apply_heat_semigroup(&f, -1.0, 0.0).is_err());
    }

    #[test]
    fn phi1_examples() {
        assert_eq!(phi1(0.0), 1.0);
        assert!((phi1(-1.0) - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((phi1(-1.0) - 0.63212).abs() < 1e-5);
        // the series branch and the closed form agree at the switch point
        assert!((phi1(-1.1e-6) - phi1(-0.9e-6)).abs() < 1e-6);

        let g = make_grid(1, 16).unwrap();
        let one = Field::constant(&g, 3.0);
        let w = apply_phi1_weight(&one, 1.0, 0.0).unwrap();
        assert!(w.values().iter().all(|v| (v - 3.0).abs() < 1e-14));
        assert!(apply_phi1_weight(&one, 0.0, 0.0).is_err());
    }

    #[test]
    fn phi1_small_time_limit() {
        let g = make_grid(1, 16).unwrap();
        let f = Field::from_fn(&g, |x| (PI * x[0]).sin() + 0.3 * (3.0 * PI * x[0]).cos());
        for t in [1e-3, 1e-4, 1e-5] {
            let w = apply_phi1_weight(&f, t, 0.5).unwrap();
            let err = (&w - &f).sup_norm();
            // phi_1(-tL) - 1 ~ -tL/2 with L <= 9 pi^2 + 0.5
            assert!(err <= t * (9.0 * PI * PI + 0.5), "t={t} err={err}");
        }
    }

    #[test]
    fn derivative_of_sine() {
        let g = make_grid(2, 16).unwrap();
        let f = Field::from_fn(&g, |x| (PI * x[0]).sin() * (2.0 * PI * x[1]).cos());
        let dx = f.derivative(0);
        let dy = f.derivative(1);
        let mut x = [0.0; 2];
        for i in 0..g.len() {
            g.point(i, &mut x);
            let ex = PI * (PI * x[0]).cos() * (2.0 * PI * x[1]).cos();
            let ey = -2.0 * PI * (PI * x[0]).sin() * (2.0 * PI * x[1]).sin();
            assert!((dx.values()[i] - ex).abs() < 1e-12);
            assert!((dy.values()[i] - ey).abs() < 1e-12);
        }
    }

    #[test]
    fn lp_norms_of_constants() {
        let g = make_grid(2, 8).unwrap();
        let f = Field::constant(&g, 3.0);
        assert!((f.lp_norm(2.0) - 3.0 * 2.0).abs() < 1e-12);
        assert!((f.lp_norm(1.0) - 12.0).abs() < 1e-12);
        assert!((f.lp_norm(4.0) - 3.0 * 4f64.powf(0.25)).abs() < 1e-12);
        assert_eq!(f.lp_norm(f64::INFINITY), 3.0);
    }
}
