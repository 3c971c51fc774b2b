//! Space-time white noise and the Ornstein–Uhlenbeck field `<1>`.
//!
//! A white-noise increment over a step `dt` has i.i.d. `N(0, dt / h^d)` grid
//! values, `h^d` the cell volume, so that `<dW, phi>` has variance
//! `dt |phi|_{L^2}^2`. Its Fourier coefficients are independent (up to
//! Hermitian symmetry) with `E|c_k|^2 = dt / V`, `V = 2^d`.
//!
//! `<1>` solves `(d_t - Lap + 1) <1> = xi` and is advanced exactly per mode.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::grid::{Field, TorusGrid};

/// Mass of the linear operator driving `<1>`.
pub const OU_MASS: f64 = 1.0;

/// Generator for ensemble member `member` of the family keyed by `root_seed`.
///
/// The stream is `ChaCha8` seeded from `root_seed` with stream id `member`,
/// so members are independent of how they are scheduled.
pub fn member_rng(root_seed: u64, member: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
    rng.set_stream(member);
    rng
}

/// Spectrum of a unit-time white-noise increment (`dt = 1`).
///
/// Scaling by `sqrt(dt)` gives the increment over `dt`. The solvers share one
/// unit draw per step between `<1>` and the direct scheme.
pub fn unit_noise_spectrum(grid: &TorusGrid, rng: &mut impl Rng) -> Vec<Complex64> {
    let sd = 1.0 / grid.cell_volume().sqrt();
    let values: Vec<f64> = (0..grid.len())
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    grid.forward(&values)
}

/// White-noise increment over a step `dt`.
pub fn sample_noise_increment(grid: &TorusGrid, dt: f64, rng: &mut impl Rng) -> Result<Field> {
    if !(dt > 0.0) {
        return Err(invalid(format!("noise increment needs dt > 0, got {dt}")));
    }
    let sd = (dt / grid.cell_volume()).sqrt();
    let values = (0..grid.len())
        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(Field::from_values_unchecked(grid, values))
}

/// Per-mode factors of the exact OU transition over `dt`.
#[derive(Clone, Debug)]
pub struct OuStep {
    dt: f64,
    decay: Vec<f64>,
    gain: Vec<f64>,
}

impl OuStep {
    pub fn new(grid: &TorusGrid, dt: f64) -> Self {
        let decay = grid.zeta_sq().iter().map(|z| (-dt * (z + OU_MASS)).exp()).collect();
        let gain = grid
            .zeta_sq()
            .iter()
            .map(|z| {
                let lam = z + OU_MASS;
                (-(-2.0 * dt * lam).exp_m1() / (2.0 * lam)).sqrt()
            })
            .collect();
        Self { dt, decay, gain }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Stochastic-convolution increment `gain * W` for a unit noise draw.
    pub fn forcing(&self, unit_noise: &[Complex64]) -> Vec<Complex64> {
        unit_noise.iter().zip(&self.gain).map(|(w, g)| w * g).collect()
    }

    pub fn decay(&self) -> &[f64] {
        &self.decay
    }

    pub fn apply(&self, x1: &Field, unit_noise: &[Complex64]) -> Field {
        let spec = x1
            .spectrum()
            .iter()
            .zip(unit_noise)
            .zip(self.decay.iter().zip(&self.gain))
            .map(|((c, w), (e, g))| c * e + w * g)
            .collect();
        Field::from_spectrum_unchecked(x1.grid(), spec)
    }
}

/// Exact OU transition of `<1>` over `dt` with a fresh noise draw.
pub fn ou_update(x1: &Field, dt: f64, rng: &mut impl Rng) -> Result<Field> {
    if !(dt > 0.0) {
        return Err(invalid(format!("OU update needs dt > 0, got {dt}")));
    }
    let w = unit_noise_spectrum(x1.grid(), rng);
    Ok(OuStep::new(x1.grid(), dt).apply(x1, &w))
}

/// A draw from the stationary law of `<1>`.
pub fn stationary_ou(grid: &TorusGrid, rng: &mut impl Rng) -> Field {
    let w = unit_noise_spectrum(grid, rng);
    let spec = w
        .iter()
        .zip(grid.zeta_sq())
        .map(|(c, z)| c * (1.0 / (2.0 * (z + OU_MASS))).sqrt())
        .collect();
    Field::from_spectrum_unchecked(grid, spec)
}

/// Stationary variance `E|c_k|^2 = 1 / (2 lambda V)` of each stored mode.
pub fn stationary_mode_variance(grid: &TorusGrid) -> Vec<f64> {
    let v = grid.volume();
    grid.zeta_sq().iter().map(|z| 1.0 / (2.0 * (z + OU_MASS) * v)).collect()
}

/// `C1`: the stationary pointwise variance `E[<1>(x)^2]`, an exact sum over
/// the full frequency lattice.
pub fn wick_c1(grid: &TorusGrid) -> f64 {
    stationary_mode_variance(grid)
        .iter()
        .zip(grid.multiplicity())
        .map(|(v, m)| v * m)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let g = make_grid(1, 16).unwrap();
        let a = sample_noise_increment(&g, 0.1, &mut member_rng(7, 0)).unwrap();
        let b = sample_noise_increment(&g, 0.1, &mut member_rng(7, 0)).unwrap();
        let c = sample_noise_increment(&g, 0.1, &mut member_rng(7, 1)).unwrap();
        let d = sample_noise_increment(&g, 0.1, &mut member_rng(8, 0)).unwrap();
        assert_eq!(a.values(), b.values());
        assert_ne!(a.values(), c.values());
        assert_ne!(a.values(), d.values());
        assert!(sample_noise_increment(&g, 0.0, &mut member_rng(7, 0)).is_err());
    }

    #[test]
    fn zero_noise_ou_is_pure_decay() {
        let g = make_grid(1, 16).unwrap();
        let f = Field::from_fn(&g, |x| (std::f64::consts::PI * x[0]).cos());
        let step = OuStep::new(&g, 0.05);
        let zero = vec![Complex64::new(0.0, 0.0); g.spectrum_len()];
        let out = step.apply(&f, &zero);
        let factor = (-0.05 * (std::f64::consts::PI.powi(2) + 1.0)).exp();
        for (a, b) in out.values().iter().zip(f.values()) {
            assert!((a - factor * b).abs() < 1e-14);
        }
    }

    #[test]
    fn c1_small_grid() {
        // Independent evaluation over the full lattice for d = 1, n = 8.
        let g = make_grid(1, 8).unwrap();
        let pi2 = std::f64::consts::PI.powi(2);
        let direct: f64 = (-4i64..4)
            .map(|k| 1.0 / (2.0 * (pi2 * (k * k) as f64 + 1.0) * 2.0))
            .sum();
        assert!((wick_c1(&g) - direct).abs() < 1e-15);
    }

    #[test]
    fn c1_grows_with_cutoff() {
        let a = wick_c1(&make_grid(3, 16).unwrap());
        let b = wick_c1(&make_grid(3, 32).unwrap());
        assert!(b > a);
    }
}
