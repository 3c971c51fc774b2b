//! Empirical scaling exponents for the Besov-space inequalities.
//!
//! Each inequality `lhs(f) <= C t^e rhs(f)` (or `C N^e` with a frequency
//! scale `N`) is sampled on random band-limited fields. For every parameter
//! value the worst ratio `lhs / rhs` over the samples is kept, and `e` is
//! fitted by least squares on `log(ratio)` against `log(param)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::{BesovIndex, DyadicDecomposition};
use crate::error::{invalid, Result};
use crate::grid::{apply_heat_semigroup, Field, TorusGrid};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Inequality {
    /// `|e^{t Lap} f|_{B^alpha_{p,inf}} <= C t^{(beta - alpha)/2} |f|_{B^beta_{p,inf}}`.
    HeatSmoothing { alpha: f64, beta: f64, p: f64 },
    /// `|f < g|_{B^{alpha+beta}} <= C |f|_{B^alpha} |g|_{B^beta}`, `alpha < 0`.
    ParaLt { alpha: f64, beta: f64 },
    /// `|f = g|_{B^{alpha+beta}} <= C |f|_{B^alpha} |g|_{B^beta}`, `alpha + beta > 0`.
    Resonant { alpha: f64, beta: f64 },
    /// Hölder interpolation between `B^{-1/2}_{2,inf}` and `B^{3/2}_{inf,inf}`.
    Interpolation { nu: f64 },
    /// `|f|_{B^alpha_{inf,inf}} <= C |f|_{B^{alpha + d/r}_{r,inf}}`.
    Embedding { alpha: f64, r: f64 },
    /// `|f|_{B^alpha_{p,inf}} <= C (|f|_p^{1-alpha} |grad f|_p^alpha + |f|_p)`.
    Sobolev { alpha: f64, p: f64 },
}

impl Inequality {
    pub fn tag(&self) -> &'static str {
        match self {
            Inequality::HeatSmoothing { .. } => "heat_smoothing",
            Inequality::ParaLt { .. } => "para_lt",
            Inequality::Resonant { .. } => "resonant",
            Inequality::Interpolation { .. } => "interpolation",
            Inequality::Embedding { .. } => "embedding",
            Inequality::Sobolev { .. } => "sobolev",
        }
    }

    /// Parameters as `key=value` pairs separated by `;`.
    pub fn param(&self) -> String {
        let f = |x: &f64| {
            if x.is_infinite() {
                "inf".to_string()
            } else {
                format!("{x}")
            }
        };
        match self {
            Inequality::HeatSmoothing { alpha, beta, p } => {
                format!("alpha={};beta={};p={}", f(alpha), f(beta), f(p))
            }
            Inequality::ParaLt { alpha, beta } | Inequality::Resonant { alpha, beta } => {
                format!("alpha={};beta={}", f(alpha), f(beta))
            }
            Inequality::Interpolation { nu } => format!("nu={}", f(nu)),
            Inequality::Embedding { alpha, r } => format!("alpha={};r={}", f(alpha), f(r)),
            Inequality::Sobolev { alpha, p } => format!("alpha={};p={}", f(alpha), f(p)),
        }
    }

    /// Exponent the fit should recover: `(beta - alpha) / 2` for the heat
    /// flow, 0 for the scale-free bounds.
    pub fn expected_exponent(&self) -> f64 {
        match self {
            Inequality::HeatSmoothing { alpha, beta, .. } => (beta - alpha) / 2.0,
            _ => 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Inequality::HeatSmoothing { alpha, beta, p } => alpha >= beta && p >= 1.0,
            Inequality::ParaLt { alpha, .. } => alpha < 0.0,
            Inequality::Resonant { alpha, beta } => alpha + beta > 0.0,
            Inequality::Interpolation { nu } => (0.0..=1.0).contains(&nu),
            Inequality::Embedding { r, .. } => r >= 1.0,
            Inequality::Sobolev { alpha, p } => alpha > 0.0 && alpha <= 1.0 && p >= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!(
                "inadmissible parameters for {}: {}",
                self.tag(),
                self.param()
            )))
        }
    }
}

/// Sampling settings.
#[derive(Clone, Debug)]
pub struct FitSettings {
    pub samples: usize,
    pub seed: u64,
    /// Heat-flow times are `2^j` for `j` in this inclusive range.
    pub heat_log2_t: (i32, i32),
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            samples: 64,
            seed: 0,
            heat_log2_t: (-16, -8),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FitResult {
    pub inequality: Inequality,
    pub exponent: f64,
    /// Largest `ratio / param^exponent_expected` over all parameters.
    pub worst_constant: f64,
    pub params: Vec<f64>,
    pub worst_ratios: Vec<f64>,
}

/// One CSV row: `inequality_tag, param, fitted_exponent, worst_constant, n, seed`.
#[derive(Clone, Debug, PartialEq)]
pub struct FitRow {
    pub inequality_tag: String,
    pub param: String,
    pub fitted_exponent: f64,
    pub worst_constant: f64,
    pub n: usize,
    pub seed: u64,
}

impl FitResult {
    pub fn row(&self, n: usize, seed: u64) -> FitRow {
        FitRow {
            inequality_tag: self.inequality.tag().to_string(),
            param: self.inequality.param(),
            fitted_exponent: self.exponent,
            worst_constant: self.worst_constant,
            n,
            seed,
        }
    }
}

pub const FIT_COLUMNS: [&str; 6] = [
    "inequality_tag",
    "param",
    "fitted_exponent",
    "worst_constant",
    "n",
    "seed",
];

impl FitRow {
    pub fn fields(&self) -> Vec<String> {
        vec![
            self.inequality_tag.clone(),
            self.param.clone(),
            format!("{}", self.fitted_exponent),
            format!("{}", self.worst_constant),
            self.n.to_string(),
            self.seed.to_string(),
        ]
    }
}

/// Least-squares slope of `y` against `x`.
pub fn ls_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Mean-zero Gaussian field whose spectrum is concentrated on a thin
/// log-normal shell around radius `center` (in units of the base scale).
pub fn narrowband_field(grid: &TorusGrid, center: f64, width: f64, rng: &mut impl Rng) -> Field {
    let values: Vec<f64> = (0..grid.len()).map(|_| rng.sample(StandardNormal)).collect();
    let noise = Field::from_values_unchecked(grid, values);
    let pi = std::f64::consts::PI;
    let spec = noise
        .spectrum()
        .iter()
        .zip(grid.zeta_sq())
        .map(|(c, z)| {
            let r = z.sqrt() / pi;
            if r == 0.0 {
                return num_complex::Complex64::new(0.0, 0.0);
            }
            let l = (r / center).ln() / width;
            c * (-0.5 * l * l).exp()
        })
        .collect();
    Field::from_spectrum_unchecked(grid, spec)
}

fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp()
}

fn nonzero(x: f64) -> Result<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(invalid("degenerate sample: zero field"))
    }
}

const BAND_WIDTH: f64 = 0.08;

/// Fits the scaling exponent of `ineq` on the decomposition's grid.
pub fn fit_inequality_exponent(
    ineq: Inequality,
    dec: &DyadicDecomposition,
    settings: &FitSettings,
) -> Result<FitResult> {
    ineq.validate()?;
    if settings.samples == 0 {
        return Err(invalid("need at least one sample"));
    }
    let grid = dec.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    // Largest radius fully inside the lattice along every axis.
    let r_top = 0.45 * grid.n() as f64;

    let (params, worst) = match ineq {
        Inequality::HeatSmoothing { alpha, beta, p } => {
            let (lo, hi) = settings.heat_log2_t;
            if lo > hi {
                return Err(invalid("empty time range"));
            }
            let ts: Vec<f64> = (lo..=hi).map(|j| 2f64.powi(j)).collect();
            let mut worst = vec![0.0f64; ts.len()];
            let a = BesovIndex {
                alpha,
                p,
                q: f64::INFINITY,
            };
            let b = BesovIndex {
                alpha: beta,
                p,
                q: f64::INFINITY,
            };
            for _ in 0..settings.samples {
                let f = narrowband_field(grid, log_uniform(&mut rng, 1.0, r_top), BAND_WIDTH, &mut rng);
                let den = nonzero(dec.blocks(&f).besov_norm(b))?;
                for (t, w) in ts.iter().zip(worst.iter_mut()) {
                    let h = apply_heat_semigroup(&f, *t, 0.0)?;
                    *w = w.max(dec.blocks(&h).besov_norm(a) / den);
                }
            }
            (ts, worst)
        }
        _ => {
            let scales: Vec<f64> = (1..dec.k_max()).map(|j| 2f64.powi(j)).collect();
            let mut worst = vec![0.0f64; scales.len()];
            for (s, w) in scales.iter().zip(worst.iter_mut()) {
                for _ in 0..settings.samples {
                    let r = ratio_at_scale(ineq, dec, *s, r_top, &mut rng)?;
                    *w = w.max(r);
                }
            }
            (scales, worst)
        }
    };

    let x: Vec<f64> = params.iter().map(|p| p.ln()).collect();
    let y: Vec<f64> = worst.iter().map(|w| w.ln()).collect();
    let exponent = if params.len() >= 2 { ls_slope(&x, &y) } else { 0.0 };
    let e = ineq.expected_exponent();
    let worst_constant = params
        .iter()
        .zip(&worst)
        .map(|(p, w)| w / p.powf(e))
        .fold(0.0, f64::max);
    Ok(FitResult {
        inequality: ineq,
        exponent,
        worst_constant,
        params,
        worst_ratios: worst,
    })
}

/// One sampled ratio `lhs / rhs` with fields living near frequency `scale`.
fn ratio_at_scale(
    ineq: Inequality,
    dec: &DyadicDecomposition,
    scale: f64,
    r_top: f64,
    rng: &mut impl Rng,
) -> Result<f64> {
    let grid = dec.grid();
    let inf = f64::INFINITY;
    let around = |rng: &mut ChaCha8Rng| -> f64 { log_uniform(rng, scale, (2.0 * scale).min(r_top)) };
    let mut local = ChaCha8Rng::seed_from_u64(rng.gen());
    match ineq {
        Inequality::ParaLt { alpha, beta } => {
            let rf = log_uniform(&mut local, 1.0, (scale / 4.0).max(1.0));
            let f = narrowband_field(grid, rf, BAND_WIDTH, &mut local);
            let g = narrowband_field(grid, around(&mut local), BAND_WIDTH, &mut local);
            let (bf, bg) = (dec.blocks(&f), dec.blocks(&g));
            let lhs = dec.blocks(&bf.lt(&bg)).besov_norm(BesovIndex::holder(alpha + beta));
            let rhs = bf.besov_norm(BesovIndex::holder(alpha)) * bg.besov_norm(BesovIndex::holder(beta));
            Ok(lhs / nonzero(rhs)?)
        }
        Inequality::Resonant { alpha, beta } => {
            let c = around(&mut local);
            let f = narrowband_field(grid, c, BAND_WIDTH, &mut local);
            let g = narrowband_field(grid, c * log_uniform(&mut local, 0.7, 1.4), BAND_WIDTH, &mut local);
            let (bf, bg) = (dec.blocks(&f), dec.blocks(&g));
            let lhs = dec.blocks(&bf.res(&bg)).besov_norm(BesovIndex::holder(alpha + beta));
            let rhs = bf.besov_norm(BesovIndex::holder(alpha)) * bg.besov_norm(BesovIndex::holder(beta));
            Ok(lhs / nonzero(rhs)?)
        }
        Inequality::Interpolation { nu } => {
            let f = broadband_field(grid, scale, &mut local);
            let b = dec.blocks(&f);
            let (a0, a1, p0) = (-0.5, 1.5, 2.0);
            let alpha = (1.0 - nu) * a0 + nu * a1;
            let p = if nu == 1.0 { inf } else { p0 / (1.0 - nu) };
            let lhs = b.besov_norm(BesovIndex { alpha, p, q: inf });
            let n0 = b.besov_norm(BesovIndex {
                alpha: a0,
                p: p0,
                q: inf,
            });
            let n1 = b.besov_norm(BesovIndex::holder(a1));
            Ok(lhs / nonzero(n0.powf(1.0 - nu) * n1.powf(nu))?)
        }
        Inequality::Embedding { alpha, r } => {
            let f = narrowband_field(grid, around(&mut local), BAND_WIDTH, &mut local);
            let b = dec.blocks(&f);
            let d = grid.d() as f64;
            let lhs = b.besov_norm(BesovIndex::holder(alpha));
            let rhs = b.besov_norm(BesovIndex {
                alpha: alpha + d / r,
                p: r,
                q: inf,
            });
            Ok(lhs / nonzero(rhs)?)
        }
        Inequality::Sobolev { alpha, p } => {
            let f = broadband_field(grid, scale, &mut local);
            let lhs = dec.blocks(&f).besov_norm(BesovIndex { alpha, p, q: inf });
            let lp = f.lp_norm(p);
            let grad = f.gradient_magnitude().lp_norm(p);
            Ok(lhs / nonzero(lp.powf(1.0 - alpha) * grad.powf(alpha) + lp)?)
        }
        Inequality::HeatSmoothing { .. } => unreachable!("handled by the time sweep"),
    }
}

/// Random field with power spread over all radii up to `top`.
fn broadband_field(grid: &TorusGrid, top: f64, rng: &mut ChaCha8Rng) -> Field {
    let parts = 4;
    let mut acc = Field::zeros(grid);
    for _ in 0..parts {
        let c = log_uniform(rng, 1.0, top.max(1.0));
        let amp: f64 = rng.sample(StandardNormal);
        let f = narrowband_field(grid, c, 0.3, rng);
        acc = Field::linear_combination(&[(1.0, &acc), (amp, &f)]);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::besov::build_dyadic_partition;
    use crate::grid::make_grid;

    #[test]
    fn slope_of_a_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, -0.5, -2.0, -3.5];
        assert!((ls_slope(&x, &y) + 1.5).abs() < 1e-14);
    }

    #[test]
    fn narrowband_is_mean_zero_and_real() {
        let g = make_grid(2, 32).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = narrowband_field(&g, 5.0, 0.1, &mut rng);
        assert!(f.mean().abs() < 1e-14);
        assert!(f.sup_norm() > 0.0);
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = make_grid(1, 32).unwrap();
        let dec = build_dyadic_partition(&g);
        let s = FitSettings::default();
        let bad = Inequality::ParaLt { alpha: 0.5, beta: 0.0 };
        assert!(fit_inequality_exponent(bad, &dec, &s).is_err());
        let bad = Inequality::HeatSmoothing {
            alpha: 0.0,
            beta: 1.0,
            p: 2.0,
        };
        assert!(fit_inequality_exponent(bad, &dec, &s).is_err());
        let none = FitSettings {
            samples: 0,
            ..FitSettings::default()
        };
        let ok = Inequality::Interpolation { nu: 0.5 };
        assert!(fit_inequality_exponent(ok, &dec, &none).is_err());
    }

    #[test]
    fn param_strings() {
        let i = Inequality::HeatSmoothing {
            alpha: 1.0,
            beta: 0.0,
            p: f64::INFINITY,
        };
        assert_eq!(i.tag(), "heat_smoothing");
        assert_eq!(i.param(), "alpha=1;beta=0;p=inf");
        assert_eq!(i.expected_exponent(), -0.5);
    }
}
