//! Resolvent kernels of the singular Gronwall inequality
//! `f(t) <= g(t) + int k1(t-s) h(s) ds + int k2(t-s) f(s) ds` with
//! `k1(s) = e^{-cs} s^{-sigma'}`, `k2(s) = K0 e^{-cs} s^{-sigma}`.
//!
//! The resolvents are Mittag-Leffler type series in `s^{1-sigma}`; all sums
//! are accumulated in log space.

use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};

/// Relative size of the last kept term.
const SERIES_TOL: f64 = 1e-16;
const SERIES_CAP: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GronwallParams {
    pub sigma: f64,
    pub sigma_prime: f64,
    pub k0: f64,
    pub c: f64,
}

impl GronwallParams {
    pub fn new(sigma: f64, sigma_prime: f64, k0: f64, c: f64) -> Result<Self> {
        let p = Self {
            sigma,
            sigma_prime,
            k0,
            c,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(invalid(format!("sigma = {} not in (0, 1)", self.sigma)));
        }
        if !(self.sigma_prime > 0.0 && self.sigma_prime < 1.0) {
            return Err(invalid(format!("sigma' = {} not in (0, 1)", self.sigma_prime)));
        }
        if !(self.k0 > 0.0 && self.k0.is_finite()) {
            return Err(invalid(format!("K0 = {} must be positive", self.k0)));
        }
        if !self.c.is_finite() {
            return Err(invalid("c must be finite"));
        }
        Ok(())
    }
}

/// `log sum_n exp(log_term(n))`, stopped once terms are decreasing and below
/// `SERIES_TOL` of the partial sum.
fn log_series(log_term: impl Fn(usize) -> f64) -> f64 {
    let mut acc = f64::NEG_INFINITY;
    let mut prev = f64::NEG_INFINITY;
    for n in 0..SERIES_CAP {
        let t = log_term(n);
        acc = log_add(acc, t);
        if n > 0 && t < prev && t - acc < SERIES_TOL.ln() {
            break;
        }
        prev = t;
    }
    acc
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Log of `sum_n Gamma(1-sigma)^{n+1} / Gamma((n+1)(1-sigma)) s^{n(1-sigma)}`.
pub fn series_log(s: f64, sigma: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(invalid(format!("series needs s > 0, got {s}")));
    }
    if !(sigma > 0.0 && sigma < 1.0) {
        return Err(invalid(format!("sigma = {sigma} not in (0, 1)")));
    }
    let a = 1.0 - sigma;
    let lg = ln_gamma(a);
    let ls = s.ln();
    Ok(log_series(|n| {
        let n = n as f64;
        (n + 1.0) * lg - ln_gamma((n + 1.0) * a) + n * a * ls
    }))
}

/// `(1/s) log(series)`, which tends to `Gamma(1-sigma)^{1/(1-sigma)}`.
pub fn series_rate(s: f64, sigma: f64) -> Result<f64> {
    Ok(series_log(s, sigma)? / s)
}

/// The limit `Gamma(1-sigma)^{1/(1-sigma)}` of [`series_rate`].
pub fn asymptotic_rate(sigma: f64) -> f64 {
    (ln_gamma(1.0 - sigma) / (1.0 - sigma)).exp()
}

/// `sum_n x^{n(1-sigma)} / Gamma(n(1-sigma) + 1)` for `x > 0`.
pub fn mittag_leffler_sum(x: f64, sigma: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(invalid(format!("need x > 0, got {x}")));
    }
    let a = 1.0 - sigma;
    let lx = x.ln();
    Ok(log_series(|n| {
        let n = n as f64;
        n * a * lx - ln_gamma(n * a + 1.0)
    })
    .exp())
}

/// Logs of the series factors of `kbar1` and `kbar2`, i.e. of
/// `kbar1(s) s^{sigma'} e^{cs}` and `kbar2(s) s^{sigma} e^{cs}`.
pub fn kbar_series_log(s: f64, params: &GronwallParams) -> Result<(f64, f64)> {
    params.validate()?;
    if !(s > 0.0) {
        return Err(invalid(format!("kernel needs s > 0, got {s}")));
    }
    let a = 1.0 - params.sigma;
    let ap = 1.0 - params.sigma_prime;
    let lq = params.k0.ln() + ln_gamma(a);
    let lgp = ln_gamma(ap);
    let ls = s.ln();
    let l1 = log_series(|n| {
        let n = n as f64;
        n * lq + lgp - ln_gamma(n * a + ap) + n * a * ls
    });
    let l2 = log_series(|n| {
        let n = n as f64;
        (n + 1.0) * lq - ln_gamma((n + 1.0) * a) + n * a * ls
    });
    Ok((l1, l2))
}

/// `(kbar1(s), kbar2(s))`.
pub fn kbar(s: f64, params: &GronwallParams) -> Result<(f64, f64)> {
    let (l1, l2) = kbar_series_log(s, params)?;
    let ls = s.ln();
    let k1 = (l1 - params.sigma_prime * ls - params.c * s).exp();
    let k2 = (l2 - params.sigma * ls - params.c * s).exp();
    Ok((k1, k2))
}

/// A kernel `e^{-cu} sum_n exp(log_coef(n)) u^{beta(n)}` on a uniform grid,
/// reduced to per-cell weights: on cell `j` (`u` in `[j dt, (j+1) dt]`) the
/// factor `e^{-cu} q(t - u)` is interpolated linearly and each power law is
/// integrated exactly. `left[j]`, `right[j]` multiply the factor at lags `j`
/// and `j + 1`.
struct CellWeights {
    left: Vec<f64>,
    right: Vec<f64>,
}

impl CellWeights {
    fn new(cells: usize, dt: f64, log_coef: impl Fn(usize) -> f64, beta: impl Fn(usize) -> f64) -> Self {
        let mut left = vec![0.0; cells];
        let mut right = vec![0.0; cells];
        for j in 0..cells {
            let (a, b) = (j as f64 * dt, (j + 1) as f64 * dt);
            let (la, lb) = (a.ln(), b.ln());
            let (mut sl, mut sr) = (0.0, 0.0);
            let mut prev = f64::NEG_INFINITY;
            for n in 0..SERIES_CAP {
                let (lc, e) = (log_coef(n), beta(n));
                // integral of u^e and u^{e+1} over [a, b], scaled by the coefficient
                let top0 = (lc + (e + 1.0) * lb).exp() / (e + 1.0);
                let bot0 = if a > 0.0 {
                    (lc + (e + 1.0) * la).exp() / (e + 1.0)
                } else {
                    0.0
                };
                let top1 = (lc + (e + 2.0) * lb).exp() / (e + 2.0);
                let bot1 = if a > 0.0 {
                    (lc + (e + 2.0) * la).exp() / (e + 2.0)
                } else {
                    0.0
                };
                let (m0, m1) = (top0 - bot0, top1 - bot1);
                let l = (b * m0 - m1) / dt;
                let r = (m1 - a * m0) / dt;
                sl += l;
                sr += r;
                let size = lc + (e + 1.0) * lb;
                let total = (sl + sr).ln();
                if n > 0 && size < prev && size - total < SERIES_TOL.ln() {
                    break;
                }
                prev = size;
            }
            left[j] = sl;
            right[j] = sr;
        }
        Self { left, right }
    }

    /// `int_0^{t_i} K(u) q(t_i - u) du` from samples of `q` with lag decay
    /// `decay[j] = e^{-c j dt}`.
    fn convolve(&self, i: usize, q: &[f64], decay: &[f64]) -> f64 {
        (0..i)
            .map(|j| self.left[j] * decay[j] * q[i - j] + self.right[j] * decay[j + 1] * q[i - j - 1])
            .sum()
    }
}

fn kbar_cells(steps: usize, dt: f64, params: &GronwallParams) -> (CellWeights, CellWeights) {
    let a = 1.0 - params.sigma;
    let ap = 1.0 - params.sigma_prime;
    let lq = params.k0.ln() + ln_gamma(a);
    let lgp = ln_gamma(ap);
    let (sigma, sigma_p) = (params.sigma, params.sigma_prime);
    let k1 = CellWeights::new(
        steps,
        dt,
        |n| {
            let n = n as f64;
            n * lq + lgp - ln_gamma(n * a + ap)
        },
        |n| n as f64 * a - sigma_p,
    );
    let k2 = CellWeights::new(
        steps,
        dt,
        |n| {
            let n = n as f64;
            (n + 1.0) * lq - ln_gamma((n + 1.0) * a)
        },
        |n| n as f64 * a - sigma,
    );
    (k1, k2)
}

fn single_term_cells(steps: usize, dt: f64, coef: f64, exponent: f64) -> CellWeights {
    let lc = coef.ln();
    CellWeights::new(
        steps,
        dt,
        |n| if n == 0 { lc } else { f64::NEG_INFINITY },
        |_| -exponent,
    )
}

fn check_uniform(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(invalid("time grid needs at least two points"));
    }
    if times[0] != 0.0 {
        return Err(invalid(format!("time grid must start at 0, got {}", times[0])));
    }
    let dt = times[1] - times[0];
    if !(dt > 0.0) {
        return Err(invalid("time grid must be increasing"));
    }
    for (i, t) in times.iter().enumerate() {
        if (t - i as f64 * dt).abs() > 1e-9 * dt.max(t.abs()) {
            return Err(invalid(format!("time grid is not uniform at index {i}")));
        }
    }
    Ok(dt)
}

fn check_inputs(g: &[f64], h: &[f64], params: &GronwallParams, times: &[f64]) -> Result<f64> {
    params.validate()?;
    if g.len() != times.len() || h.len() != times.len() {
        return Err(invalid("g, h and the time grid must have equal length"));
    }
    check_uniform(times)
}

/// Right-hand side of the Gronwall conclusion,
/// `g(t) + int_0^t (kbar2(t-s) g(s) + kbar1(t-s) h(s)) ds`, at each grid time.
///
/// The time grid must be uniform and start at 0.
pub fn gronwall_apply(g: &[f64], h: &[f64], params: &GronwallParams, times: &[f64]) -> Result<Vec<f64>> {
    let dt = check_inputs(g, h, params, times)?;
    let steps = times.len() - 1;
    let (k1, k2) = kbar_cells(steps, dt, params);
    let decay: Vec<f64> = (0..=steps).map(|j| (-params.c * j as f64 * dt).exp()).collect();
    Ok((0..=steps)
        .map(|i| g[i] + k2.convolve(i, g, &decay) + k1.convolve(i, h, &decay))
        .collect())
}

/// `int_0^{t_i} e^{-rate u} u^{-sigma} q(t_i - u) du` at each point of a
/// uniform grid with spacing `dt` starting at 0.
pub fn singular_convolution(q: &[f64], dt: f64, sigma: f64, rate: f64) -> Result<Vec<f64>> {
    if !(0.0..1.0).contains(&sigma) {
        return Err(invalid(format!("sigma = {sigma} not in [0, 1)")));
    }
    if !(dt > 0.0) || q.is_empty() {
        return Err(invalid("singular convolution needs dt > 0 and samples"));
    }
    let steps = q.len() - 1;
    let cells = single_term_cells(steps, dt, 1.0, sigma);
    let decay: Vec<f64> = (0..=steps).map(|j| (-rate * j as f64 * dt).exp()).collect();
    Ok((0..=steps).map(|i| cells.convolve(i, q, &decay)).collect())
}

/// Solves the hypothesis with equality by fixed-point iteration, with the
/// same cell quadrature for `k1`, `k2`.
pub fn gronwall_hypothesis_fixed_point(
    g: &[f64],
    h: &[f64],
    params: &GronwallParams,
    times: &[f64],
    iterations: usize,
) -> Result<Vec<f64>> {
    let dt = check_inputs(g, h, params, times)?;
    let steps = times.len() - 1;
    let k1 = single_term_cells(steps, dt, 1.0, params.sigma_prime);
    let k2 = single_term_cells(steps, dt, params.k0, params.sigma);
    let decay: Vec<f64> = (0..=steps).map(|j| (-params.c * j as f64 * dt).exp()).collect();
    let forced: Vec<f64> = (0..=steps).map(|i| g[i] + k1.convolve(i, h, &decay)).collect();
    let mut f = vec![0.0; times.len()];
    for _ in 0..iterations {
        f = (0..=steps).map(|i| forced[i] + k2.convolve(i, &f, &decay)).collect();
    }
    Ok(f)
}

/// A value that may be too large for `f64`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Magnitude {
    Value(f64),
    /// Natural log of a positive value above `1e300`.
    Log(f64),
}

impl Magnitude {
    fn from_log(l: f64) -> Self {
        if l > 300.0 * std::f64::consts::LN_10 {
            Magnitude::Log(l)
        } else {
            Magnitude::Value(l.exp())
        }
    }

    pub fn ln(&self) -> f64 {
        match *self {
            Magnitude::Value(v) => v.ln(),
            Magnitude::Log(l) => l,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimateConstants {
    /// `c = c0 K^{30p}`.
    pub c: Magnitude,
    /// `c - (8K)^8`.
    pub unc: Magnitude,
}

/// The prescribed mass `c = c0 K^{30p}` and the effective decay
/// `c - (8K)^8`.
pub fn constants(k: f64, p: u32, c0: f64) -> Result<EstimateConstants> {
    if !(k >= 1.0) {
        return Err(invalid(format!("K = {k} must be >= 1")));
    }
    if !(c0 > 0.0) {
        return Err(invalid(format!("c0 = {c0} must be positive")));
    }
    let log_c = c0.ln() + 30.0 * f64::from(p) * k.ln();
    let c = match Magnitude::from_log(log_c) {
        Magnitude::Value(_) => Magnitude::Value(c0 * k.powf(30.0 * f64::from(p))),
        big => big,
    };
    let shift = (8.0 * k).powi(8);
    let unc = match c {
        Magnitude::Value(v) => Magnitude::Value(v - shift),
        // (8K)^8 is below 1e-280 relative to c here
        Magnitude::Log(l) => Magnitude::Log(l),
    };
    Ok(EstimateConstants { c, unc })
}
