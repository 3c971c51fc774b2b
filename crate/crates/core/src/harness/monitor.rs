use statrs::function::gamma::gamma;

use super::num;
use crate::besov::{BesovIndex, DyadicDecomposition};
use crate::error::{invalid, Result};
use crate::grid::apply_heat_semigroup;
use crate::gronwall::singular_convolution;
use crate::solver::{ModelParams, ParaState};

/// The a priori estimate tracked by [`inequality_monitor`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Estimate {
    /// `|v(t)|_{B^beta}` against the initial datum term plus the singular
    /// convolution of `|w|_{L^inf} + K`.
    AprioriV,
    /// `|w(t) - w(s)|_{L^p}` against `c K^7 (t-s)^{1/8} [...]`.
    AprioriDw,
}

impl Estimate {
    pub fn as_str(&self) -> &'static str {
        match self {
            Estimate::AprioriV => "apriori_v",
            Estimate::AprioriDw => "apriori_dw",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "apriori_v" => Ok(Estimate::AprioriV),
            "apriori_dw" => Ok(Estimate::AprioriDw),
            _ => Err(invalid(format!(
                "unknown estimate `{s}`; expected apriori_v or apriori_dw"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonitorRow {
    pub t: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub running_max: f64,
    /// Running `sup |w(u) - e^{(u-u') Lap} w(u')|_{L^p} / (u-u')^{1/8}`;
    /// only filled for [`Estimate::AprioriDw`].
    pub seminorm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonitorReport {
    pub estimate: Estimate,
    pub rows: Vec<MonitorRow>,
    pub max_ratio: f64,
}

impl MonitorReport {
    pub const COLUMNS: [&'static str; 6] = ["t", "lhs", "rhs", "ratio", "running_max", "seminorm"];

    pub fn table(&self) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                vec![
                    num(r.t),
                    num(r.lhs),
                    num(r.rhs),
                    num(r.ratio),
                    num(r.running_max),
                    num(r.seminorm),
                ]
            })
            .collect()
    }
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 && rhs == 0.0 {
        0.0
    } else {
        lhs / rhs
    }
}

fn trapezoid(values: &[f64], dt: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    dt * (values.iter().sum::<f64>() - 0.5 * (values[0] + values[values.len() - 1]))
}

/// Evaluates both sides of the chosen estimate along a trajectory sampled on
/// a uniform grid starting at 0, with every unknown constant set to 1.
///
/// `k` is the diagram bound. The ratios are diagnostics: the true constants
/// are not known, so nothing is asserted about their size.
pub fn inequality_monitor(
    trajectory: &[ParaState],
    which: Estimate,
    params: &ModelParams,
    k: f64,
    dec: &DyadicDecomposition,
) -> Result<MonitorReport> {
    if trajectory.len() < 2 {
        return Err(invalid("need at least two trajectory samples"));
    }
    if !(k >= 1.0) {
        return Err(invalid(format!("diagram bound K = {k} must be at least 1")));
    }
    let t0 = trajectory[0].t;
    let dt = trajectory[1].t - t0;
    if t0.abs() > 1e-12 || !(dt > 0.0) {
        return Err(invalid("trajectory must start at t = 0 with increasing times"));
    }
    for (i, s) in trajectory.iter().enumerate() {
        if (s.t - i as f64 * dt).abs() > 1e-9 * dt.max(s.t) {
            return Err(invalid("trajectory times must be uniform"));
        }
    }
    let eps = params.epsilon;
    let v0_norm = |p: f64| {
        dec.blocks(&trajectory[0].v).besov_norm(BesovIndex {
            alpha: -3.0 * eps,
            p,
            q: f64::INFINITY,
        })
    };
    let mut rows = Vec::with_capacity(trajectory.len() - 1);
    let mut running = 0.0f64;
    match which {
        Estimate::AprioriV => {
            let beta = 0.5 + 2.0 * eps;
            let sigma = (beta + 1.0 + eps) / 2.0;
            let unc = params.c - 1.0 - (k * gamma(1.0 - sigma)).powf(1.0 / (1.0 - sigma));
            let idx = BesovIndex::holder(beta);
            let q: Vec<f64> = trajectory.iter().map(|s| s.w.sup_norm() + k).collect();
            let conv = singular_convolution(&q, dt, sigma, unc)?;
            let v0 = v0_norm(f64::INFINITY);
            for (i, s) in trajectory.iter().enumerate().skip(1) {
                let lhs = dec.blocks(&s.v).besov_norm(idx);
                let initial = if v0 == 0.0 {
                    0.0
                } else {
                    (-unc * s.t).exp() * s.t.powf(-(beta + 3.0 * eps) / 2.0) * v0
                };
                let rhs = initial + k * conv[i];
                let r = ratio(lhs, rhs);
                running = running.max(r);
                rows.push(MonitorRow {
                    t: s.t,
                    lhs,
                    rhs,
                    ratio: r,
                    running_max: running,
                    seminorm: f64::NAN,
                });
            }
        }
        Estimate::AprioriDw => {
            let p = params.p as f64;
            let idx = BesovIndex {
                alpha: 1.0 + 4.0 * eps,
                p,
                q: f64::INFINITY,
            };
            let v0 = v0_norm(p);
            let wb: Vec<f64> = trajectory.iter().map(|s| dec.blocks(&s.w).besov_norm(idx)).collect();
            let wb_p: Vec<f64> = wb.iter().map(|b| b.powf(p)).collect();
            let w3p: Vec<f64> = trajectory.iter().map(|s| s.w.lp_norm(3.0 * p).powf(3.0 * p)).collect();
            let mut seminorm = 0.0f64;
            for i in 1..trajectory.len() {
                let (a, b) = (&trajectory[i - 1], &trajectory[i]);
                for earlier in &trajectory[..i] {
                    let gap = b.t - earlier.t;
                    let d = (&b.w - &apply_heat_semigroup(&earlier.w, gap, 0.0)?).lp_norm(p);
                    seminorm = seminorm.max(d / gap.powf(0.125));
                }
                let lhs = (&b.w - &a.w).lp_norm(p);
                let bracket = 1.0
                    + v0.powi(3)
                    + wb[i - 1]
                    + trapezoid(&wb_p[..=i], dt).powf(1.0 / p)
                    + trapezoid(&w3p[..=i], dt).powf(1.0 / p);
                let rhs = params.c * k.powi(7) * (b.t - a.t).powf(0.125) * bracket;
                let r = ratio(lhs, rhs);
                running = running.max(r);
                rows.push(MonitorRow {
                    t: b.t,
                    lhs,
                    rhs,
                    ratio: r,
                    running_max: running,
                    seminorm,
                });
            }
        }
    }
    Ok(MonitorReport {
        estimate: which,
        rows,
        max_ratio: running,
    })
}
