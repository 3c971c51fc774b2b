use std::time::Instant;

use rayon::prelude::*;

use super::engine::{band_profile, Lockstep, NoiseSource, Track};
use super::{num, Check, ExperimentReport};
use crate::besov::{BesovIndex, DyadicDecomposition};
use crate::diagrams::{estimate_c2, DiagramSet};
use crate::error::{invalid, Error, Result};
use crate::grid::{make_grid, Field};
use crate::io::RunConfig;
use crate::noise::{member_rng, wick_c1};
use crate::solver::{
    build_coefficients, energy_balance_residual, Com1Variant, CubeSign, DirectStepper, EnergySample, ModelParams,
    ParaState, ParaStepper,
};
use crate::stats::{batch_means, convergence_order, median};

/// `x' = -x^3 + m x` from `x0` at time `t`, in closed form. `x0` may be
/// infinite, which gives the solution coming down from infinity.
pub fn ode_reference(x0: f64, m: f64, t: f64) -> f64 {
    if x0 == 0.0 {
        return 0.0;
    }
    // y = x^{-2} solves y' = 2 - 2 m y
    let y0 = 1.0 / (x0 * x0);
    let y = if m == 0.0 {
        y0 + 2.0 * t
    } else {
        y0 * (-2.0 * m * t).exp() - (-2.0 * m * t).exp_m1() / m
    };
    x0.signum() / y.sqrt()
}

/// `C2` used when none is given: an ensemble estimate in three dimensions,
/// zero below (the resonant product needs no renormalisation there).
pub fn default_c2(dec: &DyadicDecomposition, root_seed: u64) -> Result<f64> {
    if dec.grid().d() < 3 {
        return Ok(0.0);
    }
    Ok(estimate_c2(dec, 16, 1.0, 1e-3, root_seed)?.c2)
}

fn resolve_c2(c2: Option<f64>, dec: &DyadicDecomposition, seed: u64) -> Result<f64> {
    match c2 {
        Some(v) => Ok(v),
        None => default_c2(dec, seed),
    }
}

fn initial_diagrams(dec: &DyadicDecomposition, c2: f64, noise: bool, source: &mut NoiseSource) -> DiagramSet {
    if noise {
        DiagramSet::stationary(c2, dec, source.rng())
    } else {
        DiagramSet::zero(dec)
    }
}

/// Number of steps of size `dt` covering `t`, rejecting non-multiples.
fn steps_for(t: f64, dt: f64) -> Result<usize> {
    let k = (t / dt).round();
    if (k * dt - t).abs() > 1e-9 * t.max(dt) {
        return Err(invalid(format!("time {t} is not a multiple of dt = {dt}")));
    }
    Ok(k as usize)
}

/// Substep counts of each `dt` relative to the smallest, which must divide
/// all others by a power of two.
fn substeps(dts: &[f64]) -> Result<Vec<usize>> {
    let fine = dts.iter().cloned().fold(f64::INFINITY, f64::min);
    dts.iter()
        .map(|&dt| {
            let r = (dt / fine).round();
            if (r * fine - dt).abs() > 1e-9 * dt || !(r as usize).is_power_of_two() {
                Err(invalid(format!("dt = {dt} is not a power-of-two multiple of {fine}")))
            } else {
                Ok(r as usize)
            }
        })
        .collect()
}

/// Per-run observable series and blow-up time.
type Series = (Vec<f64>, Vec<f64>, Option<f64>);

fn elapsed(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

#[derive(Clone, Debug)]
pub struct ComingDownConfig {
    pub d: usize,
    pub n: usize,
    pub dt: f64,
    pub ensemble: usize,
    pub lambdas: Vec<f64>,
    pub record_times: Vec<f64>,
    /// The ratio statistic compares `lambdas[ratio.0]` with `lambdas[ratio.1]`.
    pub ratio: (usize, usize),
    pub threshold: f64,
    pub params: ModelParams,
    pub root_seed: u64,
    pub c2: Option<f64>,
    /// Zero noise and zero diagrams.
    pub deterministic: bool,
}

impl Default for ComingDownConfig {
    fn default() -> Self {
        Self {
            d: 3,
            n: 16,
            dt: 1e-4,
            ensemble: 8,
            lambdas: vec![1.0, 10.0, 100.0],
            record_times: vec![0.25, 0.5, 1.0],
            ratio: (2, 0),
            threshold: 1.5,
            params: ModelParams::default(),
            root_seed: 0,
            c2: None,
            deterministic: false,
        }
    }
}

/// Coming down from infinity: from `X0 = lambda * profile`, `v0 = 0`,
/// `w0 = X0`, records `sqrt(t) |X(t)|_{B^{-1/2-eps}}` and compares the
/// ensemble medians across `lambda`.
pub fn run_coming_down(cfg: &ComingDownConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    cfg.params.validate()?;
    if cfg.lambdas.is_empty() || cfg.ratio.0 >= cfg.lambdas.len() || cfg.ratio.1 >= cfg.lambdas.len() {
        return Err(invalid("ratio indices out of range"));
    }
    if cfg.ensemble == 0 || cfg.record_times.is_empty() {
        return Err(invalid("need a non-empty ensemble and record times"));
    }
    let grid = make_grid(cfg.d, cfg.n)?;
    let dec = DyadicDecomposition::new(&grid);
    let c2 = if cfg.deterministic {
        0.0
    } else {
        resolve_c2(cfg.c2, &dec, cfg.root_seed)?
    };
    let record: Vec<usize> = cfg
        .record_times
        .iter()
        .map(|&t| steps_for(t, cfg.dt))
        .collect::<Result<_>>()?;
    let horizon = *record.iter().max().unwrap();
    let profile = band_profile(&grid);
    let idx = BesovIndex::holder(-0.5 - cfg.params.epsilon);
    let ensemble = if cfg.deterministic { 1 } else { cfg.ensemble };

    // member -> (per lambda, per record time) statistic; None after a blow-up
    let members: Vec<Result<(Vec<Vec<f64>>, usize)>> = (0..ensemble as u64)
        .into_par_iter()
        .map(|member| {
            let mut noise = NoiseSource::new(&grid, member_rng(cfg.root_seed, member), 1, !cfg.deterministic);
            let ds = initial_diagrams(&dec, c2, !cfg.deterministic, &mut noise);
            let tracks = cfg
                .lambdas
                .iter()
                .map(|&l| {
                    Ok(Track::Para {
                        stepper: ParaStepper::new(&grid, cfg.dt, cfg.params.c, cfg.params.com1)?,
                        state: ParaState::new(Field::zeros(&grid), profile.scale(l))?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut ls = Lockstep::new(&dec, ds, cfg.dt, cfg.params.m, tracks)?;
            let mut stats = vec![vec![f64::NAN; record.len()]; cfg.lambdas.len()];
            for step in 1..=horizon {
                ls.step(&mut noise)?;
                for (r, &k) in record.iter().enumerate() {
                    if k == step {
                        for (li, row) in stats.iter_mut().enumerate() {
                            if ls.blown(li).is_none() {
                                let x = ls.x(li);
                                row[r] = ls.t().sqrt() * dec.blocks(&x).besov_norm(idx);
                            }
                        }
                    }
                }
            }
            let blowups = (0..cfg.lambdas.len()).filter(|&i| ls.blown(i).is_some()).count();
            Ok((stats, blowups))
        })
        .collect();

    let mut report = ExperimentReport::new(
        "coming_down",
        &["kind", "lambda", "member", "t", "value"],
        cfg.root_seed,
    );
    let mut blowups = 0;
    let mut table = Vec::new();
    for (member, res) in members.into_iter().enumerate() {
        let (stats, b) = res?;
        blowups += b;
        for (li, row) in stats.iter().enumerate() {
            for (r, v) in row.iter().enumerate() {
                report.push_row(vec![
                    "member".into(),
                    num(cfg.lambdas[li]),
                    member.to_string(),
                    num(cfg.record_times[r]),
                    num(*v),
                ]);
            }
        }
        table.push(stats);
    }
    let med = |li: usize, r: usize| median(&table.iter().map(|s| s[li][r]).collect::<Vec<_>>());
    for li in 0..cfg.lambdas.len() {
        for (r, &t) in cfg.record_times.iter().enumerate() {
            report.push_row(vec![
                "median".into(),
                num(cfg.lambdas[li]),
                "-".into(),
                num(t),
                num(med(li, r)),
            ]);
        }
    }
    let (a, b) = cfg.ratio;
    for (r, &t) in cfg.record_times.iter().enumerate() {
        let ratio = med(a, r) / med(b, r);
        report.push_row(vec![
            "ratio".into(),
            num(cfg.lambdas[a]),
            "-".into(),
            num(t),
            num(ratio),
        ]);
        report
            .checks
            .push(Check::at_most(format!("ratio_t{t}"), ratio, cfg.threshold));
    }
    report.checks.push(Check::at_most("blowups", blowups as f64, 0.0));
    report.runtime_secs = elapsed(start);
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct ConsistencyConfig {
    pub d: usize,
    pub n: usize,
    pub horizon: f64,
    pub dts: Vec<f64>,
    pub params: ModelParams,
    pub amplitude: f64,
    pub root_seed: u64,
    pub c2: Option<f64>,
    pub noise: bool,
    pub min_order: f64,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        Self {
            d: 3,
            n: 16,
            horizon: 0.25,
            dts: vec![2e-4, 1e-4, 5e-5],
            params: ModelParams::default(),
            amplitude: 1.0,
            root_seed: 0,
            c2: None,
            noise: true,
            min_order: 0.8,
        }
    }
}

/// Paracontrolled against direct on one noise path: relative sup distance
/// of the reconstructed `X` at the horizon, for each `dt`.
pub fn run_consistency(cfg: &ConsistencyConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    cfg.params.validate()?;
    if cfg.dts.len() < 2 {
        return Err(invalid("need at least two time steps"));
    }
    let grid = make_grid(cfg.d, cfg.n)?;
    let dec = DyadicDecomposition::new(&grid);
    let c2 = if cfg.noise {
        resolve_c2(cfg.c2, &dec, cfg.root_seed)?
    } else {
        0.0
    };
    let subs = substeps(&cfg.dts)?;
    let x0 = band_profile(&grid).scale(cfg.amplitude);
    let mut report = ExperimentReport::new("consistency", &["dt", "distance", "x_sup"], cfg.root_seed);
    let mut dist = Vec::new();
    let mut blowups = 0;
    for (&dt, &sub) in cfg.dts.iter().zip(&subs) {
        let steps = steps_for(cfg.horizon, dt)?;
        let mut noise = NoiseSource::new(&grid, member_rng(cfg.root_seed, 0), sub, cfg.noise);
        let ds = initial_diagrams(&dec, c2, cfg.noise, &mut noise);
        let direct_x0 = &ds.x1 + &x0;
        let tracks = vec![
            Track::Para {
                stepper: ParaStepper::new(&grid, dt, cfg.params.c, cfg.params.com1)?,
                state: ParaState::new(Field::zeros(&grid), x0.clone())?,
            },
            Track::Direct {
                stepper: DirectStepper::new(&grid, dt, CubeSign::Damping, 1.0)?,
                x: direct_x0,
            },
        ];
        let mut ls = Lockstep::new(&dec, ds, dt, cfg.params.m, tracks)?;
        for _ in 0..steps {
            ls.step(&mut noise)?;
        }
        blowups += (0..2).filter(|&i| ls.blown(i).is_some()).count();
        let xd = ls.x(1);
        let d = (&ls.x(0) - &xd).sup_norm() / xd.sup_norm().max(1.0);
        report.push_row(vec![num(dt), num(d), num(xd.sup_norm())]);
        dist.push(d);
    }
    let order = convergence_order(&cfg.dts, &dist);
    report.checks.push(Check::at_least("order", order, cfg.min_order));
    report.checks.push(Check::at_most("blowups", blowups as f64, 0.0));
    report.runtime_secs = elapsed(start);
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct CInvarianceConfig {
    pub d: usize,
    pub n: usize,
    pub horizon: f64,
    pub dts: Vec<f64>,
    pub cs: (f64, f64),
    pub params: ModelParams,
    pub amplitude: f64,
    /// Start the second run from `(h, X0 - h)` instead of `(0, X0)`.
    pub reallocate: bool,
    pub root_seed: u64,
    pub c2: Option<f64>,
    pub noise: bool,
    /// Accepted band around 2 for the shrink factor under halving.
    pub band: f64,
}

impl Default for CInvarianceConfig {
    fn default() -> Self {
        Self {
            d: 3,
            n: 16,
            horizon: 0.25,
            dts: vec![2e-4, 1e-4, 5e-5],
            cs: (1.0, 50.0),
            params: ModelParams::default(),
            amplitude: 1.0,
            reallocate: false,
            root_seed: 0,
            c2: None,
            noise: true,
            band: 0.2,
        }
    }
}

/// Two paracontrolled runs with different `c` on one noise path: sup
/// distance of `v + w` at the horizon, for each `dt`.
pub fn run_c_invariance(cfg: &CInvarianceConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    cfg.params.validate()?;
    let grid = make_grid(cfg.d, cfg.n)?;
    let dec = DyadicDecomposition::new(&grid);
    let c2 = if cfg.noise {
        resolve_c2(cfg.c2, &dec, cfg.root_seed)?
    } else {
        0.0
    };
    let subs = substeps(&cfg.dts)?;
    let x0 = band_profile(&grid).scale(cfg.amplitude);
    let h = Field::from_fn(&grid, |x| {
        0.3 * x.iter().map(|&xi| (2.0 * std::f64::consts::PI * xi).sin()).sum::<f64>()
    });
    let mut report = ExperimentReport::new("c_invariance", &["dt", "difference"], cfg.root_seed);
    let mut diffs = Vec::new();
    let mut blowups = 0;
    for (&dt, &sub) in cfg.dts.iter().zip(&subs) {
        let steps = steps_for(cfg.horizon, dt)?;
        let mut noise = NoiseSource::new(&grid, member_rng(cfg.root_seed, 0), sub, cfg.noise);
        let ds = initial_diagrams(&dec, c2, cfg.noise, &mut noise);
        let second = if cfg.reallocate {
            ParaState::new(h.clone(), &x0 - &h)?
        } else {
            ParaState::new(Field::zeros(&grid), x0.clone())?
        };
        let tracks = vec![
            Track::Para {
                stepper: ParaStepper::new(&grid, dt, cfg.cs.0, cfg.params.com1)?,
                state: ParaState::new(Field::zeros(&grid), x0.clone())?,
            },
            Track::Para {
                stepper: ParaStepper::new(&grid, dt, cfg.cs.1, cfg.params.com1)?,
                state: second,
            },
        ];
        let mut ls = Lockstep::new(&dec, ds, dt, cfg.params.m, tracks)?;
        for _ in 0..steps {
            ls.step(&mut noise)?;
        }
        blowups += (0..2).filter(|&i| ls.blown(i).is_some()).count();
        let sum = |i: usize| match &ls.tracks()[i] {
            Track::Para { state, .. } => &state.v + &state.w,
            Track::Direct { x, .. } => x.clone(),
        };
        let d = (&sum(0) - &sum(1)).sup_norm();
        report.push_row(vec![num(dt), num(d)]);
        diffs.push(d);
    }
    for i in 1..diffs.len() {
        let factor = diffs[i - 1] / diffs[i];
        let expect = cfg.dts[i - 1] / cfg.dts[i];
        report.checks.push(Check::within(
            format!("shrink_{}", i),
            factor,
            expect * (1.0 - cfg.band),
            expect * (1.0 + cfg.band),
        ));
    }
    report.checks.push(Check::at_most("blowups", blowups as f64, 0.0));
    report.runtime_secs = elapsed(start);
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct BlowupConfig {
    pub d: usize,
    pub n: usize,
    pub dt: f64,
    pub horizon: f64,
    pub ensemble: usize,
    pub x0: f64,
    pub m: f64,
    pub noise: bool,
    pub root_seed: u64,
    pub c2: Option<f64>,
    pub min_fraction: f64,
}

impl Default for BlowupConfig {
    fn default() -> Self {
        Self {
            d: 1,
            n: 16,
            dt: 1e-4,
            horizon: 0.2,
            ensemble: 1,
            x0: 2.0,
            m: 0.0,
            noise: false,
            root_seed: 0,
            c2: None,
            min_fraction: 0.9,
        }
    }
}

/// Direct runs from the constant `x0` with both signs of the cube.
pub fn run_blowup_control(cfg: &BlowupConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    if cfg.ensemble == 0 {
        return Err(invalid("empty ensemble"));
    }
    let grid = make_grid(cfg.d, cfg.n)?;
    let dec = DyadicDecomposition::new(&grid);
    let (c1, c2) = if cfg.noise {
        (wick_c1(&grid), resolve_c2(cfg.c2, &dec, cfg.root_seed)?)
    } else {
        (0.0, 0.0)
    };
    let steps = steps_for(cfg.horizon, cfg.dt)?;
    let runs: Vec<Result<[Option<f64>; 2]>> = (0..cfg.ensemble as u64)
        .into_par_iter()
        .map(|member| {
            let mut noise = NoiseSource::new(&grid, member_rng(cfg.root_seed, member), 1, cfg.noise);
            let zero = DiagramSet::zero(&dec);
            let ds = DiagramSet::assemble(0.0, zero.x1.clone(), zero.x20.clone(), zero.x30.clone(), c1, c2, &dec);
            let tracks = [CubeSign::Reversed, CubeSign::Damping]
                .into_iter()
                .map(|s| {
                    Ok(Track::Direct {
                        stepper: DirectStepper::new(&grid, cfg.dt, s, 1.0)?,
                        x: Field::constant(&grid, cfg.x0),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let mut ls = Lockstep::new(&dec, ds, cfg.dt, cfg.m, tracks)?;
            for _ in 0..steps {
                ls.step(&mut noise)?;
                if ls.blown(0).is_some() && ls.blown(1).is_some() {
                    break;
                }
            }
            Ok([ls.blown(0), ls.blown(1)])
        })
        .collect();
    let mut report = ExperimentReport::new("blowup_control", &["member", "sign", "blowup_time"], cfg.root_seed);
    let (mut wrong, mut right) = (0usize, 0usize);
    for (member, r) in runs.into_iter().enumerate() {
        let flags = r?;
        for (sign, f) in ["reversed", "damping"].iter().zip(flags) {
            report.push_row(vec![
                member.to_string(),
                sign.to_string(),
                f.map_or("none".to_string(), num),
            ]);
        }
        wrong += usize::from(flags[0].is_some());
        right += usize::from(flags[1].is_some());
    }
    let frac = wrong as f64 / cfg.ensemble as f64;
    report
        .checks
        .push(Check::at_least("reversed_flagged_fraction", frac, cfg.min_fraction));
    report.checks.push(Check::at_most("damping_flags", right as f64, 0.0));
    report.runtime_secs = elapsed(start);
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct InvariantConfig {
    pub d: usize,
    pub n: usize,
    pub dt: f64,
    pub total: f64,
    pub burn_in: f64,
    pub batches: usize,
    /// Constant initial data of the two runs.
    pub inits: (f64, f64),
    pub m: f64,
    pub noise: bool,
    pub root_seed: u64,
    pub c2: Option<f64>,
    pub sigmas: f64,
}

impl Default for InvariantConfig {
    fn default() -> Self {
        Self {
            d: 2,
            n: 64,
            dt: 5e-3,
            total: 200.0,
            burn_in: 20.0,
            batches: 16,
            inits: (0.5, 2.0),
            m: 0.0,
            noise: true,
            root_seed: 0,
            c2: None,
            sigmas: 3.0,
        }
    }
}

/// Long-run averages of the Wick-corrected `<X^2>` and `<X^4>` from two
/// independent initial data and noise streams.
pub fn run_invariant_measure(cfg: &InvariantConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let grid = make_grid(cfg.d, cfg.n)?;
    let dec = DyadicDecomposition::new(&grid);
    let (c1, c2) = if cfg.noise {
        (wick_c1(&grid), resolve_c2(cfg.c2, &dec, cfg.root_seed)?)
    } else {
        (0.0, 0.0)
    };
    let burn = steps_for(cfg.burn_in, cfg.dt)?;
    let total = steps_for(cfg.total, cfg.dt)?;
    if total <= burn {
        return Err(invalid("total time must exceed the burn-in"));
    }
    let run = |member: u64, x0: f64| -> Result<(Vec<f64>, Vec<f64>, Option<f64>)> {
        let mut noise = NoiseSource::new(&grid, member_rng(cfg.root_seed, member), 1, cfg.noise);
        let zero = DiagramSet::zero(&dec);
        let ds = DiagramSet::assemble(0.0, zero.x1.clone(), zero.x20.clone(), zero.x30.clone(), c1, c2, &dec);
        let tracks = vec![Track::Direct {
            stepper: DirectStepper::new(&grid, cfg.dt, CubeSign::Damping, 1.0)?,
            x: Field::constant(&grid, x0),
        }];
        let mut ls = Lockstep::new(&dec, ds, cfg.dt, cfg.m, tracks)?;
        let (mut s2, mut s4) = (Vec::new(), Vec::new());
        for i in 0..total {
            ls.step(&mut noise)?;
            if ls.blown(0).is_some() {
                break;
            }
            if i + 1 > burn {
                if let Track::Direct { x, .. } = &ls.tracks()[0] {
                    let (mut a2, mut a4) = (0.0, 0.0);
                    for &v in x.values() {
                        let q = v * v;
                        a2 += q - c1;
                        a4 += q * q - 6.0 * c1 * q + 3.0 * c1 * c1;
                    }
                    let len = x.values().len() as f64;
                    s2.push(a2 / len);
                    s4.push(a4 / len);
                }
            }
        }
        Ok((s2, s4, ls.blown(0)))
    };
    let results: Vec<Result<Series>> = [(0u64, cfg.inits.0), (1u64, cfg.inits.1)]
        .into_par_iter()
        .map(|(m, x0)| run(m, x0))
        .collect();
    let mut report = ExperimentReport::new(
        "invariant_measure",
        &["run", "observable", "mean", "stderr"],
        cfg.root_seed,
    );
    let mut stats = Vec::new();
    let mut blowups = 0;
    for (i, r) in results.into_iter().enumerate() {
        let (s2, s4, b) = r?;
        if b.is_some() {
            blowups += 1;
            stats.push([(f64::NAN, f64::NAN); 2]);
            continue;
        }
        let e2 = batch_means(&s2, cfg.batches)?;
        let e4 = batch_means(&s4, cfg.batches)?;
        report.push_row(vec![i.to_string(), "x2".into(), num(e2.0), num(e2.1)]);
        report.push_row(vec![i.to_string(), "x4".into(), num(e4.0), num(e4.1)]);
        stats.push([e2, e4]);
    }
    for (k, name) in ["x2", "x4"].iter().enumerate() {
        let (a, b) = (stats[0][k], stats[1][k]);
        let combined = (a.1 * a.1 + b.1 * b.1).sqrt();
        // in units of the combined standard error; exact agreement counts as 0
        let z = if a.0 == b.0 { 0.0 } else { (a.0 - b.0).abs() / combined };
        report.checks.push(Check::at_most(format!("{name}_z"), z, cfg.sigmas));
    }
    report.checks.push(Check::at_most("blowups", blowups as f64, 0.0));
    report.runtime_secs = elapsed(start);
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct EnergyBalanceConfig {
    pub n: usize,
    pub dt: f64,
    pub horizon: f64,
    pub p: u32,
    pub max_residual: f64,
    pub band: f64,
}

impl Default for EnergyBalanceConfig {
    fn default() -> Self {
        Self {
            n: 32,
            dt: 1e-4,
            horizon: 0.05,
            p: 24,
            max_residual: 1e-4,
            band: 0.2,
        }
    }
}

/// Largest running defect of the testing identity along the deterministic
/// cube flow `w' = Lap w - w^3` in one dimension from `(1 + cos(pi x)) / 2`.
pub fn energy_balance_run(n: usize, dt: f64, horizon: f64, p: u32) -> Result<f64> {
    let grid = make_grid(1, n)?;
    let dec = DyadicDecomposition::new(&grid);
    let ds = DiagramSet::zero(&dec);
    let coeffs = build_coefficients(&ds, 0.0, &dec);
    let stepper = ParaStepper::new(&grid, dt, 1.0, Com1Variant::Massive)?;
    let mut state = ParaState::new(Field::zeros(&grid), band_profile(&grid))?;
    let steps = steps_for(horizon, dt)?;
    let mut samples = Vec::with_capacity(steps + 1);
    for _ in 0..=steps {
        let next = stepper.step(&state, &ds, &coeffs, &dec)?;
        samples.push(EnergySample {
            t: state.t,
            w: state.w.clone(),
            forcing: next.forcing,
        });
        state = next.state;
    }
    let r = energy_balance_residual(&samples, p)?;
    Ok(r.iter().map(|v| v.abs()).fold(0.0, f64::max))
}

/// Residual at `dt` and `dt / 2`; passes when the first is below the bound
/// and halving shrinks it by `2 (1 +- band)`.
pub fn run_energy_balance(cfg: &EnergyBalanceConfig) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut report = ExperimentReport::new("energy_balance", &["dt", "max_residual"], 0);
    let a = energy_balance_run(cfg.n, cfg.dt, cfg.horizon, cfg.p)?;
    let b = energy_balance_run(cfg.n, cfg.dt / 2.0, cfg.horizon, cfg.p)?;
    report.push_row(vec![num(cfg.dt), num(a)]);
    report.push_row(vec![num(cfg.dt / 2.0), num(b)]);
    report.checks.push(Check::at_most("residual", a, cfg.max_residual));
    report.checks.push(Check::within(
        "halving_factor",
        a / b,
        2.0 * (1.0 - cfg.band),
        2.0 * (1.0 + cfg.band),
    ));
    report.runtime_secs = elapsed(start);
    Ok(report)
}

/// `step_direct` without noise against the closed-form cube flow.
pub fn run_ode_reference(x0: f64, dt: f64, t: f64, tolerance: f64) -> Result<ExperimentReport> {
    let start = Instant::now();
    let grid = make_grid(1, 8)?;
    let stepper = DirectStepper::new(&grid, dt, CubeSign::Damping, 0.0)?;
    let zero = vec![num_complex::Complex64::new(0.0, 0.0); grid.spectrum_len()];
    let mut x = Field::constant(&grid, x0);
    let steps = steps_for(t, dt)?;
    for i in 0..steps {
        x = stepper.step(&x, 0.0, &zero, (i + 1) as f64 * dt)?;
    }
    let exact = ode_reference(x0, 0.0, t);
    let got = x.mean();
    let mut report = ExperimentReport::new("ode_reference", &["x0", "dt", "t", "numeric", "exact"], 0);
    report.push_row(vec![num(x0), num(dt), num(t), num(got), num(exact)]);
    report
        .checks
        .push(Check::at_most("error", (got - exact).abs(), tolerance));
    report.runtime_secs = elapsed(start);
    Ok(report)
}

/// Runs the experiment named by `cfg.experiment` with the grid, step,
/// horizon, ensemble and model taken from `cfg` and the remaining settings at
/// their defaults.
pub fn run_named(cfg: &RunConfig) -> Result<ExperimentReport> {
    let mut report = match cfg.experiment.as_str() {
        "coming_down" => run_coming_down(&ComingDownConfig {
            d: cfg.d,
            n: cfg.n,
            dt: cfg.dt,
            ensemble: cfg.ensemble_size,
            params: cfg.model.clone(),
            root_seed: cfg.root_seed,
            ..Default::default()
        })?,
        "consistency" => run_consistency(&ConsistencyConfig {
            d: cfg.d,
            n: cfg.n,
            horizon: cfg.horizon,
            dts: vec![cfg.dt, cfg.dt / 2.0, cfg.dt / 4.0],
            params: cfg.model.clone(),
            root_seed: cfg.root_seed,
            ..Default::default()
        })?,
        "c_invariance" => run_c_invariance(&CInvarianceConfig {
            d: cfg.d,
            n: cfg.n,
            horizon: cfg.horizon,
            dts: vec![cfg.dt, cfg.dt / 2.0, cfg.dt / 4.0],
            params: cfg.model.clone(),
            root_seed: cfg.root_seed,
            ..Default::default()
        })?,
        "blowup_control" => run_blowup_control(&BlowupConfig {
            d: cfg.d,
            n: cfg.n,
            dt: cfg.dt,
            horizon: cfg.horizon,
            ensemble: cfg.ensemble_size,
            m: cfg.model.m,
            noise: cfg.ensemble_size > 1,
            root_seed: cfg.root_seed,
            ..Default::default()
        })?,
        "invariant_measure" => run_invariant_measure(&InvariantConfig {
            d: cfg.d,
            n: cfg.n,
            dt: cfg.dt,
            total: cfg.horizon,
            burn_in: cfg.burn_in,
            m: cfg.model.m,
            root_seed: cfg.root_seed,
            ..Default::default()
        })?,
        "energy_balance" => run_energy_balance(&EnergyBalanceConfig {
            n: cfg.n,
            dt: cfg.dt,
            horizon: cfg.horizon,
            p: cfg.model.p,
            ..Default::default()
        })?,
        "ode_reference" => run_ode_reference(1.0, cfg.dt, cfg.horizon.min(0.5), 1e-3)?,
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown experiment `{other}`; expected one of coming_down, consistency, c_invariance, \
                 blowup_control, invariant_measure, energy_balance, ode_reference"
            )))
        }
    };
    report.config_hash = cfg.hash();
    report.root_seed = cfg.root_seed;
    Ok(report)
}
