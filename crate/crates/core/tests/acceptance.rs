//! Acceptance suite: one PASS/FAIL line per criterion, then a summary.
//! Exits nonzero when any criterion fails.
//!
//! The three-dimensional runs share one estimate of the second
//! renormalisation constant, computed up front.

use std::process::ExitCode;
use std::time::Instant;

use phi4::besov::{bony_split, fit_inequality_exponent, DyadicDecomposition, FitSettings, Inequality};
use phi4::grid::{make_grid, Field};
use phi4::gronwall::series_rate;
use phi4::harness::{
    default_c2, run_blowup_control, run_c_invariance, run_coming_down, run_consistency, run_energy_balance,
    run_invariant_measure, run_ode_reference, BlowupConfig, CInvarianceConfig, Check, ComingDownConfig,
    ConsistencyConfig, EnergyBalanceConfig, ExperimentReport, InvariantConfig,
};
use phi4::noise::{member_rng, stationary_ou, wick_c1};
use rand::Rng;
use rand_distr::StandardNormal;

const GRIDS: [(usize, usize); 3] = [(1, 64), (2, 32), (3, 16)];

struct Outcome {
    name: &'static str,
    checks: Vec<Check>,
    secs: f64,
}

fn random_field(d: usize, n: usize, rng: &mut impl Rng) -> Field {
    let grid = make_grid(d, n).unwrap();
    let v = (0..grid.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Field::from_values(&grid, v).unwrap()
}

fn bony() -> Vec<Check> {
    let mut rng = member_rng(1, 0);
    let mut worst = 0.0f64;
    for &(d, n) in &GRIDS {
        let dec = DyadicDecomposition::new(&make_grid(d, n).unwrap());
        for _ in 0..100 {
            let f = random_field(d, n, &mut rng);
            let g = random_field(d, n, &mut rng);
            let s = bony_split(&f, &g, &dec).unwrap();
            let fg = &f * &g;
            let sum = Field::linear_combination(&[(1.0, &s.lt), (1.0, &s.res), (1.0, &s.gt)]);
            worst = worst.max((&sum - &fg).sup_norm() / fg.sup_norm().max(1.0));
        }
    }
    vec![Check::at_most("relative_defect", worst, 1e-10)]
}

fn partition() -> Vec<Check> {
    GRIDS
        .iter()
        .map(|&(d, n)| {
            let dec = DyadicDecomposition::new(&make_grid(d, n).unwrap());
            Check::at_most(format!("d{d}_n{n}"), dec.partition_error(), 1e-12)
        })
        .collect()
}

fn heat_smoothing() -> Vec<Check> {
    let dec = DyadicDecomposition::new(&make_grid(1, 256).unwrap());
    [0.5, 1.0, 1.5]
        .iter()
        .map(|&gap| {
            let ineq = Inequality::HeatSmoothing {
                alpha: gap,
                beta: 0.0,
                p: f64::INFINITY,
            };
            let fit = fit_inequality_exponent(ineq, &dec, &FitSettings::default()).unwrap();
            let target = -gap / 2.0;
            Check::within(format!("exponent_gap{gap}"), fit.exponent, 1.1 * target, 0.9 * target)
        })
        .collect()
}

fn interpolation() -> Vec<Check> {
    let dec = DyadicDecomposition::new(&make_grid(1, 256).unwrap());
    let settings = FitSettings {
        samples: 100,
        ..Default::default()
    };
    [0.25, 0.5, 0.75]
        .iter()
        .map(|&nu| {
            let fit = fit_inequality_exponent(Inequality::Interpolation { nu }, &dec, &settings).unwrap();
            Check::at_most(format!("constant_nu{nu}"), fit.worst_constant, 1.0 + 1e-12)
        })
        .collect()
}

fn wick() -> Vec<Check> {
    let samples = 10_000;
    GRIDS
        .iter()
        .map(|&(d, n)| {
            let grid = make_grid(d, n).unwrap();
            let mut rng = member_rng(2, d as u64);
            let draws: Vec<f64> = (0..samples)
                .map(|_| {
                    stationary_ou(&grid, &mut rng)
                        .values()
                        .iter()
                        .map(|x| x * x)
                        .sum::<f64>()
                        / grid.len() as f64
                })
                .collect();
            let mean = draws.iter().sum::<f64>() / samples as f64;
            let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (samples - 1) as f64;
            let se = (var / samples as f64).sqrt();
            Check::at_most(format!("z_d{d}_n{n}"), (mean - wick_c1(&grid)).abs() / se, 3.0)
        })
        .collect()
}

fn gronwall() -> Vec<Check> {
    let rate = series_rate(50.0, 0.5).unwrap();
    let pi = std::f64::consts::PI;
    vec![Check::within("series_rate", rate, 0.95 * pi, 1.05 * pi)]
}

fn from_report(r: phi4::Result<ExperimentReport>) -> Vec<Check> {
    match r {
        Ok(r) => r.checks,
        Err(e) => {
            println!("  error: {e}");
            vec![Check::at_most("error", f64::INFINITY, 0.0)]
        }
    }
}

fn main() -> ExitCode {
    let grid3 = make_grid(3, 16).unwrap();
    let c2 = default_c2(&DyadicDecomposition::new(&grid3), 0).unwrap();
    println!("C2(d=3, n=16) = {c2:?}");

    type Criterion = (&'static str, Box<dyn Fn() -> Vec<Check>>);
    let criteria: Vec<Criterion> = vec![
        ("bony_exactness", Box::new(bony)),
        ("partition_of_unity", Box::new(partition)),
        ("heat_smoothing_exponent", Box::new(heat_smoothing)),
        ("interpolation_constant", Box::new(interpolation)),
        ("wick_constant", Box::new(wick)),
        (
            "formulation_consistency",
            Box::new(move || {
                from_report(run_consistency(&ConsistencyConfig {
                    c2: Some(c2),
                    ..Default::default()
                }))
            }),
        ),
        (
            "c_invariance",
            Box::new(move || {
                from_report(run_c_invariance(&CInvarianceConfig {
                    c2: Some(c2),
                    ..Default::default()
                }))
            }),
        ),
        (
            "coming_down",
            Box::new(move || {
                from_report(run_coming_down(&ComingDownConfig {
                    c2: Some(c2),
                    ..Default::default()
                }))
            }),
        ),
        (
            "negative_control",
            Box::new(|| from_report(run_blowup_control(&BlowupConfig::default()))),
        ),
        (
            "ode_reference",
            Box::new(|| from_report(run_ode_reference(1.0, 1e-4, 0.5, 1e-3))),
        ),
        ("gronwall_asymptotics", Box::new(gronwall)),
        (
            "energy_balance",
            Box::new(|| from_report(run_energy_balance(&EnergyBalanceConfig::default()))),
        ),
        (
            "invariant_measure",
            Box::new(|| from_report(run_invariant_measure(&InvariantConfig::default()))),
        ),
    ];

    let mut outcomes = Vec::new();
    for (name, run) in criteria {
        let start = Instant::now();
        let checks = run();
        let o = Outcome {
            name,
            checks,
            secs: start.elapsed().as_secs_f64(),
        };
        let ok = o.checks.iter().all(Check::passed);
        let detail: Vec<String> = o.checks.iter().map(Check::line).collect();
        println!(
            "{} {} ({:.1} s): {}",
            if ok { "PASS" } else { "FAIL" },
            o.name,
            o.secs,
            detail.join("; ")
        );
        outcomes.push(o);
    }
    let failed: Vec<&str> = outcomes
        .iter()
        .filter(|o| !o.checks.iter().all(Check::passed))
        .map(|o| o.name)
        .collect();
    println!(
        "{} of {} criteria passed",
        outcomes.len() - failed.len(),
        outcomes.len()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
