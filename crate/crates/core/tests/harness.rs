//! Small-grid runs of the experiment harness.

use phi4::harness::{
    ode_reference, run_blowup_control, run_c_invariance, run_coming_down, run_named, BlowupConfig, CInvarianceConfig,
    ComingDownConfig, ExperimentReport,
};
use phi4::io::RunConfig;

fn ratios(r: &ExperimentReport) -> Vec<(f64, f64)> {
    r.rows
        .iter()
        .filter(|row| row[0] == "ratio")
        .map(|row| (row[3].parse().unwrap(), row[4].parse().unwrap()))
        .collect()
}

fn deterministic(d: usize, dt: f64, lambdas: Vec<f64>) -> ComingDownConfig {
    ComingDownConfig {
        d,
        n: 16,
        dt,
        lambdas,
        record_times: vec![0.5],
        ratio: (1, 0),
        deterministic: true,
        ..Default::default()
    }
}

#[test]
fn large_data_forget_their_size() {
    // both far above the level the cube flow brings them to by t = 1/2; the
    // explicit cube needs 3 lambda^2 dt < 2, hence the small step
    let r = run_coming_down(&deterministic(2, 1e-5, vec![100.0, 200.0])).unwrap();
    let (t, ratio) = ratios(&r)[0];
    assert_eq!(t, 0.5);
    assert!((ratio - 1.0).abs() <= 1e-3, "ratio {ratio}");
    let predicted = ode_reference(200.0, 0.0, 0.5) / ode_reference(100.0, 0.0, 0.5);
    assert!((predicted - 1.0).abs() <= 1e-3);
    assert_eq!(r.check("blowups").unwrap().value, 0.0);
}

#[test]
fn equal_data_give_ratio_one() {
    let r = run_coming_down(&deterministic(1, 1e-4, vec![1.0, 1.0])).unwrap();
    assert_eq!(ratios(&r)[0].1, 1.0);
    assert!(r.passed());
}

#[test]
fn blowup_control_separates_signs() {
    let r = run_blowup_control(&BlowupConfig::default()).unwrap();
    assert!(r.passed(), "{}", r.verdict_text());
    let noisy = run_blowup_control(&BlowupConfig {
        ensemble: 4,
        noise: true,
        ..Default::default()
    })
    .unwrap();
    assert!(noisy.passed(), "{}", noisy.verdict_text());
    // from x0 = 1/2 the reversed cube needs ~2 time units: nothing to flag before 0.2
    let slow = run_blowup_control(&BlowupConfig {
        x0: 0.5,
        ..Default::default()
    })
    .unwrap();
    assert_eq!(slow.check("reversed_flagged_fraction").unwrap().value, 0.0);
    assert!(!slow.passed());
}

#[test]
fn reports_are_reproducible() {
    let cfg = RunConfig {
        d: 1,
        n: 16,
        dt: 1e-4,
        horizon: 0.05,
        experiment: "energy_balance".into(),
        ..Default::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let mut first = run_named(&cfg).unwrap();
    let mut second = run_named(&cfg).unwrap();
    first.runtime_secs = 0.0;
    second.runtime_secs = 0.0;
    first.write(&dir.path().join("a")).unwrap();
    second.write(&dir.path().join("b")).unwrap();
    for f in ["report.csv", "verdict.txt"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        assert_eq!(a, std::fs::read(dir.path().join("b").join(f)).unwrap());
    }
    assert_eq!(first.config_hash, cfg.hash());
}

#[test]
fn reallocation_between_v_and_w_is_absorbed() {
    let cfg = CInvarianceConfig {
        d: 1,
        n: 32,
        horizon: 0.05,
        dts: vec![4e-4, 2e-4, 1e-4],
        reallocate: true,
        noise: false,
        ..Default::default()
    };
    let r = run_c_invariance(&cfg).unwrap();
    let diffs = r.column("difference");
    assert!(diffs.windows(2).all(|w| w[1] < w[0]), "{diffs:?}");
    assert!(r.passed(), "{}", r.verdict_text());
}

#[test]
fn unknown_experiment_is_rejected() {
    let cfg = RunConfig {
        experiment: "nope".into(),
        ..Default::default()
    };
    assert!(run_named(&cfg).is_err());
}

#[test]
fn monitor_ratio_across_resolutions() {
    use phi4::besov::DyadicDecomposition;
    use phi4::diagrams::DiagramSet;
    use phi4::grid::{make_grid, Field};
    use phi4::harness::{inequality_monitor, Estimate};
    use phi4::solver::{build_coefficients, Com1Variant, ModelParams, ParaState, ParaStepper};

    let mut max = Vec::new();
    for n in [16, 32] {
        let grid = make_grid(1, n).unwrap();
        let dec = DyadicDecomposition::new(&grid);
        let ds = DiagramSet::zero(&dec);
        let coeffs = build_coefficients(&ds, 0.0, &dec);
        let stepper = ParaStepper::new(&grid, 5e-3, 1.0, Com1Variant::Massive).unwrap();
        let v0 = Field::from_fn(&grid, |x| (std::f64::consts::PI * x[0]).cos());
        let mut s = ParaState::new(v0, Field::zeros(&grid)).unwrap();
        let mut traj = vec![s.clone()];
        for _ in 0..20 {
            s = stepper.step(&s, &ds, &coeffs, &dec).unwrap().state;
            traj.push(s.clone());
        }
        let r = inequality_monitor(&traj, Estimate::AprioriV, &ModelParams::default(), 1.0, &dec).unwrap();
        assert!(r.max_ratio.is_finite() && r.max_ratio > 0.0);
        max.push(r.max_ratio);
    }
    // the constants are unknown, so the spread is printed rather than asserted
    println!(
        "apriori_v max ratio n=16: {}, n=32: {}, spread {}",
        max[0],
        max[1],
        max[0].max(max[1]) / max[0].min(max[1])
    );
}
