//! Property tests for the invariants of each module.

use phi4::besov::{besov_norm, bony_split, lp_block, para_lt, resonant, BesovIndex, DyadicDecomposition};
use phi4::diagrams::{DiagramSet, DiagramStepper};
use phi4::grid::{apply_heat_semigroup, apply_phi1_weight, make_grid, Field, TorusGrid};
use phi4::gronwall::{gronwall_apply, kbar, mittag_leffler_sum, GronwallParams};
use phi4::harness::Check;
use phi4::io::{parse_config, read_field_snapshot, write_field_snapshot, RunConfig};
use phi4::noise::{member_rng, unit_noise_spectrum};
use phi4::solver::{CubeSign, Formulation};
use phi4::stats::median;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn grid_strategy() -> impl Strategy<Value = TorusGrid> {
    prop_oneof![Just((1, 32)), Just((2, 16)), Just((3, 8))].prop_map(|(d, n)| make_grid(d, n).unwrap())
}

fn random_field(grid: &TorusGrid, seed: u64) -> Field {
    let mut rng = member_rng(seed, 0);
    let v = (0..grid.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    Field::from_values(grid, v).unwrap()
}

fn rel(a: &Field, b: &Field) -> f64 {
    (a - b).sup_norm() / b.sup_norm().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn heat_semigroup(grid in grid_strategy(), seed in any::<u64>(), s in 0.0f64..0.05, t in 0.0f64..0.05, mass in 0.0f64..3.0) {
        let f = random_field(&grid, seed);
        let once = apply_heat_semigroup(&f, s + t, mass).unwrap();
        let twice = apply_heat_semigroup(&apply_heat_semigroup(&f, s, mass).unwrap(), t, mass).unwrap();
        prop_assert!((&once - &twice).sup_norm() <= 1e-12 * f.sup_norm().max(1.0));
    }

    #[test]
    fn heat_mass_monotone(grid in grid_strategy(), seed in any::<u64>(), t in 0.0f64..0.1, m1 in 0.0f64..2.0, dm in 0.0f64..2.0) {
        let f = random_field(&grid, seed);
        let a = apply_heat_semigroup(&f, t, m1).unwrap();
        let b = apply_heat_semigroup(&f, t, m1 + dm).unwrap();
        for (x, y) in a.spectrum().iter().zip(b.spectrum()) {
            prop_assert!(y.norm() <= x.norm() * (1.0 + 1e-14) + 1e-300);
        }
    }

    #[test]
    fn multipliers_keep_fields_real(grid in grid_strategy(), seed in any::<u64>(), t in 1e-4f64..0.1) {
        let f = random_field(&grid, seed);
        for g in [apply_heat_semigroup(&f, t, 1.0).unwrap(), apply_phi1_weight(&f, t, 0.0).unwrap()] {
            // back to physical space and again: a non-Hermitian spectrum would not survive the trip
            let back = Field::from_spectrum(&grid, g.spectrum().to_vec()).unwrap();
            prop_assert!(rel(&back, &g) <= 1e-10);
            let zero = grid.forward(g.values());
            prop_assert!(zero[0].im.abs() <= 1e-10 * g.sup_norm().max(1.0));
        }
    }

    #[test]
    fn bony_identity(grid in grid_strategy(), a in any::<u64>(), b in any::<u64>()) {
        let dec = DyadicDecomposition::new(&grid);
        let f = random_field(&grid, a);
        let g = random_field(&grid, b);
        let s = bony_split(&f, &g, &dec).unwrap();
        let fg = &f * &g;
        let sum = Field::linear_combination(&[(1.0, &s.lt), (1.0, &s.res), (1.0, &s.gt)]);
        prop_assert!((&sum - &fg).sup_norm() <= 1e-10 * fg.sup_norm().max(1.0));
        let swapped = bony_split(&g, &f, &dec).unwrap();
        prop_assert!((&s.gt - &swapped.lt).sup_norm() <= 1e-12 * fg.sup_norm().max(1.0));
    }

    #[test]
    fn distant_blocks_are_orthogonal(grid in grid_strategy(), seed in any::<u64>()) {
        let dec = DyadicDecomposition::new(&grid);
        let f = random_field(&grid, seed);
        for j in -1..=dec.k_max() {
            let bj = lp_block(&f, j, &dec).unwrap();
            for k in -1..=dec.k_max() {
                if (j - k).abs() >= 2 {
                    prop_assert!(lp_block(&bj, k, &dec).unwrap().sup_norm() <= 1e-12 * f.sup_norm());
                }
            }
        }
    }

    #[test]
    fn besov_zero_below_twice_lp(grid in grid_strategy(), seed in any::<u64>(), p in prop_oneof![Just(1.0), Just(2.0), Just(4.0), Just(f64::INFINITY)]) {
        let dec = DyadicDecomposition::new(&grid);
        let f = random_field(&grid, seed);
        let b = besov_norm(&f, BesovIndex::new(0.0, p, f64::INFINITY).unwrap(), &dec).unwrap();
        prop_assert!(b <= 2.0 * f.lp_norm(p));
    }

    #[test]
    fn homogeneity(grid in grid_strategy(), a in any::<u64>(), b in any::<u64>(), lambda in -5.0f64..5.0, alpha in -1.0f64..1.0) {
        let dec = DyadicDecomposition::new(&grid);
        let f = random_field(&grid, a);
        let g = random_field(&grid, b);
        let lf = f.scale(lambda);
        let idx = BesovIndex::holder(alpha);
        let n = besov_norm(&f, idx, &dec).unwrap();
        prop_assert!((besov_norm(&lf, idx, &dec).unwrap() - lambda.abs() * n).abs() <= 1e-12 * n.max(1.0));
        for op in [para_lt, resonant] {
            let base = op(&f, &g, &dec).unwrap();
            let scaled = op(&lf, &g, &dec).unwrap();
            prop_assert!((&scaled - &base.scale(lambda)).sup_norm() <= 1e-12 * base.sup_norm().max(1.0) * lambda.abs().max(1.0));
        }
    }

    #[test]
    fn wick_identities_after_steps(seed in any::<u64>(), c2 in -1.0f64..1.0) {
        let grid = make_grid(2, 16).unwrap();
        let dec = DyadicDecomposition::new(&grid);
        let mut rng = member_rng(seed, 0);
        let mut ds = DiagramSet::stationary(c2, &dec, &mut rng);
        let st = DiagramStepper::new(&grid, 1e-3).unwrap();
        for _ in 0..5 {
            ds = st.step(&ds, &unit_noise_spectrum(&grid, &mut rng), &dec);
            let scale = ds.x1.sup_norm().powi(3).max(ds.c1 * ds.x1.sup_norm()).max(1.0);
            prop_assert!(ds.wick_defect() <= 1e-12 * scale);
        }
    }

    #[test]
    fn kbar2_increases_with_k0(s in 0.01f64..5.0, sigma in 0.1f64..0.9, k0 in 0.1f64..3.0, dk in 0.01f64..3.0) {
        let a = kbar(s, &GronwallParams::new(sigma, 0.5, k0, 0.0).unwrap()).unwrap().1;
        let b = kbar(s, &GronwallParams::new(sigma, 0.5, k0 + dk, 0.0).unwrap()).unwrap().1;
        prop_assert!(b >= a);
    }

    #[test]
    fn series_sandwich(x in 1.0f64..40.0, sigma in prop_oneof![Just(0.3f64), Just(0.5), Just(0.7)]) {
        let bound = (1.0 / (1.0 - sigma) + 1.0).floor() * x * x.exp();
        prop_assert!(mittag_leffler_sum(x, sigma).unwrap() <= bound);
    }

    #[test]
    fn gronwall_monotone(g0 in 0.0f64..2.0, dg in 0.0f64..1.0, h0 in 0.0f64..2.0, dh in 0.0f64..1.0) {
        let times: Vec<f64> = (0..=40).map(|i| i as f64 * 0.025).collect();
        let p = GronwallParams::new(0.5, 0.3, 1.0, 0.5).unwrap();
        let mk = |a: f64, b: f64| -> Vec<f64> { times.iter().map(|t| a + b * t).collect() };
        let base = gronwall_apply(&mk(g0, 1.0), &mk(h0, 1.0), &p, &times).unwrap();
        let more_g = gronwall_apply(&mk(g0 + dg, 1.0), &mk(h0, 1.0), &p, &times).unwrap();
        let more_h = gronwall_apply(&mk(g0, 1.0), &mk(h0 + dh, 1.0), &p, &times).unwrap();
        for i in 0..times.len() {
            prop_assert!(more_g[i] >= base[i] && more_h[i] >= base[i]);
        }
    }

    #[test]
    fn median_ignores_member_order(mut v in prop::collection::vec(-1e3f64..1e3, 1..16), seed in any::<u64>()) {
        let m = median(&v);
        let mut rng = member_rng(seed, 0);
        for i in (1..v.len()).rev() {
            let j = rng.gen_range(0..=i);
            v.swap(i, j);
        }
        prop_assert_eq!(median(&v), m);
    }

    #[test]
    fn loosening_keeps_a_pass(value in -10.0f64..10.0, lo in -10.0f64..10.0, w in 0.0f64..10.0, slack in 0.0f64..5.0) {
        let c = Check::within("x", value, lo, lo + w);
        let looser = Check::within("x", value, lo - slack, lo + w + slack);
        prop_assert!(!c.passed() || looser.passed());
    }

    #[test]
    fn config_round_trip(d in 1usize..=3, log_n in 3u32..7, m in -2.0f64..2.0, c in 0.0f64..100.0, dt in 1e-6f64..1e-2,
                         seed in any::<u64>(), size in 1usize..64, reversed in any::<bool>()) {
        let mut cfg = RunConfig { d, n: 1 << log_n, dt, root_seed: seed, ensemble_size: size, ..Default::default() };
        cfg.model.m = m;
        cfg.model.c = c;
        cfg.model.formulation = if d == 2 { Formulation::Dpd2 } else { Formulation::Direct };
        cfg.sign = if reversed { CubeSign::Reversed } else { CubeSign::Damping };
        let back = parse_config(&cfg.serialize()).unwrap();
        prop_assert_eq!(back.hash(), cfg.hash());
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn snapshot_round_trip(grid in grid_strategy(), seed in any::<u64>()) {
        let f = random_field(&grid, seed);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.bin");
        write_field_snapshot(&f, &p).unwrap();
        let g = read_field_snapshot(&p).unwrap();
        prop_assert!(f.values().iter().zip(g.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}
