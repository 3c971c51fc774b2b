//! The renormalised stochastic diagrams and their Wick constants.
//!
//! | diagram | definition |
//! |---------|------------|
//! | `<2>`   | `<1>^2 - C1` |
//! | `<3>`   | `<1>^3 - 3 C1 <1>` |
//! | `<20>`  | `(d_t - Lap) <20> = <2>`, zero at `t = 0` |
//! | `<30>`  | `(d_t - Lap) <30> = <3>`, zero at `t = 0` |
//! | `<31'>` | `<30> = <1>` |
//! | `<32'>` | `<30> = <2> - 3 C2 <1>` |
//! | `<22'>` | `<20> = <2> - C2` |
//!
//! `<20>` and `<30>` are advanced by exponential Euler with the source taken
//! at the start of the step.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use crate::besov::{BesovIndex, Blocks, DyadicDecomposition};
use crate::error::{invalid, Error, Result};
use crate::grid::{ExpEuler, Field, TorusGrid};
use crate::noise::{member_rng, stationary_ou, unit_noise_spectrum, wick_c1, OuStep};

/// One time slice of the diagram family.
#[derive(Clone, Debug)]
pub struct DiagramSet {
    pub t: f64,
    pub c1: f64,
    pub c2: f64,
    pub x1: Field,
    pub x2: Field,
    pub x3: Field,
    pub x20: Field,
    pub x30: Field,
    pub x31p: Field,
    pub x32p: Field,
    pub x22p: Field,
    pub(crate) blocks: DiagramBlocks,
}

/// Littlewood–Paley blocks reused by the solvers.
#[derive(Clone, Debug)]
pub struct DiagramBlocks {
    pub x1: Blocks,
    pub x2: Blocks,
    pub x20: Blocks,
    pub x30: Blocks,
}

impl DiagramSet {
    /// Diagrams at time 0 from a given `<1>`, with `<20> = <30> = 0`.
    pub fn new(x1: Field, c1: f64, c2: f64, dec: &DyadicDecomposition) -> Result<Self> {
        if x1.grid() != dec.grid() {
            return Err(Error::GridMismatch {
                left: x1.grid().to_string(),
                right: dec.grid().to_string(),
            });
        }
        let zero = Field::zeros(x1.grid());
        Ok(Self::assemble(0.0, x1, zero.clone(), zero, c1, c2, dec))
    }

    /// Diagrams with `<1>` drawn from its stationary law.
    pub fn stationary(c2: f64, dec: &DyadicDecomposition, rng: &mut impl Rng) -> Self {
        let grid = dec.grid();
        let x1 = stationary_ou(grid, rng);
        let zero = Field::zeros(grid);
        Self::assemble(0.0, x1, zero.clone(), zero, wick_c1(grid), c2, dec)
    }

    /// All-zero diagrams with zero constants.
    pub fn zero(dec: &DyadicDecomposition) -> Self {
        let zero = Field::zeros(dec.grid());
        Self::assemble(0.0, zero.clone(), zero.clone(), zero, 0.0, 0.0, dec)
    }

    /// Rebuilds every derived diagram from `<1>`, `<20>`, `<30>`.
    pub fn assemble(t: f64, x1: Field, x20: Field, x30: Field, c1: f64, c2: f64, dec: &DyadicDecomposition) -> Self {
        let x2 = x1.map(|v| v * v - c1);
        let x3 = x1.map(|v| v * v * v - 3.0 * c1 * v);
        let b1 = dec.blocks(&x1);
        let b2 = dec.blocks(&x2);
        let b20 = dec.blocks(&x20);
        let b30 = dec.blocks(&x30);
        let x31p = b30.res(&b1);
        let r32 = b30.res(&b2);
        let x32p = r32.zip_map(&x1, |a, b| a - 3.0 * c2 * b);
        let x22p = b20.res(&b2).map(|v| v - c2);
        Self {
            t,
            c1,
            c2,
            x1,
            x2,
            x3,
            x20,
            x30,
            x31p,
            x32p,
            x22p,
            blocks: DiagramBlocks {
                x1: b1,
                x2: b2,
                x20: b20,
                x30: b30,
            },
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        self.x1.grid()
    }

    pub fn blocks(&self) -> &DiagramBlocks {
        &self.blocks
    }

    /// The six diagrams of the regularity table, in table order.
    pub fn table(&self) -> [(&'static str, &Field); 6] {
        [
            ("1", &self.x1),
            ("2", &self.x2),
            ("30", &self.x30),
            ("31p", &self.x31p),
            ("32p", &self.x32p),
            ("22p", &self.x22p),
        ]
    }

    /// Largest deviation from the pointwise Wick identities.
    pub fn wick_defect(&self) -> f64 {
        let c1 = self.c1;
        self.x1
            .values()
            .iter()
            .zip(self.x2.values().iter().zip(self.x3.values()))
            .map(|(&a, (&b, &c))| {
                let e2 = (b - (a * a - c1)).abs();
                let e3 = (c - (a * a * a - 3.0 * c1 * a)).abs();
                e2.max(e3)
            })
            .fold(0.0, f64::max)
    }
}

/// Precomputed propagators for advancing diagrams by one step.
#[derive(Clone, Debug)]
pub struct DiagramStepper {
    ou: OuStep,
    heat: ExpEuler,
}

impl DiagramStepper {
    pub fn new(grid: &TorusGrid, dt: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid(format!("diagram step needs dt > 0, got {dt}")));
        }
        Ok(Self {
            ou: OuStep::new(grid, dt),
            heat: ExpEuler::new(grid, dt, 0.0),
        })
    }

    pub fn dt(&self) -> f64 {
        self.heat.dt()
    }

    pub fn ou(&self) -> &OuStep {
        &self.ou
    }

    /// Advances with a given unit-noise draw.
    pub fn step(&self, ds: &DiagramSet, unit_noise: &[Complex64], dec: &DyadicDecomposition) -> DiagramSet {
        let x1 = self.ou.apply(&ds.x1, unit_noise);
        let x20 = self.heat.step(&ds.x20, &ds.x2);
        let x30 = self.heat.step(&ds.x30, &ds.x3);
        DiagramSet::assemble(ds.t + self.dt(), x1, x20, x30, ds.c1, ds.c2, dec)
    }
}

/// One step of the diagram family with a fresh noise draw from `rng`.
pub fn evolve_diagrams(ds: &DiagramSet, dt: f64, rng: &mut impl Rng, dec: &DyadicDecomposition) -> Result<DiagramSet> {
    let stepper = DiagramStepper::new(ds.grid(), dt)?;
    let w = unit_noise_spectrum(ds.grid(), rng);
    Ok(stepper.step(ds, &w, dec))
}

/// Estimate of `C2` with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct C2Estimate {
    pub c2: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Ensemble estimate of `C2 = E[<20> = <2>]`.
///
/// Each member starts from a stationary `<1>` with `<20> = 0`, runs for
/// `burn_in` time units and contributes the spatial average of `<20> = <2>`
/// at the end. Members use streams `0..ensemble_size` of `root_seed`.
pub fn estimate_c2(
    dec: &DyadicDecomposition,
    ensemble_size: usize,
    burn_in: f64,
    dt: f64,
    root_seed: u64,
) -> Result<C2Estimate> {
    if ensemble_size < 16 {
        return Err(invalid(format!(
            "ensemble of {ensemble_size} members; need at least 16"
        )));
    }
    if !(burn_in > 0.0) {
        return Err(invalid("burn-in must be positive"));
    }
    let steps = (burn_in / dt).round().max(1.0) as usize;
    let stepper = DiagramStepper::new(dec.grid(), dt)?;
    let values: Vec<f64> = (0..ensemble_size as u64)
        .into_par_iter()
        .map(|member| {
            let mut rng = member_rng(root_seed, member);
            let mut ds = DiagramSet::stationary(0.0, dec, &mut rng);
            for _ in 0..steps {
                let w = unit_noise_spectrum(dec.grid(), &mut rng);
                ds = stepper.step(&ds, &w, dec);
            }
            // c2 = 0 above, so <22'> is the raw resonant product.
            ds.x22p.mean()
        })
        .collect();
    let (mean, se) = mean_and_stderr(&values);
    Ok(C2Estimate {
        c2: mean,
        stderr: se,
        samples: values.len(),
    })
}

/// Time-average estimate of `C2` along one trajectory, with a batch-means
/// standard error over `batches` batches.
pub fn estimate_c2_time_average(
    dec: &DyadicDecomposition,
    burn_in: f64,
    horizon: f64,
    dt: f64,
    batches: usize,
    root_seed: u64,
) -> Result<C2Estimate> {
    if !(horizon > burn_in) || batches < 2 {
        return Err(invalid("time average needs horizon > burn-in and at least 2 batches"));
    }
    let stepper = DiagramStepper::new(dec.grid(), dt)?;
    let mut rng = member_rng(root_seed, 0);
    let mut ds = DiagramSet::stationary(0.0, dec, &mut rng);
    let burn = (burn_in / dt).round() as usize;
    let total = (horizon / dt).round() as usize;
    let mut series = Vec::with_capacity(total - burn);
    for i in 0..total {
        let w = unit_noise_spectrum(dec.grid(), &mut rng);
        ds = stepper.step(&ds, &w, dec);
        if i + 1 > burn {
            series.push(ds.x22p.mean());
        }
    }
    let (mean, se) = crate::stats::batch_means(&series, batches)?;
    Ok(C2Estimate {
        c2: mean,
        stderr: se,
        samples: series.len(),
    })
}

pub(crate) fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// One line of the regularity report.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularityRow {
    pub tag: &'static str,
    pub alpha: f64,
    pub measured_norm: f64,
}

/// Regularity exponents of the table diagrams for a margin `epsilon`.
pub fn table_exponents(epsilon: f64) -> [f64; 6] {
    [
        -0.5 - epsilon,
        -1.0 - epsilon,
        0.5 - epsilon,
        -epsilon,
        -0.5 - epsilon,
        -epsilon,
    ]
}

/// Supremum over the trajectory of `|tau|_{B^{alpha_tau}_{inf,inf}}` for each
/// table diagram. The bound `K` is the maximum of the returned norms.
pub fn regularity_report(
    trajectory: &[DiagramSet],
    epsilon: f64,
    dec: &DyadicDecomposition,
) -> Result<Vec<RegularityRow>> {
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(invalid(format!("epsilon {epsilon} not in (0, 0.25)")));
    }
    if trajectory.is_empty() {
        return Err(invalid("empty trajectory"));
    }
    let alphas = table_exponents(epsilon);
    let mut rows: Vec<RegularityRow> = trajectory[0]
        .table()
        .iter()
        .zip(alphas)
        .map(|((tag, _), alpha)| RegularityRow {
            tag,
            alpha,
            measured_norm: 0.0,
        })
        .collect();
    for ds in trajectory {
        for (row, (_, f)) in rows.iter_mut().zip(ds.table()) {
            let v = dec.blocks(f).besov_norm(BesovIndex::holder(row.alpha));
            row.measured_norm = row.measured_norm.max(v);
        }
    }
    Ok(rows)
}

pub fn diagram_bound(rows: &[RegularityRow]) -> f64 {
    rows.iter().map(|r| r.measured_norm).fold(0.0, f64::max)
}

/// One entry of the constants cache.
#[derive(Clone, Debug, PartialEq)]
pub struct CachedConstants {
    pub n: usize,
    pub d: usize,
    pub c1: f64,
    pub c2: f64,
    pub stderr_c2: f64,
    pub root_seed: u64,
}

/// Reads a constants cache; a missing file is an empty cache.
pub fn read_constants_cache(path: &Path) -> Result<Vec<CachedConstants>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: &str| Error::Config {
            line: i + 1,
            message: format!("constants cache: {msg}"),
        };
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 6 {
            return Err(bad("expected `n d c1 c2 stderr_c2 root_seed`"));
        }
        out.push(CachedConstants {
            n: parts[0].parse().map_err(|_| bad("bad n"))?,
            d: parts[1].parse().map_err(|_| bad("bad d"))?,
            c1: parts[2].parse().map_err(|_| bad("bad c1"))?,
            c2: parts[3].parse().map_err(|_| bad("bad c2"))?,
            stderr_c2: parts[4].parse().map_err(|_| bad("bad stderr_c2"))?,
            root_seed: parts[5].parse().map_err(|_| bad("bad root_seed"))?,
        });
    }
    Ok(out)
}

pub fn append_constants_cache(path: &Path, entry: &CachedConstants) -> Result<()> {
    let mut f = fs::OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(
        f,
        "{} {} {:e} {:e} {:e} {}",
        entry.n, entry.d, entry.c1, entry.c2, entry.stderr_c2, entry.root_seed
    )?;
    Ok(())
}

/// Looks up `(n, d, root_seed)` in the cache, estimating and appending on a
/// miss.
pub fn cached_constants(
    path: &Path,
    dec: &DyadicDecomposition,
    ensemble_size: usize,
    burn_in: f64,
    dt: f64,
    root_seed: u64,
) -> Result<CachedConstants> {
    let grid = dec.grid();
    if let Some(hit) = read_constants_cache(path)?
        .into_iter()
        .find(|c| c.n == grid.n() && c.d == grid.d() && c.root_seed == root_seed)
    {
        return Ok(hit);
    }
    let est = estimate_c2(dec, ensemble_size, burn_in, dt, root_seed)?;
    let entry = CachedConstants {
        n: grid.n(),
        d: grid.d(),
        c1: wick_c1(grid),
        c2: est.c2,
        stderr_c2: est.stderr,
        root_seed,
    };
    append_constants_cache(path, &entry)?;
    Ok(entry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::besov::build_dyadic_partition;
    use crate::grid::make_grid;

    #[test]
    fn table_exponents_for_small_margin() {
        let e = table_exponents(0.05);
        let want = [-0.55, -1.05, 0.45, -0.05, -0.55, -0.05];
        for (a, b) in e.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn wick_identities_hold_along_a_trajectory() {
        let g = make_grid(2, 16).unwrap();
        let dec = build_dyadic_partition(&g);
        let mut rng = member_rng(1, 0);
        let mut ds = DiagramSet::stationary(0.1, &dec, &mut rng);
        for _ in 0..10 {
            ds = evolve_diagrams(&ds, 1e-3, &mut rng, &dec).unwrap();
            let scale = 1.0 + ds.x3.sup_norm();
            assert!(ds.wick_defect() <= 1e-10 * scale);
        }
        assert!((ds.t - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn frozen_constant_source_integrates_exactly() {
        // With <1> = 0 and C1 = -kappa, <2> = kappa everywhere; the zero mode
        // of <20> then grows by exactly kappa dt per step.
        let g = make_grid(1, 16).unwrap();
        let dec = build_dyadic_partition(&g);
        let kappa = 0.7;
        let mut ds = DiagramSet::new(Field::zeros(&g), -kappa, 0.0, &dec).unwrap();
        let stepper = DiagramStepper::new(&g, 0.01).unwrap();
        let zero = vec![Complex64::new(0.0, 0.0); g.spectrum_len()];
        for _ in 0..50 {
            ds = stepper.step(&ds, &zero, &dec);
        }
        assert!((ds.x20.mean() - kappa * 0.5).abs() < 1e-13);
    }

    #[test]
    fn zero_trajectory_reports_zero() {
        let g = make_grid(1, 16).unwrap();
        let dec = build_dyadic_partition(&g);
        let rows = regularity_report(&[DiagramSet::zero(&dec)], 0.05, &dec).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.measured_norm == 0.0));
        assert!(regularity_report(&[], 0.05, &dec).is_err());
        assert!(regularity_report(&[DiagramSet::zero(&dec)], 0.3, &dec).is_err());
    }

    #[test]
    fn c2_needs_a_real_ensemble() {
        let g = make_grid(1, 16).unwrap();
        let dec = build_dyadic_partition(&g);
        assert!(estimate_c2(&dec, 8, 0.1, 1e-3, 0).is_err());
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("constants.txt");
        assert!(read_constants_cache(&path).unwrap().is_empty());
        let e = CachedConstants {
            n: 16,
            d: 3,
            c1: 1.25,
            c2: 0.5,
            stderr_c2: 0.01,
            root_seed: 9,
        };
        append_constants_cache(&path, &e).unwrap();
        assert_eq!(read_constants_cache(&path).unwrap(), vec![e]);
    }
}
