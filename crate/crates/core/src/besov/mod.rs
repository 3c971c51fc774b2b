//! Littlewood–Paley blocks, Besov norms, paraproducts and commutators.
//!
//! Frequencies are measured in units of the base scale `s0 = pi`, so the
//! wavenumber `k` sits at radius `|k|`. The low-frequency cutoff `chi_tilde`
//! equals 1 below `3/4` and vanishes above `4/3`; the annular profile is
//! `chi(r) = chi_tilde(r / 2) - chi_tilde(r)` and level `k >= 0` uses
//! `chi(r / 2^k)`. The finite partition telescopes, so it sums to one up to
//! rounding.
//!
//! Products are taken pointwise on the grid without dealiasing. The Bony
//! identity `fg = f<g + f=g + f>g` is therefore exact on-grid.

pub mod fit;

use std::f64::consts::PI;

use crate::error::{invalid, Result};
use crate::grid::{apply_heat_semigroup, Field, TorusGrid};

pub use fit::{fit_inequality_exponent, FitResult, FitRow, FitSettings, Inequality, FIT_COLUMNS};

/// Base scale of the dyadic partition, the fundamental wavenumber.
pub const BASE_SCALE: f64 = PI;

const INNER: f64 = 0.75;
const OUTER: f64 = 4.0 / 3.0;

/// Smooth ramp, 0 for `s <= 0` and 1 for `s >= 1`.
fn ramp(s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    if s >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / s).exp();
    let b = (-1.0 / (1.0 - s)).exp();
    a / (a + b)
}

/// Low-frequency cutoff at radius `r` (in units of the base scale).
pub fn chi_tilde(r: f64) -> f64 {
    ramp((OUTER - r) / (OUTER - INNER))
}

/// Annular profile, supported in `[3/4, 8/3]`.
pub fn chi(r: f64) -> f64 {
    chi_tilde(r / 2.0) - chi_tilde(r)
}

/// Multiplier of level `k >= -1` at radius `r`.
pub fn chi_level(k: i32, r: f64) -> f64 {
    if k < 0 {
        chi_tilde(r)
    } else {
        chi(r / f64::from(1u32 << k))
    }
}

/// Precomputed Littlewood–Paley multipliers on a grid's half spectrum.
#[derive(Clone, Debug)]
pub struct DyadicDecomposition {
    grid: TorusGrid,
    k_max: i32,
    /// Index `k + 1` holds `chi_k`.
    multipliers: Vec<Vec<f64>>,
}

/// Builds the partition whose top level is the first one for which the
/// cutoff `chi_tilde(. / 2^{k_max + 1})` equals one on the whole lattice.
pub fn build_dyadic_partition(grid: &TorusGrid) -> DyadicDecomposition {
    DyadicDecomposition::new(grid)
}

impl DyadicDecomposition {
    pub fn new(grid: &TorusGrid) -> Self {
        let r_max = grid.max_frequency() / BASE_SCALE;
        let mut k_max = -1;
        while f64::from(1u32 << (k_max + 1)) * INNER < r_max {
            k_max += 1;
        }
        let radii: Vec<f64> = grid.zeta_sq().iter().map(|z| z.sqrt() / BASE_SCALE).collect();
        let multipliers = (-1..=k_max)
            .map(|k| radii.iter().map(|&r| chi_level(k, r)).collect())
            .collect();
        Self {
            grid: grid.clone(),
            k_max,
            multipliers,
        }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    pub fn k_max(&self) -> i32 {
        self.k_max
    }

    /// Number of levels, `k_max + 2`.
    pub fn levels(&self) -> usize {
        self.multipliers.len()
    }

    pub fn multiplier(&self, k: i32) -> Result<&[f64]> {
        if k < -1 || k > self.k_max {
            return Err(invalid(format!("level {k} outside -1..={}", self.k_max)));
        }
        Ok(&self.multipliers[(k + 1) as usize])
    }

    /// Largest deviation of `sum_k chi_k` from one over the lattice.
    pub fn partition_error(&self) -> f64 {
        (0..self.grid.spectrum_len())
            .map(|i| {
                let s: f64 = self.multipliers.iter().map(|m| m[i]).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max)
    }

    /// All blocks of `f`.
    pub fn blocks(&self, f: &Field) -> Blocks {
        let spec = f.spectrum();
        let grid = f.grid();
        let blocks = self
            .multipliers
            .iter()
            .map(|m| {
                let s = spec.iter().zip(m).map(|(c, w)| c * w).collect();
                Field::from_spectrum_unchecked(grid, s)
            })
            .collect();
        Blocks { blocks }
    }

    fn check(&self, f: &Field) -> Result<()> {
        if f.grid() != &self.grid {
            return Err(crate::Error::GridMismatch {
                left: f.grid().to_string(),
                right: self.grid.to_string(),
            });
        }
        Ok(())
    }
}

/// The physical-space blocks `delta_k f`, `k = -1..=k_max`.
#[derive(Clone, Debug)]
pub struct Blocks {
    blocks: Vec<Field>,
}

impl Blocks {
    pub fn get(&self, k: i32) -> &Field {
        &self.blocks[(k + 1) as usize]
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Field> {
        self.blocks.iter()
    }

    /// Sum of all blocks.
    pub fn sum(&self) -> Field {
        let terms: Vec<(f64, &Field)> = self.blocks.iter().map(|b| (1.0, b)).collect();
        Field::linear_combination(&terms)
    }

    /// `L^p` norms of the blocks.
    pub fn lp_norms(&self, p: f64) -> Vec<f64> {
        self.blocks.iter().map(|b| b.lp_norm(p)).collect()
    }

    pub fn besov_norm(&self, idx: BesovIndex) -> f64 {
        besov_from_block_norms(&self.lp_norms(idx.p), idx.alpha, idx.q)
    }

    /// `f < g` with `self = blocks(f)`: `sum_k S_{k-1} f delta_k g`.
    pub fn lt(&self, g: &Blocks) -> Field {
        let grid = self.blocks[0].grid().clone();
        let len = grid.len();
        let mut out = vec![0.0; len];
        // Storage index i holds level i - 1; `low` accumulates indices <= i - 2.
        let mut low = vec![0.0; len];
        for i in 2..g.blocks.len() {
            for (l, v) in low.iter_mut().zip(self.blocks[i - 2].values()) {
                *l += v;
            }
            for ((o, l), gv) in out.iter_mut().zip(&low).zip(g.blocks[i].values()) {
                *o += l * gv;
            }
        }
        Field::from_values_unchecked(&grid, out)
    }

    /// `f = g`: `sum_{|j-k| <= 1} delta_j f delta_k g`.
    pub fn res(&self, g: &Blocks) -> Field {
        let grid = self.blocks[0].grid().clone();
        let n = self.blocks.len();
        let mut out = vec![0.0; grid.len()];
        for k in 0..n {
            let lo = k.saturating_sub(1);
            let hi = (k + 1).min(n - 1);
            let gk = g.blocks[k].values();
            for j in lo..=hi {
                for ((o, a), b) in out.iter_mut().zip(self.blocks[j].values()).zip(gk) {
                    *o += a * b;
                }
            }
        }
        Field::from_values_unchecked(&grid, out)
    }

    /// `f > g = g < f`.
    pub fn gt(&self, g: &Blocks) -> Field {
        g.lt(self)
    }
}

fn besov_from_block_norms(norms: &[f64], alpha: f64, q: f64) -> f64 {
    let weighted = norms
        .iter()
        .enumerate()
        .map(|(i, n)| 2f64.powf(alpha * (i as f64 - 1.0)) * n);
    if q.is_infinite() {
        weighted.fold(0.0, f64::max)
    } else {
        let w: Vec<f64> = weighted.collect();
        let m = w.iter().copied().fold(0.0, f64::max);
        if m == 0.0 {
            return 0.0;
        }
        m * w.iter().map(|x| (x / m).powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

/// Besov index `(alpha, p, q)`; `f64::INFINITY` stands for `p, q = inf`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BesovIndex {
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
}

impl BesovIndex {
    pub const INF: f64 = f64::INFINITY;

    pub fn new(alpha: f64, p: f64, q: f64) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(invalid(format!("regularity exponent {alpha} is not finite")));
        }
        if !(p >= 1.0) || !(q >= 1.0) {
            return Err(invalid(format!("integrability indices must be >= 1, got p={p} q={q}")));
        }
        Ok(Self { alpha, p, q })
    }

    /// `B^alpha_{inf, inf}`.
    pub fn holder(alpha: f64) -> Self {
        Self {
            alpha,
            p: f64::INFINITY,
            q: f64::INFINITY,
        }
    }
}

pub fn lp_block(f: &Field, k: i32, dec: &DyadicDecomposition) -> Result<Field> {
    dec.check(f)?;
    let m = dec.multiplier(k)?;
    let spec = f.spectrum().iter().zip(m).map(|(c, w)| c * w).collect();
    Ok(Field::from_spectrum_unchecked(f.grid(), spec))
}

pub fn besov_norm(f: &Field, idx: BesovIndex, dec: &DyadicDecomposition) -> Result<f64> {
    dec.check(f)?;
    Ok(dec.blocks(f).besov_norm(idx))
}

#[derive(Clone, Debug)]
pub struct BonySplit {
    pub lt: Field,
    pub res: Field,
    pub gt: Field,
}

pub fn bony_split(f: &Field, g: &Field, dec: &DyadicDecomposition) -> Result<BonySplit> {
    f.check_same_grid(g)?;
    dec.check(f)?;
    let bf = dec.blocks(f);
    let bg = dec.blocks(g);
    Ok(BonySplit {
        lt: bf.lt(&bg),
        res: bf.res(&bg),
        gt: bf.gt(&bg),
    })
}

pub fn para_lt(f: &Field, g: &Field, dec: &DyadicDecomposition) -> Result<Field> {
    f.check_same_grid(g)?;
    dec.check(f)?;
    Ok(dec.blocks(f).lt(&dec.blocks(g)))
}

pub fn resonant(f: &Field, g: &Field, dec: &DyadicDecomposition) -> Result<Field> {
    f.check_same_grid(g)?;
    dec.check(f)?;
    Ok(dec.blocks(f).res(&dec.blocks(g)))
}

pub fn para_gt(f: &Field, g: &Field, dec: &DyadicDecomposition) -> Result<Field> {
    para_lt(g, f, dec)
}

/// `(f < g) = h - f (g = h)`.
pub fn commutator_lt_res(f: &Field, g: &Field, h: &Field, dec: &DyadicDecomposition) -> Result<Field> {
    f.check_same_grid(g)?;
    f.check_same_grid(h)?;
    dec.check(f)?;
    let bg = dec.blocks(g);
    let bh = dec.blocks(h);
    Ok(commutator_lt_res_blocks(f, &dec.blocks(f), &bg, &bh, dec))
}

pub(crate) fn commutator_lt_res_blocks(
    f: &Field,
    bf: &Blocks,
    bg: &Blocks,
    bh: &Blocks,
    dec: &DyadicDecomposition,
) -> Field {
    let fg = bf.lt(bg);
    let first = dec.blocks(&fg).res(bh);
    let second = f * &bg.res(bh);
    &first - &second
}

/// `e^{t Lap}(f < g) - f < (e^{t Lap} g)`.
pub fn commutator_heat_lt(t: f64, f: &Field, g: &Field, dec: &DyadicDecomposition) -> Result<Field> {
    if !(t >= 0.0) {
        return Err(invalid(format!("commutator needs t >= 0, got {t}")));
    }
    f.check_same_grid(g)?;
    dec.check(f)?;
    let lhs = apply_heat_semigroup(&para_lt(f, g, dec)?, t, 0.0)?;
    let rhs = para_lt(f, &apply_heat_semigroup(g, t, 0.0)?, dec)?;
    Ok(&lhs - &rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    #[test]
    fn profile_supports() {
        assert_eq!(chi_tilde(0.0), 1.0);
        assert_eq!(chi_tilde(0.75), 1.0);
        assert_eq!(chi_tilde(4.0 / 3.0), 0.0);
        assert_eq!(chi(0.0), 0.0);
        assert_eq!(chi(0.74), 0.0);
        assert_eq!(chi(8.0 / 3.0 + 1e-9), 0.0);
        for i in 0..400 {
            let r = i as f64 * 0.01;
            assert!((0.0..=1.0).contains(&chi_tilde(r)));
            assert!((0.0..=1.0).contains(&chi(r)), "chi({r}) = {}", chi(r));
        }
    }

    #[test]
    fn k_max_examples() {
        let g = make_grid(1, 8).unwrap();
        assert_eq!(build_dyadic_partition(&g).k_max(), 2);
        let g = make_grid(3, 16).unwrap();
        assert_eq!(build_dyadic_partition(&g).k_max(), 4);
        let g = make_grid(1, 256).unwrap();
        assert_eq!(build_dyadic_partition(&g).k_max(), 7);
    }

    #[test]
    fn constant_lives_in_lowest_block() {
        let g = make_grid(1, 16).unwrap();
        let dec = build_dyadic_partition(&g);
        let one = Field::constant(&g, 1.0);
        let b = lp_block(&one, -1, &dec).unwrap();
        assert!(b.values().iter().all(|v| (v - 1.0).abs() < 1e-15));
        for k in 0..=dec.k_max() {
            assert!(lp_block(&one, k, &dec).unwrap().sup_norm() < 1e-15);
        }
        assert!(lp_block(&one, dec.k_max() + 1, &dec).is_err());
        assert!(lp_block(&one, -2, &dec).is_err());
    }

    #[test]
    #[allow(clippy::approx_constant)]
    fn besov_norm_of_constant() {
        let g = make_grid(1, 32).unwrap();
        let dec = build_dyadic_partition(&g);
        let one = Field::constant(&g, 1.0);
        let v = besov_norm(&one, BesovIndex::new(1.0, 2.0, f64::INFINITY).unwrap(), &dec).unwrap();
        // only delta_{-1} survives: 2^{-1} * ||1||_{L^2[-1,1]}
        assert!((v - 0.5 * 2f64.sqrt()).abs() < 1e-14);
        assert!((v - 0.70711).abs() < 1e-5);
        let zero = Field::zeros(&g);
        assert_eq!(besov_norm(&zero, BesovIndex::holder(-0.5), &dec).unwrap(), 0.0);
    }

    #[test]
    fn mode_in_support_gap() {
        // |k| = 1 lies in the support of chi_{-1} (1 < 4/3) and chi_0
        // (1 > 3/4) only, so every block of level >= 1 vanishes.
        let g = make_grid(1, 32).unwrap();
        let dec = build_dyadic_partition(&g);
        let f = Field::from_fn(&g, |x| (PI * x[0]).cos());
        for k in 1..=dec.k_max() {
            assert_eq!(chi_level(k, 1.0), 0.0);
            assert!(lp_block(&f, k, &dec).unwrap().sup_norm() < 1e-15);
        }
    }

    #[test]
    fn constants_in_bony_split() {
        let g = make_grid(2, 16).unwrap();
        let dec = build_dyadic_partition(&g);
        let one = Field::constant(&g, 1.0);
        let s = bony_split(&one, &one, &dec).unwrap();
        assert!(s.lt.sup_norm() < 1e-15);
        assert!(s.gt.sup_norm() < 1e-15);
        assert!(s.res.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn separated_modes_land_in_lt() {
        let g = make_grid(1, 64).unwrap();
        let dec = build_dyadic_partition(&g);
        // |k| = 1: levels -1, 0. |k| = 16: level 4 only (16 / 16 = 1 in [3/4, 4/3]).
        let f = Field::from_fn(&g, |x| (PI * x[0]).cos());
        let h = Field::from_fn(&g, |x| (16.0 * PI * x[0]).sin());
        let s = bony_split(&f, &h, &dec).unwrap();
        let prod = &f * &h;
        assert!((&s.lt - &prod).sup_norm() < 1e-13);
        assert!(s.res.sup_norm() < 1e-13);
        assert!(s.gt.sup_norm() < 1e-13);
    }

    #[test]
    fn commutator_examples() {
        let g = make_grid(1, 32).unwrap();
        let dec = build_dyadic_partition(&g);
        let a = Field::from_fn(&g, |x| (3.0 * PI * x[0]).sin() + 0.2 * (7.0 * PI * x[0]).cos());
        let b = Field::from_fn(&g, |x| (5.0 * PI * x[0]).cos() - (11.0 * PI * x[0]).sin());
        let one = Field::constant(&g, 1.0);
        // 1 < g = g - delta_{-1} g - delta_0 g, so [<,=](1, g, h) is
        // -(delta_{-1} g + delta_0 g) = h, which vanishes when g has no
        // content below level 1.
        let c = commutator_lt_res(&one, &a, &b, &dec).unwrap();
        assert!(c.sup_norm() < 1e-13);
        let low = Field::from_fn(&g, |x| 0.5 + (PI * x[0]).cos() + (9.0 * PI * x[0]).sin());
        let c = commutator_lt_res(&one, &low, &b, &dec).unwrap();
        let head = &lp_block(&low, -1, &dec).unwrap() + &lp_block(&low, 0, &dec).unwrap();
        let expected = -&resonant(&head, &b, &dec).unwrap();
        assert!((&c - &expected).sup_norm() < 1e-13);
        let zero = Field::zeros(&g);
        assert!(commutator_lt_res(&a, &zero, &b, &dec).unwrap().sup_norm() == 0.0);
        assert!(commutator_heat_lt(0.0, &a, &b, &dec).unwrap().sup_norm() < 1e-14);
        assert!(commutator_heat_lt(0.1, &one, &b, &dec).unwrap().sup_norm() < 1e-14);
        assert!(commutator_heat_lt(-0.1, &a, &b, &dec).is_err());
    }
}
