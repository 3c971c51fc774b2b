//! Time steppers for the renormalised equation
//! `d_t X = Lap X - X^3 + m_delta X + xi`, `m_delta = m + 3 C1 - 9 C2`.
//!
//! Three formulations share one noise convention (the unit draw used by the
//! OU update of `<1>` in the same step):
//!
//! - `direct`: exponential Euler for `X` with the stochastic heat convolution
//!   of the same unit draw;
//! - `dpd2`: `X = <1> + Y` in two dimensions;
//! - `paracontrolled`: `X = <1> - <30> + v + w` with the mass-split system
//!   `(d_t - Lap) v = F - c v`, `(d_t - Lap) w = G + c v`.
//!
//! Because `<1>` carries the unit mass of the OU process, the equations for
//! `Y` and for `u = v + w` pick up an extra source `+<1>`. It enters `a0`.

use num_complex::Complex64;

use crate::besov::{commutator_lt_res_blocks, BesovIndex, DyadicDecomposition};
use crate::diagrams::{DiagramSet, DiagramStepper};
use crate::error::{invalid, Error, Result};
use crate::grid::{ExpEuler, Field, TorusGrid};
use crate::noise::{unit_noise_spectrum, OU_MASS};

/// Any grid value above this in magnitude counts as a blow-up.
pub const BLOWUP_THRESHOLD: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Formulation {
    Direct,
    Dpd2,
    Paracontrolled,
}

impl Formulation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Formulation::Direct => "direct",
            Formulation::Dpd2 => "dpd2",
            Formulation::Paracontrolled => "paracontrolled",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "direct" => Some(Formulation::Direct),
            "dpd2" => Some(Formulation::Dpd2),
            "paracontrolled" => Some(Formulation::Paracontrolled),
            _ => None,
        }
    }
}

/// How the auxiliary field `z` behind `com1` is propagated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Com1Variant {
    /// `z` uses `e^{t(Lap - c)}` like `v`, so `z = v` and `v + w` does not
    /// depend on `c`.
    Massive,
    /// `z` uses the plain heat semigroup.
    Massless,
}

impl Com1Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Com1Variant::Massive => "massive",
            Com1Variant::Massless => "massless",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "massive" => Some(Com1Variant::Massive),
            "massless" => Some(Com1Variant::Massless),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub m: f64,
    pub c: f64,
    pub epsilon: f64,
    pub p: u32,
    pub formulation: Formulation,
    pub com1: Com1Variant,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            m: 0.0,
            c: 1.0,
            epsilon: 1e-3,
            p: 24,
            formulation: Formulation::Paracontrolled,
            com1: Com1Variant::Massive,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.p < 24 || !self.p.is_multiple_of(2) {
            return Err(invalid(format!("p = {} must be an even integer >= 24", self.p)));
        }
        if !(self.c >= 0.0) {
            return Err(invalid(format!("c = {} must be >= 0", self.c)));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1e-3) {
            return Err(invalid(format!("epsilon = {} not in (0, 1e-3]", self.epsilon)));
        }
        if !self.m.is_finite() {
            return Err(invalid("m must be finite"));
        }
        Ok(())
    }
}

/// `m_delta = m + 3 C1 - 9 C2`.
pub fn renormalised_mass(m: f64, c1: f64, c2: f64) -> f64 {
    m + 3.0 * c1 - 9.0 * c2
}

/// Polynomial coefficients `P(u) = a0 + a1 u + a2 u^2`.
#[derive(Clone, Debug)]
pub struct Coefficients {
    pub a0: Field,
    pub a1: Field,
    pub a2: Field,
}

/// Builds `a0, a1, a2` from the diagrams.
///
/// `a0 = m(<1> - <30>) + <30>^3 - 3[<1> (<30>^2) non-resonant
///       + <1> = (<30> = <30>) + 2 <30><31'> + 2 [<,=](<30>, <30>, <1>)]
///       - 9 <30><22'> + 3 <32'> + <1>`,
/// `a1 = m + 6[<30> non-resonant <1> + <31'>] - 3 <30>^2 + 9 <22'>`,
/// `a2 = -3 <1> + 3 <30>`.
///
/// The last `+<1>` in `a0` compensates the unit mass of `<1>`.
pub fn build_coefficients(ds: &DiagramSet, m: f64, dec: &DyadicDecomposition) -> Coefficients {
    let b = ds.blocks();
    let (x1, x30) = (&ds.x1, &ds.x30);
    let sq30 = x30 * x30;
    let bsq = dec.blocks(&sq30);
    let nonres_1_sq = &b.x1.lt(&bsq) + &b.x1.gt(&bsq);
    let res30 = b.x30.res(&b.x30);
    let res_1_res = b.x1.res(&dec.blocks(&res30));
    let x30_31p = x30 * &ds.x31p;
    let comm = commutator_lt_res_blocks(x30, &b.x30, &b.x30, &b.x1, dec);
    let bracket = Field::linear_combination(&[(1.0, &nonres_1_sq), (1.0, &res_1_res), (2.0, &x30_31p), (2.0, &comm)]);
    let cube30 = x30.map(|v| v * v * v);
    let x30_22p = x30 * &ds.x22p;
    let a0 = Field::linear_combination(&[
        (m, x1),
        (-m, x30),
        (1.0, &cube30),
        (-3.0, &bracket),
        (-9.0, &x30_22p),
        (3.0, &ds.x32p),
        (OU_MASS, x1),
    ]);
    let nonres_30_1 = &b.x30.lt(&b.x1) + &b.x30.gt(&b.x1);
    let a1 = Field::linear_combination(&[(6.0, &nonres_30_1), (6.0, &ds.x31p), (-3.0, &sq30), (9.0, &ds.x22p)])
        .map(|v| v + m);
    let a2 = Field::linear_combination(&[(-3.0, x1), (3.0, x30)]);
    Coefficients { a0, a1, a2 }
}

/// `v + w - <30>`.
fn remainder(v: &Field, w: &Field, ds: &DiagramSet) -> Field {
    Field::linear_combination(&[(1.0, v), (1.0, w), (-1.0, &ds.x30)])
}

/// `F(v + w) = -3 (v + w - <30>) < <2>`.
pub fn rhs_f(v: &Field, w: &Field, ds: &DiagramSet, dec: &DyadicDecomposition) -> Field {
    let r = remainder(v, w, ds);
    dec.blocks(&r).lt(&ds.blocks().x2).scale(-3.0)
}

/// `com1 = z + 3 (v + w - <30>) < <20>`.
pub fn com1(state: &ParaState, ds: &DiagramSet, dec: &DyadicDecomposition) -> Field {
    let r = remainder(&state.v, &state.w, ds);
    let l = dec.blocks(&r).lt(&ds.blocks().x20);
    Field::linear_combination(&[(1.0, &state.z), (3.0, &l)])
}

/// `com2 = [<,=](-3 (v + w - <30>), <20>, <2>)`.
pub fn com2(state: &ParaState, ds: &DiagramSet, dec: &DyadicDecomposition) -> Field {
    let r = remainder(&state.v, &state.w, ds).scale(-3.0);
    let b = ds.blocks();
    commutator_lt_res_blocks(&r, &dec.blocks(&r), &b.x20, &b.x2, dec)
}

/// `G = -(v+w)^3 - 3 (com1 + w) = <2> - 3 com2 - 3 (v+w-<30>) > <2> + P(v+w)`.
pub fn rhs_g(state: &ParaState, ds: &DiagramSet, coeffs: &Coefficients, dec: &DyadicDecomposition) -> Field {
    para_terms(state, ds, coeffs, dec).g
}

struct ParaTerms {
    f: Field,
    g: Field,
}

fn para_terms(state: &ParaState, ds: &DiagramSet, coeffs: &Coefficients, dec: &DyadicDecomposition) -> ParaTerms {
    let b = ds.blocks();
    let (v, w) = (&state.v, &state.w);
    let r = remainder(v, w, ds);
    let br = dec.blocks(&r);
    let f = br.lt(&b.x2).scale(-3.0);
    // r < <20> feeds both com1 and com2.
    let l = br.lt(&b.x20);
    let c1 = Field::linear_combination(&[(1.0, &state.z), (3.0, &l)]);
    // com2 = -3 (r < <20>) = <2> + 3 r (<20> = <2>), the last resonant unrenormalised
    let raw22 = ds.x22p.map(|x| x + ds.c2);
    let com2 = Field::linear_combination(&[(-3.0, &dec.blocks(&l).res(&b.x2)), (3.0, &(&r * &raw22))]);
    let com1_res = dec.blocks(&c1).res(&b.x2);
    let w_res = dec.blocks(w).res(&b.x2);
    let gt = br.gt(&b.x2);
    let u = v + w;
    let n = u.values().len();
    let mut g = vec![0.0; n];
    let (uv, a0, a1, a2) = (u.values(), coeffs.a0.values(), coeffs.a1.values(), coeffs.a2.values());
    let (cr, c2v, wr, gv) = (com1_res.values(), com2.values(), w_res.values(), gt.values());
    for i in 0..n {
        let x = uv[i];
        g[i] = -x * x * x - 3.0 * (cr[i] + c2v[i]) - 3.0 * wr[i] - 3.0 * gv[i] + a0[i] + a1[i] * x + a2[i] * x * x;
    }
    ParaTerms {
        f,
        g: Field::from_values_unchecked(v.grid(), g),
    }
}

/// `v`, `w` and the auxiliary `z` at time `t`.
#[derive(Clone, Debug)]
pub struct ParaState {
    pub t: f64,
    pub v: Field,
    pub w: Field,
    pub z: Field,
}

impl ParaState {
    /// State at `t = 0` with `z = v0`.
    pub fn new(v0: Field, w0: Field) -> Result<Self> {
        v0.check_same_grid(&w0)?;
        Ok(Self {
            t: 0.0,
            z: v0.clone(),
            v: v0,
            w: w0,
        })
    }
}

/// A full solver state: fields, diagrams and parameters.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub fields: ParaState,
    pub diagrams: DiagramSet,
    pub params: ModelParams,
}

/// `X = <1> - <30> + v + w`.
pub fn reconstruct_x(state: &ParaState, ds: &DiagramSet) -> Field {
    Field::linear_combination(&[(1.0, &ds.x1), (-1.0, &ds.x30), (1.0, &state.v), (1.0, &state.w)])
}

fn check_blowup(f: &Field, t: f64) -> Result<()> {
    match f.checked_sup() {
        Some(s) if s <= BLOWUP_THRESHOLD => Ok(()),
        _ => Err(Error::BlowUp { t }),
    }
}

/// Propagators of the paracontrolled system for fixed `dt` and `c`.
#[derive(Clone, Debug)]
pub struct ParaStepper {
    massive: ExpEuler,
    heat: ExpEuler,
    c: f64,
    variant: Com1Variant,
}

/// Everything produced by one paracontrolled step.
#[derive(Clone, Debug)]
pub struct ParaStep {
    pub state: ParaState,
    /// `G + w^3 + c v` at the start of the step.
    pub forcing: Field,
}

impl ParaStepper {
    pub fn new(grid: &TorusGrid, dt: f64, c: f64, variant: Com1Variant) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
        if !(c >= 0.0) {
            return Err(invalid(format!("c must be >= 0, got {c}")));
        }
        Ok(Self {
            massive: ExpEuler::new(grid, dt, c),
            heat: ExpEuler::new(grid, dt, 0.0),
            c,
            variant,
        })
    }

    pub fn dt(&self) -> f64 {
        self.heat.dt()
    }

    /// Advances `(v, w, z)` using diagrams and coefficients at the start of
    /// the step.
    pub fn step(
        &self,
        state: &ParaState,
        ds: &DiagramSet,
        coeffs: &Coefficients,
        dec: &DyadicDecomposition,
    ) -> Result<ParaStep> {
        let terms = para_terms(state, ds, coeffs, dec);
        let t = state.t + self.dt();
        let source_w = Field::linear_combination(&[(1.0, &terms.g), (self.c, &state.v)]);
        let v = self.massive.step(&state.v, &terms.f);
        let w = self.heat.step(&state.w, &source_w);
        let z = match self.variant {
            Com1Variant::Massive => v.clone(),
            Com1Variant::Massless => self.heat.step(&state.z, &terms.f),
        };
        check_blowup(&v, t)?;
        check_blowup(&w, t)?;
        let forcing = source_w.zip_map(&state.w, |a, b| a + b * b * b);
        Ok(ParaStep {
            state: ParaState { t, v, w, z },
            forcing,
        })
    }
}

/// One paracontrolled step with a fresh noise draw; diagrams advance with
/// the same draw.
pub fn step_paracontrolled(
    state: &SolverState,
    dt: f64,
    rng: &mut impl rand::Rng,
    dec: &DyadicDecomposition,
) -> Result<SolverState> {
    state.params.validate()?;
    let grid = dec.grid();
    let stepper = ParaStepper::new(grid, dt, state.params.c, state.params.com1)?;
    let coeffs = build_coefficients(&state.diagrams, state.params.m, dec);
    let next = stepper.step(&state.fields, &state.diagrams, &coeffs, dec)?;
    let w = unit_noise_spectrum(grid, rng);
    let diagrams = DiagramStepper::new(grid, dt)?.step(&state.diagrams, &w, dec);
    Ok(SolverState {
        fields: next.state,
        diagrams,
        params: state.params.clone(),
    })
}

/// Sign of the cubic term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CubeSign {
    /// `-X^3`, the physical model.
    Damping,
    /// `+X^3`, blows up in finite time.
    Reversed,
}

impl CubeSign {
    pub fn as_str(&self) -> &'static str {
        match self {
            CubeSign::Damping => "damping",
            CubeSign::Reversed => "reversed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "damping" => Some(CubeSign::Damping),
            "reversed" => Some(CubeSign::Reversed),
            _ => None,
        }
    }

    fn factor(&self) -> f64 {
        match self {
            CubeSign::Damping => -1.0,
            CubeSign::Reversed => 1.0,
        }
    }
}

/// Exponential Euler for `X`:
/// `X <- e^{dt Lap} X + dt phi_1(dt Lap) (s X^3 + m_delta X) + g W`, where
/// `g^2 = (1 - e^{-2 dt |zeta|^2}) / (2 |zeta|^2)` is the variance of the
/// stochastic heat convolution over one step and `W` the unit draw.
#[derive(Clone, Debug)]
pub struct DirectStepper {
    lin: ExpEuler,
    gain: Vec<f64>,
    sign: CubeSign,
    noise_amplitude: f64,
}

impl DirectStepper {
    pub fn new(grid: &TorusGrid, dt: f64, sign: CubeSign, noise_amplitude: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
        let gain = grid
            .zeta_sq()
            .iter()
            .map(|&mu| {
                if mu == 0.0 {
                    dt.sqrt()
                } else {
                    (-(-2.0 * dt * mu).exp_m1() / (2.0 * mu)).sqrt()
                }
            })
            .collect();
        Ok(Self {
            lin: ExpEuler::new(grid, dt, 0.0),
            gain,
            sign,
            noise_amplitude,
        })
    }

    pub fn dt(&self) -> f64 {
        self.lin.dt()
    }

    pub fn step(&self, x: &Field, m_delta: f64, unit_noise: &[Complex64], t_next: f64) -> Result<Field> {
        let s = self.sign.factor();
        let n = x.map(|v| s * v * v * v + m_delta * v);
        let out = if self.noise_amplitude == 0.0 {
            self.lin.step(x, &n)
        } else {
            let extra: Vec<Complex64> = unit_noise
                .iter()
                .zip(&self.gain)
                .map(|(w, g)| w * (g * self.noise_amplitude))
                .collect();
            self.lin.step_with(x, &n, &extra)
        };
        check_blowup(&out, t_next)?;
        Ok(out)
    }
}

/// One direct step with a fresh noise draw from `rng`, `m_delta` from the
/// diagram constants.
pub fn step_direct(x: &Field, dt: f64, ds: &DiagramSet, m: f64, rng: &mut impl rand::Rng) -> Result<Field> {
    x.check_same_grid(&ds.x1)?;
    let stepper = DirectStepper::new(x.grid(), dt, CubeSign::Damping, 1.0)?;
    let w = unit_noise_spectrum(x.grid(), rng);
    stepper.step(x, renormalised_mass(m, ds.c1, ds.c2), &w, ds.t + dt)
}

/// Exponential Euler for the two-dimensional remainder
/// `(d_t - Lap) Y = -Y^3 - 3 Y^2 <1> - 3 Y <2> - <3> + m (<1> + Y) + <1>`.
#[derive(Clone, Debug)]
pub struct Dpd2Stepper {
    heat: ExpEuler,
}

impl Dpd2Stepper {
    pub fn new(grid: &TorusGrid, dt: f64) -> Result<Self> {
        if grid.d() != 2 {
            return Err(invalid(format!("dpd2 formulation needs d = 2, got d = {}", grid.d())));
        }
        if !(dt > 0.0) {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
        Ok(Self {
            heat: ExpEuler::new(grid, dt, 0.0),
        })
    }

    pub fn step(&self, y: &Field, ds: &DiagramSet, m: f64) -> Result<Field> {
        let n: Vec<f64> = y
            .values()
            .iter()
            .zip(ds.x1.values())
            .zip(ds.x2.values().iter().zip(ds.x3.values()))
            .map(|((&y, &x1), (&x2, &x3))| {
                -y * y * y - 3.0 * y * y * x1 - 3.0 * y * x2 - x3 + m * (x1 + y) + OU_MASS * x1
            })
            .collect();
        let n = Field::from_values_unchecked(y.grid(), n);
        let out = self.heat.step(y, &n);
        check_blowup(&out, ds.t + self.heat.dt())?;
        Ok(out)
    }
}

pub fn step_dpd2(y: &Field, dt: f64, ds: &DiagramSet, m: f64) -> Result<Field> {
    y.check_same_grid(&ds.x1)?;
    Dpd2Stepper::new(y.grid(), dt)?.step(y, ds, m)
}

/// The six components of the solution-space norm over a stored trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct XNorm {
    pub v_low: f64,
    pub v_high: f64,
    pub v_holder: f64,
    pub w_low: f64,
    pub w_high: f64,
    pub w_holder: f64,
}

impl XNorm {
    pub fn max(&self) -> f64 {
        [
            self.v_low,
            self.v_high,
            self.v_holder,
            self.w_low,
            self.w_high,
            self.w_holder,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Evaluates
/// `sup |v|_{B^{-3/5}}`, `sup t^{3/5} |v|_{B^{1/2+2eps}}`,
/// `sup s^{1/2} |v(t)-v(s)|_inf / |t-s|^{1/8}` and the `w` analogues with
/// `t^{17/20} |w|_{B^{1+2eps}}`, all with `p = q = inf`.
pub fn xnorm_diagnostics(trajectory: &[ParaState], epsilon: f64, dec: &DyadicDecomposition) -> Result<XNorm> {
    if trajectory.is_empty() {
        return Err(invalid("empty trajectory"));
    }
    let low = BesovIndex::holder(-0.6);
    let vh = BesovIndex::holder(0.5 + 2.0 * epsilon);
    let wh = BesovIndex::holder(1.0 + 2.0 * epsilon);
    let mut out = XNorm {
        v_low: 0.0,
        v_high: 0.0,
        v_holder: 0.0,
        w_low: 0.0,
        w_high: 0.0,
        w_holder: 0.0,
    };
    for s in trajectory {
        let bv = dec.blocks(&s.v);
        let bw = dec.blocks(&s.w);
        out.v_low = out.v_low.max(bv.besov_norm(low));
        out.w_low = out.w_low.max(bw.besov_norm(low));
        if s.t > 0.0 {
            out.v_high = out.v_high.max(s.t.powf(0.6) * bv.besov_norm(vh));
            out.w_high = out.w_high.max(s.t.powf(0.85) * bw.besov_norm(wh));
        }
    }
    for (i, a) in trajectory.iter().enumerate() {
        if a.t <= 0.0 {
            continue;
        }
        for b in &trajectory[i + 1..] {
            let gap = b.t - a.t;
            if gap <= 0.0 {
                continue;
            }
            let weight = a.t.sqrt() / gap.powf(0.125);
            out.v_holder = out.v_holder.max(weight * (&b.v - &a.v).sup_norm());
            out.w_holder = out.w_holder.max(weight * (&b.w - &a.w).sup_norm());
        }
    }
    Ok(out)
}

/// A stored point of a trajectory for the energy identity.
#[derive(Clone, Debug)]
pub struct EnergySample {
    pub t: f64,
    pub w: Field,
    /// `G~ + c v` at time `t`, with `G~ = G + w^3`.
    pub forcing: Field,
}

/// Running defect of the testing identity against `w^{3p-3}`,
///
/// `(|w(t)|^{3p-2}_{3p-2} - |w0|^{3p-2}_{3p-2}) / (3p-2)
///  + int <grad w, grad w^{3p-3}> + int |w|_{3p}^{3p} - int <G~ + c v, w^{3p-3}>`,
///
/// at each stored time. The time integrals use the left-endpoint rule, so
/// the defect of a first-order trajectory is itself first order in the step
/// and halves with it. The gradient term is the discrete form of
/// `(3p-3) int |grad w|^2 w^{3p-4}`.
pub fn energy_balance_residual(trajectory: &[EnergySample], p: u32) -> Result<Vec<f64>> {
    if !p.is_multiple_of(2) {
        return Err(invalid(format!("p = {p} must be even")));
    }
    if trajectory.is_empty() {
        return Err(invalid("empty trajectory"));
    }
    let q = 3 * p as i32;
    let rate = |s: &EnergySample| -> f64 {
        let w = &s.w;
        let wq3 = w.map(|x| x.powi(q - 3));
        let grad: f64 = w.gradient().iter().zip(wq3.gradient()).map(|(a, b)| a.inner(&b)).sum();
        let cube = w.map(|x| x.powi(q)).values().iter().sum::<f64>() * w.grid().cell_volume();
        let forcing = s.forcing.inner(&wq3);
        grad + cube - forcing
    };
    let level = |s: &EnergySample| -> f64 {
        s.w.map(|x| x.powi(q - 2)).values().iter().sum::<f64>() * s.w.grid().cell_volume() / f64::from(3 * p - 2)
    };
    let e0 = level(&trajectory[0]);
    let mut acc = 0.0;
    let mut out = vec![0.0];
    for pair in trajectory.windows(2) {
        acc += (pair[1].t - pair[0].t) * rate(&pair[0]);
        out.push(level(&pair[1]) - e0 + acc);
    }
    Ok(out)
}
