use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use crate::besov::DyadicDecomposition;
use crate::diagrams::{DiagramSet, DiagramStepper};
use crate::error::{Error, Result};
use crate::grid::{Field, TorusGrid};
use crate::noise::unit_noise_spectrum;
use crate::solver::{build_coefficients, reconstruct_x, renormalised_mass, DirectStepper, ParaState, ParaStepper};

/// `(1 + prod_i cos(pi x_i)) / 2`, sup norm 1.
pub fn band_profile(grid: &TorusGrid) -> Field {
    Field::from_fn(grid, |x| {
        0.5 + 0.5 * x.iter().map(|&xi| (PI * xi).cos()).product::<f64>()
    })
}

/// Unit noise draws for a step of `substeps` fine steps: the normalised sum
/// of `substeps` fine draws, so runs with `dt` and `dt / 2^k` see the same
/// Brownian path.
pub struct NoiseSource {
    grid: TorusGrid,
    rng: ChaCha8Rng,
    substeps: usize,
    enabled: bool,
}

impl NoiseSource {
    pub fn new(grid: &TorusGrid, rng: ChaCha8Rng, substeps: usize, enabled: bool) -> Self {
        Self {
            grid: grid.clone(),
            rng,
            substeps: substeps.max(1),
            enabled,
        }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn draw(&mut self) -> Vec<Complex64> {
        let len = self.grid.spectrum_len();
        if !self.enabled {
            return vec![Complex64::new(0.0, 0.0); len];
        }
        if self.substeps == 1 {
            return unit_noise_spectrum(&self.grid, &mut self.rng);
        }
        let mut acc = vec![Complex64::new(0.0, 0.0); len];
        for _ in 0..self.substeps {
            for (a, w) in acc.iter_mut().zip(unit_noise_spectrum(&self.grid, &mut self.rng)) {
                *a += w;
            }
        }
        let s = 1.0 / (self.substeps as f64).sqrt();
        acc.iter_mut().for_each(|a| *a *= s);
        acc
    }
}

/// A solution advanced alongside others on one noise path.
#[derive(Clone, Debug)]
pub enum Track {
    Para { stepper: ParaStepper, state: ParaState },
    Direct { stepper: DirectStepper, x: Field },
}

/// Several tracks sharing one diagram family and one noise path.
pub struct Lockstep<'a> {
    dec: &'a DyadicDecomposition,
    diag: DiagramStepper,
    pub diagrams: DiagramSet,
    tracks: Vec<Track>,
    blown: Vec<Option<f64>>,
    m: f64,
    t: f64,
    dt: f64,
}

impl<'a> Lockstep<'a> {
    pub fn new(
        dec: &'a DyadicDecomposition,
        diagrams: DiagramSet,
        dt: f64,
        m: f64,
        tracks: Vec<Track>,
    ) -> Result<Self> {
        let blown = vec![None; tracks.len()];
        Ok(Self {
            dec,
            diag: DiagramStepper::new(dec.grid(), dt)?,
            diagrams,
            tracks,
            blown,
            m,
            t: 0.0,
            dt,
        })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Time of the blow-up flag of track `i`, if raised.
    pub fn blown(&self, i: usize) -> Option<f64> {
        self.blown[i]
    }

    /// The solution `X` of track `i`.
    pub fn x(&self, i: usize) -> Field {
        match &self.tracks[i] {
            Track::Para { state, .. } => reconstruct_x(state, &self.diagrams),
            Track::Direct { x, .. } => x.clone(),
        }
    }

    /// Advances every live track and then the diagrams by one step with one
    /// draw from `noise`. A blow-up retires the track and is recorded.
    pub fn step(&mut self, noise: &mut NoiseSource) -> Result<()> {
        let w = noise.draw();
        let t_next = self.t + self.dt;
        let any_para = self
            .tracks
            .iter()
            .zip(&self.blown)
            .any(|(tr, b)| b.is_none() && matches!(tr, Track::Para { .. }));
        let coeffs = any_para.then(|| build_coefficients(&self.diagrams, self.m, self.dec));
        let m_delta = renormalised_mass(self.m, self.diagrams.c1, self.diagrams.c2);
        for (track, blown) in self.tracks.iter_mut().zip(self.blown.iter_mut()) {
            if blown.is_some() {
                continue;
            }
            let res = match track {
                Track::Para { stepper, state } => stepper
                    .step(state, &self.diagrams, coeffs.as_ref().unwrap(), self.dec)
                    .map(|s| *state = s.state),
                Track::Direct { stepper, x } => stepper.step(x, m_delta, &w, t_next).map(|nx| *x = nx),
            };
            match res {
                Ok(()) => {}
                Err(Error::BlowUp { t }) => *blown = Some(t),
                Err(e) => return Err(e),
            }
        }
        if any_para {
            self.diagrams = self.diag.step(&self.diagrams, &w, self.dec);
        }
        self.t = t_next;
        Ok(())
    }

    pub fn run_until(&mut self, t: f64, noise: &mut NoiseSource) -> Result<()> {
        while self.t < t - 0.5 * self.dt {
            self.step(noise)?;
        }
        Ok(())
    }
}
