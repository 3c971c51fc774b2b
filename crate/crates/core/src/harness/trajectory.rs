use std::path::{Path, PathBuf};

use super::engine::{band_profile, Lockstep, NoiseSource, Track};
use super::experiments::default_c2;
use super::num;
use crate::besov::{BesovIndex, DyadicDecomposition};
use crate::diagrams::{DiagramSet, DiagramStepper};
use crate::error::{Error, Result};
use crate::grid::{make_grid, Field};
use crate::io::{write_csv, write_field_snapshot, RunConfig};
use crate::noise::member_rng;
use crate::solver::{DirectStepper, Dpd2Stepper, Formulation, ParaState, ParaStepper};

pub const TRAJECTORY_COLUMNS: [&str; 6] = ["t", "v_sup", "w_sup", "x_sup", "x_besov", "blowup_flag"];

/// One member's per-step record.
#[derive(Clone, Debug, Default)]
pub struct Trajectory {
    pub member: u64,
    pub rows: Vec<Vec<String>>,
    pub blowup: Option<f64>,
    pub snapshots: Vec<PathBuf>,
}

fn row(t: f64, v: f64, w: f64, x: &Field, dec: &DyadicDecomposition, eps: f64, flag: bool) -> Vec<String> {
    let b = dec.blocks(x).besov_norm(BesovIndex::holder(-0.5 - eps));
    vec![
        num(t),
        num(v),
        num(w),
        num(x.sup_norm()),
        num(b),
        u8::from(flag).to_string(),
    ]
}

/// Runs one trajectory per ensemble member from `X0 = (1 + prod cos(pi x_i)) / 2`
/// with the formulation of `cfg`, recording `t`, `|v|`, `|w|`, `|X|` (sup
/// norms), `|X|_{B^{-1/2-eps}}` and the blow-up flag after every step. The
/// direct and `dpd2` formulations have no `v`, `w` and report NaN there.
///
/// With `dir` set, writes `trajectory_<member>.csv` and, every
/// `snapshot_every` steps, `x_<member>_<step>.bin`.
pub fn simulate(cfg: &RunConfig, dir: Option<&Path>) -> Result<Vec<Trajectory>> {
    cfg.validate()?;
    let grid = make_grid(cfg.d, cfg.n)?;
    let dec = DyadicDecomposition::new(&grid);
    let c2 = default_c2(&dec, cfg.root_seed)?;
    let x0 = band_profile(&grid);
    let eps = cfg.model.epsilon;
    let steps = cfg.steps();
    if let Some(d) = dir {
        std::fs::create_dir_all(d)?;
    }
    let mut out = Vec::new();
    for member in 0..cfg.ensemble_size as u64 {
        let mut noise = NoiseSource::new(&grid, member_rng(cfg.root_seed, member), 1, true);
        let mut ds = DiagramSet::stationary(c2, &dec, noise.rng());
        let mut traj = Trajectory {
            member,
            ..Default::default()
        };
        let snapshot = |traj: &mut Trajectory, x: &Field, step: usize| -> Result<()> {
            if let Some(d) = dir {
                if cfg.snapshot_every > 0 && step.is_multiple_of(cfg.snapshot_every) {
                    let p = d.join(format!("x_{member}_{step}.bin"));
                    write_field_snapshot(x, &p)?;
                    traj.snapshots.push(p);
                }
            }
            Ok(())
        };
        match cfg.model.formulation {
            Formulation::Dpd2 => {
                let stepper = Dpd2Stepper::new(&grid, cfg.dt)?;
                let diag = DiagramStepper::new(&grid, cfg.dt)?;
                let mut y = x0.clone();
                let x = &ds.x1 + &y;
                traj.rows.push(row(0.0, f64::NAN, f64::NAN, &x, &dec, eps, false));
                snapshot(&mut traj, &x, 0)?;
                for step in 1..=steps {
                    let w = noise.draw();
                    match stepper.step(&y, &ds, cfg.model.m) {
                        Ok(next) => y = next,
                        Err(Error::BlowUp { t }) => {
                            traj.blowup = Some(t);
                            traj.rows.push(vec![
                                num(t),
                                num(f64::NAN),
                                num(f64::NAN),
                                num(f64::NAN),
                                num(f64::NAN),
                                "1".into(),
                            ]);
                            break;
                        }
                        Err(e) => return Err(e),
                    }
                    ds = diag.step(&ds, &w, &dec);
                    let x = &ds.x1 + &y;
                    traj.rows.push(row(ds.t, f64::NAN, f64::NAN, &x, &dec, eps, false));
                    snapshot(&mut traj, &x, step)?;
                }
            }
            Formulation::Direct | Formulation::Paracontrolled => {
                let track = if cfg.model.formulation == Formulation::Direct {
                    Track::Direct {
                        stepper: DirectStepper::new(&grid, cfg.dt, cfg.sign, 1.0)?,
                        x: &ds.x1 + &x0,
                    }
                } else {
                    Track::Para {
                        stepper: ParaStepper::new(&grid, cfg.dt, cfg.model.c, cfg.model.com1)?,
                        state: ParaState::new(Field::zeros(&grid), x0.clone())?,
                    }
                };
                let mut ls = Lockstep::new(&dec, ds, cfg.dt, cfg.model.m, vec![track])?;
                let record = |ls: &Lockstep| -> (f64, f64, Field) {
                    match &ls.tracks()[0] {
                        Track::Para { state, .. } => (state.v.sup_norm(), state.w.sup_norm(), ls.x(0)),
                        Track::Direct { x, .. } => (f64::NAN, f64::NAN, x.clone()),
                    }
                };
                let (v, w, x) = record(&ls);
                traj.rows.push(row(0.0, v, w, &x, &dec, eps, false));
                snapshot(&mut traj, &x, 0)?;
                for step in 1..=steps {
                    ls.step(&mut noise)?;
                    if let Some(t) = ls.blown(0) {
                        traj.blowup = Some(t);
                        traj.rows.push(vec![
                            num(t),
                            num(f64::NAN),
                            num(f64::NAN),
                            num(f64::NAN),
                            num(f64::NAN),
                            "1".into(),
                        ]);
                        break;
                    }
                    let (v, w, x) = record(&ls);
                    traj.rows.push(row(ls.t(), v, w, &x, &dec, eps, false));
                    snapshot(&mut traj, &x, step)?;
                }
            }
        }
        if let Some(d) = dir {
            write_csv(
                &d.join(format!("trajectory_{member}.csv")),
                &TRAJECTORY_COLUMNS,
                &traj.rows,
            )?;
        }
        out.push(traj);
    }
    Ok(out)
}
