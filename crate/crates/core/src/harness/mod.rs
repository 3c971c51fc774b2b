//! Experiments with pass/fail verdicts.
//!
//! Every experiment produces an [`ExperimentReport`]: a statistics table plus
//! a list of [`Check`]s. The verdict depends only on the checks, and the
//! files written by [`ExperimentReport::write`] depend only on the table and
//! the checks, so a rerun with the same config and seed reproduces them byte
//! for byte.

mod engine;
mod experiments;
mod monitor;
mod trajectory;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::io::write_csv;

pub use engine::{band_profile, Lockstep, NoiseSource, Track};
pub use experiments::{
    default_c2, energy_balance_run, ode_reference, run_blowup_control, run_c_invariance, run_coming_down,
    run_consistency, run_energy_balance, run_invariant_measure, run_named, run_ode_reference, BlowupConfig,
    CInvarianceConfig, ComingDownConfig, ConsistencyConfig, EnergyBalanceConfig, InvariantConfig,
};
pub use monitor::{inequality_monitor, Estimate, MonitorReport, MonitorRow};
pub use trajectory::{simulate, Trajectory, TRAJECTORY_COLUMNS};

/// One tolerance check: passes when `lo <= value <= hi`.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lo: f64::NEG_INFINITY,
            hi,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, lo: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lo,
            hi: f64::INFINITY,
        }
    }

    pub fn within(name: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lo,
            hi,
        }
    }

    /// NaN never passes.
    pub fn passed(&self) -> bool {
        self.value >= self.lo && self.value <= self.hi
    }

    pub fn line(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let range = match (self.lo.is_finite(), self.hi.is_finite()) {
            (false, true) => format!("<= {}", num(self.hi)),
            (true, false) => format!(">= {}", num(self.lo)),
            _ => format!("in [{}, {}]", num(self.lo), num(self.hi)),
        };
        format!("{verdict} {}: {} {range}", self.name, num(self.value))
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub experiment: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub checks: Vec<Check>,
    pub runtime_secs: f64,
    pub config_hash: u64,
    pub root_seed: u64,
}

impl ExperimentReport {
    pub fn new(experiment: &str, columns: &[&str], root_seed: u64) -> Self {
        Self {
            experiment: experiment.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            checks: Vec::new(),
            runtime_secs: 0.0,
            config_hash: 0,
            root_seed,
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(Check::passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Column `name` of every row, parsed as numbers.
    pub fn column(&self, name: &str) -> Vec<f64> {
        let Some(i) = self.columns.iter().position(|c| c == name) else {
            return Vec::new();
        };
        self.rows.iter().map(|r| r[i].parse().unwrap_or(f64::NAN)).collect()
    }

    pub fn verdict_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{}", if self.passed() { "PASS" } else { "FAIL" });
        let _ = writeln!(s, "experiment {}", self.experiment);
        let _ = writeln!(s, "root_seed {}", self.root_seed);
        let _ = writeln!(s, "config_hash {:016x}", self.config_hash);
        for c in &self.checks {
            let _ = writeln!(s, "{}", c.line());
        }
        s
    }

    /// Writes `report.csv` and `verdict.txt` into `dir` and returns `dir`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let cols: Vec<&str> = self.columns.iter().map(String::as_str).collect();
        write_csv(&dir.join("report.csv"), &cols, &self.rows)?;
        fs::write(dir.join("verdict.txt"), self.verdict_text())?;
        Ok(dir.to_path_buf())
    }
}

/// Shortest round-trip formatting used in every table.
pub(crate) fn num(v: f64) -> String {
    format!("{v:?}")
}
