//! Run configuration, field snapshots and versioned CSV tables.

use std::fmt::Write as _;
use std::fs;
use std::hash::Hasher;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use fnv::FnvHasher;

use crate::error::{Error, Result};
use crate::grid::{Field, TorusGrid};
use crate::solver::{Com1Variant, CubeSign, Formulation, ModelParams};

/// Version tag carried by every CSV the crate writes.
pub const CSV_VERSION: &str = "phi4 csv v1";

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub d: usize,
    pub n: usize,
    pub model: ModelParams,
    pub sign: CubeSign,
    pub dt: f64,
    pub horizon: f64,
    pub burn_in: f64,
    /// Steps between field snapshots; 0 disables them.
    pub snapshot_every: usize,
    pub ensemble_size: usize,
    pub root_seed: u64,
    pub experiment: String,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            d: 3,
            n: 16,
            model: ModelParams::default(),
            sign: CubeSign::Damping,
            dt: 1e-4,
            horizon: 1.0,
            burn_in: 0.0,
            snapshot_every: 0,
            ensemble_size: 1,
            root_seed: 0,
            experiment: "simulate".to_string(),
            output_dir: PathBuf::from("out"),
        }
    }
}

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| config_err(line, format!("`{key}`: cannot parse `{value}`")))
}

/// Parses `section.key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut formulation_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| config_err(line, format!("expected `section.key = value`, got `{body}`")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "grid.d" => cfg.d = parse_value(line, key, value)?,
            "grid.n" => cfg.n = parse_value(line, key, value)?,
            "model.m" => cfg.model.m = parse_value(line, key, value)?,
            "model.c" => cfg.model.c = parse_value(line, key, value)?,
            "model.epsilon" => cfg.model.epsilon = parse_value(line, key, value)?,
            "model.p" => cfg.model.p = parse_value(line, key, value)?,
            "model.formulation" => {
                formulation_line = line;
                cfg.model.formulation = Formulation::parse(value)
                    .ok_or_else(|| config_err(line, format!("unknown formulation `{value}`")))?
            }
            "model.com1" => {
                cfg.model.com1 = Com1Variant::parse(value)
                    .ok_or_else(|| config_err(line, format!("unknown com1 variant `{value}`")))?
            }
            "model.sign" => {
                cfg.sign = CubeSign::parse(value).ok_or_else(|| config_err(line, format!("unknown sign `{value}`")))?
            }
            "time.dt" => cfg.dt = parse_value(line, key, value)?,
            "time.horizon" => cfg.horizon = parse_value(line, key, value)?,
            "time.burn_in" => cfg.burn_in = parse_value(line, key, value)?,
            "time.snapshot_every" => cfg.snapshot_every = parse_value(line, key, value)?,
            "ensemble.size" => cfg.ensemble_size = parse_value(line, key, value)?,
            "ensemble.root_seed" => cfg.root_seed = parse_value(line, key, value)?,
            "experiment.tag" => cfg.experiment = value.to_string(),
            "output.dir" => cfg.output_dir = PathBuf::from(value),
            _ => return Err(config_err(line, format!("unknown key `{key}`"))),
        }
        cfg.validate().map_err(|e| config_err(line, e.to_string()))?;
    }
    if cfg.model.formulation == Formulation::Dpd2 && cfg.d != 2 {
        return Err(config_err(formulation_line, "dpd2 formulation needs grid.d = 2"));
    }
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(1..=3).contains(&self.d) {
            return bad(format!("grid.d = {} not in 1..=3", self.d));
        }
        if self.n < 8 || !self.n.is_power_of_two() {
            return bad(format!("grid.n = {} must be a power of two >= 8", self.n));
        }
        self.model.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad(format!("time.dt = {} must be positive", self.dt));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return bad(format!("time.horizon = {} must be positive", self.horizon));
        }
        if !(self.burn_in >= 0.0 && self.burn_in.is_finite()) {
            return bad(format!("time.burn_in = {} must be >= 0", self.burn_in));
        }
        if self.ensemble_size == 0 {
            return bad("ensemble.size must be >= 1".to_string());
        }
        if self.experiment.is_empty() || self.experiment.contains(char::is_whitespace) {
            return bad(format!("experiment.tag `{}` must be a single word", self.experiment));
        }
        Ok(())
    }

    /// Canonical text form; parsing it gives back `self`.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let m = &self.model;
        let _ = writeln!(s, "grid.d = {}", self.d);
        let _ = writeln!(s, "grid.n = {}", self.n);
        let _ = writeln!(s, "model.m = {:?}", m.m);
        let _ = writeln!(s, "model.c = {:?}", m.c);
        let _ = writeln!(s, "model.epsilon = {:?}", m.epsilon);
        let _ = writeln!(s, "model.p = {}", m.p);
        let _ = writeln!(s, "model.formulation = {}", m.formulation.as_str());
        let _ = writeln!(s, "model.com1 = {}", m.com1.as_str());
        let _ = writeln!(s, "model.sign = {}", self.sign.as_str());
        let _ = writeln!(s, "time.dt = {:?}", self.dt);
        let _ = writeln!(s, "time.horizon = {:?}", self.horizon);
        let _ = writeln!(s, "time.burn_in = {:?}", self.burn_in);
        let _ = writeln!(s, "time.snapshot_every = {}", self.snapshot_every);
        let _ = writeln!(s, "ensemble.size = {}", self.ensemble_size);
        let _ = writeln!(s, "ensemble.root_seed = {}", self.root_seed);
        let _ = writeln!(s, "experiment.tag = {}", self.experiment);
        let _ = writeln!(s, "output.dir = {}", self.output_dir.display());
        s
    }

    /// 64-bit FNV-1a of [`RunConfig::serialize`].
    pub fn hash(&self) -> u64 {
        config_hash(&self.serialize())
    }

    /// `output_dir/<experiment>-<hash as 16 hex digits>`.
    pub fn run_dir(&self) -> PathBuf {
        self.output_dir
            .join(format!("{}-{:016x}", self.experiment, self.hash()))
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }
}

pub fn config_hash(text: &str) -> u64 {
    let mut h = FnvHasher::default();
    h.write(text.as_bytes());
    h.finish()
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    parse_config(&fs::read_to_string(path)?)
}

const MAGIC: &[u8; 8] = b"PHI4FLD1";

/// Writes `PHI4FLD1`, `u32 d`, `u32 n`, `u64 n^d`, then the values as
/// little-endian `f64` in row-major order.
pub fn write_field_snapshot(f: &Field, path: &Path) -> Result<()> {
    let g = f.grid();
    let mut buf = Vec::with_capacity(24 + 8 * g.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(g.d() as u32).to_le_bytes());
    buf.extend_from_slice(&(g.n() as u32).to_le_bytes());
    buf.extend_from_slice(&(g.len() as u64).to_le_bytes());
    for v in f.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

pub fn read_field_snapshot(path: &Path) -> Result<Field> {
    let bytes = fs::read(path)?;
    let bad = |m: &str| Error::Snapshot {
        path: path.to_path_buf(),
        message: m.to_string(),
    };
    if bytes.len() < 24 {
        return Err(bad("truncated header"));
    }
    if &bytes[..8] != MAGIC {
        return Err(bad("bad magic"));
    }
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let expect = (n as u64)
        .checked_pow(d as u32)
        .ok_or_else(|| bad("dimension overflow"))?;
    if count != expect {
        return Err(bad("payload count does not match n^d"));
    }
    let payload = count
        .checked_mul(8)
        .and_then(|b| usize::try_from(b).ok())
        .ok_or_else(|| bad("dimension overflow"))?;
    if bytes.len() - 24 != payload {
        return Err(bad("truncated payload"));
    }
    let grid = TorusGrid::new(d, n).map_err(|e| bad(&e.to_string()))?;
    let values = bytes[24..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Field::from_values(&grid, values)
}

/// Writes a table with the version comment line first.
pub fn write_csv<S: AsRef<str>>(path: &Path, columns: &[&str], rows: &[Vec<S>]) -> Result<()> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "# {CSV_VERSION} {}", columns.join(","))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(columns)?;
    for row in rows {
        if row.len() != columns.len() {
            return Err(Error::InvalidArgument(format!(
                "row has {} fields, table has {} columns",
                row.len(),
                columns.len()
            )));
        }
        w.write_record(row.iter().map(|s| s.as_ref()))?;
    }
    w.flush()?;
    Ok(())
}

/// A table read back by [`read_csv`].
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Reads a table, rejecting files without the version comment.
pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let mut reader = BufReader::new(fs::File::open(path)?);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let tag = format!("# {CSV_VERSION} ");
    let Some(cols) = first.trim_end().strip_prefix(&tag) else {
        return Err(Error::Config {
            line: 1,
            message: format!("{}: missing `# {CSV_VERSION}` header", path.display()),
        });
    };
    let mut r = csv::Reader::from_reader(reader);
    let columns: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if columns.join(",") != cols {
        return Err(Error::Config {
            line: 2,
            message: "column row disagrees with the version header".to_string(),
        });
    }
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<std::result::Result<_, _>>()?;
    Ok(CsvTable { columns, rows })
}
