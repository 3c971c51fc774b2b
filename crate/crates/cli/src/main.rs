//! `phi4`: command-line front end.
//!
//! Exit codes: 0 on success, 1 when an experiment verdict is FAIL, 2 on a
//! usage or configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use phi4::besov::{fit_inequality_exponent, DyadicDecomposition, FitSettings, Inequality, FIT_COLUMNS};
use phi4::diagrams::{diagram_bound, regularity_report, DiagramSet, DiagramStepper};
use phi4::gronwall::{asymptotic_rate, series_log};
use phi4::harness::{default_c2, run_named, simulate, NoiseSource};
use phi4::io::{read_config, write_csv, RunConfig};
use phi4::noise::member_rng;
use phi4::{make_grid, Error};

#[derive(Parser)]
#[command(name = "phi4", version, about = "Spectral simulation of the dynamic Phi^4 model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one trajectory per ensemble member.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's run directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evolve the stochastic diagrams and report their regularity norms.
    Diagrams {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Steps between recorded slices.
        #[arg(long, default_value_t = 100)]
        every: usize,
    },
    /// Fit the scaling exponents of the Besov-space inequalities.
    BesovTest {
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long, default_value_t = 256)]
        n: usize,
        #[arg(long, default_value_t = 64)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// CSV file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the Gronwall series rate against its asymptotic value.
    Gronwall {
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.3, 0.5, 0.7])]
        sigma: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![1.0, 10.0, 50.0])]
        s: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a named experiment and write report.csv and verdict.txt.
    Harness {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `experiment.tag` of the config.
        #[arg(long)]
        experiment: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the version.
    Version,
}

fn load(path: &Path) -> Result<RunConfig, Error> {
    if !path.exists() {
        return Err(Error::InvalidArgument(format!(
            "config file {} not found",
            path.display()
        )));
    }
    read_config(path)
}

/// Writes to `out` or prints to stdout.
fn emit(out: Option<&Path>, columns: &[&str], rows: &[Vec<String>]) -> Result<(), Error> {
    match out {
        Some(p) => write_csv(p, columns, rows),
        None => {
            print!("{}", csv_text(columns, rows));
            Ok(())
        }
    }
}

fn csv_text(columns: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = format!(
        "# {} {}\n{}\n",
        phi4::io::CSV_VERSION,
        columns.join(","),
        columns.join(",")
    );
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn besov_suite() -> Vec<Inequality> {
    let inf = f64::INFINITY;
    vec![
        Inequality::HeatSmoothing {
            alpha: 0.5,
            beta: 0.0,
            p: inf,
        },
        Inequality::HeatSmoothing {
            alpha: 1.0,
            beta: 0.0,
            p: inf,
        },
        Inequality::HeatSmoothing {
            alpha: 1.5,
            beta: 0.0,
            p: inf,
        },
        Inequality::ParaLt { alpha: -0.5, beta: 1.0 },
        Inequality::Resonant { alpha: -0.5, beta: 1.0 },
        Inequality::Interpolation { nu: 0.5 },
        Inequality::Embedding { alpha: -0.5, r: 2.0 },
        Inequality::Sobolev { alpha: 0.5, p: 2.0 },
    ]
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Version => {
            println!("phi4 {}", env!("CARGO_PKG_VERSION"));
        }
        Command::Simulate { config, out } => {
            let cfg = load(&config)?;
            let dir = out.unwrap_or_else(|| cfg.run_dir());
            let trajs = simulate(&cfg, Some(&dir))?;
            for t in &trajs {
                match t.blowup {
                    Some(at) => println!("member {}: blow-up at t = {at}", t.member),
                    None => println!("member {}: {} rows", t.member, t.rows.len()),
                }
            }
            println!("wrote {}", dir.display());
        }
        Command::Diagrams { config, out, every } => {
            let cfg = load(&config)?;
            let grid = make_grid(cfg.d, cfg.n)?;
            let dec = DyadicDecomposition::new(&grid);
            let c2 = default_c2(&dec, cfg.root_seed)?;
            let mut noise = NoiseSource::new(&grid, member_rng(cfg.root_seed, 0), 1, true);
            let stepper = DiagramStepper::new(&grid, cfg.dt)?;
            let mut ds = DiagramSet::stationary(c2, &dec, noise.rng());
            let mut slices = vec![ds.clone()];
            for step in 1..=cfg.steps() {
                ds = stepper.step(&ds, &noise.draw(), &dec);
                if step % every.max(1) == 0 {
                    slices.push(ds.clone());
                }
            }
            let report = regularity_report(&slices, cfg.model.epsilon, &dec)?;
            let rows: Vec<Vec<String>> = report
                .iter()
                .map(|r| {
                    vec![
                        r.tag.to_string(),
                        format!("{:?}", r.alpha),
                        format!("{:?}", r.measured_norm),
                    ]
                })
                .collect();
            let dir = out.unwrap_or_else(|| cfg.run_dir());
            std::fs::create_dir_all(&dir)?;
            write_csv(&dir.join("regularity.csv"), &["tag", "alpha", "measured_norm"], &rows)?;
            println!("C1 = {:?}, C2 = {c2:?}, K = {:?}", ds.c1, diagram_bound(&report));
            println!("wrote {}", dir.display());
        }
        Command::BesovTest {
            d,
            n,
            samples,
            seed,
            out,
        } => {
            let grid = make_grid(d, n)?;
            let dec = DyadicDecomposition::new(&grid);
            let settings = FitSettings {
                samples,
                seed,
                ..Default::default()
            };
            let mut rows = Vec::new();
            for ineq in besov_suite() {
                let fit = fit_inequality_exponent(ineq, &dec, &settings)?;
                rows.push(fit.row(n, seed).fields());
            }
            emit(out.as_deref(), &FIT_COLUMNS, &rows)?;
        }
        Command::Gronwall { sigma, s, out } => {
            let mut rows = Vec::new();
            for &sg in &sigma {
                for &x in &s {
                    let value = series_log(x, sg)?;
                    let target = asymptotic_rate(sg);
                    let rate = value / x;
                    rows.push(vec![
                        format!("{sg:?}"),
                        format!("{x:?}"),
                        format!("{value:?}"),
                        format!("{target:?}"),
                        format!("{:?}", (rate - target).abs() / target),
                    ]);
                }
            }
            emit(
                out.as_deref(),
                &["sigma", "s", "log_series", "asymptotic_rate", "relative_error"],
                &rows,
            )?;
        }
        Command::Harness {
            config,
            experiment,
            out,
        } => {
            let mut cfg = load(&config)?;
            if let Some(e) = experiment {
                cfg.experiment = e;
                cfg.validate()?;
            }
            let report = run_named(&cfg)?;
            let dir = out.unwrap_or_else(|| cfg.run_dir());
            report.write(&dir)?;
            print!("{}", report.verdict_text());
            println!("runtime {:.1} s", report.runtime_secs);
            println!("wrote {}", dir.display());
            if !report.passed() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(2),
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
