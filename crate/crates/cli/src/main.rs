use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nhprk::harness::{self, certificate_entries, HarnessError, RunConfig, Table};
use nhprk::tableau::PartitionedTableau;
use serde_json::{json, Map, Value};

#[derive(Parser)]
#[command(name = "nhprk", version, about = "Partitioned Runge-Kutta experiments for constrained mechanical systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the coefficients and order certificate of a tableau pair.
    Tableau {
        #[arg(long, value_enum, default_value_t = Family::Lobatto)]
        family: Family,
        #[arg(long)]
        stages: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate one trajectory and write one CSV row per step.
    Simulate(RunArgs),
    /// Measure global errors and fitted orders against a fine reference run.
    Converge(RunArgs),
    /// Mean squared energy error over the chaotic ensemble.
    Ensemble(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Lobatto,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output CSV path; falls back to the `output` key, then standard output.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces or adds a configuration entry, e.g. `--override h=0.05`.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

enum Failure {
    Harness(HarnessError),
    Output(io::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Harness(e) => e.exit_code() as u8,
            Failure::Output(_) => 2,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Harness(e) => write!(f, "{e}"),
            Failure::Output(e) => write!(f, "cannot write output: {e}"),
        }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure::Harness(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Output(e)
    }
}

fn sink(out: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn emit(table: &Table, out: Option<&Path>) -> io::Result<()> {
    let mut w = sink(out)?;
    table.write_csv(&mut w).map_err(io::Error::other)?;
    w.flush()
}

fn load(args: &RunArgs) -> Result<(RunConfig, Option<PathBuf>), Failure> {
    let cfg = RunConfig::from_file(&args.config, &args.overrides).map_err(HarnessError::from)?;
    let out = args.out.clone().or_else(|| cfg.output.clone());
    Ok((cfg, out))
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Value {
    m.row_iter().map(|r| r.iter().copied().collect::<Vec<_>>()).collect()
}

fn tableau_json(pair: &PartitionedTableau) -> Value {
    let certificate: Map<String, Value> = certificate_entries(pair)
        .into_iter()
        .map(|(name, value)| (name.to_owned(), json!(value)))
        .collect();
    json!({
        "family": "lobatto",
        "stages": pair.stages(),
        "a": matrix_rows(pair.primal.a()),
        "b": pair.primal.b().as_slice(),
        "c": pair.primal.c().as_slice(),
        "a_hat": matrix_rows(pair.dual.a()),
        "b_hat": pair.dual.b().as_slice(),
        "c_hat": pair.dual.c().as_slice(),
        "certificate": certificate,
    })
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Tableau {
            family: Family::Lobatto,
            stages,
            format,
            out,
        } => {
            let invalid = |e: nhprk::error::Error| HarnessError::Config(harness::ConfigError::Invalid(e.to_string()));
            match format {
                Format::Csv => emit(&harness::tableau_table(stages).map_err(invalid)?, out.as_deref())?,
                Format::Json => {
                    let pair = PartitionedTableau::lobatto(stages).map_err(invalid)?;
                    let mut w = sink(out.as_deref())?;
                    serde_json::to_writer_pretty(&mut w, &tableau_json(&pair)).map_err(io::Error::other)?;
                    writeln!(w)?;
                    w.flush()?;
                }
            }
        }
        Command::Simulate(args) => {
            let (cfg, out) = load(&args)?;
            let sim = harness::simulate(&cfg)?;
            emit(&sim.table, out.as_deref())?;
            if let Some(e) = sim.failure {
                return Err(HarnessError::Solver(e).into());
            }
        }
        Command::Converge(args) => {
            let (cfg, out) = load(&args)?;
            let report = harness::converge(&cfg)?;
            emit(&report.to_table(), out.as_deref())?;
            eprintln!(
                "fitted slopes: q {:.3}, p {:.3}, lambda {:.3} (predicted {}, {}, {})",
                report.slope_q,
                report.slope_p,
                report.slope_lambda,
                report.predicted_qp,
                report.predicted_qp,
                report.predicted_lambda
            );
        }
        Command::Ensemble(args) => {
            let (cfg, out) = load(&args)?;
            let report = harness::ensemble(&cfg)?;
            emit(&report.table, out.as_deref())?;
            for (j, e) in &report.dropped {
                eprintln!("warning: member {j} dropped: {e}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
