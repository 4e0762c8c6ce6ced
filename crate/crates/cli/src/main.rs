//! `graviton-sim`: validate scenarios, run them, and sweep seeds.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid scenario, 3 invariant
//! violation, 4 agent or schedule failure.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use graviton_core::sim::{self, Format, Scenario};

const EXIT_IO: u8 = 1;
const EXIT_VALIDATION: u8 = 2;

#[derive(Parser)]
#[command(name = "graviton-sim", version, about = "Deterministic wrapped-token liquidity-incentive simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Records,
}

impl OutputFormat {
    fn format(self) -> Format {
        match self {
            OutputFormat::Csv => Format::Csv,
            OutputFormat::Records => Format::Records,
        }
    }

    fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Records => "jsonl",
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Parse and cross-check a scenario file.
    Validate { config: PathBuf },
    /// Run one scenario and write its metrics.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        ticks: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
        /// Audit invariants every K ticks (and always at the end).
        #[arg(long)]
        audit_every: Option<u64>,
    },
    /// Run one scenario under several seeds in parallel.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Inclusive range `a..b`, or a comma-separated list.
        #[arg(long, value_parser = parse_seeds)]
        seeds: SeedList,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        ticks: Option<u64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
        #[arg(long)]
        audit_every: Option<u64>,
    },
}

#[derive(Clone, Debug)]
struct SeedList(Vec<u64>);

fn parse_seeds(text: &str) -> Result<SeedList, String> {
    let bad = || format!("expected `a..b` or a comma-separated list, got {text:?}");
    let seeds = if let Some((a, b)) = text.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if a > b {
            return Err(format!("empty seed range {text:?}"));
        }
        (a..=b).collect()
    } else {
        text.split(',')
            .map(|s| s.trim().parse::<u64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>, _>>()?
    };
    Ok(SeedList(seeds))
}

/// A failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_IO, message: format!("{}: {err}", path.display()) }
    }
}

impl From<sim::SimError> for Failure {
    fn from(e: sim::SimError) -> Self {
        Failure { code: e.exit_code() as u8, message: e.to_string() }
    }
}

fn load(path: &Path) -> Result<Scenario, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    Scenario::from_toml_str(&text).map_err(|e| Failure { code: EXIT_VALIDATION, message: e.to_string() })
}

fn configure(mut scenario: Scenario, seed: Option<u64>, ticks: Option<u64>, audit_every: Option<u64>) -> Result<Scenario, Failure> {
    if let Some(s) = seed {
        scenario = scenario.with_seed(s);
    }
    if let Some(t) = ticks {
        scenario = scenario.with_ticks(t);
    }
    if let Some(k) = audit_every {
        scenario = scenario
            .with_audit_every(k)
            .map_err(|e| Failure { code: EXIT_VALIDATION, message: e.to_string() })?;
    }
    Ok(scenario)
}

/// Write via a temporary file in the target directory, renamed on success.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Failure::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Failure::io(path, e))?;
    tmp.persist(path).map_err(|e| Failure::io(path, e.error))?;
    Ok(())
}

fn run_one(scenario: &Scenario, out: &Path, format: OutputFormat) -> Result<sim::RunSummary, Failure> {
    let output = sim::run(scenario)?;
    write_atomic(out, &output.metrics.to_bytes(format.format()))?;
    Ok(output.summary)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { config } => {
            load(&config)?;
            println!("OK");
        }
        Command::Run { config, seed, ticks, out, format, audit_every } => {
            let scenario = configure(load(&config)?, seed, ticks, audit_every)?;
            let summary = run_one(&scenario, &out, format)?;
            println!("seed: {}", scenario.seed);
            print!("{summary}");
            println!("metrics: {}", out.display());
        }
        Command::Sweep { config, seeds, out_dir, ticks, format, audit_every } => {
            let base = configure(load(&config)?, None, ticks, audit_every)?;
            fs::create_dir_all(&out_dir).map_err(|e| Failure::io(&out_dir, e))?;
            let stem = config.file_stem().and_then(|s| s.to_str()).unwrap_or("run").to_string();
            let results: Vec<(u64, PathBuf, Result<sim::RunSummary, Failure>)> = seeds
                .0
                .par_iter()
                .map(|&seed| {
                    let path = out_dir.join(format!("{stem}_seed{seed}.{}", format.extension()));
                    let scenario = base.clone().with_seed(seed);
                    let r = run_one(&scenario, &path, format);
                    (seed, path, r)
                })
                .collect();
            let mut first_failure = None;
            for (seed, path, r) in results {
                match r {
                    Ok(s) => println!("seed {seed}: ok, {} ticks, {} audits -> {}", s.ticks, s.audits, path.display()),
                    Err(f) => {
                        eprintln!("seed {seed}: {}", f.message);
                        first_failure.get_or_insert(f);
                    }
                }
            }
            if let Some(f) = first_failure {
                return Err(Failure { code: f.code, message: "sweep had failing seeds".into() });
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
