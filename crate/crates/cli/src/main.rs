use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use testimony_core::mutation::generate_mutants;
use testimony_core::mutation::MutantRecord;
use testimony_core::pipeline::{self, Corpus, OracleStatus, PipelineConfig, PipelineError};
use testimony_core::testgen::FitnessKind;

/// Evidence-based testability measurement for MiniOO classes.
#[derive(Parser, Debug)]
#[command(name = "testimony", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate tests, analyse mutants, and report controllability and observability.
    Measure(MeasureArgs),
    /// Compare estimated and idealistic metrics over exhaustive suites.
    OracleCheck(OracleArgs),
    /// Print the mutant catalog of every corpus file as JSON.
    Mutants {
        #[arg(long)]
        corpus: PathBuf,
    },
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Infection {
    Point,
}

#[derive(clap::Args, Debug)]
struct MeasureArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5000)]
    budget_ms: u64,
    #[arg(long, default_value_t = 2)]
    runs_per_fitness: u32,
    #[arg(long, value_delimiter = ',', default_value = "line-branch,weak-mutation,combined")]
    fitness: Vec<FitnessKind>,
    #[arg(long)]
    step_budget: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Where weak kills are judged; only the mutated node is supported.
    #[arg(long, value_enum, default_value = "point")]
    infection: Infection,
    /// Re-analyse the per-run suites stored by an earlier run in this directory.
    #[arg(long)]
    from_suites: Option<PathBuf>,
    /// Also write each class's de-encapsulated source.
    #[arg(long)]
    emit_deencap: bool,
}

#[derive(clap::Args, Debug)]
struct OracleArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    max_calls: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    arg_pool: Option<Vec<i64>>,
    #[arg(long)]
    step_budget: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

fn base(corpus: PathBuf, out: Option<PathBuf>, step_budget: Option<u64>, workers: Option<usize>) -> PipelineConfig {
    let d = PipelineConfig::default();
    PipelineConfig {
        corpus,
        out,
        step_budget: step_budget.unwrap_or(d.step_budget),
        workers: workers.unwrap_or(d.workers),
        ..d
    }
}

fn exit_code(e: &PipelineError) -> u8 {
    match e {
        PipelineError::Config(_) => 2,
        _ => 1,
    }
}

fn measure(a: MeasureArgs) -> Result<(), PipelineError> {
    let Infection::Point = a.infection;
    let cfg = PipelineConfig {
        seed: a.seed,
        budget_ms: a.budget_ms,
        runs_per_fitness: a.runs_per_fitness,
        fitness: a.fitness,
        from_suites: a.from_suites,
        emit_deencap: a.emit_deencap,
        ..base(a.corpus, Some(a.out.clone()), a.step_budget, a.workers)
    };
    let report = pipeline::measure(&cfg)?;
    println!("{:<12} {:>8} {:>7} {:>6} {:>8} {:>8}", "class", "mutants", "wkill", "kill", "contr", "obs");
    for c in &report.classes {
        let show = |m: &testimony_core::metrics::Metric| m.decimal().unwrap_or_else(|| "UNDEFINED".into());
        println!(
            "{:<12} {:>8} {:>7} {:>6} {:>8} {:>8}",
            c.name,
            c.n_mutants,
            c.n_wkill,
            c.n_kill,
            show(&c.contr),
            show(&c.obs)
        );
    }
    for f in &report.failures {
        eprintln!("{}: {} failed: {}", f.class, f.stage, f.message);
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn oracle_check(a: OracleArgs) -> Result<(), PipelineError> {
    let cfg = PipelineConfig {
        oracle_max_calls: a.max_calls,
        oracle_arg_pool: a.arg_pool,
        ..base(a.corpus, Some(a.out.clone()), a.step_budget, a.workers)
    };
    let report = pipeline::oracle_check(&cfg)?;
    for c in &report.classes {
        match c.status {
            OracleStatus::Equal => {
                let ideal = c.idealistic.as_ref().expect("equal implies computed");
                println!("{}: equal (contr={}, obs={}, testability={})", c.class, ideal.contr, ideal.obs, ideal.testability)
            }
            OracleStatus::Discrepancy => println!("{}: DISCREPANCY {}", c.class, c.discrepancy.join("; ")),
            OracleStatus::Skipped => println!("{}: skipped ({})", c.class, c.reason.as_deref().unwrap_or("")),
        }
    }
    println!("wrote {}", a.out.join("oracle.json").display());
    Ok(())
}

#[derive(Serialize)]
struct FileCatalog {
    file: String,
    mutants: Vec<MutantRecord>,
}

fn mutants(corpus: PathBuf) -> Result<(), PipelineError> {
    let corpus = Corpus::load(&corpus)?;
    let dump: Vec<FileCatalog> = corpus
        .files
        .iter()
        .map(|f| FileCatalog {
            file: f.name.clone(),
            mutants: generate_mutants(&f.program, &Default::default()).records(),
        })
        .collect();
    println!("{}", serde_json::to_string_pretty(&dump).expect("records serialize"));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Measure(a) => measure(a),
        Command::OracleCheck(a) => oracle_check(a),
        Command::Mutants { corpus } => mutants(corpus),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
