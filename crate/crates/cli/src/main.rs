mod config;
mod error;
mod pipeline;
mod post;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Method, RunArgs};
use error::CliError;
use post::{AnalyzeArgs, CompareArgs};

/// Transfer-operator and generator discretizations of flows: assemble, solve, analyze.
#[derive(Parser, Debug)]
#[command(name = "genflow", version)]
struct Cli {
    /// Worker threads; defaults to the machine's parallelism.
    #[arg(long, global = true, env = "GENFLOW_THREADS")]
    threads: Option<usize>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ulam's method: transition matrix from sampled trajectories.
    Ulam(RunArgs),
    /// Ulam's method for the generator: upwind face fluxes, no trajectories.
    Generator(RunArgs),
    /// Spectral collocation of the Fokker-Planck operator.
    Collocation(RunArgs),
    /// Recompute the analysis of a stored run.
    Analyze(AnalyzeArgs),
    /// Spectral-mapping table from a generator run and an ulam run.
    Compare(CompareArgs),
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let (method, args) = match cli.command {
        Command::Ulam(a) => (Method::Ulam, a),
        Command::Generator(a) => (Method::Generator, a),
        Command::Collocation(a) => (Method::Collocation, a),
        Command::Analyze(a) => {
            let report = post::run_analyze(&a)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            return Ok(());
        }
        Command::Compare(a) => {
            for r in post::run_compare(&a)? {
                println!(
                    "{:>3}  gen {:+.6e}{:+.6e}i  log(ulam)/t {:+.6e}{:+.6e}i  diff {:.3e}",
                    r.index,
                    r.generator_re,
                    r.generator_im,
                    r.ulam_log_re,
                    r.ulam_log_im,
                    r.difference
                );
            }
            return Ok(());
        }
    };
    let cfg = args.resolve(method)?;
    let outcome = pipeline::run(&cfg)?;
    let m = &outcome.metadata;
    println!(
        "{}: {} entries, {} nonzeros, {} field evaluations; assembly {:.3} s, eigensolve {:.3} s ({}); output in {}",
        method.as_str(),
        m.entries,
        m.matrix_nnz,
        m.field_evaluations,
        m.timings.assembly_seconds,
        m.timings.eigensolve_seconds,
        m.eigensolver.method,
        cfg.out.display()
    );
    if let Some(e) = outcome.report.density.reference_l1_error {
        println!("L1 error against the closed-form density: {e:.3e}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
