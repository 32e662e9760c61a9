//! Command-line interface: run sweep experiments from a config file,
//! inspect ingested datasets, print closed-form predictions, and cross-check
//! the assignment algorithm against exhaustive enumeration.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Error;
use crate::harness::{self, ExperimentConfig};
use crate::ingest;
use crate::matching::serial_dictatorship;
use crate::model::{brute_force_stable, Instance};
use crate::theory::{
    logconcave_bound, predicted_alphas, predicted_metrics_uniform, uncertainty_band,
    TheoryParams,
};

#[derive(Debug, Parser)]
#[command(
    name = "fairselect",
    version,
    about = "Centralized selection under biased scores: simulation and analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the sweep experiment described by a JSON config file.
    Simulate(SimulateArgs),
    /// Load a candidate/program dataset and print a summary.
    Ingest(IngestArgs),
    /// Print closed-form predictions for two groups with uniform utilities.
    Theory(TheoryArgs),
    /// Check the assignment algorithm against exhaustive stable-assignment
    /// enumeration on random small instances.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Path to the experiment config (JSON).
    config: PathBuf,
    /// Master seed override (wins over the config and FAIRSELECT_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: OutputFormat,
    /// Iteration count override.
    #[arg(long)]
    iterations: Option<usize>,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// Candidate CSV (candidate_id, score, group columns).
    candidates: PathBuf,
    /// Program CSV (program_id, capacity, opening_rank, closing_rank).
    programs: PathBuf,
    /// Column holding the protected attribute.
    #[arg(long)]
    group_column: String,
    /// Keep only the best-scoring candidates.
    #[arg(long)]
    rank_limit: Option<usize>,
    /// Drop programs whose closing rank exceeds this.
    #[arg(long)]
    closing_cutoff: Option<u32>,
}

#[derive(Debug, Args)]
struct TheoryArgs {
    /// Relative scale of the disfavored group's observed scores, in (0, 1].
    #[arg(long)]
    beta: f64,
    /// Size of the favored group.
    #[arg(long)]
    n1: usize,
    /// Size of the disfavored group.
    #[arg(long)]
    n2: usize,
    /// Total number of slots.
    #[arg(long = "K")]
    capacity: usize,
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Candidates per trial instance (at most 8).
    #[arg(long, default_value_t = 6)]
    n: usize,
    /// Institutions per trial instance (at most 4).
    #[arg(long, default_value_t = 3)]
    p: usize,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Parse argv and run. Returns the process exit code: 0 on success, 1 for
/// usage or config problems, 2 for runtime failures.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                clap::error::ErrorKind::DisplayHelp
                | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        // A closed output pipe (`... | head`) is not a failure.
        Err(err) if err.is_broken_pipe() => 0,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Ingest(args) => ingest_summary(args),
        Command::Theory(args) => theory(args),
        Command::Oracle(args) => oracle(args),
    }
}

fn simulate(args: SimulateArgs) -> Result<(), Error> {
    let text = fs::read_to_string(&args.config)?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        config.seed = Some(seed);
    }
    if let Some(iterations) = args.iterations {
        config.iterations = iterations;
        config.validate()?;
    }
    let result = harness::run_experiment(&config)?;
    match &args.out {
        Some(path) => {
            let file = fs::File::create(path)?;
            emit(&result, args.format, file)?;
        }
        None => {
            let stdout = std::io::stdout();
            emit(&result, args.format, stdout.lock())?;
        }
    }
    Ok(())
}

fn emit(
    result: &harness::ExperimentResult,
    format: OutputFormat,
    writer: impl Write,
) -> Result<(), Error> {
    match format {
        OutputFormat::Csv => harness::write_csv(result, writer),
        OutputFormat::Json => harness::write_json(result, writer),
    }
}

fn ingest_summary(args: IngestArgs) -> Result<(), Error> {
    let table = ingest::load_candidates(&args.candidates, &args.group_column)?;
    let table = table.ranked(args.rank_limit)?;
    let programs = ingest::load_programs(&args.programs)?;
    let ranking = ingest::build_central_ranking(&programs, args.closing_cutoff)?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(out, "candidates={}", table.len())?;
    writeln!(out, "group_column={}", args.group_column)?;
    let sizes = table.groups().sizes();
    for (g, name) in table.group_names().iter().enumerate() {
        let members = table.groups().members(g);
        let mean: f64 =
            members.iter().map(|&i| table.scores()[i]).sum::<f64>() / sizes[g] as f64;
        writeln!(out, "group_{g}_label={name}")?;
        writeln!(out, "group_{g}_count={}", sizes[g])?;
        writeln!(out, "group_{g}_mean_score={mean:.6}")?;
    }
    writeln!(out, "programs={}", ranking.len())?;
    writeln!(out, "total_capacity={}", ranking.capacities().iter().sum::<usize>())?;
    writeln!(out, "most_selective={}", ranking.programs()[0].program_id)?;
    writeln!(
        out,
        "least_selective={}",
        ranking.programs()[ranking.len() - 1].program_id
    )?;
    writeln!(out, "ties_broken={}", ranking.tie_broken().len())?;
    Ok(())
}

fn theory(args: TheoryArgs) -> Result<(), Error> {
    let params = TheoryParams::new(args.n1, args.n2, args.capacity, args.beta)?;
    let pred = predicted_metrics_uniform(&params)?;
    let (alpha1, alpha2) = predicted_alphas(&params)?;
    let n = args.n1 + args.n2;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    writeln!(
        out,
        "n1={} n2={} capacity={} beta={}",
        args.n1, args.n2, args.capacity, args.beta
    )?;
    writeln!(out, "representation_ratio={}", pred.representation)?;
    writeln!(out, "utility_ratio={}", pred.utility)?;
    if args.n1 == args.n2 && args.n1 == args.capacity {
        let (_, u_limit) = crate::theory::equal_groups_limit(args.beta)?;
        writeln!(out, "utility_ratio_limit={u_limit}")?;
    }
    writeln!(out, "first_choice_upper_bound={}", pred.preference_upper)?;
    writeln!(out, "expected_selected_group1={alpha1}")?;
    writeln!(out, "expected_selected_group2={alpha2}")?;
    writeln!(out, "logconcave_representation_bound={}", logconcave_bound(args.beta)?)?;
    writeln!(out, "uncertainty_band={}", uncertainty_band(n))?;
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<(), Error> {
    if args.trials == 0 {
        return Err(Error::Config("trials must be >= 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut unique = 0usize;
    let mut matched = 0usize;
    for trial in 0..args.trials {
        let instance = random_small_instance(args.n, args.p, &mut rng)?;
        let stable = brute_force_stable(&instance)?;
        if stable.len() == 1 {
            unique += 1;
        } else {
            return Err(Error::InvalidInput(format!(
                "trial {trial}: {} stable assignments instead of 1",
                stable.len()
            )));
        }
        if stable[0] == serial_dictatorship(&instance) {
            matched += 1;
        } else {
            return Err(Error::InvalidInput(format!(
                "trial {trial}: enumeration disagrees with serial dictatorship"
            )));
        }
    }
    println!(
        "{unique}/{} unique; {matched}/{} match serial dictatorship",
        args.trials, args.trials
    );
    Ok(())
}

/// Random instance with distinct observed utilities, uniform preferences,
/// and small random capacities (at least one slot overall).
fn random_small_instance(
    n: usize,
    p: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Instance, Error> {
    use rand::seq::SliceRandom;
    let mut capacities: Vec<usize> = (0..p).map(|_| rng.random_range(0..=2usize)).collect();
    if capacities.iter().all(|&c| c == 0) {
        capacities[0] = 1;
    }
    let observed: Vec<f64> = loop {
        let draw: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let mut sorted = draw.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).all(|w| w[0] != w[1]) {
            break draw;
        }
    };
    let preferences: Vec<Vec<usize>> = (0..n)
        .map(|_| {
            let mut list: Vec<usize> = (0..p).collect();
            list.shuffle(rng);
            list
        })
        .collect();
    Instance::new(capacities, observed, preferences)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_flags_exit_with_usage_error() {
        assert_eq!(cli_main(["fairselect", "--frobnicate"]), 1);
        assert_eq!(cli_main(["fairselect", "theory", "--beta"]), 1);
        assert_eq!(cli_main(["fairselect"]), 1);
    }

    #[test]
    fn help_and_version_exit_cleanly() {
        assert_eq!(cli_main(["fairselect", "--help"]), 0);
        assert_eq!(cli_main(["fairselect", "--version"]), 0);
    }

    #[test]
    fn theory_subcommand_succeeds_on_valid_input() {
        assert_eq!(
            cli_main([
                "fairselect",
                "theory",
                "--beta",
                "0.5",
                "--n1",
                "100",
                "--n2",
                "100",
                "--K",
                "100"
            ]),
            0
        );
    }

    #[test]
    fn theory_subcommand_rejects_invalid_beta() {
        assert_eq!(
            cli_main([
                "fairselect",
                "theory",
                "--beta",
                "0",
                "--n1",
                "10",
                "--n2",
                "10",
                "--K",
                "10"
            ]),
            1
        );
    }

    #[test]
    fn oracle_subcommand_validates_scale() {
        assert_eq!(
            cli_main(["fairselect", "oracle", "--n", "9", "--p", "3", "--trials", "2"]),
            1
        );
    }

    #[test]
    fn oracle_small_run_passes() {
        assert_eq!(
            cli_main(["fairselect", "oracle", "--n", "4", "--p", "2", "--trials", "5"]),
            0
        );
    }

    #[test]
    fn missing_config_file_is_a_runtime_error() {
        assert_eq!(
            cli_main(["fairselect", "simulate", "/nonexistent/config.json"]),
            2
        );
    }
}
