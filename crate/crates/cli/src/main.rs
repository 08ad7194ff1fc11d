//! `medreg`: command-line driver for median-bias measurement and
//! batch-based confidence-interval experiments.
//!
//! Subcommands map one-to-one onto the harness engines: `medbias`
//! (worst-case median bias over a model grid), `coverage` (miscoverage of
//! a procedure over a model/size/level grid), `sweep` (uniformity under
//! parameter drift), `duality` (estimator -> interval -> estimator round
//! trip with stage bounds), and `batchcount` (the batch-count formula with
//! its closed-form bracket). A hidden `oracle` subcommand exposes the
//! independent brute-force reimplementations for manual auditing.
//!
//! Exit codes: 0 on success (all internal oracle self-checks passed), 2 on
//! configuration errors (the message names the offending field; unknown
//! flags and subcommands also exit 2 via the usage error path), 1 on an
//! oracle self-check violation (the message names the failing cell) or any
//! other runtime failure.
//!
//! Every run is a pure function of its flags and config: reports are
//! byte-identical across runs, platforms, and thread counts. The
//! `MEDREG_THREADS` environment variable caps the worker pool without
//! affecting any output byte.

use clap::{Args, Parser, Subcommand};
use medreg_core::harness::{
    run_coverage, run_duality_roundtrip, run_medbias, run_uniformity_sweep, ExperimentConfig,
};
use medreg_core::oracles::{
    brute_force_batch_count, enumerate_median_bias, uniform_top2_probability, EnumEstimator,
    EnumerationSpec,
};
use medreg_core::{batch_count, batch_count_bounds, report, Error};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "medreg",
    version,
    about = "Median-bias and confidence-interval duality experiments",
    long_about = "Measures median bias of estimators, miscoverage of confidence \
                  procedures, and the round trip between the two (low-bias batch \
                  estimates give valid intervals; valid interval families give \
                  low-bias estimators). All Monte Carlo runs are deterministic in \
                  (config, seed) regardless of thread count."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Worst-case median bias of an estimator over a model grid
    Medbias(RunArgs),
    /// Miscoverage of a procedure over a (model, n, level) grid
    Coverage(RunArgs),
    /// Worst-case miscoverage under parameter drift mu = h/sqrt(n)
    Sweep(RunArgs),
    /// Estimator -> interval -> estimator round trip with stage bounds
    Duality(RunArgs),
    /// Batch count B(alpha, delta) with its closed-form bracket
    Batchcount(BatchcountArgs),
    /// Independent brute-force oracles, for manual auditing
    #[command(hide = true)]
    Oracle(OracleArgs),
}

/// Flags shared by the experiment subcommands. Every experiment is one
/// JSON config document; each flag below overrides the corresponding
/// config field, so quick desk runs need no file at all.
#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (a single JSON document)
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Model spec such as `normal_mean:mu=0`; repeat for a grid
    /// (replaces the config's model list)
    #[arg(long = "model", value_name = "SPEC")]
    models: Vec<String>,
    /// Procedure pipeline spec such as `hulc:est=mean` or
    /// `zinterval@0.1 -> boost_level`
    #[arg(long, value_name = "SPEC")]
    procedure: Option<String>,
    /// Estimator spec such as `mean`, `uniform_mle`, or
    /// `endpoint(zinterval@0.1)`
    #[arg(long, value_name = "SPEC")]
    estimator: Option<String>,
    /// Sample size; repeat for a grid (replaces the config's n grid)
    #[arg(long = "n", value_name = "N")]
    n: Vec<usize>,
    /// Miscoverage level in (0,1); repeat for a grid (replaces the
    /// config's level grid)
    #[arg(long = "level", value_name = "ALPHA")]
    levels: Vec<f64>,
    /// Monte Carlo replications per cell (default 100000)
    #[arg(long, value_name = "REPS")]
    reps: Option<u64>,
    /// Master seed of the replicate stream tree (default 0)
    #[arg(long, value_name = "SEED")]
    seed: Option<u64>,
    /// Write one CSV row per cell to this path
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,
    /// Write the nested JSON report to this path
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
    /// Suppress the plain-text summary on stdout
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct BatchcountArgs {
    /// Target miscoverage level in (0, 1]
    #[arg(long)]
    alpha: f64,
    /// Per-batch median-bias budget in [0, 1/2)
    #[arg(long, default_value_t = 0.0)]
    delta: f64,
}

#[derive(Args)]
struct OracleArgs {
    #[command(subcommand)]
    which: OracleCommand,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Linear-scan reference for the batch count
    Batchcount {
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 0.0)]
        delta: f64,
        /// Largest batch count the scan will try
        #[arg(long, default_value_t = 100_000)]
        bmax: u32,
    },
    /// P(2 X_(n) - X_(n-1) >= 1) under Unif(0,1)^n, by quadrature over
    /// the top-two order-statistic density
    Top2 {
        #[arg(long)]
        n: usize,
    },
    /// Exact median bias of a finite-support experiment by total
    /// enumeration in rational arithmetic
    Enumerate(EnumerateArgs),
}

#[derive(Args)]
struct EnumerateArgs {
    /// Comma-separated support values, uniformly weighted
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        required = true
    )]
    support: Vec<f64>,
    /// Number of i.i.d. draws (enumeration is exponential in this)
    #[arg(long)]
    n: usize,
    /// `mean` or `order_stat_median:r=K` (the randomized symmetric pair)
    #[arg(long, default_value = "mean")]
    estimator: String,
    /// Target value the estimator is measured against
    #[arg(long, allow_hyphen_values = true)]
    theta: f64,
}

impl RunArgs {
    /// Loads the config document (or starts from the all-defaults one)
    /// and applies flag overrides.
    fn merged_config(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_path(path).map_err(|e| match e {
                // An unreadable config document is a configuration error,
                // not a runtime failure.
                Error::Io { path, message } => {
                    Error::config("config", format!("cannot read {path}: {message}"))
                }
                other => other,
            })?,
            None => ExperimentConfig::from_json("{}").expect("the empty config is valid"),
        };
        if !self.models.is_empty() {
            cfg.models = self.models.clone();
        }
        if let Some(spec) = &self.procedure {
            cfg.procedure = Some(spec.clone());
        }
        if let Some(spec) = &self.estimator {
            cfg.estimator = Some(spec.clone());
        }
        if !self.n.is_empty() {
            cfg.n_grid = self.n.clone();
        }
        if !self.levels.is_empty() {
            cfg.level_grid = self.levels.clone();
        }
        if let Some(reps) = self.reps {
            cfg.reps = reps;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Runs one experiment engine and emits its three report forms.
fn emit<R>(
    args: &RunArgs,
    run: impl FnOnce(&ExperimentConfig) -> Result<R, Error>,
    csv: impl Fn(&R) -> String,
    json: impl Fn(&R) -> String,
    summary: impl Fn(&R) -> String,
) -> Result<(), Error> {
    let cfg = args.merged_config()?;
    let rep = run(&cfg)?;
    if let Some(path) = &args.csv {
        write_file(path, &csv(&rep))?;
    }
    if let Some(path) = &args.json {
        write_file(path, &json(&rep))?;
    }
    if !args.quiet {
        print!("{}", summary(&rep));
    }
    Ok(())
}

fn parse_enum_estimator(spec: &str) -> Result<EnumEstimator, Error> {
    if spec == "mean" {
        return Ok(EnumEstimator::Mean);
    }
    if let Some(rest) = spec.strip_prefix("order_stat_median:r=") {
        let r: usize = rest.parse().map_err(|_| {
            Error::config(
                "estimator",
                format!("rank must be a positive integer, got `{rest}`"),
            )
        })?;
        return Ok(EnumEstimator::RandomizedOrderStatMedian { r });
    }
    Err(Error::config(
        "estimator",
        format!("enumeration knows `mean` and `order_stat_median:r=K`, got `{spec}`"),
    ))
}

fn run_batchcount(args: &BatchcountArgs) -> Result<(), Error> {
    let b = batch_count(args.alpha, args.delta)?;
    let (lo, hi) = batch_count_bounds(args.alpha, args.delta)?;
    println!("B={b}");
    println!("bracket: {lo} <= B <= {hi}");
    Ok(())
}

fn run_oracle(args: &OracleArgs) -> Result<(), Error> {
    match &args.which {
        OracleCommand::Batchcount { alpha, delta, bmax } => {
            match brute_force_batch_count(*alpha, *delta, *bmax)? {
                Some(b) => println!("B={b}"),
                None => println!("none (no batch count up to {bmax} satisfies the level)"),
            }
        }
        OracleCommand::Top2 { n } => {
            let p = uniform_top2_probability(*n)?;
            println!("P(2 X_(n) - X_(n-1) >= 1) = {p}");
        }
        OracleCommand::Enumerate(e) => {
            let estimator = parse_enum_estimator(&e.estimator)?;
            let spec = EnumerationSpec::discrete_uniform(&e.support, e.n, estimator, e.theta)?;
            let result = enumerate_median_bias(&spec)?;
            println!(
                "outcomes={} p_ge={} p_le={} bias={}{}",
                result.outcomes,
                result.p_ge,
                result.p_le,
                result.bias,
                if result.bias_exactly_zero {
                    " (exactly zero)"
                } else {
                    ""
                },
            );
        }
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Medbias(args) => emit(
            args,
            run_medbias,
            report::bias_csv,
            report::bias_json,
            report::bias_summary,
        ),
        Command::Coverage(args) => emit(
            args,
            run_coverage,
            report::coverage_csv,
            report::coverage_json,
            report::coverage_summary,
        ),
        Command::Sweep(args) => emit(
            args,
            run_uniformity_sweep,
            report::coverage_csv,
            report::coverage_json,
            report::coverage_summary,
        ),
        Command::Duality(args) => emit(
            args,
            run_duality_roundtrip,
            report::duality_csv,
            report::duality_json,
            report::duality_summary,
        ),
        Command::Batchcount(args) => run_batchcount(args),
        Command::Oracle(args) => run_oracle(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(2)
            } else {
                // Oracle self-check violations and runtime failures.
                ExitCode::from(1)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(list: &[&str]) -> RunArgs {
        // Parse through the real grammar so the test covers flag names.
        let mut argv = vec!["medreg", "coverage"];
        argv.extend_from_slice(list);
        match Cli::try_parse_from(argv).expect("flags parse").command {
            Command::Coverage(args) => args,
            _ => unreachable!("the argv above selects `coverage`"),
        }
    }

    #[test]
    fn flags_build_a_config_without_a_file() {
        let args = run_args(&[
            "--model",
            "normal_mean:mu=0",
            "--model",
            "normal_mean:mu=1",
            "--procedure",
            "zinterval",
            "--n",
            "50",
            "--level",
            "0.1",
            "--seed",
            "9",
        ]);
        let cfg = args.merged_config().unwrap();
        assert_eq!(cfg.models.len(), 2);
        assert_eq!(cfg.procedure.as_deref(), Some("zinterval"));
        assert_eq!(cfg.n_grid, vec![50]);
        assert_eq!(cfg.level_grid, vec![0.1]);
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.reps, medreg_core::harness::DEFAULT_REPS);
    }

    #[test]
    fn flags_override_config_documents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("experiment.json");
        std::fs::write(
            &path,
            r#"{"models": ["normal_mean:mu=0"], "procedure": "zinterval",
                "n_grid": [10], "level_grid": [0.5], "reps": 77, "seed": 3}"#,
        )
        .unwrap();
        let mut args = run_args(&["--reps", "123", "--n", "20"]);
        args.config = Some(path);
        let cfg = args.merged_config().unwrap();
        assert_eq!(cfg.reps, 123);
        assert_eq!(cfg.n_grid, vec![20]);
        // Untouched fields come from the document.
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.level_grid, vec![0.5]);
    }

    #[test]
    fn missing_config_document_is_a_config_error() {
        let mut args = run_args(&[]);
        args.config = Some(PathBuf::from("/nonexistent/experiment.json"));
        let err = args.merged_config().unwrap_err();
        assert!(err.is_config());
        assert!(err.to_string().contains("config"));
    }

    #[test]
    fn enumeration_estimator_specs() {
        assert_eq!(parse_enum_estimator("mean").unwrap(), EnumEstimator::Mean);
        assert_eq!(
            parse_enum_estimator("order_stat_median:r=2").unwrap(),
            EnumEstimator::RandomizedOrderStatMedian { r: 2 }
        );
        assert!(parse_enum_estimator("median").unwrap_err().is_config());
        assert!(parse_enum_estimator("order_stat_median:r=x")
            .unwrap_err()
            .is_config());
    }

    #[test]
    fn cli_grammar_is_well_formed() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
