//! Command-line interface: scenario simulation, the clonal optimizer,
//! negative-selection detector generation, and metrics recomputation.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 on runtime
//! errors (including a metrics trailer that fails recomputation).

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::ais::{
    exhaustive_bitstrings, negative_selection, negative_selection_from, write_detectors,
    AffinityConfig, Bitstring, ClonalParams, MatchScheme,
};
use crate::harness::{
    compute_summary, emit_metrics, load_scenario, parse_csv, render_csv, run_scenario, HarnessError,
};
use crate::optimizer::{grid_oracle, optimize};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Environment variable consulted for `optimize`'s default seed; the
/// `--seed` flag always wins.
pub const SEED_ENV_VAR: &str = "IMMUNET_SEED";

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "immunet",
    about = "Immune-inspired security simulator for wireless sensor networks",
    version
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a scenario file and emit its metrics CSV.
    Simulate(SimulateArgs),
    /// Maximize the benchmark landscape with clonal selection.
    Optimize(OptimizeArgs),
    /// Generate detectors by negative selection against a self set.
    Negsel(NegselArgs),
    /// Recompute a metrics CSV's summary and check it against the trailer.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scenario TOML file.
    scenario: PathBuf,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OptimizeArgs {
    /// Population size (antibody count).
    #[arg(long, default_value_t = 50)]
    pop: usize,
    /// How many of the best antibodies are cloned each generation.
    #[arg(long, default_value_t = 20)]
    select: usize,
    /// Clones distributed per generation.
    #[arg(long, default_value_t = 20)]
    clone_budget: usize,
    /// Hypermutation intensity in percent.
    #[arg(long, default_value_t = 80.0)]
    maturity: f64,
    /// Worst antibodies replaced by fresh randoms each generation.
    #[arg(long, default_value_t = 5)]
    replace_worst: usize,
    /// Generation budget.
    #[arg(long, default_value_t = 600)]
    gens: usize,
    /// RNG seed; defaults to $IMMUNET_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Write per-generation best fitness as CSV.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Dump the fitness lattice as x,y,fitness rows for external plotting.
    #[arg(long)]
    dump_lattice: Option<PathBuf>,
    /// Lattice resolution for --dump-lattice.
    #[arg(long, default_value_t = 100)]
    lattice_resolution: usize,
}

#[derive(Args, Debug)]
struct NegselArgs {
    /// Bitstring length.
    #[arg(long, default_value_t = 32)]
    len: usize,
    /// Contiguous-run threshold for the r-contiguous scheme.
    #[arg(long, default_value_t = 8)]
    r: usize,
    /// Matching scheme: r-contiguous or hamming.
    #[arg(long, default_value = "r-contiguous")]
    scheme: String,
    /// Recognition threshold for the hamming scheme.
    #[arg(long, default_value_t = 0.8)]
    threshold: f64,
    /// Self bitstring (binary digits); repeatable.
    #[arg(long = "self")]
    self_strings: Vec<String>,
    /// File with one self bitstring per line.
    #[arg(long)]
    self_file: Option<PathBuf>,
    /// How many detectors to generate.
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Candidate budget for random generation.
    #[arg(long, default_value_t = 100000)]
    max_attempts: usize,
    /// RNG seed for random candidate generation.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Enumerate every bitstring of the length instead of sampling.
    #[arg(long)]
    exhaustive: bool,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Metrics CSV produced by `simulate`.
    csv: PathBuf,
}

/// Parses argv and runs the selected command, returning the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
            let _ = err.print();
            return code;
        }
    };
    match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Optimize(args) => run_optimize(args),
        Command::Negsel(args) => negsel(args),
        Command::Report(args) => report(args),
    }
}

fn load_error_code(err: &HarnessError) -> i32 {
    match err {
        HarnessError::Io { .. }
        | HarnessError::Parse { .. }
        | HarnessError::Validation { .. }
        | HarnessError::BadCsv { .. } => EXIT_VALIDATION,
        HarnessError::Write { .. } => EXIT_RUNTIME,
    }
}

fn simulate(args: SimulateArgs) -> i32 {
    let config = match load_scenario(&args.scenario) {
        Ok(config) => config,
        Err(err) => {
            eprintln!("{err}");
            return load_error_code(&err);
        }
    };
    let report = match run_scenario(&config) {
        Ok(report) => report,
        Err(err) => {
            eprintln!("{err}");
            return EXIT_RUNTIME;
        }
    };
    match &args.out {
        Some(path) => {
            if let Err(err) = emit_metrics(&report, path) {
                eprintln!("{err}");
                return EXIT_RUNTIME;
            }
            let summary = &report.summary;
            println!(
                "wrote {} rows to {} (detection_rate={:.6} false_positive_rate={:.6})",
                report.rows.len(),
                path.display(),
                summary.detection_rate,
                summary.false_positive_rate,
            );
        }
        None => print!("{}", render_csv(&report)),
    }
    EXIT_OK
}

fn optimize_seed(cli_seed: Option<u64>) -> u64 {
    cli_seed
        .or_else(|| {
            std::env::var(SEED_ENV_VAR)
                .ok()
                .and_then(|s| s.parse().ok())
        })
        .unwrap_or(0)
}

fn run_optimize(args: OptimizeArgs) -> i32 {
    let params = ClonalParams {
        population_size: args.pop,
        select_count: args.select,
        clone_budget: args.clone_budget,
        maturity_level: args.maturity,
        replace_worst_n: args.replace_worst,
        max_generations: args.gens,
    };
    let seed = optimize_seed(args.seed);
    let report = match optimize(&params, seed) {
        Ok(report) => report,
        Err(err) => {
            eprintln!("{err}");
            return EXIT_VALIDATION;
        }
    };
    println!("best_fitness={:.6}", report.best.fitness);
    println!("best_x={:.6}", report.best.x);
    println!("best_y={:.6}", report.best.y);
    println!("generations={}", report.generations_used);
    println!("seed={seed}");

    if let Some(path) = &args.history {
        let mut text = String::from("generation,best_fitness\n");
        for (i, best) in report.history.iter().enumerate() {
            text.push_str(&format!("{},{best:.9}\n", i + 1));
        }
        if let Err(err) = std::fs::write(path, text) {
            eprintln!("cannot write {}: {err}", path.display());
            return EXIT_RUNTIME;
        }
    }
    if let Some(path) = &args.dump_lattice {
        if args.lattice_resolution < 2 {
            eprintln!("--lattice-resolution must be at least 2");
            return EXIT_VALIDATION;
        }
        let res = args.lattice_resolution;
        let mut text = String::from("x,y,fitness\n");
        for i in 0..=res {
            let x = i as f64 / res as f64;
            for j in 0..=res {
                let y = j as f64 / res as f64;
                let f = crate::optimizer::fitness(x, y).expect("lattice point is in domain");
                text.push_str(&format!("{x:.6},{y:.6},{f:.9}\n"));
            }
        }
        if let Err(err) = std::fs::write(path, text) {
            eprintln!("cannot write {}: {err}", path.display());
            return EXIT_RUNTIME;
        }
        let (bx, by, bf) = grid_oracle(res);
        println!("lattice_argmax=({bx:.6}, {by:.6}) lattice_max={bf:.9}");
    }
    EXIT_OK
}

fn negsel(args: NegselArgs) -> i32 {
    if args.len == 0 {
        eprintln!("--len must be at least 1");
        return EXIT_VALIDATION;
    }
    if args.r == 0 || args.r > args.len {
        eprintln!("--r must be in 1..=len");
        return EXIT_VALIDATION;
    }
    let scheme = match args.scheme.as_str() {
        "r-contiguous" => MatchScheme::RContiguous,
        "hamming" => MatchScheme::Hamming,
        other => {
            eprintln!("unknown scheme {other:?} (expected r-contiguous or hamming)");
            return EXIT_VALIDATION;
        }
    };
    let config = AffinityConfig {
        scheme,
        r: args.r,
        recognition_threshold: args.threshold,
    };

    let mut self_set = Vec::new();
    let mut raw_strings = args.self_strings.clone();
    if let Some(path) = &args.self_file {
        match std::fs::read_to_string(path) {
            Ok(text) => raw_strings.extend(
                text.lines()
                    .map(str::trim)
                    .filter(|l| !l.is_empty())
                    .map(String::from),
            ),
            Err(err) => {
                eprintln!("cannot read {}: {err}", path.display());
                return EXIT_VALIDATION;
            }
        }
    }
    for raw in &raw_strings {
        match Bitstring::from_binary_str(raw) {
            Some(bits) if bits.len() == args.len => self_set.push(bits),
            Some(bits) => {
                eprintln!(
                    "self string {raw:?} has length {}, expected {}",
                    bits.len(),
                    args.len
                );
                return EXIT_VALIDATION;
            }
            None => {
                eprintln!("self string {raw:?} is not a binary string");
                return EXIT_VALIDATION;
            }
        }
    }

    let detectors = if args.exhaustive {
        if args.len > 24 {
            eprintln!("--exhaustive is limited to lengths up to 24");
            return EXIT_VALIDATION;
        }
        negative_selection_from(
            &self_set,
            exhaustive_bitstrings(args.len),
            usize::MAX,
            &config,
        )
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        negative_selection(
            &self_set,
            args.len,
            args.count,
            &config,
            args.max_attempts,
            &mut rng,
        )
    };
    match detectors {
        Ok(detectors) => {
            print!("{}", write_detectors(&detectors));
            EXIT_OK
        }
        Err(err) => {
            eprintln!("{err}");
            EXIT_RUNTIME
        }
    }
}

fn report(args: ReportArgs) -> i32 {
    let text = match std::fs::read_to_string(&args.csv) {
        Ok(text) => text,
        Err(err) => {
            eprintln!("cannot read {}: {err}", args.csv.display());
            return EXIT_VALIDATION;
        }
    };
    let (rows, trailer) = match parse_csv(&text, &args.csv.display().to_string()) {
        Ok(parsed) => parsed,
        Err(err) => {
            eprintln!("{err}");
            return EXIT_VALIDATION;
        }
    };
    let recomputed = compute_summary(&rows);
    let vacuous = if recomputed.vacuous.is_empty() {
        "none".to_string()
    } else {
        recomputed.vacuous.join(",")
    };
    println!(
        "# summary: detection_rate={:.6} false_positive_rate={:.6} mean_ticks_to_neutralize={:.6} total_energy_drained={:.6} vacuous={}",
        recomputed.detection_rate,
        recomputed.false_positive_rate,
        recomputed.mean_ticks_to_neutralize,
        recomputed.total_energy_drained,
        vacuous,
    );
    match trailer {
        Some(embedded) => {
            let close = |a: f64, b: f64| (a - b).abs() <= 5e-7;
            let matches = close(embedded.detection_rate, recomputed.detection_rate)
                && close(embedded.false_positive_rate, recomputed.false_positive_rate)
                && close(
                    embedded.mean_ticks_to_neutralize,
                    recomputed.mean_ticks_to_neutralize,
                )
                && close(
                    embedded.total_energy_drained,
                    recomputed.total_energy_drained,
                )
                && embedded.vacuous == recomputed.vacuous;
            if matches {
                println!("trailer: consistent");
                EXIT_OK
            } else {
                eprintln!("trailer does not match the recomputed summary");
                EXIT_RUNTIME
            }
        }
        None => {
            eprintln!("no summary trailer found in {}", args.csv.display());
            EXIT_RUNTIME
        }
    }
}
