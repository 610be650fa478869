//! `fairfront`: batch front-end for threshold sweeps.
//!
//! Exit codes: 0 success, 1 input or parse error, 2 semantic error, 3 cap exceeded.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fairfront::export::{write_csv, write_csv_all, write_json};
use fairfront::justice::{claim_counts, claims_mask};
use fairfront::{
    evaluate_rule, extreme_indices, format_number, front_path, optimal_uniform_threshold,
    parse_config, parse_dataset, Dataset, DecisionRule, Error, ErrorClass, RuleRecord,
    SweepDocument, SweepOptions, SweepResult, ValueConfig, DEFAULT_SWEEP_CAP,
};

#[derive(Parser)]
#[command(name = "fairfront", version, about = "Fairness/utility trade-offs of threshold decision rules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(clap::Args)]
struct Inputs {
    /// Dataset CSV with a header row.
    #[arg(long)]
    dataset: PathBuf,
    /// Value-configuration JSON.
    #[arg(long)]
    config: PathBuf,
}

#[derive(clap::Args)]
struct SweepArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Worker threads for rule evaluation.
    #[arg(long)]
    threads: Option<usize>,
    /// Largest number of threshold combinations to evaluate.
    #[arg(long, default_value_t = DEFAULT_SWEEP_CAP)]
    cap: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Parse the inputs and report groups and claim holders.
    Validate(Inputs),
    /// Print the decision maker's break-even score.
    OptimalThreshold {
        #[arg(long)]
        config: PathBuf,
    },
    /// Evaluate a single rule: `u:<t>` or `g:<group>=<t>,...`.
    Evaluate {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long)]
        rule: DecisionRule,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },
    /// Evaluate every threshold combination and flag the Pareto front.
    Sweep(SweepArgs),
    /// Like `sweep`, but export only the front, ordered from best utility to best fairness.
    Pareto(SweepArgs),
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.class() {
            ErrorClass::Input => 1,
            ErrorClass::Semantic => 2,
            ErrorClass::Capacity => 3,
        };
        Failure {
            code,
            message: format!("{}: {e}", e.code()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure {
            code: 1,
            message: format!("io: {e}"),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn open(path: &Path) -> Result<File, Failure> {
    File::open(path).map_err(|e| Failure {
        code: 1,
        message: format!("io: {}: {e}", path.display()),
    })
}

fn load_config(path: &Path) -> Result<ValueConfig, Failure> {
    Ok(parse_config(io::BufReader::new(open(path)?))?)
}

fn load(inputs: &Inputs) -> Result<(Dataset, ValueConfig), Failure> {
    let config = load_config(&inputs.config)?;
    let dataset = parse_dataset(io::BufReader::new(open(&inputs.dataset)?), &config.dataset_schema())?;
    Ok((dataset, config))
}

fn output(out: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Failure {
            code: 1,
            message: format!("io: {}: {e}", p.display()),
        })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn validate(inputs: &Inputs) -> CmdResult {
    let (dataset, config) = load(inputs)?;
    println!("individuals: {}", dataset.len());
    println!("groups: {}", dataset.groups().join(", "));
    let mask = claims_mask(&dataset, &config.analysis.claims)?;
    let counts = claim_counts(&dataset, &mask);
    println!("claim holders:");
    for (g, c) in dataset.groups().iter().zip(&counts) {
        println!("  {g}: {c}");
    }
    for (g, _) in dataset.groups().iter().zip(&counts).filter(|(_, &c)| c == 0) {
        eprintln!("warning: relevant position {g:?} has no claim holders");
    }
    config.validate_against(&dataset)?;
    let grid = config.threshold_grid(&dataset)?;
    println!("sweep size: {}", grid.size());
    println!("config digest: {}", config.digest());
    println!("valid");
    Ok(())
}

fn optimal_threshold(config: &Path) -> CmdResult {
    let config = load_config(config)?;
    let p = optimal_uniform_threshold(&config.analysis.dm_utility)?;
    println!("{}", format_number(p));
    Ok(())
}

fn evaluate(inputs: &Inputs, rule: &DecisionRule, out: &Option<PathBuf>, format: Format) -> CmdResult {
    let (dataset, config) = load(inputs)?;
    config.validate_against(&dataset)?;
    let detail = evaluate_rule(&dataset, rule, &config.analysis)?;
    let record = RuleRecord::new(&detail);
    let mut w = output(out)?;
    match format {
        Format::Json => {
            serde_json::to_writer(&mut w, &record).map_err(io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Format::Csv => {
            writeln!(w, "group,threshold,utility,claim_holders,accepted,group_size,acceptance_rate")?;
            for g in dataset.groups() {
                writeln!(
                    w,
                    "{g},{},{},{},{},{},{}",
                    format_number(record.thresholds[g]),
                    format_number(record.position_utilities[g]),
                    record.claim_holders[g],
                    record.accepted[g],
                    record.group_sizes[g],
                    format_number(record.acceptance_rates[g]),
                )?;
            }
            writeln!(w, "dm_utility,{}", format_number(record.dm_utility))?;
            writeln!(w, "fairness_score,{}", format_number(record.fairness_score))?;
        }
    }
    w.flush()?;
    Ok(())
}

fn run_sweep(args: &SweepArgs) -> Result<(Dataset, SweepResult), Failure> {
    let (dataset, config) = load(&args.inputs)?;
    let options = SweepOptions {
        cap: args.cap,
        progress: None,
    };
    let result = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Failure {
                code: 1,
                message: format!("thread pool: {e}"),
            })?
            .install(|| config.run(&dataset, options))?,
        None => config.run(&dataset, options)?,
    };
    Ok((dataset, result))
}

fn summarize(result: &SweepResult, to_stdout: bool) -> CmdResult {
    let (max_dm, max_fair) = extreme_indices(result)?;
    let describe = |i: usize| {
        let r = &result.evaluated[i];
        let ts: Vec<String> = result
            .groups
            .iter()
            .zip(result.thresholds(i))
            .map(|(g, t)| format!("{g}={}", format_number(t)))
            .collect();
        format!(
            "#{i} [{}] dm_utility={} fairness={}",
            ts.join(","),
            format_number(r.dm_utility),
            format_number(r.fairness_score)
        )
    };
    let text = format!(
        "{} rules, {} on front, {} viable\nmax dm utility: {}\nmax fairness: {}\n",
        result.len(),
        result.front_size(),
        result.evaluated.iter().filter(|r| r.viable).count(),
        describe(max_dm),
        describe(max_fair),
    );
    if to_stdout {
        print!("{text}");
    } else {
        eprint!("{text}");
    }
    Ok(())
}

fn sweep_cmd(args: &SweepArgs, front_only: bool) -> CmdResult {
    let (_, result) = run_sweep(args)?;
    let mut w = output(&args.out)?;
    match (args.format, front_only) {
        (Format::Json, _) => write_json(&SweepDocument::from_result(&result, false, front_only)?, &mut w)?,
        (Format::Csv, false) => write_csv_all(&result, &mut w)?,
        (Format::Csv, true) => write_csv(&result, &front_path(&result), &mut w)?,
    }
    w.flush()?;
    drop(w);
    summarize(&result, args.out.is_some())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Validate(inputs) => validate(inputs),
        Command::OptimalThreshold { config } => optimal_threshold(config),
        Command::Evaluate {
            inputs,
            rule,
            out,
            format,
        } => evaluate(inputs, rule, out, *format),
        Command::Sweep(args) => sweep_cmd(args, false),
        Command::Pareto(args) => sweep_cmd(args, true),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
