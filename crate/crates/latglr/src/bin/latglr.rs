use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use latglr::check::{check_instance, minimize, run_trials, CheckOptions};
use latglr::dump::{forest_json, table_json};
use latglr::instance::Instance;
use latglr::pipeline::{load_bigram, load_grammar, load_lattice, run_parse, ParseOptions};
use latglr_core::build_slr_table;
use latglr_core::lattice::DEFAULT_FLOOR_LOGP;

// a closed pipe (`latglr parse ... | head`) ends output quietly
macro_rules! out {
    ($($t:tt)*) => {{ let _ = writeln!(std::io::stdout(), $($t)*); }};
}
macro_rules! outraw {
    ($($t:tt)*) => {{ let _ = write!(std::io::stdout(), $($t)*); }};
}

/// GLR parsing of scored word lattices.
#[derive(Parser)]
#[command(name = "latglr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build the SLR(1) table of a grammar and report its size.
    BuildTable {
        #[arg(long)]
        grammar: PathBuf,
        /// Write the table as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse a lattice and print acceptance, the best tree and statistics.
    Parse(ParseArgs),
    /// Compare the parser with the brute-force oracle.
    OracleCheck(CheckArgs),
}

#[derive(Args)]
struct Inputs {
    #[arg(long)]
    grammar: Option<PathBuf>,
    #[arg(long)]
    lattice: Option<PathBuf>,
    #[arg(long)]
    bigram: Option<PathBuf>,
    /// Log-probability of bigrams missing from the model.
    #[arg(long, default_value_t = DEFAULT_FLOOR_LOGP, allow_negative_numbers = true)]
    floor_logp: f64,
    /// Treat missing bigrams as unscorable instead of using the floor.
    #[arg(long)]
    strict_bigram: bool,
    /// Weight of the bigram term.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
}

#[derive(Args)]
struct ParseArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Beam width in log-score units; exhaustive when absent.
    #[arg(long)]
    beam: Option<f64>,
    /// Cap on pruned Shifts recovered after a failed beam pass.
    #[arg(long)]
    max_recovered: Option<u64>,
    /// Process the agenda in a random order drawn from this seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write the packed forest as JSON here.
    #[arg(long)]
    forest: Option<PathBuf>,
    /// Also print the hypotheses of the best path.
    #[arg(long)]
    best: bool,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Number of random instances (used when no lattice is given).
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 10)]
    max_hyps: usize,
    #[arg(long, default_value_t = 8)]
    max_frames: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, hide = true)]
    corrupt_scoring: bool,
}

enum Outcome {
    Success,
    Negative,
}

fn required(p: &Option<PathBuf>, flag: &str) -> Result<PathBuf> {
    p.clone().with_context(|| format!("missing --{flag}"))
}

fn build_table(grammar: &Path, out: Option<&Path>) -> Result<Outcome> {
    let g = load_grammar(grammar)?;
    let table = build_slr_table(&g);
    let report = table.report();
    out!("states: {}, conflict cells: {}", report.states, report.conflict_cells);
    if let Some(path) = out {
        fs::write(path, table_json(&g, &table)).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(Outcome::Success)
}

fn parse(args: &ParseArgs) -> Result<Outcome> {
    let i = &args.inputs;
    let g = load_grammar(&required(&i.grammar, "grammar")?)?;
    let lattice = load_lattice(&required(&i.lattice, "lattice")?)?;
    let bigram = load_bigram(&required(&i.bigram, "bigram")?, i.floor_logp)?;
    let opts = ParseOptions {
        lambda: i.lambda,
        beam: args.beam,
        max_recovered: args.max_recovered,
        strict_bigram: i.strict_bigram,
        seed: args.seed,
        action_budget: None,
    };
    let out = run_parse(&g, &lattice, &bigram, &opts);
    if let Some(path) = &args.forest {
        fs::write(path, forest_json(&out.gss, &g, &lattice)).with_context(|| format!("writing {}", path.display()))?;
    }
    out!("accepted={}", out.result.accepted);
    if let Some(best) = &out.best {
        out!("tree={}", best.tree);
        out!("score={:.6}", best.score);
        if args.best {
            for h in &best.path {
                let hyp = lattice.hypothesis(*h);
                out!(
                    "word={} {} {} {:?}",
                    hyp.start(),
                    hyp.end(),
                    lattice.word_of(*h),
                    hyp.acoustic_logp()
                );
            }
        }
    }
    if out.result.budget_exhausted {
        out!("budget_exhausted=true");
    }
    for (k, v) in out.result.stats.to_map() {
        out!("{k}={v}");
    }
    Ok(if out.result.accepted {
        Outcome::Success
    } else {
        Outcome::Negative
    })
}

fn oracle_check(args: &CheckArgs) -> Result<Outcome> {
    let i = &args.inputs;
    let opts = CheckOptions {
        lambda: i.lambda,
        strict_bigram: i.strict_bigram,
        corrupt_scoring: args.corrupt_scoring,
    };
    if let Some(lattice) = &i.lattice {
        let inst = Instance {
            label: lattice.display().to_string(),
            grammar: load_grammar(&required(&i.grammar, "grammar")?)?,
            lattice: load_lattice(lattice)?,
            bigram: load_bigram(&required(&i.bigram, "bigram")?, i.floor_logp)?,
        };
        return Ok(match check_instance(&inst, &opts) {
            Ok(()) => {
                out!("agree");
                Outcome::Success
            }
            Err(reason) => {
                let small = minimize(&inst, &opts);
                out!("disagree: {reason}");
                outraw!("{}", small.describe());
                Outcome::Negative
            }
        });
    }
    let report = run_trials(args.seed, args.trials, args.max_hyps, args.max_frames, &opts);
    out!("trials={}", report.trials);
    out!("disagreements={}", report.failures.len());
    match report.failures.first() {
        None => {
            out!("agree");
            Ok(Outcome::Success)
        }
        Some(f) => {
            out!("disagree: {}", f.reason);
            outraw!("{}", f.instance.describe());
            Ok(Outcome::Negative)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::BuildTable { grammar, out } => build_table(grammar, out.as_deref()),
        Command::Parse(args) => parse(args),
        Command::OracleCheck(args) => oracle_check(args),
    };
    match outcome {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Negative) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
