//! Loading inputs from files and running a configured parse.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use latglr_core::beam::{BeamConfig, BeamStrategy};
use latglr_core::engine::{EngineConfig, Fifo, ParseResult, Parser, RandomOrder};
use latglr_core::gss::GssState;
use latglr_core::lattice::{parse_bigram, parse_lattice, BigramModel, Lattice, WordBigrams};
use latglr_core::scoring::{BestTree, ForestScores, ScoreCtx};
use latglr_core::{build_slr_table, parse_grammar, Grammar, SlrTable};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn load_grammar(path: &Path) -> Result<Grammar> {
    let text = fs::read_to_string(path).with_context(|| format!("reading grammar {}", path.display()))?;
    parse_grammar(&text).with_context(|| format!("in grammar {}", path.display()))
}

pub fn load_lattice(path: &Path) -> Result<Lattice> {
    let text = fs::read_to_string(path).with_context(|| format!("reading lattice {}", path.display()))?;
    parse_lattice(&text).with_context(|| format!("in lattice {}", path.display()))
}

pub fn load_bigram(path: &Path, floor_logp: f64) -> Result<BigramModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading bigram model {}", path.display()))?;
    parse_bigram(&text, floor_logp).with_context(|| format!("in bigram model {}", path.display()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParseOptions {
    pub lambda: f64,
    /// `None` parses exhaustively.
    pub beam: Option<f64>,
    pub max_recovered: Option<u64>,
    pub strict_bigram: bool,
    /// Random agenda order (exhaustive runs only).
    pub seed: Option<u64>,
    pub action_budget: Option<u64>,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            lambda: 1.0,
            beam: None,
            max_recovered: None,
            strict_bigram: false,
            seed: None,
            action_budget: None,
        }
    }
}

pub struct ParseOutcome {
    pub result: ParseResult,
    pub gss: GssState,
    pub best: Option<BestTree>,
}

/// Build the table and parse one lattice.
pub fn run_parse(grammar: &Grammar, lattice: &Lattice, bigram: &BigramModel, opts: &ParseOptions) -> ParseOutcome {
    let table = build_slr_table(grammar);
    run_parse_with_table(grammar, &table, lattice, bigram, opts)
}

pub fn run_parse_with_table(
    grammar: &Grammar,
    table: &SlrTable,
    lattice: &Lattice,
    bigram: &BigramModel,
    opts: &ParseOptions,
) -> ParseOutcome {
    let bigrams = WordBigrams::new(bigram, lattice, opts.strict_bigram);
    let mut config = EngineConfig {
        action_budget: opts.action_budget,
        stop_at_first_accept: false,
    };
    let (gss, result) = match opts.beam {
        Some(width) => {
            // a finite beam is a search for one good parse, an infinite one
            // explores everything
            config.stop_at_first_accept = width.is_finite();
            let mut parser = Parser::new(grammar, table, lattice, config).with_scoring(bigrams.clone(), opts.lambda);
            let mut strategy = BeamStrategy::new(BeamConfig {
                beam_width: width,
                max_recovered: opts.max_recovered,
            });
            let r = parser.run(&mut strategy);
            (parser.into_gss(), r)
        }
        None => {
            let mut parser = Parser::new(grammar, table, lattice, config);
            let r = match opts.seed {
                Some(seed) => parser.run(&mut RandomOrder::new(ChaCha8Rng::seed_from_u64(seed))),
                None => parser.run(&mut Fifo::new()),
            };
            (parser.into_gss(), r)
        }
    };
    let best = result.root_nodes.first().and_then(|&root| {
        let ctx = ScoreCtx {
            grammar,
            lattice,
            gss: &gss,
            bigrams: &bigrams,
        };
        ForestScores::evaluate(&ctx, opts.lambda).best_tree(&ctx, root)
    });
    ParseOutcome { result, gss, best }
}

