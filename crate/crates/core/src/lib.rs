//! Generalized LR parsing of word lattices.
//!
//! Grammars compile to SLR(1) tables that keep their conflicts. The parser
//! consumes a lattice of scored word hypotheses through an agenda of Shift,
//! Search and NewHypo actions on a graph-structured stack, and builds a packed
//! forest of every analysis. Links are scored by length-normalized acoustic
//! and bigram log-probabilities, which a two-stage beam strategy uses to
//! prune and later recover Shift actions.
//!
//! ```
//! use latglr_core::{build_slr_table, parse_exhaustive, parse_grammar, parse_lattice};
//!
//! let g = parse_grammar("S -> NP VP\nNP -> n\nVP -> v\nlex n dog\nlex v barks\n").unwrap();
//! let table = build_slr_table(&g);
//! let lattice = parse_lattice("0 5 dog -50.0\n5 9 barks -40.0\n").unwrap();
//! let (_forest, result) = parse_exhaustive(&g, &table, &lattice);
//! assert!(result.accepted);
//! ```

#![no_std]

extern crate alloc;

pub mod beam;
pub mod engine;
pub mod grammar;
pub mod gss;
pub mod lattice;
pub mod oracle;
pub mod scoring;
pub mod table;

pub use beam::{run_two_stage, BeamConfig, BeamStrategy};
pub use engine::{parse_exhaustive, Action, EngineConfig, Fifo, ParseResult, Parser, RandomOrder, Stats, Strategy};
pub use grammar::{parse_grammar, Grammar, GrammarError, RuleId, SymbolId};
pub use gss::{GssState, LinkId, NodeId, VertexId};
pub use lattice::{parse_bigram, parse_lattice, BigramModel, HypId, Lattice, LatticeError, WordBigrams, BEGIN_MARKER};
pub use scoring::{normalize_components, BestTree, ForestScores, ScoreComponents, ScoreCtx, ScoringConfig, Tree};
pub use table::{build_slr_table, SlrTable, StateId};
