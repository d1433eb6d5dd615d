//! Seeded small grammars and lattices shared by the integration tests.

#![allow(dead_code)]

use std::fmt::Write as _;

use latglr_core::lattice::{BigramModel, Lattice, BEGIN_MARKER, DEFAULT_FLOOR_LOGP};
use latglr_core::{parse_grammar, Grammar};
use rand::seq::SliceRandom;
use rand::Rng;

pub const G1: &str = "S -> NP VP\nNP -> n\nVP -> v\nlex n dog\nlex v barks\n";
pub const G2: &str = "S -> S S\nS -> a\nlex a a\n";
pub const G3: &str = "S -> A b\nA ->\nA -> a\nlex a a\nlex b b\n";

/// Layered grammar over four terminals: `N{i}` only mentions `N{j}` with
/// `j > i`, so nothing derives itself. Empty right sides are allowed.
pub fn layered_grammar<R: Rng>(rng: &mut R, rules: usize) -> Grammar {
    let nts = 5;
    let mut heads: Vec<usize> = (0..nts).collect();
    while heads.len() < rules {
        heads.push(rng.gen_range(0..nts));
    }
    heads.sort();
    let mut text = String::new();
    for h in heads {
        let len = if rng.gen_bool(0.1) { 0 } else { rng.gen_range(1..=3) };
        write!(text, "N{h} ->").unwrap();
        for _ in 0..len {
            if h + 1 < nts && rng.gen_bool(0.5) {
                write!(text, " N{}", rng.gen_range(h + 1..nts)).unwrap();
            } else {
                write!(text, " t{}", rng.gen_range(0..4)).unwrap();
            }
        }
        text.push('\n');
    }
    for w in 0..5 {
        writeln!(text, "lex t{} w{w}", w % 4).unwrap();
        if rng.gen_bool(0.3) {
            writeln!(text, "lex t{} w{w}", rng.gen_range(0..4)).unwrap();
        }
    }
    text.push_str("start N0\n");
    parse_grammar(&text).unwrap()
}

/// A grammar drawn from G1, G2, G3 or a layered random one.
pub fn any_grammar<R: Rng>(rng: &mut R) -> Grammar {
    match rng.gen_range(0..4) {
        0 => parse_grammar(G1).unwrap(),
        1 => parse_grammar(G2).unwrap(),
        2 => parse_grammar(G3).unwrap(),
        _ => layered_grammar(rng, 14),
    }
}

/// Random lattice over the grammar's words: a chain from 0 to the end plus
/// extra hypotheses, at most `max_hyps` in total.
pub fn lattice_for<R: Rng>(rng: &mut R, g: &Grammar, max_hyps: usize, max_frames: u32) -> Lattice {
    let words: Vec<&String> = g.lexicon().keys().collect();
    let end = rng.gen_range(1..=max_frames);
    let mut entries = Vec::new();
    let mut t = 0;
    while t < end && entries.len() < max_hyps {
        let e = rng.gen_range(t + 1..=end);
        entries.push((t, e, words.choose(rng).unwrap().to_string(), -rng.gen_range(1.0..6.0) * (e - t) as f64));
        t = e;
    }
    while entries.len() < max_hyps && rng.gen_bool(0.7) {
        let s = rng.gen_range(0..end);
        let e = rng.gen_range(s + 1..=end);
        entries.push((s, e, words.choose(rng).unwrap().to_string(), -rng.gen_range(1.0..6.0) * (e - s) as f64));
    }
    Lattice::new(entries).unwrap()
}

pub fn bigram_for<R: Rng>(rng: &mut R, lattice: &Lattice) -> BigramModel {
    let mut m = BigramModel::new(DEFAULT_FLOOR_LOGP);
    let prevs = std::iter::once(BEGIN_MARKER).chain(lattice.words().iter().map(String::as_str));
    for p in prevs {
        for n in lattice.words() {
            if rng.gen_bool(0.8) {
                m.insert(p, n, -rng.gen_range(0.05..4.0));
            }
        }
    }
    m
}
