//! Seeded generation of grammars, lattices and bigram models.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use latglr_core::lattice::{BigramModel, Lattice, BEGIN_MARKER, DEFAULT_FLOOR_LOGP};
use latglr_core::{parse_grammar, Grammar};
use rand::seq::SliceRandom;
use rand::Rng;

pub const G1: &str = "S -> NP VP\nNP -> n\nVP -> v\nlex n dog\nlex v barks\n";
pub const G2: &str = "S -> S S\nS -> a\nlex a a\n";
pub const G3: &str = "S -> A b\nA ->\nA -> a\nlex a a\nlex b b\n";

/// One self-contained parsing problem.
#[derive(Clone, Debug)]
pub struct Instance {
    pub label: String,
    pub grammar: Grammar,
    pub lattice: Lattice,
    pub bigram: BigramModel,
}

impl Instance {
    /// Grammar, lattice and bigram files concatenated, for reports.
    pub fn describe(&self) -> String {
        format!(
            "# {}\n## grammar\n{}## lattice\n{}## bigram\n{}",
            self.label, self.grammar, self.lattice, self.bigram
        )
    }
}

/// A random grammar of `rules` rules whose nonterminals are layered, so no
/// nonterminal can derive itself. Some rules have an empty right side.
pub fn random_cfg_text<R: Rng>(rng: &mut R, rules: usize) -> String {
    let nonterminals = 6.min(rules);
    let terminals = ["t0", "t1", "t2", "t3"];
    let mut heads: Vec<usize> = (0..nonterminals).collect();
    while heads.len() < rules {
        heads.push(rng.gen_range(0..nonterminals));
    }
    heads.sort();
    let mut text = String::new();
    for &h in &heads {
        let len = if rng.gen_bool(0.08) { 0 } else { rng.gen_range(1..=3) };
        let _ = write!(text, "N{h} ->");
        for i in 0..len {
            // the last nonterminal and the final slot of each rule stay close
            // to terminals so that most nonterminals are productive
            if h + 1 < nonterminals && (i + 1 < len || rng.gen_bool(0.5)) && rng.gen_bool(0.6) {
                let _ = write!(text, " N{}", rng.gen_range(h + 1..nonterminals));
            } else {
                let _ = write!(text, " {}", terminals.choose(rng).unwrap());
            }
        }
        text.push('\n');
    }
    for (i, w) in ["w0", "w1", "w2", "w3", "w4", "w5"].iter().enumerate() {
        let _ = writeln!(text, "lex {} {w}", terminals[i % terminals.len()]);
        if rng.gen_bool(0.3) {
            let _ = writeln!(text, "lex {} {w}", terminals.choose(rng).unwrap());
        }
    }
    text.push_str("start N0\n");
    text
}

/// A lattice over `words` with at most `max_hyps` hypotheses and at most
/// `max_frames` frames. A random chain from 0 to the end is laid down first,
/// then random extra hypotheses.
pub fn random_lattice<R: Rng>(rng: &mut R, words: &[String], max_hyps: usize, max_frames: u32) -> Lattice {
    let final_time = rng.gen_range(1..=max_frames);
    let mut entries: Vec<(u32, u32, String, f64)> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut add = |entries: &mut Vec<_>, rng: &mut R, s: u32, e: u32| {
        let w = words.choose(rng).unwrap().clone();
        if seen.insert((s, e, w.clone())) {
            let logp = -(rng.gen_range(1.0..8.0) * (e - s) as f64);
            entries.push((s, e, w, logp));
        }
    };
    let mut t = 0;
    while t < final_time && entries.len() < max_hyps {
        let e = rng.gen_range(t + 1..=final_time);
        add(&mut entries, rng, t, e);
        t = e;
    }
    let extra = rng.gen_range(0..=max_hyps.saturating_sub(entries.len()));
    for _ in 0..extra {
        let s = rng.gen_range(0..final_time);
        let e = rng.gen_range(s + 1..=final_time);
        add(&mut entries, rng, s, e);
    }
    Lattice::new(entries).expect("generated lattice is well formed")
}

/// Random bigram model over `words`; some pairs are left out and fall to
/// the floor.
pub fn random_bigram<R: Rng>(rng: &mut R, words: &[String]) -> BigramModel {
    let mut m = BigramModel::new(DEFAULT_FLOOR_LOGP);
    let prevs = std::iter::once(BEGIN_MARKER.to_string()).chain(words.iter().cloned());
    for p in prevs {
        for n in words {
            if rng.gen_bool(0.75) {
                m.insert(&p, n, -rng.gen_range(0.05..5.0));
            }
        }
    }
    m
}

/// Words of a grammar's lexicon plus, sometimes, one unknown word.
fn vocabulary<R: Rng>(rng: &mut R, g: &Grammar) -> Vec<String> {
    let mut words: Vec<String> = g.lexicon().keys().cloned().collect();
    if rng.gen_bool(0.1) {
        words.push("oov".to_string());
    }
    words
}

/// A random instance drawn from G1, G2, G3 and a random 20-rule grammar.
pub fn random_instance<R: Rng>(rng: &mut R, max_hyps: usize, max_frames: u32) -> Instance {
    let (label, text) = match rng.gen_range(0..4) {
        0 => ("G1", G1.to_string()),
        1 => ("G2", G2.to_string()),
        2 => ("G3", G3.to_string()),
        _ => ("random CFG", random_cfg_text(rng, 20)),
    };
    let grammar = parse_grammar(&text).expect("generated grammar parses");
    let words = vocabulary(rng, &grammar);
    let lattice = random_lattice(rng, &words, max_hyps, max_frames);
    let bigram = random_bigram(rng, &words);
    Instance {
        label: label.to_string(),
        grammar,
        lattice,
        bigram,
    }
}

/// `n` abutting one-frame hypotheses of the same word.
pub fn chain_lattice(word: &str, n: u32) -> Lattice {
    Lattice::new((0..n).map(|i| (i, i + 1, word, -1.0))).expect("chain lattice is well formed")
}
