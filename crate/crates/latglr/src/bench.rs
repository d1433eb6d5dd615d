//! Synthetic workload at the scale of a small speech-understanding task: a
//! grammar of a few hundred rules, lattices of 56 to 202 hypotheses built
//! around a sentence the grammar generates, and a bigram model trained on a
//! sample of such sentences.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use latglr_core::lattice::{BigramModel, Lattice, BEGIN_MARKER, DEFAULT_FLOOR_LOGP};
use latglr_core::{build_slr_table, parse_grammar, Grammar};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::pipeline::{run_parse_with_table, ParseOptions};

const CATEGORIES: usize = 12;
const WORDS_PER_CATEGORY: usize = 10;
const LAYERS: usize = 4;
const PER_LAYER: usize = 10;
const RULES_PER_NONTERMINAL: usize = 5;
const START_RULES: usize = 12;

/// Layered random grammar: `S` expands into layer-0 nonterminals, each layer
/// into the next layer or word categories, the last layer into categories
/// only. 212 rules.
pub fn synthetic_grammar_text<R: Rng>(rng: &mut R) -> String {
    let mut text = String::new();
    for _ in 0..START_RULES {
        let a = rng.gen_range(0..PER_LAYER);
        let b = rng.gen_range(0..PER_LAYER);
        let _ = writeln!(text, "S -> X0_{a} X0_{b}");
    }
    for layer in 0..LAYERS {
        for i in 0..PER_LAYER {
            for _ in 0..RULES_PER_NONTERMINAL {
                let len = if rng.gen_bool(0.55) { 1 } else { 2 };
                let _ = write!(text, "X{layer}_{i} ->");
                for _ in 0..len {
                    if layer + 1 < LAYERS && rng.gen_bool(0.7) {
                        let _ = write!(text, " X{}_{}", layer + 1, rng.gen_range(0..PER_LAYER));
                    } else {
                        let _ = write!(text, " c{}", rng.gen_range(0..CATEGORIES));
                    }
                }
                text.push('\n');
            }
        }
    }
    for c in 0..CATEGORIES {
        for w in 0..WORDS_PER_CATEGORY {
            let _ = writeln!(text, "lex c{c} w{c}_{w}");
        }
    }
    text.push_str("start S\n");
    text
}

/// A random sentence derived from the start symbol.
pub fn sample_sentence<R: Rng>(rng: &mut R, g: &Grammar) -> Vec<String> {
    let mut words_of: BTreeMap<_, Vec<&String>> = BTreeMap::new();
    for (w, cats) in g.lexicon() {
        for c in cats {
            words_of.entry(*c).or_default().push(w);
        }
    }
    let mut out = Vec::new();
    let mut stack = vec![g.start()];
    while let Some(sym) = stack.pop() {
        if g.is_terminal(sym) {
            out.push(words_of[&sym].choose(rng).unwrap().to_string());
            continue;
        }
        let rule = g.rule(*g.rules_for(sym).choose(rng).unwrap());
        stack.extend(rule.rhs.iter().rev());
    }
    out
}

fn sentence_in_range<R: Rng>(rng: &mut R, g: &Grammar, min: usize, max: usize) -> Vec<String> {
    loop {
        let s = sample_sentence(rng, g);
        if (min..=max).contains(&s.len()) {
            return s;
        }
    }
}

/// Relative-frequency bigrams over `corpus`, pairs never seen left out.
pub fn train_bigram(corpus: &[Vec<String>]) -> BigramModel {
    let mut pair: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    let mut prev_count: BTreeMap<&str, f64> = BTreeMap::new();
    for s in corpus {
        let mut prev = BEGIN_MARKER;
        for w in s {
            *pair.entry((prev, w)).or_default() += 1.0;
            *prev_count.entry(prev).or_default() += 1.0;
            prev = w;
        }
    }
    let mut m = BigramModel::new(DEFAULT_FLOOR_LOGP);
    for ((p, n), c) in pair {
        m.insert(p, n, (c / prev_count[p]).ln());
    }
    m
}

/// A lattice of exactly `size` hypotheses containing `sentence` as a path
/// (unless `size` is smaller than the sentence), padded with competing
/// words around its word boundaries.
pub fn lattice_around<R: Rng>(rng: &mut R, sentence: &[String], vocabulary: &[String], size: usize) -> Lattice {
    let mut spans = Vec::new();
    let mut t = 0u32;
    for _ in sentence {
        let len = rng.gen_range(3..=7);
        spans.push((t, t + len));
        t += len;
    }
    let final_time = t;
    let mut entries: BTreeMap<(u32, u32, String), f64> = BTreeMap::new();
    for (w, &(s, e)) in sentence.iter().zip(&spans) {
        entries.insert((s, e, w.clone()), -((e - s) as f64) * rng.gen_range(1.0..3.0));
    }
    while entries.len() < size {
        let &(s, e) = spans.choose(rng).unwrap();
        let s = if s > 0 && rng.gen_bool(0.3) { s - 1 } else { s };
        let e = if e < final_time && rng.gen_bool(0.3) { e + 1 } else { e };
        let w = vocabulary.choose(rng).unwrap().clone();
        let logp = -((e - s) as f64) * rng.gen_range(1.2..4.0);
        entries.entry((s, e, w)).or_insert(logp);
    }
    Lattice::new(entries.into_iter().map(|((s, e, w), p)| (s, e, w, p))).expect("synthetic lattice is well formed")
}

#[derive(Clone, Debug)]
pub struct BenchCase {
    pub hypotheses: usize,
    pub words: usize,
    pub accepted: bool,
    pub elapsed: Duration,
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub rules: usize,
    pub states: usize,
    pub cases: Vec<BenchCase>,
}

impl BenchReport {
    pub fn acceptance_rate(&self) -> f64 {
        self.cases.iter().filter(|c| c.accepted).count() as f64 / self.cases.len().max(1) as f64
    }

    pub fn slowest(&self) -> Duration {
        self.cases.iter().map(|c| c.elapsed).max().unwrap_or_default()
    }
}

/// Parse `lattices` synthetic lattices with a two-stage beam of `beam`
/// and recovery capped at `max_recovered` Shifts.
pub fn run_benchmark<R: Rng>(rng: &mut R, lattices: usize, beam: f64, max_recovered: u64) -> BenchReport {
    let text = synthetic_grammar_text(rng);
    let g = parse_grammar(&text).expect("synthetic grammar parses");
    let table = build_slr_table(&g);
    let corpus: Vec<Vec<String>> = (0..2000).map(|_| sentence_in_range(rng, &g, 3, 14)).collect();
    let bigram = train_bigram(&corpus);
    let vocabulary: Vec<String> = g.lexicon().keys().cloned().collect();
    let opts = ParseOptions {
        beam: Some(beam),
        max_recovered: Some(max_recovered),
        ..ParseOptions::default()
    };
    let mut cases = Vec::with_capacity(lattices);
    for sentence in corpus.iter().take(lattices) {
        let size = rng.gen_range(56..=202).max(sentence.len());
        let lattice = lattice_around(rng, sentence, &vocabulary, size);
        let started = Instant::now();
        let out = run_parse_with_table(&g, &table, &lattice, &bigram, &opts);
        cases.push(BenchCase {
            hypotheses: lattice.len(),
            words: sentence.len(),
            accepted: out.result.accepted,
            elapsed: started.elapsed(),
        });
    }
    BenchReport {
        rules: g.rules().len(),
        states: table.state_count(),
        cases,
    }
}
