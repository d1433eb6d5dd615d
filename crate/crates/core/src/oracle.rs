//! Brute-force reference answers for small instances.
//!
//! Everything here works directly from the grammar and the lattice: paths are
//! enumerated one by one, membership is decided by a plain chart fixpoint,
//! trees are enumerated top-down, and scores are computed from raw sums over
//! whole paths. Nothing is shared with the parser or with the link scores, so
//! agreement between the two is meaningful.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::grammar::{Grammar, SymbolId};
use crate::lattice::{BigramModel, HypId, Lattice, BEGIN_MARKER};

pub const MAX_PATHS: usize = 10_000;
pub const MAX_SENTENCE: usize = 12;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("more than {limit} lattice paths")]
    TooManyPaths { limit: usize },
    #[error("sentence of {len} words is longer than {limit}")]
    SentenceTooLong { len: usize, limit: usize },
    #[error("more than {limit} parse trees")]
    TooManyTrees { limit: usize },
}

/// Every hypothesis sequence from time 0 to the final time whose
/// hypotheses abut.
pub fn enumerate_paths(lattice: &Lattice) -> Result<Vec<Vec<HypId>>, OracleError> {
    let mut paths = Vec::new();
    if lattice.is_empty() {
        return Ok(paths);
    }
    let mut starting: BTreeMap<u32, Vec<HypId>> = BTreeMap::new();
    for h in lattice.ids() {
        starting.entry(lattice.hypothesis(h).start()).or_default().push(h);
    }
    let mut current = Vec::new();
    walk(lattice, &starting, 0, &mut current, &mut paths)?;
    Ok(paths)
}

fn walk(
    lattice: &Lattice,
    starting: &BTreeMap<u32, Vec<HypId>>,
    time: u32,
    current: &mut Vec<HypId>,
    out: &mut Vec<Vec<HypId>>,
) -> Result<(), OracleError> {
    if time == lattice.final_time() {
        if out.len() >= MAX_PATHS {
            return Err(OracleError::TooManyPaths { limit: MAX_PATHS });
        }
        out.push(current.clone());
        return Ok(());
    }
    for &h in starting.get(&time).map(Vec::as_slice).unwrap_or(&[]) {
        current.push(h);
        walk(lattice, starting, lattice.hypothesis(h).end(), current, out)?;
        current.pop();
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ParseTree {
    Leaf { category: String, word: String },
    Node { label: String, children: Vec<ParseTree> },
}

impl ParseTree {
    pub fn size(&self) -> usize {
        match self {
            ParseTree::Leaf { .. } => 1,
            ParseTree::Node { children, .. } => 1 + children.iter().map(ParseTree::size).sum::<usize>(),
        }
    }
}

impl fmt::Display for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseTree::Leaf { category, word } => write!(f, "({category} {word})"),
            ParseTree::Node { label, children } => {
                write!(f, "({label}")?;
                for c in children {
                    write!(f, " {c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// `can[x][i][j]`: symbol `x` derives positions `i..j` of a sentence whose
/// position `k` may be any category in `cats[k]`.
fn chart(g: &Grammar, cats: &[BTreeSet<SymbolId>]) -> Vec<Vec<Vec<bool>>> {
    let n = cats.len();
    let mut can = alloc::vec![alloc::vec![alloc::vec![false; n + 1]; n + 1]; g.symbols().len()];
    for (i, set) in cats.iter().enumerate() {
        for c in set {
            can[c.index()][i][i + 1] = true;
        }
    }
    let mut changed = true;
    while changed {
        changed = false;
        for r in g.rules() {
            for i in 0..=n {
                let mut ends: BTreeSet<usize> = BTreeSet::from([i]);
                for sym in &r.rhs {
                    let mut next = BTreeSet::new();
                    for &e in &ends {
                        for (j, &ok) in can[sym.index()][e].iter().enumerate().skip(e) {
                            if ok {
                                next.insert(j);
                            }
                        }
                    }
                    ends = next;
                }
                for e in ends {
                    if !can[r.head.index()][i][e] {
                        can[r.head.index()][i][e] = true;
                        changed = true;
                    }
                }
            }
        }
    }
    can
}

/// Whether the start symbol derives some choice of categories for `words`.
pub fn is_grammatical(g: &Grammar, words: &[&str]) -> bool {
    let cats: Vec<BTreeSet<SymbolId>> = words.iter().map(|w| g.categories_of_key(w).collect()).collect();
    chart(g, &cats)[g.start().index()][0][words.len()]
}

struct Enumerator<'g> {
    g: &'g Grammar,
    words: Vec<String>,
    cats: Vec<BTreeSet<SymbolId>>,
    can: Vec<Vec<Vec<bool>>>,
    memo: BTreeMap<(SymbolId, usize, usize), Vec<ParseTree>>,
    active: BTreeSet<(SymbolId, usize, usize)>,
    limit: usize,
}

impl Enumerator<'_> {
    fn trees(&mut self, x: SymbolId, i: usize, j: usize) -> Result<Vec<ParseTree>, OracleError> {
        if !self.can[x.index()][i][j] {
            return Ok(Vec::new());
        }
        if let Some(t) = self.memo.get(&(x, i, j)) {
            return Ok(t.clone());
        }
        // a derivation that comes back to the same span is cut off
        if !self.active.insert((x, i, j)) {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        if j == i + 1 && self.cats[i].contains(&x) {
            out.push(ParseTree::Leaf {
                category: self.g.name(x).into(),
                word: self.words[i].clone(),
            });
        }
        for &rid in self.g.rules_for(x) {
            let rhs = self.g.rule(rid).rhs.clone();
            for children in self.sequences(&rhs, i, j)? {
                out.push(ParseTree::Node {
                    label: self.g.name(x).into(),
                    children,
                });
                if out.len() > self.limit {
                    return Err(OracleError::TooManyTrees { limit: self.limit });
                }
            }
        }
        self.active.remove(&(x, i, j));
        self.memo.insert((x, i, j), out.clone());
        Ok(out)
    }

    fn sequences(&mut self, rhs: &[SymbolId], i: usize, j: usize) -> Result<Vec<Vec<ParseTree>>, OracleError> {
        let Some((&first, rest)) = rhs.split_first() else {
            return Ok(if i == j { alloc::vec![Vec::new()] } else { Vec::new() });
        };
        let mut out = Vec::new();
        for mid in i..=j {
            if !self.can[first.index()][i][mid] {
                continue;
            }
            let tails = self.sequences(rest, mid, j)?;
            if tails.is_empty() {
                continue;
            }
            for head in self.trees(first, i, mid)? {
                for tail in &tails {
                    let mut seq = Vec::with_capacity(rhs.len());
                    seq.push(head.clone());
                    seq.extend(tail.iter().cloned());
                    out.push(seq);
                    if out.len() > self.limit {
                        return Err(OracleError::TooManyTrees { limit: self.limit });
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Every parse tree of `words` under `g`, sorted. A word may take any of
/// its lexical categories.
pub fn recognize(g: &Grammar, words: &[&str], limit: usize) -> Result<Vec<ParseTree>, OracleError> {
    if words.len() > MAX_SENTENCE {
        return Err(OracleError::SentenceTooLong {
            len: words.len(),
            limit: MAX_SENTENCE,
        });
    }
    let cats: Vec<BTreeSet<SymbolId>> = words.iter().map(|w| g.categories_of_key(w).collect()).collect();
    let can = chart(g, &cats);
    let mut e = Enumerator {
        g,
        words: words.iter().map(|w| String::from(*w)).collect(),
        cats,
        can,
        memo: BTreeMap::new(),
        active: BTreeSet::new(),
        limit,
    };
    let mut trees = e.trees(g.start(), 0, words.len())?;
    trees.sort();
    trees.dedup();
    Ok(trees)
}

/// Grammatical paths of the lattice.
pub fn grammatical_paths(g: &Grammar, lattice: &Lattice) -> Result<Vec<Vec<HypId>>, OracleError> {
    let mut out = Vec::new();
    for p in enumerate_paths(lattice)? {
        let words: Vec<&str> = p.iter().map(|h| lattice.word_of(*h)).collect();
        if is_grammatical(g, &words) {
            out.push(p);
        }
    }
    Ok(out)
}

/// Whole-path score: `lambda * (bigram sum / words) + acoustic sum / frames`,
/// the first bigram conditioned on the begin marker. `None` if a bigram is
/// unknown to a strict model.
pub fn path_score(lattice: &Lattice, bigram: &BigramModel, strict: bool, lambda: f64, path: &[HypId]) -> Option<f64> {
    if path.is_empty() {
        return None;
    }
    let mut acoustic = 0.0;
    let mut frames = 0u32;
    let mut ngram = 0.0;
    let mut prev = BEGIN_MARKER;
    for &h in path {
        let hyp = lattice.hypothesis(h);
        let word = lattice.word_of(h);
        acoustic += hyp.acoustic_logp();
        frames += hyp.end() - hyp.start();
        ngram += bigram.lookup(prev, word, strict)?;
        prev = word;
    }
    Some(lambda * (ngram / path.len() as f64) + acoustic / frames as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleBest {
    pub path: Vec<HypId>,
    pub tree: ParseTree,
    pub score: f64,
}

/// The best-scoring grammatical path with its preferred tree. Scores within
/// `1e-12` count as tied; ties go to the smaller tree, then to the smaller
/// bracketing.
pub fn best_path(
    g: &Grammar,
    lattice: &Lattice,
    bigram: &BigramModel,
    strict: bool,
    lambda: f64,
    tree_limit: usize,
) -> Result<Option<OracleBest>, OracleError> {
    let mut scored: Vec<(f64, Vec<HypId>)> = Vec::new();
    for p in grammatical_paths(g, lattice)? {
        if let Some(s) = path_score(lattice, bigram, strict, lambda, &p) {
            scored.push((s, p));
        }
    }
    let Some(top) = scored.iter().map(|(s, _)| *s).reduce(f64::max) else {
        return Ok(None);
    };
    let mut best: Option<(usize, String, OracleBest)> = None;
    for (score, path) in scored {
        if score < top - 1e-12 {
            continue;
        }
        let words: Vec<&str> = path.iter().map(|h| lattice.word_of(*h)).collect();
        for tree in recognize(g, &words, tree_limit)? {
            let size = tree.size();
            let text = alloc::format!("{tree}");
            let better = match &best {
                None => true,
                Some((bs, bt, _)) => (size, &text) < (*bs, bt),
            };
            if better {
                best = Some((
                    size,
                    text,
                    OracleBest {
                        path: path.clone(),
                        tree,
                        score,
                    },
                ));
            }
        }
    }
    Ok(best.map(|(_, _, b)| b))
}
