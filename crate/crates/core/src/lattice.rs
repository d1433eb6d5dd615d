//! Word lattices and bigram language models.
//!
//! Lattice lines are `start end word acoustic_logp`, bigram lines are
//! `prev next logp` with `<s>` as the begin marker. All log-probabilities are
//! natural logarithms and must be `<= 0`.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

/// Reserved predecessor word for the first bigram of a path.
pub const BEGIN_MARKER: &str = "<s>";

pub const DEFAULT_FLOOR_LOGP: f64 = -20.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LatticeError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: start {start} must be before end {end}")]
    EmptySpan { line: usize, start: u32, end: u32 },
    #[error("line {line}: log-probability {value} is positive")]
    PositiveLogProb { line: usize, value: f64 },
    #[error("no hypothesis starts at frame 0")]
    NoInitialHypothesis,
    #[error("`{BEGIN_MARKER}` cannot be a lattice word")]
    BeginMarkerWord,
    #[error("unknown bigram ({prev}, {next})")]
    UnknownBigram { prev: String, next: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WordId(pub u32);

impl WordId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HypId(pub u32);

impl HypId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WordHypothesis {
    start: u32,
    end: u32,
    key: WordId,
    acoustic_logp: f64,
}

impl WordHypothesis {
    pub fn start(&self) -> u32 {
        self.start
    }
    pub fn end(&self) -> u32 {
        self.end
    }
    pub fn key(&self) -> WordId {
        self.key
    }
    pub fn acoustic_logp(&self) -> f64 {
        self.acoustic_logp
    }
    /// Time units the word spans.
    pub fn frames(&self) -> u32 {
        self.end - self.start
    }
}

/// Validated, canonically ordered set of word hypotheses.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Lattice {
    hypotheses: Vec<WordHypothesis>,
    words: Vec<String>,
    final_time: u32,
}

impl Lattice {
    /// Validate and canonicalize `(start, end, word, acoustic_logp)` entries.
    /// Duplicate `(start, end, word)` entries keep the best acoustic score.
    pub fn new<S: AsRef<str>>(
        entries: impl IntoIterator<Item = (u32, u32, S, f64)>,
    ) -> Result<Self, LatticeError> {
        let mut merged: BTreeMap<(u32, u32, String), f64> = BTreeMap::new();
        for (i, (start, end, word, logp)) in entries.into_iter().enumerate() {
            check_entry(i + 1, start, end, word.as_ref(), logp)?;
            let slot = merged
                .entry((start, end, word.as_ref().to_string()))
                .or_insert(f64::NEG_INFINITY);
            if logp > *slot {
                *slot = logp;
            }
        }
        Self::from_merged(merged)
    }

    fn from_merged(merged: BTreeMap<(u32, u32, String), f64>) -> Result<Self, LatticeError> {
        if !merged.is_empty() && !merged.keys().any(|(s, _, _)| *s == 0) {
            return Err(LatticeError::NoInitialHypothesis);
        }
        let mut words: Vec<String> = merged.keys().map(|(_, _, w)| w.clone()).collect();
        words.sort();
        words.dedup();
        let mut final_time = 0;
        let hypotheses = merged
            .into_iter()
            .map(|((start, end, word), acoustic_logp)| {
                final_time = final_time.max(end);
                WordHypothesis {
                    start,
                    end,
                    key: WordId(words.binary_search(&word).unwrap() as u32),
                    acoustic_logp,
                }
            })
            .collect();
        Ok(Lattice {
            hypotheses,
            words,
            final_time,
        })
    }

    pub fn hypotheses(&self) -> &[WordHypothesis] {
        &self.hypotheses
    }

    pub fn hypothesis(&self, id: HypId) -> &WordHypothesis {
        &self.hypotheses[id.index()]
    }

    pub fn ids(&self) -> impl Iterator<Item = HypId> {
        (0..self.hypotheses.len() as u32).map(HypId)
    }

    pub fn len(&self) -> usize {
        self.hypotheses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypotheses.is_empty()
    }

    pub fn final_time(&self) -> u32 {
        self.final_time
    }

    /// Distinct words, sorted; indexed by [`WordId`].
    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn word(&self, id: WordId) -> &str {
        &self.words[id.index()]
    }

    pub fn word_of(&self, h: HypId) -> &str {
        self.word(self.hypotheses[h.index()].key)
    }

    /// Copy of this lattice without the hypotheses rejected by `keep`.
    pub fn filtered(&self, mut keep: impl FnMut(HypId) -> bool) -> Result<Lattice, LatticeError> {
        let entries: Vec<_> = self
            .ids()
            .filter(|h| keep(*h))
            .map(|h| {
                let hyp = self.hypothesis(h);
                (hyp.start, hyp.end, self.word(hyp.key), hyp.acoustic_logp)
            })
            .collect();
        Lattice::new(entries)
    }
}

fn check_entry(line: usize, start: u32, end: u32, word: &str, logp: f64) -> Result<(), LatticeError> {
    if start >= end {
        return Err(LatticeError::EmptySpan { line, start, end });
    }
    if logp.is_nan() || logp > 0.0 {
        return Err(LatticeError::PositiveLogProb { line, value: logp });
    }
    if word == BEGIN_MARKER {
        return Err(LatticeError::BeginMarkerWord);
    }
    Ok(())
}

fn strip_comment(raw: &str) -> &str {
    match raw.find('#') {
        Some(p) => &raw[..p],
        None => raw,
    }
}

fn parse_logp(line: usize, tok: &str) -> Result<f64, LatticeError> {
    let v: f64 = tok.parse().map_err(|_| LatticeError::Malformed {
        line,
        message: alloc::format!("bad log-probability `{tok}`"),
    })?;
    if v.is_nan() || v > 0.0 {
        return Err(LatticeError::PositiveLogProb { line, value: v });
    }
    Ok(v)
}

pub fn parse_lattice(text: &str) -> Result<Lattice, LatticeError> {
    let mut merged: BTreeMap<(u32, u32, String), f64> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let toks: Vec<&str> = strip_comment(raw).split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 4 {
            return Err(LatticeError::Malformed {
                line,
                message: "expected `start end word acoustic_logp`".to_string(),
            });
        }
        let frame = |tok: &str| -> Result<u32, LatticeError> {
            tok.parse().map_err(|_| LatticeError::Malformed {
                line,
                message: alloc::format!("bad frame index `{tok}`"),
            })
        };
        let (start, end) = (frame(toks[0])?, frame(toks[1])?);
        let logp = parse_logp(line, toks[3])?;
        check_entry(line, start, end, toks[2], logp)?;
        let slot = merged
            .entry((start, end, toks[2].to_string()))
            .or_insert(f64::NEG_INFINITY);
        if logp > *slot {
            *slot = logp;
        }
    }
    Lattice::from_merged(merged)
}

impl fmt::Display for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for h in &self.hypotheses {
            writeln!(f, "{} {} {} {:?}", h.start, h.end, self.word(h.key), h.acoustic_logp)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BigramModel {
    probs: BTreeMap<(String, String), f64>,
    floor_logp: f64,
    strict: bool,
}

impl Default for BigramModel {
    fn default() -> Self {
        BigramModel {
            probs: BTreeMap::new(),
            floor_logp: DEFAULT_FLOOR_LOGP,
            strict: false,
        }
    }
}

impl BigramModel {
    pub fn new(floor_logp: f64) -> Self {
        BigramModel {
            floor_logp,
            ..Default::default()
        }
    }

    pub fn with_strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn with_floor(mut self, floor_logp: f64) -> Self {
        self.floor_logp = floor_logp;
        self
    }

    pub fn insert(&mut self, prev: &str, next: &str, logp: f64) {
        self.probs.insert((prev.to_string(), next.to_string()), logp);
    }

    pub fn floor_logp(&self) -> f64 {
        self.floor_logp
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.probs.iter().map(|((a, b), p)| (a.as_str(), b.as_str(), *p))
    }

    /// The stored value only.
    pub fn get(&self, prev: &str, next: &str) -> Option<f64> {
        self.probs.get(&(prev.to_string(), next.to_string())).copied()
    }

    /// Stored value or the floor; `None` only when `strict` and the pair is absent.
    pub fn lookup(&self, prev: &str, next: &str, strict: bool) -> Option<f64> {
        match self.get(prev, next) {
            Some(p) => Some(p),
            None if strict => None,
            None => Some(self.floor_logp),
        }
    }

    /// Stored value, otherwise the floor; strict models report the pair instead.
    pub fn logprob(&self, prev: &str, next: &str) -> Result<f64, LatticeError> {
        self.lookup(prev, next, self.strict)
            .ok_or_else(|| LatticeError::UnknownBigram {
                prev: prev.to_string(),
                next: next.to_string(),
            })
    }
}

/// Parse a bigram file. The floor for absent pairs comes from `floor_logp`.
pub fn parse_bigram(text: &str, floor_logp: f64) -> Result<BigramModel, LatticeError> {
    let mut model = BigramModel::new(floor_logp);
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let toks: Vec<&str> = strip_comment(raw).split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 3 {
            return Err(LatticeError::Malformed {
                line,
                message: "expected `prev next logprob`".to_string(),
            });
        }
        if toks[1] == BEGIN_MARKER {
            return Err(LatticeError::Malformed {
                line,
                message: alloc::format!("`{BEGIN_MARKER}` cannot follow another word"),
            });
        }
        let logp = parse_logp(line, toks[2])?;
        model.insert(toks[0], toks[1], logp);
    }
    Ok(model)
}

impl fmt::Display for BigramModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (a, b, p) in self.entries() {
            writeln!(f, "{a} {b} {p:?}")?;
        }
        Ok(())
    }
}

/// Bigram scores resolved for one lattice's vocabulary.
///
/// Row 0 is the begin marker, row `w + 1` is lattice word `w`. `None` marks a
/// pair a strict model does not know; such junctions are not scorable.
#[derive(Clone, Debug)]
pub struct WordBigrams {
    n: usize,
    cells: Vec<Option<f64>>,
}

impl WordBigrams {
    /// `strict` (or a strict model) leaves absent pairs unscorable instead of floored.
    pub fn new(model: &BigramModel, lattice: &Lattice, strict: bool) -> Self {
        let strict = strict || model.is_strict();
        let n = lattice.words().len();
        let mut cells = Vec::with_capacity((n + 1) * n);
        for prev in 0..=n {
            let prev_word = if prev == 0 { BEGIN_MARKER } else { &lattice.words()[prev - 1] };
            for next in 0..n {
                cells.push(model.lookup(prev_word, &lattice.words()[next], strict));
            }
        }
        WordBigrams { n, cells }
    }

    /// `prev = None` is the begin marker.
    #[inline]
    pub fn get(&self, prev: Option<WordId>, next: WordId) -> Option<f64> {
        let row = prev.map_or(0, |w| w.index() + 1);
        self.cells[row * self.n + next.index()]
    }
}
