//! Two-stage beam search over Shift actions.
//!
//! Search and NewHypo actions run first, newest first. Shift actions wait in
//! frames keyed by the time of the vertex they would create and are scored by
//! the outside evaluation of the link they would build. The earliest frame is
//! released once nothing else is pending: Shifts within `beam_width` of the
//! best score seen in that frame run best first, the rest are set aside.
//!
//! If the first stage ends without a parse, the set-aside Shifts are replayed
//! best first. Everything they trigger passes through the same beam, so a
//! recovered Shift does not unleash an exhaustive search behind it.

use alloc::collections::{BTreeMap, BinaryHeap};
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::engine::{Action, ParseResult, Parser, ShiftAction, Stats, Strategy};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamConfig {
    /// Width in log-score units; `f64::INFINITY` keeps everything.
    pub beam_width: f64,
    /// Cap on Shifts replayed in the second stage; `None` is unlimited.
    pub max_recovered: Option<u64>,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            beam_width: f64::INFINITY,
            max_recovered: None,
        }
    }
}

#[derive(Clone, Debug)]
struct Scored {
    score: f64,
    /// Arrival order, for deterministic ties.
    seq: u64,
    shift: ShiftAction,
}

impl PartialEq for Scored {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Scored {}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scored {
    /// Better score first, then earlier arrival.
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

#[derive(Clone, Debug)]
pub struct BeamStrategy {
    config: BeamConfig,
    stack: Vec<Action>,
    frames: BTreeMap<u32, Vec<Scored>>,
    frame_best: BTreeMap<u32, f64>,
    /// Admitted Shifts of the released frame, worst first.
    admitted: Vec<Scored>,
    pruned: BinaryHeap<Scored>,
    arrivals: u64,
    pruned_count: u64,
    recovered: u64,
}

impl BeamStrategy {
    pub fn new(config: BeamConfig) -> Self {
        BeamStrategy {
            config,
            stack: Vec::new(),
            frames: BTreeMap::new(),
            frame_best: BTreeMap::new(),
            admitted: Vec::new(),
            pruned: BinaryHeap::new(),
            arrivals: 0,
            pruned_count: 0,
            recovered: 0,
        }
    }

    pub fn pruned(&self) -> u64 {
        self.pruned_count
    }

    pub fn recovered(&self) -> u64 {
        self.recovered
    }

    /// Whether the second stage has started.
    pub fn in_recovery(&self) -> bool {
        self.recovered > 0
    }

    fn release_frame(&mut self) -> bool {
        let Some((time, mut candidates)) = self.frames.pop_first() else {
            return false;
        };
        let seen = candidates
            .iter()
            .map(|c| c.score)
            .fold(f64::NEG_INFINITY, f64::max);
        let best = self.frame_best.entry(time).or_insert(f64::NEG_INFINITY);
        *best = best.max(seen);
        let threshold = *best - self.config.beam_width;
        candidates.sort();
        for c in candidates {
            // ties at the boundary stay in
            if c.score >= threshold {
                self.admitted.push(c);
            } else {
                self.pruned_count += 1;
                self.pruned.push(c);
            }
        }
        true
    }
}

impl Strategy for BeamStrategy {
    fn push(&mut self, action: Action, parser: &mut Parser<'_>) {
        match action {
            Action::Shift(shift) => {
                let score = parser.shift_score(shift.vertex, shift.node);
                self.arrivals += 1;
                self.frames.entry(shift.time).or_default().push(Scored {
                    score,
                    seq: self.arrivals,
                    shift,
                });
            }
            other => self.stack.push(other),
        }
    }

    fn pop(&mut self, parser: &mut Parser<'_>) -> Option<Action> {
        loop {
            if let Some(a) = self.stack.pop() {
                return Some(a);
            }
            if let Some(c) = self.admitted.pop() {
                return Some(Action::Shift(c.shift));
            }
            if self.release_frame() {
                continue;
            }
            if parser.accepted() {
                return None;
            }
            if self.config.max_recovered.is_some_and(|cap| self.recovered >= cap) {
                return None;
            }
            let c = self.pruned.pop()?;
            self.recovered += 1;
            return Some(Action::Shift(c.shift));
        }
    }

    fn report(&self, stats: &mut Stats) {
        stats.pruned = self.pruned_count;
        stats.recovered = self.recovered;
    }
}

/// Beam search followed, if no parse was found, by best-first recovery of
/// the pruned Shifts. The parser must have scoring enabled for the beam to
/// discriminate.
pub fn run_two_stage(parser: &mut Parser<'_>, config: BeamConfig) -> ParseResult {
    let mut strategy = BeamStrategy::new(config);
    parser.run(&mut strategy)
}
