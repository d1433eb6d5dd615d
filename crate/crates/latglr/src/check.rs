//! Agreement checks between the parser and the brute-force oracle.

use std::collections::BTreeSet;

use latglr_core::oracle::{best_path, grammatical_paths};
use latglr_core::HypId;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::instance::{random_instance, Instance};
use crate::pipeline::{run_parse, ParseOptions};

pub const SCORE_TOLERANCE: f64 = 1e-9;
const YIELD_LIMIT: usize = 100_000;
const TREE_LIMIT: usize = 100_000;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CheckOptions {
    pub lambda: f64,
    pub strict_bigram: bool,
    /// Perturb the parser's best score; lets tests confirm that a broken
    /// scorer is caught.
    pub corrupt_scoring: bool,
}

#[derive(Clone, Debug)]
pub struct Disagreement {
    pub instance: Instance,
    pub reason: String,
}

/// Compare the exhaustive parse of one instance with the oracle: accepted
/// paths, and best score within [`SCORE_TOLERANCE`].
pub fn check_instance(inst: &Instance, opts: &CheckOptions) -> Result<(), String> {
    let parse_opts = ParseOptions {
        lambda: opts.lambda,
        strict_bigram: opts.strict_bigram,
        ..ParseOptions::default()
    };
    let out = run_parse(&inst.grammar, &inst.lattice, &inst.bigram, &parse_opts);
    out.gss.validate(&inst.grammar, &inst.lattice)?;

    let engine_paths: BTreeSet<Vec<HypId>> = match out.result.root_nodes.first() {
        Some(&root) => out
            .gss
            .yields(root, YIELD_LIMIT)
            .ok_or_else(|| "forest yields too many paths to compare".to_string())?,
        None => BTreeSet::new(),
    };
    let oracle_paths: BTreeSet<Vec<HypId>> = grammatical_paths(&inst.grammar, &inst.lattice)
        .map_err(|e| e.to_string())?
        .into_iter()
        .collect();
    if engine_paths != oracle_paths {
        return Err(format!(
            "accepted paths differ: parser {:?}, oracle {:?}",
            engine_paths, oracle_paths
        ));
    }
    if out.result.accepted != !oracle_paths.is_empty() {
        return Err("acceptance differs".to_string());
    }

    let oracle = best_path(
        &inst.grammar,
        &inst.lattice,
        &inst.bigram,
        opts.strict_bigram,
        opts.lambda,
        TREE_LIMIT,
    )
    .map_err(|e| e.to_string())?;
    let engine_score = out
        .best
        .as_ref()
        .map(|b| b.score + if opts.corrupt_scoring { 1e-3 } else { 0.0 });
    match (engine_score, oracle.as_ref()) {
        (None, None) => Ok(()),
        (Some(e), Some(o)) if (e - o.score).abs() <= SCORE_TOLERANCE => Ok(()),
        (e, o) => Err(format!(
            "best scores differ: parser {:?}, oracle {:?}",
            e,
            o.map(|o| o.score)
        )),
    }
}

/// Drop hypotheses one at a time while the disagreement persists.
pub fn minimize(inst: &Instance, opts: &CheckOptions) -> Instance {
    let mut current = inst.clone();
    loop {
        let mut shrunk = false;
        for drop in current.lattice.ids() {
            let Ok(lattice) = current.lattice.filtered(|h| h != drop) else {
                continue;
            };
            let candidate = Instance {
                lattice,
                ..current.clone()
            };
            if check_instance(&candidate, opts).is_err() {
                current = candidate;
                shrunk = true;
                break;
            }
        }
        if !shrunk {
            return current;
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrialReport {
    pub trials: usize,
    pub failures: Vec<Disagreement>,
}

/// Check `trials` random instances drawn from a seeded generator. Failing
/// instances are minimized.
pub fn run_trials(seed: u64, trials: usize, max_hyps: usize, max_frames: u32, opts: &CheckOptions) -> TrialReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = TrialReport {
        trials,
        failures: Vec::new(),
    };
    for i in 0..trials {
        let mut inst = random_instance(&mut rng, max_hyps, max_frames);
        inst.label = format!("{} (trial {i}, seed {seed})", inst.label);
        if let Err(reason) = check_instance(&inst, opts) {
            let small = minimize(&inst, opts);
            let reason = check_instance(&small, opts).err().unwrap_or(reason);
            report.failures.push(Disagreement { instance: small, reason });
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_trial_run_agrees() {
        let opts = CheckOptions {
            lambda: 1.0,
            ..CheckOptions::default()
        };
        let r = run_trials(3, 30, 10, 8, &opts);
        assert!(r.failures.is_empty(), "{:?}", r.failures.first().map(|f| &f.reason));
    }

    #[test]
    fn corrupted_scoring_is_caught_and_minimized() {
        let opts = CheckOptions {
            lambda: 1.0,
            corrupt_scoring: true,
            ..CheckOptions::default()
        };
        let r = run_trials(3, 30, 10, 8, &opts);
        assert!(!r.failures.is_empty());
        // a single grammatical path is the smallest witness
        assert!(r.failures.iter().all(|f| f.reason.contains("best scores differ")));
    }
}
