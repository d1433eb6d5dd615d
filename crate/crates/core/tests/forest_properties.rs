//! Forest-level properties on random small instances: order independence,
//! exact link scores, and the relation between beam and exhaustive runs.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use latglr_core::beam::{BeamConfig, BeamStrategy};
use latglr_core::engine::{EngineConfig, Fifo, Parser, RandomOrder};
use latglr_core::gss::{CanonicalForest, GssState, LinkId, VertexId};
use latglr_core::lattice::{BigramModel, HypId, Lattice, WordBigrams, BEGIN_MARKER};
use latglr_core::oracle::path_score;
use latglr_core::scoring::{ForestScores, ScoreCtx};
use latglr_core::table::StateId;
use latglr_core::{build_slr_table, parse_grammar, Grammar, SlrTable};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Case {
    grammar: Grammar,
    table: SlrTable,
    lattice: Lattice,
    bigram: BigramModel,
}

fn case(seed: u64, max_hyps: usize) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grammar = common::any_grammar(&mut rng);
    let lattice = common::lattice_for(&mut rng, &grammar, max_hyps, 7);
    let bigram = common::bigram_for(&mut rng, &lattice);
    let table = build_slr_table(&grammar);
    Case {
        grammar,
        table,
        lattice,
        bigram,
    }
}

fn exhaustive(c: &Case) -> GssState {
    let mut p = Parser::new(&c.grammar, &c.table, &c.lattice, EngineConfig::default());
    p.run(&mut Fifo::new());
    p.into_gss()
}

fn beam(c: &Case, width: f64, max_recovered: Option<u64>, stop: bool) -> (GssState, bool) {
    let cfg = EngineConfig {
        action_budget: None,
        stop_at_first_accept: stop,
    };
    let wb = WordBigrams::new(&c.bigram, &c.lattice, false);
    let mut p = Parser::new(&c.grammar, &c.table, &c.lattice, cfg).with_scoring(wb, 1.0);
    let r = p.run(&mut BeamStrategy::new(BeamConfig {
        beam_width: width,
        max_recovered,
    }));
    (p.into_gss(), r.accepted)
}

fn node_keys(f: &CanonicalForest) -> BTreeSet<String> {
    f.nodes.keys().cloned().collect()
}

/// Word sequences of every left context of `v`, by walking the stack back
/// to the initial vertex.
fn left_contexts(
    gss: &GssState,
    v: VertexId,
    memo: &mut BTreeMap<VertexId, BTreeSet<Vec<HypId>>>,
    active: &mut BTreeSet<VertexId>,
) -> BTreeSet<Vec<HypId>> {
    let vx = gss.vertex(v);
    if vx.time == 0 && vx.state == StateId::INITIAL {
        return BTreeSet::from([Vec::new()]);
    }
    if let Some(m) = memo.get(&v) {
        return m.clone();
    }
    if !active.insert(v) {
        return BTreeSet::new();
    }
    let mut out = BTreeSet::new();
    for &l in &vx.links {
        let link = gss.link(l);
        let ys = gss.yields(link.node.unwrap(), 100_000).unwrap();
        for &p in &link.preds {
            for left in left_contexts(gss, p, memo, active) {
                for y in &ys {
                    let mut s = left.clone();
                    s.extend_from_slice(y);
                    out.insert(s);
                }
            }
        }
    }
    active.remove(&v);
    memo.insert(v, out.clone());
    out
}

/// Best whole-sequence score over the left contexts ending in `link`.
fn brute_force_outside(c: &Case, gss: &GssState, link: LinkId) -> f64 {
    let l = gss.link(link);
    let ys = gss.yields(l.node.unwrap(), 100_000).unwrap();
    let mut memo = BTreeMap::new();
    let mut best = f64::NEG_INFINITY;
    for &p in &l.preds {
        for left in left_contexts(gss, p, &mut memo, &mut BTreeSet::new()) {
            for y in &ys {
                let mut s = left.clone();
                s.extend_from_slice(y);
                let v = if s.is_empty() {
                    0.0
                } else {
                    path_score(&c.lattice, &c.bigram, false, 1.0, &s).unwrap()
                };
                best = best.max(v);
            }
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn any_agenda_order_gives_same_forest_and_stack(seed in any::<u64>(), order in any::<u64>()) {
        let c = case(seed, 9);
        let reference = exhaustive(&c);
        let mut p = Parser::new(&c.grammar, &c.table, &c.lattice, EngineConfig::default());
        p.run(&mut RandomOrder::new(ChaCha8Rng::seed_from_u64(order)));
        let shuffled = p.into_gss();
        prop_assert_eq!(
            reference.canonical_forest(&c.grammar, &c.lattice),
            shuffled.canonical_forest(&c.grammar, &c.lattice)
        );
        prop_assert_eq!(reference.canonical_gss(&c.grammar), shuffled.canonical_gss(&c.grammar));
        prop_assert!(shuffled.validate(&c.grammar, &c.lattice).is_ok());
    }

    #[test]
    fn outside_scores_are_exact_maxima(seed in any::<u64>()) {
        let c = case(seed, 8);
        let gss = exhaustive(&c);
        let wb = WordBigrams::new(&c.bigram, &c.lattice, false);
        let ctx = ScoreCtx { grammar: &c.grammar, lattice: &c.lattice, gss: &gss, bigrams: &wb };
        let scores = ForestScores::evaluate(&ctx, 1.0);
        for (id, _) in gss.gss_links() {
            let fast = scores.outside_score(id).unwrap();
            let slow = brute_force_outside(&c, &gss, id);
            prop_assert!(
                (fast - slow).abs() <= 1e-9 || fast == slow,
                "link {:?}: {} vs {}", id, fast, slow
            );
        }
    }

    #[test]
    fn beam_forest_is_a_subset_of_exhaustive(seed in any::<u64>(), width in 0.0f64..4.0) {
        let c = case(seed, 10);
        let all = node_keys(&exhaustive(&c).canonical_forest(&c.grammar, &c.lattice));
        let (g, _) = beam(&c, width, None, true);
        let some = node_keys(&g.canonical_forest(&c.grammar, &c.lattice));
        prop_assert!(some.is_subset(&all));
    }

    #[test]
    fn wider_beam_keeps_every_node(seed in any::<u64>(), narrow in 0.0f64..2.0, extra in 0.0f64..3.0) {
        let c = case(seed, 10);
        let (a, _) = beam(&c, narrow, Some(0), false);
        let (b, _) = beam(&c, narrow + extra, Some(0), false);
        let ka = node_keys(&a.canonical_forest(&c.grammar, &c.lattice));
        let kb = node_keys(&b.canonical_forest(&c.grammar, &c.lattice));
        prop_assert!(ka.is_subset(&kb));
    }

    #[test]
    fn recovery_accepts_exactly_when_exhaustive_does(seed in any::<u64>()) {
        let c = case(seed, 10);
        let mut p = Parser::new(&c.grammar, &c.table, &c.lattice, EngineConfig::default());
        let full = p.run(&mut Fifo::new()).accepted;
        let (_, accepted) = beam(&c, 0.0, None, true);
        prop_assert_eq!(full, accepted);
    }

    #[test]
    fn infinite_beam_is_exhaustive(seed in any::<u64>()) {
        let c = case(seed, 10);
        let (g, _) = beam(&c, f64::INFINITY, None, false);
        prop_assert_eq!(
            g.canonical_forest(&c.grammar, &c.lattice),
            exhaustive(&c).canonical_forest(&c.grammar, &c.lattice)
        );
    }
}

#[test]
fn chain_outside_equals_whole_path_score() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    for _ in 0..300 {
        let g = common::any_grammar(&mut rng);
        let words: Vec<&String> = g.lexicon().keys().collect();
        let n = rand::Rng::gen_range(&mut rng, 1..=6u32);
        let chain: Vec<(u32, u32, String, f64)> = (0..n)
            .map(|i| {
                let w = words[rand::Rng::gen_range(&mut rng, 0..words.len())].clone();
                (2 * i, 2 * i + 2, w, -rand::Rng::gen_range(&mut rng, 1.0..9.0))
            })
            .collect();
        let lattice = Lattice::new(chain).unwrap();
        let bigram = common::bigram_for(&mut rng, &lattice);
        let table = build_slr_table(&g);
        let mut p = Parser::new(&g, &table, &lattice, EngineConfig::default());
        p.run(&mut Fifo::new());
        let gss = p.into_gss();
        let wb = WordBigrams::new(&bigram, &lattice, false);
        let ctx = ScoreCtx { grammar: &g, lattice: &lattice, gss: &gss, bigrams: &wb };
        let scores = ForestScores::evaluate(&ctx, 1.0);
        let all: Vec<HypId> = lattice.ids().collect();
        let whole = path_score(&lattice, &bigram, false, 1.0, &all).unwrap();
        for (id, l) in gss.gss_links() {
            if gss.node(l.node.unwrap()).end != lattice.final_time() {
                continue;
            }
            let t = scores.outside(id).unwrap();
            if t.is_empty() {
                continue;
            }
            assert!((scores.outside_score(id).unwrap() - whole).abs() <= 1e-9);
            checked += 1;
        }
    }
    assert!(checked > 100, "only {checked} links checked");
}

#[test]
fn g1_fixture_scores() {
    let g = parse_grammar(common::G1).unwrap();
    let table = build_slr_table(&g);
    let lattice = latglr_core::parse_lattice("0 5 dog -50.0\n5 9 barks -40.0\n").unwrap();
    let bigram = latglr_core::parse_bigram(
        "<s> dog -0.6931471805599453\ndog barks -1.3862943611198906\n",
        -20.0,
    )
    .unwrap();
    assert_eq!(bigram.get(BEGIN_MARKER, "dog"), Some(-std::f64::consts::LN_2));
    let mut p = Parser::new(&g, &table, &lattice, EngineConfig::default());
    let r = p.run(&mut Fifo::new());
    let gss = p.into_gss();
    let wb = WordBigrams::new(&bigram, &lattice, false);
    let ctx = ScoreCtx { grammar: &g, lattice: &lattice, gss: &gss, bigrams: &wb };
    let scores = ForestScores::evaluate(&ctx, 1.0);
    let best = scores.best_tree(&ctx, r.root_nodes[0]).unwrap();
    assert_eq!(best.tree.to_string(), "(S (NP (n dog)) (VP (v barks)))");
    assert!((best.score - -11.039721).abs() < 1e-6);

    let n = g.symbol_by_name("n").unwrap();
    let v = g.symbol_by_name("v").unwrap();
    let dog = gss.find_node(n, 0, 5).unwrap();
    let barks = gss.find_node(v, 5, 9).unwrap();
    let link_of = |node| gss.gss_links().find(|(_, l)| l.node == Some(node)).unwrap().0;
    assert!((scores.outside_score(link_of(dog)).unwrap() - -10.693147).abs() < 1e-6);
    assert!((scores.outside_score(link_of(barks)).unwrap() - -11.039721).abs() < 1e-6);
}
