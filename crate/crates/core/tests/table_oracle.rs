//! The SLR table checked against a separately written LR(0) automaton and
//! FOLLOW computation.

mod common;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use latglr_core::grammar::{Grammar, SymbolId};
use latglr_core::table::{build_slr_table, Lookahead, SlrTable, StateId, TableAction};
use latglr_core::parse_grammar;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Item `(rule, dot)`; rule `usize::MAX` is the augmented start rule.
type Item = (usize, usize);
const START: usize = usize::MAX;

fn rhs(g: &Grammar, rule: usize) -> Vec<SymbolId> {
    if rule == START {
        vec![g.start()]
    } else {
        g.rules()[rule].rhs.clone()
    }
}

fn closure(g: &Grammar, items: BTreeSet<Item>) -> BTreeSet<Item> {
    let mut set = items;
    loop {
        let mut added = BTreeSet::new();
        for &(r, d) in &set {
            if let Some(&sym) = rhs(g, r).get(d) {
                for rule in g.rules() {
                    if rule.head == sym {
                        added.insert((rule.id.index(), 0));
                    }
                }
            }
        }
        let before = set.len();
        set.extend(added);
        if set.len() == before {
            return set;
        }
    }
}

fn goto(g: &Grammar, items: &BTreeSet<Item>, sym: SymbolId) -> BTreeSet<Item> {
    let moved = items
        .iter()
        .filter(|&&(r, d)| rhs(g, r).get(d) == Some(&sym))
        .map(|&(r, d)| (r, d + 1))
        .collect();
    closure(g, moved)
}

/// FOLLOW by the textbook fixpoint, recomputing nullable and FIRST inline.
fn follow(g: &Grammar) -> Vec<BTreeSet<Lookahead>> {
    let n = g.symbols().len();
    let mut nullable = vec![false; n];
    let mut first: Vec<BTreeSet<SymbolId>> = (0..n)
        .map(|i| {
            let s = SymbolId(i as u32);
            if g.is_terminal(s) {
                BTreeSet::from([s])
            } else {
                BTreeSet::new()
            }
        })
        .collect();
    for _ in 0..=n * n {
        for r in g.rules() {
            if r.rhs.iter().all(|s| nullable[s.index()]) {
                nullable[r.head.index()] = true;
            }
            for s in &r.rhs {
                let f = first[s.index()].clone();
                first[r.head.index()].extend(f);
                if !nullable[s.index()] {
                    break;
                }
            }
        }
    }
    let mut fol: Vec<BTreeSet<Lookahead>> = vec![BTreeSet::new(); n];
    fol[g.start().index()].insert(Lookahead::End);
    for _ in 0..=n * n {
        for r in g.rules() {
            for (i, s) in r.rhs.iter().enumerate() {
                let rest = &r.rhs[i + 1..];
                for t in rest {
                    let f: Vec<_> = first[t.index()].iter().map(|x| Lookahead::Symbol(*x)).collect();
                    fol[s.index()].extend(f);
                    if !nullable[t.index()] {
                        break;
                    }
                }
                if rest.iter().all(|t| nullable[t.index()]) {
                    let h = fol[r.head.index()].clone();
                    fol[s.index()].extend(h);
                }
            }
        }
    }
    fol
}

/// Walk the table and the independent automaton side by side from the
/// initial state and check every cell.
fn check_table(g: &Grammar, table: &SlrTable) {
    let fol = follow(g);
    let initial = closure(g, BTreeSet::from([(START, 0)]));
    let mut seen: BTreeMap<StateId, BTreeSet<Item>> = BTreeMap::new();
    let mut queue = VecDeque::from([(StateId::INITIAL, initial)]);
    while let Some((state, items)) = queue.pop_front() {
        if let Some(prev) = seen.get(&state) {
            assert_eq!(prev, &items, "state {state:?} reached with two item sets");
            continue;
        }
        seen.insert(state, items.clone());
        let row = table.row(state);
        for sym in g.symbols() {
            let next = goto(g, &items, sym.id);
            let shifts: Vec<StateId> = row
                .get(&Lookahead::Symbol(sym.id))
                .into_iter()
                .flatten()
                .filter_map(|a| match a {
                    TableAction::Shift(s) => Some(*s),
                    _ => None,
                })
                .collect();
            if next.is_empty() {
                assert!(shifts.is_empty(), "spurious shift on {}", sym.name);
            } else {
                assert_eq!(shifts.len(), 1, "missing shift on {}", sym.name);
                assert!(shifts[0].index() < table.state_count());
                queue.push_back((shifts[0], next));
            }
        }
        let mut expected_reduces: BTreeSet<(Lookahead, u32)> = BTreeSet::new();
        for &(r, d) in &items {
            if r != START && d == g.rules()[r].rhs.len() {
                for la in &fol[g.rules()[r].head.index()] {
                    expected_reduces.insert((*la, r as u32));
                }
            }
        }
        let mut reduces = BTreeSet::new();
        for (la, cell) in row {
            for a in cell {
                match a {
                    TableAction::Reduce(r) => {
                        reduces.insert((*la, r.0));
                    }
                    TableAction::Accept => {
                        assert_eq!(*la, Lookahead::End);
                        assert!(items.contains(&(START, 1)));
                    }
                    TableAction::Shift(_) => {}
                }
            }
        }
        assert_eq!(reduces, expected_reduces);
    }
    assert_eq!(seen.len(), table.state_count(), "unreachable or missing states");
}

#[test]
fn fixed_grammars_match_independent_construction() {
    for text in [common::G1, common::G2, common::G3] {
        let g = parse_grammar(text).unwrap();
        check_table(&g, &build_slr_table(&g));
    }
}

#[test]
fn random_grammars_match_independent_construction() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..200 {
        let g = common::layered_grammar(&mut rng, 14);
        check_table(&g, &build_slr_table(&g));
    }
}

#[test]
fn left_recursive_and_cyclic_grammars() {
    for text in [
        "E -> E + T\nE -> T\nT -> T * F\nT -> F\nF -> ( E )\nF -> x\nlex x x\nlex + +\nlex * *\nlex ( (\nlex ) )\n",
        "S -> S\nS -> a\nS ->\nlex a a\n",
        "S -> A A\nA -> A a\nA ->\nlex a a\n",
    ] {
        let g = parse_grammar(text).unwrap();
        check_table(&g, &build_slr_table(&g));
    }
}

#[test]
fn build_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let g = common::layered_grammar(&mut rng, 16);
        assert_eq!(build_slr_table(&g), build_slr_table(&g));
    }
}
