//! SLR(1) table construction.
//!
//! The grammar is augmented with `S' -> S`. Item sets are the canonical LR(0)
//! collection, numbered breadth-first from the initial state with transitions
//! explored in symbol-id order. Reduce entries go under every lookahead in
//! FOLLOW(head). Conflicting actions stay in the same cell.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::vec::Vec;

use hashbrown::HashMap;

use crate::grammar::{Grammar, RuleId, SymbolId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub u32);

impl StateId {
    pub const INITIAL: StateId = StateId(0);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Column of the action table: a grammar symbol or the end-of-input marker.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Lookahead {
    Symbol(SymbolId),
    End,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TableAction {
    Shift(StateId),
    Reduce(RuleId),
    Accept,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlrTable {
    state_count: usize,
    actions: Vec<BTreeMap<Lookahead, Vec<TableAction>>>,
    goto: Vec<HashMap<SymbolId, StateId>>,
    reductions: Vec<Vec<RuleId>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TableReport {
    pub states: usize,
    pub conflict_cells: usize,
}

impl SlrTable {
    pub fn state_count(&self) -> usize {
        self.state_count
    }

    /// All actions in cell `(state, column)`, sorted.
    pub fn actions(&self, state: StateId, column: Lookahead) -> &[TableAction] {
        self.actions[state.index()]
            .get(&column)
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Nonempty cells of one state, ordered by column.
    pub fn row(&self, state: StateId) -> &BTreeMap<Lookahead, Vec<TableAction>> {
        &self.actions[state.index()]
    }

    /// The Shift target for `symbol` (terminal or nonterminal), if any.
    #[inline]
    pub fn shift_on(&self, state: StateId, symbol: SymbolId) -> Option<StateId> {
        self.goto[state.index()].get(&symbol).copied()
    }

    /// Every rule reduced in `state` under any lookahead, ascending.
    #[inline]
    pub fn reductions(&self, state: StateId) -> &[RuleId] {
        &self.reductions[state.index()]
    }

    pub fn conflict_cells(&self) -> usize {
        self.actions
            .iter()
            .flat_map(|row| row.values())
            .filter(|cell| cell.len() > 1)
            .count()
    }

    pub fn report(&self) -> TableReport {
        TableReport {
            states: self.state_count,
            conflict_cells: self.conflict_cells(),
        }
    }
}

/// Production index in the augmented grammar; `rules.len()` is `S' -> S`.
type Prod = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
struct Item {
    prod: Prod,
    dot: usize,
}

struct Augmented<'g> {
    g: &'g Grammar,
    start_rhs: [SymbolId; 1],
}

impl Augmented<'_> {
    fn rhs(&self, p: Prod) -> &[SymbolId] {
        if p == self.g.rules().len() {
            &self.start_rhs
        } else {
            &self.g.rules()[p].rhs
        }
    }

    fn next_symbol(&self, it: Item) -> Option<SymbolId> {
        self.rhs(it.prod).get(it.dot).copied()
    }

    fn closure(&self, kernel: &[Item]) -> Vec<Item> {
        let mut set: BTreeSet<Item> = kernel.iter().copied().collect();
        let mut work: Vec<Item> = kernel.to_vec();
        let mut expanded = alloc::vec![false; self.g.symbols().len()];
        while let Some(it) = work.pop() {
            if let Some(sym) = self.next_symbol(it) {
                if !self.g.is_terminal(sym) && !expanded[sym.index()] {
                    expanded[sym.index()] = true;
                    for r in self.g.rules_for(sym) {
                        let new = Item {
                            prod: r.index(),
                            dot: 0,
                        };
                        if set.insert(new) {
                            work.push(new);
                        }
                    }
                }
            }
        }
        set.into_iter().collect()
    }
}

/// Nullable flags and FIRST sets (terminals only) for every symbol.
pub(crate) fn nullable_and_first(g: &Grammar) -> (Vec<bool>, Vec<BTreeSet<SymbolId>>) {
    let n = g.symbols().len();
    let mut nullable = alloc::vec![false; n];
    let mut first: Vec<BTreeSet<SymbolId>> = alloc::vec![BTreeSet::new(); n];
    for s in g.symbols() {
        if g.is_terminal(s.id) {
            first[s.id.index()].insert(s.id);
        }
    }
    let mut changed = true;
    while changed {
        changed = false;
        for r in g.rules() {
            let h = r.head.index();
            let mut all_nullable = true;
            for sym in &r.rhs {
                let add: Vec<SymbolId> = first[sym.index()].iter().copied().collect();
                for t in add {
                    changed |= first[h].insert(t);
                }
                if !nullable[sym.index()] {
                    all_nullable = false;
                    break;
                }
            }
            if all_nullable && !nullable[h] {
                nullable[h] = true;
                changed = true;
            }
        }
    }
    (nullable, first)
}

/// FOLLOW sets of every nonterminal; `Lookahead::End` follows the start symbol.
pub fn follow_sets(g: &Grammar) -> Vec<BTreeSet<Lookahead>> {
    let (nullable, first) = nullable_and_first(g);
    let n = g.symbols().len();
    let mut follow: Vec<BTreeSet<Lookahead>> = alloc::vec![BTreeSet::new(); n];
    follow[g.start().index()].insert(Lookahead::End);
    let mut changed = true;
    while changed {
        changed = false;
        for r in g.rules() {
            for (i, sym) in r.rhs.iter().enumerate() {
                if g.is_terminal(*sym) {
                    continue;
                }
                let mut rest_nullable = true;
                let mut add: BTreeSet<Lookahead> = BTreeSet::new();
                for next in &r.rhs[i + 1..] {
                    add.extend(first[next.index()].iter().map(|t| Lookahead::Symbol(*t)));
                    if !nullable[next.index()] {
                        rest_nullable = false;
                        break;
                    }
                }
                if rest_nullable {
                    add.extend(follow[r.head.index()].iter().copied());
                }
                let target = &mut follow[sym.index()];
                for la in add {
                    changed |= target.insert(la);
                }
            }
        }
    }
    follow
}

/// Build the SLR(1) table. Conflicts are kept, never resolved.
pub fn build_slr_table(g: &Grammar) -> SlrTable {
    let aug = Augmented {
        g,
        start_rhs: [g.start()],
    };
    let accept_prod = g.rules().len();
    let follow = follow_sets(g);

    let initial = aug.closure(&[Item {
        prod: accept_prod,
        dot: 0,
    }]);
    let mut states: Vec<Vec<Item>> = alloc::vec![initial];
    let mut index: HashMap<Vec<Item>, StateId> = HashMap::new();
    index.insert(states[0].clone(), StateId(0));
    let mut goto: Vec<HashMap<SymbolId, StateId>> = Vec::new();
    let mut queue: VecDeque<usize> = VecDeque::from([0]);
    let mut processed = 0usize;

    while let Some(s) = queue.pop_front() {
        debug_assert_eq!(s, processed);
        processed += 1;
        // kernels of the successors, grouped by the symbol after the dot
        let mut kernels: BTreeMap<SymbolId, Vec<Item>> = BTreeMap::new();
        for it in &states[s] {
            if let Some(sym) = aug.next_symbol(*it) {
                kernels.entry(sym).or_default().push(Item {
                    prod: it.prod,
                    dot: it.dot + 1,
                });
            }
        }
        let mut row = HashMap::new();
        for (sym, mut kernel) in kernels {
            kernel.sort();
            let closed = aug.closure(&kernel);
            let target = match index.get(&closed) {
                Some(&t) => t,
                None => {
                    let t = StateId(states.len() as u32);
                    index.insert(closed.clone(), t);
                    states.push(closed);
                    queue.push_back(t.index());
                    t
                }
            };
            row.insert(sym, target);
        }
        goto.push(row);
    }

    let mut actions: Vec<BTreeMap<Lookahead, Vec<TableAction>>> = Vec::with_capacity(states.len());
    let mut reductions = Vec::with_capacity(states.len());
    for (s, items) in states.iter().enumerate() {
        let mut row: BTreeMap<Lookahead, Vec<TableAction>> = BTreeMap::new();
        for (sym, target) in &goto[s] {
            row.entry(Lookahead::Symbol(*sym))
                .or_default()
                .push(TableAction::Shift(*target));
        }
        let mut reduced = BTreeSet::new();
        for it in items {
            if it.dot < aug.rhs(it.prod).len() {
                continue;
            }
            if it.prod == accept_prod {
                row.entry(Lookahead::End).or_default().push(TableAction::Accept);
                continue;
            }
            let rule = &g.rules()[it.prod];
            for la in &follow[rule.head.index()] {
                row.entry(*la).or_default().push(TableAction::Reduce(rule.id));
                reduced.insert(rule.id);
            }
        }
        for cell in row.values_mut() {
            cell.sort();
            cell.dedup();
        }
        actions.push(row);
        reductions.push(reduced.into_iter().collect());
    }

    SlrTable {
        state_count: states.len(),
        actions,
        goto,
        reductions,
    }
}
