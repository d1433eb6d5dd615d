//! The agenda-driven GLR parser over word lattices.
//!
//! Three kinds of action work on the graph-structured stack. `NewHypo` turns a
//! lattice hypothesis into terminal forest nodes and shifts them from every
//! vertex already waiting at its start time. `Shift` moves a node onto the
//! stack, creating the target vertex and link as needed. `Search` walks a
//! reduction leftwards through the links, one right-hand-side symbol per step,
//! and builds the reduced node once the rule's right side is complete.
//!
//! Vertices and links may appear in any order, so every step leaves enough
//! behind for later arrivals to catch up: a link remembers the Searches that
//! passed through it (replayed when it gains a predecessor), a vertex keeps
//! the Searches still heading left through it (replayed when it gains a
//! link), and executed `NewHypo` actions are replayed for vertices created
//! later at their start time.
//!
//! The order in which actions run is left to a [`Strategy`].

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;

use hashbrown::HashSet;
use rand::Rng;

use crate::grammar::{Grammar, RuleId};
use crate::gss::{GssState, LinkId, NodeId, SearchRecord, SearchTail, VertexId};
use crate::lattice::{HypId, Lattice, WordBigrams};
use crate::scoring::{LiveScorer, ScoreCtx};
use crate::table::{SlrTable, StateId};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ShiftAction {
    pub vertex: VertexId,
    pub node: NodeId,
    pub time: u32,
    pub state: StateId,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SearchAction {
    pub rule: RuleId,
    /// Nodes collected so far, leftmost first.
    pub seq: Vec<NodeId>,
    pub link: LinkId,
    pub ending_time: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Action {
    NewHypo(HypId),
    Shift(ShiftAction),
    Search(SearchAction),
}

/// Chooses the order of pending actions. A strategy may hold actions back but
/// never invents any.
pub trait Strategy {
    fn push(&mut self, action: Action, parser: &mut Parser<'_>);
    fn pop(&mut self, parser: &mut Parser<'_>) -> Option<Action>;
    /// Add strategy-specific counters to the final statistics.
    fn report(&self, _stats: &mut Stats) {}
}

/// First in, first out.
#[derive(Clone, Debug, Default)]
pub struct Fifo {
    queue: VecDeque<Action>,
}

impl Fifo {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Strategy for Fifo {
    fn push(&mut self, action: Action, _: &mut Parser<'_>) {
        self.queue.push_back(action);
    }

    fn pop(&mut self, _: &mut Parser<'_>) -> Option<Action> {
        self.queue.pop_front()
    }
}

/// Picks a uniformly random pending action each time.
#[derive(Clone, Debug)]
pub struct RandomOrder<R> {
    pending: Vec<Action>,
    rng: R,
}

impl<R: Rng> RandomOrder<R> {
    pub fn new(rng: R) -> Self {
        RandomOrder {
            pending: Vec::new(),
            rng,
        }
    }
}

impl<R: Rng> Strategy for RandomOrder<R> {
    fn push(&mut self, action: Action, _: &mut Parser<'_>) {
        self.pending.push(action);
    }

    fn pop(&mut self, _: &mut Parser<'_>) -> Option<Action> {
        if self.pending.is_empty() {
            return None;
        }
        let i = self.rng.gen_range(0..self.pending.len());
        Some(self.pending.swap_remove(i))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EngineConfig {
    /// Maximum number of executed actions; `None` is unlimited.
    pub action_budget: Option<u64>,
    pub stop_at_first_accept: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Stats {
    pub new_hypo: u64,
    pub shift: u64,
    pub search: u64,
    /// Shifts that changed nothing (the predecessor was already linked).
    pub shift_noop: u64,
    /// Actions merged with an identical pending or executed one.
    pub merged: u64,
    pub completions: u64,
    /// Completions of rules with an empty right side.
    pub empty_completions: u64,
    pub vertices: u64,
    pub links: u64,
    pub nodes: u64,
    pub pruned: u64,
    pub recovered: u64,
}

impl Stats {
    pub fn executed(&self) -> u64 {
        self.new_hypo + self.shift + self.search
    }

    /// Flat `key -> count` view, ordered by key.
    pub fn to_map(&self) -> BTreeMap<&'static str, u64> {
        BTreeMap::from([
            ("actions", self.executed()),
            ("completions", self.completions),
            ("empty_completions", self.empty_completions),
            ("links", self.links),
            ("merged", self.merged),
            ("new_hypo", self.new_hypo),
            ("nodes", self.nodes),
            ("pruned", self.pruned),
            ("recovered", self.recovered),
            ("search", self.search),
            ("shift", self.shift),
            ("shift_noop", self.shift_noop),
            ("vertices", self.vertices),
        ])
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseResult {
    pub accepted: bool,
    /// Start-symbol nodes spanning the whole lattice (at most one).
    pub root_nodes: Vec<NodeId>,
    pub stats: Stats,
    pub budget_exhausted: bool,
}

/// One parse of one lattice.
pub struct Parser<'a> {
    grammar: &'a Grammar,
    table: &'a SlrTable,
    lattice: &'a Lattice,
    config: EngineConfig,
    gss: GssState,
    out: Vec<Action>,
    pending: HashSet<Action>,
    executed_searches: HashSet<SearchAction>,
    accepted: bool,
    stats: Stats,
    bigrams: Option<WordBigrams>,
    live: Option<LiveScorer>,
}

impl<'a> Parser<'a> {
    pub fn new(grammar: &'a Grammar, table: &'a SlrTable, lattice: &'a Lattice, config: EngineConfig) -> Self {
        Parser {
            grammar,
            table,
            lattice,
            config,
            gss: GssState::new(),
            out: Vec::new(),
            pending: HashSet::new(),
            executed_searches: HashSet::new(),
            accepted: false,
            stats: Stats::default(),
            bigrams: None,
            live: None,
        }
    }

    /// Keep outside scores up to date while parsing so that a strategy can
    /// rank Shift actions.
    pub fn with_scoring(mut self, bigrams: WordBigrams, lambda: f64) -> Self {
        self.bigrams = Some(bigrams);
        self.live = Some(LiveScorer::new(lambda));
        self
    }

    pub fn grammar(&self) -> &'a Grammar {
        self.grammar
    }

    pub fn table(&self) -> &'a SlrTable {
        self.table
    }

    pub fn lattice(&self) -> &'a Lattice {
        self.lattice
    }

    pub fn gss(&self) -> &GssState {
        &self.gss
    }

    pub fn into_gss(self) -> GssState {
        self.gss
    }

    pub fn accepted(&self) -> bool {
        self.accepted
    }

    pub fn stats(&self) -> &Stats {
        &self.stats
    }

    pub fn root(&self) -> Option<NodeId> {
        if self.lattice.is_empty() {
            return None;
        }
        self.gss
            .find_node(self.grammar.start(), 0, self.lattice.final_time())
    }

    /// Outside score of the link that `Shift(vertex, node)` would build,
    /// judged from `vertex`'s left contexts. Zero when scoring is off.
    pub fn shift_score(&mut self, vertex: VertexId, node: NodeId) -> f64 {
        match (&mut self.live, &self.bigrams) {
            (Some(live), Some(bigrams)) => {
                let ctx = ScoreCtx {
                    grammar: self.grammar,
                    lattice: self.lattice,
                    gss: &self.gss,
                    bigrams,
                };
                live.shift_score(&ctx, vertex, node)
            }
            _ => 0.0,
        }
    }

    /// Outside score snapshot of a link, when scoring is on.
    pub fn link_outside_score(&self, link: LinkId) -> Option<f64> {
        self.live.as_ref()?.outside_score(link)
    }

    /// Run the parse to completion under `strategy`.
    pub fn run(&mut self, strategy: &mut dyn Strategy) -> ParseResult {
        self.start_vertex();
        for h in self.lattice.ids() {
            self.emit(Action::NewHypo(h));
        }
        self.flush(strategy);
        let mut budget_exhausted = false;
        loop {
            if self.accepted && self.config.stop_at_first_accept {
                break;
            }
            if let Some(b) = self.config.action_budget {
                if self.stats.executed() >= b {
                    budget_exhausted = true;
                    break;
                }
            }
            let Some(action) = strategy.pop(self) else { break };
            self.pending.remove(&action);
            self.execute(action);
            self.flush(strategy);
        }
        let mut stats = self.stats.clone();
        stats.vertices = self.gss.vertices().len() as u64;
        stats.links = self.gss.gss_links().count() as u64;
        stats.nodes = self.gss.nodes().len() as u64;
        strategy.report(&mut stats);
        let root_nodes: Vec<NodeId> = self.root().into_iter().collect();
        ParseResult {
            accepted: !root_nodes.is_empty(),
            root_nodes,
            stats,
            budget_exhausted,
        }
    }

    pub fn execute(&mut self, action: Action) {
        match action {
            Action::NewHypo(h) => self.exec_new_hypo(h),
            Action::Shift(s) => self.exec_shift(s),
            Action::Search(s) => self.exec_search(s),
        }
    }

    fn flush(&mut self, strategy: &mut dyn Strategy) {
        while !self.out.is_empty() {
            let batch = core::mem::take(&mut self.out);
            for a in batch {
                strategy.push(a, self);
            }
        }
    }

    fn emit(&mut self, action: Action) {
        if let Action::Search(s) = &action {
            if self.executed_searches.contains(s) {
                self.stats.merged += 1;
                return;
            }
        }
        if self.pending.insert(action.clone()) {
            self.out.push(action);
        } else {
            self.stats.merged += 1;
        }
    }

    fn node_changed(&mut self, node: NodeId, children: &[NodeId]) {
        if let Some(live) = &mut self.live {
            live.node_changed(&self.gss, node, children);
        }
    }

    fn link_changed(&mut self, link: LinkId) {
        if let (Some(live), Some(bigrams)) = (&mut self.live, &self.bigrams) {
            let ctx = ScoreCtx {
                grammar: self.grammar,
                lattice: self.lattice,
                gss: &self.gss,
                bigrams,
            };
            live.link_changed(&ctx, link);
        }
    }

    /// The initial vertex goes through the same set-up as any new vertex, so
    /// rules that can reduce before any input (empty right sides) start here.
    fn start_vertex(&mut self) {
        let (v, created) = self.gss.find_or_create_vertex(0, StateId::INITIAL);
        if created {
            self.new_vertex(v);
        }
    }

    /// Shifts for already executed hypotheses starting here, and a sentinel
    /// link from which the vertex's reductions begin.
    fn new_vertex(&mut self, v: VertexId) {
        let (time, state) = {
            let vx = self.gss.vertex(v);
            (vx.time, vx.state)
        };
        let hyps: Vec<HypId> = self.gss.old_hypos_at(time).to_vec();
        for h in hyps {
            let hyp = self.lattice.hypothesis(h);
            for cat in self.grammar.categories_of_key(self.lattice.word(hyp.key())) {
                let Some(node) = self.gss.find_node(cat, hyp.start(), hyp.end()) else {
                    continue;
                };
                if let Some(next) = self.table.shift_on(state, cat) {
                    self.emit(Action::Shift(ShiftAction {
                        vertex: v,
                        node,
                        time: hyp.end(),
                        state: next,
                    }));
                }
            }
        }
        let sentinel = self.gss.create_link(v, None, v);
        for &rule in self.table.reductions(state) {
            self.emit(Action::Search(SearchAction {
                rule,
                seq: Vec::new(),
                link: sentinel,
                ending_time: time,
            }));
        }
    }

    pub fn exec_new_hypo(&mut self, h: HypId) {
        self.stats.new_hypo += 1;
        let hyp = self.lattice.hypothesis(h);
        let (start, end) = (hyp.start(), hyp.end());
        if !self.gss.remember_hypo(h, start) {
            return;
        }
        let cats: Vec<_> = self
            .grammar
            .categories_of_key(self.lattice.word(hyp.key()))
            .collect();
        for cat in cats {
            let (node, created) = self.gss.find_or_create_node(cat, start, end, true);
            let added = self
                .gss
                .add_hypothesis(node, h)
                .expect("lexical categories are terminals");
            if added {
                self.node_changed(node, &[]);
            }
            if !created {
                // the node's Shifts were issued when it was created
                continue;
            }
            let waiting: Vec<VertexId> = self.gss.vertices_at(start).to_vec();
            for v in waiting {
                if let Some(next) = self.table.shift_on(self.gss.vertex(v).state, cat) {
                    self.emit(Action::Shift(ShiftAction {
                        vertex: v,
                        node,
                        time: end,
                        state: next,
                    }));
                }
            }
        }
    }

    pub fn exec_shift(&mut self, a: ShiftAction) {
        self.stats.shift += 1;
        let (v, created) = self.gss.find_or_create_vertex(a.time, a.state);
        if created {
            let link = self.gss.create_link(v, Some(a.node), a.vertex);
            self.link_changed(link);
            self.new_vertex(v);
            return;
        }
        match self.gss.find_link(v, a.node) {
            Some(link) => {
                if !self.gss.add_pred(link, a.vertex) {
                    self.stats.shift_noop += 1;
                    return;
                }
                self.link_changed(link);
                // bring the new predecessor up to date with every Search
                // that already went through this link
                let records = self.gss.link(link).registry.clone();
                for rec in records {
                    match rec.completed {
                        Some(node) => self.shift_completed(a.vertex, node, rec.ending_time),
                        None => self.extend_from(a.vertex, rec.rule, &rec.seq, rec.ending_time),
                    }
                }
            }
            None => {
                let link = self.gss.create_link(v, Some(a.node), a.vertex);
                self.link_changed(link);
                let tails = self.gss.vertex(v).waiting.clone();
                for tail in tails {
                    self.emit(Action::Search(SearchAction {
                        rule: tail.rule,
                        seq: cons(a.node, &tail.seq),
                        link,
                        ending_time: tail.ending_time,
                    }));
                }
            }
        }
    }

    pub fn exec_search(&mut self, a: SearchAction) {
        if !self.executed_searches.insert(a.clone()) {
            self.stats.merged += 1;
            return;
        }
        self.stats.search += 1;
        let rule = self.grammar.rule(a.rule);
        let preds = self.gss.link(a.link).preds.clone();
        if a.seq.len() == rule.rhs.len() {
            let head = rule.head;
            let start = self.gss.pred_time(a.link);
            let (node, _) = self.gss.find_or_create_node(head, start, a.ending_time, false);
            let added = self
                .gss
                .add_sequence(node, a.seq.clone())
                .expect("rule heads are nonterminals");
            if added {
                self.node_changed(node, &a.seq);
            }
            self.stats.completions += 1;
            if a.seq.is_empty() {
                self.stats.empty_completions += 1;
            }
            if head == self.grammar.start()
                && start == 0
                && a.ending_time == self.lattice.final_time()
                && !self.lattice.is_empty()
            {
                self.accepted = true;
            }
            for p in preds {
                self.shift_completed(p, node, a.ending_time);
            }
            self.gss.record(
                a.link,
                SearchRecord {
                    rule: a.rule,
                    seq: a.seq,
                    ending_time: a.ending_time,
                    completed: Some(node),
                },
            );
        } else {
            for p in preds {
                self.extend_from(p, a.rule, &a.seq, a.ending_time);
            }
            self.gss.record(
                a.link,
                SearchRecord {
                    rule: a.rule,
                    seq: a.seq,
                    ending_time: a.ending_time,
                    completed: None,
                },
            );
        }
    }

    /// Shift a reduced node from `pred`, unless that exact link and
    /// predecessor are already in place.
    fn shift_completed(&mut self, pred: VertexId, node: NodeId, time: u32) {
        let cat = self.gss.node(node).cat;
        let Some(next) = self.table.shift_on(self.gss.vertex(pred).state, cat) else {
            return;
        };
        let present = self
            .gss
            .find_vertex(time, next)
            .and_then(|v| self.gss.find_link(v, node))
            .is_some_and(|l| self.gss.link(l).preds.binary_search(&pred).is_ok());
        if !present {
            self.emit(Action::Shift(ShiftAction {
                vertex: pred,
                node,
                time,
                state: next,
            }));
        }
    }

    /// Continue a Search leftwards through every link of `vertex`, now and
    /// for links it gains later.
    fn extend_from(&mut self, vertex: VertexId, rule: RuleId, seq: &[NodeId], ending_time: u32) {
        let links = self.gss.vertex(vertex).links.clone();
        for link in links {
            let node = self.gss.link(link).node.expect("vertex links carry nodes");
            self.emit(Action::Search(SearchAction {
                rule,
                seq: cons(node, seq),
                link,
                ending_time,
            }));
        }
        self.gss.park(
            vertex,
            SearchTail {
                rule,
                seq: seq.to_vec(),
                ending_time,
            },
        );
    }
}

fn cons(head: NodeId, tail: &[NodeId]) -> Vec<NodeId> {
    let mut v = Vec::with_capacity(tail.len() + 1);
    v.push(head);
    v.extend_from_slice(tail);
    v
}

/// Exhaustive parse in first-in-first-out order.
pub fn parse_exhaustive(grammar: &Grammar, table: &SlrTable, lattice: &Lattice) -> (GssState, ParseResult) {
    let mut parser = Parser::new(grammar, table, lattice, EngineConfig::default());
    let result = parser.run(&mut Fifo::new());
    (parser.into_gss(), result)
}
