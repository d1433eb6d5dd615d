//! Normalized acoustic + bigram scores on links.
//!
//! A word sequence is summarized by [`ScoreComponents`]: raw acoustic and
//! bigram log-probability sums together with the frame and bigram-operation
//! counts they are normalized by. Normalization divides each sum by its count
//! and combines them as `lambda * ngram + acoustic`; denormalization is the
//! return to raw sums, which is what lets scores of adjacent pieces be added.
//!
//! Normalized scores do not compose, so the maximum over packed alternatives
//! cannot be taken piecewise on the normalized value. Tables are therefore
//! keyed by everything a future extension can see (boundary words and the
//! bigram-operation count) and keep, per key, every entry that is not beaten
//! on both raw sums. The frame count is fixed by the span, so within a key any
//! extension adds the same amounts to every entry and the Pareto front is
//! exactly what can still become the maximum.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::ops::Add;

use hashbrown::HashSet;

use crate::grammar::Grammar;
use crate::gss::{GssState, LinkId, NodeContent, NodeId, VertexId};
use crate::lattice::{HypId, Lattice, WordBigrams, WordId};
use crate::table::StateId;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoringConfig {
    pub lambda: f64,
    pub strict_bigram: bool,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            lambda: 1.0,
            strict_bigram: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScoreError {
    #[error("an empty word sequence has no normalized score")]
    EmptySequence,
}

/// Raw (denormalized) score of a word sequence.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct ScoreComponents {
    pub acoustic_sum: f64,
    pub frames: u32,
    pub ngram_sum: f64,
    pub ngram_ops: u32,
}

impl ScoreComponents {
    pub const ZERO: ScoreComponents = ScoreComponents {
        acoustic_sum: 0.0,
        frames: 0,
        ngram_sum: 0.0,
        ngram_ops: 0,
    };

    pub fn word(acoustic_logp: f64, frames: u32) -> Self {
        ScoreComponents {
            acoustic_sum: acoustic_logp,
            frames,
            ..Self::ZERO
        }
    }

    pub fn bigram(logp: f64) -> Self {
        ScoreComponents {
            ngram_sum: logp,
            ngram_ops: 1,
            ..Self::ZERO
        }
    }

    pub fn is_empty(&self) -> bool {
        self.frames == 0
    }

    pub fn normalize(&self) -> Result<NormalizedScore, ScoreError> {
        if self.frames == 0 {
            return Err(ScoreError::EmptySequence);
        }
        Ok(NormalizedScore {
            acoustic: self.acoustic_sum / self.frames as f64,
            // one-word sequences carry no bigram yet: 0/0 counts as 0
            ngram: if self.ngram_ops == 0 {
                0.0
            } else {
                self.ngram_sum / self.ngram_ops as f64
            },
            frames: self.frames,
            ops: self.ngram_ops,
        })
    }

    fn dominates(&self, other: &ScoreComponents) -> bool {
        self.acoustic_sum >= other.acoustic_sum && self.ngram_sum >= other.ngram_sum
    }
}

impl Add for ScoreComponents {
    type Output = ScoreComponents;
    fn add(self, o: ScoreComponents) -> ScoreComponents {
        ScoreComponents {
            acoustic_sum: self.acoustic_sum + o.acoustic_sum,
            frames: self.frames + o.frames,
            ngram_sum: self.ngram_sum + o.ngram_sum,
            ngram_ops: self.ngram_ops + o.ngram_ops,
        }
    }
}

/// Per-frame acoustic and per-operation bigram averages, with their counts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizedScore {
    pub acoustic: f64,
    pub ngram: f64,
    pub frames: u32,
    pub ops: u32,
}

impl NormalizedScore {
    pub fn value(&self, lambda: f64) -> f64 {
        lambda * self.ngram + self.acoustic
    }

    pub fn denormalize(&self) -> ScoreComponents {
        ScoreComponents {
            acoustic_sum: self.acoustic * self.frames as f64,
            frames: self.frames,
            ngram_sum: self.ngram * self.ops as f64,
            ngram_ops: self.ops,
        }
    }
}

/// `lambda * ngram_sum / ngram_ops + acoustic_sum / frames`.
pub fn normalize_components(c: &ScoreComponents, lambda: f64) -> Result<f64, ScoreError> {
    c.normalize().map(|n| n.value(lambda))
}

/// Normalized score of a link's word sequence; the empty sequence scores 0.
pub fn inside_of(c: &ScoreComponents, lambda: f64) -> f64 {
    normalize_components(c, lambda).unwrap_or(0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Boundary {
    pub first: WordId,
    pub last: WordId,
}

/// First and last word of a covered sequence (`None` when empty) plus its
/// internal bigram count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct InsideKey {
    pub boundary: Option<Boundary>,
    pub ops: u32,
}

/// Last word of a left context (`None` is the begin marker) plus its bigram count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OutsideKey {
    pub last: Option<WordId>,
    pub ops: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryEntry {
    pub boundary: Option<Boundary>,
    pub components: ScoreComponents,
}

/// Concatenate adjacent pieces, adding one bigram per junction between
/// nonempty pieces. `None` if a junction is unscorable under a strict model.
pub fn combine_children(children: &[BoundaryEntry], bigrams: &WordBigrams) -> Option<BoundaryEntry> {
    let mut acc = BoundaryEntry {
        boundary: None,
        components: ScoreComponents::ZERO,
    };
    for c in children {
        let (boundary, junction) = join(acc.boundary, c.boundary, bigrams)?;
        acc = BoundaryEntry {
            boundary,
            components: acc.components + c.components + junction,
        };
    }
    Some(acc)
}

fn join(
    left: Option<Boundary>,
    right: Option<Boundary>,
    bigrams: &WordBigrams,
) -> Option<(Option<Boundary>, ScoreComponents)> {
    match (left, right) {
        (l, None) => Some((l, ScoreComponents::ZERO)),
        (None, r) => Some((r, ScoreComponents::ZERO)),
        (Some(l), Some(r)) => {
            let bg = bigrams.get(Some(l.last), r.first)?;
            Some((
                Some(Boundary {
                    first: l.first,
                    last: r.last,
                }),
                ScoreComponents::bigram(bg),
            ))
        }
    }
}

/// Entries of one key that no other entry beats on both raw sums.
#[derive(Clone, Debug, PartialEq)]
pub struct Front<T> {
    items: Vec<(ScoreComponents, T)>,
}

impl<T> Default for Front<T> {
    fn default() -> Self {
        Front { items: Vec::new() }
    }
}

impl<T> Front<T> {
    pub fn iter(&self) -> impl Iterator<Item = &(ScoreComponents, T)> {
        self.items.iter()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn find(&self, c: &ScoreComponents) -> Option<&T> {
        self.items.iter().find(|(k, _)| k == c).map(|(_, t)| t)
    }

    /// Insert unless dominated. On an exact tie `prefer(new, old)` decides;
    /// `Less` replaces the old payload. Returns whether the front changed.
    pub fn insert(&mut self, c: ScoreComponents, payload: T, prefer: impl FnOnce(&T, &T) -> Ordering) -> bool {
        for i in 0..self.items.len() {
            let (old, _) = &self.items[i];
            if old.dominates(&c) {
                if *old == c && prefer(&payload, &self.items[i].1) == Ordering::Less {
                    self.items[i].1 = payload;
                    return true;
                }
                return false;
            }
        }
        self.items.retain(|(old, _)| !c.dominates(old));
        self.items.push((c, payload));
        true
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChildPick {
    pub node: NodeId,
    pub key: InsideKey,
    pub components: ScoreComponents,
    pub size: u32,
}

impl Eq for ScoreComponents {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Derivation {
    Word(HypId),
    Children(Vec<ChildPick>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InsidePayload {
    pub derivation: Derivation,
    /// Number of tree nodes in the derivation.
    pub size: u32,
}

pub type InsideTable = BTreeMap<InsideKey, Front<InsidePayload>>;
pub type OutsideTable = BTreeMap<OutsideKey, Front<()>>;

/// Everything the table computations read.
#[derive(Clone, Copy)]
pub struct ScoreCtx<'a> {
    pub grammar: &'a Grammar,
    pub lattice: &'a Lattice,
    pub gss: &'a GssState,
    pub bigrams: &'a WordBigrams,
}

/// Best normalized value in an inside table (empty sequences score 0).
pub fn inside_value(t: &InsideTable, lambda: f64) -> f64 {
    t.values()
        .flat_map(|f| f.iter())
        .map(|(c, _)| inside_of(c, lambda))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Best normalized value in an outside table; `-inf` when empty.
pub fn outside_value(t: &OutsideTable, lambda: f64) -> f64 {
    t.values()
        .flat_map(|f| f.iter())
        .map(|(c, _)| inside_of(c, lambda))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Left context of the initial vertex: nothing yet, begin marker last.
pub fn base_context() -> OutsideTable {
    let mut t = OutsideTable::new();
    t.entry(OutsideKey { last: None, ops: 0 })
        .or_default()
        .insert(ScoreComponents::ZERO, (), |_, _| Ordering::Equal);
    t
}

/// Add `ctx ⊕ inside` into `target`: each left-context entry followed by each
/// covered sequence, with the junction bigram conditioned on the context's
/// last word. Returns whether `target` changed.
pub fn extend_outside(
    target: &mut OutsideTable,
    ctx: &OutsideTable,
    inside: &InsideTable,
    bigrams: &WordBigrams,
) -> bool {
    let mut changed = false;
    for (ok, ofront) in ctx {
        for (ik, ifront) in inside {
            let (key, junction) = match ik.boundary {
                None => (*ok, ScoreComponents::ZERO),
                Some(b) => match bigrams.get(ok.last, b.first) {
                    Some(bg) => (
                        OutsideKey {
                            last: Some(b.last),
                            ops: ok.ops + ik.ops + 1,
                        },
                        ScoreComponents::bigram(bg),
                    ),
                    None => continue,
                },
            };
            let slot = target.entry(key).or_default();
            for (oc, _) in ofront.iter() {
                for (ic, _) in ifront.iter() {
                    changed |= slot.insert(*oc + *ic + junction, (), |_, _| Ordering::Equal);
                }
            }
        }
    }
    target.retain(|_, f| !f.is_empty());
    changed
}

fn merge_outside(target: &mut OutsideTable, src: &OutsideTable) {
    for (k, f) in src {
        let slot = target.entry(*k).or_default();
        for (c, _) in f.iter() {
            slot.insert(*c, (), |_, _| Ordering::Equal);
        }
    }
}

const RENDER_DEPTH_LIMIT: usize = 4096;

/// Bracketed text of the derivation stored for `(node, key, components)`.
fn render(ctx: &ScoreCtx<'_>, tables: &[InsideTable], node: NodeId, key: &InsideKey, c: &ScoreComponents, out: &mut String, depth: usize) {
    let n = ctx.gss.node(node);
    let name = ctx.grammar.name(n.cat);
    let payload = tables
        .get(node.index())
        .and_then(|t| t.get(key))
        .and_then(|f| f.find(c).or_else(|| f.iter().next().map(|(_, p)| p)));
    out.push('(');
    out.push_str(name);
    if depth > RENDER_DEPTH_LIMIT {
        out.push_str(" ...)");
        return;
    }
    match payload.map(|p| &p.derivation) {
        Some(Derivation::Word(h)) => {
            out.push(' ');
            out.push_str(ctx.lattice.word_of(*h));
        }
        Some(Derivation::Children(picks)) => {
            for p in picks {
                out.push(' ');
                render(ctx, tables, p.node, &p.key, &p.components, out, depth + 1);
            }
        }
        None => {}
    }
    out.push(')');
}

fn render_picks(ctx: &ScoreCtx<'_>, tables: &[InsideTable], picks: &[ChildPick]) -> String {
    let mut s = String::new();
    for p in picks {
        s.push(' ');
        render(ctx, tables, p.node, &p.key, &p.components, &mut s, 0);
    }
    s
}

fn picks_size(picks: &[ChildPick]) -> u32 {
    picks.iter().map(|p| p.size).sum()
}

/// Recompute the inside table of one node from its content and the current
/// tables of its children.
pub fn compute_inside(ctx: &ScoreCtx<'_>, tables: &[InsideTable], node: NodeId) -> InsideTable {
    let n = ctx.gss.node(node);
    let mut table = InsideTable::new();
    match &n.content {
        NodeContent::Hypotheses(hs) => {
            for h in hs {
                let hyp = ctx.lattice.hypothesis(*h);
                let w = hyp.key();
                let key = InsideKey {
                    boundary: Some(Boundary { first: w, last: w }),
                    ops: 0,
                };
                table.entry(key).or_default().insert(
                    ScoreComponents::word(hyp.acoustic_logp(), hyp.frames()),
                    InsidePayload {
                        derivation: Derivation::Word(*h),
                        size: 1,
                    },
                    |_, _| Ordering::Equal,
                );
            }
        }
        NodeContent::Sequences(seqs) => {
            for seq in seqs {
                for (key, front) in sequence_table(ctx, tables, seq) {
                    let slot = table.entry(key).or_default();
                    for (c, picks) in front.items {
                        let size = 1 + picks_size(&picks);
                        slot.insert(
                            c,
                            InsidePayload {
                                derivation: Derivation::Children(picks),
                                size,
                            },
                            |new, old| {
                                new.size.cmp(&old.size).then_with(|| {
                                    let render_payload = |p: &InsidePayload| match &p.derivation {
                                        Derivation::Children(ps) => render_picks(ctx, tables, ps),
                                        Derivation::Word(_) => String::new(),
                                    };
                                    render_payload(new).cmp(&render_payload(old))
                                })
                            },
                        );
                    }
                }
            }
        }
    }
    table.retain(|_, f| !f.is_empty());
    table
}

/// Left-to-right combination of the children's tables for one subtree sequence.
fn sequence_table(
    ctx: &ScoreCtx<'_>,
    tables: &[InsideTable],
    seq: &[NodeId],
) -> BTreeMap<InsideKey, Front<Vec<ChildPick>>> {
    let mut partial: BTreeMap<InsideKey, Front<Vec<ChildPick>>> = BTreeMap::new();
    partial
        .entry(InsideKey {
            boundary: None,
            ops: 0,
        })
        .or_default()
        .insert(ScoreComponents::ZERO, Vec::new(), |_, _| Ordering::Equal);
    let empty = InsideTable::new();
    for child in seq {
        let ctable = tables.get(child.index()).unwrap_or(&empty);
        let mut next: BTreeMap<InsideKey, Front<Vec<ChildPick>>> = BTreeMap::new();
        for (pk, pfront) in &partial {
            for (ck, cfront) in ctable {
                let Some((boundary, junction)) = join(pk.boundary, ck.boundary, ctx.bigrams) else {
                    continue;
                };
                let key = InsideKey {
                    boundary,
                    ops: pk.ops + ck.ops + junction.ngram_ops,
                };
                let slot = next.entry(key).or_default();
                for (pc, ppicks) in pfront.iter() {
                    for (cc, cpay) in cfront.iter() {
                        let mut picks = ppicks.clone();
                        picks.push(ChildPick {
                            node: *child,
                            key: *ck,
                            components: *cc,
                            size: cpay.size,
                        });
                        slot.insert(*pc + *cc + junction, picks, |new, old| {
                            picks_size(new)
                                .cmp(&picks_size(old))
                                .then_with(|| render_picks(ctx, tables, new).cmp(&render_picks(ctx, tables, old)))
                        });
                    }
                }
            }
        }
        next.retain(|_, f| !f.is_empty());
        partial = next;
    }
    partial
}

/// Children of every node, for dependency ordering.
fn children_of(gss: &GssState, node: NodeId) -> impl Iterator<Item = NodeId> + '_ {
    let seqs: &[Vec<NodeId>] = match &gss.node(node).content {
        NodeContent::Sequences(s) => s,
        NodeContent::Hypotheses(_) => &[],
    };
    seqs.iter().flat_map(|s| s.iter().copied())
}

/// Nodes reachable from `roots` in children-first order. The flag reports
/// whether a cycle was met.
fn post_order(gss: &GssState, roots: impl IntoIterator<Item = NodeId>, done: &mut [bool]) -> (Vec<NodeId>, bool) {
    let mut order = Vec::new();
    let mut cyclic = false;
    let mut on_stack = alloc::vec![false; done.len()];
    for root in roots {
        if done[root.index()] {
            continue;
        }
        let mut stack: Vec<(NodeId, bool)> = alloc::vec![(root, false)];
        while let Some((n, expanded)) = stack.pop() {
            if expanded {
                on_stack[n.index()] = false;
                if !done[n.index()] {
                    done[n.index()] = true;
                    order.push(n);
                }
                continue;
            }
            if done[n.index()] {
                continue;
            }
            if on_stack[n.index()] {
                cyclic = true;
                continue;
            }
            on_stack[n.index()] = true;
            stack.push((n, true));
            for c in children_of(gss, n) {
                if done[c.index()] {
                    continue;
                }
                if on_stack[c.index()] {
                    cyclic = true;
                } else {
                    stack.push((c, false));
                }
            }
        }
    }
    (order, cyclic)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Tree {
    Word { category: String, word: String, hyp: HypId },
    Node { label: String, children: Vec<Tree> },
}

impl Tree {
    pub fn leaves(&self) -> Vec<HypId> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<HypId>) {
        match self {
            Tree::Word { hyp, .. } => out.push(*hyp),
            Tree::Node { children, .. } => children.iter().for_each(|c| c.collect_leaves(out)),
        }
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tree::Word { category, word, .. } => write!(f, "({category} {word})"),
            Tree::Node { label, children } => {
                write!(f, "({label}")?;
                for c in children {
                    write!(f, " {c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BestTree {
    pub tree: Tree,
    pub score: f64,
    /// Components of the whole path, begin-marker bigram included.
    pub components: ScoreComponents,
    pub path: Vec<HypId>,
}

/// Inside and outside tables of a finished run.
#[derive(Clone, Debug)]
pub struct ForestScores {
    lambda: f64,
    inside: Vec<InsideTable>,
    outside: Vec<Option<OutsideTable>>,
}

/// Borrowed inside/outside evaluation of one link.
#[derive(Clone, Copy, Debug)]
pub struct LinkScore<'a> {
    pub inside: &'a InsideTable,
    pub outside: &'a OutsideTable,
}

impl ForestScores {
    pub fn evaluate(ctx: &ScoreCtx<'_>, lambda: f64) -> Self {
        let gss = ctx.gss;
        let count = gss.nodes().len();
        let mut inside: Vec<InsideTable> = alloc::vec![InsideTable::new(); count];
        let mut done = alloc::vec![false; count];
        let (order, cyclic) = post_order(gss, (0..count as u32).map(NodeId), &mut done);
        for n in &order {
            inside[n.index()] = compute_inside(ctx, &inside, *n);
        }
        if cyclic {
            loop {
                let mut changed = false;
                for n in &order {
                    let t = compute_inside(ctx, &inside, *n);
                    if t != inside[n.index()] {
                        inside[n.index()] = t;
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
        }

        let mut outside: Vec<Option<OutsideTable>> = alloc::vec![None; gss.links().len()];
        let mut by_time: BTreeMap<u32, (Vec<LinkId>, Vec<LinkId>)> = BTreeMap::new();
        for (id, l) in gss.gss_links() {
            let node = gss.node(l.node.unwrap());
            let slot = by_time.entry(node.end).or_default();
            if node.start == node.end {
                slot.1.push(id);
            } else {
                slot.0.push(id);
            }
        }
        let base = base_context();
        let compute = |outside: &Vec<Option<OutsideTable>>, id: LinkId| -> OutsideTable {
            let l = gss.link(id);
            let node_inside = &inside[l.node.unwrap().index()];
            let mut t = OutsideTable::new();
            for p in &l.preds {
                let ctx_table = vertex_context(gss, outside, &base, *p);
                extend_outside(&mut t, &ctx_table, node_inside, ctx.bigrams);
            }
            t
        };
        for (_, (spanning, empty)) in by_time {
            for id in spanning {
                outside[id.index()] = Some(compute(&outside, id));
            }
            loop {
                let mut changed = false;
                for id in &empty {
                    let t = compute(&outside, *id);
                    if outside[id.index()].as_ref() != Some(&t) {
                        outside[id.index()] = Some(t);
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
        }
        ForestScores { lambda, inside, outside }
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn inside(&self, node: NodeId) -> &InsideTable {
        &self.inside[node.index()]
    }

    pub fn outside(&self, link: LinkId) -> Option<&OutsideTable> {
        self.outside.get(link.index()).and_then(Option::as_ref)
    }

    pub fn link_score<'a>(&'a self, gss: &GssState, link: LinkId) -> Option<LinkScore<'a>> {
        let node = gss.link(link).node?;
        Some(LinkScore {
            inside: &self.inside[node.index()],
            outside: self.outside(link)?,
        })
    }

    /// Normalized outside evaluation of a link.
    pub fn outside_score(&self, link: LinkId) -> Option<f64> {
        self.outside(link).map(|t| outside_value(t, self.lambda))
    }

    /// The derivation under `root` with the best whole-path score. Ties go to
    /// the smaller tree, then to the lexicographically smaller bracketing.
    pub fn best_tree(&self, ctx: &ScoreCtx<'_>, root: NodeId) -> Option<BestTree> {
        let mut best: Option<(f64, u32, String, InsideKey, ScoreComponents, ScoreComponents)> = None;
        for (key, front) in &self.inside[root.index()] {
            let Some(b) = key.boundary else { continue };
            let Some(bg) = ctx.bigrams.get(None, b.first) else { continue };
            for (c, payload) in front.iter() {
                let total = *c + ScoreComponents::bigram(bg);
                let Ok(score) = normalize_components(&total, self.lambda) else { continue };
                let better = match &best {
                    None => true,
                    Some((bs, bsize, btext, ..)) => match score.partial_cmp(bs) {
                        Some(Ordering::Greater) => true,
                        Some(Ordering::Equal) => match payload.size.cmp(bsize) {
                            Ordering::Less => true,
                            Ordering::Equal => {
                                let mut text = String::new();
                                render(ctx, &self.inside, root, key, c, &mut text, 0);
                                text < *btext
                            }
                            Ordering::Greater => false,
                        },
                        _ => false,
                    },
                };
                if better {
                    let mut text = String::new();
                    render(ctx, &self.inside, root, key, c, &mut text, 0);
                    best = Some((score, payload.size, text, *key, *c, total));
                }
            }
        }
        let (score, _, _, key, c, total) = best?;
        let tree = build_tree(ctx, &self.inside, root, &key, &c, 0);
        let path = tree.leaves();
        Some(BestTree {
            tree,
            score,
            components: total,
            path,
        })
    }
}

fn vertex_context(
    gss: &GssState,
    outside: &[Option<OutsideTable>],
    base: &OutsideTable,
    v: VertexId,
) -> OutsideTable {
    let vertex = gss.vertex(v);
    if vertex.time == 0 && vertex.state == StateId::INITIAL {
        return base.clone();
    }
    let mut t = OutsideTable::new();
    for l in &vertex.links {
        if let Some(o) = outside.get(l.index()).and_then(Option::as_ref) {
            merge_outside(&mut t, o);
        }
    }
    t
}

fn build_tree(ctx: &ScoreCtx<'_>, tables: &[InsideTable], node: NodeId, key: &InsideKey, c: &ScoreComponents, depth: usize) -> Tree {
    let n = ctx.gss.node(node);
    let label = String::from(ctx.grammar.name(n.cat));
    let payload = tables[node.index()]
        .get(key)
        .and_then(|f| f.find(c))
        .expect("derivation refers to a live table entry");
    match &payload.derivation {
        Derivation::Word(h) => Tree::Word {
            category: label,
            word: ctx.lattice.word_of(*h).into(),
            hyp: *h,
        },
        Derivation::Children(picks) => {
            assert!(depth <= RENDER_DEPTH_LIMIT, "cyclic derivation");
            Tree::Node {
                label,
                children: picks
                    .iter()
                    .map(|p| build_tree(ctx, tables, p.node, &p.key, &p.components, depth + 1))
                    .collect(),
            }
        }
    }
}

/// Incrementally maintained scores used while parsing.
///
/// Outside tables are snapshots taken whenever a link is created or gains a
/// predecessor; they are not revised when earlier links improve later on.
/// Inside tables are recomputed on demand after a node (or a descendant)
/// gains content.
#[derive(Clone, Debug)]
pub struct LiveScorer {
    lambda: f64,
    inside: Vec<InsideTable>,
    fresh: Vec<bool>,
    parents: Vec<Vec<NodeId>>,
    parent_seen: HashSet<(NodeId, NodeId)>,
    outside: Vec<Option<OutsideTable>>,
    vertex_ctx: Vec<Option<OutsideTable>>,
    base: OutsideTable,
}

impl LiveScorer {
    pub fn new(lambda: f64) -> Self {
        LiveScorer {
            lambda,
            inside: Vec::new(),
            fresh: Vec::new(),
            parents: Vec::new(),
            parent_seen: HashSet::new(),
            outside: Vec::new(),
            vertex_ctx: Vec::new(),
            base: base_context(),
        }
    }

    fn grow(&mut self, nodes: usize) {
        if self.inside.len() < nodes {
            self.inside.resize(nodes, InsideTable::new());
            self.fresh.resize(nodes, false);
            self.parents.resize(nodes, Vec::new());
        }
    }

    /// A node gained a hypothesis or a subtree sequence.
    pub fn node_changed(&mut self, gss: &GssState, node: NodeId, new_children: &[NodeId]) {
        self.grow(gss.nodes().len());
        for c in new_children {
            if self.parent_seen.insert((*c, node)) {
                self.parents[c.index()].push(node);
            }
        }
        let mut stack = alloc::vec![node];
        self.fresh[node.index()] = true;
        while let Some(n) = stack.pop() {
            if !self.fresh[n.index()] {
                continue;
            }
            self.fresh[n.index()] = false;
            stack.extend(self.parents[n.index()].iter().copied());
        }
    }

    fn ensure_inside(&mut self, ctx: &ScoreCtx<'_>, node: NodeId) {
        self.grow(ctx.gss.nodes().len());
        if self.fresh[node.index()] {
            return;
        }
        let mut done: Vec<bool> = self.fresh.clone();
        let (order, _) = post_order(ctx.gss, [node], &mut done);
        for n in order {
            let t = compute_inside(ctx, &self.inside, n);
            self.inside[n.index()] = t;
            self.fresh[n.index()] = true;
        }
    }

    fn context(&mut self, ctx: &ScoreCtx<'_>, v: VertexId) -> &OutsideTable {
        if self.vertex_ctx.len() <= v.index() {
            self.vertex_ctx.resize(ctx.gss.vertices().len().max(v.index() + 1), None);
        }
        if self.vertex_ctx[v.index()].is_none() {
            let t = vertex_context(ctx.gss, &self.outside, &self.base, v);
            self.vertex_ctx[v.index()] = Some(t);
        }
        self.vertex_ctx[v.index()].as_ref().unwrap()
    }

    /// Recompute the outside snapshot of a link after it was created or
    /// gained a predecessor.
    pub fn link_changed(&mut self, ctx: &ScoreCtx<'_>, link: LinkId) {
        let l = ctx.gss.link(link);
        let Some(node) = l.node else { return };
        self.ensure_inside(ctx, node);
        let mut t = OutsideTable::new();
        for p in &l.preds {
            let c = self.context(ctx, *p).clone();
            extend_outside(&mut t, &c, &self.inside[node.index()], ctx.bigrams);
        }
        if self.outside.len() <= link.index() {
            self.outside.resize(ctx.gss.links().len().max(link.index() + 1), None);
        }
        self.outside[link.index()] = Some(t);
        if let Some(slot) = self.vertex_ctx.get_mut(l.owner.index()) {
            *slot = None;
        }
    }

    /// Outside evaluation of the link a Shift of `node` from `vertex` would
    /// build, using the left contexts through `vertex` only.
    pub fn shift_score(&mut self, ctx: &ScoreCtx<'_>, vertex: VertexId, node: NodeId) -> f64 {
        self.ensure_inside(ctx, node);
        let c = self.context(ctx, vertex).clone();
        let mut t = OutsideTable::new();
        extend_outside(&mut t, &c, &self.inside[node.index()], ctx.bigrams);
        outside_value(&t, self.lambda)
    }

    pub fn outside_score(&self, link: LinkId) -> Option<f64> {
        self.outside
            .get(link.index())
            .and_then(Option::as_ref)
            .map(|t| outside_value(t, self.lambda))
    }
}
