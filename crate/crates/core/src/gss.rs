//! Graph-structured stack and packed parse forest.
//!
//! A [`Vertex`] is a left context keyed by `(time, state)`. A [`Link`] hangs
//! off its owner vertex, consumes one forest [`Node`], and points back to the
//! set of predecessor vertices from which that node was shifted. Nodes are
//! keyed by `(category, start, end)` and pack every alternative derivation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use hashbrown::{HashMap, HashSet};

use crate::grammar::{Grammar, RuleId, SymbolId};
use crate::lattice::{HypId, Lattice};
use crate::table::StateId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

macro_rules! index_impl {
    ($($t:ty),*) => {$(
        impl $t {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }
    )*};
}
index_impl!(VertexId, LinkId, NodeId);

/// An incomplete Search parked at a vertex: it continues leftwards through
/// every link the vertex has now or gains later.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SearchTail {
    pub rule: RuleId,
    pub seq: Vec<NodeId>,
    pub ending_time: u32,
}

/// A Search that traversed (or completed at) a link.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchRecord {
    pub rule: RuleId,
    pub seq: Vec<NodeId>,
    pub ending_time: u32,
    /// The node the Search completed into, if the sequence was full.
    pub completed: Option<NodeId>,
}

#[derive(Clone, Debug)]
pub struct Vertex {
    pub time: u32,
    pub state: StateId,
    pub links: Vec<LinkId>,
    pub waiting: Vec<SearchTail>,
}

#[derive(Clone, Debug)]
pub struct Link {
    pub owner: VertexId,
    /// `None` for a sentinel link, which starts the reductions of `owner`.
    pub node: Option<NodeId>,
    /// Sorted, unique.
    pub preds: Vec<VertexId>,
    pub registry: Vec<SearchRecord>,
}

impl Link {
    pub fn is_sentinel(&self) -> bool {
        self.node.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeContent {
    Hypotheses(Vec<HypId>),
    Sequences(Vec<Vec<NodeId>>),
}

#[derive(Clone, Debug)]
pub struct Node {
    pub cat: SymbolId,
    pub start: u32,
    pub end: u32,
    pub content: NodeContent,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GssError {
    #[error("node {0:?} holds the other kind of content")]
    ContentMismatch(NodeId),
}

/// Vertices, links, forest nodes and executed NewHypo actions.
#[derive(Clone, Debug, Default)]
pub struct GssState {
    vertices: Vec<Vertex>,
    links: Vec<Link>,
    nodes: Vec<Node>,
    vertex_index: HashMap<(u32, StateId), VertexId>,
    node_index: HashMap<(SymbolId, u32, u32), NodeId>,
    link_index: HashMap<(VertexId, NodeId), LinkId>,
    vertices_at: BTreeMap<u32, Vec<VertexId>>,
    old_hypos_at: BTreeMap<u32, Vec<HypId>>,
    old_hypos: HashSet<HypId>,
    waiting_seen: HashSet<(VertexId, SearchTail)>,
}

impl GssState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, id: VertexId) -> &Vertex {
        &self.vertices[id.index()]
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn link(&self, id: LinkId) -> &Link {
        &self.links[id.index()]
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn find_vertex(&self, time: u32, state: StateId) -> Option<VertexId> {
        self.vertex_index.get(&(time, state)).copied()
    }

    pub fn find_node(&self, cat: SymbolId, start: u32, end: u32) -> Option<NodeId> {
        self.node_index.get(&(cat, start, end)).copied()
    }

    pub fn find_link(&self, vertex: VertexId, node: NodeId) -> Option<LinkId> {
        self.link_index.get(&(vertex, node)).copied()
    }

    pub fn vertices_at(&self, time: u32) -> &[VertexId] {
        self.vertices_at.get(&time).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn old_hypos_at(&self, time: u32) -> &[HypId] {
        self.old_hypos_at.get(&time).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn old_hypo_count(&self) -> usize {
        self.old_hypos.len()
    }

    /// GSS links proper, i.e. without sentinels.
    pub fn gss_links(&self) -> impl Iterator<Item = (LinkId, &Link)> {
        self.links
            .iter()
            .enumerate()
            .filter(|(_, l)| !l.is_sentinel())
            .map(|(i, l)| (LinkId(i as u32), l))
    }

    pub fn find_or_create_vertex(&mut self, time: u32, state: StateId) -> (VertexId, bool) {
        if let Some(&v) = self.vertex_index.get(&(time, state)) {
            return (v, false);
        }
        let id = VertexId(self.vertices.len() as u32);
        self.vertices.push(Vertex {
            time,
            state,
            links: Vec::new(),
            waiting: Vec::new(),
        });
        self.vertex_index.insert((time, state), id);
        self.vertices_at.entry(time).or_default().push(id);
        (id, true)
    }

    /// Unique node per `(cat, start, end)`. `terminal` picks the content kind of
    /// a new node.
    pub fn find_or_create_node(
        &mut self,
        cat: SymbolId,
        start: u32,
        end: u32,
        terminal: bool,
    ) -> (NodeId, bool) {
        debug_assert!(start <= end);
        if let Some(&n) = self.node_index.get(&(cat, start, end)) {
            return (n, false);
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(Node {
            cat,
            start,
            end,
            content: if terminal {
                NodeContent::Hypotheses(Vec::new())
            } else {
                NodeContent::Sequences(Vec::new())
            },
        });
        self.node_index.insert((cat, start, end), id);
        (id, true)
    }

    /// Returns whether the hypothesis was new to the node.
    pub fn add_hypothesis(&mut self, node: NodeId, h: HypId) -> Result<bool, GssError> {
        match &mut self.nodes[node.index()].content {
            NodeContent::Hypotheses(hs) if hs.contains(&h) => Ok(false),
            NodeContent::Hypotheses(hs) => {
                hs.push(h);
                Ok(true)
            }
            NodeContent::Sequences(_) => Err(GssError::ContentMismatch(node)),
        }
    }

    /// Returns whether the subtree sequence was new to the node.
    pub fn add_sequence(&mut self, node: NodeId, seq: Vec<NodeId>) -> Result<bool, GssError> {
        match &mut self.nodes[node.index()].content {
            NodeContent::Sequences(seqs) if seqs.contains(&seq) => Ok(false),
            NodeContent::Sequences(seqs) => {
                seqs.push(seq);
                Ok(true)
            }
            NodeContent::Hypotheses(_) => Err(GssError::ContentMismatch(node)),
        }
    }

    pub(crate) fn create_link(&mut self, owner: VertexId, node: Option<NodeId>, pred: VertexId) -> LinkId {
        let id = LinkId(self.links.len() as u32);
        self.links.push(Link {
            owner,
            node,
            preds: alloc::vec![pred],
            registry: Vec::new(),
        });
        if let Some(n) = node {
            self.link_index.insert((owner, n), id);
            self.vertices[owner.index()].links.push(id);
        }
        id
    }

    /// Returns false if `pred` was already a predecessor.
    pub(crate) fn add_pred(&mut self, link: LinkId, pred: VertexId) -> bool {
        let preds = &mut self.links[link.index()].preds;
        match preds.binary_search(&pred) {
            Ok(_) => false,
            Err(pos) => {
                preds.insert(pos, pred);
                true
            }
        }
    }

    pub(crate) fn record(&mut self, link: LinkId, rec: SearchRecord) {
        self.links[link.index()].registry.push(rec);
    }

    pub(crate) fn park(&mut self, vertex: VertexId, tail: SearchTail) {
        if self.waiting_seen.insert((vertex, tail.clone())) {
            self.vertices[vertex.index()].waiting.push(tail);
        }
    }

    /// Returns false if the NewHypo had already been executed.
    pub(crate) fn remember_hypo(&mut self, h: HypId, start: u32) -> bool {
        if !self.old_hypos.insert(h) {
            return false;
        }
        self.old_hypos_at.entry(start).or_default().push(h);
        true
    }

    /// Time of the predecessor vertices of a link (they all share it).
    pub fn pred_time(&self, link: LinkId) -> u32 {
        self.vertices[self.links[link.index()].preds[0].index()].time
    }

    pub fn node_key(&self, g: &Grammar, id: NodeId) -> String {
        let n = &self.nodes[id.index()];
        format!("{}:{}:{}", g.name(n.cat), n.start, n.end)
    }

    /// Order-independent description of the forest.
    pub fn canonical_forest(&self, g: &Grammar, lattice: &Lattice) -> CanonicalForest {
        let mut nodes = BTreeMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let content = match &n.content {
                NodeContent::Hypotheses(hs) => {
                    let mut hyps: Vec<CanonicalHypothesis> = hs
                        .iter()
                        .map(|h| CanonicalHypothesis {
                            word: lattice.word_of(*h).into(),
                            acoustic_logp: lattice.hypothesis(*h).acoustic_logp(),
                        })
                        .collect();
                    hyps.sort_by(|a, b| a.word.cmp(&b.word));
                    CanonicalContent::Hypotheses(hyps)
                }
                NodeContent::Sequences(seqs) => {
                    let mut alts: Vec<Vec<String>> = seqs
                        .iter()
                        .map(|s| s.iter().map(|c| self.node_key(g, *c)).collect())
                        .collect();
                    alts.sort();
                    CanonicalContent::Sequences(alts)
                }
            };
            nodes.insert(self.node_key(g, NodeId(i as u32)), content);
        }
        CanonicalForest { nodes }
    }

    /// Order-independent description of the stack: vertices and links.
    pub fn canonical_gss(&self, g: &Grammar) -> CanonicalGss {
        let vertices = self.vertices.iter().map(|v| (v.time, v.state.0)).collect();
        let links = self
            .gss_links()
            .map(|(_, l)| {
                let owner = &self.vertices[l.owner.index()];
                let mut preds: Vec<(u32, u32)> = l
                    .preds
                    .iter()
                    .map(|p| {
                        let v = &self.vertices[p.index()];
                        (v.time, v.state.0)
                    })
                    .collect();
                preds.sort_unstable();
                CanonicalLink {
                    owner: (owner.time, owner.state.0),
                    node: self.node_key(g, l.node.unwrap()),
                    preds,
                }
            })
            .collect();
        CanonicalGss { vertices, links }
    }

    /// Check the structural forest invariants: node kinds, rule shape and
    /// contiguous tiling of every subtree sequence.
    pub fn validate(&self, g: &Grammar, lattice: &Lattice) -> Result<(), String> {
        let mut seen = HashSet::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let key = self.node_key(g, NodeId(i as u32));
            if !seen.insert((n.cat, n.start, n.end)) {
                return Err(format!("duplicate node {key}"));
            }
            match &n.content {
                NodeContent::Hypotheses(hs) => {
                    if !g.is_terminal(n.cat) {
                        return Err(format!("{key}: nonterminal holds hypotheses"));
                    }
                    for h in hs {
                        let hyp = lattice.hypothesis(*h);
                        if hyp.start() != n.start || hyp.end() != n.end {
                            return Err(format!("{key}: hypothesis span mismatch"));
                        }
                        if !g.categories_of_key(lattice.word_of(*h)).any(|c| c == n.cat) {
                            return Err(format!("{key}: word not in category"));
                        }
                    }
                }
                NodeContent::Sequences(seqs) => {
                    if g.is_terminal(n.cat) {
                        return Err(format!("{key}: terminal holds subtree sequences"));
                    }
                    for seq in seqs {
                        let cats: Vec<SymbolId> = seq.iter().map(|c| self.nodes[c.index()].cat).collect();
                        if !g.rules_for(n.cat).iter().any(|r| g.rule(*r).rhs == cats) {
                            return Err(format!("{key}: no rule matches children"));
                        }
                        let mut t = n.start;
                        for c in seq {
                            let child = &self.nodes[c.index()];
                            if child.start != t {
                                return Err(format!("{key}: children do not tile"));
                            }
                            t = child.end;
                        }
                        if t != n.end {
                            return Err(format!("{key}: children do not cover span"));
                        }
                    }
                }
            }
        }
        for v in &self.vertices {
            for l in &v.links {
                let link = &self.links[l.index()];
                let node = &self.nodes[link.node.unwrap().index()];
                if node.end != v.time {
                    return Err(format!("link end {} differs from vertex time {}", node.end, v.time));
                }
                if link.preds.iter().any(|p| self.vertices[p.index()].time != node.start) {
                    return Err(String::from("predecessor time differs from node start"));
                }
            }
        }
        Ok(())
    }

    /// Every hypothesis sequence derivable from `node`. Cyclic derivations are
    /// cut, and enumeration stops with `None` past `limit` sequences.
    pub fn yields(&self, node: NodeId, limit: usize) -> Option<BTreeSet<Vec<HypId>>> {
        let mut memo: HashMap<NodeId, BTreeSet<Vec<HypId>>> = HashMap::new();
        let mut on_path = HashSet::new();
        self.yields_rec(node, limit, &mut memo, &mut on_path)
    }

    fn yields_rec(
        &self,
        node: NodeId,
        limit: usize,
        memo: &mut HashMap<NodeId, BTreeSet<Vec<HypId>>>,
        on_path: &mut HashSet<NodeId>,
    ) -> Option<BTreeSet<Vec<HypId>>> {
        if let Some(y) = memo.get(&node) {
            return Some(y.clone());
        }
        if !on_path.insert(node) {
            return Some(BTreeSet::new());
        }
        let mut out = BTreeSet::new();
        match &self.nodes[node.index()].content {
            NodeContent::Hypotheses(hs) => out.extend(hs.iter().map(|h| alloc::vec![*h])),
            NodeContent::Sequences(seqs) => {
                for seq in seqs {
                    let mut partial: BTreeSet<Vec<HypId>> = BTreeSet::from([Vec::new()]);
                    for c in seq {
                        let child = self.yields_rec(*c, limit, memo, on_path)?;
                        let mut next = BTreeSet::new();
                        for p in &partial {
                            for y in &child {
                                let mut s = p.clone();
                                s.extend_from_slice(y);
                                next.insert(s);
                                if next.len() > limit {
                                    return None;
                                }
                            }
                        }
                        partial = next;
                    }
                    out.extend(partial);
                    if out.len() > limit {
                        return None;
                    }
                }
            }
        }
        on_path.remove(&node);
        memo.insert(node, out.clone());
        Some(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CanonicalHypothesis {
    pub word: String,
    pub acoustic_logp: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CanonicalContent {
    Hypotheses(Vec<CanonicalHypothesis>),
    Sequences(Vec<Vec<String>>),
}

/// Forest keyed by `"cat:start:end"`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CanonicalForest {
    pub nodes: BTreeMap<String, CanonicalContent>,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct CanonicalLink {
    pub owner: (u32, u32),
    pub node: String,
    pub preds: Vec<(u32, u32)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct CanonicalGss {
    pub vertices: BTreeSet<(u32, u32)>,
    pub links: BTreeSet<CanonicalLink>,
}
