//! Flow-tree reconstruction from an observation set.
//!
//! Observations are consumed in time order. Each one is attached to the tree in one of three
//! ways: as the ingress of a copy whose egress toward this switch was already seen, as an
//! egress extending a switch node toward the neighbor behind the observed interface, or, for
//! the very first observation, as the ingress of the first switch right behind the probing
//! host. An observation that fits nowhere makes the data-path disconnected, and an egress that
//! repeats a directed edge on its branch reveals a loop.
//!
//! Candidates are looked up through indexes instead of scanning tree levels:
//!
//! * copies in flight on a link are kept per directed link in egress order, and an ingress
//!   takes the oldest one (links do not reorder);
//! * an egress belongs to the copy most recently received by that switch (a switch finishes
//!   one copy before taking the next), and with ordered clones its port must exceed the
//!   ports already used by that copy;
//! * with FIFO arrivals, which is the default and matches the simulator, an ingress must
//!   match the oldest copy in flight anywhere. Logs captured on real networks should turn
//!   this off.
//!
//! An observation on an interface may be either an ingress or an egress. When both readings
//! are admissible the analyzer prefers the one consistent with global arrival order and
//! backtracks to the other if the first leads to a dead end later on. A reading that repeats
//! a directed edge is not a dead end: it keeps consuming observations and, if it explains the
//! whole log and no loop-free reading does, yields the loop verdict. Otherwise the verdict
//! comes from the dead end reached furthest into the log: a loop if that reading had already
//! repeated an edge, a disconnection if not.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;

use crate::simulator::{Observation, ObservationLog};
use crate::topology::{DataPath, DataPlane, NodeId, Port};

/// One node of a [`FlowTree`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowTreeNode {
    label: NodeId,
    ti: Option<u64>,
    te: Option<u64>,
    via: Option<Port>,
    parent: Option<usize>,
    children: Vec<usize>,
    depth: usize,
}

impl FlowTreeNode {
    pub fn label(&self) -> NodeId {
        self.label
    }

    /// Time of ingress into this node. Hosts and the root have none.
    pub fn ti(&self) -> Option<u64> {
        self.ti
    }

    /// Time of egress from the parent toward this node. The root child carries the baseline 0.
    pub fn te(&self) -> Option<u64> {
        self.te
    }

    /// Port of the parent through which the packet left toward this node.
    pub fn egress_port(&self) -> Option<Port> {
        self.via
    }

    pub fn parent(&self) -> Option<usize> {
        self.parent
    }

    pub fn children(&self) -> &[usize] {
        &self.children
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }
}

/// Rooted tree whose root-to-leaf paths are the discovered data-paths. Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowTree {
    nodes: Vec<FlowTreeNode>,
}

/// Label structure of a tree with children sorted, for comparisons up to sibling order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Shape {
    pub label: NodeId,
    pub children: Vec<Shape>,
}

impl FlowTree {
    pub fn new(root: NodeId) -> Self {
        Self {
            nodes: alloc::vec![FlowTreeNode {
                label: root,
                ti: None,
                te: None,
                via: None,
                parent: None,
                children: Vec::new(),
                depth: 0,
            }],
        }
    }

    pub const ROOT: usize = 0;

    pub fn root(&self) -> &FlowTreeNode {
        &self.nodes[0]
    }

    pub fn node(&self, i: usize) -> &FlowTreeNode {
        &self.nodes[i]
    }

    pub fn nodes(&self) -> &[FlowTreeNode] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    /// Always false: a tree has at least its root.
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Largest node depth.
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (1..self.nodes.len()).filter(move |i| self.nodes[*i].children.is_empty())
    }

    /// Root-to-`i` directed edge sequence.
    pub fn path_to(&self, i: usize) -> DataPath {
        let mut edges = Vec::with_capacity(self.nodes[i].depth);
        let mut n = i;
        while let Some(p) = self.nodes[n].parent {
            edges.push((self.nodes[p].label, self.nodes[n].label));
            n = p;
        }
        edges.reverse();
        DataPath::new(edges)
    }

    pub fn shape(&self) -> Shape {
        self.shape_of(0)
    }

    fn shape_of(&self, i: usize) -> Shape {
        let mut children: Vec<Shape> = self.nodes[i]
            .children
            .iter()
            .map(|c| self.shape_of(*c))
            .collect();
        children.sort();
        Shape {
            label: self.nodes[i].label,
            children,
        }
    }

    /// Chronology holds on every edge: parent ingress < egress toward the child < child ingress.
    pub fn is_chronological(&self) -> bool {
        self.nodes.iter().skip(1).all(|n| {
            let parent = &self.nodes[n.parent.expect("non-root")];
            let after_parent = match (parent.ti, n.te) {
                (Some(ti), Some(te)) => ti < te,
                (None, Some(_)) => parent.parent.is_none(),
                _ => false,
            };
            let before_child = match (n.te, n.ti) {
                (Some(te), Some(ti)) => te < ti,
                (Some(_), None) => true,
                _ => false,
            };
            after_parent && before_child
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalysisError {
    #[error("loop: directed edge ({}, {}) repeats on one branch", .edge.0 .0, .edge.1 .0)]
    Loop {
        edge: (NodeId, NodeId),
        at: Observation,
        partial: Box<FlowTree>,
    },
    #[error("disconnected data-path at observation (node {}, iface {}, t {})", .at.node.0, .at.iface, .at.t)]
    Disconnected {
        at: Observation,
        partial: Box<FlowTree>,
    },
    #[error("no observations")]
    NoObservations,
    #[error("observation on unknown interface (node {}, iface {})", .node.0, .port)]
    UnknownInterface { node: NodeId, port: Port },
    #[error("flow tree origin must be a host")]
    OriginNotAHost,
}

impl AnalysisError {
    pub fn partial_tree(&self) -> Option<&FlowTree> {
        match self {
            AnalysisError::Loop { partial, .. } | AnalysisError::Disconnected { partial, .. } => {
                Some(partial)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalyzerOptions {
    /// Egress copies of one packet appear in ascending port order.
    pub ordered_clones: bool,
    /// Copies in flight are received in the order they were sent, across all links.
    pub fifo_arrivals: bool,
    /// Observation attachments allowed across all backtracking attempts, or `None` for a
    /// budget proportional to the log length.
    pub search_budget: Option<usize>,
}

impl Default for AnalyzerOptions {
    fn default() -> Self {
        Self {
            ordered_clones: true,
            fifo_arrivals: true,
            search_budget: None,
        }
    }
}

impl AnalyzerOptions {
    /// Only per-link ordering and per-switch serialization are assumed.
    pub fn relaxed() -> Self {
        Self {
            ordered_clones: false,
            fifo_arrivals: false,
            search_budget: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AnalysisStats {
    /// Observation attachments performed, counting re-attachments after backtracking.
    pub steps: usize,
    /// Tree nodes examined as attachment candidates.
    pub probes: usize,
    pub backtracks: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Analysis {
    pub tree: FlowTree,
    pub stats: AnalysisStats,
}

pub fn build_flow_tree(
    d: &DataPlane,
    origin: NodeId,
    obs: &ObservationLog,
) -> Result<FlowTree, AnalysisError> {
    analyze(d, origin, obs, AnalyzerOptions::default()).map(|a| a.tree)
}

/// [`build_flow_tree`] with options and instrumentation.
pub fn analyze(
    d: &DataPlane,
    origin: NodeId,
    obs: &ObservationLog,
    opts: AnalyzerOptions,
) -> Result<Analysis, AnalysisError> {
    if !d.is_host(origin) {
        return Err(AnalysisError::OriginNotAHost);
    }
    if obs.is_empty() {
        return Err(AnalysisError::NoObservations);
    }
    let mut neighbors = Vec::with_capacity(obs.len());
    for o in obs {
        if o.node.index() >= d.node_count() || !d.is_switch(o.node) {
            return Err(AnalysisError::UnknownInterface {
                node: o.node,
                port: o.iface,
            });
        }
        let u = d
            .neighbor_via(o.node, o.iface)
            .map_err(|_| AnalysisError::UnknownInterface {
                node: o.node,
                port: o.iface,
            })?;
        neighbors.push(u);
    }
    let budget = opts.search_budget.unwrap_or_else(|| 4 * obs.len() + 1024);
    Search::new(d, origin, obs.entries(), &neighbors, opts, budget).run()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Alt {
    Ingress(usize),
    Egress(usize),
    First,
}

#[derive(Debug, Clone, Copy)]
enum Undo {
    Ingress(usize),
    Append(usize),
    First(usize),
}

struct Choice {
    idx: usize,
    second: Alt,
    undo_len: usize,
}

struct LoopSeen {
    undo_pos: usize,
    edge: (NodeId, NodeId),
    at: Observation,
    snapshot: FlowTree,
}

struct Search<'a> {
    d: &'a DataPlane,
    obs: &'a [Observation],
    neighbors: &'a [NodeId],
    opts: AnalyzerOptions,
    budget: usize,
    tree: FlowTree,
    /// Copies in flight per directed link `(from, to)`, oldest first.
    in_flight: BTreeMap<(NodeId, NodeId), VecDeque<usize>>,
    /// Every copy in flight keyed by its egress time.
    in_flight_all: BTreeSet<(u64, usize)>,
    /// Per switch, the nodes that received a copy, in ingress order.
    received: Vec<Vec<usize>>,
    undo: Vec<Undo>,
    /// First repeated directed edge on the current reading.
    loop_seen: Option<LoopSeen>,
    stats: AnalysisStats,
}

impl<'a> Search<'a> {
    fn new(
        d: &'a DataPlane,
        origin: NodeId,
        obs: &'a [Observation],
        neighbors: &'a [NodeId],
        opts: AnalyzerOptions,
        budget: usize,
    ) -> Self {
        Self {
            d,
            obs,
            neighbors,
            opts,
            budget,
            tree: FlowTree::new(origin),
            in_flight: BTreeMap::new(),
            in_flight_all: BTreeSet::new(),
            received: alloc::vec![Vec::new(); d.node_count()],
            undo: Vec::new(),
            loop_seen: None,
            stats: AnalysisStats::default(),
        }
    }

    fn run(mut self) -> Result<Analysis, AnalysisError> {
        let mut choices: Vec<Choice> = Vec::new();
        // the dead end that got furthest into the log is the most informative one
        let mut deepest: Option<(usize, AnalysisError)> = None;
        // first complete reading that contains a repeated edge
        let mut looping: Option<AnalysisError> = None;
        let mut idx = 0usize;
        let mut forced: Option<Alt> = None;

        loop {
            let progressed = if let Some(alt) = forced.take() {
                self.apply(idx, alt);
                true
            } else if idx == self.obs.len() {
                if let Some(l) = &self.loop_seen {
                    looping.get_or_insert_with(|| AnalysisError::Loop {
                        edge: l.edge,
                        at: l.at.clone(),
                        partial: Box::new(l.snapshot.clone()),
                    });
                    false
                } else if let Some(at) = self.incomplete() {
                    self.record_dead_end(&mut deepest, idx, at);
                    false
                } else {
                    return Ok(Analysis {
                        tree: self.tree,
                        stats: self.stats,
                    });
                }
            } else {
                let alts = self.alternatives(idx);
                match alts.as_slice() {
                    [] => {
                        let at = self.obs[idx].clone();
                        self.record_dead_end(&mut deepest, idx, at);
                        false
                    }
                    [only] => {
                        self.apply(idx, *only);
                        true
                    }
                    [first, second, ..] => {
                        choices.push(Choice {
                            idx,
                            second: *second,
                            undo_len: self.undo.len(),
                        });
                        self.apply(idx, *first);
                        true
                    }
                }
            };

            if progressed {
                idx += 1;
                continue;
            }
            let exhausted = self.stats.steps >= self.budget;
            match choices.pop() {
                Some(c) if !exhausted => {
                    self.stats.backtracks += 1;
                    self.rollback(c.undo_len);
                    idx = c.idx;
                    forced = Some(c.second);
                }
                _ => {
                    return Err(looping
                        .or(deepest.map(|(_, e)| e))
                        .expect("a dead end was recorded"))
                }
            }
        }
    }

    /// Keeps the dead end reached furthest into the log. A reading that already repeated a
    /// directed edge reports the loop instead of the disconnection.
    fn record_dead_end(
        &self,
        deepest: &mut Option<(usize, AnalysisError)>,
        idx: usize,
        at: Observation,
    ) {
        if deepest.as_ref().is_some_and(|(i, _)| *i >= idx) {
            return;
        }
        let err = match &self.loop_seen {
            Some(l) => AnalysisError::Loop {
                edge: l.edge,
                at: l.at.clone(),
                partial: Box::new(l.snapshot.clone()),
            },
            None => AnalysisError::Disconnected {
                at,
                partial: Box::new(self.tree.clone()),
            },
        };
        *deepest = Some((idx, err));
    }

    /// Admissible readings of observation `idx`, preferred first.
    fn alternatives(&mut self, idx: usize) -> Vec<Alt> {
        let o = &self.obs[idx];
        let (v, t) = (o.node, o.t);
        let u = self.neighbors[idx];
        let root = &self.tree.nodes[0];
        if root.children.is_empty() {
            self.stats.probes += 1;
            return if root.label == u {
                alloc::vec![Alt::First]
            } else {
                Vec::new()
            };
        }

        let ingress = self
            .in_flight
            .get(&(u, v))
            .and_then(|q| q.front().copied())
            .filter(|n| {
                self.stats.probes += 1;
                self.tree.nodes[*n].te.is_some_and(|te| te < t)
            });

        let egress = self.received[v.index()].last().copied().filter(|x| {
            self.stats.probes += 1;
            let n = &self.tree.nodes[*x];
            let parent_label = n.parent.map(|p| self.tree.nodes[p].label);
            n.ti.is_some_and(|ti| ti < t)
                && parent_label != Some(u)
                && !n.children.iter().any(|c| self.tree.nodes[*c].label == u)
                && (!self.opts.ordered_clones
                    || n.children
                        .last()
                        .and_then(|c| self.tree.nodes[*c].via)
                        .is_none_or(|last| last < o.iface))
        });

        let oldest = self.in_flight_all.first().map(|(_, n)| *n);
        let ingress = ingress.filter(|a| !self.opts.fifo_arrivals || oldest == Some(*a));
        match (ingress, egress) {
            (None, None) => Vec::new(),
            (Some(a), None) => alloc::vec![Alt::Ingress(a)],
            (None, Some(b)) => alloc::vec![Alt::Egress(b)],
            (Some(a), Some(b)) => {
                if oldest == Some(a) {
                    alloc::vec![Alt::Ingress(a), Alt::Egress(b)]
                } else {
                    alloc::vec![Alt::Egress(b), Alt::Ingress(a)]
                }
            }
        }
    }

    fn apply(&mut self, idx: usize, alt: Alt) {
        self.stats.steps += 1;
        let o = &self.obs[idx];
        let u = self.neighbors[idx];
        match alt {
            Alt::First => {
                let child = self.push_node(0, o.node, Some(0), self.tree_root_port());
                let n = &mut self.tree.nodes[child];
                n.ti = Some(o.t);
                self.received[o.node.index()].push(child);
                self.undo.push(Undo::First(child));
            }
            Alt::Ingress(n) => {
                let parent = self.tree.nodes[n]
                    .parent
                    .expect("in-flight nodes have parents");
                let key = (self.tree.nodes[parent].label, self.tree.nodes[n].label);
                let q = self.in_flight.get_mut(&key).expect("queued");
                let front = q.pop_front();
                debug_assert_eq!(front, Some(n));
                let te = self.tree.nodes[n].te.expect("in flight");
                self.in_flight_all.remove(&(te, n));
                self.tree.nodes[n].ti = Some(o.t);
                self.received[o.node.index()].push(n);
                self.undo.push(Undo::Ingress(n));
            }
            Alt::Egress(x) => {
                let edge = (o.node, u);
                let mut repeated = false;
                if self.loop_seen.is_none() {
                    let mut n = x;
                    while let Some(p) = self.tree.nodes[n].parent {
                        self.stats.probes += 1;
                        if (self.tree.nodes[p].label, self.tree.nodes[n].label) == edge {
                            repeated = true;
                            break;
                        }
                        n = p;
                    }
                }
                let undo_pos = self.undo.len();
                let child = self.push_node(x, u, Some(o.t), Some(o.iface));
                if self.d.is_switch(u) {
                    self.in_flight.entry(edge).or_default().push_back(child);
                    self.in_flight_all.insert((o.t, child));
                }
                self.undo.push(Undo::Append(child));
                if repeated {
                    self.loop_seen = Some(LoopSeen {
                        undo_pos,
                        edge,
                        at: o.clone(),
                        snapshot: self.tree.clone(),
                    });
                }
            }
        }
    }

    fn tree_root_port(&self) -> Option<Port> {
        self.d
            .host_uplink(self.tree.nodes[0].label)
            .map(|(p, _, _)| p)
    }

    fn push_node(
        &mut self,
        parent: usize,
        label: NodeId,
        te: Option<u64>,
        via: Option<Port>,
    ) -> usize {
        let id = self.tree.nodes.len();
        let depth = self.tree.nodes[parent].depth + 1;
        self.tree.nodes.push(FlowTreeNode {
            label,
            ti: None,
            te,
            via,
            parent: Some(parent),
            children: Vec::new(),
            depth,
        });
        self.tree.nodes[parent].children.push(id);
        id
    }

    fn rollback(&mut self, len: usize) {
        if self.loop_seen.as_ref().is_some_and(|l| l.undo_pos >= len) {
            self.loop_seen = None;
        }
        while self.undo.len() > len {
            match self.undo.pop().expect("non-empty") {
                Undo::First(child) => {
                    let label = self.tree.nodes[child].label;
                    self.received[label.index()].pop();
                    self.pop_node(child);
                }
                Undo::Ingress(n) => {
                    let node = &mut self.tree.nodes[n];
                    node.ti = None;
                    let label = node.label;
                    let te = node.te.expect("in flight");
                    let parent = node.parent.expect("in flight");
                    self.received[label.index()].pop();
                    let key = (self.tree.nodes[parent].label, label);
                    self.in_flight.entry(key).or_default().push_front(n);
                    self.in_flight_all.insert((te, n));
                }
                Undo::Append(child) => {
                    let node = &self.tree.nodes[child];
                    if self.d.is_switch(node.label) {
                        let key = (
                            self.tree.nodes[node.parent.expect("child")].label,
                            node.label,
                        );
                        let te = node.te.expect("appended by egress");
                        self.in_flight.get_mut(&key).expect("queued").pop_back();
                        self.in_flight_all.remove(&(te, child));
                    }
                    self.pop_node(child);
                }
            }
        }
    }

    fn pop_node(&mut self, child: usize) {
        debug_assert_eq!(child + 1, self.tree.nodes.len());
        let node = self.tree.nodes.pop().expect("non-empty");
        let parent = node.parent.expect("child");
        self.tree.nodes[parent].children.pop();
    }

    /// The egress toward a switch that never recorded receiving the copy.
    fn incomplete(&self) -> Option<Observation> {
        let (te, n) = *self.in_flight_all.first()?;
        let node = &self.tree.nodes[n];
        let parent = &self.tree.nodes[node.parent.expect("in flight")];
        let uid: String = self.obs.first().map(|o| o.uid.clone()).unwrap_or_default();
        Some(Observation::new(
            parent.label,
            node.via.expect("egress port"),
            te,
            uid,
        ))
    }
}

/// One data-path per leaf, from the root.
pub fn extract_paths(t: &FlowTree) -> BTreeSet<DataPath> {
    t.leaves().map(|l| t.path_to(l)).collect()
}

/// Splits a log by probe identifier, keeping each part in log order.
pub fn group_by_uid(log: &ObservationLog) -> BTreeMap<String, ObservationLog> {
    let mut parts: BTreeMap<String, Vec<Observation>> = BTreeMap::new();
    for o in log {
        parts.entry(o.uid.clone()).or_default().push(o.clone());
    }
    parts
        .into_iter()
        .map(|(k, v)| (k, ObservationLog::from_sorted(v)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples::{cloned_probe_log, four_switch_plane, solid_path_log};
    use alloc::vec;

    fn log(d: &DataPlane, triples: &[(&str, Port, u64)]) -> ObservationLog {
        ObservationLog::from_entries(
            d,
            triples
                .iter()
                .map(|(n, p, t)| Observation::new(d.lookup(n).unwrap(), *p, *t, "x"))
                .collect(),
        )
    }

    fn rendered(d: &DataPlane, t: &FlowTree) -> Vec<String> {
        extract_paths(t).iter().map(|p| p.render(d)).collect()
    }

    #[test]
    fn single_path() {
        let d = four_switch_plane();
        let h1 = d.lookup("h1").unwrap();
        let t = build_flow_tree(&d, h1, &solid_path_log(&d)).unwrap();
        assert_eq!(rendered(&d, &t), vec!["(h1,s1)(s1,s2)(s2,h2)"]);
        let s1 = t.node(1);
        assert_eq!((s1.ti(), s1.te()), (Some(1), Some(0)));
        let s2 = t.node(2);
        assert_eq!((s2.ti(), s2.te()), (Some(3), Some(2)));
        let h2 = t.node(3);
        assert_eq!((h2.ti(), h2.te()), (None, Some(4)));
        assert!(t.is_chronological());
    }

    #[test]
    fn cloned_path() {
        let d = four_switch_plane();
        let h1 = d.lookup("h1").unwrap();
        let t = build_flow_tree(&d, h1, &cloned_probe_log(&d)).unwrap();
        assert_eq!(
            rendered(&d, &t),
            vec!["(h1,s1)(s1,s2)(s2,h2)", "(h1,s1)(s1,s3)(s3,h3)"]
        );
        let ti: Vec<u64> = t.nodes().iter().filter_map(|n| n.ti()).collect();
        assert_eq!(ti, vec![1, 4, 5]);
        let mut te: Vec<u64> = t.nodes().iter().filter_map(|n| n.te()).collect();
        te.sort();
        assert_eq!(te, vec![0, 2, 3, 6, 7]);
    }

    #[test]
    fn lone_observation_is_disconnected() {
        let d = four_switch_plane();
        let h1 = d.lookup("h1").unwrap();
        let err = build_flow_tree(&d, h1, &log(&d, &[("s2", 2, 5)])).unwrap_err();
        match err {
            AnalysisError::Disconnected { at, partial } => {
                assert_eq!((at.node, at.iface, at.t), (d.lookup("s2").unwrap(), 2, 5));
                assert_eq!(partial.len(), 1);
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn repeated_edge_is_a_loop() {
        let d = four_switch_plane();
        let h1 = d.lookup("h1").unwrap();
        // h1 -> s1 -> s2 -> s3 -> s1 -> s2
        let obs = log(
            &d,
            &[
                ("s1", 1, 1),
                ("s1", 2, 2),
                ("s2", 2, 3),
                ("s2", 3, 4),
                ("s3", 3, 5),
                ("s3", 2, 6),
                ("s1", 3, 7),
                ("s1", 2, 8),
            ],
        );
        match build_flow_tree(&d, h1, &obs).unwrap_err() {
            AnalysisError::Loop { edge, at, .. } => {
                assert_eq!(edge, (d.lookup("s1").unwrap(), d.lookup("s2").unwrap()));
                assert_eq!(at.t, 8);
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn missing_ingress_is_disconnected() {
        let d = four_switch_plane();
        let h1 = d.lookup("h1").unwrap();
        let obs = log(&d, &[("s1", 1, 1), ("s1", 2, 2)]);
        match build_flow_tree(&d, h1, &obs).unwrap_err() {
            AnalysisError::Disconnected { at, .. } => {
                assert_eq!((at.node, at.iface, at.t), (d.lookup("s1").unwrap(), 2, 2))
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn input_errors() {
        let d = four_switch_plane();
        let h1 = d.lookup("h1").unwrap();
        assert_eq!(
            build_flow_tree(&d, h1, &ObservationLog::new()),
            Err(AnalysisError::NoObservations)
        );
        let bad = log(&d, &[("s1", 9, 1)]);
        assert!(matches!(
            build_flow_tree(&d, h1, &bad),
            Err(AnalysisError::UnknownInterface { port: 9, .. })
        ));
        let s1 = d.lookup("s1").unwrap();
        assert_eq!(
            build_flow_tree(&d, s1, &solid_path_log(&d)),
            Err(AnalysisError::OriginNotAHost)
        );
    }

    #[test]
    fn relaxed_ordering_accepts_overtaking_copies() {
        let d = four_switch_plane();
        let h1 = d.lookup("h1").unwrap();
        // the copy sent to s3 is received before the one sent to s2, and s1 emits port 3 first
        let obs = log(
            &d,
            &[
                ("s1", 1, 1),
                ("s1", 3, 2),
                ("s1", 2, 3),
                ("s3", 2, 4),
                ("s3", 1, 5),
                ("s2", 2, 6),
                ("s2", 1, 7),
            ],
        );
        assert!(build_flow_tree(&d, h1, &obs).is_err());
        let a = analyze(&d, h1, &obs, AnalyzerOptions::relaxed()).unwrap();
        assert_eq!(
            rendered(&d, &a.tree),
            vec!["(h1,s1)(s1,s2)(s2,h2)", "(h1,s1)(s1,s3)(s3,h3)"]
        );
        assert!(a.tree.is_chronological());
    }

    #[test]
    fn ingress_and_egress_on_the_same_interface() {
        let d = four_switch_plane();
        let h1 = d.lookup("h1").unwrap();
        // s2 and s3 exchange copies over the link between them
        let obs = log(
            &d,
            &[
                ("s1", 1, 1),
                ("s1", 2, 2),
                ("s1", 3, 3),
                ("s2", 2, 4),
                ("s2", 1, 5),
                ("s2", 3, 6),
                ("s3", 2, 7),
                ("s3", 1, 8),
                ("s3", 3, 9),
                ("s3", 3, 10),
                ("s2", 3, 11),
            ],
        );
        let a = analyze(&d, h1, &obs, AnalyzerOptions::default()).unwrap();
        assert_eq!(
            rendered(&d, &a.tree),
            vec![
                "(h1,s1)(s1,s2)(s2,h2)",
                "(h1,s1)(s1,s2)(s2,s3)",
                "(h1,s1)(s1,s3)(s3,h3)",
                "(h1,s1)(s1,s3)(s3,s2)"
            ]
        );
        assert!(a.stats.backtracks >= 1);
    }

    #[test]
    fn root_only_tree_has_no_paths() {
        let d = four_switch_plane();
        let t = FlowTree::new(d.lookup("h1").unwrap());
        assert!(extract_paths(&t).is_empty());
    }

    #[test]
    fn grouping() {
        let d = four_switch_plane();
        let s1 = d.lookup("s1").unwrap();
        let entries = vec![
            Observation::new(s1, 1, 1, "a"),
            Observation::new(s1, 1, 2, "b"),
            Observation::new(s1, 2, 3, "a"),
            Observation::new(s1, 2, 4, "b"),
        ];
        let l = ObservationLog::from_entries(&d, entries.clone());
        let g = group_by_uid(&l);
        assert_eq!(g.len(), 2);
        assert_eq!(g["a"].len(), 2);
        let mut all: Vec<Observation> = g.values().flat_map(|l| l.iter().cloned()).collect();
        all.sort_by_key(|o| o.t);
        assert_eq!(all, entries);
        assert!(group_by_uid(&ObservationLog::new()).is_empty());
        let single = ObservationLog::from_entries(&d, vec![entries[0].clone()]);
        assert_eq!(group_by_uid(&single)["a"], single);
    }
}
