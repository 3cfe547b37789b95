//! Data-plane graph: hosts, switches, and the interface function that maps every undirected link
//! to the pair of `(node, port)` endpoints it connects.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Local port number of a node. Ports are positive; `(node, port)` is the global interface id.
pub type Port = u32;

/// Index of a node inside a [`DataPlane`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Host,
    Switch,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeKind::Host => f.write_str("host"),
            NodeKind::Switch => f.write_str("switch"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct NodeInfo {
    name: String,
    kind: NodeKind,
}

/// One undirected link with its two interface endpoints, in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    pub a: (NodeId, Port),
    pub b: (NodeId, Port),
}

impl Link {
    /// The endpoint on the opposite side of `node`, if `node` is an endpoint of this link.
    pub fn other(&self, node: NodeId) -> Option<(NodeId, Port)> {
        if self.a.0 == node {
            Some(self.b)
        } else if self.b.0 == node {
            Some(self.a)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TopologyError {
    #[error("no such interface ({node}, {port})")]
    NoSuchInterface { node: String, port: Port },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("invalid data-plane: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
}

fn join_violations(v: &[Violation]) -> String {
    let mut out = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        out.push_str(&alloc::format!("{x}"));
    }
    out
}

/// A single violated data-plane invariant, naming the offending node or link.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    DuplicateName(String),
    EmptyName,
    TooFewHosts(usize),
    NoSwitches,
    HostDegree {
        host: String,
        degree: usize,
    },
    SwitchDegree {
        switch: String,
        degree: usize,
    },
    HostHostEdge(String, String),
    SelfLoop(String),
    ParallelEdge(String, String),
    DuplicateInterface {
        node: String,
        port: Port,
    },
    ZeroPort(String),
    /// Warning only: the graph has more than one connected component.
    Unreachable(Vec<String>),
}

impl Violation {
    /// Warnings do not make a data-plane invalid.
    pub fn is_warning(&self) -> bool {
        matches!(self, Violation::Unreachable(_))
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateName(n) => write!(f, "duplicate node name `{n}`"),
            Violation::EmptyName => f.write_str("empty node name"),
            Violation::TooFewHosts(n) => write!(f, "2 <= |H| required, found {n} host(s)"),
            Violation::NoSwitches => f.write_str("1 <= |S| required, found no switch"),
            Violation::HostDegree { host, degree } => {
                write!(f, "host `{host}` has degree {degree}, expected exactly 1")
            }
            Violation::SwitchDegree { switch, degree } => {
                write!(
                    f,
                    "switch `{switch}` has degree {degree}, expected at least 2"
                )
            }
            Violation::HostHostEdge(a, b) => write!(f, "host-host edge {{{a}, {b}}}"),
            Violation::SelfLoop(n) => write!(f, "self-loop on `{n}`"),
            Violation::ParallelEdge(a, b) => {
                write!(f, "more than one edge between `{a}` and `{b}`")
            }
            Violation::DuplicateInterface { node, port } => {
                write!(f, "interface ({node}, {port}) used by more than one link")
            }
            Violation::ZeroPort(n) => write!(f, "port 0 on `{n}`; ports must be positive"),
            Violation::Unreachable(nodes) => {
                write!(
                    f,
                    "warning: nodes not connected to the rest of the data-plane: "
                )?;
                for (i, n) in nodes.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str(n)?;
                }
                Ok(())
            }
        }
    }
}

/// Outcome of [`DataPlane::validate`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub errors: Vec<Violation>,
    pub warnings: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }
}

/// The data-plane graph `(H ∪ S, E, I)`.
///
/// A `DataPlane` may be assembled in an invalid state (see [`DataPlaneBuilder::finish_unchecked`])
/// so that [`DataPlane::validate`] can report every violation at once. Everything that consumes a
/// data-plane downstream assumes it validated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPlane {
    nodes: Vec<NodeInfo>,
    links: Vec<Link>,
    by_name: BTreeMap<String, NodeId>,
    /// `(node, port)` -> index into `links`. First declaration wins on duplicates.
    ifaces: BTreeMap<(NodeId, Port), usize>,
}

impl DataPlane {
    pub fn builder() -> DataPlaneBuilder {
        DataPlaneBuilder::default()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    pub fn hosts(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes()
            .filter(move |n| self.kind(*n) == NodeKind::Host)
    }

    pub fn switches(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes()
            .filter(move |n| self.kind(*n) == NodeKind::Switch)
    }

    pub fn host_count(&self) -> usize {
        self.hosts().count()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn name(&self, node: NodeId) -> &str {
        &self.nodes[node.index()].name
    }

    pub fn kind(&self, node: NodeId) -> NodeKind {
        self.nodes[node.index()].kind
    }

    pub fn is_host(&self, node: NodeId) -> bool {
        self.kind(node) == NodeKind::Host
    }

    pub fn is_switch(&self, node: NodeId) -> bool {
        self.kind(node) == NodeKind::Switch
    }

    pub fn lookup(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<NodeId, TopologyError> {
        self.lookup(name)
            .ok_or_else(|| TopologyError::UnknownNode(name.into()))
    }

    /// Ports of `node`, ascending.
    pub fn ports(&self, node: NodeId) -> Vec<Port> {
        self.ifaces
            .range((node, 0)..=(node, Port::MAX))
            .map(|((_, p), _)| *p)
            .collect()
    }

    pub fn has_interface(&self, node: NodeId, port: Port) -> bool {
        self.ifaces.contains_key(&(node, port))
    }

    /// Number of links incident to `node`.
    pub fn degree(&self, node: NodeId) -> usize {
        self.links
            .iter()
            .filter(|l| l.a.0 == node || l.b.0 == node)
            .count()
    }

    /// The interface function read backwards: the node on the far side of `(node, port)`.
    pub fn neighbor_via(&self, node: NodeId, port: Port) -> Result<NodeId, TopologyError> {
        self.peer(node, port).map(|(n, _)| n)
    }

    /// The far-side interface of `(node, port)`.
    pub fn peer(&self, node: NodeId, port: Port) -> Result<(NodeId, Port), TopologyError> {
        let idx = self
            .ifaces
            .get(&(node, port))
            .ok_or_else(|| TopologyError::NoSuchInterface {
                node: self.name(node).into(),
                port,
            })?;
        let link = &self.links[*idx];
        // a link declared twice on the same interface resolves to its first endpoint match
        Ok(if link.a == (node, port) {
            link.b
        } else {
            link.a
        })
    }

    /// The local port of `node` that faces `neighbor`, if they are adjacent.
    pub fn port_towards(&self, node: NodeId, neighbor: NodeId) -> Option<Port> {
        self.links.iter().find_map(|l| {
            if l.a.0 == node && l.b.0 == neighbor {
                Some(l.a.1)
            } else if l.b.0 == node && l.a.0 == neighbor {
                Some(l.b.1)
            } else {
                None
            }
        })
    }

    pub fn adjacent(&self, a: NodeId, b: NodeId) -> bool {
        self.port_towards(a, b).is_some()
    }

    /// The single link of a host: `(host port, switch, switch port)`.
    pub fn host_uplink(&self, host: NodeId) -> Option<(Port, NodeId, Port)> {
        self.links.iter().find_map(|l| {
            if l.a.0 == host {
                Some((l.a.1, l.b.0, l.b.1))
            } else if l.b.0 == host {
                Some((l.b.1, l.a.0, l.a.1))
            } else {
                None
            }
        })
    }

    /// Checks every data-plane invariant and reports each violation with the offending
    /// node or link. Disconnected components are reported as warnings.
    pub fn validate(&self) -> ValidationReport {
        let mut errors = Vec::new();

        let mut seen = BTreeSet::new();
        for n in &self.nodes {
            if n.name.is_empty() {
                errors.push(Violation::EmptyName);
            } else if !seen.insert(n.name.as_str()) {
                errors.push(Violation::DuplicateName(n.name.clone()));
            }
        }

        let hosts = self.host_count();
        if hosts < 2 {
            errors.push(Violation::TooFewHosts(hosts));
        }
        if self.switches().next().is_none() {
            errors.push(Violation::NoSwitches);
        }

        let mut pairs = BTreeSet::new();
        let mut ports = BTreeSet::new();
        for l in &self.links {
            let (a, b) = (l.a.0, l.b.0);
            if a == b {
                errors.push(Violation::SelfLoop(self.name(a).into()));
            }
            if self.is_host(a) && self.is_host(b) && a != b {
                errors.push(Violation::HostHostEdge(
                    self.name(a).into(),
                    self.name(b).into(),
                ));
            }
            let key = if a <= b { (a, b) } else { (b, a) };
            if a != b && !pairs.insert(key) {
                errors.push(Violation::ParallelEdge(
                    self.name(key.0).into(),
                    self.name(key.1).into(),
                ));
            }
            for (n, p) in [l.a, l.b] {
                if p == 0 {
                    errors.push(Violation::ZeroPort(self.name(n).into()));
                }
                if !ports.insert((n, p)) {
                    errors.push(Violation::DuplicateInterface {
                        node: self.name(n).into(),
                        port: p,
                    });
                }
            }
        }

        for n in self.nodes() {
            let degree = self.degree(n);
            match self.kind(n) {
                NodeKind::Host if degree != 1 => errors.push(Violation::HostDegree {
                    host: self.name(n).into(),
                    degree,
                }),
                NodeKind::Switch if degree < 2 => errors.push(Violation::SwitchDegree {
                    switch: self.name(n).into(),
                    degree,
                }),
                _ => {}
            }
        }

        let mut warnings = Vec::new();
        let unreachable = self.unreachable_from_first();
        if !unreachable.is_empty() {
            warnings.push(Violation::Unreachable(unreachable));
        }

        ValidationReport { errors, warnings }
    }

    fn unreachable_from_first(&self) -> Vec<String> {
        if self.nodes.is_empty() {
            return Vec::new();
        }
        let mut seen = alloc::vec![false; self.nodes.len()];
        let mut stack = alloc::vec![0usize];
        seen[0] = true;
        while let Some(n) = stack.pop() {
            for l in &self.links {
                if let Some((m, _)) = l.other(NodeId(n as u32)) {
                    if !seen[m.index()] {
                        seen[m.index()] = true;
                        stack.push(m.index());
                    }
                }
            }
        }
        seen.iter()
            .enumerate()
            .filter(|(_, s)| !**s)
            .map(|(i, _)| self.nodes[i].name.clone())
            .collect()
    }
}

/// A directed edge sequence through the data-plane, starting at a host.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DataPath {
    pub edges: Vec<(NodeId, NodeId)>,
}

impl DataPath {
    pub fn new(edges: Vec<(NodeId, NodeId)>) -> Self {
        Self { edges }
    }

    /// Number of directed edges.
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Node sequence visited by the path.
    pub fn nodes(&self) -> Vec<NodeId> {
        let mut out = Vec::with_capacity(self.edges.len() + 1);
        if let Some((first, _)) = self.edges.first() {
            out.push(*first);
        }
        out.extend(self.edges.iter().map(|(_, b)| *b));
        out
    }

    /// Non-empty, made of data-plane edges, chained head to tail, and starting at a host.
    pub fn is_well_formed(&self, d: &DataPlane) -> bool {
        let Some((first, _)) = self.edges.first() else {
            return false;
        };
        d.is_host(*first)
            && self.edges.iter().all(|(a, b)| d.adjacent(*a, *b))
            && self.edges.windows(2).all(|w| w[0].1 == w[1].0)
    }

    /// `(h1,s1)(s1,s2)(s2,h2)`.
    pub fn render(&self, d: &DataPlane) -> String {
        let mut out = String::new();
        for (a, b) in &self.edges {
            out.push('(');
            out.push_str(d.name(*a));
            out.push(',');
            out.push_str(d.name(*b));
            out.push(')');
        }
        out
    }
}

/// Incremental construction of a [`DataPlane`].
#[derive(Debug, Default, Clone)]
pub struct DataPlaneBuilder {
    nodes: Vec<NodeInfo>,
    links: Vec<Link>,
    by_name: BTreeMap<String, NodeId>,
}

impl DataPlaneBuilder {
    fn add(&mut self, name: &str, kind: NodeKind) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(NodeInfo {
            name: name.into(),
            kind,
        });
        self.by_name.entry(name.into()).or_insert(id);
        id
    }

    pub fn host(&mut self, name: &str) -> NodeId {
        self.add(name, NodeKind::Host)
    }

    pub fn switch(&mut self, name: &str) -> NodeId {
        self.add(name, NodeKind::Switch)
    }

    pub fn id(&self, name: &str) -> Option<NodeId> {
        self.by_name.get(name).copied()
    }

    /// Adds the link `((a, port_a), (b, port_b))`.
    pub fn link(&mut self, a: NodeId, port_a: Port, b: NodeId, port_b: Port) -> &mut Self {
        self.links.push(Link {
            a: (a, port_a),
            b: (b, port_b),
        });
        self
    }

    /// Same as [`link`](Self::link), addressing nodes by name.
    pub fn link_named(
        &mut self,
        a: &str,
        port_a: Port,
        b: &str,
        port_b: Port,
    ) -> Result<&mut Self, TopologyError> {
        let ia = self
            .id(a)
            .ok_or_else(|| TopologyError::UnknownNode(a.into()))?;
        let ib = self
            .id(b)
            .ok_or_else(|| TopologyError::UnknownNode(b.into()))?;
        Ok(self.link(ia, port_a, ib, port_b))
    }

    /// Assembles the data-plane without checking invariants.
    pub fn finish_unchecked(self) -> DataPlane {
        let mut ifaces = BTreeMap::new();
        for (i, l) in self.links.iter().enumerate() {
            ifaces.entry(l.a).or_insert(i);
            ifaces.entry(l.b).or_insert(i);
        }
        DataPlane {
            nodes: self.nodes,
            links: self.links,
            by_name: self.by_name,
            ifaces,
        }
    }

    /// Assembles and validates the data-plane.
    pub fn build(self) -> Result<DataPlane, TopologyError> {
        let d = self.finish_unchecked();
        let report = d.validate();
        if report.is_ok() {
            Ok(d)
        } else {
            Err(TopologyError::Invalid(report.errors))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samples::four_switch_plane;

    #[test]
    fn sample_plane_is_valid() {
        let d = four_switch_plane();
        let r = d.validate();
        assert!(r.is_ok(), "{:?}", r.errors);
        assert!(r.warnings.is_empty());
        assert_eq!(d.node_count(), 8);
        assert_eq!(d.link_count(), 9);
    }

    #[test]
    fn sample_plane_neighbors() {
        let d = four_switch_plane();
        let s1 = d.lookup("s1").unwrap();
        let s2 = d.lookup("s2").unwrap();
        assert_eq!(d.neighbor_via(s1, 3).unwrap(), d.lookup("s3").unwrap());
        assert_eq!(d.neighbor_via(s2, 1).unwrap(), d.lookup("h2").unwrap());
        assert_eq!(
            d.neighbor_via(s1, 9),
            Err(TopologyError::NoSuchInterface {
                node: "s1".into(),
                port: 9
            })
        );
    }

    #[test]
    fn host_host_edge_rejected() {
        let mut b = DataPlane::builder();
        let h1 = b.host("h1");
        let h2 = b.host("h2");
        let h3 = b.host("h3");
        let s = b.switch("s1");
        b.link(h1, 1, h2, 1).link(h3, 1, s, 1);
        let d = b.finish_unchecked();
        let r = d.validate();
        assert!(r
            .errors
            .contains(&Violation::HostHostEdge("h1".into(), "h2".into())));
        assert!(alloc::format!("{}", r.errors[0]).contains("host-host edge"));
    }

    #[test]
    fn single_host_rejected() {
        let mut b = DataPlane::builder();
        let h1 = b.host("h1");
        let s1 = b.switch("s1");
        let s2 = b.switch("s2");
        b.link(h1, 1, s1, 1).link(s1, 2, s2, 1);
        let r = b.finish_unchecked().validate();
        assert!(r.errors.contains(&Violation::TooFewHosts(1)));
        assert!(alloc::format!("{}", Violation::TooFewHosts(1)).contains("2 <= |H| required"));
    }

    #[test]
    fn degree_and_duplicates() {
        let mut b = DataPlane::builder();
        let h1 = b.host("h1");
        let h2 = b.host("h2");
        let s1 = b.switch("s1");
        let s2 = b.switch("s2");
        b.link(h1, 1, s1, 1)
            .link(h2, 1, s1, 1) // port 1 of s1 reused
            .link(s1, 2, s2, 1)
            .link(s1, 3, s2, 2); // parallel
        let r = b.finish_unchecked().validate();
        assert!(r.errors.contains(&Violation::DuplicateInterface {
            node: "s1".into(),
            port: 1
        }));
        assert!(r
            .errors
            .contains(&Violation::ParallelEdge("s1".into(), "s2".into())));
    }

    #[test]
    fn disconnected_is_only_a_warning() {
        let mut b = DataPlane::builder();
        for (h, s) in [("h1", "s1"), ("h2", "s1"), ("h3", "s2"), ("h4", "s2")] {
            b.host(h);
            if b.id(s).is_none() {
                b.switch(s);
            }
            b.link_named(h, 1, s, if h == "h1" || h == "h3" { 1 } else { 2 })
                .unwrap();
        }
        let d = b.build().unwrap();
        let r = d.validate();
        assert!(r.is_ok());
        assert_eq!(r.warnings.len(), 1);
        assert!(r.warnings[0].is_warning());
    }

    #[test]
    fn data_path_shape() {
        let d = four_switch_plane();
        let id = |n| d.lookup(n).unwrap();
        let p = DataPath::new(alloc::vec![
            (id("h1"), id("s1")),
            (id("s1"), id("s2")),
            (id("s2"), id("h2"))
        ]);
        assert!(p.is_well_formed(&d));
        assert_eq!(p.render(&d), "(h1,s1)(s1,s2)(s2,h2)");
        assert_eq!(p.nodes().len(), 4);
        let broken = DataPath::new(alloc::vec![(id("h1"), id("s1")), (id("s2"), id("h2"))]);
        assert!(!broken.is_well_formed(&d));
        let from_switch = DataPath::new(alloc::vec![(id("s1"), id("s2"))]);
        assert!(!from_switch.is_well_formed(&d));
        assert!(!DataPath::new(Vec::new()).is_well_formed(&d));
    }

    #[test]
    fn ports_are_sorted_per_node() {
        let d = four_switch_plane();
        let s2 = d.lookup("s2").unwrap();
        assert_eq!(d.ports(s2), alloc::vec![1, 2, 3, 4]);
        let h4 = d.lookup("h4").unwrap();
        assert_eq!(d.host_uplink(h4), Some((1, d.lookup("s4").unwrap(), 1)));
    }
}
