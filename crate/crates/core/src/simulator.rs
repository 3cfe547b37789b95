//! Deterministic probe traversal producing per-interface observations and ground truth.
//!
//! Time is an integer tick that advances by one for every interface crossing. Switches handle
//! one arriving copy at a time: the ingress crossing is recorded, the forwarding decision is
//! taken, and every egress crossing is recorded in ascending port order before the next copy
//! is handled. Copies in flight wait in a single first-in first-out queue, so links never
//! reorder packets.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;

use crate::forwarding::{DataPlaneConfig, ForwardingError};
use crate::headers::HeaderValue;
use crate::topology::{DataPath, DataPlane, NodeId, Port};

/// Observation count after which a run stops and reports itself truncated.
pub const DEFAULT_EVENT_BUDGET: usize = 200_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Probe {
    pub uid: String,
    pub origin: NodeId,
    pub header: HeaderValue,
}

/// One crossing of a switch interface by a probe copy.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Observation {
    pub node: NodeId,
    pub iface: Port,
    pub t: u64,
    pub uid: String,
}

impl Observation {
    pub fn new(node: NodeId, iface: Port, t: u64, uid: impl Into<String>) -> Self {
        Self {
            node,
            iface,
            t,
            uid: uid.into(),
        }
    }
}

/// Observations sorted by `(t, node name, iface)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ObservationLog {
    entries: Vec<Observation>,
}

impl ObservationLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sorts `entries` into log order.
    pub fn from_entries(d: &DataPlane, mut entries: Vec<Observation>) -> Self {
        entries.sort_by(|a, b| (a.t, d.name(a.node), a.iface).cmp(&(b.t, d.name(b.node), b.iface)));
        Self { entries }
    }

    /// Wraps entries the caller guarantees are already in log order.
    pub fn from_sorted(entries: Vec<Observation>) -> Self {
        Self { entries }
    }

    pub fn entries(&self) -> &[Observation] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Observation> {
        self.entries
    }

    pub fn iter(&self) -> core::slice::Iter<'_, Observation> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Smallest and largest timestamp.
    pub fn span(&self) -> Option<(u64, u64)> {
        Some((self.entries.first()?.t, self.entries.last()?.t))
    }

    /// A copy without the observations of `node`.
    pub fn without_node(&self, node: NodeId) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .filter(|o| o.node != node)
                .cloned()
                .collect(),
        }
    }
}

impl<'a> IntoIterator for &'a ObservationLog {
    type Item = &'a Observation;
    type IntoIter = core::slice::Iter<'a, Observation>;

    fn into_iter(self) -> Self::IntoIter {
        self.entries.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimResult {
    pub log: ObservationLog,
    /// Trajectories of every copy that stopped: delivered to a host, dropped, or suppressed by
    /// forward-once. Copies cut off by the hop limit are not included.
    pub truth: BTreeSet<DataPath>,
    /// Some copy reached the hop limit or traversed a directed edge twice.
    pub loop_hit: bool,
    /// The event budget ran out before the queue drained.
    pub truncated: bool,
    /// Last tick used.
    pub ticks: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("probe origin `{0}` is not a host")]
    InvalidOrigin(String),
    #[error("host `{0}` has no link")]
    Isolated(String),
    #[error(transparent)]
    Forwarding(#[from] ForwardingError),
}

/// Maximum number of directed edges any single copy may traverse: `|V|(|V|-1)`.
pub fn hop_limit(d: &DataPlane) -> usize {
    let v = d.node_count();
    v * v.saturating_sub(1)
}

struct Arrival {
    switch: NodeId,
    in_port: Port,
    path: Vec<(NodeId, NodeId)>,
}

fn first_hop(d: &DataPlane, origin: NodeId) -> Result<Arrival, SimError> {
    if !d.is_host(origin) {
        return Err(SimError::InvalidOrigin(d.name(origin).into()));
    }
    let (_, switch, in_port) = d
        .host_uplink(origin)
        .ok_or_else(|| SimError::Isolated(d.name(origin).into()))?;
    Ok(Arrival {
        switch,
        in_port,
        path: alloc::vec![(origin, switch)],
    })
}

pub fn simulate(d: &DataPlane, cfg: &DataPlaneConfig, p: &Probe) -> Result<SimResult, SimError> {
    simulate_with_budget(d, cfg, p, DEFAULT_EVENT_BUDGET)
}

pub fn simulate_with_budget(
    d: &DataPlane,
    cfg: &DataPlaneConfig,
    p: &Probe,
    budget: usize,
) -> Result<SimResult, SimError> {
    let limit = hop_limit(d);
    let mut queue = VecDeque::new();
    queue.push_back(first_hop(d, p.origin)?);

    let mut log = Vec::new();
    let mut truth = BTreeSet::new();
    let mut forwarded = alloc::vec![false; d.node_count()];
    let mut loop_hit = false;
    let mut truncated = false;
    let mut tick = 0u64;

    'run: while let Some(a) = queue.pop_front() {
        if log.len() >= budget {
            truncated = true;
            break;
        }
        tick += 1;
        log.push(Observation::new(a.switch, a.in_port, tick, p.uid.as_str()));

        if cfg.forward_once() && forwarded[a.switch.index()] {
            truth.insert(DataPath::new(a.path));
            continue;
        }
        forwarded[a.switch.index()] = true;

        let outcome = cfg.lookup(a.switch, a.in_port, &p.header)?;
        if outcome.ports().is_empty() {
            truth.insert(DataPath::new(a.path));
            continue;
        }
        for &port in outcome.ports() {
            if a.path.len() + 1 > limit {
                loop_hit = true;
                continue;
            }
            if log.len() >= budget {
                truncated = true;
                break 'run;
            }
            let (next, next_port) = d.peer(a.switch, port).expect("ports come from the table");
            tick += 1;
            log.push(Observation::new(a.switch, port, tick, p.uid.as_str()));
            let edge = (a.switch, next);
            if a.path.contains(&edge) {
                loop_hit = true;
            }
            let mut path = a.path.clone();
            path.push(edge);
            if d.is_host(next) {
                truth.insert(DataPath::new(path));
            } else {
                queue.push_back(Arrival {
                    switch: next,
                    in_port: next_port,
                    path,
                });
            }
        }
    }

    Ok(SimResult {
        log: ObservationLog::from_entries(d, log),
        truth,
        loop_hit,
        truncated,
        ticks: tick,
    })
}

/// Ground truth from expanding the forwarding function alone, with no notion of time.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GroundTruth {
    /// Every finite data-path.
    pub paths: BTreeSet<DataPath>,
    /// Directed edges that repeat within some branch. Non-empty means a forwarding loop.
    pub loops: BTreeSet<(NodeId, NodeId)>,
    /// The expansion budget ran out.
    pub truncated: bool,
}

impl GroundTruth {
    pub fn has_loop(&self) -> bool {
        !self.loops.is_empty()
    }
}

/// Branch expansions after which [`ground_truth_paths`] gives up.
pub const GROUND_TRUTH_BUDGET: usize = 1_000_000;

/// Depth-first expansion of the forwarding function from `(h, hdr)`.
///
/// Each branch ends at a host, at a drop, or at the first directed edge it repeats. With a
/// forward-once configuration the expansion follows arrival order instead, since whether a
/// switch forwards depends on which copy reaches it first.
pub fn ground_truth_paths(
    d: &DataPlane,
    cfg: &DataPlaneConfig,
    h: NodeId,
    hdr: &HeaderValue,
) -> Result<GroundTruth, SimError> {
    let start = first_hop(d, h)?;
    if cfg.forward_once() {
        return forward_once_truth(d, cfg, start, hdr);
    }
    let mut out = GroundTruth::default();
    let mut stack = alloc::vec![start];
    let mut expansions = 0usize;
    while let Some(a) = stack.pop() {
        expansions += 1;
        if expansions > GROUND_TRUTH_BUDGET {
            out.truncated = true;
            break;
        }
        let outcome = cfg.lookup(a.switch, a.in_port, hdr)?;
        if outcome.ports().is_empty() {
            out.paths.insert(DataPath::new(a.path));
            continue;
        }
        // reversed so that lower ports are expanded first
        for &port in outcome.ports().iter().rev() {
            let (next, next_port) = d.peer(a.switch, port).expect("ports come from the table");
            let edge = (a.switch, next);
            if a.path.contains(&edge) {
                out.loops.insert(edge);
                continue;
            }
            let mut path = a.path.clone();
            path.push(edge);
            if d.is_host(next) {
                out.paths.insert(DataPath::new(path));
            } else {
                stack.push(Arrival {
                    switch: next,
                    in_port: next_port,
                    path,
                });
            }
        }
    }
    Ok(out)
}

fn forward_once_truth(
    d: &DataPlane,
    cfg: &DataPlaneConfig,
    start: Arrival,
    hdr: &HeaderValue,
) -> Result<GroundTruth, SimError> {
    let mut out = GroundTruth::default();
    let mut forwarded = alloc::vec![false; d.node_count()];
    let mut queue = VecDeque::from([start]);
    while let Some(a) = queue.pop_front() {
        if forwarded[a.switch.index()] {
            out.paths.insert(DataPath::new(a.path));
            continue;
        }
        forwarded[a.switch.index()] = true;
        let outcome = cfg.lookup(a.switch, a.in_port, hdr)?;
        if outcome.ports().is_empty() {
            out.paths.insert(DataPath::new(a.path));
            continue;
        }
        for &port in outcome.ports() {
            let (next, next_port) = d.peer(a.switch, port).expect("ports come from the table");
            let mut path = a.path.clone();
            path.push((a.switch, next));
            if d.is_host(next) {
                out.paths.insert(DataPath::new(path));
            } else {
                queue.push_back(Arrival {
                    switch: next,
                    in_port: next_port,
                    path,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forwarding::{flood_config, FlowRule};
    use crate::headers::{HeaderSchema, TrafficType};
    use crate::samples::{four_switch_plane, ring_config, solid_path_config};
    use alloc::vec;

    fn probe(d: &DataPlane, host: &str, port: u128) -> Probe {
        Probe {
            uid: "p".into(),
            origin: d.lookup(host).unwrap(),
            header: HeaderValue::from_fields(&HeaderSchema::default_schema(), [("dstTCP", port)])
                .unwrap(),
        }
    }

    fn triples(d: &DataPlane, log: &ObservationLog) -> Vec<(String, Port, u64)> {
        log.iter()
            .map(|o| (d.name(o.node).into(), o.iface, o.t))
            .collect()
    }

    #[test]
    fn solid_path_log() {
        let d = four_switch_plane();
        let cfg = solid_path_config(&d, &HeaderSchema::default_schema());
        let r = simulate(&d, &cfg, &probe(&d, "h1", 80)).unwrap();
        assert_eq!(
            triples(&d, &r.log),
            vec![
                ("s1".into(), 1, 1),
                ("s1".into(), 2, 2),
                ("s2".into(), 2, 3),
                ("s2".into(), 1, 4)
            ]
        );
        assert!(!r.loop_hit && !r.truncated);
        assert_eq!(r.truth.len(), 1);
        let path = r.truth.iter().next().unwrap();
        assert_eq!(path.render(&d), "(h1,s1)(s1,s2)(s2,h2)");
        let gt = ground_truth_paths(
            &d,
            &cfg,
            d.lookup("h1").unwrap(),
            &probe(&d, "h1", 80).header,
        )
        .unwrap();
        assert_eq!(gt.paths, r.truth);
        assert!(!gt.has_loop());
    }

    #[test]
    fn drop_at_first_switch() {
        let d = four_switch_plane();
        let cfg = solid_path_config(&d, &HeaderSchema::default_schema());
        let r = simulate(&d, &cfg, &probe(&d, "h1", 443)).unwrap();
        assert_eq!(triples(&d, &r.log), vec![("s1".into(), 1, 1)]);
        assert_eq!(r.truth.len(), 1);
        assert_eq!(r.truth.iter().next().unwrap().len(), 1);
    }

    #[test]
    fn ring_hits_the_hop_limit() {
        let d = four_switch_plane();
        let cfg = ring_config(&d, &HeaderSchema::default_schema());
        let r = simulate(&d, &cfg, &probe(&d, "h1", 7)).unwrap();
        assert!(r.loop_hit);
        assert!(r.truth.is_empty());
        // one ingress and one egress per hop, the first hop comes from the host
        assert_eq!(r.log.len(), 2 * hop_limit(&d) - 1);
        let gt = ground_truth_paths(
            &d,
            &cfg,
            d.lookup("h1").unwrap(),
            &probe(&d, "h1", 7).header,
        )
        .unwrap();
        assert!(gt.has_loop());
        assert!(gt.paths.is_empty());
    }

    #[test]
    fn flooding_matches_bfs_truth() {
        let d = four_switch_plane();
        let schema = HeaderSchema::default_schema();
        let cfg = flood_config(&d, &schema);
        let p = probe(&d, "h1", 22);
        let r = simulate(&d, &cfg, &p).unwrap();
        assert_eq!(r.log.len(), 18);
        assert!(!r.loop_hit);
        let gt = ground_truth_paths(&d, &cfg, p.origin, &p.header).unwrap();
        assert_eq!(gt.paths, r.truth);
        let delivered = r
            .truth
            .iter()
            .filter(|p| d.is_host(p.edges.last().unwrap().1))
            .count();
        assert_eq!(delivered, 3);
    }

    #[test]
    fn cloning_serializes_by_port() {
        let d = four_switch_plane();
        let schema = HeaderSchema::default_schema();
        let mut cfg = DataPlaneConfig::empty(&d);
        let any = TrafficType::any(&schema);
        let id = |n| d.lookup(n).unwrap();
        cfg.install(id("s1"), FlowRule::output(1, None, any.clone(), [3, 2]))
            .unwrap();
        cfg.install(id("s2"), FlowRule::output(1, None, any.clone(), [1]))
            .unwrap();
        cfg.install(id("s3"), FlowRule::output(1, None, any, [1]))
            .unwrap();
        let r = simulate(&d, &cfg, &probe(&d, "h1", 1)).unwrap();
        assert_eq!(
            triples(&d, &r.log),
            vec![
                ("s1".into(), 1, 1),
                ("s1".into(), 2, 2),
                ("s1".into(), 3, 3),
                ("s2".into(), 2, 4),
                ("s2".into(), 1, 5),
                ("s3".into(), 2, 6),
                ("s3".into(), 1, 7)
            ]
        );
        assert_eq!(r.truth.len(), 2);
    }

    #[test]
    fn origin_must_be_a_host() {
        let d = four_switch_plane();
        let cfg = DataPlaneConfig::empty(&d);
        let mut p = probe(&d, "h1", 1);
        p.origin = d.lookup("s1").unwrap();
        assert_eq!(
            simulate(&d, &cfg, &p),
            Err(SimError::InvalidOrigin("s1".into()))
        );
    }

    #[test]
    fn budget_truncates() {
        let d = four_switch_plane();
        let cfg = ring_config(&d, &HeaderSchema::default_schema());
        let r = simulate_with_budget(&d, &cfg, &probe(&d, "h1", 7), 10).unwrap();
        assert!(r.truncated);
        assert_eq!(r.log.len(), 10);
    }

    #[test]
    fn deterministic() {
        let d = four_switch_plane();
        let cfg = flood_config(&d, &HeaderSchema::default_schema());
        let p = probe(&d, "h3", 22);
        assert_eq!(
            simulate(&d, &cfg, &p).unwrap(),
            simulate(&d, &cfg, &p).unwrap()
        );
    }
}
