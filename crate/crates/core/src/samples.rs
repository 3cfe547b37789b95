//! Reference data-planes and configurations, plus random generators for property tests.

use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::forwarding::{DataPlaneConfig, FlowRule};
use crate::headers::{HeaderSchema, TrafficType};
use crate::simulator::{Observation, ObservationLog};
use crate::topology::{DataPlane, Port};

/// Four hosts on four switches, fully meshed except between s1 and s4.
///
/// ```text
/// h1-s1(1,1)  h2-s2(1,1)  h3-s3(1,1)  h4-s4(1,1)
/// s1-s2(2,2)  s1-s3(3,2)  s2-s3(3,3)  s2-s4(4,2)  s3-s4(4,3)
/// ```
pub fn four_switch_plane() -> DataPlane {
    let mut b = DataPlane::builder();
    for h in ["h1", "h2", "h3", "h4"] {
        b.host(h);
    }
    for s in ["s1", "s2", "s3", "s4"] {
        b.switch(s);
    }
    let links: [(&str, Port, &str, Port); 9] = [
        ("h1", 1, "s1", 1),
        ("h2", 1, "s2", 1),
        ("h3", 1, "s3", 1),
        ("h4", 1, "s4", 1),
        ("s1", 2, "s2", 2),
        ("s1", 3, "s3", 2),
        ("s2", 3, "s3", 3),
        ("s2", 4, "s4", 2),
        ("s3", 4, "s4", 3),
    ];
    for (a, pa, z, pz) in links {
        b.link_named(a, pa, z, pz).expect("declared above");
    }
    b.build().expect("valid reference plane")
}

/// TCP port 80 travels h1 -> s1 -> s2 -> h2; everything else is dropped.
pub fn solid_path_config(d: &DataPlane, schema: &Arc<HeaderSchema>) -> DataPlaneConfig {
    let mut cfg = DataPlaneConfig::empty(d);
    let web = TrafficType::any(schema)
        .exact("dstTCP", 80)
        .expect("schema has dstTCP");
    let s1 = d.lookup("s1").expect("reference plane");
    let s2 = d.lookup("s2").expect("reference plane");
    cfg.install(s1, FlowRule::output(10, None, web.clone(), [2]))
        .expect("port exists");
    cfg.install(s2, FlowRule::output(10, None, web, [1]))
        .expect("port exists");
    cfg
}

/// Everything circles s1 -> s2 -> s3 -> s1.
pub fn ring_config(d: &DataPlane, schema: &Arc<HeaderSchema>) -> DataPlaneConfig {
    let mut cfg = DataPlaneConfig::empty(d);
    for (s, port) in [("s1", 2), ("s2", 3), ("s3", 2)] {
        let id = d.lookup(s).expect("reference plane");
        cfg.install(
            id,
            FlowRule::output(1, None, TrafficType::any(schema), [port]),
        )
        .expect("port exists");
    }
    cfg
}

fn triples(d: &DataPlane, t: &[(&str, Port, u64)]) -> ObservationLog {
    ObservationLog::from_entries(
        d,
        t.iter()
            .map(|(n, p, t)| Observation::new(d.lookup(n).expect("reference plane"), *p, *t, "tc"))
            .collect(),
    )
}

/// `(s1,1,1) (s1,2,2) (s2,2,3) (s2,1,4)`.
pub fn solid_path_log(d: &DataPlane) -> ObservationLog {
    triples(d, &[("s1", 1, 1), ("s1", 2, 2), ("s2", 2, 3), ("s2", 1, 4)])
}

/// A probe from h1 cloned at s1 toward s2 and s3, then delivered to h2 and h3.
pub fn cloned_probe_log(d: &DataPlane) -> ObservationLog {
    triples(
        d,
        &[
            ("s1", 1, 1),
            ("s1", 2, 2),
            ("s1", 3, 3),
            ("s2", 2, 4),
            ("s3", 2, 5),
            ("s2", 1, 6),
            ("s3", 1, 7),
        ],
    )
}

/// `h1 - s1 - s2 - ... - sN - h2` with every switch forwarding toward h2.
pub fn chain(switches: usize, schema: &Arc<HeaderSchema>) -> (DataPlane, DataPlaneConfig) {
    assert!(switches >= 1);
    let mut b = DataPlane::builder();
    let h1 = b.host("h1");
    let h2 = b.host("h2");
    let ids: Vec<_> = (1..=switches)
        .map(|i| b.switch(&alloc::format!("s{i}")))
        .collect();
    b.link(h1, 1, ids[0], 1);
    for w in ids.windows(2) {
        b.link(w[0], 2, w[1], 1);
    }
    b.link(ids[switches - 1], 2, h2, 1);
    let d = b.build().expect("chain is valid");
    let mut cfg = DataPlaneConfig::empty(&d);
    for s in ids {
        cfg.install(
            s,
            FlowRule::output(1, Some(1), TrafficType::any(schema), [2]),
        )
        .expect("port exists");
    }
    (d, cfg)
}

#[cfg(any(test, feature = "gen"))]
pub mod gen {
    //! Random valid data-planes, rule sets and headers.

    use super::*;
    use crate::forwarding::Action;
    use crate::headers::HeaderValue;
    use crate::simulator::{ground_truth_paths, GroundTruth};
    use crate::topology::NodeId;
    use alloc::collections::BTreeSet;
    use rand::seq::SliceRandom;
    use rand::Rng;

    /// Twelve bits in three fields: small enough to enumerate, wide enough for varied rules.
    pub fn schema() -> Arc<HeaderSchema> {
        HeaderSchema::new([("dst", 4), ("src", 4), ("svc", 4)]).expect("static schema")
    }

    /// A valid data-plane with a host and switch count drawn from the given inclusive ranges.
    pub fn plane<R: Rng>(
        rng: &mut R,
        hosts: (usize, usize),
        switches: (usize, usize),
    ) -> DataPlane {
        loop {
            let nh = rng.gen_range(hosts.0..=hosts.1);
            let ns = rng.gen_range(switches.0..=switches.1);
            if let Some(d) = try_plane(rng, nh, ns) {
                return d;
            }
        }
    }

    fn try_plane<R: Rng>(rng: &mut R, nh: usize, ns: usize) -> Option<DataPlane> {
        let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
        // random spanning tree over switches
        let mut order: Vec<usize> = (0..ns).collect();
        order.shuffle(rng);
        for i in 1..ns {
            let j = rng.gen_range(0..i);
            let (a, b) = (order[i], order[j]);
            pairs.insert((a.min(b), a.max(b)));
        }
        // extra switch links
        if ns >= 3 {
            let extra = rng.gen_range(0..=ns);
            for _ in 0..extra {
                let a = rng.gen_range(0..ns);
                let b = rng.gen_range(0..ns);
                if a != b {
                    pairs.insert((a.min(b), a.max(b)));
                }
            }
        }
        let mut degree = alloc::vec![0usize; ns];
        for (a, b) in &pairs {
            degree[*a] += 1;
            degree[*b] += 1;
        }
        // hosts go to under-connected switches first
        let mut host_at = Vec::with_capacity(nh);
        for _ in 0..nh {
            let needy: Vec<usize> = (0..ns).filter(|s| degree[*s] < 2).collect();
            let s = if needy.is_empty() {
                rng.gen_range(0..ns)
            } else {
                needy[rng.gen_range(0..needy.len())]
            };
            degree[s] += 1;
            host_at.push(s);
        }
        // remaining degree deficits get switch links where possible
        for s in 0..ns {
            while degree[s] < 2 {
                let options: Vec<usize> = (0..ns)
                    .filter(|o| *o != s && !pairs.contains(&(s.min(*o), s.max(*o))))
                    .collect();
                let o = *options.get(rng.gen_range(0..options.len().max(1)))?;
                pairs.insert((s.min(o), s.max(o)));
                degree[s] += 1;
                degree[o] += 1;
            }
        }

        let mut b = DataPlane::builder();
        let hs: Vec<NodeId> = (1..=nh).map(|i| b.host(&alloc::format!("h{i}"))).collect();
        let ss: Vec<NodeId> = (1..=ns)
            .map(|i| b.switch(&alloc::format!("s{i}")))
            .collect();
        let mut links: Vec<(NodeId, NodeId)> = hs
            .iter()
            .zip(&host_at)
            .map(|(h, s)| (*h, ss[*s]))
            .chain(pairs.iter().map(|(a, z)| (ss[*a], ss[*z])))
            .collect();
        links.shuffle(rng);
        let mut next_port = alloc::vec![1 as Port; nh + ns];
        for (a, z) in links {
            let pa = next_port[a.index()];
            let pz = next_port[z.index()];
            next_port[a.index()] += 1;
            next_port[z.index()] += 1;
            b.link(a, pa, z, pz);
        }
        b.build().ok()
    }

    pub fn header<R: Rng>(rng: &mut R, schema: &Arc<HeaderSchema>) -> HeaderValue {
        let mut h = HeaderValue::zeroed(schema);
        for f in schema.fields() {
            let max = if f.width >= 64 {
                u64::MAX
            } else {
                (1u64 << f.width) - 1
            };
            h.set_field(&f.name, rng.gen_range(0..=max) as u128)
                .expect("value fits");
        }
        h
    }

    fn traffic_type<R: Rng>(rng: &mut R, schema: &Arc<HeaderSchema>) -> TrafficType {
        let mut t = TrafficType::any(schema);
        if rng.gen_bool(0.6) {
            let f = &schema.fields()[rng.gen_range(0..schema.fields().len())];
            let max = (1u128 << f.width) - 1;
            let value = rng.gen_range(0..=max);
            let prefix = rng.gen_range(1..=f.width);
            t = t.prefix(&f.name, value, prefix).expect("field exists");
        }
        t
    }

    /// Random rules on every switch: prefix matches, optional ingress-port matches, drops and
    /// multi-port outputs.
    pub fn config<R: Rng>(
        rng: &mut R,
        d: &DataPlane,
        schema: &Arc<HeaderSchema>,
    ) -> DataPlaneConfig {
        let mut cfg = DataPlaneConfig::empty(d);
        let switches: Vec<NodeId> = d.switches().collect();
        for s in switches {
            let ports = d.ports(s);
            let n = rng.gen_range(0..=3);
            for _ in 0..n {
                let priority = rng.gen_range(0..4);
                let in_port = rng
                    .gen_bool(0.3)
                    .then(|| ports[rng.gen_range(0..ports.len())]);
                let header = traffic_type(rng, schema);
                let action = if rng.gen_bool(0.15) {
                    Action::Drop
                } else {
                    let k = match rng.gen_range(0..10) {
                        0..=6 => 1,
                        7..=8 => 2,
                        _ => 3,
                    }
                    .min(ports.len());
                    Action::Output(ports.choose_multiple(rng, k).copied().collect())
                };
                cfg.install(
                    s,
                    FlowRule {
                        priority,
                        matcher: crate::forwarding::Match { in_port, header },
                        action,
                    },
                )
                .expect("ports come from the switch");
            }
        }
        cfg
    }

    /// A probe scenario together with its ground truth.
    #[derive(Debug, Clone)]
    pub struct Trial {
        pub plane: DataPlane,
        pub config: DataPlaneConfig,
        pub origin: NodeId,
        pub header: HeaderValue,
        pub truth: GroundTruth,
    }

    fn trial<R: Rng>(
        rng: &mut R,
        hosts: (usize, usize),
        switches: (usize, usize),
        want_loop: bool,
    ) -> Trial {
        let schema = schema();
        loop {
            let plane = plane(rng, hosts, switches);
            let config = config(rng, &plane, &schema);
            let hs: Vec<NodeId> = plane.hosts().collect();
            let origin = hs[rng.gen_range(0..hs.len())];
            let header = header(rng, &schema);
            let truth = ground_truth_paths(&plane, &config, origin, &header).expect("valid probe");
            if truth.truncated || truth.has_loop() != want_loop {
                continue;
            }
            return Trial {
                plane,
                config,
                origin,
                header,
                truth,
            };
        }
    }

    /// A scenario whose probe never revisits a directed edge.
    pub fn loop_free_trial<R: Rng>(
        rng: &mut R,
        hosts: (usize, usize),
        switches: (usize, usize),
    ) -> Trial {
        trial(rng, hosts, switches, false)
    }

    /// A scenario whose probe enters a forwarding cycle.
    pub fn looping_trial<R: Rng>(
        rng: &mut R,
        hosts: (usize, usize),
        switches: (usize, usize),
    ) -> Trial {
        trial(rng, hosts, switches, true)
    }
}
