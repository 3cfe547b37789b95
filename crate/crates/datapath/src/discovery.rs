//! The discovery pipeline: build a test suite for the request, obtain the observations of
//! every probe by simulation or from an ingested log, and reconstruct one flow tree per probe.

use std::collections::BTreeMap;
use std::time::Instant;

use datapath_core::analyzer::{
    analyze, extract_paths, group_by_uid, AnalysisError, AnalyzerOptions,
};
use datapath_core::forwarding::DataPlaneConfig;
use datapath_core::simulator::{simulate, ObservationLog, Probe};
use datapath_core::testgen::{suite_for_header, suite_for_type_from, TestCase};
use datapath_core::topology::{DataPlane, NodeId};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::formats::{
    header_from_filter, header_from_json, header_to_json, traffic_type, CaseRecord, FlowTreeDoc,
    ObservationRecord, Topology,
};
use crate::Error;

/// What to probe. Exactly one of `header`, `traffic_type` and `cases` must be given.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscoveryRequest {
    /// Source hosts; empty selects every host.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sources: Vec<String>,
    /// One header, as filter text with unlisted fields zero or as a field object.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub header: Option<Value>,
    /// Every header of a traffic type, in filter syntax.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traffic_type: Option<String>,
    /// Explicit test cases, typically a suite exported earlier.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cases: Option<Vec<CaseRecord>>,
    /// Upper bound on the number of probes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<u64>,
    /// Drop the global arrival-order and clone-order assumptions, for logs from real networks.
    #[serde(default)]
    pub relaxed: bool,
    /// Only check the request and count its probes; the service answers without probing.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub dry_run: bool,
    #[serde(default)]
    pub backend: BackendSpec,
}

/// Backend selection inside an HTTP request body.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum BackendSpec {
    /// Simulate probes over the loaded rules.
    #[default]
    Simulate,
    /// Analyze an observation log given inline as JSON lines.
    Log { observations: String },
}

/// Source of observations for a [`discover`] run.
#[derive(Debug, Clone, Copy)]
pub enum Backend<'a> {
    Simulate(&'a DataPlaneConfig),
    Log(&'a ObservationLog),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Loop,
    Disconnected,
    NoObservations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub message: String,
    /// The repeating directed edge of a loop.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<[String; 2]>,
    /// The observation the analysis stopped at.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<ObservationRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub observations: usize,
    /// First and last observation time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub span: Option<[u64; 2]>,
    pub analysis_us: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimSummary {
    pub ticks: u64,
    pub loop_hit: bool,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryEntry {
    pub uid: String,
    pub host: String,
    pub header: Value,
    pub status: Status,
    /// The flow tree, or the partial tree built before a loop or disconnection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<FlowTreeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorReport>,
    /// Rendered data-paths, empty unless the analysis succeeded.
    pub paths: Vec<String>,
    pub timing: Timing,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<SimSummary>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryResult {
    pub entries: Vec<DiscoveryEntry>,
}

impl DiscoveryResult {
    pub fn has_failures(&self) -> bool {
        self.entries.iter().any(|e| e.status != Status::Ok)
    }

    /// Copy with UIDs and durations blanked, for comparing runs.
    pub fn without_volatile(&self) -> Self {
        let mut r = self.clone();
        for e in &mut r.entries {
            e.uid.clear();
            e.timing.analysis_us = 0;
            if let Some(at) = e.error.as_mut().and_then(|x| x.at.as_mut()) {
                at.uid.clear();
            }
        }
        r
    }
}

/// UID of a test case on the log backend, stable across runs so that probes injected by an
/// external tool can be matched with the suite they came from.
pub fn derived_uid(d: &DataPlane, case: &TestCase) -> String {
    let digest = Sha256::digest(format!("{}|{}", d.name(case.host), case.header.to_hex()));
    digest[..16].iter().map(|b| format!("{b:02x}")).collect()
}

pub fn random_uid() -> String {
    format!("{:032x}", rand::random::<u128>())
}

fn sources(topo: &Topology, names: &[String]) -> Result<Vec<NodeId>, Error> {
    if names.is_empty() {
        return Ok(topo.plane.hosts().collect());
    }
    let mut hosts = names
        .iter()
        .map(|n| topo.host(n))
        .collect::<Result<Vec<_>, _>>()?;
    hosts.sort();
    hosts.dedup();
    Ok(hosts)
}

/// The test cases of a request, with any UID the request fixes.
pub fn plan(
    topo: &Topology,
    req: &DiscoveryRequest,
    enumeration_limit: u32,
) -> Result<Vec<(TestCase, Option<String>)>, Error> {
    let hosts = sources(topo, &req.sources)?;
    let given = [
        req.header.is_some(),
        req.traffic_type.is_some(),
        req.cases.is_some(),
    ];
    if given.iter().filter(|g| **g).count() != 1 {
        return Err(Error::Request(
            "give exactly one of `header`, `traffic_type` or `cases`".into(),
        ));
    }
    let cap = req
        .cap
        .map_or(usize::MAX, |c| usize::try_from(c).unwrap_or(usize::MAX));
    let planned: Vec<(TestCase, Option<String>)> = if let Some(h) = &req.header {
        let header = match h {
            Value::String(s) => header_from_filter(&topo.schema, s)?,
            v => header_from_json(&topo.schema, v)?,
        };
        suite_for_header(&topo.plane, &header)
            .into_iter()
            .filter(|c| hosts.contains(&c.host))
            .take(cap)
            .map(|c| (c, None))
            .collect()
    } else if let Some(t) = &req.traffic_type {
        let t = traffic_type(&topo.schema, t)?;
        suite_for_type_from(&topo.plane, hosts, &t, enumeration_limit, req.cap)?
            .map(|c| (c, None))
            .collect()
    } else {
        let mut out = Vec::new();
        for rec in req.cases.iter().flatten() {
            let case = rec.resolve(topo)?;
            if hosts.contains(&case.host) && out.len() < cap {
                out.push((case, rec.uid.clone()));
            }
        }
        out
    };
    Ok(planned)
}

/// Runs every test case of `req` against `backend`.
///
/// Input problems (unknown hosts, malformed headers, suites over the enumeration limit) fail
/// the whole request. Loops, disconnections and probes without observations are reported per
/// entry.
pub fn discover(
    topo: &Topology,
    req: &DiscoveryRequest,
    backend: Backend<'_>,
    enumeration_limit: u32,
) -> Result<DiscoveryResult, Error> {
    let d = &topo.plane;
    let opts = if req.relaxed {
        AnalyzerOptions::relaxed()
    } else {
        AnalyzerOptions::default()
    };
    let groups: BTreeMap<String, ObservationLog> = match backend {
        Backend::Log(log) => group_by_uid(log),
        Backend::Simulate(_) => BTreeMap::new(),
    };
    let mut entries = Vec::new();
    for (case, fixed_uid) in plan(topo, req, enumeration_limit)? {
        let uid = fixed_uid.unwrap_or_else(|| match backend {
            Backend::Simulate(_) => random_uid(),
            Backend::Log(_) => derived_uid(d, &case),
        });
        let (log, simulation) = match backend {
            Backend::Simulate(cfg) => {
                let probe = Probe {
                    uid: uid.clone(),
                    origin: case.host,
                    header: case.header.clone(),
                };
                let r = simulate(d, cfg, &probe)?;
                let summary = SimSummary {
                    ticks: r.ticks,
                    loop_hit: r.loop_hit,
                    truncated: r.truncated,
                };
                (r.log, Some(summary))
            }
            Backend::Log(_) => (groups.get(&uid).cloned().unwrap_or_default(), None),
        };
        let started = Instant::now();
        let outcome = analyze(d, case.host, &log, opts);
        let analysis_us = started.elapsed().as_micros() as u64;
        let timing = Timing {
            observations: log.len(),
            span: log.span().map(|(a, b)| [a, b]),
            analysis_us,
        };
        let record = |o: &datapath_core::Observation| ObservationRecord {
            uid: o.uid.clone(),
            node: d.name(o.node).to_owned(),
            iface: o.iface,
            t: o.t,
        };
        let (status, tree, error, paths) = match outcome {
            Ok(a) => {
                let paths = extract_paths(&a.tree).iter().map(|p| p.render(d)).collect();
                (
                    Status::Ok,
                    Some(FlowTreeDoc::from_tree(d, &a.tree)),
                    None,
                    paths,
                )
            }
            Err(e) => {
                let (status, message, edge, at) = match &e {
                    AnalysisError::Loop { edge, at, .. } => {
                        let (a, b) = (d.name(edge.0).to_owned(), d.name(edge.1).to_owned());
                        let message =
                            format!("loop: directed edge ({a}, {b}) repeats on one branch");
                        (Status::Loop, message, Some([a, b]), Some(record(at)))
                    }
                    AnalysisError::Disconnected { at, .. } => {
                        let message = format!(
                            "disconnected data-path at observation ({}, {}, {})",
                            d.name(at.node),
                            at.iface,
                            at.t
                        );
                        (Status::Disconnected, message, None, Some(record(at)))
                    }
                    AnalysisError::NoObservations => (
                        Status::NoObservations,
                        "no observations for this probe".to_owned(),
                        None,
                        None,
                    ),
                    AnalysisError::UnknownInterface { .. } | AnalysisError::OriginNotAHost => {
                        return Err(Error::Request(e.to_string()))
                    }
                };
                let tree = e.partial_tree().map(|t| FlowTreeDoc::from_tree(d, t));
                (
                    status,
                    tree,
                    Some(ErrorReport { message, edge, at }),
                    Vec::new(),
                )
            }
        };
        entries.push(DiscoveryEntry {
            uid,
            host: d.name(case.host).to_owned(),
            header: header_to_json(&case.header),
            status,
            tree,
            error,
            paths,
            timing,
            simulation,
        });
    }
    Ok(DiscoveryResult { entries })
}
