//! On-disk and on-the-wire documents.
//!
//! | document     | shape                                                        | encodings   |
//! |--------------|--------------------------------------------------------------|-------------|
//! | topology     | `hosts`, `switches`, `[[links]] a/port_a/b/port_b`, `[[fields]]` | TOML, JSON  |
//! | rules        | `flood`, `forward_once`, `[[rules]] switch/priority/in_port/match/action` | TOML, JSON |
//! | observations | one `{uid, node, iface, t}` object per line                  | JSON lines  |
//! | flow tree    | `{label, te, ti, port, children}` nested                     | JSON        |
//! | suite        | one `{host, header, uid}` object per line                    | JSON lines  |
//!
//! Headers are written as an object mapping every schema field, in schema order, to its value.

use std::path::Path;
use std::sync::Arc;

use datapath_core::analyzer::FlowTree;
use datapath_core::forwarding::{flood_config, Action, DataPlaneConfig, FlowRule, Match};
use datapath_core::headers::{parse_filter, HeaderSchema, HeaderValue, TrafficType};
use datapath_core::simulator::{Observation, ObservationLog};
use datapath_core::testgen::TestCase;
use datapath_core::topology::{DataPlane, Port, TopologyError};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::Error;

/// Text encoding of a structured document.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    Json,
    Toml,
}

impl Encoding {
    /// `.toml` files are TOML, everything else JSON.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Encoding::Toml,
            _ => Encoding::Json,
        }
    }

    pub fn decode<T: for<'de> Deserialize<'de>>(self, text: &str) -> Result<T, Error> {
        match self {
            Encoding::Json => serde_json::from_str(text).map_err(|e| Error::Syntax(e.to_string())),
            Encoding::Toml => toml::from_str(text).map_err(|e| Error::Syntax(e.to_string())),
        }
    }
}

pub fn read_text(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_doc<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Error> {
    Encoding::for_path(path)
        .decode(&read_text(path)?)
        .map_err(|e| e.in_file(path))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDoc {
    pub hosts: Vec<String>,
    pub switches: Vec<String>,
    #[serde(default)]
    pub links: Vec<LinkDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldDoc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDoc {
    pub a: String,
    pub port_a: Port,
    pub b: String,
    pub port_b: Port,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldDoc {
    pub name: String,
    pub width: u32,
}

/// A validated data-plane together with the header schema its probes use.
#[derive(Debug, Clone)]
pub struct Topology {
    pub plane: DataPlane,
    pub schema: Arc<HeaderSchema>,
    pub doc: TopologyDoc,
}

impl Topology {
    pub fn from_doc(doc: TopologyDoc) -> Result<Self, Error> {
        let schema = if doc.fields.is_empty() {
            HeaderSchema::default_schema()
        } else {
            HeaderSchema::new(doc.fields.iter().map(|f| (f.name.as_str(), f.width)))?
        };
        let mut b = DataPlane::builder();
        for h in &doc.hosts {
            b.host(h);
        }
        for s in &doc.switches {
            b.switch(s);
        }
        for l in &doc.links {
            b.link_named(&l.a, l.port_a, &l.b, l.port_b)?;
        }
        let plane = b.build()?;
        Ok(Self { plane, schema, doc })
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        Self::from_doc(read_doc(path)?).map_err(|e| e.in_file(path))
    }

    pub fn from_plane(plane: DataPlane, schema: Arc<HeaderSchema>) -> Self {
        let names =
            |it: &mut dyn Iterator<Item = _>| it.map(|n| plane.name(n).to_owned()).collect();
        let doc = TopologyDoc {
            hosts: names(&mut plane.hosts()),
            switches: names(&mut plane.switches()),
            links: plane
                .links()
                .iter()
                .map(|l| LinkDoc {
                    a: plane.name(l.a.0).to_owned(),
                    port_a: l.a.1,
                    b: plane.name(l.b.0).to_owned(),
                    port_b: l.b.1,
                })
                .collect(),
            fields: if schema == HeaderSchema::default_schema() {
                Vec::new()
            } else {
                schema
                    .fields()
                    .iter()
                    .map(|f| FieldDoc {
                        name: f.name.clone(),
                        width: f.width,
                    })
                    .collect()
            },
        };
        Self { plane, schema, doc }
    }

    pub fn host(&self, name: &str) -> Result<datapath_core::NodeId, Error> {
        match self.plane.lookup(name) {
            Some(n) if self.plane.is_host(n) => Ok(n),
            _ => Err(Error::UnknownHost(name.to_owned())),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RulesDoc {
    /// Start from the flooding configuration; listed rules are added on top.
    #[serde(default, skip_serializing_if = "is_false")]
    pub flood: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    pub forward_once: bool,
    #[serde(default)]
    pub rules: Vec<RuleDoc>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleDoc {
    pub switch: String,
    #[serde(default)]
    pub priority: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub in_port: Option<Port>,
    /// Filter syntax; empty matches every header.
    #[serde(default, rename = "match")]
    pub filter: String,
    /// `drop` or `output:P[,P...]`.
    pub action: String,
}

/// A compiled rules document.
#[derive(Debug, Clone)]
pub struct Rules {
    pub config: DataPlaneConfig,
    pub doc: RulesDoc,
}

impl Rules {
    pub fn compile(topo: &Topology, doc: RulesDoc) -> Result<Self, Error> {
        let d = &topo.plane;
        let mut cfg = if doc.flood {
            flood_config(d, &topo.schema)
        } else {
            DataPlaneConfig::empty(d)
        };
        if doc.forward_once {
            cfg.set_forward_once(true);
        }
        for (i, r) in doc.rules.iter().enumerate() {
            let fail = |message: String| Error::Rule {
                index: i + 1,
                switch: r.switch.clone(),
                message,
            };
            let s = d
                .lookup(&r.switch)
                .filter(|s| d.is_switch(*s))
                .ok_or_else(|| fail("not a switch of the topology".into()))?;
            let header = parse_filter(&topo.schema, &r.filter).map_err(|e| fail(e.to_string()))?;
            let action = parse_action(&r.action).map_err(fail)?;
            let rule = FlowRule {
                priority: r.priority,
                matcher: Match {
                    in_port: r.in_port,
                    header,
                },
                action,
            };
            cfg.install(s, rule).map_err(|e| fail(e.to_string()))?;
        }
        Ok(Self { config: cfg, doc })
    }

    pub fn load(topo: &Topology, path: &Path) -> Result<Self, Error> {
        Self::compile(topo, read_doc(path)?).map_err(|e| e.in_file(path))
    }
}

fn parse_action(text: &str) -> Result<Action, String> {
    let t = text.trim();
    if t.eq_ignore_ascii_case("drop") {
        return Ok(Action::Drop);
    }
    let ports = t
        .strip_prefix("output:")
        .ok_or_else(|| format!("action `{t}` is neither `drop` nor `output:P,...`"))?;
    let ports = ports
        .split(',')
        .map(|p| {
            p.trim()
                .parse::<Port>()
                .map_err(|_| format!("invalid port `{}`", p.trim()))
        })
        .collect::<Result<_, _>>()?;
    Ok(Action::Output(ports))
}

/// Header as an ordered `field -> value` object. Values wider than 64 bits are hex strings.
pub fn header_to_json(h: &HeaderValue) -> Value {
    let mut m = Map::new();
    for (name, v) in h.fields() {
        let value = u64::try_from(v).map_or_else(|_| Value::String(format!("{v:#x}")), Value::from);
        m.insert(name.to_owned(), value);
    }
    Value::Object(m)
}

/// Inverse of [`header_to_json`]. Omitted fields are zero; string values use filter syntax
/// (decimal, `0x`, `0b`, dotted quad).
pub fn header_from_json(schema: &Arc<HeaderSchema>, v: &Value) -> Result<HeaderValue, Error> {
    let obj = v
        .as_object()
        .ok_or_else(|| Error::Syntax("header must be an object of field values".into()))?;
    let mut h = HeaderValue::zeroed(schema);
    for (name, value) in obj {
        let value = match value {
            Value::Number(n) => n.as_u64().map(u128::from).ok_or_else(|| {
                Error::Syntax(format!("field `{name}` must be a non-negative integer"))
            })?,
            Value::String(s) => {
                let t = parse_filter(schema, &format!("{name}={s}"))?;
                t.representative().field(name)?
            }
            _ => {
                return Err(Error::Syntax(format!(
                    "field `{name}` must be a number or string"
                )))
            }
        };
        h.set_field(name, value)?;
    }
    Ok(h)
}

/// Filter text given for a single header: listed fields take their values, the rest are zero.
pub fn header_from_filter(schema: &Arc<HeaderSchema>, text: &str) -> Result<HeaderValue, Error> {
    let t = parse_filter(schema, text)?;
    let pattern = t.constraints().iter().any(|c| {
        schema
            .field(&c.field)
            .is_ok_and(|f| f.max_value() != c.mask)
    });
    if pattern {
        return Err(Error::Request(format!(
            "`{text}` is a pattern, not a header; request it as a traffic type"
        )));
    }
    Ok(t.representative())
}

pub fn traffic_type(schema: &Arc<HeaderSchema>, text: &str) -> Result<TrafficType, Error> {
    Ok(parse_filter(schema, text)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationRecord {
    pub uid: String,
    pub node: String,
    pub iface: Port,
    pub t: u64,
}

pub fn write_log(d: &DataPlane, log: &ObservationLog) -> String {
    let mut out = String::new();
    for o in log {
        let rec = ObservationRecord {
            uid: o.uid.clone(),
            node: d.name(o.node).to_owned(),
            iface: o.iface,
            t: o.t,
        };
        out.push_str(&serde_json::to_string(&rec).expect("plain record"));
        out.push('\n');
    }
    out
}

/// Parses an observation JSON-lines document, rejecting records on interfaces the data-plane
/// does not have. Blank lines are skipped.
pub fn ingest_log(d: &DataPlane, text: &str) -> Result<ObservationLog, Error> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: ObservationRecord = serde_json::from_str(line).map_err(|e| Error::Line {
            line: line_no,
            message: e.to_string(),
        })?;
        let node = d
            .lookup(&rec.node)
            .filter(|n| d.is_switch(*n) && d.has_interface(*n, rec.iface))
            .ok_or_else(|| Error::Line {
                line: line_no,
                message: format!("unknown switch interface ({}, {})", rec.node, rec.iface),
            })?;
        entries.push(Observation::new(node, rec.iface, rec.t, rec.uid));
    }
    Ok(ObservationLog::from_entries(d, entries))
}

pub fn load_log(d: &DataPlane, path: &Path) -> Result<ObservationLog, Error> {
    ingest_log(d, &read_text(path)?).map_err(|e| e.in_file(path))
}

/// Exported flow tree node. The root carries neither `te` nor `port`; host leaves carry no `ti`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlowTreeDoc {
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub te: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ti: Option<u64>,
    /// Egress port at the parent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub port: Option<Port>,
    #[serde(default)]
    pub children: Vec<FlowTreeDoc>,
}

impl FlowTreeDoc {
    pub fn from_tree(d: &DataPlane, t: &FlowTree) -> Self {
        fn node(d: &DataPlane, t: &FlowTree, i: usize) -> FlowTreeDoc {
            let n = t.node(i);
            FlowTreeDoc {
                label: d.name(n.label()).to_owned(),
                te: n.te(),
                ti: n.ti(),
                port: n.egress_port(),
                children: n.children().iter().map(|c| node(d, t, *c)).collect(),
            }
        }
        node(d, t, FlowTree::ROOT)
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(Self::node_count).sum::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseRecord {
    pub host: String,
    pub header: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uid: Option<String>,
}

impl CaseRecord {
    pub fn new(d: &DataPlane, case: &TestCase, uid: Option<String>) -> Self {
        Self {
            host: d.name(case.host).to_owned(),
            header: header_to_json(&case.header),
            uid,
        }
    }

    pub fn resolve(&self, topo: &Topology) -> Result<TestCase, Error> {
        Ok(TestCase {
            host: topo.host(&self.host)?,
            header: header_from_json(&topo.schema, &self.header)?,
        })
    }
}

pub fn parse_suite(text: &str) -> Result<Vec<CaseRecord>, Error> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Line {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

impl From<TopologyError> for Error {
    fn from(e: TopologyError) -> Self {
        Error::Topology(e)
    }
}
