//! Data-path discovery for software-defined networks.
//!
//! A data-plane of hosts and switches ([`topology`]) is configured with prioritized flow
//! rules ([`forwarding`]) over bit-vector packet headers ([`headers`]). Probe packets injected
//! at hosts are traced through the data-plane ([`simulator`]), and the per-interface
//! observations they leave behind are turned back into a flow tree whose root-to-leaf paths
//! are the data-paths the probe took ([`analyzer`]). [`testgen`] builds the probe suites and
//! the worst-case bounds on path count and length.
//!
//! ```
//! use datapath_core::samples::{four_switch_plane, solid_path_config};
//! use datapath_core::{build_flow_tree, extract_paths, simulate, HeaderSchema, HeaderValue, Probe};
//!
//! let d = four_switch_plane();
//! let schema = HeaderSchema::default_schema();
//! let cfg = solid_path_config(&d, &schema);
//! let probe = Probe {
//!     uid: "p1".into(),
//!     origin: d.lookup("h1").unwrap(),
//!     header: HeaderValue::from_fields(&schema, [("dstTCP", 80)]).unwrap(),
//! };
//! let sim = simulate(&d, &cfg, &probe).unwrap();
//! let tree = build_flow_tree(&d, probe.origin, &sim.log).unwrap();
//! let paths: Vec<String> = extract_paths(&tree).iter().map(|p| p.render(&d)).collect();
//! assert_eq!(paths, ["(h1,s1)(s1,s2)(s2,h2)"]);
//! ```
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod analyzer;
pub mod forwarding;
pub mod headers;
pub mod samples;
pub mod simulator;
pub mod testgen;
pub mod topology;

pub use analyzer::{
    analyze, build_flow_tree, extract_paths, group_by_uid, Analysis, AnalysisError,
    AnalyzerOptions, FlowTree, FlowTreeNode,
};
pub use forwarding::{flood_config, Action, DataPlaneConfig, FlowRule, Match, Outcome, RuleTable};
pub use headers::{parse_filter, HeaderSchema, HeaderValue, TrafficType};
pub use simulator::{ground_truth_paths, simulate, Observation, ObservationLog, Probe, SimResult};
pub use testgen::{bounds, suite_for_header, suite_for_type, Bounds, TestCase, TestSuite};
pub use topology::{DataPath, DataPlane, NodeId, NodeKind, Port};
