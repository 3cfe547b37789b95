//! Runtime companion to `datapath-core`: documents on disk and on the wire, the discovery
//! pipeline that turns requests into flow trees, the `dpd` command line, and an HTTP service.

pub mod discovery;
pub mod formats;
pub mod render;
pub mod service;
pub mod settings;

use std::path::Path;

use datapath_core::headers::{FilterError, HeaderError};
use datapath_core::simulator::SimError;
use datapath_core::topology::TopologyError;

pub use discovery::{discover, Backend, DiscoveryEntry, DiscoveryRequest, DiscoveryResult, Status};
pub use formats::{ingest_log, Rules, Topology};
pub use settings::Settings;

/// Everything that makes an input unusable. Analysis verdicts are not errors; they are
/// reported per entry in a [`DiscoveryResult`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Syntax(String),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("{file}: {inner}")]
    InFile { file: String, inner: Box<Error> },
    #[error(transparent)]
    Topology(TopologyError),
    #[error("rule {index} on `{switch}`: {message}")]
    Rule {
        index: usize,
        switch: String,
        message: String,
    },
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Header(#[from] HeaderError),
    #[error("unknown host `{0}`")]
    UnknownHost(String),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("{0}")]
    Request(String),
}

impl Error {
    pub fn in_file(self, path: &Path) -> Self {
        match self {
            e @ (Error::Io { .. } | Error::InFile { .. }) => e,
            e => Error::InFile {
                file: path.display().to_string(),
                inner: Box::new(e),
            },
        }
    }
}
