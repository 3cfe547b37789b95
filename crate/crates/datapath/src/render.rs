//! Plain-text rendering of flow trees.

use std::fmt::Write;

use crate::discovery::{DiscoveryResult, Status};
use crate::formats::FlowTreeDoc;

/// Draws the tree one node per line, annotating each node with its egress and ingress times.
///
/// ```text
/// h1
/// └── s1  te=0 ti=1
///     └── s2  te=2 ti=3
///         └── h2  te=4
/// ```
pub fn tree(doc: &FlowTreeDoc) -> String {
    let mut out = String::new();
    out.push_str(&doc.label);
    annotate(&mut out, doc);
    out.push('\n');
    children(&mut out, doc, "");
    out
}

fn annotate(out: &mut String, n: &FlowTreeDoc) {
    if n.te.is_none() && n.ti.is_none() {
        return;
    }
    out.push(' ');
    if let Some(te) = n.te {
        let _ = write!(out, " te={te}");
    }
    if let Some(ti) = n.ti {
        let _ = write!(out, " ti={ti}");
    }
}

fn children(out: &mut String, n: &FlowTreeDoc, prefix: &str) {
    for (i, c) in n.children.iter().enumerate() {
        let last = i + 1 == n.children.len();
        out.push_str(prefix);
        out.push_str(if last { "└── " } else { "├── " });
        out.push_str(&c.label);
        annotate(out, c);
        out.push('\n');
        let deeper = format!("{prefix}{}", if last { "    " } else { "│   " });
        children(out, c, &deeper);
    }
}

/// Every entry of a discovery result: a heading, the (partial) tree, and the paths.
pub fn result(r: &DiscoveryResult) -> String {
    let mut out = String::new();
    for e in &r.entries {
        let status = match e.status {
            Status::Ok => "ok",
            Status::Loop => "LOOP",
            Status::Disconnected => "DISCONNECTED",
            Status::NoObservations => "NO OBSERVATIONS",
        };
        let _ = writeln!(
            out,
            "probe {} from {} header {}: {status}",
            e.uid, e.host, e.header
        );
        if let Some(err) = &e.error {
            let _ = writeln!(out, "  {}", err.message);
        }
        if let Some(t) = &e.tree {
            for line in tree(t).lines() {
                let _ = writeln!(out, "  {line}");
            }
        }
        for p in &e.paths {
            let _ = writeln!(out, "  path {p}");
        }
    }
    out
}
