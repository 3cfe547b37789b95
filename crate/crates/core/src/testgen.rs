//! Distributed test suites and the worst-case path bounds of a data-plane.

use alloc::collections::BTreeSet;
use alloc::sync::Arc;
use alloc::vec::Vec;

use num_bigint::BigUint;
use num_traits::One;

use crate::headers::{HeaderEnumeration, HeaderError, HeaderSchema, HeaderValue, TrafficType};
use crate::topology::{DataPlane, NodeId};

/// Inject `header` at `host`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TestCase {
    pub host: NodeId,
    pub header: HeaderValue,
}

/// A duplicate-free set of test cases.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TestSuite {
    cases: BTreeSet<TestCase>,
}

impl TestSuite {
    pub fn insert(&mut self, case: TestCase) -> bool {
        self.cases.insert(case)
    }

    pub fn len(&self) -> usize {
        self.cases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cases.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TestCase> {
        self.cases.iter()
    }
}

impl FromIterator<TestCase> for TestSuite {
    fn from_iter<I: IntoIterator<Item = TestCase>>(iter: I) -> Self {
        Self {
            cases: iter.into_iter().collect(),
        }
    }
}

impl IntoIterator for TestSuite {
    type Item = TestCase;
    type IntoIter = alloc::collections::btree_set::IntoIter<TestCase>;

    fn into_iter(self) -> Self::IntoIter {
        self.cases.into_iter()
    }
}

/// One case per host, all carrying `hdr`.
pub fn suite_for_header(d: &DataPlane, hdr: &HeaderValue) -> TestSuite {
    d.hosts()
        .map(|host| TestCase {
            host,
            header: hdr.clone(),
        })
        .collect()
}

/// Lazily produced cases of a traffic-type suite: every header of the type, each at every
/// selected host. Headers are produced in lexicographic order, hosts in id order.
#[derive(Debug, Clone)]
pub struct SuiteStream {
    headers: HeaderEnumeration,
    hosts: Vec<NodeId>,
    current: Option<HeaderValue>,
    next_host: usize,
    remaining: Option<u64>,
}

impl Iterator for SuiteStream {
    type Item = TestCase;

    fn next(&mut self) -> Option<TestCase> {
        if self.remaining == Some(0) || self.hosts.is_empty() {
            return None;
        }
        if self.current.is_none() || self.next_host == self.hosts.len() {
            self.current = Some(self.headers.next()?);
            self.next_host = 0;
        }
        let host = self.hosts[self.next_host];
        self.next_host += 1;
        if let Some(r) = self.remaining.as_mut() {
            *r -= 1;
        }
        Some(TestCase {
            host,
            header: self.current.clone().expect("set above"),
        })
    }
}

/// The suite for traffic type `t` over every host of `d`.
///
/// Without a cap the type may have at most `limit` free bits. With a cap, at most `cap` cases
/// are produced regardless of the type's size.
pub fn suite_for_type(
    d: &DataPlane,
    t: &TrafficType,
    limit: u32,
    cap: Option<u64>,
) -> Result<SuiteStream, HeaderError> {
    suite_for_type_from(d, d.hosts().collect(), t, limit, cap)
}

/// Same as [`suite_for_type`] restricted to the given source hosts.
pub fn suite_for_type_from(
    _d: &DataPlane,
    hosts: Vec<NodeId>,
    t: &TrafficType,
    limit: u32,
    cap: Option<u64>,
) -> Result<SuiteStream, HeaderError> {
    let headers = t.enumerate(limit, None).or_else(|e| match cap {
        // a capped suite never needs more headers than cases
        Some(c) => t.enumerate(limit, Some(c)),
        None => Err(e),
    })?;
    Ok(SuiteStream {
        headers,
        hosts,
        current: None,
        next_host: 0,
        remaining: cap,
    })
}

/// `2^(k-k') * |H|`, the uncapped size of a traffic-type suite.
pub fn suite_size(d: &DataPlane, t: &TrafficType) -> BigUint {
    suite_size_from(d.host_count(), t)
}

/// [`suite_size`] for a suite drawn from `hosts` source hosts.
pub fn suite_size_from(hosts: usize, t: &TrafficType) -> BigUint {
    (BigUint::one() << t.free_bit_count() as usize) * BigUint::from(hosts)
}

/// Every header of the schema at every host: `2^k * |H|` cases, subject to `limit`.
pub fn exhaustive_suite(
    d: &DataPlane,
    schema: &Arc<HeaderSchema>,
    limit: u32,
    cap: Option<u64>,
) -> Result<SuiteStream, HeaderError> {
    suite_for_type(d, &TrafficType::any(schema), limit, cap)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bounds {
    /// `(|V|-1)^(|V|(|V|-1))`
    pub max_path_count: BigUint,
    /// `|V|(|V|-1)`
    pub max_path_length: u64,
}

pub fn bounds(d: &DataPlane) -> Bounds {
    bounds_for(d.node_count() as u64)
}

/// [`bounds`] for a data-plane with `v` nodes.
pub fn bounds_for(v: u64) -> Bounds {
    let len = v * v.saturating_sub(1);
    Bounds {
        max_path_count: BigUint::from(v.saturating_sub(1)).pow(len as u32),
        max_path_length: len,
    }
}
