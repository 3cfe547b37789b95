//! Per-switch flow tables and the deterministic forwarding decision.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::headers::{HeaderError, HeaderValue, TrafficType};
use crate::topology::{DataPlane, NodeId, Port};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ForwardingError {
    #[error("switch `{switch}` has no port {port}")]
    UnknownPort { switch: String, port: Port },
    #[error("`{0}` is not a switch")]
    NotASwitch(String),
    #[error("output action needs at least one port")]
    EmptyOutput,
    #[error(transparent)]
    Header(#[from] HeaderError),
}

/// What a rule matches: an optional ingress port and a traffic type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Match {
    pub in_port: Option<Port>,
    pub header: TrafficType,
}

impl Match {
    pub fn accepts(&self, in_port: Port, h: &HeaderValue) -> Result<bool, HeaderError> {
        if self.in_port.is_some_and(|p| p != in_port) {
            return Ok(false);
        }
        self.header.indicator_eval(h)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    Drop,
    Output(BTreeSet<Port>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowRule {
    pub priority: u32,
    pub matcher: Match,
    pub action: Action,
}

impl FlowRule {
    pub fn new(priority: u32, in_port: Option<Port>, header: TrafficType, action: Action) -> Self {
        Self {
            priority,
            matcher: Match { in_port, header },
            action,
        }
    }

    /// Output to the given ports.
    pub fn output<I: IntoIterator<Item = Port>>(
        priority: u32,
        in_port: Option<Port>,
        header: TrafficType,
        ports: I,
    ) -> Self {
        Self::new(
            priority,
            in_port,
            header,
            Action::Output(ports.into_iter().collect()),
        )
    }
}

/// Result of a table lookup. Output ports are ascending and never contain the ingress port.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Drop,
    Output(Vec<Port>),
}

impl Outcome {
    pub fn ports(&self) -> &[Port] {
        match self {
            Outcome::Drop => &[],
            Outcome::Output(p) => p,
        }
    }
}

/// The flow table of one switch, in installation order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleTable {
    switch: NodeId,
    name: String,
    ports: BTreeSet<Port>,
    rules: Vec<FlowRule>,
}

impl RuleTable {
    pub fn new(d: &DataPlane, switch: NodeId) -> Result<Self, ForwardingError> {
        if !d.is_switch(switch) {
            return Err(ForwardingError::NotASwitch(d.name(switch).into()));
        }
        Ok(Self {
            switch,
            name: d.name(switch).into(),
            ports: d.ports(switch).into_iter().collect(),
            rules: Vec::new(),
        })
    }

    pub fn switch(&self) -> NodeId {
        self.switch
    }

    pub fn rules(&self) -> &[FlowRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    fn check_port(&self, port: Port) -> Result<(), ForwardingError> {
        if self.ports.contains(&port) {
            Ok(())
        } else {
            Err(ForwardingError::UnknownPort {
                switch: self.name.clone(),
                port,
            })
        }
    }

    /// Appends a rule after checking that every port it names exists on the switch.
    pub fn install(&mut self, rule: FlowRule) -> Result<(), ForwardingError> {
        if let Some(p) = rule.matcher.in_port {
            self.check_port(p)?;
        }
        if let Action::Output(ports) = &rule.action {
            if ports.is_empty() {
                return Err(ForwardingError::EmptyOutput);
            }
            for p in ports {
                self.check_port(*p)?;
            }
        }
        self.rules.push(rule);
        Ok(())
    }

    /// The highest-priority matching rule wins, earliest installed on ties. Unmatched packets
    /// are dropped, and the ingress port is removed from any output set.
    pub fn lookup(&self, in_port: Port, h: &HeaderValue) -> Result<Outcome, ForwardingError> {
        self.check_port(in_port)?;
        let mut best: Option<&FlowRule> = None;
        for r in &self.rules {
            if best.is_some_and(|b| b.priority >= r.priority) {
                continue;
            }
            if r.matcher.accepts(in_port, h)? {
                best = Some(r);
            }
        }
        Ok(match best.map(|r| &r.action) {
            None | Some(Action::Drop) => Outcome::Drop,
            Some(Action::Output(ports)) => {
                let out: Vec<Port> = ports.iter().copied().filter(|p| *p != in_port).collect();
                if out.is_empty() {
                    Outcome::Drop
                } else {
                    Outcome::Output(out)
                }
            }
        })
    }
}

/// One flow table per switch, plus the switch-level forwarding mode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPlaneConfig {
    tables: BTreeMap<NodeId, RuleTable>,
    forward_once: bool,
}

impl DataPlaneConfig {
    /// Every switch gets an empty table.
    pub fn empty(d: &DataPlane) -> Self {
        let tables = d
            .switches()
            .map(|s| (s, RuleTable::new(d, s).expect("switch")))
            .collect();
        Self {
            tables,
            forward_once: false,
        }
    }

    /// When set, a switch forwards only the first copy of a probe it receives and drops every
    /// later arrival after observing it. This is how learning controllers suppress flooding
    /// storms on cyclic topologies.
    pub fn forward_once(&self) -> bool {
        self.forward_once
    }

    pub fn set_forward_once(&mut self, on: bool) {
        self.forward_once = on;
    }

    pub fn table(&self, switch: NodeId) -> Option<&RuleTable> {
        self.tables.get(&switch)
    }

    pub fn tables(&self) -> impl Iterator<Item = &RuleTable> {
        self.tables.values()
    }

    pub fn install(&mut self, switch: NodeId, rule: FlowRule) -> Result<(), ForwardingError> {
        match self.tables.get_mut(&switch) {
            Some(t) => t.install(rule),
            None => Err(ForwardingError::NotASwitch(alloc::format!("{}", switch.0))),
        }
    }

    pub fn lookup(
        &self,
        switch: NodeId,
        in_port: Port,
        h: &HeaderValue,
    ) -> Result<Outcome, ForwardingError> {
        match self.tables.get(&switch) {
            Some(t) => t.lookup(in_port, h),
            None => Err(ForwardingError::NotASwitch(alloc::format!("{}", switch.0))),
        }
    }

    pub fn rule_count(&self) -> usize {
        self.tables.values().map(RuleTable::len).sum()
    }
}

/// Every switch floods to all of its ports (minus the ingress port) and forwards each probe
/// at most once.
pub fn flood_config(
    d: &DataPlane,
    schema: &alloc::sync::Arc<crate::headers::HeaderSchema>,
) -> DataPlaneConfig {
    let mut cfg = DataPlaneConfig::empty(d);
    for s in d.switches().collect::<Vec<_>>() {
        let rule = FlowRule::output(0, None, TrafficType::any(schema), d.ports(s));
        cfg.install(s, rule).expect("ports of the switch itself");
    }
    cfg.forward_once = true;
    cfg
}
