// Copyright (c) 2026 The labelflow Authors.
// SPDX-License-Identifier: Apache-2.0

//! Per-node switch state.
//!
//! PE nodes run the two-table pipeline: a Detailed Flow Table (DFT) of
//! per-flow entries in front of a Coarse Flow Table (CFT) of controller
//! managed aggregation rules. A DFT miss that matches the CFT makes the
//! switch install the detailed entry itself, with no controller round-trip.
//! Every node keeps a label table for label forwarding (PE nodes use it for
//! transit traffic), and a plain flow table for the reactive legacy mode.

mod table;

use std::fmt;
use std::net::Ipv4Addr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::{LinkId, NodeId, NodeRole};

pub use table::{IdleTable, IdleTimeout, TableEntry};

/// MPLS label value. 0..=15 are reserved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub u32);

impl Label {
    pub const MIN: u32 = 16;
    /// One past the largest 20-bit label.
    pub const LIMIT: u32 = 1 << 20;
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Protocol {
    Tcp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FiveTuple {
    pub src_addr: Ipv4Addr,
    pub dst_addr: Ipv4Addr,
    pub src_port: u16,
    pub dst_port: u16,
    pub proto: Protocol,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Ipv4Prefix {
    pub addr: Ipv4Addr,
    pub len: u8,
}

impl Ipv4Prefix {
    pub fn new(addr: Ipv4Addr, len: u8) -> Self {
        let len = len.min(32);
        let masked = u32::from(addr) & Self::mask(len);
        Ipv4Prefix {
            addr: Ipv4Addr::from(masked),
            len,
        }
    }

    fn mask(len: u8) -> u32 {
        if len == 0 {
            0
        } else {
            u32::MAX << (32 - len as u32)
        }
    }

    pub fn contains(&self, addr: Ipv4Addr) -> bool {
        u32::from(addr) & Self::mask(self.len) == u32::from(self.addr)
    }

    /// Host `host` inside the prefix.
    pub fn host(&self, host: u32) -> Ipv4Addr {
        Ipv4Addr::from(u32::from(self.addr) | (host & !Self::mask(self.len)))
    }
}

impl fmt::Display for Ipv4Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.addr, self.len)
    }
}

/// The single client network behind a PE: `10.<id>.0.0/16`.
pub fn client_prefix(pe: NodeId) -> Ipv4Prefix {
    Ipv4Prefix::new(Ipv4Addr::from((10u32 << 24).wrapping_add(pe.0 << 16)), 16)
}

/// Where a switch sends a packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Port {
    Link(LinkId),
    /// The locally attached client network.
    Client,
}

/// Push `label`, send out `out`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelAction {
    pub label: Label,
    pub out: LinkId,
}

/// CFT match: destination prefix plus optional extended fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CftMatch {
    pub prefix: Ipv4Prefix,
    pub dst_port: Option<u16>,
}

impl CftMatch {
    pub fn destination(prefix: Ipv4Prefix) -> Self {
        CftMatch { prefix, dst_port: None }
    }

    fn matches(&self, flow: &FiveTuple) -> bool {
        self.prefix.contains(flow.dst_addr) && self.dst_port.is_none_or(|p| p == flow.dst_port)
    }

    fn specificity(&self) -> u8 {
        self.dst_port.is_some() as u8
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CftRule {
    pub matcher: CftMatch,
    pub priority: u16,
    pub action: LabelAction,
}

/// Coarse Flow Table. Entries never time out and change only on controller
/// commands.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Cft {
    rules: Vec<CftRule>,
    table_miss: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CftLookup {
    Action(LabelAction),
    TableMiss,
    NoMatch,
}

impl Cft {
    pub fn rules(&self) -> &[CftRule] {
        &self.rules
    }

    pub fn len(&self) -> usize {
        self.rules.len() + self.table_miss as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Adds a rule, replacing one with the same match.
    pub fn install(&mut self, matcher: CftMatch, priority: u16, action: LabelAction) {
        if let Some(r) = self.rules.iter_mut().find(|r| r.matcher == matcher) {
            r.priority = priority;
            r.action = action;
        } else {
            self.rules.push(CftRule {
                matcher,
                priority,
                action,
            });
        }
    }

    /// Rewrites the action of every rule for destination `prefix`, extended
    /// rules included; installs a plain destination rule if there is none.
    pub fn replace_destination(&mut self, prefix: Ipv4Prefix, action: LabelAction) {
        let mut found = false;
        for r in self.rules.iter_mut().filter(|r| r.matcher.prefix == prefix) {
            r.action = action;
            found = true;
        }
        if !found {
            self.install(CftMatch::destination(prefix), 0, action);
        }
    }

    pub fn set_table_miss(&mut self, present: bool) {
        self.table_miss = present;
    }

    /// Longest prefix first, then explicit priority, then the rule with more
    /// extended fields. A table-miss entry only catches what nothing else does.
    pub fn lookup(&self, flow: &FiveTuple) -> CftLookup {
        let best = self
            .rules
            .iter()
            .filter(|r| r.matcher.matches(flow))
            .max_by_key(|r| (r.matcher.prefix.len, r.priority, r.matcher.specificity()));
        match best {
            Some(r) => CftLookup::Action(r.action),
            None if self.table_miss => CftLookup::TableMiss,
            None => CftLookup::NoMatch,
        }
    }
}

/// Outcome of the PE pipeline for the first packet of a flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    DftHit(LabelAction),
    /// DFT miss, CFT match: the switch inserted a detailed entry itself.
    CftCopied(LabelAction),
    /// CFT table-miss entry: the packet goes to the controller.
    PacketIn,
    NoMatch,
}

impl Decision {
    pub fn action(&self) -> Option<LabelAction> {
        match self {
            Decision::DftHit(a) | Decision::CftCopied(a) => Some(*a),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataplaneError {
    #[error("node {0} is not a PE node")]
    NotPe(NodeId),
    #[error("node {node} has no entry for label {label}")]
    UnknownLabel { node: NodeId, label: Label },
}

/// Entries removed by one GC pass.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Expired {
    pub dft: Vec<FiveTuple>,
    pub labels: Vec<Label>,
    pub legacy: Vec<FiveTuple>,
}

impl Expired {
    pub fn is_empty(&self) -> bool {
        self.dft.is_empty() && self.labels.is_empty() && self.legacy.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Switch {
    pub id: NodeId,
    pub role: NodeRole,
    pub dft: IdleTable<FiveTuple, LabelAction>,
    pub cft: Cft,
    pub labels: IdleTable<Label, LinkId>,
    pub legacy: IdleTable<FiveTuple, Port>,
    /// Packets dropped for lack of a label entry.
    pub forwarding_faults: u64,
    pub packet_in: u64,
}

impl Switch {
    pub fn new(id: NodeId, role: NodeRole) -> Self {
        Switch {
            id,
            role,
            dft: IdleTable::default(),
            cft: Cft::default(),
            labels: IdleTable::default(),
            legacy: IdleTable::default(),
            forwarding_faults: 0,
            packet_in: 0,
        }
    }

    pub fn is_pe(&self) -> bool {
        self.role == NodeRole::Pe
    }

    /// First packet of `flow` entering at this PE.
    ///
    /// On a CFT match the DFT gets a copy of the CFT action with a finite
    /// `dft_timeout`. The caller pins the DFT entry for the flow's lifetime.
    pub fn pe_admit(&mut self, flow: &FiveTuple, now: f64, dft_timeout: f64) -> Result<Decision, DataplaneError> {
        if !self.is_pe() {
            return Err(DataplaneError::NotPe(self.id));
        }
        if let Some(e) = self.dft.get(flow) {
            let action = e.value;
            self.dft.hit(flow, now);
            return Ok(Decision::DftHit(action));
        }
        Ok(match self.cft.lookup(flow) {
            CftLookup::Action(action) => {
                self.dft.insert(*flow, action, IdleTimeout::After(dft_timeout), now);
                Decision::CftCopied(action)
            }
            CftLookup::TableMiss => {
                self.packet_in += 1;
                Decision::PacketIn
            }
            CftLookup::NoMatch => Decision::NoMatch,
        })
    }

    /// Label lookup; the label itself is forwarded unchanged.
    pub fn p_forward(&mut self, label: Label, now: f64) -> Result<LinkId, DataplaneError> {
        match self.labels.get(&label) {
            Some(e) => {
                let out = e.value;
                self.labels.hit(&label, now);
                Ok(out)
            }
            None => {
                self.forwarding_faults += 1;
                Err(DataplaneError::UnknownLabel { node: self.id, label })
            }
        }
    }

    /// Removes every expired finite-timeout entry. Idle timeouts are carried
    /// by the entries themselves (the controller's GC timeout for demoted
    /// labels, the DFT timeout for detailed entries).
    pub fn gc_tick(&mut self, now: f64) -> Expired {
        Expired {
            dft: self.dft.expire(now).into_iter().map(|(k, _)| k).collect(),
            labels: self.labels.expire(now).into_iter().map(|(k, _)| k).collect(),
            legacy: self.legacy.expire(now).into_iter().map(|(k, _)| k).collect(),
        }
    }

    /// One JSON object describing every table of the switch.
    pub fn dump(&self) -> serde_json::Value {
        let dft: Vec<_> = self
            .dft
            .sorted()
            .into_iter()
            .map(|(k, e)| serde_json::json!({"match": k, "entry": e}))
            .collect();
        let labels: Vec<_> = self
            .labels
            .sorted()
            .into_iter()
            .map(|(k, e)| serde_json::json!({"label": k, "entry": e}))
            .collect();
        serde_json::json!({
            "node": self.id,
            "role": self.role,
            "dft": dft,
            "cft": self.cft,
            "labels": labels,
            "legacy_entries": self.legacy.len(),
        })
    }
}

/// Reactive legacy SDN admission: every switch on `path` misses, sends a
/// Packet_IN and gets a per-flow entry from the controller.
///
/// `switches` is indexed by node id, `out_ports[i]` is where `path[i]` sends
/// the flow. Returns the number of Packet_IN messages.
pub fn legacy_admit(
    switches: &mut [Switch],
    path: &[NodeId],
    out_ports: &[Port],
    flow: &FiveTuple,
    now: f64,
    idle_timeout: f64,
) -> u64 {
    debug_assert_eq!(path.len(), out_ports.len());
    for (node, port) in path.iter().zip(out_ports) {
        let sw = &mut switches[node.index()];
        sw.packet_in += 1;
        sw.legacy.insert(*flow, *port, IdleTimeout::After(idle_timeout), now);
        sw.legacy.pin(flow, now);
    }
    path.len() as u64
}
