// Copyright (c) 2026 The labelflow Authors.
// SPDX-License-Identifier: Apache-2.0

//! Network graph, link-state database and shortest-path trees.
//!
//! A [`Topology`] is immutable once loaded. The mutable part of the routing
//! state, the per-direction metric class of every link, lives in the [`Lsdb`].

mod parse;
mod spt;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::{load_topology, load_topology_file, ParseError, ParseErrorKind};
pub use spt::{dijkstra_from, reverse_dijkstra, tree_links, trees_equal, SourceTree, SptTree};

/// The shipped representative 39-node US backbone.
pub const US_BACKBONE: &str = include_str!("../../topologies/us_backbone.topo");

/// Dense node identifier, contiguous from 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Index of a directed link inside its [`Topology`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LinkId(pub u32);

impl LinkId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeRole {
    /// Provider edge: maps flows onto labels, hosts client networks.
    #[serde(rename = "PE")]
    Pe,
    /// Provider core: forwards on labels only.
    #[serde(rename = "P")]
    P,
}

impl fmt::Display for NodeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeRole::Pe => f.write_str("PE"),
            NodeRole::P => f.write_str("P"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectedLink {
    pub from: NodeId,
    pub to: NodeId,
    /// bits per second
    pub capacity: f64,
    /// seconds
    pub delay: f64,
    pub base_metric: u32,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum TopologyError {
    #[error("node {0} does not exist")]
    UnknownNode(NodeId),
    #[error("node {0} is not a PE node")]
    NotPe(NodeId),
    #[error("no link {0} -> {1}")]
    UnknownLink(NodeId, NodeId),
    #[error("link id {0:?} out of range")]
    UnknownLinkId(LinkId),
    #[error("trees rooted at {0} and {1} cannot be compared")]
    RootMismatch(NodeId, NodeId),
}

/// Validated, immutable network graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    roles: Vec<NodeRole>,
    links: Vec<DirectedLink>,
    out_links: Vec<Vec<LinkId>>,
    in_links: Vec<Vec<LinkId>>,
}

impl Topology {
    /// Builds a topology from already validated parts.
    ///
    /// Panics if a link references a node outside `roles` or if an ordered
    /// pair appears twice; the parser reports both as errors before getting here.
    pub fn new(roles: Vec<NodeRole>, links: Vec<DirectedLink>) -> Self {
        let n = roles.len();
        let mut out_links = vec![Vec::new(); n];
        let mut in_links = vec![Vec::new(); n];
        for (i, l) in links.iter().enumerate() {
            assert!(l.from.index() < n && l.to.index() < n, "link endpoint out of range");
            let id = LinkId(i as u32);
            assert!(
                !out_links[l.from.index()]
                    .iter()
                    .any(|o: &LinkId| links[o.index()].to == l.to),
                "duplicate link {} -> {}",
                l.from,
                l.to
            );
            out_links[l.from.index()].push(id);
            in_links[l.to.index()].push(id);
        }
        // Neighbour order drives nothing semantically, but keep it stable.
        for v in out_links.iter_mut() {
            v.sort_by_key(|id| links[id.index()].to);
        }
        for v in in_links.iter_mut() {
            v.sort_by_key(|id| links[id.index()].from);
        }
        Topology {
            roles,
            links,
            out_links,
            in_links,
        }
    }

    pub fn node_count(&self) -> usize {
        self.roles.len()
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.roles.len() as u32).map(NodeId)
    }

    pub fn role(&self, node: NodeId) -> Option<NodeRole> {
        self.roles.get(node.index()).copied()
    }

    pub fn is_pe(&self, node: NodeId) -> bool {
        self.role(node) == Some(NodeRole::Pe)
    }

    /// PE nodes in ascending id order.
    pub fn pes(&self) -> Vec<NodeId> {
        self.nodes().filter(|n| self.is_pe(*n)).collect()
    }

    /// P nodes in ascending id order.
    pub fn p_nodes(&self) -> Vec<NodeId> {
        self.nodes().filter(|n| !self.is_pe(*n)).collect()
    }

    pub fn link(&self, id: LinkId) -> &DirectedLink {
        &self.links[id.index()]
    }

    pub fn links(&self) -> &[DirectedLink] {
        &self.links
    }

    pub fn link_ids(&self) -> impl Iterator<Item = LinkId> {
        (0..self.links.len() as u32).map(LinkId)
    }

    pub fn out_links(&self, node: NodeId) -> &[LinkId] {
        &self.out_links[node.index()]
    }

    pub fn in_links(&self, node: NodeId) -> &[LinkId] {
        &self.in_links[node.index()]
    }

    pub fn find_link(&self, from: NodeId, to: NodeId) -> Option<LinkId> {
        self.out_links
            .get(from.index())?
            .iter()
            .copied()
            .find(|id| self.links[id.index()].to == to)
    }

    /// Same nodes, every link reversed.
    pub fn transposed(&self) -> Topology {
        let links = self
            .links
            .iter()
            .map(|l| DirectedLink {
                from: l.to,
                to: l.from,
                ..l.clone()
            })
            .collect();
        Topology::new(self.roles.clone(), links)
    }
}

/// Utilization class of a link and the routing metric it maps to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MetricClass {
    Norm,
    Warn,
    Cong,
}

/// Metric value assigned to each class.
///
/// A NORM link keeps its own `base_metric` (the default IGP metric); the
/// `norm` value here is what the shipped topologies use as that base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricValues {
    pub norm: u32,
    pub warn: u32,
    pub cong: u32,
}

impl Default for MetricValues {
    fn default() -> Self {
        MetricValues {
            norm: 1,
            warn: 1000,
            cong: 65535,
        }
    }
}

impl MetricValues {
    pub fn is_valid(&self) -> bool {
        0 < self.norm && self.norm < self.warn && self.warn < self.cong
    }
}

/// Link-state database: the controller's view of every directed link and its
/// current metric class.
#[derive(Debug, Clone)]
pub struct Lsdb {
    values: MetricValues,
    base: Vec<u32>,
    class: Vec<MetricClass>,
}

impl Lsdb {
    /// Every link starts in [`MetricClass::Norm`].
    pub fn new(topology: &Topology, values: MetricValues) -> Self {
        Lsdb {
            values,
            base: topology.links().iter().map(|l| l.base_metric).collect(),
            class: vec![MetricClass::Norm; topology.link_count()],
        }
    }

    pub fn values(&self) -> MetricValues {
        self.values
    }

    pub fn link_count(&self) -> usize {
        self.class.len()
    }

    pub fn class(&self, link: LinkId) -> Result<MetricClass, TopologyError> {
        self.class
            .get(link.index())
            .copied()
            .ok_or(TopologyError::UnknownLinkId(link))
    }

    /// Routing weight currently in effect for `link`.
    pub fn metric(&self, link: LinkId) -> u64 {
        match self.class[link.index()] {
            MetricClass::Norm => self.base[link.index()] as u64,
            MetricClass::Warn => self.values.warn as u64,
            MetricClass::Cong => self.values.cong as u64,
        }
    }

    /// Replaces the class of `link`; returns whether it actually changed.
    pub fn set_metric(&mut self, link: LinkId, class: MetricClass) -> Result<bool, TopologyError> {
        let slot = self
            .class
            .get_mut(link.index())
            .ok_or(TopologyError::UnknownLinkId(link))?;
        let changed = *slot != class;
        *slot = class;
        Ok(changed)
    }

    /// Overrides the base (NORM) metric of a link. Used to build asymmetric
    /// test graphs without going through the text format.
    pub fn set_base_metric(&mut self, link: LinkId, metric: u32) -> Result<(), TopologyError> {
        let slot = self
            .base
            .get_mut(link.index())
            .ok_or(TopologyError::UnknownLinkId(link))?;
        *slot = metric.max(1);
        Ok(())
    }
}
