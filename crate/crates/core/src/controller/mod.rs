// Copyright (c) 2026 The labelflow Authors.
// SPDX-License-Identifier: Apache-2.0

//! Centralized controller: measurement component and label allocator.
//!
//! The measurement side turns interval-averaged link utilization into metric
//! classes in the LSDB. Whenever a batch of metric changes touches links that
//! carried labelled traffic, the allocator recomputes reverse trees for the
//! affected destination PEs, draws fresh global labels and emits the table
//! commands that install them. Superseded labels drain: their core entries get
//! a finite idle timeout, and once every entry has expired the value returns
//! to the pool.

mod ledger;
mod pool;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataplane::{client_prefix, IdleTimeout, Ipv4Prefix, Label, LabelAction};
use crate::topology::{
    reverse_dijkstra, trees_equal, LinkId, Lsdb, MetricClass, MetricValues, NodeId, SptTree, Topology, TopologyError,
};

pub use ledger::{MessageCounts, MessageLedger};
pub use pool::LabelPool;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControllerError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("label pool exhausted with {live} live labels")]
    PoolExhausted { live: usize },
    #[error("no utilization sample for link {0:?}")]
    MissingSample(LinkId),
    #[error("duplicate utilization sample for link {0:?}")]
    DuplicateSample(LinkId),
    #[error("label {0} is not live")]
    UnknownLabel(Label),
    #[error("label {0} is still the active label of its destination")]
    RecycleActive(Label),
    #[error("label {label} still has {flows} flows and {entries} table entries")]
    RecycleBusy { label: Label, flows: u64, entries: u64 },
    #[error("invalid thresholds: need 0 < warn ({warn}) < cong ({cong}) < 1 and interval > 0")]
    InvalidThresholds { warn: f64, cong: f64 },
}

/// Utilization thresholds of the measurement component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    pub warn_th: f64,
    pub cong_th: f64,
    /// seconds
    pub measurement_interval: f64,
}

impl ThresholdConfig {
    pub fn new(warn_th: f64, cong_th: f64, measurement_interval: f64) -> Result<Self, ControllerError> {
        let cfg = ThresholdConfig {
            warn_th,
            cong_th,
            measurement_interval,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ControllerError> {
        let ok = 0.0 < self.warn_th
            && self.warn_th < self.cong_th
            && self.cong_th < 1.0
            && self.measurement_interval > 0.0
            && self.measurement_interval.is_finite();
        if ok {
            Ok(())
        } else {
            Err(ControllerError::InvalidThresholds {
                warn: self.warn_th,
                cong: self.cong_th,
            })
        }
    }
}

/// NORM up to and including `warn_th`, WARN up to and including `cong_th`,
/// CONG above.
pub fn classify(utilization: f64, cfg: &ThresholdConfig) -> MetricClass {
    if utilization <= cfg.warn_th {
        MetricClass::Norm
    } else if utilization <= cfg.cong_th {
        MetricClass::Warn
    } else {
        MetricClass::Cong
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkUtilizationSample {
    pub link: LinkId,
    /// bits per second averaged over the interval
    pub tput: f64,
    /// `tput / capacity`, clamped to [0, 1]
    pub utilization: f64,
}

impl LinkUtilizationSample {
    pub fn from_bytes(link: LinkId, bytes: f64, capacity: f64, interval: f64) -> Self {
        let tput = bytes * 8.0 / interval;
        LinkUtilizationSample {
            link,
            tput,
            utilization: (tput / capacity).clamp(0.0, 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationPolicy {
    /// A fresh label on every recalculation.
    Always,
    /// A fresh label only when the recomputed tree differs.
    OnTreeChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum EpochState {
    Active,
    Draining,
    Retired,
}

/// One label bound to one destination PE and one tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelEpoch {
    pub label: Label,
    pub dest_pe: NodeId,
    /// Counts epochs per destination, starting at 1.
    pub epoch: u32,
    pub tree: SptTree,
    pub state: EpochState,
    /// Flows currently carried.
    pub flows: u64,
    pub created_at: f64,
    pub retired_at: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TableCommand {
    CftReplace {
        node: NodeId,
        dest: NodeId,
        prefix: Ipv4Prefix,
        action: LabelAction,
    },
    PInstall {
        node: NodeId,
        label: Label,
        out: LinkId,
        idle_timeout: IdleTimeout,
    },
    PDemote {
        node: NodeId,
        label: Label,
        idle_timeout: IdleTimeout,
    },
    PRemove {
        node: NodeId,
        label: Label,
    },
}

impl TableCommand {
    pub fn target(&self) -> NodeId {
        match self {
            TableCommand::CftReplace { node, .. }
            | TableCommand::PInstall { node, .. }
            | TableCommand::PDemote { node, .. }
            | TableCommand::PRemove { node, .. } => *node,
        }
    }
}

/// Labels seen on each link during the last measurement interval.
pub type LinkLabelActivity = BTreeMap<LinkId, BTreeSet<Label>>;

/// Destination PEs of the live epochs whose labels crossed a changed link.
pub fn affected_pes<'a>(
    changed: &[LinkId],
    live_epochs: impl IntoIterator<Item = &'a LabelEpoch>,
    activity: &LinkLabelActivity,
) -> BTreeSet<NodeId> {
    let seen: BTreeSet<Label> = changed
        .iter()
        .filter_map(|l| activity.get(l))
        .flatten()
        .copied()
        .collect();
    live_epochs
        .into_iter()
        .filter(|e| e.state != EpochState::Retired && seen.contains(&e.label))
        .map(|e| e.dest_pe)
        .collect()
}

/// A metric transition applied by a measurement tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MetricChange {
    pub link: LinkId,
    pub old: MetricClass,
    pub new: MetricClass,
}

/// Result of one reallocation batch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Reallocation {
    pub epochs: Vec<LabelEpoch>,
    pub commands: Vec<TableCommand>,
}

#[derive(Debug, Clone)]
pub struct Controller {
    topology: Arc<Topology>,
    lsdb: Lsdb,
    thresholds: ThresholdConfig,
    policy: AllocationPolicy,
    gc_timeout: f64,
    pool: LabelPool,
    epochs: Vec<LabelEpoch>,
    active: Vec<Option<usize>>,
    live: HashMap<Label, usize>,
    ledger: MessageLedger,
    batches: u64,
}

impl Controller {
    pub fn new(
        topology: Arc<Topology>,
        metric_values: MetricValues,
        thresholds: ThresholdConfig,
        policy: AllocationPolicy,
        gc_timeout: f64,
    ) -> Self {
        let lsdb = Lsdb::new(&topology, metric_values);
        let n = topology.node_count();
        Controller {
            topology,
            lsdb,
            thresholds,
            policy,
            gc_timeout,
            pool: LabelPool::default(),
            epochs: Vec::new(),
            active: vec![None; n],
            live: HashMap::new(),
            ledger: MessageLedger::default(),
            batches: 0,
        }
    }

    pub fn with_pool(mut self, pool: LabelPool) -> Self {
        self.pool = pool;
        self
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topology
    }

    pub fn lsdb(&self) -> &Lsdb {
        &self.lsdb
    }

    pub fn lsdb_mut(&mut self) -> &mut Lsdb {
        &mut self.lsdb
    }

    pub fn thresholds(&self) -> &ThresholdConfig {
        &self.thresholds
    }

    pub fn ledger(&self) -> &MessageLedger {
        &self.ledger
    }

    pub fn pool(&self) -> &LabelPool {
        &self.pool
    }

    /// Reallocation batches completed after the initial allocation.
    pub fn batches(&self) -> u64 {
        self.batches
    }

    /// Every epoch ever created, in creation order.
    pub fn epochs(&self) -> &[LabelEpoch] {
        &self.epochs
    }

    pub fn live_epochs(&self) -> impl Iterator<Item = &LabelEpoch> + '_ {
        let mut idx: Vec<usize> = self.live.values().copied().collect();
        idx.sort_unstable();
        idx.into_iter().map(move |i| &self.epochs[i])
    }

    pub fn live_label_count(&self) -> usize {
        self.live.len()
    }

    pub fn epoch(&self, label: Label) -> Option<&LabelEpoch> {
        self.live.get(&label).map(|&i| &self.epochs[i])
    }

    pub fn active_epoch(&self, dest: NodeId) -> Option<&LabelEpoch> {
        self.active
            .get(dest.index())
            .copied()
            .flatten()
            .map(|i| &self.epochs[i])
    }

    /// Epochs of one destination, oldest first.
    pub fn history(&self, dest: NodeId) -> Vec<&LabelEpoch> {
        self.epochs.iter().filter(|e| e.dest_pe == dest).collect()
    }

    /// Trees and labels for every PE; run once before traffic starts.
    pub fn initial_allocation(&mut self, now: f64) -> Result<Reallocation, ControllerError> {
        let all: BTreeSet<NodeId> = self.topology.pes().into_iter().collect();
        let policy = self.policy;
        self.policy = AllocationPolicy::Always;
        let out = self.allocate(now, &all);
        self.policy = policy;
        out
    }

    /// Applies one round of link samples to the LSDB.
    ///
    /// Every directed link needs exactly one sample. Accounts one statistics
    /// request and one response per node.
    pub fn measurement_tick(
        &mut self,
        now: f64,
        samples: &[LinkUtilizationSample],
    ) -> Result<Vec<MetricChange>, ControllerError> {
        let n_links = self.topology.link_count();
        let mut by_link: Vec<Option<&LinkUtilizationSample>> = vec![None; n_links];
        for s in samples {
            let slot = by_link
                .get_mut(s.link.index())
                .ok_or(TopologyError::UnknownLinkId(s.link))?;
            if slot.is_some() {
                return Err(ControllerError::DuplicateSample(s.link));
            }
            *slot = Some(s);
        }
        let mut changes = Vec::new();
        for (i, s) in by_link.iter().enumerate() {
            let s = s.ok_or(ControllerError::MissingSample(LinkId(i as u32)))?;
            let new = classify(s.utilization, &self.thresholds);
            let old = self.lsdb.class(s.link)?;
            if self.lsdb.set_metric(s.link, new)? {
                changes.push(MetricChange { link: s.link, old, new });
            }
        }
        let nodes = self.topology.node_count() as u64;
        let c = self.ledger.at(now);
        c.stat_requests += nodes;
        c.stat_responses += nodes;
        Ok(changes)
    }

    /// Destination PEs to recompute for a batch of changed links.
    pub fn affected_pes(&self, changed: &[LinkId], activity: &LinkLabelActivity) -> BTreeSet<NodeId> {
        affected_pes(changed, self.live_epochs(), activity)
    }

    /// New trees and labels for `affected`, plus the commands installing them.
    pub fn reallocate(&mut self, now: f64, affected: &BTreeSet<NodeId>) -> Result<Reallocation, ControllerError> {
        if affected.is_empty() {
            return Ok(Reallocation::default());
        }
        let out = self.allocate(now, affected)?;
        self.batches += 1;
        Ok(out)
    }

    fn allocate(&mut self, now: f64, dests: &BTreeSet<NodeId>) -> Result<Reallocation, ControllerError> {
        // Trees first, over one LSDB snapshot.
        let mut trees = Vec::with_capacity(dests.len());
        for &d in dests {
            trees.push((d, reverse_dijkstra(&self.topology, &self.lsdb, d)?));
        }

        let mut out = Reallocation::default();
        for (dest, tree) in trees {
            let prev = self.active[dest.index()];
            if self.policy == AllocationPolicy::OnTreeChange {
                if let Some(p) = prev {
                    if trees_equal(&self.epochs[p].tree, &tree)? {
                        continue;
                    }
                }
            }
            let label = self
                .pool
                .allocate()
                .ok_or(ControllerError::PoolExhausted { live: self.live.len() })?;

            let mut cmds = Vec::new();
            for node in tree.members() {
                let next = tree.next_hop(node).expect("member has a next hop");
                let out = self
                    .topology
                    .find_link(node, next)
                    .ok_or(TopologyError::UnknownLink(node, next))?;
                cmds.push(TableCommand::PInstall {
                    node,
                    label,
                    out,
                    idle_timeout: IdleTimeout::Infinite,
                });
                if self.topology.is_pe(node) {
                    cmds.push(TableCommand::CftReplace {
                        node,
                        dest,
                        prefix: client_prefix(dest),
                        action: LabelAction { label, out },
                    });
                }
            }
            let epoch_no = match prev {
                Some(p) => {
                    let old = &mut self.epochs[p];
                    old.state = EpochState::Draining;
                    for node in old.tree.members() {
                        cmds.push(TableCommand::PDemote {
                            node,
                            label: old.label,
                            idle_timeout: IdleTimeout::After(self.gc_timeout),
                        });
                    }
                    old.epoch + 1
                }
                None => 1,
            };
            // deterministic (destination, node) order
            cmds.sort_by_key(|c| (c.target(), command_rank(c)));

            let epoch = LabelEpoch {
                label,
                dest_pe: dest,
                epoch: epoch_no,
                tree,
                state: EpochState::Active,
                flows: 0,
                created_at: now,
                retired_at: None,
            };
            let idx = self.epochs.len();
            self.epochs.push(epoch.clone());
            self.active[dest.index()] = Some(idx);
            self.live.insert(label, idx);
            out.epochs.push(epoch);
            out.commands.extend(cmds);
        }

        let targets: BTreeSet<NodeId> = out.commands.iter().map(|c| c.target()).collect();
        self.ledger.at(now).bundle_updates += targets.len() as u64;
        Ok(out)
    }

    /// A flow was admitted under `label`. Returns the epoch state at admission.
    pub fn attach_flow(&mut self, label: Label) -> Result<EpochState, ControllerError> {
        let &i = self.live.get(&label).ok_or(ControllerError::UnknownLabel(label))?;
        let e = &mut self.epochs[i];
        e.flows += 1;
        Ok(e.state)
    }

    pub fn detach_flow(&mut self, label: Label) -> Result<(), ControllerError> {
        let &i = self.live.get(&label).ok_or(ControllerError::UnknownLabel(label))?;
        let e = &mut self.epochs[i];
        debug_assert!(e.flows > 0);
        e.flows = e.flows.saturating_sub(1);
        Ok(())
    }

    /// Retires a drained label and returns its value to the pool.
    ///
    /// `live_entries` is the number of label-table entries for it still
    /// present anywhere in the network.
    pub fn recycle(&mut self, label: Label, live_entries: u64, now: f64) -> Result<(), ControllerError> {
        let &i = self.live.get(&label).ok_or(ControllerError::UnknownLabel(label))?;
        let e = &mut self.epochs[i];
        if e.state == EpochState::Active {
            return Err(ControllerError::RecycleActive(label));
        }
        if e.flows > 0 || live_entries > 0 {
            return Err(ControllerError::RecycleBusy {
                label,
                flows: e.flows,
                entries: live_entries,
            });
        }
        e.state = EpochState::Retired;
        e.retired_at = Some(now);
        self.live.remove(&label);
        self.pool.release(label);
        Ok(())
    }

    /// A table-miss Packet_IN plus the controller's reply installing a DFT entry.
    pub fn record_packet_in(&mut self, now: f64) {
        let c = self.ledger.at(now);
        c.packet_in += 1;
        c.flow_mods += 1;
    }
}

fn command_rank(c: &TableCommand) -> u8 {
    match c {
        TableCommand::CftReplace { .. } => 0,
        TableCommand::PInstall { .. } => 1,
        TableCommand::PDemote { .. } => 2,
        TableCommand::PRemove { .. } => 3,
    }
}
