// Copyright (c) 2026 The labelflow Authors.
// SPDX-License-Identifier: Apache-2.0

//! Deterministic event loop over fluid flows.
//!
//! Flows that share ingress PE, egress PE and label (legacy: ingress and
//! egress PE) follow the same pinned path, so they are kept together in a
//! class. Every flow of a class gets the same max-min fair rate, and a class
//! tracks the bytes delivered per member since it was created. A flow is done
//! once that counter passes the value it had at admission plus the flow size,
//! so the next completion is the smallest such threshold over all classes.

pub mod fairshare;
mod result;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::sync::Arc;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{
    AllocationPolicy, Controller, ControllerError, EpochState, LinkLabelActivity, LinkUtilizationSample, MessageCounts,
    MessageLedger, TableCommand, ThresholdConfig,
};
use crate::dataplane::{
    legacy_admit, DataplaneError, Decision, FiveTuple, IdleTimeout, Label, LabelAction, Port, Switch,
};
use crate::topology::{dijkstra_from, LinkId, Lsdb, MetricValues, NodeId, NodeRole, Topology};
use crate::traffic::{derive_seed, generate, FlowArrival, TrafficConfig, TrafficError};

pub use fairshare::{fair_shares, weighted_fair_shares, FairShareSolver};
pub use result::{KpiSample, RunResult};

/// Relative tolerance for declaring a flow finished.
const COMPLETION_EPS: f64 = 1e-9;
/// Relative slack of the capacity check after each fair-share solve.
const CAPACITY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Label aggregation with on-demand multipath.
    Mechanism,
    /// Reactive per-flow SDN on static shortest paths.
    Legacy,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Mechanism => "mechanism",
            Mode::Legacy => "legacy",
        })
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Dataplane(#[from] DataplaneError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error("invalid engine configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub mode: Mode,
    pub thresholds: ThresholdConfig,
    pub metric_values: MetricValues,
    pub policy: AllocationPolicy,
    /// Idle timeout given to demoted label entries.
    pub gc_timeout: f64,
    pub dft_idle_timeout: f64,
    pub legacy_idle_timeout: f64,
    /// Period of the switch-side expiry scan.
    pub gc_interval: f64,
    /// bits per second
    pub access_capacity: f64,
    pub sim_time: f64,
    pub warmup: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mode: Mode::Mechanism,
            thresholds: ThresholdConfig {
                warn_th: 0.4,
                cong_th: 0.8,
                measurement_interval: 1.0,
            },
            metric_values: MetricValues::default(),
            policy: AllocationPolicy::Always,
            gc_timeout: 1.0,
            dft_idle_timeout: 1.0,
            legacy_idle_timeout: 1.0,
            gc_interval: 0.1,
            access_capacity: 1e9,
            sim_time: 100.0,
            warmup: 10.0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<(), EngineError> {
        self.thresholds.validate()?;
        let pos = |v: f64, name: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(EngineError::Config(format!("{name} must be positive and finite")))
            }
        };
        pos(self.gc_timeout, "gc_timeout")?;
        pos(self.dft_idle_timeout, "dft_idle_timeout")?;
        pos(self.legacy_idle_timeout, "legacy_idle_timeout")?;
        pos(self.gc_interval, "gc_interval")?;
        pos(self.access_capacity, "access_capacity")?;
        pos(self.sim_time, "sim_time")?;
        if !(self.warmup >= 0.0 && self.warmup < self.sim_time) {
            return Err(EngineError::Config("need 0 <= warmup < sim_time".into()));
        }
        if !self.metric_values.is_valid() {
            return Err(EngineError::Config(
                "metric values must satisfy 0 < norm < warn < cong".into(),
            ));
        }
        Ok(())
    }
}

/// Everything one run depends on.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub topology: Arc<Topology>,
    pub engine: EngineConfig,
    pub traffic: TrafficConfig,
    pub replication: u64,
}

/// Runs a generated-traffic scenario to completion.
pub fn run(scenario: &Scenario) -> Result<RunResult, EngineError> {
    let mut engine = scenario.engine.clone();
    engine.sim_time = scenario.traffic.sim_time;
    engine.warmup = scenario.traffic.warmup;
    let arrivals = generate(&scenario.traffic, &scenario.topology.pes(), scenario.replication)?;
    let mut sim = Simulation::new(scenario.topology.clone(), engine, Box::new(arrivals))?;
    sim.set_identity(
        scenario.replication,
        derive_seed(scenario.traffic.seed, scenario.replication),
    );
    sim.run_to_end()?;
    Ok(sim.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EventKind {
    MeasurementTick,
    FlowArrival,
    FlowCompletion,
    GcTick,
    SampleKpis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct ClassKey {
    src: NodeId,
    dst: NodeId,
    label: Option<Label>,
}

#[derive(Debug)]
struct Class {
    key: ClassKey,
    /// engine link indices, access links included
    path: Vec<usize>,
    /// nodes whose label entry the class uses
    transit: Vec<NodeId>,
    count: u32,
    /// per member, bytes per second
    rate: f64,
    /// bytes delivered per member since creation
    service: f64,
    finish: BinaryHeap<Reverse<(OrderedFloat<f64>, u64)>>,
    /// carried traffic during the current measurement interval
    seen: bool,
}

/// A flow in progress.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActiveFlow {
    pub id: u64,
    pub tuple: FiveTuple,
    pub src_pe: NodeId,
    pub dst_pe: NodeId,
    pub size: f64,
    pub admitted_at: f64,
    pub label: Option<Label>,
    /// core links from ingress to egress PE
    pub core_path: Vec<LinkId>,
    #[serde(skip)]
    class: usize,
    #[serde(skip)]
    threshold: f64,
}

pub struct Simulation {
    topology: Arc<Topology>,
    cfg: EngineConfig,
    controller: Option<Controller>,
    switches: Vec<Switch>,
    /// legacy mode only; the mechanism uses the controller's ledger
    ledger: MessageLedger,

    capacity: Vec<f64>,
    ingress: Vec<usize>,
    egress: Vec<usize>,
    legacy_paths: Vec<Vec<Option<Vec<NodeId>>>>,

    classes: Vec<Option<Class>>,
    class_index: HashMap<ClassKey, usize>,
    free_classes: Vec<usize>,
    flows: HashMap<u64, ActiveFlow>,
    dirty: bool,
    solver: FairShareSolver,
    scratch_active: Vec<usize>,
    scratch_weights: Vec<f64>,
    link_rate: Vec<f64>,
    total_rate: f64,

    interval_bytes: Vec<f64>,
    link_bytes: Vec<f64>,
    label_entries: HashMap<Label, u64>,
    draining: BTreeSet<Label>,

    arrivals: std::iter::Peekable<Box<dyn Iterator<Item = FlowArrival>>>,
    now: f64,
    next_tick: u64,
    next_gc: u64,
    next_sample: u64,

    result: RunResult,
}

impl Simulation {
    /// Builds the network and, in mechanism mode, performs the initial label
    /// allocation at t = 0.
    pub fn new(
        topology: Arc<Topology>,
        cfg: EngineConfig,
        arrivals: Box<dyn Iterator<Item = FlowArrival>>,
    ) -> Result<Self, EngineError> {
        cfg.validate()?;
        let n_core = topology.link_count();
        let mut capacity: Vec<f64> = topology.links().iter().map(|l| l.capacity).collect();
        let mut ingress = vec![usize::MAX; topology.node_count()];
        let mut egress = vec![usize::MAX; topology.node_count()];
        for pe in topology.pes() {
            ingress[pe.index()] = capacity.len();
            capacity.push(cfg.access_capacity);
            egress[pe.index()] = capacity.len();
            capacity.push(cfg.access_capacity);
        }
        let n_links = capacity.len();

        let switches: Vec<Switch> = topology
            .nodes()
            .map(|n| Switch::new(n, topology.role(n).expect("node exists")))
            .collect();

        let legacy_paths = if cfg.mode == Mode::Legacy {
            let lsdb = Lsdb::new(&topology, cfg.metric_values);
            let mut paths = vec![Vec::new(); topology.node_count()];
            for src in topology.pes() {
                let tree = dijkstra_from(&topology, &lsdb, src).expect("node exists");
                paths[src.index()] = topology.nodes().map(|d| tree.path_to(d)).collect();
            }
            paths
        } else {
            Vec::new()
        };

        let first_sample = (cfg.warmup.floor() as u64) + 1;
        let mut sim = Simulation {
            controller: None,
            switches,
            ledger: MessageLedger::default(),
            capacity,
            ingress,
            egress,
            legacy_paths,
            classes: Vec::new(),
            class_index: HashMap::new(),
            free_classes: Vec::new(),
            flows: HashMap::new(),
            dirty: false,
            solver: FairShareSolver::default(),
            scratch_active: Vec::new(),
            scratch_weights: Vec::new(),
            link_rate: vec![0.0; n_links],
            total_rate: 0.0,
            interval_bytes: vec![0.0; n_core],
            link_bytes: vec![0.0; n_links],
            label_entries: HashMap::new(),
            draining: BTreeSet::new(),
            arrivals: arrivals.peekable(),
            now: 0.0,
            next_tick: 1,
            next_gc: 1,
            next_sample: first_sample,
            result: RunResult {
                mode: cfg.mode,
                replication: 0,
                seed: 0,
                warn_th: cfg.thresholds.warn_th,
                cong_th: cfg.thresholds.cong_th,
                sim_time: cfg.sim_time,
                warmup: cfg.warmup,
                arrivals: 0,
                admitted: 0,
                completed: 0,
                rejected: 0,
                active_at_end: 0,
                offered_bytes: 0.0,
                tx_bytes: 0.0,
                rx_bytes: 0.0,
                forwarding_faults: 0,
                path_violations: 0,
                drain_admissions: 0,
                capacity_violations: 0,
                epochs_created: 0,
                labels_retired: 0,
                reallocation_batches: 0,
                peak_live_labels: 0,
                peak_labels_p: 0,
                messages: MessageCounts::default(),
                samples: Vec::new(),
            },
            topology,
            cfg,
        };

        if sim.cfg.mode == Mode::Mechanism {
            let mut ctl = Controller::new(
                sim.topology.clone(),
                sim.cfg.metric_values,
                sim.cfg.thresholds,
                sim.cfg.policy,
                sim.cfg.gc_timeout,
            );
            let init = ctl.initial_allocation(0.0)?;
            sim.result.epochs_created += init.epochs.len() as u64;
            sim.controller = Some(ctl);
            sim.apply(&init.commands);
        }
        Ok(sim)
    }

    /// Labels the result with its replication index and derived seed.
    pub fn set_identity(&mut self, replication: u64, seed: u64) {
        self.result.replication = replication;
        self.result.seed = seed;
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn topology(&self) -> &Arc<Topology> {
        &self.topology
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn controller(&self) -> Option<&Controller> {
        self.controller.as_ref()
    }

    pub fn switches(&self) -> &[Switch] {
        &self.switches
    }

    /// Direct table access, for fault injection in tests.
    pub fn switches_mut(&mut self) -> &mut [Switch] {
        &mut self.switches
    }

    pub fn active_flows(&self) -> impl Iterator<Item = &ActiveFlow> {
        self.flows.values()
    }

    pub fn active_flow(&self, id: u64) -> Option<&ActiveFlow> {
        self.flows.get(&id)
    }

    pub fn active_flow_count(&self) -> usize {
        self.flows.len()
    }

    /// Current rate of a flow, bits per second.
    pub fn flow_rate(&mut self, id: u64) -> Option<f64> {
        self.refresh_rates();
        let c = self.flows.get(&id)?.class;
        self.classes[c].as_ref().map(|c| c.rate * 8.0)
    }

    /// Bytes carried by each core link since t = 0.
    pub fn core_link_bytes(&self) -> &[f64] {
        &self.link_bytes[..self.topology.link_count()]
    }

    /// Active flows per label.
    pub fn flows_on_label(&self, label: Label) -> u64 {
        self.controller
            .as_ref()
            .and_then(|c| c.epoch(label))
            .map_or(0, |e| e.flows)
    }

    /// Label-table entries for `label` across all nodes.
    pub fn label_entry_count(&self, label: Label) -> u64 {
        self.label_entries.get(&label).copied().unwrap_or(0)
    }

    pub fn messages(&self) -> &MessageLedger {
        match &self.controller {
            Some(c) => c.ledger(),
            None => &self.ledger,
        }
    }

    pub fn result(&self) -> &RunResult {
        &self.result
    }

    pub fn run_to_end(&mut self) -> Result<(), EngineError> {
        self.run_until(self.cfg.sim_time)
    }

    /// Processes every event with time <= `t` (capped at the horizon) and
    /// advances the clock to `t`.
    pub fn run_until(&mut self, t: f64) -> Result<(), EngineError> {
        let t = t.min(self.cfg.sim_time);
        loop {
            self.refresh_rates();
            let Some((time, kind, class)) = self.next_event() else {
                break;
            };
            if time > t {
                break;
            }
            self.advance(time);
            match kind {
                EventKind::MeasurementTick => self.on_measurement()?,
                EventKind::FlowArrival => {
                    let a = self.arrivals.next().expect("peeked");
                    self.on_arrival(a)?;
                }
                EventKind::FlowCompletion => self.on_completion(class)?,
                EventKind::GcTick => self.on_gc()?,
                EventKind::SampleKpis => self.on_sample(),
            }
        }
        if t > self.now {
            self.advance(t);
        }
        Ok(())
    }

    /// Final result; flows still active count as delivered up to the horizon.
    pub fn finish(mut self) -> RunResult {
        self.result.active_at_end = self.flows.len() as u64;
        self.result.messages = self.messages().total();
        if let Some(c) = &self.controller {
            self.result.reallocation_batches = c.batches();
        }
        self.result.tx_bytes = self.result.rx_bytes;
        self.result
    }

    fn next_event(&mut self) -> Option<(f64, EventKind, usize)> {
        let arrival = self.arrivals.peek().map(|a| a.time);
        let mut best: Option<(f64, EventKind, usize)> = None;
        let mut offer = |time: f64, kind: EventKind, class: usize| {
            let better = match best {
                None => true,
                Some((bt, bk, _)) => time < bt || (time == bt && kind < bk),
            };
            if better {
                best = Some((time, kind, class));
            }
        };
        if let Some(t) = arrival {
            offer(t, EventKind::FlowArrival, 0);
        }
        if self.cfg.mode == Mode::Mechanism {
            offer(
                self.next_tick as f64 * self.cfg.thresholds.measurement_interval,
                EventKind::MeasurementTick,
                0,
            );
        }
        offer(self.next_gc as f64 * self.cfg.gc_interval, EventKind::GcTick, 0);
        offer(self.next_sample as f64, EventKind::SampleKpis, 0);
        for (i, c) in self.classes.iter().enumerate() {
            let Some(c) = c else { continue };
            let Some(Reverse((thr, _))) = c.finish.peek() else {
                continue;
            };
            let left = thr.0 - c.service;
            let time = if left <= COMPLETION_EPS * thr.0 {
                self.now
            } else if c.rate > 0.0 {
                self.now + left / c.rate
            } else {
                continue;
            };
            offer(time, EventKind::FlowCompletion, i);
        }
        best.filter(|b| b.0 <= self.cfg.sim_time)
    }

    fn advance(&mut self, to: f64) {
        let dt = to - self.now;
        if dt > 0.0 {
            for c in self.classes.iter_mut().flatten() {
                if c.count > 0 {
                    c.service += c.rate * dt;
                }
            }
            let n_core = self.interval_bytes.len();
            for (l, r) in self.link_rate.iter().enumerate() {
                if *r > 0.0 {
                    self.link_bytes[l] += r * dt;
                    if l < n_core {
                        self.interval_bytes[l] += r * dt;
                    }
                }
            }
            let lo = self.now.max(self.cfg.warmup);
            let hi = to.min(self.cfg.sim_time);
            if hi > lo {
                self.result.rx_bytes += self.total_rate * (hi - lo);
            }
            self.now = to;
        }
    }

    fn refresh_rates(&mut self) {
        if !self.dirty {
            return;
        }
        self.dirty = false;
        let mut active = std::mem::take(&mut self.scratch_active);
        let mut weights = std::mem::take(&mut self.scratch_weights);
        active.clear();
        weights.clear();
        for (i, c) in self.classes.iter().enumerate() {
            if let Some(c) = c.as_ref().filter(|c| c.count > 0) {
                active.push(i);
                weights.push(c.count as f64);
            }
        }
        let paths: Vec<&[usize]> = active
            .iter()
            .map(|&i| self.classes[i].as_ref().expect("active").path.as_slice())
            .collect();
        let rates = self.solver.solve(&self.capacity, &paths, &weights);

        self.link_rate.iter_mut().for_each(|r| *r = 0.0);
        self.total_rate = 0.0;
        for (k, &i) in active.iter().enumerate() {
            let c = self.classes[i].as_mut().expect("active");
            c.rate = rates[k] / 8.0;
            let agg = c.rate * c.count as f64;
            self.total_rate += agg;
            for &l in &c.path {
                self.link_rate[l] += agg;
            }
        }
        for (l, r) in self.link_rate.iter().enumerate() {
            if r * 8.0 > self.capacity[l] * (1.0 + CAPACITY_EPS) {
                self.result.capacity_violations += 1;
            }
        }
        self.scratch_active = active;
        self.scratch_weights = weights;
    }

    fn apply(&mut self, commands: &[TableCommand]) {
        for cmd in commands {
            match *cmd {
                TableCommand::CftReplace {
                    node, prefix, action, ..
                } => {
                    self.switches[node.index()].cft.replace_destination(prefix, action);
                }
                TableCommand::PInstall {
                    node,
                    label,
                    out,
                    idle_timeout,
                } => {
                    let table = &mut self.switches[node.index()].labels;
                    if !table.contains(&label) {
                        *self.label_entries.entry(label).or_default() += 1;
                    }
                    table.insert(label, out, idle_timeout, self.now);
                }
                TableCommand::PDemote {
                    node,
                    label,
                    idle_timeout,
                } => {
                    self.switches[node.index()].labels.set_timeout(&label, idle_timeout);
                    self.draining.insert(label);
                }
                TableCommand::PRemove { node, label } => {
                    if self.switches[node.index()].labels.remove(&label).is_some() {
                        self.dec_label_entries(label);
                    }
                }
            }
        }
        let peak = self
            .switches
            .iter()
            .filter(|s| s.role == NodeRole::P)
            .map(|s| s.labels.len())
            .max()
            .unwrap_or(0) as u64;
        self.result.peak_labels_p = self.result.peak_labels_p.max(peak);
        if let Some(c) = &self.controller {
            self.result.peak_live_labels = self.result.peak_live_labels.max(c.live_label_count() as u64);
        }
    }

    fn dec_label_entries(&mut self, label: Label) {
        if let Some(n) = self.label_entries.get_mut(&label) {
            *n -= 1;
            if *n == 0 {
                self.label_entries.remove(&label);
            }
        }
    }

    fn on_arrival(&mut self, a: FlowArrival) -> Result<(), EngineError> {
        self.result.arrivals += 1;
        if a.time > self.cfg.warmup {
            self.result.offered_bytes += a.size;
        }
        if a.src_pe == a.dst_pe || !self.topology.is_pe(a.src_pe) || !self.topology.is_pe(a.dst_pe) {
            self.result.rejected += 1;
            return Ok(());
        }
        match self.cfg.mode {
            Mode::Mechanism => self.admit_mechanism(a),
            Mode::Legacy => {
                self.admit_legacy(a);
                Ok(())
            }
        }
    }

    /// Ingress PE pipeline, then label forwarding hop by hop to the egress PE.
    fn admit_mechanism(&mut self, a: FlowArrival) -> Result<(), EngineError> {
        let now = self.now;
        let src = a.src_pe;
        let decision = self.switches[src.index()].pe_admit(&a.tuple, now, self.cfg.dft_idle_timeout)?;
        let action = match decision {
            Decision::DftHit(act) | Decision::CftCopied(act) => act,
            Decision::PacketIn => {
                let ctl = self.controller.as_mut().expect("mechanism mode");
                ctl.record_packet_in(now);
                let Some(act) = active_action(ctl, &self.topology, src, a.dst_pe) else {
                    self.result.rejected += 1;
                    return Ok(());
                };
                self.switches[src.index()]
                    .dft
                    .insert(a.tuple, act, IdleTimeout::After(self.cfg.dft_idle_timeout), now);
                act
            }
            Decision::NoMatch => {
                self.result.rejected += 1;
                return Ok(());
            }
        };

        let label = action.label;
        let mut core = vec![action.out];
        let mut transit = Vec::new();
        let mut node = self.topology.link(action.out).to;
        let budget = self.topology.node_count();
        while node != a.dst_pe {
            if core.len() > budget {
                self.result.forwarding_faults += 1;
                self.result.rejected += 1;
                return Ok(());
            }
            match self.switches[node.index()].p_forward(label, now) {
                Ok(out) => {
                    transit.push(node);
                    core.push(out);
                    node = self.topology.link(out).to;
                }
                Err(_) => {
                    self.result.forwarding_faults += 1;
                    self.result.rejected += 1;
                    return Ok(());
                }
            }
        }

        self.switches[src.index()].dft.pin(&a.tuple, now);
        let ctl = self.controller.as_mut().expect("mechanism mode");
        if ctl.attach_flow(label)? != EpochState::Active {
            self.result.drain_admissions += 1;
        }
        self.insert_flow(a, Some(label), core, transit);
        Ok(())
    }

    fn admit_legacy(&mut self, a: FlowArrival) {
        let Some(nodes) = self.legacy_paths[a.src_pe.index()][a.dst_pe.index()].clone() else {
            self.result.rejected += 1;
            return;
        };
        let mut core = Vec::with_capacity(nodes.len());
        let mut ports = Vec::with_capacity(nodes.len());
        for w in nodes.windows(2) {
            let l = self.topology.find_link(w[0], w[1]).expect("path uses existing links");
            core.push(l);
            ports.push(Port::Link(l));
        }
        ports.push(Port::Client);
        let pi = legacy_admit(
            &mut self.switches,
            &nodes,
            &ports,
            &a.tuple,
            self.now,
            self.cfg.legacy_idle_timeout,
        );
        let c = self.ledger.at(self.now);
        c.packet_in += pi;
        c.flow_mods += pi;
        let transit = nodes[1..nodes.len() - 1].to_vec();
        self.insert_flow(a, None, core, transit);
    }

    fn insert_flow(&mut self, a: FlowArrival, label: Option<Label>, core: Vec<LinkId>, transit: Vec<NodeId>) {
        let key = ClassKey {
            src: a.src_pe,
            dst: a.dst_pe,
            label,
        };
        let idx = match self.class_index.get(&key) {
            Some(&i) => {
                let c = self.classes[i].as_ref().expect("indexed class");
                let same = c.path.len() == core.len() + 2
                    && c.path[1..c.path.len() - 1]
                        .iter()
                        .zip(&core)
                        .all(|(&x, y)| x == y.index());
                if !same {
                    self.result.path_violations += 1;
                }
                i
            }
            None => {
                let mut path = Vec::with_capacity(core.len() + 2);
                path.push(self.ingress[a.src_pe.index()]);
                path.extend(core.iter().map(|l| l.index()));
                path.push(self.egress[a.dst_pe.index()]);
                let class = Class {
                    key,
                    path,
                    transit,
                    count: 0,
                    rate: 0.0,
                    service: 0.0,
                    finish: BinaryHeap::new(),
                    seen: false,
                };
                let i = match self.free_classes.pop() {
                    Some(i) => {
                        self.classes[i] = Some(class);
                        i
                    }
                    None => {
                        self.classes.push(Some(class));
                        self.classes.len() - 1
                    }
                };
                self.class_index.insert(key, i);
                i
            }
        };

        let now = self.now;
        let c = self.classes[idx].as_mut().expect("class exists");
        if c.count == 0 {
            if let Some(label) = c.key.label {
                for n in &c.transit {
                    self.switches[n.index()].labels.pin(&label, now);
                }
            }
        }
        let threshold = c.service + a.size;
        c.finish.push(Reverse((OrderedFloat(threshold), a.id)));
        c.count += 1;
        c.seen = true;
        self.dirty = true;
        self.result.admitted += 1;
        self.flows.insert(
            a.id,
            ActiveFlow {
                id: a.id,
                tuple: a.tuple,
                src_pe: a.src_pe,
                dst_pe: a.dst_pe,
                size: a.size,
                admitted_at: now,
                label,
                core_path: core,
                class: idx,
                threshold,
            },
        );
    }

    fn on_completion(&mut self, class: usize) -> Result<(), EngineError> {
        let now = self.now;
        let c = self.classes[class].as_mut().expect("completion of a live class");
        let Reverse((_, id)) = c.finish.pop().expect("class has pending flows");
        c.count -= 1;
        let emptied = c.count == 0;
        let label = c.key.label;
        let transit = if emptied { c.transit.clone() } else { Vec::new() };
        self.dirty = true;
        let flow = self.flows.remove(&id).expect("flow is active");
        debug_assert!(flow.threshold.is_finite());
        self.result.completed += 1;

        if !self.forwarding_unchanged(&flow) {
            self.result.path_violations += 1;
        }
        match label {
            Some(label) => {
                self.switches[flow.src_pe.index()].dft.unpin(&flow.tuple, now);
                if emptied {
                    for n in transit {
                        self.switches[n.index()].labels.unpin(&label, now);
                    }
                }
                self.controller.as_mut().expect("mechanism mode").detach_flow(label)?;
            }
            None => {
                let path = self.legacy_paths[flow.src_pe.index()][flow.dst_pe.index()]
                    .as_ref()
                    .expect("admitted flows have a path");
                for n in path {
                    self.switches[n.index()].legacy.unpin(&flow.tuple, now);
                }
            }
        }
        Ok(())
    }

    /// Re-reads the tables along the flow's path without touching them.
    fn forwarding_unchanged(&self, flow: &ActiveFlow) -> bool {
        match flow.label {
            Some(label) => {
                let first = self.switches[flow.src_pe.index()].dft.get(&flow.tuple).map(|e| e.value);
                if first
                    != Some(LabelAction {
                        label,
                        out: flow.core_path[0],
                    })
                {
                    return false;
                }
                flow.core_path[1..].iter().all(|&l| {
                    let from = self.topology.link(l).from;
                    self.switches[from.index()].labels.get(&label).map(|e| e.value) == Some(l)
                })
            }
            None => {
                let hops = flow.core_path.iter().all(|&l| {
                    let from = self.topology.link(l).from;
                    self.switches[from.index()].legacy.get(&flow.tuple).map(|e| e.value) == Some(Port::Link(l))
                });
                hops && self.switches[flow.dst_pe.index()]
                    .legacy
                    .get(&flow.tuple)
                    .map(|e| e.value)
                    == Some(Port::Client)
            }
        }
    }

    fn on_measurement(&mut self) -> Result<(), EngineError> {
        self.next_tick += 1;
        let now = self.now;
        let interval = self.cfg.thresholds.measurement_interval;
        let samples: Vec<LinkUtilizationSample> = self
            .topology
            .link_ids()
            .map(|l| {
                LinkUtilizationSample::from_bytes(
                    l,
                    self.interval_bytes[l.index()],
                    self.topology.link(l).capacity,
                    interval,
                )
            })
            .collect();
        self.interval_bytes.iter_mut().for_each(|b| *b = 0.0);

        let ctl = self.controller.as_mut().expect("mechanism mode");
        let changes = ctl.measurement_tick(now, &samples)?;
        if !changes.is_empty() {
            let changed: Vec<LinkId> = changes.iter().map(|c| c.link).collect();
            let changed_set: BTreeSet<usize> = changed.iter().map(|l| l.index()).collect();
            let mut activity = LinkLabelActivity::new();
            for c in self.classes.iter().flatten() {
                let (true, Some(label)) = (c.seen, c.key.label) else {
                    continue;
                };
                for &l in &c.path {
                    if changed_set.contains(&l) {
                        activity.entry(LinkId(l as u32)).or_default().insert(label);
                    }
                }
            }
            let affected = ctl.affected_pes(&changed, &activity);
            let realloc = ctl.reallocate(now, &affected)?;
            self.result.epochs_created += realloc.epochs.len() as u64;
            self.apply(&realloc.commands);
        }

        for i in 0..self.classes.len() {
            let Some(c) = self.classes[i].as_mut() else { continue };
            if c.count == 0 {
                self.class_index.remove(&c.key);
                self.classes[i] = None;
                self.free_classes.push(i);
            } else {
                c.seen = true;
            }
        }
        Ok(())
    }

    fn on_gc(&mut self) -> Result<(), EngineError> {
        self.next_gc += 1;
        let now = self.now;
        let mut expired_labels = Vec::new();
        for sw in &mut self.switches {
            let exp = sw.gc_tick(now);
            expired_labels.extend(exp.labels);
        }
        for l in expired_labels {
            self.dec_label_entries(l);
        }
        if let Some(ctl) = self.controller.as_mut() {
            let ready: Vec<Label> = self
                .draining
                .iter()
                .copied()
                .filter(|l| !self.label_entries.contains_key(l) && ctl.epoch(*l).is_some_and(|e| e.flows == 0))
                .collect();
            for l in ready {
                ctl.recycle(l, 0, now)?;
                self.draining.remove(&l);
                self.result.labels_retired += 1;
            }
        }
        Ok(())
    }

    fn on_sample(&mut self) {
        let t = self.next_sample;
        self.next_sample += 1;
        let mechanism = self.cfg.mode == Mode::Mechanism;
        let mut sum_dft = 0u64;
        let mut labels_per_p = Vec::new();
        let mut active_labels_per_p = Vec::new();
        for sw in &self.switches {
            let size = if mechanism { sw.dft.len() } else { sw.legacy.len() };
            match sw.role {
                NodeRole::Pe => sum_dft += size as u64,
                NodeRole::P => {
                    let (all, used) = if mechanism {
                        (sw.labels.len(), sw.labels.pinned_count())
                    } else {
                        (size, sw.legacy.pinned_count())
                    };
                    labels_per_p.push(all as u32);
                    active_labels_per_p.push(used as u32);
                }
            }
        }
        let msgs = self.messages().second(t as usize - 1);
        let controller_msgs = if mechanism { msgs.mechanism() } else { msgs.openflow() };
        self.result.samples.push(KpiSample {
            t: t as u32,
            sum_dft_pe: sum_dft,
            labels_per_p,
            active_labels_per_p,
            total_flows: self.flows.len() as u64,
            packet_in: msgs.packet_in,
            controller_msgs,
            rx_bytes: self.result.rx_bytes,
            tx_bytes: self.result.rx_bytes,
        });
    }

    /// Labels seen on each core link during the current interval.
    pub fn link_label_activity(&self) -> LinkLabelActivity {
        let n_core = self.topology.link_count();
        let mut out: LinkLabelActivity = BTreeMap::new();
        for c in self.classes.iter().flatten() {
            let (true, Some(label)) = (c.seen, c.key.label) else {
                continue;
            };
            for &l in c.path.iter().filter(|&&l| l < n_core) {
                out.entry(LinkId(l as u32)).or_default().insert(label);
            }
        }
        out
    }
}

/// DFT action derived from the destination's active tree, for table-miss
/// handling at the controller.
fn active_action(ctl: &Controller, topo: &Topology, src: NodeId, dst: NodeId) -> Option<LabelAction> {
    let e = ctl.active_epoch(dst)?;
    let next = e.tree.next_hop(src)?;
    Some(LabelAction {
        label: e.label,
        out: topo.find_link(src, next)?,
    })
}
