// Copyright (c) 2026 The labelflow Authors.
// SPDX-License-Identifier: Apache-2.0

mod common;

use std::sync::Arc;

use labelflow::controller::EpochState;
use labelflow::engine::{run, EngineConfig, Mode, Scenario, Simulation};
use labelflow::topology::{load_topology, NodeId, US_BACKBONE};
use labelflow::traffic::{FlowArrival, TrafficConfig};

use common::{drain_simulation, load, scaled, PE_D, PE_S};

#[test]
fn drain_sequence_and_recycling() {
    let mut sim = drain_simulation();
    let mut last_flows = std::collections::BTreeMap::new();
    let mut t: f64 = 0.0;
    while t < 15.0 {
        t = (t * 10.0 + 1.0).round() / 10.0;
        sim.run_until(t).unwrap();
        let ctl = sim.controller().unwrap();
        for e in ctl.history(PE_D) {
            if e.state != EpochState::Draining {
                continue;
            }
            let key = (e.label, e.epoch);
            if let Some(&prev) = last_flows.get(&key) {
                assert!(e.flows <= prev, "{} grew from {prev} to {} at {t}", e.label, e.flows);
            }
            last_flows.insert(key, e.flows);
        }
    }

    let ctl = sim.controller().unwrap();
    let h = ctl.history(PE_D);
    assert!(h.len() >= 5, "{h:?}");
    let first: Vec<_> = h[..4].iter().map(|e| e.label).collect();
    let created: Vec<f64> = h[..4].iter().map(|e| e.created_at).collect();
    assert_eq!(created, vec![0.0, 1.0, 2.0, 3.0]);
    let mut distinct = first.clone();
    distinct.dedup();
    assert_eq!(distinct.len(), 4);

    // each new tree moved to the next longer path
    let hops: Vec<usize> = h[..4]
        .iter()
        .map(|e| e.tree.path_from(PE_S).unwrap().len() - 1)
        .collect();
    assert_eq!(hops, vec![2, 3, 4, 5]);

    // A ends at 4.5 s; its label goes once gc_timeout has passed
    let l1 = h[0];
    assert_eq!(l1.state, EpochState::Retired);
    let retired = l1.retired_at.unwrap();
    assert!((5.5..=5.6 + 1e-9).contains(&retired), "retired at {retired}");
    let reuse = h.iter().find(|e| e.created_at > retired).expect("a later allocation");
    assert_eq!(reuse.label, l1.label);

    let r = sim.finish();
    assert_eq!(r.path_violations, 0);
    assert_eq!(r.forwarding_faults, 0);
    assert_eq!(r.capacity_violations, 0);
    assert_eq!(r.drain_admissions, 0);
    assert_eq!(r.completed, 5);
}

#[test]
fn admitted_flow_keeps_path_through_reallocation() {
    let mut sim = drain_simulation();
    sim.run_until(0.5).unwrap();
    let a = sim.active_flow(0).unwrap().clone();
    sim.run_until(4.0).unwrap();
    let still = sim.active_flow(0).unwrap();
    assert_eq!(still.core_path, a.core_path);
    assert_eq!(still.label, a.label);
    assert_ne!(
        sim.controller().unwrap().active_epoch(PE_D).unwrap().label,
        a.label.unwrap()
    );
    // alone on its path: full link rate
    assert!((sim.flow_rate(0).unwrap() - 100e6).abs() < 1e-3);
}

fn light_traffic(sim_time: f64) -> TrafficConfig {
    TrafficConfig {
        mean_interarrival: 0.05,
        sim_time,
        warmup: 2.0,
        ..Default::default()
    }
}

#[test]
fn congestion_free_square_holds_one_label_per_destination() {
    let topo = load("square.topo");
    // two 10 Mbit/s sources never push a 100 Mbit/s core link past 0.2
    let r = run(&Scenario {
        topology: topo.clone(),
        engine: EngineConfig {
            access_capacity: 10e6,
            ..Default::default()
        },
        traffic: light_traffic(30.0),
        replication: 0,
    })
    .unwrap();
    assert_eq!(r.reallocation_batches, 0);
    assert!(!r.samples.is_empty());
    for s in &r.samples {
        assert!(s.labels_per_p.iter().all(|&n| n == 2), "{:?}", s.labels_per_p);
    }
    assert_eq!(r.peak_labels_p, 2);
}

#[test]
fn congestion_free_backbone_bound() {
    let base = load_topology(US_BACKBONE).unwrap();
    let topo = Arc::new(scaled(&base, 100.0));
    let d = topo.pes().len() as u32;
    let r = run(&Scenario {
        topology: topo,
        engine: EngineConfig::default(),
        traffic: TrafficConfig {
            sim_time: 20.0,
            ..Default::default()
        },
        replication: 3,
    })
    .unwrap();
    assert_eq!(r.reallocation_batches, 0);
    assert!(r.peak_labels_p <= d as u64);
    for s in &r.samples {
        assert!(s.labels_per_p.iter().all(|&n| n <= d));
    }
}

#[test]
fn bytes_are_conserved_when_every_flow_finishes() {
    let topo = load("square.topo");
    let arrivals: Vec<FlowArrival> = labelflow::traffic::generate(&light_traffic(1000.0), &topo.pes(), 7)
        .unwrap()
        .take_while(|a| a.time < 20.0)
        .collect();
    let offered: f64 = arrivals.iter().map(|a| a.size).sum();
    for mode in [Mode::Mechanism, Mode::Legacy] {
        let cfg = EngineConfig {
            mode,
            sim_time: 200.0,
            warmup: 0.0,
            ..Default::default()
        };
        let mut sim = Simulation::new(topo.clone(), cfg, Box::new(arrivals.clone().into_iter())).unwrap();
        sim.run_to_end().unwrap();
        let r = sim.finish();
        assert_eq!(r.completed, arrivals.len() as u64, "{mode}");
        assert_eq!(r.active_at_end, 0);
        assert!(
            common::rel_err(r.rx_bytes, offered) < 1e-9,
            "{mode}: {} vs {offered}",
            r.rx_bytes
        );
        assert_eq!(r.path_violations, 0);
        assert_eq!(r.capacity_violations, 0);
    }
}

#[test]
fn legacy_packet_in_per_switch() {
    let topo = load("square.topo");
    let n = 25u64;
    let arrivals: Vec<FlowArrival> = (0..n)
        .map(|i| FlowArrival::scripted(i, 1.0 + i as f64 * 0.01, NodeId(0), NodeId(1), 1e5))
        .collect();
    let cfg = EngineConfig {
        mode: Mode::Legacy,
        sim_time: 10.0,
        warmup: 0.0,
        ..Default::default()
    };
    let mut sim = Simulation::new(topo.clone(), cfg, Box::new(arrivals.into_iter())).unwrap();
    sim.run_to_end().unwrap();
    // 0 -> 2 -> {3|4} -> 5 -> 1: five switches
    let on_path: Vec<u64> = sim.switches().iter().map(|s| s.packet_in).collect();
    assert_eq!(on_path.iter().sum::<u64>(), 5 * n);
    assert_eq!(on_path.iter().filter(|&&p| p == 0).count(), 1);
    let r = sim.finish();
    assert_eq!(r.messages.packet_in, 5 * n);
    assert_eq!(r.messages.openflow(), 2 * r.messages.packet_in);
}

#[test]
fn mechanism_sends_no_packet_in() {
    let topo = load("square.topo");
    let r = run(&Scenario {
        topology: topo.clone(),
        engine: EngineConfig::default(),
        traffic: light_traffic(15.0),
        replication: 1,
    })
    .unwrap();
    assert_eq!(r.messages.packet_in, 0);
    assert!(r.samples.iter().all(|s| s.packet_in == 0));
    // statistics round every second: one request and one response per node
    let n = topo.node_count() as u64;
    assert_eq!(r.messages.stat_requests, 15 * n);
    assert_eq!(r.messages.stat_responses, 15 * n);
    assert!(r.samples.iter().all(|s| s.controller_msgs <= 3 * n));
}
