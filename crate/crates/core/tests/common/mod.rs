// Copyright (c) 2026 The labelflow Authors.
// SPDX-License-Identifier: Apache-2.0

//! Reference implementations and fixtures shared by the integration tests
//! and the acceptance binary. Nothing here calls into the code under test
//! for the values it checks.

#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, RngExt};

use labelflow::engine::{EngineConfig, Simulation};
use labelflow::topology::{load_topology_file, DirectedLink, Lsdb, NodeId, NodeRole, Topology};
use labelflow::traffic::FlowArrival;

pub fn topo_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("topologies").join(name)
}

pub fn load(name: &str) -> Arc<Topology> {
    Arc::new(load_topology_file(&topo_path(name)).expect("fixture parses"))
}

/// Random simple digraph with 2..=max_nodes nodes, edge probability in
/// [0.05, 0.5] and integer metrics in 1..=max_metric.
pub fn random_digraph<R: Rng>(rng: &mut R, max_nodes: usize, max_metric: u32) -> Topology {
    let n = rng.random_range(2..=max_nodes);
    let p: f64 = rng.random_range(0.05..0.5);
    let mut links = Vec::new();
    for a in 0..n {
        for b in 0..n {
            if a != b && rng.random_bool(p) {
                links.push(DirectedLink {
                    from: NodeId(a as u32),
                    to: NodeId(b as u32),
                    capacity: 1e8,
                    delay: 0.0,
                    base_metric: rng.random_range(1..=max_metric),
                });
            }
        }
    }
    Topology::new(vec![NodeRole::Pe; n], links)
}

/// Distances from every node to `root` by Bellman-Ford relaxation over the
/// raw link list.
pub fn bellman_ford_to_root(topo: &Topology, lsdb: &Lsdb, root: NodeId) -> Vec<Option<u64>> {
    let n = topo.node_count();
    let mut dist: Vec<Option<u64>> = vec![None; n];
    dist[root.index()] = Some(0);
    for _ in 0..n {
        let mut changed = false;
        for id in topo.link_ids() {
            let l = topo.link(id);
            if let Some(dv) = dist[l.to.index()] {
                let cand = dv + lsdb.metric(id);
                if dist[l.from.index()].is_none_or(|du| cand < du) {
                    dist[l.from.index()] = Some(cand);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

/// Max-min fair shares in exact rational arithmetic: repeatedly find the
/// link with the smallest equal split of its residual capacity among its
/// unfrozen flows and freeze those flows at that split.
pub fn rational_max_min(capacities: &[i64], paths: &[Vec<usize>]) -> Vec<Option<BigRational>> {
    let mut residual: Vec<BigRational> = capacities
        .iter()
        .map(|&c| BigRational::from_integer(BigInt::from(c)))
        .collect();
    let mut rate: Vec<Option<BigRational>> = vec![None; paths.len()];
    loop {
        let mut best: Option<(BigRational, usize)> = None;
        for (l, res) in residual.iter().enumerate() {
            let k = paths
                .iter()
                .enumerate()
                .filter(|(f, p)| rate[*f].is_none() && p.contains(&l))
                .count();
            if k == 0 {
                continue;
            }
            let share = res / BigRational::from_integer(BigInt::from(k));
            if best.as_ref().is_none_or(|(b, _)| share < *b) {
                best = Some((share, l));
            }
        }
        let Some((share, l)) = best else { break };
        for f in 0..paths.len() {
            if rate[f].is_none() && paths[f].contains(&l) {
                for &m in &paths[f] {
                    residual[m] -= &share;
                }
                rate[f] = Some(share.clone());
            }
        }
    }
    rate
}

pub fn to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        0.0
    } else {
        r.to_f64().expect("finite")
    }
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// Sample median of a non-empty slice.
pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Student-t 0.975 quantiles, tabulated to 16 digits.
pub fn t975(dof: usize) -> f64 {
    match dof {
        1 => 12.706204736432095,
        2 => 4.302652729696142,
        3 => 3.182446305284263,
        4 => 2.7764451051977987,
        9 => 2.2621571628540993,
        19 => 2.093024054408263,
        29 => 2.045229642132703,
        _ => panic!("no table value for {dof} degrees of freedom"),
    }
}

/// Half-width of the 95% t-interval, from the textbook formula.
pub fn t_half_width(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    t975(samples.len() - 1) * var.sqrt() / n.sqrt()
}

pub const PE_S: NodeId = NodeId(0);
pub const PE_D: NodeId = NodeId(1);

/// Drain script on the four-path topology, all flows PE_S -> PE_D over
/// 100 Mbit/s links:
/// - A at 0 s saturates the 2-hop path until 4.5 s
/// - B at 1 s saturates the 3-hop path until 4 s
/// - C at 2 s saturates the 4-hop path until 4 s
/// - D at 3 s is a short flow on the 5-hop path
/// - E at 7 s loads whatever path is active then
pub fn drain_script() -> Vec<FlowArrival> {
    vec![
        FlowArrival::scripted(0, 0.0, PE_S, PE_D, 56.25e6),
        FlowArrival::scripted(1, 1.0, PE_S, PE_D, 37.5e6),
        FlowArrival::scripted(2, 2.0, PE_S, PE_D, 25e6),
        FlowArrival::scripted(3, 3.0, PE_S, PE_D, 2.5e6),
        FlowArrival::scripted(4, 7.0, PE_S, PE_D, 50e6),
    ]
}

pub fn drain_simulation() -> Simulation {
    let cfg = EngineConfig {
        sim_time: 15.0,
        warmup: 0.0,
        ..Default::default()
    };
    Simulation::new(load("four_paths.topo"), cfg, Box::new(drain_script().into_iter())).expect("valid scenario")
}

/// Copy of `topo` with every link capacity multiplied by `factor`.
pub fn scaled(topo: &Topology, factor: f64) -> Topology {
    let roles = topo.nodes().map(|n| topo.role(n).expect("node")).collect();
    let links = topo
        .links()
        .iter()
        .map(|l| DirectedLink {
            capacity: l.capacity * factor,
            ..l.clone()
        })
        .collect();
    Topology::new(roles, links)
}
