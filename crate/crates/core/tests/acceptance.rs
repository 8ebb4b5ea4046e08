// Copyright (c) 2026 The labelflow Authors.
// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Prints one line per criterion; exits non-zero on a
//! failure only when `LABELFLOW_ACCEPTANCE_STRICT` is set.
//!
//! `cargo test --test acceptance -- AC5 AC8` runs a subset.

mod common;

use std::collections::BTreeMap;
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_pcg::Pcg64;

use labelflow::config::ScenarioConfig;
use labelflow::controller::EpochState;
use labelflow::engine::fairshare::fair_shares;
use labelflow::engine::{run, EngineConfig, Mode, RunResult, Scenario};
use labelflow::metrics::{confidence_interval, t_quantile, Interval};
use labelflow::suite::{compare_suites, run_suite, SuiteResult};
use labelflow::topology::{
    dijkstra_from, load_topology, reverse_dijkstra, DirectedLink, Lsdb, MetricValues, NodeId, NodeRole, Topology,
    US_BACKBONE,
};
use labelflow::traffic::{generate, TrafficConfig};

use common::*;

struct Check {
    pass: bool,
    detail: String,
}

impl Check {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Check {
            pass,
            detail: detail.into(),
        }
    }
}

struct Outcome {
    checks: Vec<Check>,
}

impl Outcome {
    fn single(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            checks: vec![Check::new(pass, detail)],
        }
    }

    fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// State shared between criteria: the full-scale suites feed AC5 and AC7.
#[derive(Default)]
struct Shared {
    suites: Option<(SuiteResult, SuiteResult)>,
}

type Criterion = (&'static str, &'static str, fn(&mut Shared) -> Outcome);

const CRITERIA: &[Criterion] = &[
    ("AC1", "reverse SPT equals Dijkstra on the transposed graph", ac1),
    ("AC2", "two-node asymmetric metrics", ac2),
    ("AC3", "max-min fair shares match the exact oracle", ac3),
    ("AC4", "congestion-free runs keep at most D labels per P node", ac4),
    ("AC5", "full-scale KPIs", ac5),
    ("AC6", "label drain sequence and recycling", ac6),
    ("AC7", "admitted flows never change path", ac7),
    ("AC8", "identical (config, seed) gives identical results", ac8),
    ("AC9", "traffic and interval statistics", ac9),
];

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut shared = Shared::default();
    let (mut passed, mut failed) = (0, 0);
    for &(id, name, f) in CRITERIA {
        if !filter.is_empty() && !filter.iter().any(|x| x.eq_ignore_ascii_case(id)) {
            continue;
        }
        let start = Instant::now();
        let out = f(&mut shared);
        let tag = if out.pass() { "PASS" } else { "FAIL" };
        let secs = start.elapsed().as_secs_f64();
        if out.checks.len() == 1 {
            println!("[{tag}] {id} {name}: {} ({secs:.1} s)", out.checks[0].detail);
        } else {
            println!("[{tag}] {id} {name} ({secs:.1} s)");
            for c in &out.checks {
                println!("         [{}] {}", if c.pass { "PASS" } else { "FAIL" }, c.detail);
            }
        }
        if out.pass() {
            passed += 1;
        } else {
            failed += 1;
        }
    }
    println!("acceptance: {passed} passed, {failed} failed");
    if failed > 0 && std::env::var_os("LABELFLOW_ACCEPTANCE_STRICT").is_some() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}

fn ac1(_: &mut Shared) -> Outcome {
    let start = Instant::now();
    let mut rng = Pcg64::seed_from_u64(0xAC1);
    let mut mismatches = 0usize;
    let mut trees = 0usize;
    for _ in 0..1000 {
        let topo = random_digraph(&mut rng, 50, 100);
        let lsdb = Lsdb::new(&topo, MetricValues::default());
        let transposed = topo.transposed();
        let lsdb_t = Lsdb::new(&transposed, MetricValues::default());
        for root in topo.nodes() {
            let tree = reverse_dijkstra(&topo, &lsdb, root).expect("root is a PE");
            let fwd = dijkstra_from(&transposed, &lsdb_t, root).expect("root exists");
            if tree.dist != fwd.dist || tree.dist != bellman_ford_to_root(&topo, &lsdb, root) {
                mismatches += 1;
            }
            trees += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Outcome::single(
        mismatches == 0 && secs < 10.0,
        format!("1000 graphs, {trees} roots, {mismatches} mismatches, {secs:.2} s (limit 10 s)"),
    )
}

fn ac2(_: &mut Shared) -> Outcome {
    let link = |from, to, m| DirectedLink {
        from: NodeId(from),
        to: NodeId(to),
        capacity: 1e8,
        delay: 0.0,
        base_metric: m,
    };
    let topo = Topology::new(
        vec![NodeRole::P, NodeRole::Pe, NodeRole::Pe],
        vec![link(1, 2, 1), link(2, 1, 7)],
    );
    let lsdb = Lsdb::new(&topo, MetricValues::default());
    let tree = reverse_dijkstra(&topo, &lsdb, NodeId(1)).expect("PE root");
    let d = tree.dist(NodeId(2));
    Outcome::single(d == Some(7), format!("dist[2] toward root 1 = {d:?} (want 7)"))
}

fn ac3(_: &mut Shared) -> Outcome {
    let mut rng = Pcg64::seed_from_u64(0xAC3);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let n_links = rng.random_range(1..=10usize);
        let caps: Vec<i64> = (0..n_links).map(|_| rng.random_range(1..=1_000_000i64)).collect();
        let n_flows = rng.random_range(1..=20usize);
        let paths: Vec<Vec<usize>> = (0..n_flows)
            .map(|_| {
                let mut p: Vec<usize> = (0..n_links).filter(|_| rng.random_bool(0.3)).collect();
                if p.is_empty() {
                    p.push(rng.random_range(0..n_links));
                }
                p
            })
            .collect();
        let capf: Vec<f64> = caps.iter().map(|&c| c as f64).collect();
        let got = fair_shares(&capf, &paths);
        let want = rational_max_min(&caps, &paths);
        for (g, w) in got.iter().zip(&want) {
            worst = worst.max(rel_err(*g, to_f64(w.as_ref().expect("flow has links"))));
        }
    }
    Outcome::single(
        worst <= 1e-9,
        format!("500 instances, worst relative error {worst:.2e} (limit 1e-9)"),
    )
}

fn ac4(_: &mut Shared) -> Outcome {
    let mut checks = Vec::new();

    // square: two lightly loaded PEs, one label per destination everywhere
    let topo = load("square.topo");
    let d = topo.pes().len() as u32;
    let r = run(&Scenario {
        topology: topo,
        engine: EngineConfig {
            access_capacity: 10e6,
            ..Default::default()
        },
        traffic: TrafficConfig {
            mean_interarrival: 0.05,
            sim_time: 30.0,
            warmup: 2.0,
            ..Default::default()
        },
        replication: 0,
    })
    .expect("square run");
    let worst = r
        .samples
        .iter()
        .flat_map(|s| s.labels_per_p.iter().copied())
        .max()
        .unwrap_or(0);
    checks.push(Check::new(
        r.reallocation_batches == 0 && worst <= d,
        format!(
            "square: D={d}, max labels on a P node {worst}, {} reallocations",
            r.reallocation_batches
        ),
    ));

    // backbone with capacities scaled far above the offered load
    let base = load_topology(US_BACKBONE).expect("built-in topology");
    let topo = Arc::new(scaled(&base, 100.0));
    let d = topo.pes().len() as u32;
    let r = run(&Scenario {
        topology: topo,
        engine: EngineConfig::default(),
        traffic: TrafficConfig {
            sim_time: 20.0,
            ..Default::default()
        },
        replication: 0,
    })
    .expect("backbone run");
    let worst = r
        .samples
        .iter()
        .flat_map(|s| s.labels_per_p.iter().copied())
        .max()
        .unwrap_or(0);
    checks.push(Check::new(
        r.reallocation_batches == 0 && worst <= d,
        format!(
            "backbone x100: D={d}, max labels on a P node {worst}, {} reallocations",
            r.reallocation_batches
        ),
    ));
    Outcome { checks }
}

fn headline(mode: Mode) -> ScenarioConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/headline.toml");
    let mut cfg = ScenarioConfig::from_file(&path).expect("headline config");
    cfg.mode = mode;
    cfg
}

fn ac5(shared: &mut Shared) -> Outcome {
    let threads = rayon::current_num_threads();
    let t0 = Instant::now();
    let mech = run_suite(&headline(Mode::Mechanism), None).expect("mechanism suite");
    let mech_secs = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let legacy = run_suite(&headline(Mode::Legacy), None).expect("legacy suite");
    let legacy_secs = t1.elapsed().as_secs_f64();

    let rows = compare_suites(&mech, &legacy).expect("same seeds");
    let c = &rows[0];
    let report = &mech.cells[0].report;
    let runs = report.runs;
    let mut checks = Vec::new();

    let fri = report.max_fri_pct.as_ref().map_or(f64::NAN, |i| i.mean);
    let fri_active = report.max_fri_active_pct.as_ref().map_or(f64::NAN, |i| i.mean);
    checks.push(Check::new(
        fri >= 99.0,
        format!("maxFRI {fri:.2}% >= 99% (entries counted over installed labels; over labels carrying traffic: {fri_active:.2}%)"),
    ));
    checks.push(Check::new(
        c.cfri_pct.value >= 90.0,
        format!("CFRI {:.2}% >= 90%", c.cfri_pct),
    ));
    checks.push(Check::new(
        c.rx_gain_pct.value >= 20.0,
        format!("RxGain {:.2}% >= 20%", c.rx_gain_pct),
    ));
    checks.push(Check::new(
        c.msgs_per_s_a <= 117.0,
        format!(
            "mechanism worst-second messages {:.1}/s <= 117/s (mean over {runs} seeds)",
            c.msgs_per_s_a
        ),
    ));
    let pi = c.packet_in_per_s_b;
    let magnitude = pi.log10().floor();
    checks.push(Check::new(
        magnitude == 3.0,
        format!("legacy Packet_IN {pi:.0}/s is of order 10^3 like 4238/s (10^{magnitude})"),
    ));
    checks.push(Check::new(
        c.msg_reduction_pct.value >= 95.0,
        format!("message reduction {:.2}% >= 95%", c.msg_reduction_pct),
    ));

    // the full sweep runs every threshold cell for the mechanism and one for the baseline
    let cells = ScenarioConfig::default().thresholds.len() as f64;
    let sweep = cells * mech_secs + legacy_secs;
    checks.push(Check::new(
        sweep <= 600.0,
        format!(
            "full sweep {sweep:.0} s <= 600 s on {threads} thread(s) ({cells:.0} x {mech_secs:.1} s mechanism cell + {legacy_secs:.1} s baseline)"
        ),
    ));
    shared.suites = Some((mech, legacy));
    Outcome { checks }
}

fn drain_run() -> (Vec<Check>, RunResult) {
    let mut sim = drain_simulation();
    let mut last = BTreeMap::new();
    let mut grew = Vec::new();
    let mut t: f64 = 0.0;
    while t < 15.0 {
        t = (t * 10.0 + 1.0).round() / 10.0;
        sim.run_until(t).expect("scripted run");
        for e in sim.controller().expect("mechanism").history(PE_D) {
            if e.state != EpochState::Draining {
                continue;
            }
            if let Some(&prev) = last.get(&(e.label, e.epoch)) {
                if e.flows > prev {
                    grew.push(format!("{} {prev}->{} at {t}", e.label, e.flows));
                }
            }
            last.insert((e.label, e.epoch), e.flows);
        }
    }
    let ctl = sim.controller().expect("mechanism");
    let h = ctl.history(PE_D).to_vec();
    let mut checks = Vec::new();

    let first: Vec<_> = h.iter().take(4).collect();
    let labels: Vec<String> = first.iter().map(|e| e.label.to_string()).collect();
    let hops: Vec<usize> = first
        .iter()
        .map(|e| e.tree.path_from(PE_S).map_or(0, |p| p.len() - 1))
        .collect();
    let mut distinct: Vec<_> = first.iter().map(|e| e.label).collect();
    distinct.sort();
    distinct.dedup();
    checks.push(Check::new(
        first.len() == 4 && distinct.len() == 4 && hops == [2, 3, 4, 5],
        format!("L1..L4 = {} on paths of {hops:?} hops", labels.join(", ")),
    ));
    checks.push(Check::new(
        grew.is_empty() && !last.is_empty(),
        format!(
            "flow counts of {} draining labels never increase{}",
            last.len(),
            if grew.is_empty() {
                String::new()
            } else {
                format!(": {}", grew.join("; "))
            }
        ),
    ));
    let l1 = h.first().copied();
    let retired = l1.and_then(|e| e.retired_at);
    let reused = match (l1, retired) {
        (Some(l1), Some(at)) => h.iter().find(|e| e.created_at > at).map(|e| e.label == l1.label),
        _ => None,
    };
    // A ends at 4.5 s, gc_timeout is 1 s, GC sweeps every 0.1 s
    let in_window = retired.is_some_and(|t| (5.5..=5.6 + 1e-9).contains(&t));
    checks.push(Check::new(
        l1.is_some_and(|e| e.state == EpochState::Retired) && in_window && reused == Some(true),
        format!(
            "L1 retired at {} s (A ends 4.5 s + gc_timeout 1 s), next allocation reuses it: {}",
            retired.map_or("never".into(), |t| format!("{t:.1}")),
            reused.map_or("no later allocation".into(), |b| b.to_string())
        ),
    ));
    (checks, sim.finish())
}

fn ac6(_: &mut Shared) -> Outcome {
    let (checks, _) = drain_run();
    Outcome { checks }
}

fn ac7(shared: &mut Shared) -> Outcome {
    let mut runs = 0usize;
    let mut violations = 0u64;
    let (_, drain) = drain_run();
    runs += 1;
    violations += drain.path_violations;
    if let Some((m, l)) = &shared.suites {
        for r in m.cells.iter().chain(&l.cells).flat_map(|c| &c.runs) {
            runs += 1;
            violations += r.path_violations;
        }
    }
    Outcome::single(violations == 0, format!("{violations} path changes over {runs} runs"))
}

fn ac8(_: &mut Shared) -> Outcome {
    let mut checks = Vec::new();
    for mode in [Mode::Mechanism, Mode::Legacy] {
        let mut cfg = headline(mode);
        cfg.traffic.sim_time = 25.0;
        let topo = Arc::new(cfg.load_topology().expect("topology"));
        let a = run(&cfg.scenario(topo.clone(), 0, 7)).expect("first run");
        let b = run(&cfg.scenario(topo, 0, 7)).expect("second run");
        let (ja, jb) = (a.to_json(), b.to_json());
        checks.push(Check::new(
            ja == jb && a.checksum() == b.checksum(),
            format!(
                "{mode}: sha256 {} vs {}, {} JSON bytes",
                &a.checksum()[..16],
                &b.checksum()[..16],
                ja.len()
            ),
        ));
    }
    Outcome { checks }
}

fn ac9(_: &mut Shared) -> Outcome {
    const N: usize = 1_000_000;
    let cfg = TrafficConfig::default();
    let pes: Vec<NodeId> = (0..10).map(NodeId).collect();
    let arrivals: Vec<_> = generate(&cfg, &pes, 0).expect("valid traffic").take(N).collect();
    let mut checks = Vec::new();

    let mean_gap = arrivals[N - 1].time / N as f64;
    checks.push(Check::new(
        rel_err(mean_gap, 0.003) < 0.01,
        format!(
            "mean inter-arrival {:.5} ms over 1e6 samples (3 ms +- 1%)",
            mean_gap * 1e3
        ),
    ));

    let scale = cfg.mean_size * (cfg.pareto_shape - 1.0) / cfg.pareto_shape;
    let want = scale * 2f64.powf(1.0 / cfg.pareto_shape);
    let mut medians: Vec<f64> = arrivals
        .chunks(10_000)
        .map(|c| median(&mut c.iter().map(|a| a.size).collect::<Vec<_>>()))
        .collect();
    let worst = medians.iter().map(|&m| rel_err(m, want)).fold(0.0, f64::max);
    let overall = median(&mut medians);
    checks.push(Check::new(
        worst < 0.04 && rel_err(overall, want) < 0.005,
        format!(
            "Pareto size median {overall:.0} B vs {want:.0} B over 100 batches (worst batch {:.2}%)",
            worst * 100.0
        ),
    ));

    let x = [1.0, 2.0, 3.0, 4.0, 5.0];
    let h = confidence_interval(&x, 0.95)
        .ok()
        .and_then(|c| c.half_width)
        .unwrap_or(f64::NAN);
    let oracle = t_half_width(&x);
    checks.push(Check::new(
        (h - oracle).abs() <= 1e-6 && (h - 1.963).abs() < 5e-4,
        format!("CI on 1..5: half-width {h:.6} vs {oracle:.6} (~1.963)"),
    ));

    let t = t_quantile(0.975, 19.0);
    let twenty: Vec<f64> = (0..20).map(|i| ((i * 7) % 11) as f64).collect();
    let hw = Interval::of(&twenty).half_width.unwrap_or(f64::NAN);
    checks.push(Check::new(
        (t - t975(19)).abs() < 1e-9 && format!("{t:.3}") == "2.093" && rel_err(hw, t_half_width(&twenty)) < 1e-12,
        format!("n=20 uses t={t:.6}"),
    ));
    Outcome { checks }
}
