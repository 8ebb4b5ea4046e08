// Copyright (c) 2026 The labelflow Authors.
// SPDX-License-Identifier: Apache-2.0

mod common;

use proptest::prelude::*;

use labelflow::config::ScenarioConfig;
use labelflow::engine::{KpiSample, Mode};
use labelflow::metrics::{cfri, compare, max_fri, rx_gain, MetricsError};
use labelflow::suite::{compare_suites, run_suite};

fn small(mode: Mode, seed: u64, replications: u64) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::from_toml_str(&format!(
        r#"
        mode = "{mode}"
        thresholds = [[0.8, 0.4]]
        replications = {replications}
        [traffic]
        seed = {seed}
        mean_interarrival = 0.02
        sim_time = 15.0
        warmup = 2.0
        "#
    ))
    .unwrap();
    cfg.topology = Some(common::topo_path("square.topo"));
    cfg
}

#[test]
fn identical_suites_compare_to_zero() {
    let s = run_suite(&small(Mode::Mechanism, 3, 3), Some(1)).unwrap();
    let c = compare(&s.cells[0].runs, &s.cells[0].runs).unwrap();
    assert_eq!(c.rx_gain_pct.value, 0.0);
    assert_eq!(c.msg_reduction_pct.value, 0.0);
    assert_eq!(c.cfri_pct.value, 0.0);
    assert_eq!(c.throughput_ratio.value, 1.0);
    assert_eq!(c.rx_gain_pct.paired.half_width, Some(0.0));
}

#[test]
fn mismatched_seeds_are_refused() {
    let a = run_suite(&small(Mode::Mechanism, 3, 2), Some(1)).unwrap();
    let b = run_suite(&small(Mode::Legacy, 4, 2), Some(1)).unwrap();
    assert!(matches!(
        compare(&a.cells[0].runs, &b.cells[0].runs),
        Err(MetricsError::SeedMismatch)
    ));
    let c = run_suite(&small(Mode::Legacy, 3, 3), Some(1)).unwrap();
    assert!(compare(&a.cells[0].runs, &c.cells[0].runs).is_err());
}

#[test]
fn comparison_is_consistent_with_reports() {
    let a = run_suite(&small(Mode::Mechanism, 9, 3), Some(1)).unwrap();
    let b = run_suite(&small(Mode::Legacy, 9, 3), Some(1)).unwrap();
    let rows = compare_suites(&a, &b).unwrap();
    assert_eq!(rows.len(), 1);
    let (ra, rb) = (&a.cells[0].report, &b.cells[0].report);
    let c = &rows[0];
    assert_eq!(
        c.cfri_pct.value,
        cfri(ra.avg_labels_mean.mean, rb.avg_labels_mean.mean).unwrap()
    );
    assert_eq!(
        c.rx_gain_pct.value,
        rx_gain(ra.rx_gb.mean * 1e9, rb.rx_gb.mean * 1e9).unwrap()
    );
    for r in a.cells[0].runs.iter().chain(&b.cells[0].runs) {
        let from_rx = r.rx_bytes * 8.0 / (r.sim_time - r.warmup) / 1e6;
        assert!(common::rel_err(r.avg_tput_mbps(), from_rx) < 1e-6);
        assert_eq!(r.tx_bytes, r.rx_bytes);
    }
    assert_eq!(c.mode_a, Mode::Mechanism);
    assert_eq!(c.mode_b, Mode::Legacy);
    assert!(c.msgs_per_s_a < c.msgs_per_s_b);
}

fn sample(labels: Vec<u32>, flows: u64) -> KpiSample {
    KpiSample {
        t: 1,
        sum_dft_pe: flows,
        active_labels_per_p: labels.clone(),
        labels_per_p: labels,
        total_flows: flows,
        packet_in: 0,
        controller_msgs: 0,
        rx_bytes: 0.0,
        tx_bytes: 0.0,
    }
}

proptest! {
    #[test]
    fn max_fri_is_scale_consistent(
        rows in prop::collection::vec((prop::collection::vec(1u32..50, 1..8), 1u64..5000), 1..20),
        k in 2u32..50,
    ) {
        let base: Vec<KpiSample> = rows.iter().map(|(l, f)| sample(l.clone(), *f)).collect();
        let scaled: Vec<KpiSample> = rows
            .iter()
            .map(|(l, f)| sample(l.iter().map(|x| x * k).collect(), f * k as u64))
            .collect();
        let a = max_fri(&base).unwrap();
        let b = max_fri(&scaled).unwrap();
        prop_assert!((a - b).abs() < 1e-9);
        prop_assert!(a < 100.0);
    }
}

#[test]
fn max_fri_zero_when_labels_equal_flows() {
    assert_eq!(max_fri(&[sample(vec![7, 7], 7)]).unwrap(), 0.0);
    assert!(max_fri(&[sample(vec![1], 0)]).is_err());
}
