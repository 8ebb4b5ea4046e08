// Copyright (c) 2026 The labelflow Authors.
// SPDX-License-Identifier: Apache-2.0

//! KPIs over run results and Student-t confidence intervals.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::engine::{KpiSample, Mode, RunResult};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("{0} is zero")]
    ZeroDenominator(&'static str),
    #[error("no sample with active flows")]
    NoFlowSamples,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("confidence level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("no runs to aggregate")]
    Empty,
    #[error("runs disagree on {0}")]
    Mixed(&'static str),
    #[error("seed sets differ between the compared suites")]
    SeedMismatch,
}

/// Received-data gain over the baseline, percent.
pub fn rx_gain(rx: f64, rx_legacy: f64) -> Result<f64, MetricsError> {
    if rx_legacy == 0.0 {
        return Err(MetricsError::ZeroDenominator("rx_legacy"));
    }
    Ok((rx - rx_legacy) / rx_legacy * 100.0)
}

/// Best flow reduction over time: `max_t [1 - avg(labels_P) / flows]`, percent.
/// Samples without flows are skipped.
pub fn max_fri(samples: &[KpiSample]) -> Result<f64, MetricsError> {
    fri_over(samples, KpiSample::avg_labels_p)
}

/// [`max_fri`] counting only label entries that carry at least one flow.
pub fn max_fri_active(samples: &[KpiSample]) -> Result<f64, MetricsError> {
    fri_over(samples, KpiSample::avg_active_labels_p)
}

fn fri_over(samples: &[KpiSample], labels: impl Fn(&KpiSample) -> f64) -> Result<f64, MetricsError> {
    samples
        .iter()
        .filter(|s| s.total_flows > 0)
        .map(|s| (1.0 - labels(s) / s.total_flows as f64) * 100.0)
        .reduce(f64::max)
        .ok_or(MetricsError::NoFlowSamples)
}

/// Core flow-table reduction against the baseline, percent.
pub fn cfri(avg_labels_p: f64, avg_flows_legacy_p: f64) -> Result<f64, MetricsError> {
    if avg_flows_legacy_p == 0.0 {
        return Err(MetricsError::ZeroDenominator("avg_flows_legacy_p"));
    }
    Ok((1.0 - avg_labels_p / avg_flows_legacy_p) * 100.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub mean: f64,
    /// `None` with fewer than two samples.
    pub half_width: Option<f64>,
    pub n: usize,
}

impl Interval {
    /// 95% interval, or a bare mean when there are fewer than two samples.
    pub fn of(samples: &[f64]) -> Interval {
        confidence_interval(samples, 0.95).unwrap_or(Interval {
            mean: samples.iter().sum::<f64>() / samples.len().max(1) as f64,
            half_width: None,
            n: samples.len(),
        })
    }
}

impl std::fmt::Display for Interval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let p = f.precision().unwrap_or(2);
        match self.half_width {
            Some(h) => write!(f, "{:.p$} ± {:.p$}", self.mean, h),
            None => write!(f, "{:.p$}", self.mean),
        }
    }
}

/// Two-sided Student-t interval `mean ± t_{(1+level)/2, n-1} · s / √n`.
pub fn confidence_interval(samples: &[f64], level: f64) -> Result<Interval, MetricsError> {
    let n = samples.len();
    if n < 2 {
        return Err(MetricsError::TooFewSamples(n));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(MetricsError::InvalidLevel(level));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let t = t_quantile((1.0 + level) / 2.0, (n - 1) as f64);
    Ok(Interval {
        mean,
        half_width: Some(t * var.sqrt() / (n as f64).sqrt()),
        n,
    })
}

/// Quantile `p` of Student's t with `dof` degrees of freedom.
pub fn t_quantile(p: f64, dof: f64) -> f64 {
    StudentsT::new(0.0, 1.0, dof).expect("dof > 0").inverse_cdf(p)
}

/// Per-run message rate used in reductions: the worst second for the
/// mechanism, the average second for the baseline.
pub fn message_rate(run: &RunResult) -> f64 {
    match run.mode {
        Mode::Mechanism => run.msgs_per_s_max(),
        Mode::Legacy => run.msgs_per_s_mean(),
    }
}

/// One row of the evaluation table: all replications of one threshold pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub mode: Mode,
    pub cong_th: f64,
    pub warn_th: f64,
    pub runs: usize,
    pub tx_gb: Interval,
    pub rx_gb: Interval,
    pub avg_tput_mbps: Interval,
    /// Undefined when no sample had active flows.
    pub max_fri_pct: Option<Interval>,
    pub max_fri_active_pct: Option<Interval>,
    pub openflow_msgs_per_s: Interval,
    pub openflow_msgs_per_s_max: Interval,
    pub packet_in_per_s: Interval,
    pub sum_dft_mean: Interval,
    pub avg_labels_mean: Interval,
    pub max_labels_mean: Interval,
    pub path_violations: u64,
    pub capacity_violations: u64,
}

fn collect(runs: &[RunResult], f: impl Fn(&RunResult) -> f64) -> Vec<f64> {
    runs.iter().map(f).collect()
}

/// Aggregates the replications of one cell, in the order given.
pub fn aggregate(runs: &[RunResult]) -> Result<KpiReport, MetricsError> {
    let first = runs.first().ok_or(MetricsError::Empty)?;
    if runs.iter().any(|r| r.mode != first.mode) {
        return Err(MetricsError::Mixed("mode"));
    }
    if runs
        .iter()
        .any(|r| r.cong_th != first.cong_th || r.warn_th != first.warn_th)
    {
        return Err(MetricsError::Mixed("thresholds"));
    }
    let fri: Result<Vec<f64>, _> = runs.iter().map(|r| max_fri(&r.samples)).collect();
    let fri_active: Result<Vec<f64>, _> = runs.iter().map(|r| max_fri_active(&r.samples)).collect();
    Ok(KpiReport {
        mode: first.mode,
        cong_th: first.cong_th,
        warn_th: first.warn_th,
        runs: runs.len(),
        tx_gb: Interval::of(&collect(runs, |r| r.tx_bytes / 1e9)),
        rx_gb: Interval::of(&collect(runs, |r| r.rx_bytes / 1e9)),
        avg_tput_mbps: Interval::of(&collect(runs, RunResult::avg_tput_mbps)),
        max_fri_pct: fri.ok().map(|v| Interval::of(&v)),
        max_fri_active_pct: fri_active.ok().map(|v| Interval::of(&v)),
        openflow_msgs_per_s: Interval::of(&collect(runs, RunResult::msgs_per_s_mean)),
        openflow_msgs_per_s_max: Interval::of(&collect(runs, RunResult::msgs_per_s_max)),
        packet_in_per_s: Interval::of(&collect(runs, RunResult::packet_in_per_s_mean)),
        sum_dft_mean: Interval::of(&collect(runs, RunResult::sum_dft_mean)),
        avg_labels_mean: Interval::of(&collect(runs, RunResult::avg_labels_mean)),
        max_labels_mean: Interval::of(&collect(runs, RunResult::max_labels_max)),
        path_violations: runs.iter().map(|r| r.path_violations).sum(),
        capacity_violations: runs.iter().map(|r| r.capacity_violations).sum(),
    })
}

/// Point value from the suite means, with a CI over per-seed paired values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub paired: Interval,
}

impl std::fmt::Display for Estimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let p = f.precision().unwrap_or(2);
        // no "-0.00" for values that round to zero
        let v = if (self.value * 10f64.powi(p as i32)).round() == 0.0 {
            0.0
        } else {
            self.value
        };
        match self.paired.half_width {
            Some(h) => write!(f, "{v:.p$} ± {h:.p$}"),
            None => write!(f, "{v:.p$}"),
        }
    }
}

/// Candidate suite `a` against baseline suite `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub mode_a: Mode,
    pub mode_b: Mode,
    pub cong_th: f64,
    pub warn_th: f64,
    pub runs: usize,
    pub rx_gain_pct: Estimate,
    pub cfri_pct: Estimate,
    pub msg_reduction_pct: Estimate,
    /// `avg_tput(a) / avg_tput(b)`
    pub throughput_ratio: Estimate,
    pub msgs_per_s_a: f64,
    pub msgs_per_s_b: f64,
    pub packet_in_per_s_b: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Compares two suites replication by replication. Both must cover the same
/// seeds.
pub fn compare(a: &[RunResult], b: &[RunResult]) -> Result<Comparison, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::Empty);
    }
    let seeds = |runs: &[RunResult]| -> Vec<(u64, u64)> {
        let set: BTreeSet<(u64, u64)> = runs.iter().map(|r| (r.replication, r.seed)).collect();
        set.into_iter().collect()
    };
    if seeds(a) != seeds(b) || a.len() != b.len() {
        return Err(MetricsError::SeedMismatch);
    }
    let mut a: Vec<&RunResult> = a.iter().collect();
    let mut b: Vec<&RunResult> = b.iter().collect();
    a.sort_by_key(|r| r.replication);
    b.sort_by_key(|r| r.replication);

    let rx_a: Vec<f64> = a.iter().map(|r| r.rx_bytes).collect();
    let rx_b: Vec<f64> = b.iter().map(|r| r.rx_bytes).collect();
    let lab_a: Vec<f64> = a.iter().map(|r| r.avg_labels_mean()).collect();
    let lab_b: Vec<f64> = b.iter().map(|r| r.avg_labels_mean()).collect();
    let msg_a: Vec<f64> = a.iter().map(|r| message_rate(r)).collect();
    let msg_b: Vec<f64> = b.iter().map(|r| message_rate(r)).collect();
    let tp_a: Vec<f64> = a.iter().map(|r| r.avg_tput_mbps()).collect();
    let tp_b: Vec<f64> = b.iter().map(|r| r.avg_tput_mbps()).collect();

    let paired = |x: &[f64], y: &[f64], f: &dyn Fn(f64, f64) -> Result<f64, MetricsError>| {
        let v: Result<Vec<f64>, _> = x.iter().zip(y).map(|(&p, &q)| f(p, q)).collect();
        v.map(|v| Interval::of(&v))
    };
    let reduction = |m: f64, l: f64| {
        if l == 0.0 {
            Err(MetricsError::ZeroDenominator("baseline message rate"))
        } else {
            Ok((1.0 - m / l) * 100.0)
        }
    };
    let ratio = |p: f64, q: f64| {
        if q == 0.0 {
            Err(MetricsError::ZeroDenominator("baseline throughput"))
        } else {
            Ok(p / q)
        }
    };

    Ok(Comparison {
        mode_a: a[0].mode,
        mode_b: b[0].mode,
        cong_th: a[0].cong_th,
        warn_th: a[0].warn_th,
        runs: a.len(),
        rx_gain_pct: Estimate {
            value: rx_gain(mean(&rx_a), mean(&rx_b))?,
            paired: paired(&rx_a, &rx_b, &rx_gain)?,
        },
        cfri_pct: Estimate {
            value: cfri(mean(&lab_a), mean(&lab_b))?,
            paired: paired(&lab_a, &lab_b, &cfri)?,
        },
        msg_reduction_pct: Estimate {
            value: reduction(mean(&msg_a), mean(&msg_b))?,
            paired: paired(&msg_a, &msg_b, &reduction)?,
        },
        throughput_ratio: Estimate {
            value: ratio(mean(&tp_a), mean(&tp_b))?,
            paired: paired(&tp_a, &tp_b, &ratio)?,
        },
        msgs_per_s_a: mean(&msg_a),
        msgs_per_s_b: mean(&msg_b),
        packet_in_per_s_b: mean(&b.iter().map(|r| r.packet_in_per_s_mean()).collect::<Vec<_>>()),
    })
}
