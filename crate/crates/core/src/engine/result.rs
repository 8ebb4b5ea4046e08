// Copyright (c) 2026 The labelflow Authors.
// SPDX-License-Identifier: Apache-2.0

use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Mode;
use crate::controller::MessageCounts;

/// Table and message snapshot taken once per simulated second.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiSample {
    /// whole seconds
    pub t: u32,
    /// DFT entries summed over PEs (legacy: flow entries summed over PEs)
    pub sum_dft_pe: u64,
    /// Label entries per P node (legacy: flow entries per P node)
    pub labels_per_p: Vec<u32>,
    /// Label entries per P node currently used by at least one flow.
    pub active_labels_per_p: Vec<u32>,
    /// Active flows, each counted once at its ingress PE.
    pub total_flows: u64,
    /// Packet_IN during the second ending at `t`.
    pub packet_in: u64,
    /// Controller messages during the second ending at `t`.
    pub controller_msgs: u64,
    /// cumulative since warmup
    pub rx_bytes: f64,
    /// cumulative since warmup
    pub tx_bytes: f64,
}

impl KpiSample {
    pub fn avg_labels_p(&self) -> f64 {
        if self.labels_per_p.is_empty() {
            0.0
        } else {
            self.labels_per_p.iter().map(|&x| x as f64).sum::<f64>() / self.labels_per_p.len() as f64
        }
    }

    pub fn avg_active_labels_p(&self) -> f64 {
        if self.active_labels_per_p.is_empty() {
            0.0
        } else {
            self.active_labels_per_p.iter().map(|&x| x as f64).sum::<f64>() / self.active_labels_per_p.len() as f64
        }
    }

    pub fn max_labels_p(&self) -> u32 {
        self.labels_per_p.iter().copied().max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub mode: Mode,
    pub replication: u64,
    pub seed: u64,
    pub warn_th: f64,
    pub cong_th: f64,
    pub sim_time: f64,
    pub warmup: f64,

    pub arrivals: u64,
    pub admitted: u64,
    pub completed: u64,
    pub rejected: u64,
    pub active_at_end: u64,

    /// Sizes of flows arriving after warmup.
    pub offered_bytes: f64,
    pub tx_bytes: f64,
    pub rx_bytes: f64,

    pub forwarding_faults: u64,
    /// Flows whose forwarding state changed between admission and completion.
    pub path_violations: u64,
    /// Flows admitted under a label that was not ACTIVE.
    pub drain_admissions: u64,
    /// Fair-share solutions loading a link above capacity.
    pub capacity_violations: u64,

    pub epochs_created: u64,
    pub labels_retired: u64,
    pub reallocation_batches: u64,
    pub peak_live_labels: u64,
    /// Largest label table (legacy: flow table) seen at any P node.
    pub peak_labels_p: u64,

    pub messages: MessageCounts,
    pub samples: Vec<KpiSample>,
}

impl RunResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("RunResult serializes")
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        serde_json::from_str(s)
    }

    /// Hex SHA-256 of [`RunResult::to_json`].
    pub fn checksum(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    /// Average throughput after warmup, Mbit/s.
    pub fn avg_tput_mbps(&self) -> f64 {
        self.rx_bytes * 8.0 / (self.sim_time - self.warmup) / 1e6
    }

    pub fn sum_dft_mean(&self) -> f64 {
        mean(self.samples.iter().map(|s| s.sum_dft_pe as f64))
    }

    /// Time average of the per-sample mean over P nodes.
    pub fn avg_labels_mean(&self) -> f64 {
        mean(self.samples.iter().map(KpiSample::avg_labels_p))
    }

    /// Max over time of the per-P maximum.
    pub fn max_labels_max(&self) -> f64 {
        self.samples.iter().map(|s| s.max_labels_p()).max().unwrap_or(0) as f64
    }

    pub fn msgs_per_s_mean(&self) -> f64 {
        mean(self.samples.iter().map(|s| s.controller_msgs as f64))
    }

    pub fn msgs_per_s_max(&self) -> f64 {
        self.samples.iter().map(|s| s.controller_msgs).max().unwrap_or(0) as f64
    }

    pub fn packet_in_per_s_mean(&self) -> f64 {
        mean(self.samples.iter().map(|s| s.packet_in as f64))
    }

    /// `t,sum_dft_pe,avg_labels_p,max_labels_p,active_flows,packet_in,controller_msgs,rx_bytes,tx_bytes`
    pub fn write_timeseries_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "t",
            "sum_dft_pe",
            "avg_labels_p",
            "max_labels_p",
            "active_flows",
            "packet_in",
            "controller_msgs",
            "rx_bytes",
            "tx_bytes",
        ])?;
        for s in &self.samples {
            w.write_record([
                s.t.to_string(),
                s.sum_dft_pe.to_string(),
                s.avg_labels_p().to_string(),
                s.max_labels_p().to_string(),
                s.total_flows.to_string(),
                s.packet_in.to_string(),
                s.controller_msgs.to_string(),
                s.rx_bytes.to_string(),
                s.tx_bytes.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut n) = (0.0, 0usize);
    for x in it {
        sum += x;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}
