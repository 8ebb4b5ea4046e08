// Copyright (c) 2026 The labelflow Authors.
// SPDX-License-Identifier: Apache-2.0

//! Seeded TCP flow arrivals: exponential inter-arrival times, Pareto sizes,
//! source and destination drawn uniformly over ordered PE pairs.

use std::io::{Read, Write};
use std::net::Ipv4Addr;

use rand::{RngExt, SeedableRng};
use rand_distr::{Distribution, Exp, Pareto};
use rand_pcg::Pcg64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataplane::{client_prefix, FiveTuple, Protocol};
use crate::topology::NodeId;

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("need at least two PE nodes, got {0}")]
    TooFewPes(usize),
    #[error("invalid traffic parameter: {0}")]
    Invalid(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub pareto_shape: f64,
    /// bytes
    pub mean_size: f64,
    /// seconds
    pub mean_interarrival: f64,
    /// seconds
    pub sim_time: f64,
    /// seconds
    pub warmup: f64,
    pub seed: u64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        TrafficConfig {
            pareto_shape: 1.5,
            mean_size: 500e3,
            mean_interarrival: 0.003,
            sim_time: 100.0,
            warmup: 10.0,
            seed: 1,
        }
    }
}

impl TrafficConfig {
    pub fn validate(&self) -> Result<(), TrafficError> {
        let bad = |m: &str| Err(TrafficError::Invalid(m.into()));
        if !(self.pareto_shape > 1.0 && self.pareto_shape.is_finite()) {
            return bad("pareto_shape must be > 1");
        }
        if !(self.mean_size > 0.0 && self.mean_size.is_finite()) {
            return bad("mean_size must be > 0");
        }
        if !(self.mean_interarrival > 0.0 && self.mean_interarrival.is_finite()) {
            return bad("mean_interarrival must be > 0");
        }
        if !(self.warmup >= 0.0 && self.warmup < self.sim_time && self.sim_time.is_finite()) {
            return bad("need 0 <= warmup < sim_time");
        }
        Ok(())
    }

    /// Pareto scale giving the configured mean: `mean * (shape - 1) / shape`.
    pub fn pareto_scale(&self) -> f64 {
        self.mean_size * (self.pareto_shape - 1.0) / self.pareto_shape
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowArrival {
    pub id: u64,
    pub time: f64,
    pub tuple: FiveTuple,
    /// bytes
    pub size: f64,
    pub src_pe: NodeId,
    pub dst_pe: NodeId,
}

impl FlowArrival {
    /// Hand-made arrival between host 1 behind `src_pe` and host 1 behind
    /// `dst_pe`; `id` doubles as the source port offset.
    pub fn scripted(id: u64, time: f64, src_pe: NodeId, dst_pe: NodeId, size: f64) -> Self {
        FlowArrival {
            id,
            time,
            tuple: FiveTuple {
                src_addr: client_prefix(src_pe).host(1),
                dst_addr: client_prefix(dst_pe).host(1),
                src_port: 1024u16.wrapping_add(id as u16),
                dst_port: 80,
                proto: Protocol::Tcp,
            },
            size,
            src_pe,
            dst_pe,
        }
    }
}

/// Seed of replication `i` derived from a base seed (SplitMix64 finalizer).
pub fn derive_seed(seed: u64, i: u64) -> u64 {
    let mut z = seed ^ i.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Unbounded arrival stream; consumers stop at their horizon.
#[derive(Debug, Clone)]
pub struct ArrivalStream {
    rng: Pcg64,
    gap: Exp<f64>,
    size: Pareto<f64>,
    pes: Vec<NodeId>,
    now: f64,
    next_id: u64,
}

/// Arrival stream for replication `replication` of `cfg`.
pub fn generate(cfg: &TrafficConfig, pes: &[NodeId], replication: u64) -> Result<ArrivalStream, TrafficError> {
    cfg.validate()?;
    if pes.len() < 2 {
        return Err(TrafficError::TooFewPes(pes.len()));
    }
    let gap = Exp::new(1.0 / cfg.mean_interarrival).map_err(|e| TrafficError::Invalid(e.to_string()))?;
    let size = Pareto::new(cfg.pareto_scale(), cfg.pareto_shape).map_err(|e| TrafficError::Invalid(e.to_string()))?;
    let mut pes = pes.to_vec();
    pes.sort();
    Ok(ArrivalStream {
        rng: Pcg64::seed_from_u64(derive_seed(cfg.seed, replication)),
        gap,
        size,
        pes,
        now: 0.0,
        next_id: 0,
    })
}

impl Iterator for ArrivalStream {
    type Item = FlowArrival;

    fn next(&mut self) -> Option<FlowArrival> {
        let mut t = self.now + self.gap.sample(&mut self.rng);
        if t <= self.now {
            // next representable time; `now` is finite and non-negative
            t = f64::from_bits(self.now.to_bits() + 1);
        }
        self.now = t;

        let n = self.pes.len();
        let k = self.rng.random_range(0..n * (n - 1));
        let src = k / (n - 1);
        let mut dst = k % (n - 1);
        if dst >= src {
            dst += 1;
        }
        let (src_pe, dst_pe) = (self.pes[src], self.pes[dst]);
        let size = self.size.sample(&mut self.rng);

        let src_host = self.rng.random_range(1..0xFFFFu32);
        let dst_host = self.rng.random_range(1..0xFFFFu32);
        let src_port = self.rng.random_range(1024..=u16::MAX);
        let tuple = FiveTuple {
            src_addr: client_prefix(src_pe).host(src_host),
            dst_addr: client_prefix(dst_pe).host(dst_host),
            src_port,
            dst_port: 80,
            proto: Protocol::Tcp,
        };
        let id = self.next_id;
        self.next_id += 1;
        Some(FlowArrival {
            id,
            time: t,
            tuple,
            size,
            src_pe,
            dst_pe,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    id: u64,
    time: f64,
    src: u32,
    dst: u32,
    size: f64,
    src_addr: Ipv4Addr,
    dst_addr: Ipv4Addr,
    src_port: u16,
    dst_port: u16,
}

pub fn write_csv<W: Write>(arrivals: &[FlowArrival], out: W) -> Result<(), TrafficError> {
    let mut w = csv::Writer::from_writer(out);
    for a in arrivals {
        w.serialize(CsvRow {
            id: a.id,
            time: a.time,
            src: a.src_pe.0,
            dst: a.dst_pe.0,
            size: a.size,
            src_addr: a.tuple.src_addr,
            dst_addr: a.tuple.dst_addr,
            src_port: a.tuple.src_port,
            dst_port: a.tuple.dst_port,
        })?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_csv<R: Read>(input: R) -> Result<Vec<FlowArrival>, TrafficError> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for row in r.deserialize() {
        let row: CsvRow = row?;
        out.push(FlowArrival {
            id: row.id,
            time: row.time,
            tuple: FiveTuple {
                src_addr: row.src_addr,
                dst_addr: row.dst_addr,
                src_port: row.src_port,
                dst_port: row.dst_port,
                proto: Protocol::Tcp,
            },
            size: row.size,
            src_pe: NodeId(row.src),
            dst_pe: NodeId(row.dst),
        });
    }
    Ok(out)
}
