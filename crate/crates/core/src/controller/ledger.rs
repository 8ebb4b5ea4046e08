// Copyright (c) 2026 The labelflow Authors.
// SPDX-License-Identifier: Apache-2.0

use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

/// Controller messages of one kind or another.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageCounts {
    pub stat_requests: u64,
    pub stat_responses: u64,
    pub bundle_updates: u64,
    pub packet_in: u64,
    pub flow_mods: u64,
}

impl MessageCounts {
    /// Messages exchanged by the mechanism: statistics plus bundles.
    pub fn mechanism(&self) -> u64 {
        self.stat_requests + self.stat_responses + self.bundle_updates + self.packet_in + self.flow_mods
    }

    /// Reactive OpenFlow traffic: Packet_IN plus the FLOW_MODs answering them.
    pub fn openflow(&self) -> u64 {
        self.packet_in + self.flow_mods
    }

    pub fn total(&self) -> u64 {
        self.mechanism()
    }
}

impl AddAssign for MessageCounts {
    fn add_assign(&mut self, o: Self) {
        self.stat_requests += o.stat_requests;
        self.stat_responses += o.stat_responses;
        self.bundle_updates += o.bundle_updates;
        self.packet_in += o.packet_in;
        self.flow_mods += o.flow_mods;
    }
}

/// Message counts bucketed by simulated second: bucket k covers [k, k+1).
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MessageLedger {
    per_second: Vec<MessageCounts>,
}

impl MessageLedger {
    pub fn bucket(now: f64) -> usize {
        // tick times are exact multiples; guard against 2.9999999
        (now + 1e-9).floor().max(0.0) as usize
    }

    pub fn at(&mut self, now: f64) -> &mut MessageCounts {
        let b = Self::bucket(now);
        if self.per_second.len() <= b {
            self.per_second.resize(b + 1, MessageCounts::default());
        }
        &mut self.per_second[b]
    }

    pub fn second(&self, k: usize) -> MessageCounts {
        self.per_second.get(k).copied().unwrap_or_default()
    }

    pub fn seconds(&self) -> &[MessageCounts] {
        &self.per_second
    }

    pub fn total(&self) -> MessageCounts {
        let mut t = MessageCounts::default();
        for c in &self.per_second {
            t += *c;
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn buckets() {
        let mut l = MessageLedger::default();
        l.at(0.0).bundle_updates += 3;
        l.at(2.9999999999).packet_in += 1;
        l.at(3.5).packet_in += 1;
        assert_eq!(l.second(0).bundle_updates, 3);
        assert_eq!(l.second(3).packet_in, 2);
        assert_eq!(l.second(1), MessageCounts::default());
        assert_eq!(l.second(99), MessageCounts::default());
        assert_eq!(l.total().mechanism(), 5);
    }
}
