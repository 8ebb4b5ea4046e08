// Copyright (c) 2026 The labelflow Authors.
// SPDX-License-Identifier: Apache-2.0

use std::cmp::Reverse;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};
use std::hash::Hash;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

/// Slack for comparing idle deadlines computed from tick indices.
const TIME_EPS: f64 = 1e-9;

/// Idle timeout of a flow entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum IdleTimeout {
    Infinite,
    /// seconds
    After(f64),
}

impl IdleTimeout {
    pub fn is_finite(self) -> bool {
        matches!(self, IdleTimeout::After(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableEntry<V> {
    pub value: V,
    pub idle_timeout: IdleTimeout,
    pub last_hit: f64,
    /// Flows currently traversing the entry. A fluid flow hits its entries
    /// continuously, so a pinned entry never goes idle.
    pub active: u32,
}

impl<V> TableEntry<V> {
    fn deadline(&self) -> Option<f64> {
        match self.idle_timeout {
            IdleTimeout::After(t) if self.active == 0 => Some(self.last_hit + t),
            _ => None,
        }
    }
}

/// Flow table with OpenFlow-style idle timeouts.
///
/// Expiry candidates sit in a deadline heap so a GC pass only touches entries
/// that can actually be due. Heap items are validated on pop; refreshing an
/// entry leaves a stale item behind that is skipped later.
#[derive(Debug, Clone)]
pub struct IdleTable<K: Eq + Hash + Ord + Clone, V> {
    entries: HashMap<K, TableEntry<V>>,
    deadlines: BinaryHeap<Reverse<(OrderedFloat<f64>, u64, K)>>,
    seq: u64,
}

impl<K: Eq + Hash + Ord + Clone, V> Default for IdleTable<K, V> {
    fn default() -> Self {
        IdleTable {
            entries: HashMap::new(),
            deadlines: BinaryHeap::new(),
            seq: 0,
        }
    }
}

impl<K: Eq + Hash + Ord + Clone, V> IdleTable<K, V> {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, key: &K) -> Option<&TableEntry<V>> {
        self.entries.get(key)
    }

    pub fn contains(&self, key: &K) -> bool {
        self.entries.contains_key(key)
    }

    /// Entries with at least one flow traversing them.
    pub fn pinned_count(&self) -> usize {
        self.entries.values().filter(|e| e.active > 0).count()
    }

    /// Entries sorted by key.
    pub fn sorted(&self) -> Vec<(&K, &TableEntry<V>)> {
        let mut v: Vec<_> = self.entries.iter().collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }

    fn schedule(&mut self, key: &K) {
        if let Some(deadline) = self.entries.get(key).and_then(|e| e.deadline()) {
            self.seq += 1;
            self.deadlines
                .push(Reverse((OrderedFloat(deadline), self.seq, key.clone())));
        }
    }

    /// Inserts or replaces an entry; an existing entry keeps its pin count.
    pub fn insert(&mut self, key: K, value: V, idle_timeout: IdleTimeout, now: f64) {
        match self.entries.entry(key.clone()) {
            Entry::Occupied(mut o) => {
                let e = o.get_mut();
                e.value = value;
                e.idle_timeout = idle_timeout;
                e.last_hit = now;
            }
            Entry::Vacant(v) => {
                v.insert(TableEntry {
                    value,
                    idle_timeout,
                    last_hit: now,
                    active: 0,
                });
            }
        }
        self.schedule(&key);
    }

    /// Refreshes the idle timer. Returns false if the key is absent.
    pub fn hit(&mut self, key: &K, now: f64) -> bool {
        match self.entries.get_mut(key) {
            Some(e) => {
                e.last_hit = now;
                self.schedule(key);
                true
            }
            None => false,
        }
    }

    /// A flow starts traversing the entry.
    pub fn pin(&mut self, key: &K, now: f64) -> bool {
        match self.entries.get_mut(key) {
            Some(e) => {
                e.active += 1;
                e.last_hit = now;
                true
            }
            None => false,
        }
    }

    /// A flow stops traversing the entry; its idle timer starts at `now`.
    pub fn unpin(&mut self, key: &K, now: f64) -> bool {
        match self.entries.get_mut(key) {
            Some(e) => {
                debug_assert!(e.active > 0, "unpin of an idle entry");
                e.active = e.active.saturating_sub(1);
                e.last_hit = now;
                self.schedule(key);
                true
            }
            None => false,
        }
    }

    /// Changes only the idle timeout of an entry.
    pub fn set_timeout(&mut self, key: &K, idle_timeout: IdleTimeout) -> bool {
        match self.entries.get_mut(key) {
            Some(e) => {
                e.idle_timeout = idle_timeout;
                self.schedule(key);
                true
            }
            None => false,
        }
    }

    pub fn remove(&mut self, key: &K) -> Option<TableEntry<V>> {
        self.entries.remove(key)
    }

    /// Removes every idle finite-timeout entry with `now - last_hit >= timeout`.
    pub fn expire(&mut self, now: f64) -> Vec<(K, TableEntry<V>)> {
        let mut out = Vec::new();
        while let Some(Reverse((deadline, _, _))) = self.deadlines.peek() {
            if deadline.0 > now + TIME_EPS {
                break;
            }
            let Reverse((_, _, key)) = self.deadlines.pop().expect("peeked");
            let due = self
                .entries
                .get(&key)
                .and_then(|e| e.deadline())
                .is_some_and(|d| d <= now + TIME_EPS);
            if due {
                let e = self.entries.remove(&key).expect("present");
                out.push((key, e));
            }
        }
        out
    }
}
