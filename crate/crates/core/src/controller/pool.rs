// Copyright (c) 2026 The labelflow Authors.
// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use crate::dataplane::Label;

/// Global label space. Hands out the lowest free value.
#[derive(Debug, Clone)]
pub struct LabelPool {
    next: u32,
    limit: u32,
    free: BTreeSet<u32>,
    in_use: usize,
}

impl Default for LabelPool {
    fn default() -> Self {
        Self::with_limit(Label::LIMIT)
    }
}

impl LabelPool {
    /// Pool over `[Label::MIN, limit)`.
    pub fn with_limit(limit: u32) -> Self {
        LabelPool {
            next: Label::MIN,
            limit: limit.clamp(Label::MIN, Label::LIMIT),
            free: BTreeSet::new(),
            in_use: 0,
        }
    }

    pub fn in_use(&self) -> usize {
        self.in_use
    }

    pub fn capacity(&self) -> usize {
        (self.limit - Label::MIN) as usize
    }

    pub fn allocate(&mut self) -> Option<Label> {
        let v = match self.free.pop_first() {
            Some(v) => v,
            None if self.next < self.limit => {
                self.next += 1;
                self.next - 1
            }
            None => return None,
        };
        self.in_use += 1;
        Some(Label(v))
    }

    pub fn release(&mut self, label: Label) {
        debug_assert!(label.0 >= Label::MIN && label.0 < self.next);
        if self.free.insert(label.0) {
            self.in_use -= 1;
        }
    }
}
