// Copyright (c) 2026 The labelflow Authors.
// SPDX-License-Identifier: Apache-2.0

//! Flow-level simulator for label-based flow aggregation with on-demand
//! multipath in an SDN-controlled MPLS domain, with a reactive per-flow SDN
//! baseline for comparison.

pub mod config;
pub mod controller;
pub mod dataplane;
pub mod engine;
pub mod metrics;
pub mod suite;
pub mod topology;
pub mod traffic;
