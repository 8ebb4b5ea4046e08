// Copyright (c) 2026 The labelflow Authors.
// SPDX-License-Identifier: Apache-2.0

//! C ABI over the labelflow simulator.
//!
//! Conventions:
//! - fallible calls return [`LfStatus`]; on failure [`lf_last_error`] holds
//!   a message for the calling thread
//! - objects are opaque handles released with their `_free` function
//! - strings returned as `char *` are owned by the caller and released with
//!   [`lf_string_free`]
//! - a panic inside the library is caught and reported as `LF_STATUS_PANIC`

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use labelflow::config::ScenarioConfig;
use labelflow::engine::{run, RunResult};
use labelflow::metrics::max_fri;
use labelflow::topology::{load_topology, load_topology_file, Topology, US_BACKBONE};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LfStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Topology = 4,
    Run = 5,
    OutOfRange = 6,
    BufferTooSmall = 7,
    Panic = 8,
}

/// Parsed network. Shareable between runs.
pub struct LfTopology {
    inner: Arc<Topology>,
}

/// Outcome of one simulation run.
pub struct LfRunResult {
    inner: RunResult,
}

/// Headline numbers of a run. Rates are per second of measured time.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LfKpis {
    pub tx_bytes: f64,
    pub rx_bytes: f64,
    pub avg_tput_mbps: f64,
    /// NaN when no sample had active flows
    pub max_fri_pct: f64,
    pub avg_labels_p: f64,
    pub max_labels_p: f64,
    pub sum_dft_mean: f64,
    pub msgs_per_s_mean: f64,
    pub msgs_per_s_max: f64,
    pub packet_in_per_s: f64,
    pub arrivals: u64,
    pub completed: u64,
    pub path_violations: u64,
    pub capacity_violations: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    let c = CString::new(s).expect("NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: LfStatus, msg: impl Into<String>) -> LfStatus {
    set_error(msg);
    status
}

/// Runs `f` with panics turned into `LF_STATUS_PANIC`.
fn guard(f: impl FnOnce() -> LfStatus) -> LfStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(LfStatus::Panic, format!("panic: {msg}"))
        }
    }
}

/// # Safety
/// `s` must be null or a NUL-terminated string.
unsafe fn str_arg<'a>(s: *const c_char, what: &str) -> Result<&'a str, LfStatus> {
    if s.is_null() {
        return Err(fail(LfStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(LfStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn lf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn lf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a topology document.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lf_topology_parse(text: *const c_char, out: *mut *mut LfTopology) -> LfStatus {
    guard(|| {
        if out.is_null() {
            return fail(LfStatus::NullArgument, "out is null");
        }
        let text = match str_arg(text, "text") {
            Ok(s) => s,
            Err(e) => return e,
        };
        match load_topology(text) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(LfTopology { inner: Arc::new(t) }));
                LfStatus::Ok
            }
            Err(e) => fail(LfStatus::Topology, e.to_string()),
        }
    })
}

/// Reads and parses a topology file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lf_topology_load(path: *const c_char, out: *mut *mut LfTopology) -> LfStatus {
    guard(|| {
        if out.is_null() {
            return fail(LfStatus::NullArgument, "out is null");
        }
        let path = match str_arg(path, "path") {
            Ok(s) => s,
            Err(e) => return e,
        };
        match load_topology_file(Path::new(path)) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(LfTopology { inner: Arc::new(t) }));
                LfStatus::Ok
            }
            Err(e) => fail(LfStatus::Topology, e.to_string()),
        }
    })
}

/// The built-in 39-node backbone.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lf_topology_backbone(out: *mut *mut LfTopology) -> LfStatus {
    guard(|| {
        if out.is_null() {
            return fail(LfStatus::NullArgument, "out is null");
        }
        match load_topology(US_BACKBONE) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(LfTopology { inner: Arc::new(t) }));
                LfStatus::Ok
            }
            Err(e) => fail(LfStatus::Topology, e.to_string()),
        }
    })
}

/// Node count, or 0 for a null handle.
///
/// # Safety
/// `topo` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lf_topology_node_count(topo: *const LfTopology) -> usize {
    topo.as_ref().map_or(0, |t| t.inner.node_count())
}

/// Directed link count, or 0 for a null handle.
///
/// # Safety
/// `topo` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lf_topology_link_count(topo: *const LfTopology) -> usize {
    topo.as_ref().map_or(0, |t| t.inner.link_count())
}

/// PE count, or 0 for a null handle.
///
/// # Safety
/// `topo` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lf_topology_pe_count(topo: *const LfTopology) -> usize {
    topo.as_ref().map_or(0, |t| t.inner.pes().len())
}

/// # Safety
/// `topo` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lf_topology_free(topo: *mut LfTopology) {
    if !topo.is_null() {
        drop(Box::from_raw(topo));
    }
}

/// Runs one replication of threshold cell `cell` of the TOML scenario
/// `config`. With a null `topo` the config's own topology is used
/// (the built-in backbone when it names none).
///
/// # Safety
/// `config` must be a NUL-terminated string, `topo` null or a live handle,
/// and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lf_run(
    config: *const c_char,
    topo: *const LfTopology,
    cell: usize,
    replication: u64,
    out: *mut *mut LfRunResult,
) -> LfStatus {
    guard(|| {
        if out.is_null() {
            return fail(LfStatus::NullArgument, "out is null");
        }
        let text = match str_arg(config, "config") {
            Ok(s) => s,
            Err(e) => return e,
        };
        let cfg = match ScenarioConfig::from_toml_str(text).and_then(|c| c.validate().map(|()| c)) {
            Ok(c) => c,
            Err(e) => return fail(LfStatus::Config, e.to_string()),
        };
        if cell >= cfg.thresholds.len() {
            return fail(
                LfStatus::OutOfRange,
                format!("cell {cell} out of range: config has {}", cfg.thresholds.len()),
            );
        }
        let topology = match topo.as_ref() {
            Some(t) => t.inner.clone(),
            None => match cfg.load_topology() {
                Ok(t) => Arc::new(t),
                Err(e) => return fail(LfStatus::Topology, e.to_string()),
            },
        };
        match run(&cfg.scenario(topology, cell, replication)) {
            Ok(r) => {
                *out = Box::into_raw(Box::new(LfRunResult { inner: r }));
                LfStatus::Ok
            }
            Err(e) => fail(LfStatus::Run, e.to_string()),
        }
    })
}

/// Fills `out` with the run's KPIs.
///
/// # Safety
/// `result` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lf_result_kpis(result: *const LfRunResult, out: *mut LfKpis) -> LfStatus {
    guard(|| {
        let (Some(r), false) = (result.as_ref(), out.is_null()) else {
            return fail(LfStatus::NullArgument, "result or out is null");
        };
        let r = &r.inner;
        *out = LfKpis {
            tx_bytes: r.tx_bytes,
            rx_bytes: r.rx_bytes,
            avg_tput_mbps: r.avg_tput_mbps(),
            max_fri_pct: max_fri(&r.samples).unwrap_or(f64::NAN),
            avg_labels_p: r.avg_labels_mean(),
            max_labels_p: r.max_labels_max(),
            sum_dft_mean: r.sum_dft_mean(),
            msgs_per_s_mean: r.msgs_per_s_mean(),
            msgs_per_s_max: r.msgs_per_s_max(),
            packet_in_per_s: r.packet_in_per_s_mean(),
            arrivals: r.arrivals,
            completed: r.completed,
            path_violations: r.path_violations,
            capacity_violations: r.capacity_violations,
        };
        LfStatus::Ok
    })
}

/// Writes the 64-digit hex SHA-256 of the result JSON plus a NUL into
/// `buf`, which must hold at least 65 bytes.
///
/// # Safety
/// `result` must be a live handle and `buf` valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn lf_result_checksum(result: *const LfRunResult, buf: *mut c_char, len: usize) -> LfStatus {
    guard(|| {
        let (Some(r), false) = (result.as_ref(), buf.is_null()) else {
            return fail(LfStatus::NullArgument, "result or buf is null");
        };
        let sum = r.inner.checksum();
        if len <= sum.len() {
            return fail(
                LfStatus::BufferTooSmall,
                format!("need {} bytes, got {len}", sum.len() + 1),
            );
        }
        ptr::copy_nonoverlapping(sum.as_ptr().cast::<c_char>(), buf, sum.len());
        *buf.add(sum.len()) = 0;
        LfStatus::Ok
    })
}

/// Full result as JSON, or null for a null handle. Release with
/// [`lf_string_free`].
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lf_result_json(result: *const LfRunResult) -> *mut c_char {
    match result.as_ref() {
        Some(r) => into_c_string(r.inner.to_json()),
        None => {
            set_error("result is null");
            ptr::null_mut()
        }
    }
}

/// # Safety
/// `result` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lf_result_free(result: *mut LfRunResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
