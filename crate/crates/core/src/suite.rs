// Copyright (c) 2026 The labelflow Authors.
// SPDX-License-Identifier: Apache-2.0

//! Replication orchestration and on-disk suite layout.
//!
//! A suite directory holds:
//! - `suite.json`: manifest with the config and one record per run
//! - `run_cCC_rRRR.json` and `run_cCC_rRRR.csv`: result and time series
//! - `kpi.csv` / `kpi.json`: one report per threshold cell
//! - `summary.txt`: the reports as a table

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::{ConfigError, ScenarioConfig};
use crate::engine::{run, EngineError, Mode, RunResult};
use crate::metrics::{aggregate, compare, Comparison, Interval, KpiReport, MetricsError};

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(
        "run failed in cell {cell} (cong {cong_th}, warn {warn_th}), replication {replication}, seed {seed}: {source}"
    )]
    Run {
        cell: usize,
        cong_th: f64,
        warn_th: f64,
        replication: u64,
        seed: u64,
        source: EngineError,
    },
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Invalid(String),
}

impl SuiteError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            SuiteError::Config(_) => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SuiteError + '_ {
    move |source| SuiteError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub cong_th: f64,
    pub warn_th: f64,
    /// ordered by replication
    pub runs: Vec<RunResult>,
    pub report: KpiReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub mode: Mode,
    pub config: ScenarioConfig,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub replication: u64,
    pub seed: u64,
    pub file: String,
    pub timeseries: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cong_th: f64,
    pub warn_th: f64,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub mode: Mode,
    pub config: ScenarioConfig,
    pub cells: Vec<CellRecord>,
}

/// Threshold cells a suite actually runs. The baseline ignores thresholds,
/// so it runs only the first pair.
pub fn cells_for(cfg: &ScenarioConfig) -> Vec<usize> {
    match cfg.mode {
        Mode::Mechanism => (0..cfg.thresholds.len()).collect(),
        Mode::Legacy => vec![0],
    }
}

/// Runs every (cell, replication) of `cfg`, at most `jobs` at a time
/// (`None`: one per logical CPU). Results are ordered by cell, then
/// replication, whatever the completion order.
pub fn run_suite(cfg: &ScenarioConfig, jobs: Option<usize>) -> Result<SuiteResult, SuiteError> {
    cfg.validate()?;
    let topology = Arc::new(cfg.load_topology()?);
    let cells = cells_for(cfg);
    let tasks: Vec<(usize, u64)> = cells
        .iter()
        .flat_map(|&c| (0..cfg.replications).map(move |r| (c, r)))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| SuiteError::Invalid(format!("thread pool: {e}")))?;
    let results: Vec<Result<RunResult, SuiteError>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(cell, rep)| {
                let scenario = cfg.scenario(topology.clone(), cell, rep);
                log::info!("cell {cell} replication {rep}: start");
                run(&scenario).map_err(|source| SuiteError::Run {
                    cell,
                    cong_th: cfg.thresholds[cell].0,
                    warn_th: cfg.thresholds[cell].1,
                    replication: rep,
                    seed: crate::traffic::derive_seed(cfg.traffic.seed, rep),
                    source,
                })
            })
            .collect()
    });

    let mut out = Vec::new();
    let mut it = results.into_iter();
    for &c in &cells {
        let mut runs = Vec::with_capacity(cfg.replications as usize);
        for _ in 0..cfg.replications {
            runs.push(it.next().expect("one result per task")?);
        }
        let report = aggregate(&runs)?;
        out.push(Cell {
            cong_th: cfg.thresholds[c].0,
            warn_th: cfg.thresholds[c].1,
            runs,
            report,
        });
    }
    Ok(SuiteResult {
        mode: cfg.mode,
        config: cfg.clone(),
        cells: out,
    })
}

fn run_stem(cell: usize, replication: u64) -> String {
    format!("run_c{cell:02}_r{replication:03}")
}

/// Writes the suite layout into `dir`, creating it if needed.
pub fn write_suite(result: &SuiteResult, dir: &Path) -> Result<Manifest, SuiteError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut cells = Vec::new();
    for (ci, cell) in result.cells.iter().enumerate() {
        let mut runs = Vec::new();
        for r in &cell.runs {
            let stem = run_stem(ci, r.replication);
            let json_name = format!("{stem}.json");
            let csv_name = format!("{stem}.csv");
            let json = r.to_json();
            let p = dir.join(&json_name);
            fs::write(&p, &json).map_err(io_err(&p))?;
            let p = dir.join(&csv_name);
            let f = fs::File::create(&p).map_err(io_err(&p))?;
            r.write_timeseries_csv(f)?;
            runs.push(RunRecord {
                replication: r.replication,
                seed: r.seed,
                file: json_name,
                timeseries: csv_name,
                sha256: r.checksum(),
            });
        }
        cells.push(CellRecord {
            cong_th: cell.cong_th,
            warn_th: cell.warn_th,
            runs,
        });
    }
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        mode: result.mode,
        config: result.config.clone(),
        cells,
    };
    write_json(&dir.join("suite.json"), &manifest)?;
    let reports: Vec<&KpiReport> = result.cells.iter().map(|c| &c.report).collect();
    write_json(&dir.join("kpi.json"), &reports)?;
    let p = dir.join("kpi.csv");
    let f = fs::File::create(&p).map_err(io_err(&p))?;
    write_kpi_csv(&reports, f)?;
    let p = dir.join("summary.txt");
    fs::write(&p, summary_table(&reports)).map_err(io_err(&p))?;
    Ok(manifest)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), SuiteError> {
    let s = serde_json::to_string_pretty(value).map_err(|source| SuiteError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, s).map_err(io_err(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, SuiteError> {
    let s = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&s).map_err(|source| SuiteError::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a suite directory back, verifying every run checksum.
pub fn load_suite(dir: &Path) -> Result<SuiteResult, SuiteError> {
    let manifest: Manifest = read_json(&dir.join("suite.json"))?;
    let mut cells = Vec::new();
    for c in &manifest.cells {
        let mut runs = Vec::new();
        for rec in &c.runs {
            let path = dir.join(&rec.file);
            let text = fs::read_to_string(&path).map_err(io_err(&path))?;
            let run = RunResult::from_json(&text).map_err(|source| SuiteError::Json { path, source })?;
            if hex::encode(Sha256::digest(text.as_bytes())) != rec.sha256 || run.checksum() != rec.sha256 {
                return Err(SuiteError::Invalid(format!("checksum mismatch for {}", rec.file)));
            }
            runs.push(run);
        }
        let report = aggregate(&runs)?;
        cells.push(Cell {
            cong_th: c.cong_th,
            warn_th: c.warn_th,
            runs,
            report,
        });
    }
    Ok(SuiteResult {
        mode: manifest.mode,
        config: manifest.config,
        cells,
    })
}

/// Pairs every cell of `a` with the cell of `b` at the same thresholds, or
/// with `b`'s only cell when `b` is a baseline suite.
pub fn compare_suites(a: &SuiteResult, b: &SuiteResult) -> Result<Vec<Comparison>, SuiteError> {
    a.cells
        .iter()
        .map(|ca| {
            let cb = if b.mode == Mode::Legacy && b.cells.len() == 1 {
                &b.cells[0]
            } else {
                b.cells
                    .iter()
                    .find(|cb| cb.cong_th == ca.cong_th && cb.warn_th == ca.warn_th)
                    .ok_or_else(|| {
                        SuiteError::Invalid(format!(
                            "no cell (cong {}, warn {}) in the second suite",
                            ca.cong_th, ca.warn_th
                        ))
                    })?
            };
            Ok(compare(&ca.runs, &cb.runs)?)
        })
        .collect()
}

fn ci_cols(i: &Interval) -> [String; 2] {
    [
        i.mean.to_string(),
        i.half_width.map(|h| h.to_string()).unwrap_or_default(),
    ]
}

pub fn write_kpi_csv<W: std::io::Write>(reports: &[&KpiReport], out: W) -> Result<(), SuiteError> {
    let mut w = csv::Writer::from_writer(out);
    let names = [
        "tx_gb",
        "rx_gb",
        "avg_tput_mbps",
        "max_fri_pct",
        "max_fri_active_pct",
        "openflow_msgs_per_s",
        "openflow_msgs_per_s_max",
        "packet_in_per_s",
        "sum_dft_mean",
        "avg_labels_mean",
        "max_labels_mean",
    ];
    let mut header = vec!["mode".to_string(), "cong_th".into(), "warn_th".into(), "runs".into()];
    for n in names {
        header.push(n.to_string());
        header.push(format!("{n}_ci"));
    }
    w.write_record(&header)?;
    let none = Interval {
        mean: f64::NAN,
        half_width: None,
        n: 0,
    };
    for r in reports {
        let mut row = vec![
            r.mode.to_string(),
            r.cong_th.to_string(),
            r.warn_th.to_string(),
            r.runs.to_string(),
        ];
        for i in [
            &r.tx_gb,
            &r.rx_gb,
            &r.avg_tput_mbps,
            r.max_fri_pct.as_ref().unwrap_or(&none),
            r.max_fri_active_pct.as_ref().unwrap_or(&none),
            &r.openflow_msgs_per_s,
            &r.openflow_msgs_per_s_max,
            &r.packet_in_per_s,
            &r.sum_dft_mean,
            &r.avg_labels_mean,
            &r.max_labels_mean,
        ] {
            row.extend(ci_cols(i));
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn opt(i: &Option<Interval>) -> String {
    i.as_ref().map_or("n/a".into(), |i| format!("{i:.2}"))
}

/// Plain-text evaluation table.
pub fn summary_table(reports: &[&KpiReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:>5} {:>5} {:>16} {:>16} {:>18} {:>18} {:>16} {:>16} {:>16} {:>18}",
        "mode",
        "cong",
        "warn",
        "Tx [GB]",
        "Rx [GB]",
        "Avg Tput [Mbps]",
        "Sum DFT (PE)",
        "Avg labels (P)",
        "Max labels (P)",
        "maxFRI [%]",
        "msgs/s (max)"
    );
    for r in reports {
        let _ = writeln!(
            s,
            "{:<10} {:>5} {:>5} {:>16} {:>16} {:>18} {:>18} {:>16} {:>16} {:>16} {:>18}",
            r.mode.to_string(),
            r.cong_th,
            r.warn_th,
            format!("{:.2}", r.tx_gb),
            format!("{:.2}", r.rx_gb),
            format!("{:.1}", r.avg_tput_mbps),
            format!("{:.1}", r.sum_dft_mean),
            format!("{:.1}", r.avg_labels_mean),
            format!("{:.1}", r.max_labels_mean),
            opt(&r.max_fri_pct),
            format!("{:.1}", r.openflow_msgs_per_s_max),
        );
    }
    s
}

/// Plain-text comparison table.
pub fn comparison_table(rows: &[Comparison]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>5} {:>5} {:>16} {:>16} {:>18} {:>14} {:>12} {:>12}",
        "cong", "warn", "RxGain [%]", "CFRI [%]", "Msg reduction [%]", "Tput ratio", "msgs/s A", "msgs/s B"
    );
    for c in rows {
        let _ = writeln!(
            s,
            "{:>5} {:>5} {:>16} {:>16} {:>18} {:>14} {:>12.1} {:>12.1}",
            c.cong_th,
            c.warn_th,
            format!("{:.2}", c.rx_gain_pct),
            format!("{:.2}", c.cfri_pct),
            format!("{:.2}", c.msg_reduction_pct),
            format!("{:.3}", c.throughput_ratio),
            c.msgs_per_s_a,
            c.msgs_per_s_b,
        );
    }
    s
}
