// Copyright (c) 2026 The labelflow Authors.
// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use labelflow::config::ScenarioConfig;
use labelflow::engine::Mode;
use labelflow::suite::{compare_suites, comparison_table, load_suite, run_suite, write_suite, SuiteError};
use labelflow::topology::load_topology_file;

#[derive(Parser)]
#[command(name = "labelflow", version, about = "Label-aggregation flow simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Mechanism,
    Legacy,
    /// both modes, then a comparison
    Both,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a replication suite and write results under <output-dir>/<mode>/
    Run {
        #[arg(long)]
        config: PathBuf,
        /// overrides the config's mode
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// overrides the traffic seed replications derive from
        #[arg(long)]
        seed_base: Option<u64>,
        /// parallel runs; defaults to the logical CPU count
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long, env = "LABELFLOW_OUTPUT_DIR")]
        output_dir: Option<PathBuf>,
    },
    /// Compare a candidate suite directory against a baseline one
    Compare {
        dir_a: PathBuf,
        dir_b: PathBuf,
        /// also write the comparison as JSON
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Topology file utilities
    Topo {
        #[command(subcommand)]
        cmd: TopoCmd,
    },
}

#[derive(Subcommand)]
enum TopoCmd {
    /// Parse and check a topology file
    Validate { path: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Run {
            config,
            mode,
            seed_base,
            jobs,
            output_dir,
        } => cmd_run(&config, mode, seed_base, jobs, output_dir),
        Cmd::Compare { dir_a, dir_b, json } => cmd_compare(&dir_a, &dir_b, json.as_deref()),
        Cmd::Topo {
            cmd: TopoCmd::Validate { path },
        } => cmd_validate(&path),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn cmd_run(
    config: &Path,
    mode: Option<ModeArg>,
    seed_base: Option<u64>,
    jobs: Option<usize>,
    output_dir: Option<PathBuf>,
) -> Result<(), SuiteError> {
    let mut cfg = ScenarioConfig::from_file(config)?;
    if let Some(s) = seed_base {
        cfg.traffic.seed = s;
    }
    if let Some(d) = output_dir {
        cfg.output_dir = d;
    }
    let modes = match mode {
        None => vec![cfg.mode],
        Some(ModeArg::Mechanism) => vec![Mode::Mechanism],
        Some(ModeArg::Legacy) => vec![Mode::Legacy],
        Some(ModeArg::Both) => vec![Mode::Mechanism, Mode::Legacy],
    };
    let mut suites = Vec::new();
    for m in modes {
        cfg.mode = m;
        let start = Instant::now();
        let suite = run_suite(&cfg, jobs)?;
        let dir = cfg.output_dir.join(m.to_string());
        write_suite(&suite, &dir)?;
        let runs: usize = suite.cells.iter().map(|c| c.runs.len()).sum();
        println!(
            "{m}: {runs} runs in {:.1} s -> {}",
            start.elapsed().as_secs_f64(),
            dir.display()
        );
        let reports: Vec<_> = suite.cells.iter().map(|c| &c.report).collect();
        print!("{}", labelflow::suite::summary_table(&reports));
        let faults: u64 = suite
            .cells
            .iter()
            .flat_map(|c| &c.runs)
            .map(|r| r.path_violations + r.forwarding_faults + r.capacity_violations)
            .sum();
        if faults > 0 {
            return Err(SuiteError::Invalid(format!(
                "{faults} invariant violations recorded; see run files"
            )));
        }
        suites.push(suite);
    }
    if let [a, b] = suites.as_slice() {
        println!();
        print!("{}", comparison_table(&compare_suites(a, b)?));
    }
    Ok(())
}

fn cmd_compare(a: &Path, b: &Path, json: Option<&Path>) -> Result<(), SuiteError> {
    let sa = load_suite(a)?;
    let sb = load_suite(b)?;
    let rows = compare_suites(&sa, &sb)?;
    print!("{}", comparison_table(&rows));
    if let Some(p) = json {
        let s = serde_json::to_string_pretty(&rows).expect("comparison serializes");
        std::fs::write(p, s).map_err(|source| SuiteError::Io {
            path: p.to_path_buf(),
            source,
        })?;
    }
    Ok(())
}

fn cmd_validate(path: &Path) -> Result<(), SuiteError> {
    let t = load_topology_file(path).map_err(labelflow::config::ConfigError::from)?;
    println!(
        "{}: {} nodes ({} PE, {} P), {} links",
        path.display(),
        t.node_count(),
        t.pes().len(),
        t.node_count() - t.pes().len(),
        t.link_count()
    );
    Ok(())
}
