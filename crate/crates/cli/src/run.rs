//! Executes every (workload, policy) cell of a run config.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use cachesage::baselines::{PolicyKind, PolicySettings};
use cachesage::engine::{EngineConfig, PreparedTrace, RunOutput};
use cachesage::experiment::run_policy;
use cachesage::metrics::RunMetrics;
use cachesage::workloads::generate_trace;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, Source};

pub const METRICS_SCHEMA_VERSION: u32 = 1;
pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

/// Contents of `metrics.json`.
#[derive(Debug, Serialize)]
pub struct MetricsFile<'a> {
    pub schema: &'static str,
    pub version: u32,
    pub workload: &'a str,
    pub policy: &'a str,
    pub seed: Option<u64>,
    pub engine: &'a EngineConfig,
    pub settings: &'a PolicySettings,
    pub metrics: &'a RunMetrics,
    pub policy_stats: &'a serde_json::Value,
}

/// One row of the summary table.
#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub workload: String,
    pub policy: String,
    pub hit_rate: f64,
    /// Hit rate minus the first listed policy's, in percentage points.
    pub delta_pp: f64,
    pub mean_ttft_ms: f64,
    pub mean_e2e_ms: f64,
    pub throughput: f64,
    pub evictions: u64,
    pub warmups_executed: u64,
}

#[derive(Debug, Serialize)]
struct SummaryFile<'a> {
    schema: &'static str,
    version: u32,
    seed: Option<u64>,
    rows: &'a [SummaryRow],
}

/// Refuses to reuse a non-empty output directory unless `force`.
pub fn prepare_out_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let occupied = fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))?.next().is_some();
        if occupied && !force {
            bail!("output directory {} is not empty; pass --force to overwrite", dir.display());
        }
    }
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(())
}

fn cell_dir(out: &Path, workload: &str, policy: PolicyKind) -> PathBuf {
    let safe: String =
        workload.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
    out.join(safe).join(policy.as_str())
}

fn write_cell(dir: &Path, cfg: &RunConfig, workload: &str, engine: &EngineConfig, out: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    let file = MetricsFile {
        schema: "cachesage.metrics",
        version: METRICS_SCHEMA_VERSION,
        workload,
        policy: &out.policy,
        seed: cfg.seed,
        engine,
        settings: &cfg.settings,
        metrics: &out.metrics,
        policy_stats: &out.policy_stats,
    };
    let mut s = serde_json::to_string_pretty(&file)?;
    s.push('\n');
    fs::write(dir.join("metrics.json"), s)?;

    let mut w = csv::Writer::from_path(dir.join("turns.csv"))?;
    for t in &out.turns {
        w.serialize(t)?;
    }
    w.flush()?;

    if cfg.events {
        let mut w = BufWriter::new(fs::File::create(dir.join("events.jsonl"))?);
        for rec in &out.log {
            serde_json::to_writer(&mut w, rec)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    Ok(())
}

/// Runs every cell, writes per-cell files and the summary, and returns the
/// summary rows in config order.
pub fn execute(cfg: &RunConfig) -> Result<Vec<SummaryRow>> {
    let traces: Vec<Arc<PreparedTrace>> = cfg
        .workloads
        .par_iter()
        .map(|w| {
            let trace = match &w.source {
                Source::Preset(spec) => generate_trace(spec)?,
                Source::Trace(trace) => trace.clone(),
            };
            Ok(Arc::new(PreparedTrace::build(&trace, w.engine.block_size, &cfg.settings.cachesage.identity())?))
        })
        .collect::<Result<_>>()?;

    let cells: Vec<(usize, PolicyKind)> =
        (0..cfg.workloads.len()).flat_map(|w| cfg.policies.iter().map(move |&p| (w, p))).collect();
    let results: Vec<RunMetrics> = cells
        .par_iter()
        .map(|&(wi, kind)| {
            let w = &cfg.workloads[wi];
            let out = run_policy(&traces[wi], &w.engine, kind, &cfg.settings)
                .with_context(|| format!("{} / {}", w.name, kind.as_str()))?;
            write_cell(&cell_dir(&cfg.out_dir, &w.name, kind), cfg, &w.name, &w.engine, &out)
                .with_context(|| format!("writing {} / {}", w.name, kind.as_str()))?;
            Ok(out.metrics)
        })
        .collect::<Result<_>>()?;

    let per = cfg.policies.len();
    let rows: Vec<SummaryRow> = cells
        .iter()
        .zip(&results)
        .enumerate()
        .map(|(i, (&(wi, kind), m))| {
            let base = &results[i - i % per];
            SummaryRow {
                workload: cfg.workloads[wi].name.clone(),
                policy: kind.as_str().to_string(),
                hit_rate: m.hit_rate,
                delta_pp: 100.0 * (m.hit_rate - base.hit_rate),
                mean_ttft_ms: m.mean_ttft_ms,
                mean_e2e_ms: m.mean_e2e_ms,
                throughput: m.throughput,
                evictions: m.evictions,
                warmups_executed: m.warmups.executed,
            }
        })
        .collect();

    let mut w = csv::Writer::from_path(cfg.out_dir.join("summary.csv"))?;
    for r in &rows {
        w.serialize(r)?;
    }
    w.flush()?;
    let mut s = serde_json::to_string_pretty(&SummaryFile {
        schema: "cachesage.summary",
        version: SUMMARY_SCHEMA_VERSION,
        seed: cfg.seed,
        rows: &rows,
    })?;
    s.push('\n');
    fs::write(cfg.out_dir.join("summary.json"), s)?;
    Ok(rows)
}

/// Fixed-width table; the delta column is relative to the first policy.
pub fn format_table(rows: &[SummaryRow], baseline: &str) -> String {
    let wl = rows.iter().map(|r| r.workload.len()).max().unwrap_or(8).max(8);
    let mut s = format!(
        "{:<wl$}  {:<9}  {:>8}  {:>9}  {:>10}  {:>10}  {:>9}\n",
        "workload",
        "policy",
        "hit %",
        format!("Δpp/{baseline}"),
        "ttft ms",
        "e2e ms",
        "turns/s",
    );
    for r in rows {
        s += &format!(
            "{:<wl$}  {:<9}  {:>8.2}  {:>+9.2}  {:>10.2}  {:>10.1}  {:>9.3}\n",
            r.workload,
            r.policy,
            100.0 * r.hit_rate,
            r.delta_pp,
            r.mean_ttft_ms,
            r.mean_e2e_ms,
            r.throughput,
        );
    }
    s
}
