//! Recall and latency measurement.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::index::{IvfIndex, Neighbor, SearchParams};
use crate::scan::{Capabilities, KernelChoice};
use crate::vectors::VectorSet;

/// `R@r` for every `r` in `ranks`: the fraction of queries whose true nearest
/// neighbor (first ground-truth id) is among the first `r` results.
pub fn evaluate_recall(results: &[Vec<u32>], ground_truth: &[Vec<i32>], ranks: &[usize]) -> Result<Vec<f64>> {
    if results.len() != ground_truth.len() {
        return Err(Error::input(format!(
            "{} result rows for {} ground-truth rows",
            results.len(),
            ground_truth.len()
        )));
    }
    if results.is_empty() {
        return Err(Error::input("no queries to evaluate"));
    }
    let mut hits = vec![0usize; ranks.len()];
    for (q, (res, gt)) in results.iter().zip(ground_truth).enumerate() {
        let &nn = gt.first().ok_or_else(|| Error::input(format!("query {q} has no ground truth")))?;
        if let Some(pos) = res.iter().position(|&id| id as i64 == nn as i64) {
            for (h, &r) in hits.iter_mut().zip(ranks) {
                if pos < r {
                    *h += 1;
                }
            }
        }
    }
    Ok(hits.into_iter().map(|h| h as f64 / results.len() as f64).collect())
}

#[derive(Debug, Clone)]
pub struct QueryOutcome {
    pub neighbors: Vec<Neighbor>,
    pub time_us: f64,
}

/// Searches every query on a pool of `workers` threads; each query runs on
/// one thread.
pub fn search_batch(
    index: &IvfIndex,
    queries: &VectorSet,
    params: &SearchParams,
    kernel: &KernelChoice,
    workers: usize,
) -> Result<Vec<QueryOutcome>> {
    if queries.dim() != index.dim() {
        return Err(Error::DimensionMismatch { expected: index.dim(), actual: queries.dim() });
    }
    let caps = Capabilities::detect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| {
        queries
            .as_flat()
            .par_chunks_exact(queries.dim())
            .map(|q| {
                let start = Instant::now();
                let neighbors = index.search_with(q, params, &caps, kernel)?;
                Ok(QueryOutcome { neighbors, time_us: start.elapsed().as_secs_f64() * 1e6 })
            })
            .collect()
    })
}

pub fn result_ids(outcomes: &[QueryOutcome]) -> Vec<Vec<u32>> {
    outcomes.iter().map(|o| o.neighbors.iter().map(|n| n.id).collect()).collect()
}

pub fn mean_time_ms(outcomes: &[QueryOutcome]) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes.iter().map(|o| o.time_us).sum::<f64>() / outcomes.len() as f64 / 1000.0
}

/// Per-query latency rows: `query_id,probes,time_us,results_found`.
pub fn write_latency_csv<W: Write>(w: W, outcomes: &[QueryOutcome], probes: usize) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Io(std::io::Error::other(e));
    out.write_record(["query_id", "probes", "time_us", "results_found"]).map_err(err)?;
    for (q, o) in outcomes.iter().enumerate() {
        out.write_record([
            q.to_string(),
            probes.to_string(),
            format!("{:.1}", o.time_us),
            o.neighbors.len().to_string(),
        ])
        .map_err(err)?;
    }
    out.flush()?;
    Ok(())
}
