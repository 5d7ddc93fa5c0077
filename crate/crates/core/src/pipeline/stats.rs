//! Run counters, timers, and the derived rates reported after a search.

use serde::{Deserialize, Serialize};

use crate::grid::TrafficCounters;

/// Raw measurements collected during a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawCounters {
    pub sequences: usize,
    pub blocks_planned: usize,
    pub discovered_candidates: u64,
    pub performed_alignments: u64,
    pub output_edges: u64,
    pub flops: u64,
    pub overlap_nnz: u64,
    pub cells: u64,
    pub kernel_seconds: f64,
    pub align_seconds: f64,
    pub spgemm_seconds: f64,
    pub sparse_all_seconds: f64,
    pub io_seconds: f64,
    pub total_seconds: f64,
    /// Per grid worker, seconds spent aligning its pairs.
    pub align_worker_seconds: Vec<f64>,
    /// Per grid worker, seconds spent in multiplies, merges and pruning.
    pub sparse_worker_seconds: Vec<f64>,
    pub peak_live_blocks: usize,
    pub traffic: TrafficCounters,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub sequences: usize,
    pub blocks: usize,
    pub discovered_candidates: u64,
    pub performed_alignments: u64,
    pub output_edges: u64,
    pub align_seconds: f64,
    pub spgemm_seconds: f64,
    pub sparse_all_seconds: f64,
    pub io_seconds: f64,
    /// Waiting on remote sequences. Sequences are shared in memory here, so
    /// this stays zero; kept so the schema lines up with distributed runs.
    pub cwait_seconds: f64,
    pub total_seconds: f64,
    pub alignments_per_second: f64,
    pub cups: f64,
    pub imbalance_align_pct: f64,
    pub imbalance_sparse_pct: f64,
    pub compression_factor: f64,
    pub peak_live_blocks: usize,
    pub flops: u64,
    pub overlap_nnz: u64,
    pub cells: u64,
    pub kernel_seconds: f64,
    pub broadcasts_row: u64,
    pub broadcasts_col: u64,
    pub messages_sent: u64,
    pub bytes_sent: u64,
}

/// `100 · (max − avg) / avg`; zero for empty, single-worker or idle inputs.
pub fn imbalance_pct(times: &[f64]) -> f64 {
    if times.len() < 2 {
        return 0.0;
    }
    let avg = times.iter().sum::<f64>() / times.len() as f64;
    if avg <= 0.0 {
        return 0.0;
    }
    let max = times.iter().copied().fold(f64::MIN, f64::max);
    100.0 * (max - avg) / avg
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

pub fn compute_stats(raw: &RawCounters) -> RunStats {
    RunStats {
        sequences: raw.sequences,
        blocks: raw.blocks_planned,
        discovered_candidates: raw.discovered_candidates,
        performed_alignments: raw.performed_alignments,
        output_edges: raw.output_edges,
        align_seconds: raw.align_seconds,
        spgemm_seconds: raw.spgemm_seconds,
        sparse_all_seconds: raw.sparse_all_seconds,
        io_seconds: raw.io_seconds,
        cwait_seconds: 0.0,
        total_seconds: raw.total_seconds,
        alignments_per_second: ratio(raw.performed_alignments as f64, raw.total_seconds),
        cups: ratio(raw.cells as f64, raw.kernel_seconds),
        imbalance_align_pct: imbalance_pct(&raw.align_worker_seconds),
        imbalance_sparse_pct: imbalance_pct(&raw.sparse_worker_seconds),
        compression_factor: ratio(raw.flops as f64, raw.overlap_nnz as f64),
        peak_live_blocks: raw.peak_live_blocks,
        flops: raw.flops,
        overlap_nnz: raw.overlap_nnz,
        cells: raw.cells,
        kernel_seconds: raw.kernel_seconds,
        broadcasts_row: raw.traffic.broadcasts_row,
        broadcasts_col: raw.traffic.broadcasts_col,
        messages_sent: raw.traffic.messages_sent,
        bytes_sent: raw.traffic.bytes_sent,
    }
}
