//! Batched Smith-Waterman alignment with identity and coverage filtering.

mod blosum;
mod sw;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use blosum::{blosum62, SubstitutionMatrix, BLOSUM62_TEXT};
pub use sw::Scratch;

use crate::alphabet::encode_residues;
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::seqio::SimilarityEdge;

#[derive(Clone, Debug, PartialEq)]
pub struct AlignParams {
    pub gap_open: i32,
    pub gap_extend: i32,
    pub matrix: SubstitutionMatrix,
    pub ani_threshold: f64,
    pub coverage_threshold: f64,
}

impl Default for AlignParams {
    fn default() -> Self {
        AlignParams {
            gap_open: 11,
            gap_extend: 2,
            matrix: blosum62().clone(),
            ani_threshold: 0.30,
            coverage_threshold: 0.70,
        }
    }
}

impl AlignParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap_open >= self.gap_extend && self.gap_extend >= 0) {
            return Err(Error::InvalidParam(format!(
                "gap penalties need open >= extend >= 0, got {}/{}",
                self.gap_open, self.gap_extend
            )));
        }
        if !self.matrix.is_symmetric() {
            return Err(Error::InvalidParam("substitution matrix is not symmetric".into()));
        }
        for (name, v) in [("ani", self.ani_threshold), ("coverage", self.coverage_threshold)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParam(format!("{name} threshold {v} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Best local alignment of `a` against `b`. Spans are 0-based and inclusive;
/// an alignment with score 0 is empty (`aln_len == 0`, spans zeroed).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub score: i32,
    pub i_begin: usize,
    pub i_end: usize,
    pub j_begin: usize,
    pub j_end: usize,
    pub matches: u32,
    pub aln_len: u32,
    pub cells: u64,
}

impl AlignmentResult {
    pub(crate) fn empty(cells: u64) -> Self {
        AlignmentResult {
            score: 0,
            i_begin: 0,
            i_end: 0,
            j_begin: 0,
            j_end: 0,
            matches: 0,
            aln_len: 0,
            cells,
        }
    }

    pub fn identity(&self) -> Option<f64> {
        (self.aln_len > 0).then(|| self.matches as f64 / self.aln_len as f64)
    }
}

/// Aligns two residue strings (letters, not codes).
pub fn smith_waterman(a: &[u8], b: &[u8], params: &AlignParams) -> Result<AlignmentResult> {
    let (a, b) = (encode_residues(a), encode_residues(b));
    sw::align_codes(&a, &b, params, &mut Scratch::default()).map(|(r, _)| r)
}

/// Aligns two sequences already mapped to alphabet codes.
pub fn smith_waterman_codes(a: &[u8], b: &[u8], params: &AlignParams, scratch: &mut Scratch) -> Result<(AlignmentResult, f64)> {
    sw::align_codes(a, b, params, scratch)
}

/// Applies the identity and coverage filters. `i` and `j` are the ids of the
/// sequences passed as `a` and `b`; the returned edge is oriented `i < j`.
pub fn evaluate_pair(
    result: &AlignmentResult,
    i: usize,
    j: usize,
    len_i: usize,
    len_j: usize,
    params: &AlignParams,
) -> Option<SimilarityEdge> {
    let identity = result.identity()?;
    let cov_i = (result.i_end - result.i_begin + 1) as f64 / len_i as f64;
    let cov_j = (result.j_end - result.j_begin + 1) as f64 / len_j as f64;
    if identity < params.ani_threshold || cov_i.min(cov_j) < params.coverage_threshold {
        return None;
    }
    let edge = if i < j {
        SimilarityEdge {
            i,
            j,
            score: result.score,
            identity,
            coverage_i: cov_i,
            coverage_j: cov_j,
        }
    } else {
        SimilarityEdge {
            i: j,
            j: i,
            score: result.score,
            identity,
            coverage_i: cov_j,
            coverage_j: cov_i,
        }
    };
    Some(edge)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchCounters {
    pub alignments: u64,
    pub cells: u64,
    /// Time inside the DP fill loops, summed over pairs.
    pub kernel_seconds: f64,
    /// Wall-clock time of the whole batch call.
    pub wall_seconds: f64,
}

impl BatchCounters {
    pub fn absorb(&mut self, other: &BatchCounters) {
        self.alignments += other.alignments;
        self.cells += other.cells;
        self.kernel_seconds += other.kernel_seconds;
        self.wall_seconds += other.wall_seconds;
    }
}

/// A pair of sequence ids to align, with an opaque payload carried through.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AlignPair<P> {
    pub i: usize,
    pub j: usize,
    pub payload: P,
}

pub struct BatchOutput<P> {
    /// Input order is preserved.
    pub results: Vec<(AlignPair<P>, Result<AlignmentResult>)>,
    pub counters: BatchCounters,
}

/// Aligns every pair. `codes[id]` holds the code sequence of sequence `id`.
/// A failing pair records its error and does not stop the batch.
pub fn align_batch<P: Send + Sync>(
    pairs: Vec<AlignPair<P>>,
    codes: &[Vec<u8>],
    params: &AlignParams,
    exec: Execution,
) -> BatchOutput<P> {
    let started = Instant::now();
    let outcomes = par::map_init(exec, &pairs, Scratch::default, |scratch, pair| {
        let (Some(a), Some(b)) = (codes.get(pair.i), codes.get(pair.j)) else {
            return Err(Error::InvalidParam(format!("pair ({}, {}) references an unknown sequence", pair.i, pair.j)));
        };
        sw::align_codes(a, b, params, scratch)
    });
    let mut counters = BatchCounters::default();
    let results = pairs
        .into_iter()
        .zip(outcomes)
        .map(|(pair, outcome)| {
            let outcome = outcome.map(|(r, secs)| {
                counters.alignments += 1;
                counters.cells += r.cells;
                counters.kernel_seconds += secs;
                r
            });
            (pair, outcome)
        })
        .collect();
    counters.wall_seconds = started.elapsed().as_secs_f64();
    BatchOutput { results, counters }
}
