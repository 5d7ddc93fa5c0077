//! Slow, independent reference implementations used to validate the fast
//! paths: a textbook three-matrix Smith-Waterman and an all-pairs search.

use std::collections::HashSet;

use crate::align::{AlignParams, AlignmentResult};
use crate::alphabet::code_of;
use crate::error::{Error, Result};
use crate::kmer::KmerParams;
use crate::seqio::{SequenceRecord, SimilarityEdge};

const NEG: i64 = i64::MIN / 4;

/// Quadratic-memory Gotoh alignment. Traceback recomputes each move from the
/// stored matrices, preferring stop, then diagonal, then up, then left, and
/// preferring gap opens over extensions.
pub fn reference_smith_waterman(a: &[u8], b: &[u8], params: &AlignParams) -> Result<AlignmentResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySequence);
    }
    let code = |x: u8| code_of(x).unwrap_or(crate::alphabet::WILDCARD);
    let s = |i: usize, j: usize| params.matrix.score(code(a[i - 1]), code(b[j - 1])) as i64;
    let (m, n) = (a.len(), b.len());
    let open = params.gap_open as i64;
    let ext = params.gap_extend as i64;

    let mut h = vec![vec![0i64; n + 1]; m + 1];
    let mut e = vec![vec![NEG; n + 1]; m + 1];
    let mut f = vec![vec![NEG; n + 1]; m + 1];
    let mut best = (0i64, 0usize, 0usize);
    for i in 1..=m {
        for j in 1..=n {
            e[i][j] = (h[i][j - 1] - open).max(e[i][j - 1] - ext);
            f[i][j] = (h[i - 1][j] - open).max(f[i - 1][j] - ext);
            h[i][j] = 0.max(h[i - 1][j - 1] + s(i, j)).max(e[i][j]).max(f[i][j]);
            if h[i][j] > best.0 {
                best = (h[i][j], i, j);
            }
        }
    }
    let cells = (m * n) as u64;
    let (score, i_end, j_end) = best;
    if score == 0 {
        return Ok(AlignmentResult {
            score: 0,
            i_begin: 0,
            i_end: 0,
            j_begin: 0,
            j_end: 0,
            matches: 0,
            aln_len: 0,
            cells,
        });
    }

    #[derive(PartialEq)]
    enum M {
        H,
        E,
        F,
    }
    let (mut i, mut j, mut state) = (i_end, j_end, M::H);
    let (mut matches, mut len) = (0u32, 0u32);
    let (mut ib, mut jb) = (i, j);
    loop {
        match state {
            M::H => {
                let v = h[i][j];
                if v == 0 {
                    break;
                }
                if v == h[i - 1][j - 1] + s(i, j) {
                    matches += (a[i - 1] == b[j - 1]) as u32;
                    len += 1;
                    ib = i;
                    jb = j;
                    i -= 1;
                    j -= 1;
                    if i == 0 || j == 0 {
                        break;
                    }
                } else if v == f[i][j] {
                    state = M::F;
                } else {
                    state = M::E;
                }
            }
            M::F => {
                len += 1;
                if f[i][j] == h[i - 1][j] - open {
                    state = M::H;
                }
                i -= 1;
            }
            M::E => {
                len += 1;
                if e[i][j] == h[i][j - 1] - open {
                    state = M::H;
                }
                j -= 1;
            }
        }
    }
    Ok(AlignmentResult {
        score: score as i32,
        i_begin: ib - 1,
        i_end: i_end - 1,
        j_begin: jb - 1,
        j_end: j_end - 1,
        matches,
        aln_len: len,
        cells,
    })
}

/// Number of distinct k-length substrings the two sequences share.
pub fn shared_kmers(a: &[u8], b: &[u8], k: usize) -> usize {
    if a.len() < k || b.len() < k {
        return 0;
    }
    let sa: HashSet<&[u8]> = a.windows(k).collect();
    let sb: HashSet<&[u8]> = b.windows(k).collect();
    sa.intersection(&sb).count()
}

/// All-pairs search: every pair with at least one shared k-mer and at least
/// `common_kmer_threshold` of them is aligned (smaller id first) and kept if
/// it meets both filters. Edges come back sorted by `(i, j)`.
pub fn oracle_edges(records: &[SequenceRecord], kmer: &KmerParams, params: &AlignParams) -> Result<Vec<SimilarityEdge>> {
    let mut edges = Vec::new();
    for i in 0..records.len() {
        for j in i + 1..records.len() {
            let (a, b) = (&records[i].residues, &records[j].residues);
            let shared = shared_kmers(a, b, kmer.k);
            if shared == 0 || shared < kmer.common_kmer_threshold as usize {
                continue;
            }
            let r = reference_smith_waterman(a, b, params)?;
            if r.aln_len == 0 {
                continue;
            }
            let identity = r.matches as f64 / r.aln_len as f64;
            let cov_i = (r.i_end + 1 - r.i_begin) as f64 / a.len() as f64;
            let cov_j = (r.j_end + 1 - r.j_begin) as f64 / b.len() as f64;
            if identity >= params.ani_threshold && cov_i >= params.coverage_threshold && cov_j >= params.coverage_threshold {
                edges.push(SimilarityEdge {
                    i,
                    j,
                    score: r.score,
                    identity,
                    coverage_i: cov_i,
                    coverage_j: cov_j,
                });
            }
        }
    }
    Ok(edges)
}

/// Formats edges as sorted output lines, the same bytes a canonicalized
/// pipeline output holds.
pub fn render_canonical(edges: &[SimilarityEdge], records: &[SequenceRecord]) -> Vec<u8> {
    let mut text = Vec::new();
    for e in edges {
        text.extend_from_slice(e.format_line(&records[e.i].header, &records[e.j].header).as_bytes());
        text.push(b'\n');
    }
    crate::seqio::canonical_lines(&text)
}
