//! Full-matrix affine-gap Smith-Waterman with traceback.

use std::time::Instant;

use super::{AlignParams, AlignmentResult};
use crate::error::{Error, Result};

const NEG_INF: i32 = i32::MIN / 4;

// Direction byte layout: bits 0-1 H source, bit 2 E extended, bit 3 F extended.
const H_STOP: u8 = 0;
const H_DIAG: u8 = 1;
const H_UP: u8 = 2;
const H_LEFT: u8 = 3;
const E_EXT: u8 = 1 << 2;
const F_EXT: u8 = 1 << 3;

/// Branch-free max. Scores stay far from the `i32` limits, so the
/// difference cannot overflow. Written with shifts because the optimizer
/// turns plain `max` in this loop into mispredicted branches.
#[inline(always)]
fn max2(a: i32, b: i32) -> i32 {
    let d = a - b;
    a - (d & (d >> 31))
}

/// Reusable DP buffers. One per thread keeps the batch engine allocation-free.
#[derive(Default)]
pub struct Scratch {
    h_row: Vec<i32>,
    f_row: Vec<i32>,
    dirs: Vec<u8>,
}

/// Aligns two code sequences. Returns the result and the seconds spent in
/// the DP fill loop alone.
pub fn align_codes(a: &[u8], b: &[u8], params: &AlignParams, scratch: &mut Scratch) -> Result<(AlignmentResult, f64)> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySequence);
    }
    let (m, n) = (a.len(), b.len());
    let open = params.gap_open;
    let ext = params.gap_extend;
    let matrix = &params.matrix;

    scratch.h_row.clear();
    scratch.h_row.resize(n + 1, 0);
    scratch.f_row.clear();
    scratch.f_row.resize(n + 1, NEG_INF);
    scratch.dirs.clear();
    scratch.dirs.resize(m * n, 0);
    let h_row = &mut scratch.h_row;
    let f_row = &mut scratch.f_row;
    let dirs = &mut scratch.dirs;

    let mut best = 0i32;
    let mut best_at = (0usize, 0usize);

    let started = Instant::now();
    let mut profile = [0i32; 32];
    for i in 1..=m {
        // codes are < 25, so masking with 31 keeps lookups in bounds without checks
        for (slot, &s) in profile.iter_mut().zip(matrix.row(a[i - 1])) {
            *slot = s as i32;
        }
        let dir_row = &mut dirs[(i - 1) * n..i * n];
        let mut diag = 0i32; // H[i-1][j-1]
        let mut left = 0i32; // H[i][j-1]
        let mut e = NEG_INF; // E[i][j-1]
        let cols = b.iter().zip(h_row[1..].iter_mut()).zip(f_row[1..].iter_mut().zip(dir_row.iter_mut()));
        for (j, ((&bj, h_slot), (f_slot, dir))) in cols.enumerate() {
            let up = *h_slot;

            let e_open = left - open;
            let e_ext = e - ext;
            e = max2(e_open, e_ext);
            let f_open = up - open;
            let f_ext = *f_slot - ext;
            let f = max2(f_open, f_ext);
            *f_slot = f;

            let dg = diag + profile[(bj & 31) as usize];
            let h = max2(max2(dg, f), max2(e, 0));
            // first of stop, diagonal, up, left that attains the maximum
            let is_diag = (h == dg) as u8;
            let is_up = (h == f) as u8 & !is_diag & 1;
            let src = (h != 0) as u8 * (H_LEFT - 2 * is_diag - is_up);
            *dir = src | ((e_ext > e_open) as u8 * E_EXT) | ((f_ext > f_open) as u8 * F_EXT);

            if h > best {
                best = h;
                best_at = (i, j + 1);
            }
            diag = up;
            left = h;
            *h_slot = h;
        }
    }
    let kernel = started.elapsed().as_secs_f64();

    let cells = (m * n) as u64;
    if best == 0 {
        return Ok((AlignmentResult::empty(cells), kernel));
    }
    Ok((traceback(a, b, dirs, n, best, best_at), kernel))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum State {
    H,
    E,
    F,
}

fn traceback(a: &[u8], b: &[u8], dirs: &[u8], n: usize, score: i32, (i_end, j_end): (usize, usize)) -> AlignmentResult {
    let (mut i, mut j) = (i_end, j_end);
    let mut state = State::H;
    let mut matches = 0u32;
    let mut aln_len = 0u32;
    let (mut i_begin, mut j_begin) = (i_end, j_end);
    while i > 0 && j > 0 {
        let d = dirs[(i - 1) * n + (j - 1)];
        match state {
            State::H => match d & 3 {
                H_STOP => break,
                H_DIAG => {
                    if a[i - 1] == b[j - 1] {
                        matches += 1;
                    }
                    aln_len += 1;
                    i_begin = i;
                    j_begin = j;
                    i -= 1;
                    j -= 1;
                }
                H_UP => state = State::F,
                _ => state = State::E,
            },
            State::F => {
                aln_len += 1;
                if d & F_EXT == 0 {
                    state = State::H;
                }
                i -= 1;
            }
            State::E => {
                aln_len += 1;
                if d & E_EXT == 0 {
                    state = State::H;
                }
                j -= 1;
            }
        }
    }
    AlignmentResult {
        score,
        i_begin: i_begin - 1,
        i_end: i_end - 1,
        j_begin: j_begin - 1,
        j_end: j_end - 1,
        matches,
        aln_len,
        cells: (a.len() * b.len()) as u64,
    }
}
