//! Local sparse matrices generic over their element payload, and a
//! semiring-parameterised SpGEMM.
//!
//! Storage is column-compressed over the *non-empty* columns only: a sorted
//! list of column ids, offsets into the row/value arrays for each of them, and
//! strictly increasing row indices within every column. The k-mer matrix is
//! `n × 25^k` wide, so a dense offset array over all columns is not an option.

use std::collections::HashMap;
use std::fmt::{self, Debug, Write as _};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::{self, Execution};

#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalSparse<E> {
    nrows: usize,
    ncols: usize,
    col_ids: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    vals: Vec<E>,
}

impl<E: Debug> Debug for LocalSparse<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "LocalSparse {}x{} nnz={}", self.nrows, self.ncols, self.nnz())?;
        if self.nnz() <= 16 {
            f.debug_list().entries(self.iter()).finish()?;
        }
        Ok(())
    }
}

impl<E> LocalSparse<E> {
    pub fn empty(nrows: usize, ncols: usize) -> Self {
        LocalSparse {
            nrows,
            ncols,
            col_ids: Vec::new(),
            col_ptr: vec![0],
            row_idx: Vec::new(),
            vals: Vec::new(),
        }
    }

    /// Builds a matrix from unordered triplets. Duplicate coordinates are
    /// folded with `combine` in input order.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, E)>,
        mut combine: impl FnMut(&mut E, E),
    ) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|(r, c, _)| *r >= nrows || *c >= ncols) {
            return Err(Error::Dimension {
                op: "from_triplets",
                detail: format!("entry ({r},{c}) outside {nrows}x{ncols}"),
            });
        }
        triplets.sort_by_key(|&(r, c, _)| (c, r));
        let mut b = ColumnBuilder::new(nrows, ncols);
        let mut iter = triplets.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            while let Some(&(r2, c2, _)) = iter.peek() {
                if (r2, c2) != (r, c) {
                    break;
                }
                combine(&mut v, iter.next().unwrap().2);
            }
            b.push(r, c, v);
        }
        Ok(b.finish())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vals.is_empty()
    }

    /// Number of columns holding at least one entry.
    pub fn nonempty_cols(&self) -> usize {
        self.col_ids.len()
    }

    /// Column offsets over the non-empty columns; the last one equals `nnz`.
    pub fn col_offsets(&self) -> &[usize] {
        &self.col_ptr
    }

    /// Iterates non-empty columns as `(col, rows, values)` in column order.
    pub fn columns(&self) -> impl Iterator<Item = (usize, &[usize], &[E])> + '_ {
        self.col_ids.iter().enumerate().map(move |(k, &c)| {
            let span = self.col_ptr[k]..self.col_ptr[k + 1];
            (c, &self.row_idx[span.clone()], &self.vals[span])
        })
    }

    /// Iterates entries as `(row, col, value)` sorted by `(col, row)`.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, &E)> + '_ {
        self.columns()
            .flat_map(|(c, rows, vals)| rows.iter().zip(vals).map(move |(&r, v)| (r, c, v)))
    }

    pub fn column(&self, col: usize) -> Option<(&[usize], &[E])> {
        let k = self.col_ids.binary_search(&col).ok()?;
        let span = self.col_ptr[k]..self.col_ptr[k + 1];
        Some((&self.row_idx[span.clone()], &self.vals[span]))
    }

    pub fn get(&self, row: usize, col: usize) -> Option<&E> {
        let (rows, vals) = self.column(col)?;
        rows.binary_search(&row).ok().map(|k| &vals[k])
    }

    pub fn into_triplets(self) -> Vec<(usize, usize, E)> {
        let mut out = Vec::with_capacity(self.vals.len());
        let mut vals = self.vals.into_iter();
        for (k, &c) in self.col_ids.iter().enumerate() {
            for &r in &self.row_idx[self.col_ptr[k]..self.col_ptr[k + 1]] {
                out.push((r, c, vals.next().unwrap()));
            }
        }
        out
    }

    /// Keeps the entries for which `keep(row, col, value)` holds.
    pub fn retain(self, mut keep: impl FnMut(usize, usize, &E) -> bool) -> Self {
        let (nrows, ncols) = (self.nrows, self.ncols);
        let mut b = ColumnBuilder::new(nrows, ncols);
        for (r, c, v) in self.into_triplets() {
            if keep(r, c, &v) {
                b.push(r, c, v);
            }
        }
        b.finish()
    }

    pub fn map<F, T>(self, mut f: F) -> LocalSparse<T>
    where
        F: FnMut(E) -> T,
    {
        LocalSparse {
            nrows: self.nrows,
            ncols: self.ncols,
            col_ids: self.col_ids,
            col_ptr: self.col_ptr,
            row_idx: self.row_idx,
            vals: self.vals.into_iter().map(&mut f).collect(),
        }
    }

    /// Checks the storage invariants.
    pub fn validate(&self) -> Result<()> {
        let bad = |detail: String| Err(Error::Dimension { op: "validate", detail });
        if self.col_ptr.len() != self.col_ids.len() + 1 || self.col_ptr[0] != 0 {
            return bad("offset array length".into());
        }
        if *self.col_ptr.last().unwrap() != self.nnz() || self.row_idx.len() != self.nnz() {
            return bad("last offset != nnz".into());
        }
        if self.col_ptr.windows(2).any(|w| w[0] > w[1]) {
            return bad("offsets not monotone".into());
        }
        if self.col_ptr.windows(2).any(|w| w[0] == w[1]) {
            return bad("stored column is empty".into());
        }
        if self.col_ids.windows(2).any(|w| w[0] >= w[1]) || self.col_ids.last().is_some_and(|&c| c >= self.ncols) {
            return bad("column ids not strictly increasing or out of range".into());
        }
        for (c, rows, _) in self.columns() {
            if rows.windows(2).any(|w| w[0] >= w[1]) || rows.last().is_some_and(|&r| r >= self.nrows) {
                return bad(format!("rows in column {c} not strictly increasing or out of range"));
            }
        }
        Ok(())
    }
}

impl<E: Clone> LocalSparse<E> {
    /// Extracts the sub-block `rows × cols`, re-based to local coordinates.
    pub fn slice(&self, rows: Range<usize>, cols: Range<usize>) -> Self {
        let mut b = ColumnBuilder::new(rows.len(), cols.len());
        let lo = self.col_ids.partition_point(|&c| c < cols.start);
        let hi = self.col_ids.partition_point(|&c| c < cols.end);
        for k in lo..hi {
            let span = self.col_ptr[k]..self.col_ptr[k + 1];
            let rs = &self.row_idx[span.clone()];
            let vs = &self.vals[span];
            let a = rs.partition_point(|&r| r < rows.start);
            let z = rs.partition_point(|&r| r < rows.end);
            for t in a..z {
                b.push(rs[t] - rows.start, self.col_ids[k] - cols.start, vs[t].clone());
            }
        }
        b.finish()
    }

    /// Places disjoint sub-blocks at `(row_offset, col_offset)` in an
    /// `nrows × ncols` matrix.
    pub fn assemble<'a>(
        nrows: usize,
        ncols: usize,
        parts: impl IntoIterator<Item = (usize, usize, &'a LocalSparse<E>)>,
    ) -> Result<Self>
    where
        E: 'a,
    {
        let mut triplets = Vec::new();
        for (ro, co, part) in parts {
            if ro + part.nrows > nrows || co + part.ncols > ncols {
                return Err(Error::Dimension {
                    op: "assemble",
                    detail: format!("part at ({ro},{co}) of {}x{} exceeds {nrows}x{ncols}", part.nrows, part.ncols),
                });
            }
            triplets.extend(part.iter().map(|(r, c, v)| (r + ro, c + co, v.clone())));
        }
        let before = triplets.len();
        let m = LocalSparse::from_triplets(nrows, ncols, triplets, |_, _| {})?;
        if m.nnz() != before {
            return Err(Error::Dimension {
                op: "assemble",
                detail: "overlapping parts".into(),
            });
        }
        Ok(m)
    }
}

impl<E: Debug> LocalSparse<E> {
    /// Coordinate-list dump, one `row\tcol\tpayload` line per entry sorted by
    /// `(col, row)`.
    pub fn debug_dump(&self) -> String {
        let mut s = String::new();
        for (r, c, v) in self.iter() {
            let _ = writeln!(s, "{r}\t{c}\t{v:?}");
        }
        s
    }
}

/// Appends entries in `(col, row)` order.
pub struct ColumnBuilder<E> {
    m: LocalSparse<E>,
}

impl<E> ColumnBuilder<E> {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        ColumnBuilder {
            m: LocalSparse::empty(nrows, ncols),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, val: E) {
        let m = &mut self.m;
        debug_assert!(row < m.nrows && col < m.ncols);
        match m.col_ids.last() {
            Some(&last) if last == col => {
                debug_assert!(*m.row_idx.last().unwrap() < row, "rows must increase");
                *m.col_ptr.last_mut().unwrap() += 1;
            }
            last => {
                debug_assert!(last.is_none_or(|&l| l < col), "columns must increase");
                m.col_ids.push(col);
                m.col_ptr.push(m.vals.len() + 1);
            }
        }
        m.row_idx.push(row);
        m.vals.push(val);
    }

    pub fn push_column(&mut self, col: usize, rows: Vec<usize>, vals: Vec<E>) {
        debug_assert_eq!(rows.len(), vals.len());
        if rows.is_empty() {
            return;
        }
        let m = &mut self.m;
        debug_assert!(m.col_ids.last().is_none_or(|&l| l < col));
        m.col_ids.push(col);
        m.row_idx.extend(rows);
        m.vals.extend(vals);
        m.col_ptr.push(m.vals.len());
    }

    pub fn finish(self) -> LocalSparse<E> {
        self.m
    }
}

/// Overloaded multiply/add pair used by [`local_spgemm`].
///
/// `multiply` receives global row, column and inner indices so payloads can
/// record positions. `add` must be associative and commutative for results
/// to be independent of accumulation order.
pub trait Semiring: Sync {
    type Left: Sync;
    type Right: Sync;
    type Out: Send;

    fn multiply(&self, a: &Self::Left, b: &Self::Right, row: usize, col: usize, inner: usize) -> Self::Out;

    fn add(&self, acc: &mut Self::Out, other: Self::Out);

    fn is_zero(&self, _x: &Self::Out) -> bool {
        false
    }
}

/// Ordinary `(×, +)` arithmetic; exact zeros are dropped.
#[derive(Clone, Copy, Debug, Default)]
pub struct PlusTimes;

impl Semiring for PlusTimes {
    type Left = i64;
    type Right = i64;
    type Out = i64;

    fn multiply(&self, a: &i64, b: &i64, _: usize, _: usize, _: usize) -> i64 {
        a * b
    }

    fn add(&self, acc: &mut i64, other: i64) {
        *acc += other;
    }

    fn is_zero(&self, x: &i64) -> bool {
        *x == 0
    }
}

/// Boolean `(AND, OR)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct AndOr;

impl Semiring for AndOr {
    type Left = bool;
    type Right = bool;
    type Out = bool;

    fn multiply(&self, a: &bool, b: &bool, _: usize, _: usize, _: usize) -> bool {
        *a && *b
    }

    fn add(&self, acc: &mut bool, other: bool) {
        *acc |= other;
    }

    fn is_zero(&self, x: &bool) -> bool {
        !*x
    }
}

/// Global index of local position 0 along each dimension of a product.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IndexOffsets {
    pub row: usize,
    pub col: usize,
    pub inner: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct SpgemmConfig {
    /// Output row counts up to this use a dense accumulator, larger ones a hash map.
    pub dense_threshold: usize,
    pub exec: Execution,
}

impl Default for SpgemmConfig {
    fn default() -> Self {
        SpgemmConfig {
            dense_threshold: 1 << 16,
            exec: Execution::Parallel,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Product<C> {
    pub matrix: LocalSparse<C>,
    /// Number of `multiply` invocations.
    pub flops: u64,
}

enum Accumulator<C> {
    Dense { slots: Vec<Option<C>>, touched: Vec<usize> },
    Hash(HashMap<usize, C>),
}

impl<C> Accumulator<C> {
    fn new(nrows: usize, threshold: usize) -> Self {
        if nrows <= threshold {
            Accumulator::Dense {
                slots: std::iter::repeat_with(|| None).take(nrows).collect(),
                touched: Vec::new(),
            }
        } else {
            Accumulator::Hash(HashMap::new())
        }
    }

    fn accumulate(&mut self, row: usize, x: C, add: impl FnOnce(&mut C, C)) {
        match self {
            Accumulator::Dense { slots, touched } => match &mut slots[row] {
                Some(acc) => add(acc, x),
                slot => {
                    *slot = Some(x);
                    touched.push(row);
                }
            },
            Accumulator::Hash(map) => match map.entry(row) {
                std::collections::hash_map::Entry::Occupied(mut e) => add(e.get_mut(), x),
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert(x);
                }
            },
        }
    }

    fn drain_sorted(&mut self) -> Vec<(usize, C)> {
        match self {
            Accumulator::Dense { slots, touched } => {
                touched.sort_unstable();
                touched
                    .drain(..)
                    .map(|r| (r, slots[r].take().unwrap()))
                    .collect()
            }
            Accumulator::Hash(map) => {
                let mut out: Vec<_> = map.drain().collect();
                out.sort_unstable_by_key(|&(r, _)| r);
                out
            }
        }
    }
}

/// `C = A·B` under `sr` with zero index offsets and default configuration.
pub fn local_spgemm<S: Semiring>(
    a: &LocalSparse<S::Left>,
    b: &LocalSparse<S::Right>,
    sr: &S,
) -> Result<LocalSparse<S::Out>> {
    local_spgemm_with(a, b, sr, IndexOffsets::default(), &SpgemmConfig::default()).map(|p| p.matrix)
}

/// Column-by-column SpGEMM: for each column `j` of `B`, every `(k, b)` in it
/// scales column `k` of `A` into a per-column accumulator.
pub fn local_spgemm_with<S: Semiring>(
    a: &LocalSparse<S::Left>,
    b: &LocalSparse<S::Right>,
    sr: &S,
    offsets: IndexOffsets,
    cfg: &SpgemmConfig,
) -> Result<Product<S::Out>> {
    if a.ncols != b.nrows {
        return Err(Error::Dimension {
            op: "local_spgemm",
            detail: format!("A is {}x{}, B is {}x{}", a.nrows, a.ncols, b.nrows, b.ncols),
        });
    }
    let cols: Vec<usize> = (0..b.col_ids.len()).collect();
    let per_col = par::map_init(
        cfg.exec,
        &cols,
        || Accumulator::new(a.nrows, cfg.dense_threshold),
        |acc, &kb| {
            let j = b.col_ids[kb];
            let span = b.col_ptr[kb]..b.col_ptr[kb + 1];
            let mut flops = 0u64;
            let mut lo = 0;
            for (&k, bv) in b.row_idx[span.clone()].iter().zip(&b.vals[span]) {
                lo += a.col_ids[lo..].partition_point(|&c| c < k);
                if lo == a.col_ids.len() {
                    break;
                }
                if a.col_ids[lo] != k {
                    continue;
                }
                let aspan = a.col_ptr[lo]..a.col_ptr[lo + 1];
                for (&i, av) in a.row_idx[aspan.clone()].iter().zip(&a.vals[aspan]) {
                    let x = sr.multiply(av, bv, i + offsets.row, j + offsets.col, k + offsets.inner);
                    acc.accumulate(i, x, |acc, x| sr.add(acc, x));
                    flops += 1;
                }
            }
            let entries: Vec<(usize, S::Out)> = acc
                .drain_sorted()
                .into_iter()
                .filter(|(_, v)| !sr.is_zero(v))
                .collect();
            (j, entries, flops)
        },
    );
    let mut builder = ColumnBuilder::new(a.nrows, b.ncols);
    let mut flops = 0;
    for (j, entries, f) in per_col {
        flops += f;
        let (rows, vals) = entries.into_iter().unzip();
        builder.push_column(j, rows, vals);
    }
    Ok(Product {
        matrix: builder.finish(),
        flops,
    })
}

/// `(i, j) → e` becomes `(j, i) → remap(e)`.
pub fn local_transpose<E>(a: LocalSparse<E>, mut remap: impl FnMut(E) -> E) -> LocalSparse<E> {
    let (nrows, ncols) = (a.nrows, a.ncols);
    let mut t: Vec<(usize, usize, E)> = a
        .into_triplets()
        .into_iter()
        .map(|(r, c, v)| (c, r, remap(v)))
        .collect();
    t.sort_unstable_by_key(|&(r, c, _)| (c, r));
    let mut b = ColumnBuilder::new(ncols, nrows);
    for (r, c, v) in t {
        b.push(r, c, v);
    }
    b.finish()
}

/// Element-wise union of equally sized parts; coinciding entries are folded
/// with `add` in part order.
pub fn merge_accumulate<C>(parts: Vec<LocalSparse<C>>, mut add: impl FnMut(&mut C, C)) -> Result<LocalSparse<C>> {
    let Some(first) = parts.first() else {
        return Err(Error::InvalidParam("merge_accumulate needs at least one part".into()));
    };
    let (nrows, ncols) = (first.nrows, first.ncols);
    if let Some(p) = parts.iter().find(|p| (p.nrows, p.ncols) != (nrows, ncols)) {
        return Err(Error::Dimension {
            op: "merge_accumulate",
            detail: format!("part is {}x{}, expected {nrows}x{ncols}", p.nrows, p.ncols),
        });
    }
    if parts.len() == 1 {
        return Ok(parts.into_iter().next().unwrap());
    }
    let triplets: Vec<(usize, usize, C)> = parts.into_iter().flat_map(LocalSparse::into_triplets).collect();
    // from_triplets sorts stably, so duplicates fold in part order
    LocalSparse::from_triplets(nrows, ncols, triplets, &mut add)
}
