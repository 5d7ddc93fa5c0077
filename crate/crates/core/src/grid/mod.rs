//! Virtual √p × √p process grid, 2D-distributed matrices and the collectives
//! that move them.

mod transport;

use std::ops::Range;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use transport::{Endpoint, Grid, GridMode, TrafficCounters};

pub(crate) use transport::ceil_log2;

use crate::error::{Error, Result};
use crate::sparse::{local_transpose, LocalSparse};

/// Shape of the process grid. Ranks map to `(row, col)` in row-major order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridConfig {
    pub p: usize,
    pub q: usize,
}

impl GridConfig {
    pub fn new(p: usize) -> Result<Self> {
        let q = (p as f64).sqrt().round() as usize;
        if p == 0 || q * q != p {
            return Err(Error::NotPerfectSquare(p));
        }
        Ok(GridConfig { p, q })
    }

    pub fn coords(&self, rank: usize) -> (usize, usize) {
        (rank / self.q, rank % self.q)
    }

    pub fn rank_of(&self, row: usize, col: usize) -> usize {
        row * self.q + col
    }
}

/// `parts + 1` boundaries splitting `0..n` into chunks of `ceil(n / parts)`;
/// the last chunk takes whatever remains (possibly less, possibly nothing).
pub fn split_bounds(n: usize, parts: usize) -> Vec<usize> {
    let chunk = n.div_ceil(parts.max(1));
    (0..=parts).map(|i| (i * chunk).min(n)).collect()
}

/// A matrix split into `q × q` sub-blocks, one per worker (rank order).
/// Sub-blocks use local coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistMatrix<E> {
    config: GridConfig,
    nrows: usize,
    ncols: usize,
    row_bounds: Vec<usize>,
    col_bounds: Vec<usize>,
    blocks: Vec<LocalSparse<E>>,
}

impl<E> DistMatrix<E> {
    pub(crate) fn from_blocks(
        config: GridConfig,
        row_bounds: Vec<usize>,
        col_bounds: Vec<usize>,
        blocks: Vec<LocalSparse<E>>,
    ) -> Self {
        debug_assert_eq!(blocks.len(), config.p);
        debug_assert!(blocks.iter().enumerate().all(|(rank, b)| {
            let (r, c) = config.coords(rank);
            b.nrows() == row_bounds[r + 1] - row_bounds[r] && b.ncols() == col_bounds[c + 1] - col_bounds[c]
        }));
        DistMatrix {
            config,
            nrows: *row_bounds.last().unwrap(),
            ncols: *col_bounds.last().unwrap(),
            row_bounds,
            col_bounds,
            blocks,
        }
    }

    pub fn config(&self) -> GridConfig {
        self.config
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row_bounds(&self) -> &[usize] {
        &self.row_bounds
    }

    pub fn col_bounds(&self) -> &[usize] {
        &self.col_bounds
    }

    pub fn row_range(&self, grid_row: usize) -> Range<usize> {
        self.row_bounds[grid_row]..self.row_bounds[grid_row + 1]
    }

    pub fn col_range(&self, grid_col: usize) -> Range<usize> {
        self.col_bounds[grid_col]..self.col_bounds[grid_col + 1]
    }

    pub fn block(&self, grid_row: usize, grid_col: usize) -> &LocalSparse<E> {
        &self.blocks[self.config.rank_of(grid_row, grid_col)]
    }

    pub fn block_of_rank(&self, rank: usize) -> &LocalSparse<E> {
        &self.blocks[rank]
    }

    pub fn blocks(&self) -> &[LocalSparse<E>] {
        &self.blocks
    }

    pub fn into_blocks(self) -> Vec<LocalSparse<E>> {
        self.blocks
    }

    pub fn nnz(&self) -> usize {
        self.blocks.iter().map(LocalSparse::nnz).sum()
    }
}

impl<E: Clone> DistMatrix<E> {
    /// Copies the global region `rows × cols` out of whichever sub-blocks
    /// intersect it, in region-local coordinates.
    pub fn extract(&self, rows: Range<usize>, cols: Range<usize>) -> LocalSparse<E> {
        let overlap = |a: &Range<usize>, b: Range<usize>| a.start.max(b.start)..a.end.min(b.end);
        let mut pieces = Vec::new();
        for (rank, block) in self.blocks.iter().enumerate() {
            let (r, c) = self.config.coords(rank);
            let rr = overlap(&rows, self.row_range(r));
            let cc = overlap(&cols, self.col_range(c));
            if rr.is_empty() || cc.is_empty() {
                continue;
            }
            let (r0, c0) = (self.row_bounds[r], self.col_bounds[c]);
            let piece = block.slice(rr.start - r0..rr.end - r0, cc.start - c0..cc.end - c0);
            pieces.push((rr.start - rows.start, cc.start - cols.start, piece));
        }
        LocalSparse::assemble(rows.len(), cols.len(), pieces.iter().map(|(r, c, p)| (*r, *c, p)))
            .expect("grid sub-blocks are disjoint")
    }

    /// Reassembles the global matrix.
    pub fn gather(&self) -> LocalSparse<E> {
        let parts = self.blocks.iter().enumerate().map(|(rank, b)| {
            let (r, c) = self.config.coords(rank);
            (self.row_bounds[r], self.col_bounds[c], b)
        });
        LocalSparse::assemble(self.nrows, self.ncols, parts).expect("sub-blocks tile the matrix")
    }
}

/// Splits `a` so worker `(r, c)` holds row chunk `r` × column chunk `c`.
pub fn distribute<E: Clone>(a: &LocalSparse<E>, config: GridConfig) -> DistMatrix<E> {
    let row_bounds = split_bounds(a.nrows(), config.q);
    let col_bounds = split_bounds(a.ncols(), config.q);
    let blocks = (0..config.p)
        .map(|rank| {
            let (r, c) = config.coords(rank);
            a.slice(row_bounds[r]..row_bounds[r + 1], col_bounds[c]..col_bounds[c + 1])
        })
        .collect();
    DistMatrix::from_blocks(config, row_bounds, col_bounds, blocks)
}

/// `Aᵀ` on the same grid: worker `(r, c)` receives the sub-block held by
/// `(c, r)` and transposes it locally with `remap`.
pub fn distributed_transpose<E, F>(a: &DistMatrix<E>, grid: &Grid, remap: F) -> Result<DistMatrix<E>>
where
    E: Clone + Send + Sync + Serialize + DeserializeOwned,
    F: Fn(E) -> E + Sync,
{
    if grid.config() != a.config {
        return Err(Error::InvalidParam("matrix and grid shapes differ".into()));
    }
    let cfg = a.config;
    let remap = &remap;
    let blocks = grid.run(|mut ep| async move {
        let (r, c) = ep.coords();
        let mine = a.block(r, c);
        let partner = cfg.rank_of(c, r);
        let theirs = if partner == ep.rank() {
            mine.clone()
        } else {
            ep.send(partner, bincode::serialize(mine)?)?;
            bincode::deserialize(&ep.recv(partner).await?)?
        };
        Ok(local_transpose(theirs, remap))
    })?;
    Ok(DistMatrix::from_blocks(cfg, a.col_bounds.clone(), a.row_bounds.clone(), blocks))
}
