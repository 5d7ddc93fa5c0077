//! Plain and blocked 2D sparse SUMMA.
//!
//! The output `C = A·B` is formed in `br × bc` blocks. Block `C(r, c)` needs
//! row stripe `A(r, *)` and column stripe `B(*, c)`, each of which is itself
//! distributed over the whole grid. Computing one block takes `q` stages; at
//! stage `t` grid column `t` broadcasts its `A` pieces along the rows and grid
//! row `t` broadcasts its `B` pieces along the columns.

use std::borrow::Cow;
use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{split_bounds, DistMatrix, Grid};
use crate::sparse::{local_spgemm_with, merge_accumulate, IndexOffsets, LocalSparse, Semiring, SpgemmConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockingFactor {
    pub br: usize,
    pub bc: usize,
}

impl BlockingFactor {
    pub fn new(br: usize, bc: usize) -> Result<Self> {
        if br == 0 || bc == 0 {
            return Err(Error::InvalidParam(format!("blocking factor {br}x{bc} must be at least 1x1")));
        }
        Ok(BlockingFactor { br, bc })
    }

    pub fn square(b: usize) -> Result<Self> {
        Self::new(b, b)
    }

    pub fn blocks(&self) -> usize {
        self.br * self.bc
    }

    pub fn is_square(&self) -> bool {
        self.br == self.bc
    }

    /// All block ids in row-major order.
    pub fn ids(&self) -> impl Iterator<Item = BlockId> + '_ {
        (0..self.br).flat_map(move |r| (0..self.bc).map(move |c| BlockId { r, c }))
    }
}

impl Default for BlockingFactor {
    fn default() -> Self {
        BlockingFactor { br: 1, bc: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockId {
    pub r: usize,
    pub c: usize,
}

/// Row stripes of `A` and column stripes of `B`, each distributed on the grid.
#[derive(Clone, Debug)]
pub struct Stripes<A, B> {
    pub a: Vec<DistMatrix<A>>,
    pub b: Vec<DistMatrix<B>>,
    row_bounds: Vec<usize>,
    col_bounds: Vec<usize>,
}

impl<A, B> Stripes<A, B> {
    pub fn blocking(&self) -> BlockingFactor {
        BlockingFactor {
            br: self.a.len(),
            bc: self.b.len(),
        }
    }

    /// Global row boundaries of the `A` stripes (`br + 1` entries).
    pub fn row_bounds(&self) -> &[usize] {
        &self.row_bounds
    }

    /// Global column boundaries of the `B` stripes (`bc + 1` entries).
    pub fn col_bounds(&self) -> &[usize] {
        &self.col_bounds
    }
}

pub fn stripe_inputs<A: Clone, B: Clone>(
    a: &DistMatrix<A>,
    b: &DistMatrix<B>,
    bf: BlockingFactor,
) -> Result<Stripes<A, B>> {
    if a.config() != b.config() {
        return Err(Error::InvalidParam("A and B live on different grids".into()));
    }
    if a.ncols() != b.nrows() || a.col_bounds() != b.row_bounds() {
        return Err(Error::Dimension {
            op: "stripe_inputs",
            detail: format!(
                "A is {}x{}, B is {}x{}; inner splits must agree",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols()
            ),
        });
    }
    let cfg = a.config();
    let q = cfg.q;
    let row_bounds = split_bounds(a.nrows(), bf.br);
    let col_bounds = split_bounds(b.ncols(), bf.bc);

    let a_stripes = row_bounds
        .windows(2)
        .map(|w| {
            let local = split_bounds(w[1] - w[0], q);
            let blocks = (0..cfg.p)
                .map(|rank| {
                    let (i, j) = cfg.coords(rank);
                    a.extract(w[0] + local[i]..w[0] + local[i + 1], a.col_range(j))
                })
                .collect();
            DistMatrix::from_blocks(cfg, local, a.col_bounds().to_vec(), blocks)
        })
        .collect();
    let b_stripes = col_bounds
        .windows(2)
        .map(|w| {
            let local = split_bounds(w[1] - w[0], q);
            let blocks = (0..cfg.p)
                .map(|rank| {
                    let (i, j) = cfg.coords(rank);
                    b.extract(b.row_range(i), w[0] + local[j]..w[0] + local[j + 1])
                })
                .collect();
            DistMatrix::from_blocks(cfg, b.row_bounds().to_vec(), local, blocks)
        })
        .collect();
    Ok(Stripes {
        a: a_stripes,
        b: b_stripes,
        row_bounds,
        col_bounds,
    })
}

/// One computed output block, still distributed over the grid.
#[derive(Clone, Debug)]
pub struct BlockOutput<C> {
    pub id: BlockId,
    /// Global row/column of the block's first entry.
    pub row_offset: usize,
    pub col_offset: usize,
    /// Block pieces in block-local coordinates.
    pub dist: DistMatrix<C>,
    pub flops: u64,
    /// Per-rank seconds spent in local multiplies.
    pub spgemm_seconds: Vec<f64>,
    /// Per-rank seconds spent merging stage results.
    pub merge_seconds: Vec<f64>,
}

impl<C> BlockOutput<C> {
    /// Global `(row, col)` offset of `rank`'s piece.
    pub fn piece_offset(&self, rank: usize) -> (usize, usize) {
        let (i, j) = self.dist.config().coords(rank);
        (self.row_offset + self.dist.row_bounds()[i], self.col_offset + self.dist.col_bounds()[j])
    }
}

impl<C: Clone> BlockOutput<C> {
    /// The block in global coordinates of the full `nrows × ncols` output.
    pub fn gather_global(&self, nrows: usize, ncols: usize) -> LocalSparse<C> {
        let local = self.dist.gather();
        LocalSparse::assemble(nrows, ncols, [(self.row_offset, self.col_offset, &local)]).expect("block within output")
    }
}

fn wire<E: Serialize>(m: &LocalSparse<E>) -> Result<Vec<u8>> {
    Ok(bincode::serialize(m)?)
}

fn unwire<'a, E: Clone + DeserializeOwned>(bytes: Vec<u8>, local: Option<&'a LocalSparse<E>>) -> Result<Cow<'a, LocalSparse<E>>> {
    match local {
        Some(m) => Ok(Cow::Borrowed(m)),
        None => Ok(Cow::Owned(bincode::deserialize(&bytes)?)),
    }
}

/// Computes `C(r, c)` in `q` broadcast stages.
pub fn summa_block<S>(
    id: BlockId,
    stripes: &Stripes<S::Left, S::Right>,
    sr: &S,
    grid: &Grid,
    cfg: &SpgemmConfig,
) -> Result<BlockOutput<S::Out>>
where
    S: Semiring,
    S::Left: Clone + Serialize + DeserializeOwned,
    S::Right: Clone + Serialize + DeserializeOwned,
{
    let bf = stripes.blocking();
    if id.r >= bf.br || id.c >= bf.bc {
        return Err(Error::InvalidParam(format!("block ({},{}) outside {}x{}", id.r, id.c, bf.br, bf.bc)));
    }
    let a = &stripes.a[id.r];
    let b = &stripes.b[id.c];
    if grid.config() != a.config() {
        return Err(Error::InvalidParam("stripes and grid shapes differ".into()));
    }
    let row_offset = stripes.row_bounds[id.r];
    let col_offset = stripes.col_bounds[id.c];
    let q = grid.config().q;

    let per_rank = grid.run(|mut ep| async move {
        let (i, j) = ep.coords();
        let mut parts = Vec::with_capacity(q);
        let (mut flops, mut spgemm) = (0u64, 0.0f64);
        for t in 0..q {
            let a_root = (j == t).then(|| a.block(i, t));
            let b_root = (i == t).then(|| b.block(t, j));
            let a_bytes = ep.broadcast_row(t, a_root.map(wire).transpose()?).await?;
            let b_bytes = ep.broadcast_col(t, b_root.map(wire).transpose()?).await?;
            let a_piece = unwire(a_bytes, a_root)?;
            let b_piece = unwire(b_bytes, b_root)?;
            let offsets = IndexOffsets {
                row: row_offset + a.row_bounds()[i],
                col: col_offset + b.col_bounds()[j],
                inner: a.col_bounds()[t],
            };
            let start = Instant::now();
            let prod = local_spgemm_with(&a_piece, &b_piece, sr, offsets, cfg)?;
            spgemm += start.elapsed().as_secs_f64();
            flops += prod.flops;
            parts.push(prod.matrix);
        }
        let start = Instant::now();
        let merged = merge_accumulate(parts, |x, y| sr.add(x, y))?;
        Ok((merged, flops, spgemm, start.elapsed().as_secs_f64()))
    })?;

    let mut blocks = Vec::with_capacity(per_rank.len());
    let (mut flops, mut spgemm_seconds, mut merge_seconds) = (0, Vec::new(), Vec::new());
    for (m, f, s, g) in per_rank {
        blocks.push(m);
        flops += f;
        spgemm_seconds.push(s);
        merge_seconds.push(g);
    }
    Ok(BlockOutput {
        id,
        row_offset,
        col_offset,
        dist: DistMatrix::from_blocks(grid.config(), a.row_bounds().to_vec(), b.col_bounds().to_vec(), blocks),
        flops,
        spgemm_seconds,
        merge_seconds,
    })
}

/// Lazily computes the listed blocks one at a time.
pub struct BlockedSumma<'a, S: Semiring> {
    stripes: &'a Stripes<S::Left, S::Right>,
    sr: &'a S,
    grid: &'a Grid,
    cfg: SpgemmConfig,
    plan: std::vec::IntoIter<BlockId>,
}

pub fn blocked_summa<'a, S: Semiring>(
    stripes: &'a Stripes<S::Left, S::Right>,
    plan: impl IntoIterator<Item = BlockId>,
    sr: &'a S,
    grid: &'a Grid,
    cfg: SpgemmConfig,
) -> BlockedSumma<'a, S> {
    BlockedSumma {
        stripes,
        sr,
        grid,
        cfg,
        plan: plan.into_iter().collect::<Vec<_>>().into_iter(),
    }
}

impl<S> Iterator for BlockedSumma<'_, S>
where
    S: Semiring,
    S::Left: Clone + Serialize + DeserializeOwned,
    S::Right: Clone + Serialize + DeserializeOwned,
{
    type Item = Result<BlockOutput<S::Out>>;

    fn next(&mut self) -> Option<Self::Item> {
        let id = self.plan.next()?;
        Some(summa_block(id, self.stripes, self.sr, self.grid, &self.cfg).map_err(|e| e.at(id, "summa")))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.plan.size_hint()
    }
}
