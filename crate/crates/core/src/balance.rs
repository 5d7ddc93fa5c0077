//! Symmetry-aware load balancing of the overlap matrix.
//!
//! The overlap matrix is symmetric, so each unordered pair only needs one of
//! its two mirrored entries. The triangularity scheme skips blocks strictly
//! below the diagonal and trims diagonal blocks to their strict upper part;
//! the index scheme computes every block and keeps one mirror by id parity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::LocalSparse;
use crate::summa::{BlockId, BlockingFactor};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    #[default]
    Index,
    #[serde(alias = "triangular")]
    Triangularity,
}

/// Position of a block relative to the strictly upper triangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockKind {
    Full,
    Partial,
    Avoidable,
}

/// How a planned block is pruned after it is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockClass {
    Full,
    Partial,
    /// Index scheme: all blocks computed, parity-pruned.
    All,
}

/// Classifies a block of a square `b × b` blocking with uniform stripes.
pub fn classify_block(id: BlockId, bf: BlockingFactor) -> Result<BlockKind> {
    if !bf.is_square() {
        return Err(Error::InvalidParam(format!(
            "triangularity scheme needs square blocking, got {}x{}",
            bf.br, bf.bc
        )));
    }
    if id.r >= bf.br || id.c >= bf.bc {
        return Err(Error::InvalidParam(format!("block ({},{}) outside {}x{}", id.r, id.c, bf.br, bf.bc)));
    }
    Ok(match id.r.cmp(&id.c) {
        std::cmp::Ordering::Less => BlockKind::Full,
        std::cmp::Ordering::Equal => BlockKind::Partial,
        std::cmp::Ordering::Greater => BlockKind::Avoidable,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPlan {
    pub scheme: Scheme,
    pub bf: BlockingFactor,
    /// Blocks to compute, row-major.
    pub entries: Vec<(BlockId, BlockClass)>,
}

impl BlockPlan {
    pub fn new(scheme: Scheme, bf: BlockingFactor) -> Result<Self> {
        let entries = match scheme {
            Scheme::Index => bf.ids().map(|id| (id, BlockClass::All)).collect(),
            Scheme::Triangularity => {
                let mut out = Vec::new();
                for id in bf.ids() {
                    match classify_block(id, bf)? {
                        BlockKind::Full => out.push((id, BlockClass::Full)),
                        BlockKind::Partial => out.push((id, BlockClass::Partial)),
                        BlockKind::Avoidable => {}
                    }
                }
                out
            }
        };
        Ok(BlockPlan { scheme, bf, entries })
    }

    pub fn block_ids(&self) -> impl Iterator<Item = BlockId> + '_ {
        self.entries.iter().map(|&(id, _)| id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Keeps the strict upper triangle of a partial block; full blocks pass
/// through. `(row_offset, col_offset)` is the global index of local `(0, 0)`.
pub fn prune_triangularity<E>(block: LocalSparse<E>, class: BlockClass, row_offset: usize, col_offset: usize) -> LocalSparse<E> {
    match class {
        BlockClass::Full => block,
        BlockClass::Partial | BlockClass::All => block.retain(|r, c, _| r + row_offset < c + col_offset),
    }
}

/// Parity rule on global ids: diagonal dropped, lower triangle keeps equal
/// parities, upper triangle keeps differing parities.
#[inline]
pub fn index_keeps(i: usize, j: usize) -> bool {
    match i.cmp(&j) {
        std::cmp::Ordering::Equal => false,
        std::cmp::Ordering::Greater => i % 2 == j % 2,
        std::cmp::Ordering::Less => i % 2 != j % 2,
    }
}

pub fn prune_index<E>(block: LocalSparse<E>, row_offset: usize, col_offset: usize) -> LocalSparse<E> {
    block.retain(|r, c, _| index_keeps(r + row_offset, c + col_offset))
}

/// Applies the plan's pruning rule for `class`.
pub fn prune<E>(scheme: Scheme, class: BlockClass, block: LocalSparse<E>, row_offset: usize, col_offset: usize) -> LocalSparse<E> {
    match scheme {
        Scheme::Index => prune_index(block, row_offset, col_offset),
        Scheme::Triangularity => prune_triangularity(block, class, row_offset, col_offset),
    }
}
