//! Analytic communication cost of plain and blocked 2D sparse SUMMA under
//! tree broadcasts: `α` per message, `β` per word, `s` nonzeros per
//! `n/√p × n/√p` sub-matrix. Logarithms are base 2 (tree depth).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ceil_log2, GridConfig};
use crate::summa::BlockingFactor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Message startup time, seconds per message.
    pub alpha: f64,
    /// Transfer time, seconds per word.
    pub beta: f64,
    /// Nonzeros per sub-matrix.
    pub s: f64,
    pub p: usize,
    pub word_bytes: usize,
}

impl CostParams {
    pub fn validate(&self) -> Result<GridConfig> {
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !finite_nonneg(self.alpha) || !finite_nonneg(self.beta) || !finite_nonneg(self.s) {
            return Err(Error::InvalidParam("alpha, beta and s must be finite and non-negative".into()));
        }
        GridConfig::new(self.p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub latency_term: f64,
    pub bandwidth_term: f64,
    pub total: f64,
    /// Number of row plus column broadcasts.
    pub broadcasts: u64,
    /// Tree hops along the critical path: `broadcasts · ceil(log2 √p)`.
    pub messages: u64,
    /// Words moved along the critical path, `s · (br + bc) · √p · log2 √p`.
    pub words: f64,
}

/// `2α√p·log√p + 2βs√p·log√p`.
pub fn plain_summa_cost(cp: &CostParams) -> Result<CostEstimate> {
    let grid = cp.validate()?;
    let q = grid.q as f64;
    let lg = q.log2();
    let latency_term = 2.0 * cp.alpha * q * lg;
    let bandwidth_term = 2.0 * cp.beta * cp.s * q * lg;
    let broadcasts = 2 * grid.q as u64;
    Ok(CostEstimate {
        latency_term,
        bandwidth_term,
        total: latency_term + bandwidth_term,
        broadcasts,
        messages: broadcasts * ceil_log2(grid.q),
        words: 2.0 * cp.s * q * lg,
    })
}

/// `2α(br·bc)√p·log√p + βs(br + bc)√p·log√p`.
pub fn blocked_summa_cost(cp: &CostParams, bf: BlockingFactor) -> Result<CostEstimate> {
    let grid = cp.validate()?;
    let q = grid.q as f64;
    let lg = q.log2();
    let blocks = (bf.br * bf.bc) as f64;
    let stripes = (bf.br + bf.bc) as f64;
    let latency_term = 2.0 * cp.alpha * blocks * q * lg;
    let bandwidth_term = cp.beta * cp.s * stripes * q * lg;
    let broadcasts = 2 * (bf.br * bf.bc * grid.q) as u64;
    Ok(CostEstimate {
        latency_term,
        bandwidth_term,
        total: latency_term + bandwidth_term,
        broadcasts,
        messages: broadcasts * ceil_log2(grid.q),
        words: cp.s * stripes * q * lg,
    })
}
