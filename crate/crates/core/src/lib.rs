//! Many-against-many protein similarity search.
//!
//! Candidate pairs come from an overlap matrix `A·Aᵀ`, where `A` is the
//! sequence-by-k-mer matrix and the product runs under a custom semiring as a
//! blocked 2D sparse SUMMA on a virtual process grid. Symmetry-aware pruning
//! keeps each unordered pair once; surviving pairs are aligned with affine-gap
//! Smith-Waterman and filtered on identity and coverage. Blocks can be
//! pre-computed while the previous block is being aligned.

pub mod align;
pub mod alphabet;
pub mod balance;
pub mod costmodel;
pub mod error;
pub mod grid;
pub mod kmer;
pub mod oracle;
pub mod par;
pub mod pipeline;
pub mod seqio;
pub mod sparse;
pub mod summa;
pub mod synth;

pub use error::{Error, Result};
