//! Seeded synthetic protein corpora made of mutated families.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seqio::SequenceRecord;

const STANDARD: &[u8] = b"ARNDCQEGHILKMFPSTWYV";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub n: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Members per family; the last family may be smaller.
    pub family_size: usize,
    /// Per-residue substitution probability for family members.
    pub substitution_rate: f64,
    /// Per-residue probability of an insertion or deletion.
    pub indel_rate: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n: 1000,
            min_len: 50,
            max_len: 500,
            family_size: 4,
            substitution_rate: 0.25,
            indel_rate: 0.02,
            seed: 42,
        }
    }
}

/// Generates `n` records with headers `seq0..seq{n-1}` in shuffled order.
/// Lengths stay within `[min_len, max_len]`.
pub fn synthetic_corpus(params: &SynthParams) -> Result<Vec<SequenceRecord>> {
    if params.min_len == 0 || params.min_len > params.max_len || params.family_size == 0 {
        return Err(Error::InvalidParam(format!(
            "synthetic corpus needs 0 < min_len <= max_len and family_size > 0, got {}..{} / {}",
            params.min_len, params.max_len, params.family_size
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut seqs = Vec::with_capacity(params.n);
    while seqs.len() < params.n {
        let len = rng.gen_range(params.min_len..=params.max_len);
        let root: Vec<u8> = (0..len).map(|_| STANDARD[rng.gen_range(0..STANDARD.len())]).collect();
        let members = params.family_size.min(params.n - seqs.len());
        for _ in 0..members {
            seqs.push(mutate(&root, params, &mut rng));
        }
    }
    seqs.shuffle(&mut rng);
    Ok(seqs
        .into_iter()
        .enumerate()
        .map(|(id, residues)| SequenceRecord {
            id,
            header: format!("seq{id}"),
            residues,
        })
        .collect())
}

fn mutate(root: &[u8], params: &SynthParams, rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut out = Vec::with_capacity(root.len() + 8);
    for &r in root {
        if rng.gen_bool(params.indel_rate) {
            if rng.gen_bool(0.5) {
                continue;
            }
            out.push(STANDARD[rng.gen_range(0..STANDARD.len())]);
        }
        if rng.gen_bool(params.substitution_rate) {
            out.push(STANDARD[rng.gen_range(0..STANDARD.len())]);
        } else {
            out.push(r);
        }
    }
    while out.len() < params.min_len {
        out.push(STANDARD[rng.gen_range(0..STANDARD.len())]);
    }
    out.truncate(params.max_len);
    out
}
