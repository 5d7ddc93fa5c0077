//! The sequence-by-k-mer matrix and the overlap semiring that turns
//! `A · Aᵀ` into candidate pairs with shared-k-mer counts and seeds.

use serde::{Deserialize, Serialize};

use crate::alphabet::{self, ALPHABET_SIZE};
use crate::error::{Error, Result};
use crate::par::{self, Execution};
use crate::seqio::SequenceRecord;
use crate::sparse::{LocalSparse, Semiring};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KmerParams {
    pub k: usize,
    pub alphabet_size: usize,
    /// Minimum number of distinct shared k-mers for a pair to be aligned.
    pub common_kmer_threshold: u32,
}

impl Default for KmerParams {
    fn default() -> Self {
        KmerParams {
            k: 6,
            alphabet_size: ALPHABET_SIZE,
            common_kmer_threshold: 2,
        }
    }
}

impl KmerParams {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParam("k-mer length must be at least 1".into()));
        }
        if self.alphabet_size != ALPHABET_SIZE {
            return Err(Error::InvalidParam(format!("alphabet size must be {ALPHABET_SIZE}")));
        }
        self.code_space()?;
        Ok(())
    }

    /// `alphabet_size^k`, the width of the k-mer matrix.
    pub fn code_space(&self) -> Result<usize> {
        u32::try_from(self.k)
            .ok()
            .and_then(|k| self.alphabet_size.checked_pow(k))
            .ok_or_else(|| Error::InvalidParam(format!("{}^{} overflows the column index", self.alphabet_size, self.k)))
    }
}

/// One nonzero of the k-mer matrix: first occurrence of the k-mer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KmerEntry {
    pub pos: u32,
}

/// A shared k-mer anchoring a candidate pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Seed {
    pub kmer_code: u64,
    pub pos_i: u32,
    pub pos_j: u32,
}

/// Overlap matrix payload: shared k-mer count and the two seeds with the
/// smallest k-mer codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapPayload {
    pub count: u32,
    pub seed1: Option<Seed>,
    pub seed2: Option<Seed>,
}

impl OverlapPayload {
    pub fn single(seed: Seed) -> Self {
        OverlapPayload {
            count: 1,
            seed1: Some(seed),
            seed2: None,
        }
    }

    /// Commutative, associative merge.
    pub fn merge(&mut self, other: OverlapPayload) {
        self.count += other.count;
        let mut seeds = [self.seed1, self.seed2, other.seed1, other.seed2];
        // None sorts first; flip so present seeds come first in code order
        seeds.sort_by(|a, b| match (a, b) {
            (Some(x), Some(y)) => x.cmp(y),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        });
        self.seed1 = seeds[0];
        self.seed2 = seeds[1];
    }
}

/// Base-`25` positional code of a k-mer; first residue most significant.
pub fn encode_kmer(residues: &[u8]) -> Result<u64> {
    residues.iter().try_fold(0u64, |acc, &b| {
        let c = alphabet::code_of(b).ok_or(Error::InvalidResidue(b))?;
        Ok(acc * ALPHABET_SIZE as u64 + c as u64)
    })
}

pub fn decode_kmer(mut code: u64, k: usize) -> Vec<u8> {
    let mut out = vec![0u8; k];
    for slot in out.iter_mut().rev() {
        *slot = alphabet::symbol_of((code % ALPHABET_SIZE as u64) as u8);
        code /= ALPHABET_SIZE as u64;
    }
    out
}

/// Distinct k-mers of one sequence with their first positions, sorted by code.
pub fn distinct_kmers(residues: &[u8], k: usize) -> Vec<(u64, u32)> {
    if residues.len() < k {
        return Vec::new();
    }
    let modulus = (ALPHABET_SIZE as u64).pow(k as u32 - 1);
    let codes = alphabet::encode_residues(residues);
    let mut out = Vec::with_capacity(residues.len() - k + 1);
    let mut code = 0u64;
    for (i, &c) in codes.iter().enumerate() {
        if i >= k {
            code %= modulus;
        }
        code = code * ALPHABET_SIZE as u64 + c as u64;
        if i + 1 >= k {
            out.push((code, (i + 1 - k) as u32));
        }
    }
    out.sort_unstable();
    out.dedup_by_key(|&mut (code, _)| code);
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct KmerMatrixStats {
    /// Sequences shorter than `k`; they keep their row but have no entries.
    pub short_sequences: usize,
}

/// Builds the `n × 25^k` sequence-by-k-mer matrix.
pub fn build_kmer_matrix(
    seqs: &[SequenceRecord],
    params: &KmerParams,
    exec: Execution,
) -> Result<(LocalSparse<KmerEntry>, KmerMatrixStats)> {
    params.validate()?;
    let width = params.code_space()?;
    let rows = par::map(exec, seqs, |s| distinct_kmers(&s.residues, params.k));
    let stats = KmerMatrixStats {
        short_sequences: seqs.iter().filter(|s| s.residues.len() < params.k).count(),
    };
    if stats.short_sequences > 0 {
        log::warn!("{} sequence(s) shorter than k={} contribute no k-mers", stats.short_sequences, params.k);
    }
    let triplets: Vec<(usize, usize, KmerEntry)> = rows
        .into_iter()
        .enumerate()
        .flat_map(|(i, kmers)| {
            kmers
                .into_iter()
                .map(move |(code, pos)| (i, code as usize, KmerEntry { pos }))
        })
        .collect();
    let m = LocalSparse::from_triplets(seqs.len(), width, triplets, |_, _| {})?;
    Ok((m, stats))
}

/// `multiply(a, b, i, j, code)` yields a single-seed payload; `add` merges.
#[derive(Clone, Copy, Debug, Default)]
pub struct OverlapSemiring;

impl Semiring for OverlapSemiring {
    type Left = KmerEntry;
    type Right = KmerEntry;
    type Out = OverlapPayload;

    fn multiply(&self, a: &KmerEntry, b: &KmerEntry, _row: usize, _col: usize, inner: usize) -> OverlapPayload {
        OverlapPayload::single(Seed {
            kmer_code: inner as u64,
            pos_i: a.pos,
            pos_j: b.pos,
        })
    }

    fn add(&self, acc: &mut OverlapPayload, other: OverlapPayload) {
        acc.merge(other);
    }
}

pub fn overlap_semiring(_params: &KmerParams) -> OverlapSemiring {
    OverlapSemiring
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::{local_spgemm, local_transpose};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::{BTreeMap, BTreeSet, HashSet};

    fn rec(id: usize, s: &[u8]) -> SequenceRecord {
        SequenceRecord { id, header: format!("s{id}"), residues: s.to_vec() }
    }

    fn random_seq(rng: &mut ChaCha8Rng, len: usize, symbols: usize) -> Vec<u8> {
        (0..len).map(|_| alphabet::ALPHABET[rng.gen_range(0..symbols)]).collect()
    }

    #[test]
    fn code_space_matches_reported_width() {
        assert_eq!(KmerParams::default().code_space().unwrap(), 244_140_625);
        assert!(KmerParams { k: 20, ..Default::default() }.validate().is_err());
        assert!(KmerParams { k: 0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn encode_simple_cases() {
        assert_eq!(encode_kmer(b"A").unwrap(), 0);
        assert_eq!(encode_kmer(b"*").unwrap(), 24);
        assert_eq!(encode_kmer(b"RA").unwrap(), 25);
        assert_eq!(encode_kmer(b"******").unwrap(), 244_140_624);
        assert!(matches!(encode_kmer(b"AJ"), Err(Error::InvalidResidue(b'J'))));
    }

    #[test]
    fn encode_decode_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..1000 {
            let kmer = random_seq(&mut rng, 6, 25);
            let code = encode_kmer(&kmer).unwrap();
            assert!(code < 244_140_625);
            assert_eq!(decode_kmer(code, 6), kmer);
        }
    }

    #[test]
    fn repeated_kmer_deduplicates_to_first_occurrence() {
        let (m, _) = build_kmer_matrix(&[rec(0, b"AAAA")], &KmerParams { k: 3, ..Default::default() }, Execution::Sequential).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, encode_kmer(b"AAA").unwrap() as usize), Some(&KmerEntry { pos: 0 }));
    }

    #[test]
    fn rows_share_common_kmer_column() {
        let p = KmerParams { k: 2, ..Default::default() };
        let (m, _) = build_kmer_matrix(&[rec(0, b"MKV"), rec(1, b"KVL")], &p, Execution::Sequential).unwrap();
        let kv = encode_kmer(b"KV").unwrap() as usize;
        assert_eq!(m.get(0, kv), Some(&KmerEntry { pos: 1 }));
        assert_eq!(m.get(1, kv), Some(&KmerEntry { pos: 0 }));
        assert_eq!(m.ncols(), 625);
    }

    #[test]
    fn short_sequences_keep_an_empty_row() {
        let p = KmerParams { k: 4, ..Default::default() };
        let (m, stats) = build_kmer_matrix(&[rec(0, b"MKV"), rec(1, b"MKVL")], &p, Execution::Sequential).unwrap();
        assert_eq!((m.nrows(), m.nnz(), stats.short_sequences), (2, 1, 1));
    }

    #[test]
    fn nnz_matches_set_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let seqs: Vec<_> = (0..20).map(|i| { let l = rng.gen_range(1..60); rec(i, &random_seq(&mut rng, l, 4)) }).collect();
        let p = KmerParams { k: 3, ..Default::default() };
        let (m, _) = build_kmer_matrix(&seqs, &p, Execution::Parallel).unwrap();
        let expect: usize = seqs
            .iter()
            .map(|s| s.residues.windows(3).collect::<HashSet<_>>().len())
            .sum();
        assert_eq!(m.nnz(), expect);
        m.validate().unwrap();
    }

    fn overlap_of(seqs: &[SequenceRecord], k: usize) -> LocalSparse<OverlapPayload> {
        let p = KmerParams { k, ..Default::default() };
        let (a, _) = build_kmer_matrix(seqs, &p, Execution::Sequential).unwrap();
        let b = local_transpose(a.clone(), |e| e);
        local_spgemm(&a, &b, &overlap_semiring(&p)).unwrap()
    }

    #[test]
    fn single_shared_kmer() {
        let c = overlap_of(&[rec(0, b"MKVW"), rec(1, b"GGMKV")], 3);
        let pay = c.get(0, 1).unwrap();
        assert_eq!(pay.count, 1);
        assert_eq!(pay.seed1, Some(Seed { kmer_code: encode_kmer(b"MKV").unwrap(), pos_i: 0, pos_j: 2 }));
        assert_eq!(pay.seed2, None);
    }

    #[test]
    fn three_shared_kmers_keep_two_smallest_codes() {
        let seqs = [rec(0, b"WWWCCCAAA"), rec(1, b"AAAGGWWWNCCC")];
        let c = overlap_of(&seqs, 3);
        let shared: BTreeSet<u64> = {
            let s0: BTreeSet<_> = seqs[0].residues.windows(3).map(|w| encode_kmer(w).unwrap()).collect();
            let s1: BTreeSet<_> = seqs[1].residues.windows(3).map(|w| encode_kmer(w).unwrap()).collect();
            s0.intersection(&s1).copied().collect()
        };
        assert_eq!(shared.len(), 3);
        let pay = c.get(0, 1).unwrap();
        assert_eq!(pay.count, 3);
        let mut it = shared.iter();
        assert_eq!(pay.seed1.unwrap().kmer_code, *it.next().unwrap());
        assert_eq!(pay.seed2.unwrap().kmer_code, *it.next().unwrap());
    }

    #[test]
    fn counts_match_set_intersection_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(200);
        let seqs: Vec<_> = (0..200).map(|i| { let l = rng.gen_range(2..30); rec(i, &random_seq(&mut rng, l, 5)) }).collect();
        let c = overlap_of(&seqs, 2);
        let sets: Vec<HashSet<&[u8]>> = seqs.iter().map(|s| s.residues.windows(2).collect()).collect();
        let mut expect = BTreeMap::new();
        for i in 0..seqs.len() {
            for j in 0..seqs.len() {
                let n = sets[i].intersection(&sets[j]).count();
                if n > 0 {
                    expect.insert((i, j), n as u32);
                }
            }
        }
        let got: BTreeMap<_, _> = c.iter().map(|(r, c, p)| ((r, c), p.count)).collect();
        assert_eq!(got, expect);
    }

    fn payload() -> impl Strategy<Value = OverlapPayload> {
        let seed = (0u64..50, 0u32..100, 0u32..100).prop_map(|(kmer_code, pos_i, pos_j)| Seed { kmer_code, pos_i, pos_j });
        proptest::collection::vec(seed, 1..5).prop_map(|seeds| {
            let mut p = OverlapPayload::single(seeds[0]);
            for s in &seeds[1..] {
                p.merge(OverlapPayload::single(*s));
            }
            p
        })
    }

    proptest! {
        #[test]
        fn payload_merge_is_a_commutative_monoid(x in payload(), y in payload(), z in payload()) {
            let add = |mut a: OverlapPayload, b| { a.merge(b); a };
            prop_assert_eq!(add(x, y), add(y, x));
            prop_assert_eq!(add(add(x, y), z), add(x, add(y, z)));
            let m = add(x, y);
            prop_assert!(m.count >= 1);
            if let (Some(a), Some(b)) = (m.seed1, m.seed2) {
                prop_assert!(a <= b);
            }
        }

        #[test]
        fn merging_in_any_order_gives_identical_payload(seeds in proptest::collection::vec((0u64..1000, 0u32..9, 0u32..9), 1..12), rot in 0usize..12) {
            let singles: Vec<_> = seeds.iter().map(|&(kmer_code, pos_i, pos_j)| OverlapPayload::single(Seed { kmer_code, pos_i, pos_j })).collect();
            let fold = |ps: &[OverlapPayload]| ps[1..].iter().fold(ps[0], |mut a, b| { a.merge(*b); a });
            let mut rotated = singles.clone();
            rotated.rotate_left(rot % singles.len());
            let mut reversed = singles.clone();
            reversed.reverse();
            prop_assert_eq!(fold(&singles), fold(&rotated));
            prop_assert_eq!(fold(&singles), fold(&reversed));
        }
    }
}
