//! Incremental similarity search: for each planned output block, multiply,
//! prune, filter on shared k-mers, align, and stream accepted edges.

mod schedule;
mod stats;

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub use schedule::{schedule_preblocking, ScheduleStats};
pub use stats::{compute_stats, imbalance_pct, RawCounters, RunStats};

use crate::align::{align_batch, evaluate_pair, AlignPair, AlignParams};
use crate::alphabet::encode_residues;
use crate::balance::{prune, BlockPlan, Scheme};
use crate::error::{Error, Result};
use crate::grid::{distribute, distributed_transpose, Grid, GridMode};
use crate::kmer::{build_kmer_matrix, overlap_semiring, KmerParams};
use crate::par::{Execution, Lane};
use crate::seqio::{read_fasta_with_stats, EdgeWriter, SequenceRecord, SimilarityEdge};
use crate::sparse::SpgemmConfig;
use crate::summa::{stripe_inputs, summa_block, BlockId, BlockingFactor};

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub kmer: KmerParams,
    pub align: AlignParams,
    pub blocking: BlockingFactor,
    pub scheme: Scheme,
    /// Number of grid workers; must be a perfect square.
    pub p: usize,
    pub pre_blocking: bool,
    /// Blocks the sparse lane may run ahead. Ignored without pre-blocking.
    pub lookahead: usize,
    pub align_lanes: usize,
    pub sparse_lanes: usize,
    pub grid_mode: GridMode,
    pub exec: Execution,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let (align_lanes, sparse_lanes) = default_lane_split();
        PipelineConfig {
            kmer: KmerParams::default(),
            align: AlignParams::default(),
            blocking: BlockingFactor::default(),
            scheme: Scheme::Index,
            p: 1,
            pre_blocking: false,
            lookahead: 1,
            align_lanes,
            sparse_lanes,
            grid_mode: GridMode::Threaded,
            exec: Execution::Parallel,
        }
    }
}

/// One thread dispatches alignments; the rest go to the sparse lane.
pub fn default_lane_split() -> (usize, usize) {
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    (1, threads.saturating_sub(1).max(1))
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.kmer.validate()?;
        self.align.validate()?;
        crate::grid::GridConfig::new(self.p)?;
        if self.scheme == Scheme::Triangularity && !self.blocking.is_square() {
            return Err(Error::InvalidParam(format!(
                "triangularity scheme needs square blocking, got {}x{}",
                self.blocking.br, self.blocking.bc
            )));
        }
        if self.align_lanes == 0 || self.sparse_lanes == 0 {
            return Err(Error::InvalidParam("lane counts must be at least 1".into()));
        }
        Ok(())
    }

    /// Effective lookahead: zero unless pre-blocking is on.
    pub fn effective_lookahead(&self) -> usize {
        if self.pre_blocking {
            self.lookahead
        } else {
            0
        }
    }
}

/// Output of the sparse lane for one block.
struct SparseBlock {
    id: BlockId,
    /// Candidate pairs grouped by the grid worker that owns them.
    groups: Vec<Vec<AlignPair<u32>>>,
    discovered: u64,
    flops: u64,
    overlap_nnz: u64,
    spgemm_seconds: f64,
    worker_seconds: Vec<f64>,
}

/// Runs the search over in-memory records and hands each accepted edge to
/// `sink`, block by block.
pub fn search_records(
    config: &PipelineConfig,
    records: &[SequenceRecord],
    sink: &mut dyn FnMut(&SimilarityEdge) -> Result<()>,
) -> Result<RawCounters> {
    config.validate()?;
    let started = Instant::now();
    let n = records.len();
    let plan = BlockPlan::new(config.scheme, config.blocking)?;
    let mut raw = RawCounters {
        sequences: n,
        blocks_planned: plan.len(),
        align_worker_seconds: vec![0.0; config.p],
        sparse_worker_seconds: vec![0.0; config.p],
        ..RawCounters::default()
    };

    let sparse_lane = Lane::new(config.exec, config.sparse_lanes);
    let align_lane = Lane::new(config.exec, config.align_lanes);
    let grid = Grid::new(config.p, config.grid_mode)?;

    let setup_started = Instant::now();
    let stripes = sparse_lane.install(|| -> Result<_> {
        let (a, _) = build_kmer_matrix(records, &config.kmer, config.exec)?;
        let a = distribute(&a, grid.config());
        let at = distributed_transpose(&a, &grid, |e| e)?;
        stripe_inputs(&a, &at, config.blocking)
    })?;
    let setup_seconds = setup_started.elapsed().as_secs_f64();
    let codes: Vec<Vec<u8>> = records.iter().map(|r| encode_residues(&r.residues)).collect();

    let spgemm_cfg = SpgemmConfig {
        exec: if config.p == 1 || config.grid_mode == GridMode::RoundRobin {
            config.exec
        } else {
            Execution::Sequential
        },
        ..SpgemmConfig::default()
    };
    let sr = overlap_semiring(&config.kmer);
    let threshold = config.kmer.common_kmer_threshold;

    let produce = |t: usize| -> Result<SparseBlock> {
        let (id, class) = plan.entries[t];
        sparse_lane.install(|| {
            let out = summa_block(id, &stripes, &sr, &grid, &spgemm_cfg).map_err(|e| e.at(id, "summa"))?;
            let offsets: Vec<(usize, usize)> = (0..config.p).map(|rank| out.piece_offset(rank)).collect();
            let mut block = SparseBlock {
                id,
                groups: Vec::with_capacity(config.p),
                discovered: 0,
                flops: out.flops,
                overlap_nnz: 0,
                spgemm_seconds: out.spgemm_seconds.iter().copied().fold(0.0, f64::max),
                worker_seconds: out.spgemm_seconds.iter().zip(&out.merge_seconds).map(|(s, m)| s + m).collect(),
            };
            for (rank, piece) in out.dist.into_blocks().into_iter().enumerate() {
                let s = Instant::now();
                let (ro, co) = offsets[rank];
                block.overlap_nnz += piece.nnz() as u64;
                let kept = prune(config.scheme, class, piece, ro, co);
                block.discovered += kept.nnz() as u64;
                let pairs: Vec<AlignPair<u32>> = kept
                    .iter()
                    .filter(|(_, _, payload)| payload.count >= threshold)
                    .map(|(r, c, payload)| {
                        let (gi, gj) = (r + ro, c + co);
                        AlignPair {
                            i: gi.min(gj),
                            j: gi.max(gj),
                            payload: payload.count,
                        }
                    })
                    .collect();
                block.groups.push(pairs);
                block.worker_seconds[rank] += s.elapsed().as_secs_f64();
            }
            Ok(block)
        })
    };

    let mut align_seconds = 0.0;
    let mut io_seconds = 0.0;
    let mut sparse_seconds = 0.0;
    let consume = |_t: usize, block: SparseBlock| -> Result<()> {
        let s = Instant::now();
        let mut accepted = Vec::new();
        for (rank, group) in block.groups.into_iter().enumerate() {
            let out = align_lane.install(|| align_batch(group, &codes, &config.align, align_lane.execution()));
            raw.align_worker_seconds[rank] += out.counters.wall_seconds;
            raw.performed_alignments += out.counters.alignments;
            raw.cells += out.counters.cells;
            raw.kernel_seconds += out.counters.kernel_seconds;
            for (pair, result) in out.results {
                let result = result.map_err(|e| e.at(block.id, "align"))?;
                let (li, lj) = (records[pair.i].residues.len(), records[pair.j].residues.len());
                if let Some(edge) = evaluate_pair(&result, pair.i, pair.j, li, lj, &config.align) {
                    accepted.push(edge);
                }
            }
        }
        align_seconds += s.elapsed().as_secs_f64();

        let s = Instant::now();
        for edge in &accepted {
            sink(edge).map_err(|e| e.at(block.id, "emit"))?;
        }
        io_seconds += s.elapsed().as_secs_f64();

        raw.output_edges += accepted.len() as u64;
        raw.discovered_candidates += block.discovered;
        raw.flops += block.flops;
        raw.overlap_nnz += block.overlap_nnz;
        raw.spgemm_seconds += block.spgemm_seconds;
        for (acc, w) in raw.sparse_worker_seconds.iter_mut().zip(&block.worker_seconds) {
            *acc += w;
        }
        Ok(())
    };

    let sched = schedule_preblocking(plan.len(), config.effective_lookahead(), produce, consume)?;
    sparse_seconds += setup_seconds + sched.produce_total();

    raw.align_seconds = align_seconds;
    raw.io_seconds = io_seconds;
    raw.sparse_all_seconds = sparse_seconds;
    raw.peak_live_blocks = sched.peak_live;
    raw.traffic = grid.counters();
    raw.total_seconds = started.elapsed().as_secs_f64();
    log::info!(
        "{} blocks: {} candidates, {} aligned, {} edges",
        plan.len(),
        raw.discovered_candidates,
        raw.performed_alignments,
        raw.output_edges
    );
    Ok(raw)
}

/// Convenience wrapper collecting the accepted edges in memory.
pub fn search_edges(config: &PipelineConfig, records: &[SequenceRecord]) -> Result<(Vec<SimilarityEdge>, RunStats)> {
    let mut edges = Vec::new();
    let raw = search_records(config, records, &mut |e| {
        edges.push(e.clone());
        Ok(())
    })?;
    Ok((edges, compute_stats(&raw)))
}

/// Path of the stats document written next to `output`.
pub fn stats_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".stats.json");
    PathBuf::from(s)
}

/// Reads `input`, streams edges to `output`, and writes the run statistics
/// to `<output>.stats.json`. Output lines are in production order.
pub fn run_search(config: &PipelineConfig, input: &Path, output: &Path) -> Result<RunStats> {
    let started = Instant::now();
    let read_started = Instant::now();
    let (records, fasta) = read_fasta_with_stats(input)?;
    if fasta.replaced_bytes > 0 {
        log::warn!("{}: {} residue(s) replaced by X", input.display(), fasta.replaced_bytes);
    }
    let headers: Vec<&str> = records.iter().map(|r| r.header.as_str()).collect();
    let mut writer = EdgeWriter::create(output)?;
    let read_seconds = read_started.elapsed().as_secs_f64();

    let mut raw = search_records(config, &records, &mut |e| writer.write(e, &headers))?;

    let finish_started = Instant::now();
    writer.finish()?;
    raw.total_seconds = started.elapsed().as_secs_f64();
    raw.io_seconds += read_seconds + finish_started.elapsed().as_secs_f64();
    let stats = compute_stats(&raw);
    let path = stats_path(output);
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::to_writer_pretty(BufWriter::new(file), &stats)
        .map_err(|e| Error::io(&path, std::io::Error::other(e)))?;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balance::BlockClass;
    use crate::oracle::oracle_edges;
    use crate::synth::{synthetic_corpus, SynthParams};

    fn rec(id: usize, s: &str) -> SequenceRecord {
        SequenceRecord {
            id,
            header: format!("s{id}"),
            residues: s.as_bytes().to_vec(),
        }
    }

    fn sorted(mut e: Vec<SimilarityEdge>) -> Vec<(usize, usize, i32)> {
        e.sort_by_key(|e| (e.i, e.j));
        e.into_iter().map(|e| (e.i, e.j, e.score)).collect()
    }

    #[test]
    fn hand_constructed_pair_gives_one_edge() {
        let records = vec![
            rec(0, "MKVLAWCHEQTRPLIDN"),
            rec(1, "MKVLAWCHEQTRPLIDG"),
            rec(2, "GGGGGGGGGGGG"),
        ];
        let (edges, stats) = search_edges(&PipelineConfig::default(), &records).unwrap();
        assert_eq!(edges.len(), 1);
        assert_eq!((edges[0].i, edges[0].j), (0, 1));
        assert_eq!(stats.output_edges, 1);
        assert!(stats.performed_alignments <= stats.discovered_candidates);
    }

    #[test]
    fn zero_thresholds_with_unit_kmers() {
        let records = vec![rec(0, "AC"), rec(1, "CD"), rec(2, "EF"), rec(3, "FA"), rec(4, "W")];
        let mut config = PipelineConfig::default();
        config.kmer.k = 1;
        config.kmer.common_kmer_threshold = 0;
        config.align.ani_threshold = 0.0;
        config.align.coverage_threshold = 0.0;
        let (edges, _) = search_edges(&config, &records).unwrap();
        let expected: Vec<(usize, usize)> = vec![(0, 1), (0, 3), (2, 3)];
        let mut got: Vec<_> = edges.iter().map(|e| (e.i, e.j)).collect();
        got.sort();
        assert_eq!(got, expected);
    }

    #[test]
    fn every_configuration_matches_the_oracle() {
        let records = synthetic_corpus(&SynthParams {
            n: 60,
            max_len: 120,
            seed: 5,
            ..SynthParams::default()
        })
        .unwrap();
        let base = PipelineConfig::default();
        let expected = sorted(oracle_edges(&records, &base.kmer, &base.align).unwrap());
        assert!(!expected.is_empty());
        for p in [1, 4, 9] {
            for b in [1, 2, 3] {
                for scheme in [Scheme::Index, Scheme::Triangularity] {
                    for pre_blocking in [false, true] {
                        let config = PipelineConfig {
                            p,
                            blocking: BlockingFactor::square(b).unwrap(),
                            scheme,
                            pre_blocking,
                            ..base.clone()
                        };
                        let (edges, stats) = search_edges(&config, &records).unwrap();
                        assert_eq!(sorted(edges), expected, "p={p} b={b} {scheme:?} pre={pre_blocking}");
                        assert!(stats.peak_live_blocks <= 2);
                    }
                }
            }
        }
    }

    #[test]
    fn counters_are_consistent() {
        let records = synthetic_corpus(&SynthParams {
            n: 40,
            max_len: 100,
            seed: 9,
            ..SynthParams::default()
        })
        .unwrap();
        let config = PipelineConfig {
            p: 4,
            blocking: BlockingFactor::new(2, 3).unwrap(),
            ..PipelineConfig::default()
        };
        let (_, stats) = search_edges(&config, &records).unwrap();
        assert_eq!(stats.blocks, 6);
        assert_eq!((stats.broadcasts_row, stats.broadcasts_col), (12, 12));
        assert!(stats.performed_alignments <= stats.discovered_candidates);
        assert!(stats.output_edges <= stats.performed_alignments);
        // the index scheme keeps exactly half of the off-diagonal overlap
        let n = records.len();
        let (a, _) = build_kmer_matrix(&records, &config.kmer, Execution::Sequential).unwrap();
        let mut shared = 0u64;
        for i in 0..n {
            for j in i + 1..n {
                if crate::oracle::shared_kmers(&records[i].residues, &records[j].residues, 6) > 0 {
                    shared += 1;
                }
            }
        }
        assert_eq!(stats.discovered_candidates, shared);
        assert!(a.nnz() > 0);
        assert!(stats.compression_factor >= 1.0);
    }

    #[test]
    fn run_search_writes_edges_and_stats() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.fa");
        let output = dir.path().join("out.tsv");
        let records = vec![rec(0, "MKVLAWCHEQTRPLIDN"), rec(1, "MKVLAWCHEQTRPLIDG")];
        crate::seqio::write_fasta(&input, &records).unwrap();
        let stats = run_search(&PipelineConfig::default(), &input, &output).unwrap();
        assert_eq!(stats.output_edges, 1);
        let text = std::fs::read_to_string(&output).unwrap();
        assert!(text.starts_with("s0\ts1\t"));
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(stats_path(&output)).unwrap()).unwrap();
        assert_eq!(json["output_edges"], 1);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let records = vec![rec(0, "MKV")];
        let mut c = PipelineConfig {
            p: 3,
            ..PipelineConfig::default()
        };
        assert!(matches!(search_edges(&c, &records), Err(Error::NotPerfectSquare(3))));
        c.p = 1;
        c.scheme = Scheme::Triangularity;
        c.blocking = BlockingFactor::new(2, 3).unwrap();
        assert!(search_edges(&c, &records).is_err());
    }

    #[test]
    fn plan_classes_are_used() {
        let plan = BlockPlan::new(Scheme::Triangularity, BlockingFactor::square(3).unwrap()).unwrap();
        assert_eq!(plan.len(), 6);
        assert_eq!(plan.entries.iter().filter(|(_, c)| *c == BlockClass::Partial).count(), 3);
    }
}
