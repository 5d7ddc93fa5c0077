use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pastislite::align::{align_batch, AlignPair, AlignParams};
use pastislite::alphabet::encode_residues;
use pastislite::kmer::{build_kmer_matrix, KmerParams};
use pastislite::par::Execution;
use pastislite::pipeline::{search_edges, PipelineConfig};
use pastislite::synth::{synthetic_corpus, SynthParams};

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn corpus(n: usize) -> Vec<pastislite::seqio::SequenceRecord> {
    synthetic_corpus(&SynthParams { n, ..SynthParams::default() }).unwrap()
}

fn bench_align(c: &mut Criterion) {
    let records = corpus(64);
    let codes: Vec<Vec<u8>> = records.iter().map(|r| encode_residues(&r.residues)).collect();
    let params = AlignParams::default();
    let pairs = || -> Vec<AlignPair<()>> {
        (0..codes.len())
            .step_by(2)
            .map(|i| AlignPair { i, j: i + 1, payload: () })
            .collect()
    };
    let mut group = c.benchmark_group("align_batch");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| align_batch(pairs(), &codes, &params, exec).counters.cells)
        });
    }
    group.finish();
}

fn bench_kmers(c: &mut Criterion) {
    let records = corpus(2000);
    let params = KmerParams::default();
    let mut group = c.benchmark_group("build_kmer_matrix");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| build_kmer_matrix(&records, &params, exec).unwrap().0.nnz())
        });
    }
    group.finish();
}

fn bench_search(c: &mut Criterion) {
    let records = corpus(200);
    let mut group = c.benchmark_group("search");
    group.sample_size(10);
    for (name, exec) in MODES {
        let config = PipelineConfig { p: 4, exec, ..PipelineConfig::default() };
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| search_edges(&config, &records).unwrap().0.len())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_align, bench_kmers, bench_search);
criterion_main!(benches);
