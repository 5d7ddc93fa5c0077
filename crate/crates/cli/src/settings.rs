//! Search flags, the matching JSON config file, and how they merge.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use pastislite::align::AlignParams;
use pastislite::balance::Scheme;
use pastislite::grid::GridMode;
use pastislite::kmer::KmerParams;
use pastislite::par::Execution;
use pastislite::pipeline::{default_lane_split, PipelineConfig};
use pastislite::summa::BlockingFactor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Switch {
    On,
    Off,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Balance {
    Index,
    #[value(alias = "triangularity")]
    #[serde(alias = "triangularity")]
    Triangular,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Threaded,
    RoundRobin,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Exec {
    Parallel,
    Sequential,
}

/// Every search option. Flags and the `--config` file share this shape;
/// unset fields fall through to the next source.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SearchSettings {
    /// FASTA file to search
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    /// Edge list to write; statistics go to <output>.stats.json
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub kmer_length: Option<usize>,
    /// Minimum number of shared k-mers for a pair to be aligned
    #[arg(long)]
    pub common_kmer_threshold: Option<u32>,
    #[arg(long)]
    pub gap_open: Option<i32>,
    #[arg(long)]
    pub gap_extend: Option<i32>,
    /// Minimum alignment identity
    #[arg(long)]
    pub ani: Option<f64>,
    /// Minimum coverage of both sequences
    #[arg(long)]
    pub coverage: Option<f64>,
    #[arg(long)]
    pub block_rows: Option<usize>,
    #[arg(long)]
    pub block_cols: Option<usize>,
    #[arg(long, value_enum)]
    pub balance: Option<Balance>,
    #[arg(long, value_enum)]
    pub pre_blocking: Option<Switch>,
    /// Blocks the sparse lane may compute ahead of alignment
    #[arg(long)]
    pub lookahead: Option<usize>,
    /// Grid workers (a perfect square)
    #[arg(long, env = "PASTISLITE_WORKERS")]
    pub workers: Option<usize>,
    #[arg(long)]
    pub align_lanes: Option<usize>,
    #[arg(long)]
    pub sparse_lanes: Option<usize>,
    #[arg(long, value_enum)]
    pub grid_mode: Option<Mode>,
    #[arg(long, value_enum)]
    pub execution: Option<Exec>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident; $($field:ident),*) => {
        $( if $dst.$field.is_none() { $dst.$field = $src.$field.clone(); } )*
    };
}

impl SearchSettings {
    /// Fills unset fields from `fallback`.
    pub fn or(mut self, fallback: SearchSettings) -> SearchSettings {
        overlay!(self, fallback; input, output, kmer_length, common_kmer_threshold, gap_open, gap_extend,
            ani, coverage, block_rows, block_cols, balance, pre_blocking, lookahead, workers,
            align_lanes, sparse_lanes, grid_mode, execution);
        self
    }

    /// The built-in defaults for every option except the paths.
    pub fn defaults() -> SearchSettings {
        let kmer = KmerParams::default();
        let align = AlignParams::default();
        let (align_lanes, sparse_lanes) = default_lane_split();
        SearchSettings {
            input: None,
            output: None,
            kmer_length: Some(kmer.k),
            common_kmer_threshold: Some(kmer.common_kmer_threshold),
            gap_open: Some(align.gap_open),
            gap_extend: Some(align.gap_extend),
            ani: Some(align.ani_threshold),
            coverage: Some(align.coverage_threshold),
            block_rows: Some(1),
            block_cols: Some(1),
            balance: Some(Balance::Index),
            pre_blocking: Some(Switch::Off),
            lookahead: Some(1),
            workers: Some(1),
            align_lanes: Some(align_lanes),
            sparse_lanes: Some(sparse_lanes),
            grid_mode: Some(Mode::Threaded),
            execution: Some(Exec::Parallel),
        }
    }

    /// Builds and validates the pipeline configuration. Call on fully
    /// resolved settings.
    pub fn pipeline_config(&self) -> Result<PipelineConfig, String> {
        let d = SearchSettings::defaults();
        let s = self.clone().or(d);
        let get = |name: &str, v: Option<usize>| v.ok_or_else(|| format!("missing --{name}"));
        let blocking = BlockingFactor::new(get("block-rows", s.block_rows)?, get("block-cols", s.block_cols)?)
            .map_err(|e| e.to_string())?;
        let config = PipelineConfig {
            kmer: KmerParams {
                k: s.kmer_length.unwrap_or_default(),
                common_kmer_threshold: s.common_kmer_threshold.unwrap_or_default(),
                ..KmerParams::default()
            },
            align: AlignParams {
                gap_open: s.gap_open.unwrap_or_default(),
                gap_extend: s.gap_extend.unwrap_or_default(),
                ani_threshold: s.ani.unwrap_or_default(),
                coverage_threshold: s.coverage.unwrap_or_default(),
                ..AlignParams::default()
            },
            blocking,
            scheme: match s.balance {
                Some(Balance::Triangular) => Scheme::Triangularity,
                _ => Scheme::Index,
            },
            p: s.workers.unwrap_or(1),
            pre_blocking: s.pre_blocking == Some(Switch::On),
            lookahead: s.lookahead.unwrap_or(1),
            align_lanes: s.align_lanes.unwrap_or(1),
            sparse_lanes: s.sparse_lanes.unwrap_or(1),
            grid_mode: match s.grid_mode {
                Some(Mode::RoundRobin) => GridMode::RoundRobin,
                _ => GridMode::Threaded,
            },
            exec: match s.execution {
                Some(Exec::Sequential) => Execution::Sequential,
                _ => Execution::Parallel,
            },
        };
        config.validate().map_err(|e| e.to_string())?;
        Ok(config)
    }
}
