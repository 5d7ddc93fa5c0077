mod settings;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use pastislite::align::blosum62;
use pastislite::balance::Scheme;
use pastislite::costmodel::{blocked_summa_cost, plain_summa_cost, CostParams};
use pastislite::oracle::{oracle_edges, render_canonical};
use pastislite::pipeline::{run_search, search_edges, PipelineConfig};
use pastislite::seqio::{canonical_lines, canonicalize_output, read_fasta, write_fasta, SequenceRecord};
use pastislite::summa::BlockingFactor;
use pastislite::synth::{synthetic_corpus, SynthParams};

use settings::SearchSettings;

#[derive(Parser)]
#[command(name = "pastislite", version, about = "Many-against-many protein similarity search")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search a FASTA file for similar pairs
    Search(SearchArgs),
    /// Print the analytic SUMMA communication cost as JSON
    Cost(CostArgs),
    /// Compare the pipeline against the brute-force oracle
    Validate(ValidateArgs),
    /// Write a seeded synthetic protein corpus
    Synth(SynthArgs),
    /// Sort an edge file into canonical order
    Canonicalize {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Print the built-in BLOSUM62 table
    Blosum,
}

#[derive(Args)]
struct SearchArgs {
    #[command(flatten)]
    settings: SearchSettings,
    /// JSON file supplying any of the flags; flags on the command line win
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print the effective configuration as JSON and exit
    #[arg(long)]
    dump_config: bool,
}

#[derive(Args)]
struct CostArgs {
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    beta: f64,
    /// Nonzeros per sub-matrix
    #[arg(long)]
    s: f64,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 1)]
    br: usize,
    #[arg(long, default_value_t = 1)]
    bc: usize,
    #[arg(long, default_value_t = 8)]
    word_bytes: usize,
}

#[derive(Args)]
struct ValidateArgs {
    /// Check this edge file instead of running the pipeline
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Run every configuration of the determinism lattice
    #[arg(long)]
    sweep: bool,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Size of the synthetic corpus
    #[arg(long, default_value_t = 200)]
    n: usize,
    /// Search options; `--input` picks the FASTA file, otherwise a synthetic
    /// corpus is generated
    #[command(flatten)]
    settings: SearchSettings,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 50)]
    min_len: usize,
    #[arg(long, default_value_t = 500)]
    max_len: usize,
    #[arg(long, default_value_t = 4)]
    family_size: usize,
}

/// Failure classes mapped to process exit codes.
enum Failure {
    Invalid(String),
    Runtime(String),
    Mismatch,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::Mismatch => 3,
        }
    }
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Search(args) => cmd_search(args),
        Command::Cost(args) => cmd_cost(args),
        Command::Validate(args) => cmd_validate(args),
        Command::Synth(args) => cmd_synth(args),
        Command::Canonicalize { input, output } => canonicalize_output(&input, &output).map_err(runtime),
        Command::Blosum => {
            print!("{}", blosum62().dump());
            Ok(())
        }
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Invalid(msg) => eprintln!("error: {msg}"),
                Failure::Runtime(msg) => eprintln!("error: {msg}"),
                Failure::Mismatch => {}
            }
            ExitCode::from(f.code())
        }
    }
}

fn resolve(settings: SearchSettings, config: Option<&Path>) -> Result<SearchSettings, Failure> {
    let file = match config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?
        }
        None => SearchSettings::default(),
    };
    Ok(settings.or(file).or(SearchSettings::defaults()))
}

fn cmd_search(args: SearchArgs) -> Result<(), Failure> {
    let settings = resolve(args.settings, args.config.as_deref())?;
    let config = settings.pipeline_config().map_err(Failure::Invalid)?;
    if args.dump_config {
        println!("{}", serde_json::to_string_pretty(&settings).expect("settings serialize"));
        return Ok(());
    }
    let input = settings.input.ok_or_else(|| Failure::Invalid("--input is required".into()))?;
    let output = settings.output.ok_or_else(|| Failure::Invalid("--output is required".into()))?;
    let stats = run_search(&config, &input, &output).map_err(runtime)?;
    eprintln!(
        "{} candidates, {} aligned, {} edges in {:.3}s",
        stats.discovered_candidates, stats.performed_alignments, stats.output_edges, stats.total_seconds
    );
    Ok(())
}

fn cmd_cost(args: CostArgs) -> Result<(), Failure> {
    let cp = CostParams {
        alpha: args.alpha,
        beta: args.beta,
        s: args.s,
        p: args.p,
        word_bytes: args.word_bytes,
    };
    let invalid = |e: pastislite::Error| Failure::Invalid(e.to_string());
    let bf = BlockingFactor::new(args.br, args.bc).map_err(invalid)?;
    let plain = plain_summa_cost(&cp).map_err(invalid)?;
    let blocked = blocked_summa_cost(&cp, bf).map_err(invalid)?;
    let doc = json!({
        "params": cp,
        "br": bf.br,
        "bc": bf.bc,
        "plain": plain,
        "blocked": blocked,
    });
    println!("{}", serde_json::to_string_pretty(&doc).expect("cost serializes"));
    Ok(())
}

fn load_records(args: &ValidateArgs, input: Option<&Path>) -> Result<Vec<SequenceRecord>, Failure> {
    match input {
        Some(path) => read_fasta(path).map_err(runtime),
        None => synthetic_corpus(&SynthParams {
            n: args.n,
            seed: args.seed,
            ..SynthParams::default()
        })
        .map_err(|e| Failure::Invalid(e.to_string())),
    }
}

fn render_run(config: &PipelineConfig, records: &[SequenceRecord]) -> Result<Vec<u8>, Failure> {
    let (edges, _) = search_edges(config, records).map_err(runtime)?;
    Ok(render_canonical(&edges, records))
}

/// Prints the first differing line; returns whether the texts match.
fn report_divergence(expected: &[u8], got: &[u8]) -> bool {
    if expected == got {
        return true;
    }
    let (e, g): (Vec<&[u8]>, Vec<&[u8]>) = (expected.split(|&b| b == b'\n').collect(), got.split(|&b| b == b'\n').collect());
    let at = e.iter().zip(&g).position(|(x, y)| x != y).unwrap_or(e.len().min(g.len()));
    let show = |v: &Vec<&[u8]>| v.get(at).map_or("<end of output>".to_string(), |l| String::from_utf8_lossy(l).into_owned());
    println!("first divergence at line {}", at + 1);
    println!("  expected: {}", show(&e));
    println!("  got:      {}", show(&g));
    false
}

fn cmd_validate(args: ValidateArgs) -> Result<(), Failure> {
    let settings = resolve(args.settings.clone(), args.config.as_deref())?;
    let base = settings.pipeline_config().map_err(Failure::Invalid)?;
    let records = load_records(&args, settings.input.as_deref())?;
    if records.len() > 200 {
        log::warn!("oracle over {} sequences is quadratic and may be slow", records.len());
    }
    let expected = render_canonical(&oracle_edges(&records, &base.kmer, &base.align).map_err(runtime)?, &records);

    if let Some(path) = &args.edges {
        let got = canonical_lines(&fs::read(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?);
        return if report_divergence(&expected, &got) {
            println!("match: {} edges", expected.iter().filter(|&&b| b == b'\n').count());
            Ok(())
        } else {
            Err(Failure::Mismatch)
        };
    }

    let configs = if args.sweep { lattice(&base) } else { vec![base] };
    let mut all_match = true;
    for config in &configs {
        let got = render_run(config, &records)?;
        let ok = expected == got;
        println!(
            "p={} blocking={}x{} scheme={} pre-blocking={} edges={} {}",
            config.p,
            config.blocking.br,
            config.blocking.bc,
            match config.scheme {
                Scheme::Index => "index",
                Scheme::Triangularity => "triangular",
            },
            if config.pre_blocking { "on" } else { "off" },
            got.iter().filter(|&&b| b == b'\n').count(),
            if ok { "match" } else { "MISMATCH" }
        );
        if !ok {
            report_divergence(&expected, &got);
            all_match = false;
        }
    }
    if all_match {
        Ok(())
    } else {
        Err(Failure::Mismatch)
    }
}

fn lattice(base: &PipelineConfig) -> Vec<PipelineConfig> {
    let mut out = Vec::new();
    for p in [1, 4, 9] {
        for b in [1, 2, 4] {
            for scheme in [Scheme::Index, Scheme::Triangularity] {
                for pre_blocking in [false, true] {
                    out.push(PipelineConfig {
                        p,
                        blocking: BlockingFactor { br: b, bc: b },
                        scheme,
                        pre_blocking,
                        ..base.clone()
                    });
                }
            }
        }
    }
    out
}

fn cmd_synth(args: SynthArgs) -> Result<(), Failure> {
    let records = synthetic_corpus(&SynthParams {
        n: args.n,
        min_len: args.min_len,
        max_len: args.max_len,
        family_size: args.family_size,
        seed: args.seed,
        ..SynthParams::default()
    })
    .map_err(|e| Failure::Invalid(e.to_string()))?;
    write_fasta(&args.output, &records).map_err(runtime)
}
