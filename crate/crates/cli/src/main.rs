//! `bridge-index` command-line tool.
//!
//! Exit codes: 0 success, 1 i/o or embedding failure, 2 malformed input file,
//! 3 filter capacity exhausted, 4 corrupt or unreadable index, 5 a bench
//! property did not hold, 64 usage error.

use std::fmt::Display;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use bridge_index::bench::synth::{generate, SynthSpec};
use bridge_index::bench::{self, BenchReport, Iterations};
use bridge_index::embed::HttpEmbedder;
use bridge_index::ingest::{
    parse_corpus_jsonl, parse_entities_jsonl, parse_relations_tsv, BuildError, InputError,
};
use bridge_index::index_file::IndexFileError;
use bridge_index::retrieve::{retrieve_context, RetrieveError};
use bridge_index::{Config, IndexBuilder, IndexBundle, RetrieveOptions};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "bridge-index", version, about = "Build, query and benchmark bridge indexes")]
struct Cli {
    /// Print JSON for every command, including bench and stats.
    #[arg(long, global = true, env = "BRIDGE_JSON")]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an index file from a corpus JSONL file.
    Build(BuildArgs),
    /// Retrieve context for one query.
    Query(QueryArgs),
    /// Run a benchmark against an index.
    Bench(BenchArgs),
    /// Print filter, forest and store statistics.
    Stats(StatsArgs),
    /// Write a synthetic corpus, entity list and query file.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long, env = "BRIDGE_CHUNK_LEN")]
    chunk_len: Option<usize>,
    #[arg(long, env = "BRIDGE_EMBED_DIM")]
    embed_dim: Option<usize>,
    #[arg(long, env = "BRIDGE_K", value_parser = clap::value_parser!(u64).range(1..))]
    k: Option<u64>,
    #[arg(long, env = "BRIDGE_MAX_DEPTH", value_parser = clap::value_parser!(u64).range(1..=3))]
    max_depth: Option<u64>,
    #[arg(long, env = "BRIDGE_MIN_ENTITY_COUNT")]
    min_entity_count: Option<usize>,
    #[arg(long, env = "BRIDGE_INITIAL_BUCKETS")]
    initial_buckets: Option<usize>,
    #[arg(long, env = "BRIDGE_MAX_KICKS")]
    max_kicks: Option<usize>,
    #[arg(long, env = "BRIDGE_RNG_SEED")]
    rng_seed: Option<u64>,
}

impl ConfigArgs {
    fn apply(&self, mut cfg: Config) -> Config {
        if let Some(v) = self.chunk_len {
            cfg.chunk_len = v;
        }
        if let Some(v) = self.embed_dim {
            cfg.embed_dim = v;
        }
        if let Some(v) = self.k {
            cfg.k = v as usize;
        }
        if let Some(v) = self.max_depth {
            cfg.max_depth = v as usize;
        }
        if let Some(v) = self.min_entity_count {
            cfg.min_entity_count = v;
        }
        if let Some(v) = self.initial_buckets {
            cfg.initial_buckets = v;
        }
        if let Some(v) = self.max_kicks {
            cfg.max_kicks = v;
        }
        if let Some(v) = self.rng_seed {
            cfg.rng_seed = v;
        }
        cfg
    }
}

#[derive(Args)]
struct EmbedArgs {
    /// Embedding service URL; the built-in hashing embedder is used when absent.
    #[arg(long, env = "BRIDGE_EMBED_ENDPOINT")]
    embed_endpoint: Option<String>,
    #[arg(long, env = "BRIDGE_EMBED_TIMEOUT_SECS", default_value_t = 30)]
    embed_timeout_secs: u64,
    #[arg(long, env = "BRIDGE_EMBED_MAX_IN_FLIGHT", default_value_t = 4)]
    embed_max_in_flight: usize,
}

impl EmbedArgs {
    fn http(&self, dim: usize) -> Option<HttpEmbedder> {
        self.embed_endpoint.as_ref().map(|url| {
            HttpEmbedder::new(
                url.clone(),
                dim,
                self.embed_max_in_flight,
                Duration::from_secs(self.embed_timeout_secs),
            )
        })
    }
}

#[derive(Args)]
struct BuildArgs {
    corpus: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    /// Entity JSONL replacing automatic extraction.
    #[arg(long)]
    entities: Option<PathBuf>,
    /// Relation TSV replacing automatic extraction.
    #[arg(long)]
    relations: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    embed: EmbedArgs,
}

#[derive(Args)]
struct QueryArgs {
    index: PathBuf,
    query: String,
    #[arg(long, env = "BRIDGE_K", value_parser = clap::value_parser!(u64).range(1..))]
    k: Option<u64>,
    #[arg(long, env = "BRIDGE_MAX_DEPTH", value_parser = clap::value_parser!(u64).range(1..=3))]
    depth: Option<u64>,
    #[command(flatten)]
    embed: EmbedArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Speed,
    Ablation,
    Fpr,
    Throughput,
}

#[derive(Args)]
struct BenchArgs {
    index: PathBuf,
    /// One query per line; not needed for `fpr`.
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "speed")]
    mode: Mode,
    #[arg(long, default_value_t = 5)]
    rounds: usize,
    #[arg(long, default_value_t = 2)]
    warmup: usize,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    #[arg(long, default_value_t = 4)]
    threads: usize,
    /// Synthetic non-member entities probed in `fpr` mode.
    #[arg(long, default_value_t = 100_000)]
    non_members: usize,
    /// Exit 5 if the speed run's mean speedup falls below this.
    #[arg(long)]
    min_speedup: Option<f64>,
    /// Write per-round ablation latencies as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    index: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, short)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 10_000)]
    abstracts: usize,
    #[arg(long, default_value_t = 200)]
    queries: usize,
    /// Zipf exponent for query entities; uniform when absent.
    #[arg(long)]
    zipf: Option<f64>,
    #[arg(long, env = "BRIDGE_RNG_SEED", default_value_t = 7)]
    rng_seed: u64,
}

struct Failure {
    code: u8,
    message: String,
}

fn fail(code: u8, message: impl Display) -> Failure {
    Failure {
        code,
        message: message.to_string(),
    }
}

const EXIT_IO: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_CAPACITY: u8 = 3;
const EXIT_INDEX: u8 = 4;
const EXIT_PROPERTY: u8 = 5;
const EXIT_USAGE: u8 = 64;

impl From<IndexFileError> for Failure {
    fn from(e: IndexFileError) -> Self {
        match e {
            IndexFileError::Io(_) => fail(EXIT_IO, e),
            IndexFileError::Format(_) => fail(EXIT_INDEX, e),
        }
    }
}

impl From<BuildError> for Failure {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::Config(_) => fail(EXIT_USAGE, e),
            BuildError::Embed(_) => fail(EXIT_IO, e),
            BuildError::Filter(_) | BuildError::Capacity { .. } => fail(EXIT_CAPACITY, e),
        }
    }
}

impl From<RetrieveError> for Failure {
    fn from(e: RetrieveError) -> Self {
        match e {
            RetrieveError::InvalidArgument(_) => fail(EXIT_USAGE, e),
            _ => fail(EXIT_IO, e),
        }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| {
        let code = if e.kind() == std::io::ErrorKind::InvalidData {
            EXIT_INPUT
        } else {
            EXIT_IO
        };
        fail(code, format!("{}: {e}", path.display()))
    })
}

fn input_error(path: &Path, e: InputError) -> Failure {
    fail(EXIT_INPUT, format!("{}: {e}", path.display()))
}

fn emit(value: &impl Serialize) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| fail(EXIT_IO, e))?;
    println!("{text}");
    Ok(())
}

fn load(path: &Path) -> Result<IndexBundle, Failure> {
    Ok(IndexBundle::load(path)?)
}

fn cmd_build(args: &BuildArgs) -> Result<(), Failure> {
    let config = args.config.apply(Config::default());
    config.validate().map_err(|e| fail(EXIT_USAGE, e))?;
    let docs = parse_corpus_jsonl(&read_text(&args.corpus)?).map_err(|e| input_error(&args.corpus, e))?;
    let mut builder = IndexBuilder::new(config.clone());
    if let Some(path) = &args.entities {
        builder = builder.entities(parse_entities_jsonl(&read_text(path)?).map_err(|e| input_error(path, e))?);
    }
    if let Some(path) = &args.relations {
        builder = builder.relations(parse_relations_tsv(&read_text(path)?).map_err(|e| input_error(path, e))?);
    }
    if let Some(http) = args.embed.http(config.embed_dim) {
        builder = builder.embedder(Box::new(http));
    }
    let (bundle, report) = builder.build(&docs)?;
    bundle.save(&args.out)?;
    emit(&report)
}

fn cmd_query(args: &QueryArgs) -> Result<(), Failure> {
    let mut bundle = load(&args.index)?;
    let mut opts = RetrieveOptions::from_config(&bundle.config);
    if let Some(k) = args.k {
        opts.k = k as usize;
    }
    if let Some(d) = args.depth {
        opts.max_depth = d as usize;
    }
    if let Some(http) = args.embed.http(bundle.config.embed_dim) {
        bundle.set_embedder(Box::new(http));
    }
    let result = retrieve_context(&args.query, &opts, &bundle)?;
    emit(&result.to_json())
}

fn read_queries(path: Option<&Path>) -> Result<Vec<String>, Failure> {
    let path = path.ok_or_else(|| fail(EXIT_USAGE, "--queries is required for this mode"))?;
    let queries: Vec<String> = read_text(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    if queries.is_empty() {
        return Err(fail(EXIT_INPUT, format!("{}: no queries", path.display())));
    }
    Ok(queries)
}

fn show_report(report: &BenchReport, json: bool) -> Result<(), Failure> {
    if json {
        emit(report)
    } else {
        print!("{}", report.table());
        Ok(())
    }
}

fn cmd_bench(args: &BenchArgs, json: bool) -> Result<(), Failure> {
    let bundle = load(&args.index)?;
    let opts = RetrieveOptions::from_config(&bundle.config);
    match args.mode {
        Mode::Speed => {
            let queries = read_queries(args.queries.as_deref())?;
            let iters = Iterations {
                warmup: args.warmup,
                timed: args.iterations.max(1),
            };
            let report = bench::run_speed_comparison(&queries, &opts, &bundle, iters)?;
            show_report(&report, json)?;
            if let (Some(min), Some(got)) = (args.min_speedup, report.speedup) {
                if got < min {
                    return Err(fail(EXIT_PROPERTY, format!("speedup {got:.2} below {min}")));
                }
            }
            Ok(())
        }
        Mode::Ablation => {
            let queries = read_queries(args.queries.as_deref())?;
            if args.rounds < 2 {
                return Err(fail(EXIT_USAGE, "--rounds must be at least 2 for ablation"));
            }
            let on = bench::run_ablation(&queries, args.rounds, &opts, &bundle, true)?;
            drop(bundle);
            let fresh = load(&args.index)?;
            let off = bench::run_ablation(&queries, args.rounds, &opts, &fresh, false)?;
            let identical = on.outputs == off.outputs;
            if let Some(path) = &args.csv {
                let mut csv = String::from("sorting,");
                for (label, run) in [("on", &on), ("off", &off)] {
                    for (i, line) in run.report.rounds_csv().lines().enumerate() {
                        if i == 0 {
                            if label == "on" {
                                csv.push_str(line);
                                csv.push('\n');
                            }
                            continue;
                        }
                        csv.push_str(&format!("{label},{line}\n"));
                    }
                }
                fs::write(path, csv).map_err(|e| fail(EXIT_IO, format!("{}: {e}", path.display())))?;
            }
            if json {
                emit(&json!({
                    "sorting_on": on.report,
                    "sorting_off": off.report,
                    "outputs_identical": identical,
                }))?;
            } else {
                print!("{}\n{}", on.report.table(), off.report.table());
                println!("outputs_identical  {identical}");
            }
            if !identical {
                return Err(fail(EXIT_PROPERTY, "retrieval outputs differ between sorting on and off"));
            }
            Ok(())
        }
        Mode::Fpr => {
            let non_members: Vec<String> = (0..args.non_members)
                .map(|i| format!("absent probe {i:08}"))
                .filter(|e| !bundle.dictionary.contains(e))
                .collect();
            let report = bench::run_fpr(&bundle, &non_members);
            show_report(&report, json)?;
            match &report.fpr {
                Some(f) if f.false_negatives > 0 => Err(fail(
                    EXIT_PROPERTY,
                    format!("{} false negatives", f.false_negatives),
                )),
                _ => Ok(()),
            }
        }
        Mode::Throughput => {
            let queries = read_queries(args.queries.as_deref())?;
            let report = bench::run_throughput(&queries, &opts, &bundle, args.threads)?;
            show_report(&report, json)
        }
    }
}

fn cmd_stats(args: &StatsArgs, json: bool) -> Result<(), Failure> {
    let bundle = load(&args.index)?;
    let filter = bundle.filter().stats();
    let forest = bundle.forest.shape();
    let value = json!({
        "chunk_count": bundle.store.len(),
        "abstract_count": bundle.forest.len(),
        "entity_count": bundle.dictionary.len(),
        "config": bundle.config,
        "filter": filter,
        "forest": forest,
    });
    if json {
        return emit(&value);
    }
    let mut rows: Vec<(String, String)> = vec![
        ("chunk_count".into(), bundle.store.len().to_string()),
        ("abstract_count".into(), bundle.forest.len().to_string()),
        ("entity_count".into(), bundle.dictionary.len().to_string()),
        ("forest.node_count".into(), forest.node_count.to_string()),
        ("forest.roots".into(), forest.roots.to_string()),
        ("forest.max_depth".into(), forest.max_depth.to_string()),
    ];
    if let Value::Object(map) = &value["filter"] {
        for (k, v) in map {
            rows.push((format!("filter.{k}"), v.to_string()));
        }
    }
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    for (k, v) in rows {
        println!("{k:<width$}  {v}");
    }
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<(), Failure> {
    if args.abstracts == 0 {
        return Err(fail(EXIT_USAGE, "--abstracts must be positive"));
    }
    let corpus = generate(&SynthSpec {
        abstracts: args.abstracts,
        seed: args.rng_seed,
        ..SynthSpec::default()
    });
    let queries = match args.zipf {
        Some(s) if s > 0.0 => corpus.zipf_queries(args.queries, s, args.rng_seed),
        Some(_) => return Err(fail(EXIT_USAGE, "--zipf must be positive")),
        None => corpus.queries(args.queries, args.rng_seed),
    };
    fs::create_dir_all(&args.out_dir).map_err(|e| fail(EXIT_IO, e))?;
    let write = |name: &str, lines: Vec<String>| -> Result<PathBuf, Failure> {
        let path = args.out_dir.join(name);
        let mut f = std::io::BufWriter::new(fs::File::create(&path).map_err(|e| fail(EXIT_IO, e))?);
        for l in lines {
            writeln!(f, "{l}").map_err(|e| fail(EXIT_IO, e))?;
        }
        f.flush().map_err(|e| fail(EXIT_IO, e))?;
        Ok(path)
    };
    let docs = corpus
        .docs
        .iter()
        .map(|d| json!({"doc_id": d.doc_id, "text": d.text}).to_string())
        .collect();
    let entities = corpus.primaries.iter().map(|e| json!({ "entity": e }).to_string()).collect();
    let corpus_path = write("corpus.jsonl", docs)?;
    let entities_path = write("entities.jsonl", entities)?;
    let queries_path = write("queries.txt", queries)?;
    emit(&json!({
        "abstracts": args.abstracts,
        "chunks": corpus.chunk_count(),
        "chunk_len": SynthSpec::default().chunk_len,
        "corpus": corpus_path,
        "entities": entities_path,
        "queries": queries_path,
    }))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Query(a) => cmd_query(a),
        Command::Bench(a) => cmd_bench(a, cli.json),
        Command::Stats(a) => cmd_stats(a, cli.json),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
