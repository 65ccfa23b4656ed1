//! Full-scan baseline, filter accuracy, latency comparison and the
//! temperature-sorting ablation.

pub mod synth;

use std::fmt::Write as _;
use std::hint::black_box;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::cuckoo::CuckooIndex;
use crate::ingest::IndexBundle;
use crate::retrieve::{retrieve_context, select_top_k, RetrieveError, RetrieveOptions, ScoredChunk};
use crate::ChunkId;

/// Exact top-k over every chunk, same ordering as the bridged path.
pub fn naive_retrieve(query: &str, k: usize, bundle: &IndexBundle) -> Result<Vec<ScoredChunk>, RetrieveError> {
    let q = bundle.embedder().embed(query)?;
    let all: Vec<ChunkId> = (0..bundle.store.len() as ChunkId).collect();
    Ok(select_top_k(&all, &q, k, &bundle.store))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct FprReport {
    pub members: usize,
    pub non_members: usize,
    pub false_negatives: usize,
    pub fingerprint_false_positives: usize,
    pub payload_false_positives: usize,
    pub fingerprint_fpr: f64,
    pub payload_fpr: f64,
    pub load_factor: f64,
}

/// Counts members that are missed and non-members whose fingerprint (and
/// then full hash) matches a slot in one of their candidate buckets.
pub fn measure_fpr(filter: &CuckooIndex, members: &[String], non_members: &[String]) -> FprReport {
    let false_negatives = members.iter().filter(|m| !filter.contains(m)).count();
    let mut fp = 0;
    let mut payload = 0;
    for n in non_members {
        if filter.fingerprint_match(n) {
            fp += 1;
            if filter.contains(n) {
                payload += 1;
            }
        }
    }
    let rate = |x: usize| if non_members.is_empty() { 0.0 } else { x as f64 / non_members.len() as f64 };
    FprReport {
        members: members.len(),
        non_members: non_members.len(),
        false_negatives,
        fingerprint_false_positives: fp,
        payload_false_positives: payload,
        fingerprint_fpr: rate(fp),
        payload_fpr: rate(payload),
        load_factor: filter.stats().load_factor,
    }
}

/// Mean wall time to find each of `keys` and read its pair-ids, repeated
/// `passes` times.
pub fn mean_lookup_time(filter: &CuckooIndex, keys: &[String], passes: usize) -> Duration {
    let start = Instant::now();
    for _ in 0..passes {
        for k in keys {
            let sum: u64 = filter.find(black_box(k)).map_or(0, |ids| ids.iter().map(u64::from).sum());
            black_box(sum);
        }
    }
    let n = (keys.len() * passes).max(1) as u32;
    start.elapsed() / n
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LatencySummary {
    pub samples: usize,
    pub mean_us: f64,
    pub median_us: f64,
    pub p99_us: f64,
    pub min_us: f64,
    pub max_us: f64,
}

impl LatencySummary {
    pub fn from_durations(samples: &[Duration]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut us: Vec<f64> = samples.iter().map(|d| d.as_secs_f64() * 1e6).collect();
        us.sort_by(f64::total_cmp);
        let n = us.len();
        let median = if n % 2 == 1 {
            us[n / 2]
        } else {
            (us[n / 2 - 1] + us[n / 2]) / 2.0
        };
        let p99 = us[((n as f64 * 0.99).ceil() as usize).clamp(1, n) - 1];
        LatencySummary {
            samples: n,
            mean_us: us.iter().sum::<f64>() / n as f64,
            median_us: median,
            p99_us: p99,
            min_us: us[0],
            max_us: us[n - 1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RoundStats {
    pub round: usize,
    pub latency: LatencySummary,
    pub mean_probes: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct PoolStats {
    pub mean: f64,
    pub median: f64,
    pub min: usize,
    pub max: usize,
    pub fallback_queries: usize,
}

impl PoolStats {
    fn from_sizes(sizes: &[usize], fallback_queries: usize) -> Self {
        if sizes.is_empty() {
            return Self::default();
        }
        let mut s = sizes.to_vec();
        s.sort_unstable();
        let n = s.len();
        let median = if n % 2 == 1 {
            s[n / 2] as f64
        } else {
            (s[n / 2 - 1] + s[n / 2]) as f64 / 2.0
        };
        PoolStats {
            mean: s.iter().sum::<usize>() as f64 / n as f64,
            median,
            min: s[0],
            max: s[n - 1],
            fallback_queries,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchMode {
    Speed,
    Ablation,
    Fpr,
    Throughput,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub mode: BenchMode,
    pub chunk_count: usize,
    pub queries: usize,
    pub rounds: usize,
    pub load_factor: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sorting: Option<bool>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub per_round: Vec<RoundStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bridge: Option<LatencySummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub naive: Option<LatencySummary>,
    /// Naive mean over bridged mean.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speedup: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speedup_median: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pool: Option<PoolStats>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fpr: Option<FprReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub throughput_qps: Option<f64>,
}

impl BenchReport {
    fn empty(mode: BenchMode, bundle: &IndexBundle, queries: usize) -> Self {
        BenchReport {
            mode,
            chunk_count: bundle.store.len(),
            queries,
            rounds: 0,
            load_factor: bundle.filter().stats().load_factor,
            sorting: None,
            per_round: Vec::new(),
            bridge: None,
            naive: None,
            speedup: None,
            speedup_median: None,
            pool: None,
            fpr: None,
            throughput_qps: None,
        }
    }

    /// Aligned two-column summary plus a per-round table when present.
    pub fn table(&self) -> String {
        let mut rows: Vec<(String, String)> = vec![
            ("mode".into(), format!("{:?}", self.mode).to_lowercase()),
            ("chunks".into(), self.chunk_count.to_string()),
            ("queries".into(), self.queries.to_string()),
            ("load_factor".into(), format!("{:.4}", self.load_factor)),
        ];
        if let Some(s) = self.sorting {
            rows.push(("sorting".into(), if s { "on" } else { "off" }.into()));
        }
        for (name, lat) in [("bridge", &self.bridge), ("naive", &self.naive)] {
            if let Some(l) = lat {
                rows.push((format!("{name}_mean_us"), format!("{:.1}", l.mean_us)));
                rows.push((format!("{name}_median_us"), format!("{:.1}", l.median_us)));
                rows.push((format!("{name}_p99_us"), format!("{:.1}", l.p99_us)));
            }
        }
        if let Some(s) = self.speedup {
            rows.push(("speedup".into(), format!("{s:.2}")));
        }
        if let Some(s) = self.speedup_median {
            rows.push(("speedup_median".into(), format!("{s:.2}")));
        }
        if let Some(p) = &self.pool {
            rows.push(("pool_mean".into(), format!("{:.1}", p.mean)));
            rows.push(("pool_max".into(), p.max.to_string()));
            rows.push(("fallback_queries".into(), p.fallback_queries.to_string()));
        }
        if let Some(f) = &self.fpr {
            rows.push(("false_negatives".into(), f.false_negatives.to_string()));
            rows.push(("fingerprint_fpr".into(), format!("{:.6}", f.fingerprint_fpr)));
            rows.push(("payload_fpr".into(), format!("{:.6}", f.payload_fpr)));
        }
        if let Some(q) = self.throughput_qps {
            rows.push(("throughput_qps".into(), format!("{q:.1}")));
        }
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        let mut out = String::new();
        for (k, v) in rows {
            let _ = writeln!(out, "{k:<width$}  {v}");
        }
        if !self.per_round.is_empty() {
            let _ = writeln!(out, "\n{:>5}  {:>10}  {:>10}  {:>10}  {:>8}", "round", "mean_us", "median_us", "p99_us", "probes");
            for r in &self.per_round {
                let _ = writeln!(
                    out,
                    "{:>5}  {:>10.1}  {:>10.1}  {:>10.1}  {:>8.3}",
                    r.round, r.latency.mean_us, r.latency.median_us, r.latency.p99_us, r.mean_probes
                );
            }
        }
        out
    }

    /// `round,mean_us,median_us,p99_us,mean_probes` per round.
    pub fn rounds_csv(&self) -> String {
        let mut out = String::from("round,mean_us,median_us,p99_us,mean_probes\n");
        for r in &self.per_round {
            let _ = writeln!(
                out,
                "{},{:.3},{:.3},{:.3},{:.4}",
                r.round, r.latency.mean_us, r.latency.median_us, r.latency.p99_us, r.mean_probes
            );
        }
        out
    }
}

/// Ablation output: the report and every query's ranked chunks, round by round.
#[derive(Clone, Debug)]
pub struct AblationRun {
    pub report: BenchReport,
    pub outputs: Vec<Vec<Vec<ScoredChunk>>>,
}

/// Replays `queries` for `rounds` rounds. With `sorting` off the end-of-query
/// bucket resort is skipped; nothing else changes.
pub fn run_ablation(
    queries: &[String],
    rounds: usize,
    opts: &RetrieveOptions,
    bundle: &IndexBundle,
    sorting: bool,
) -> Result<AblationRun, RetrieveError> {
    if rounds < 2 {
        return Err(RetrieveError::InvalidArgument("ablation needs at least 2 rounds".into()));
    }
    let opts = RetrieveOptions { resort: sorting, ..*opts };
    let mut per_round = Vec::with_capacity(rounds);
    let mut outputs = Vec::with_capacity(rounds);
    for round in 1..=rounds {
        let mut times = Vec::with_capacity(queries.len());
        let mut probes = 0u64;
        let mut round_out = Vec::with_capacity(queries.len());
        for q in queries {
            let t = Instant::now();
            let r = retrieve_context(q, &opts, bundle)?;
            times.push(t.elapsed());
            probes += u64::from(r.probes);
            round_out.push(r.selected_chunks);
        }
        per_round.push(RoundStats {
            round,
            latency: LatencySummary::from_durations(&times),
            mean_probes: probes as f64 / queries.len().max(1) as f64,
        });
        outputs.push(round_out);
    }
    let mut report = BenchReport::empty(BenchMode::Ablation, bundle, queries.len());
    report.rounds = rounds;
    report.sorting = Some(sorting);
    report.per_round = per_round;
    Ok(AblationRun { report, outputs })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Iterations {
    pub warmup: usize,
    pub timed: usize,
}

impl Default for Iterations {
    fn default() -> Self {
        Iterations { warmup: 2, timed: 10 }
    }
}

/// Times the bridged path against the full scan on the same queries,
/// alternating per iteration. Each query's latency in each timed iteration
/// is one sample.
pub fn run_speed_comparison(
    queries: &[String],
    opts: &RetrieveOptions,
    bundle: &IndexBundle,
    iters: Iterations,
) -> Result<BenchReport, RetrieveError> {
    opts.validate()?;
    let mut bridge = Vec::with_capacity(queries.len() * iters.timed);
    let mut naive = Vec::with_capacity(queries.len() * iters.timed);
    let mut pools = Vec::with_capacity(queries.len());
    let mut fallbacks = 0;
    for q in queries {
        let r = retrieve_context(q, opts, bundle)?;
        pools.push(r.candidate_chunks.len());
        fallbacks += usize::from(r.fallback);
    }
    for it in 0..iters.warmup + iters.timed {
        let timed = it >= iters.warmup;
        for q in queries {
            let t = Instant::now();
            black_box(retrieve_context(q, opts, bundle)?);
            let b = t.elapsed();
            let t = Instant::now();
            black_box(naive_retrieve(q, opts.k, bundle)?);
            let n = t.elapsed();
            if timed {
                bridge.push(b);
                naive.push(n);
            }
        }
    }
    let bridge = LatencySummary::from_durations(&bridge);
    let naive = LatencySummary::from_durations(&naive);
    let mut report = BenchReport::empty(BenchMode::Speed, bundle, queries.len());
    report.rounds = iters.timed;
    report.speedup = Some(naive.mean_us / bridge.mean_us);
    report.speedup_median = Some(naive.median_us / bridge.median_us);
    report.bridge = Some(bridge);
    report.naive = Some(naive);
    report.pool = Some(PoolStats::from_sizes(&pools, fallbacks));
    Ok(report)
}

/// Replays `queries` once from `threads` threads sharing `bundle`.
pub fn run_throughput(
    queries: &[String],
    opts: &RetrieveOptions,
    bundle: &IndexBundle,
    threads: usize,
) -> Result<BenchReport, RetrieveError> {
    opts.validate()?;
    let threads = threads.max(1);
    let start = Instant::now();
    let results: Vec<Result<(), RetrieveError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                s.spawn(move || {
                    for q in queries.iter().skip(t).step_by(threads) {
                        black_box(retrieve_context(q, opts, bundle)?);
                    }
                    Ok(())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("query thread panicked")).collect()
    });
    let elapsed = start.elapsed();
    results.into_iter().collect::<Result<(), _>>()?;
    let mut report = BenchReport::empty(BenchMode::Throughput, bundle, queries.len());
    report.rounds = 1;
    report.throughput_qps = Some(queries.len() as f64 / elapsed.as_secs_f64().max(1e-9));
    Ok(report)
}

/// FPR report for the bundle's own filter: dictionary entities are members,
/// `non_members` must be disjoint from them.
pub fn run_fpr(bundle: &IndexBundle, non_members: &[String]) -> BenchReport {
    let filter = bundle.filter();
    let members: Vec<String> = bundle
        .dictionary
        .iter()
        .filter(|(_, c)| *c > 0)
        .map(|(e, _)| e.to_string())
        .collect();
    let fpr = measure_fpr(&filter, &members, non_members);
    drop(filter);
    let mut report = BenchReport::empty(BenchMode::Fpr, bundle, non_members.len());
    report.fpr = Some(fpr);
    report
}

#[cfg(test)]
mod tests;
