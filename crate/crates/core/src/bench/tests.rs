use super::synth::{generate, SynthSpec};
use super::*;
use crate::config::Config;
use crate::ingest::IndexBuilder;

fn small() -> (synth::SynthCorpus, IndexBundle) {
    let corpus = generate(&SynthSpec {
        abstracts: 40,
        ..SynthSpec::default()
    });
    let (bundle, _) = IndexBuilder::new(Config::default())
        .entities(corpus.primaries.clone())
        .build(&corpus.docs)
        .unwrap();
    (corpus, bundle)
}

#[test]
fn latency_summary_order_statistics() {
    let d: Vec<Duration> = [5u64, 1, 4, 2, 3].iter().map(|&u| Duration::from_micros(u)).collect();
    let s = LatencySummary::from_durations(&d);
    assert_eq!(s.samples, 5);
    assert!((s.median_us - 3.0).abs() < 1e-9);
    assert!((s.mean_us - 3.0).abs() < 1e-9);
    assert!((s.p99_us - 5.0).abs() < 1e-9);
    assert!((s.min_us - 1.0).abs() < 1e-9);
    let even = LatencySummary::from_durations(&d[..4]);
    assert!((even.median_us - 3.0).abs() < 1e-9);
    assert_eq!(LatencySummary::from_durations(&[]), LatencySummary::default());
}

#[test]
fn naive_matches_fallback_ranking() {
    let (_, bundle) = small();
    let q = "nothing recognizable here";
    let r = retrieve_context(q, &RetrieveOptions::default(), &bundle).unwrap();
    assert!(r.fallback);
    assert_eq!(naive_retrieve(q, 5, &bundle).unwrap(), r.selected_chunks);
}

#[test]
fn fpr_has_no_false_negatives() {
    let (corpus, bundle) = small();
    let non: Vec<String> = (0..2000).map(|i| format!("absent entity {i}")).collect();
    let f = measure_fpr(&bundle.filter(), &corpus.primaries, &non);
    assert_eq!(f.false_negatives, 0);
    assert_eq!(f.members, 40);
    assert!(f.payload_false_positives <= f.fingerprint_false_positives);
    assert!(f.fingerprint_fpr < 0.01, "{f:?}");
    let r = run_fpr(&bundle, &non);
    assert_eq!(r.fpr.unwrap().false_negatives, 0);
}

#[test]
fn ablation_outputs_do_not_depend_on_sorting() {
    let (corpus, a) = small();
    let (_, b) = small();
    let qs = corpus.zipf_queries(50, 1.1, 3);
    let opts = RetrieveOptions::default();
    let on = run_ablation(&qs, 3, &opts, &a, true).unwrap();
    let off = run_ablation(&qs, 3, &opts, &b, false).unwrap();
    assert_eq!(on.outputs, off.outputs);
    assert_eq!(on.report.per_round.len(), 3);
    assert_eq!(on.report.sorting, Some(true));
    assert_eq!(off.report.rounds_csv().lines().count(), 4);
    assert!(run_ablation(&qs, 1, &opts, &a, true).is_err());
}

#[test]
fn sorting_never_increases_probes_on_repeat() {
    let (corpus, bundle) = small();
    let qs = corpus.zipf_queries(200, 1.2, 9);
    let run = run_ablation(&qs, 3, &RetrieveOptions::default(), &bundle, true).unwrap();
    let p: Vec<f64> = run.report.per_round.iter().map(|r| r.mean_probes).collect();
    assert!(p[2] <= p[0], "{p:?}");
}

#[test]
fn speed_report_is_complete() {
    let (corpus, bundle) = small();
    let qs = corpus.queries(10, 5);
    let r = run_speed_comparison(&qs, &RetrieveOptions::default(), &bundle, Iterations { warmup: 1, timed: 2 }).unwrap();
    assert_eq!(r.bridge.as_ref().unwrap().samples, 20);
    assert_eq!(r.naive.as_ref().unwrap().samples, 20);
    assert!(r.speedup.unwrap() > 0.0);
    assert_eq!(r.pool.as_ref().unwrap().fallback_queries, 0);
    let json = serde_json::to_value(&r).unwrap();
    assert_eq!(json["mode"], "speed");
    assert!(r.table().contains("speedup"));
}

#[test]
fn throughput_runs_on_threads() {
    let (corpus, bundle) = small();
    let qs = corpus.queries(40, 2);
    let r = run_throughput(&qs, &RetrieveOptions::default(), &bundle, 4).unwrap();
    assert!(r.throughput_qps.unwrap() > 0.0);
    assert_eq!(bundle.filter().dirty_bucket_count(), 0);
}
