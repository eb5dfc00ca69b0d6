use std::collections::BTreeSet;
use std::path::PathBuf;

use super::*;
use crate::metrics::Metric;

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn small_corpus() -> Corpus {
    let pick = ["Counter.mo", "Ledger.mo"];
    let sources = pick
        .iter()
        .map(|n| (n.to_string(), std::fs::read_to_string(corpus_dir().join(n)).unwrap()))
        .collect();
    Corpus::from_sources(sources, Some("[[oracle]]\nclass = \"Ledger\"\nmax_calls = 3\narg_pool = [-1, 1]\n")).unwrap()
}

fn quick() -> PipelineConfig {
    PipelineConfig { budget_ms: 200, workers: 2, ..PipelineConfig::default() }
}

#[test]
fn zero_runs_is_a_config_error() {
    let cfg = PipelineConfig { runs_per_fitness: 0, ..PipelineConfig::default() };
    assert!(matches!(cfg.validate(), Err(PipelineError::Config(_))));
    for bad in [
        PipelineConfig { fitness: vec![], ..PipelineConfig::default() },
        PipelineConfig { fitness: vec![FitnessKind::Combined, FitnessKind::Combined], ..PipelineConfig::default() },
        PipelineConfig { workers: 0, ..PipelineConfig::default() },
        PipelineConfig { budget_ms: 0, ..PipelineConfig::default() },
    ] {
        assert!(matches!(bad.validate(), Err(PipelineError::Config(_))));
    }
    assert_eq!(PipelineConfig::default().total_runs(), 12);
}

#[test]
fn hash_functions_match_reference_values() {
    // Published test vectors for FNV-1a 64 and the splitmix64 output sequence from state 0.
    assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
    assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
    assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    assert_eq!(splitmix64(0), 0xe220a8397b1dcdaf);
    assert_eq!(splitmix64(0x9e3779b97f4a7c15), 0x6e789e6aa1b965f4);
}

#[test]
fn schedule_has_distinct_seeds() {
    let cfg = PipelineConfig::default();
    let specs = schedule(&cfg);
    assert_eq!(specs.len(), 12);
    for class in ["Counter", "Ledger", "Safe"] {
        let seeds: BTreeSet<u64> = schedule_seeds(&cfg, class).into_values().collect();
        assert_eq!(seeds.len(), 12);
    }
    assert_ne!(
        sub_seed(1, "Counter", Variant::Original, FitnessKind::LineBranch, 0),
        sub_seed(1, "Ledger", Variant::Original, FitnessKind::LineBranch, 0)
    );
    let only = PipelineConfig { fitness: vec![FitnessKind::Combined], ..cfg.clone() };
    assert_eq!(schedule_seeds(&only, "Counter")["deencap-combined-1"], schedule_seeds(&cfg, "Counter")["deencap-combined-1"]);
}

#[test]
fn measure_small_corpus() {
    let corpus = small_corpus();
    let (report, artifacts) = measure_corpus(&corpus, &quick()).unwrap();
    assert!(report.failures.is_empty());
    assert_eq!(report.classes.len(), 2);
    let counter = report.class("Counter").unwrap();
    assert_eq!(counter.contr, Metric::ratio(1, 1));
    assert_eq!(counter.obs, Metric::ratio(1, 1));
    let ledger = report.class("Ledger").unwrap();
    assert!(ledger.obs.0.unwrap() < counter.obs.0.unwrap());
    for (m, a) in report.manifest.iter().zip(&artifacts) {
        assert_eq!(m.runs.len(), 12);
        assert_eq!(m.union_size, a.union.len());
        let expect = TestSuite::union(a.run_suites.iter().map(|(_, s)| s));
        assert_eq!(a.union, expect);
    }
    let json = report.to_json();
    assert!(!json.contains("workers"));
    let csv = report.to_csv();
    assert!(csv.lines().nth(1).unwrap().starts_with("Counter,8,8,8,8,1.0000,1.0000,1/1,1/1"), "{csv}");
}

#[test]
fn report_is_independent_of_worker_count() {
    let corpus = small_corpus();
    let a = measure_corpus(&corpus, &PipelineConfig { workers: 1, ..quick() }).unwrap().0;
    let b = measure_corpus(&corpus, &PipelineConfig { workers: 3, ..quick() }).unwrap().0;
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn outputs_round_trip_through_from_suites() {
    let dir = tempfile::tempdir().unwrap();
    let corpus_path = dir.path().join("corpus");
    std::fs::create_dir(&corpus_path).unwrap();
    for n in ["Counter.mo", "Safe.mo"] {
        std::fs::copy(corpus_dir().join(n), corpus_path.join(n)).unwrap();
    }
    let out = dir.path().join("out");
    let cfg = PipelineConfig { corpus: corpus_path.clone(), out: Some(out.clone()), emit_deencap: true, ..quick() };
    let first = measure(&cfg).unwrap();
    for f in ["report.json", "report.csv", "timings.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let safe = out.join("classes/Safe");
    for f in ["mutants.json", "suite.json", "matrix.csv", "matrix_noset.csv", "runs.json", "deencap.mo"] {
        assert!(safe.join(f).is_file(), "{f}");
    }
    assert_eq!(std::fs::read_dir(safe.join("runs")).unwrap().count(), 12);
    let deencap = std::fs::read_to_string(safe.join("deencap.mo")).unwrap();
    assert!(deencap.contains("set__secret"));
    let suite = TestSuite::from_json(&std::fs::read_to_string(safe.join("suite.json")).unwrap()).unwrap();
    assert_eq!(suite.len(), first.manifest.iter().find(|m| m.class == "Safe").unwrap().union_size);

    let again_out = dir.path().join("again");
    let again = PipelineConfig { out: Some(again_out.clone()), from_suites: Some(out.clone()), ..cfg.clone() };
    measure(&again).unwrap();
    assert_eq!(
        std::fs::read_to_string(out.join("report.json")).unwrap(),
        std::fs::read_to_string(again_out.join("report.json")).unwrap()
    );

    let other_seed = PipelineConfig { seed: 99, out: None, from_suites: Some(out), ..cfg };
    assert!(matches!(measure(&other_seed), Err(PipelineError::Stored(_))));
}

#[test]
fn oracle_check_small() {
    let corpus = small_corpus();
    let r = oracle_check_corpus(&corpus, &quick()).unwrap();
    assert!(r.all_equal);
    let l = r.class("Ledger").unwrap();
    assert_eq!(l.status, OracleStatus::Equal);
    assert_eq!(l.estimated.as_ref().unwrap().obs, Metric::ratio(5, 13));

    let capped = oracle_check_corpus(&corpus, &PipelineConfig { enum_cap: 5, ..quick() }).unwrap();
    let l = capped.class("Ledger").unwrap();
    assert_eq!(l.status, OracleStatus::Skipped);
    assert!(l.reason.as_ref().unwrap().contains("too large"));
    assert!(!capped.all_equal);
}
