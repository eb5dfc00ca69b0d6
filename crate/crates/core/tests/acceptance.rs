//! Acceptance gate. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line per criterion; exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use testimony_core::analysis::{build_full_matrix, derive_evidence_sets, naive_status, Status};
use testimony_core::deencap::synthesize_setters;
use testimony_core::frontend::ast::Visibility;
use testimony_core::interp::StepBudget;
use testimony_core::metrics::Metric;
use testimony_core::mutation::{generate_mutants, MutantId, Operator};
use testimony_core::pipeline::{
    measure, measure_corpus, oracle_check_corpus, ClassArtifacts, Corpus, OracleStatus, PipelineConfig, TestabilityReport,
};
use testimony_core::testcase::{Action, TestCase, TestSuite};
use testimony_core::testgen::{synthesize_oracle, values_for, FitnessKind};

const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
const ORACLE_LIMIT: Duration = Duration::from_secs(120);
const ALL_SEEDS_LIMIT: Duration = Duration::from_secs(25 * 60);
const ONE_SEED_LIMIT: Duration = Duration::from_secs(5 * 60);
const PAIRS_PER_CLASS: usize = 50;

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

struct Verdict {
    id: u8,
    name: &'static str,
    failures: Vec<String>,
    detail: String,
}

impl Verdict {
    fn new(id: u8, name: &'static str) -> Self {
        Verdict { id, name, failures: Vec::new(), detail: String::new() }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(what());
        }
    }

    fn print(&self) -> bool {
        let pass = self.failures.is_empty();
        println!("{} criterion {}: {} ({})", if pass { "PASS" } else { "FAIL" }, self.id, self.name, self.detail);
        for f in &self.failures {
            println!("      {f}");
        }
        pass
    }
}

fn default_config(seed: u64, workers: usize) -> PipelineConfig {
    PipelineConfig { corpus: corpus_dir(), seed, workers, ..PipelineConfig::default() }
}

fn metric(r: &TestabilityReport, class: &str, pick: fn(&testimony_core::metrics::ClassMetrics) -> Metric) -> Metric {
    r.class(class).map(pick).unwrap_or(Metric::UNDEFINED)
}

fn main() -> ExitCode {
    let corpus = Corpus::load(&corpus_dir()).expect("shipped corpus loads");
    let mut verdicts = Vec::new();

    // 1 and 2: exhaustive oracle mode.
    let started = Instant::now();
    let oracle = oracle_check_corpus(&corpus, &default_config(0, 4)).expect("oracle check runs");
    let oracle_time = started.elapsed();
    let mut v1 = Verdict::new(1, "oracle equivalence");
    v1.check(oracle.classes.len() >= 5, || format!("only {} oracle classes", oracle.classes.len()));
    for required in ["Counter", "Ledger", "SafeSmall"] {
        v1.check(oracle.class(required).is_some(), || format!("{required} is not an oracle class"));
    }
    for c in &oracle.classes {
        v1.check(c.status == OracleStatus::Equal, || {
            format!("{}: {:?} {} {}", c.class, c.status, c.discrepancy.join("; "), c.reason.clone().unwrap_or_default())
        });
    }
    v1.check(oracle_time < ORACLE_LIMIT, || format!("took {oracle_time:?}"));
    v1.detail = format!(
        "{}/{} classes equal in {:.1}s",
        oracle.classes.iter().filter(|c| c.status == OracleStatus::Equal).count(),
        oracle.classes.len(),
        oracle_time.as_secs_f64()
    );
    verdicts.push(v1);

    let mut v2 = Verdict::new(2, "known values under exhaustive enumeration");
    for (class, contr, obs) in [("Counter", (1, 1), (1, 1)), ("Ledger", (1, 1), (5, 13))] {
        let want = (Metric::ratio(contr.0, contr.1), Metric::ratio(obs.0, obs.1));
        match oracle.class(class) {
            Some(c) => {
                let ideal = c.idealistic.as_ref().map(|i| (i.contr, i.obs));
                let est = c.estimated.as_ref().map(|e| (e.contr, e.obs));
                v2.check(ideal == Some(want), || format!("{class} idealistic {ideal:?}"));
                v2.check(est == Some(want), || format!("{class} estimated {est:?}"));
            }
            None => v2.check(false, || format!("{class} missing")),
        }
    }
    v2.detail = "Counter contr=obs=1, Ledger contr=1 obs=5/13".into();
    verdicts.push(v2);

    // 3: the default protocol for every seed; its runs feed 4, 6 and 8.
    let mut runs: Vec<(u64, TestabilityReport, Vec<ClassArtifacts>)> = Vec::new();
    let mut one_seed = Duration::ZERO;
    let started = Instant::now();
    for seed in SEEDS {
        let t = Instant::now();
        let (report, artifacts) = measure_corpus(&corpus, &default_config(seed, 4)).expect("measure runs");
        if seed == SEEDS[0] {
            one_seed = t.elapsed();
        }
        runs.push((seed, report, artifacts));
    }
    let all_seeds = started.elapsed();

    let safe_catalog = {
        let p = corpus.program_of("Safe").unwrap();
        let d = synthesize_setters(p);
        generate_mutants(&d.program, &d.synthetic_regions).without_synthetic().for_class("Safe")
    };
    let return_one: BTreeSet<MutantId> = safe_catalog
        .mutants()
        .iter()
        .filter(|m| m.method == "peek" && m.operator == Operator::LVR && m.original == "1")
        .map(|m| m.id)
        .collect();

    let mut v3 = Verdict::new(3, "seeded directions under the default protocol");
    v3.check(return_one.len() == 3, || format!("expected 3 `return 1` LVR mutants, found {}", return_one.len()));
    for (seed, report, _) in &runs {
        let (lo, co) = (metric(report, "Ledger", |c| c.obs), metric(report, "Counter", |c| c.obs));
        v3.check(matches!((lo.0, co.0), (Some(l), Some(c)) if l < c), || format!("seed {seed}: Obs(Ledger)={lo} Obs(Counter)={co}"));
        let sc = metric(report, "Safe", |c| c.contr);
        v3.check(matches!(sc.0, Some(r) if *r.numer() < *r.denom()), || format!("seed {seed}: Contr(Safe)={sc}"));
        let hard_d: BTreeSet<MutantId> = report.class("Safe").map(|c| c.hard_d.iter().copied().collect()).unwrap_or_default();
        v3.check(return_one.is_subset(&hard_d), || format!("seed {seed}: Safe hard_d {hard_d:?} misses {return_one:?}"));
        let cc = metric(report, "Counter", |c| c.contr);
        v3.check(cc == Metric::ratio(1, 1), || format!("seed {seed}: Contr(Counter)={cc}"));
        v3.check(report.failures.is_empty(), || format!("seed {seed}: failures {:?}", report.failures));
        for c in &report.classes {
            v3.check(c.contr.is_defined() && c.obs.is_defined(), || format!("seed {seed}: {} undefined", c.name));
        }
    }
    v3.check(all_seeds < ALL_SEEDS_LIMIT, || format!("five seeds took {all_seeds:?}"));
    v3.check(one_seed < ONE_SEED_LIMIT, || format!("one seed took {one_seed:?}"));
    v3.detail = format!("seeds {SEEDS:?}, one seed {:.1}s, all {:.1}s", one_seed.as_secs_f64(), all_seeds.as_secs_f64());
    verdicts.push(v3);

    // 4: set algebra on every run, with the unconditional matrix as witness.
    let mut v4 = Verdict::new(4, "set-algebra invariants");
    let mut cells = 0usize;
    for (seed, report, artifacts) in &runs {
        for a in artifacts {
            let ev = derive_evidence_sets(&a.mx_with, &a.mx_without, &a.catalog).unwrap();
            let e = ev.classes.get(&a.class).cloned().unwrap_or_default();
            v4.check(e.kill.is_subset(&e.wkill), || format!("seed {seed} {}: kill not in wkill", a.class));
            v4.check(e.wkill_noset.is_subset(&e.wkill), || format!("seed {seed} {}: noset not in wkill", a.class));
            let hd: BTreeSet<_> = e.wkill.difference(&e.wkill_noset).copied().collect();
            let ho: BTreeSet<_> = e.wkill.difference(&e.kill).copied().collect();
            v4.check(e.hard_d == hd && e.hard_o == ho, || format!("seed {seed} {}: hard-set identity", a.class));
            let m = report.class(&a.class).unwrap();
            v4.check(m.hard_d == hd.iter().copied().collect::<Vec<_>>(), || format!("seed {seed} {}: report hard_d", a.class));
            v4.check(m.hard_o == ho.iter().copied().collect::<Vec<_>>(), || format!("seed {seed} {}: report hard_o", a.class));
            for r in [m.contr.0, m.obs.0].into_iter().flatten() {
                v4.check(*r.numer() <= *r.denom(), || format!("seed {seed} {}: metric {r} out of range", a.class));
            }
            if *seed == SEEDS[0] {
                let p = corpus.program_of(&a.class).unwrap();
                let d = synthesize_setters(p);
                match build_full_matrix(&d.program, &a.catalog, &a.union, StepBudget::default()) {
                    Ok(full) => v4.check(full == a.mx_with, || format!("{}: probed matrix differs from full", a.class)),
                    Err(e) => v4.check(false, || format!("{}: {e}", a.class)),
                }
                cells += a.mx_with.mutants().len() * a.mx_with.n_tests();
            }
            for mutant in a.mx_with.mutants() {
                for t in 0..a.mx_with.n_tests() {
                    let s = a.mx_with.status(*mutant, t).unwrap();
                    v4.check(s != Status::Killed || a.mx_with.best(*mutant) >= Status::Weak, || "killed without weak".into());
                }
            }
        }
    }
    v4.detail = format!("{} runs, {cells} cells re-run unconditionally, 0 killed-not-infected", runs.len());
    verdicts.push(v4);

    // 5: probe soundness against naive state-divergence runs.
    let mut v5 = Verdict::new(5, "infection-probe soundness");
    let mut checked = 0usize;
    let (_, _, artifacts) = &runs[0];
    for a in artifacts {
        let p = corpus.program_of(&a.class).unwrap();
        let d = synthesize_setters(p);
        let mut tests: Vec<TestCase> = a.union.tests.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        // Small classes get extra random tests so every class reaches the sample size.
        while a.catalog.len() * tests.len() < PAIRS_PER_CLASS * 2 {
            if let Ok(t) = synthesize_oracle(&d.program, random_driver(p, &a.class, &mut rng), StepBudget::default()) {
                tests.push(t);
            }
        }
        let suite = TestSuite::new(tests);
        let probed = testimony_core::analysis::build_kill_matrix(&d.program, &a.catalog, &suite, StepBudget::default()).unwrap();
        let mut pairs = BTreeSet::new();
        while pairs.len() < PAIRS_PER_CLASS.min(a.catalog.len() * suite.len()) {
            pairs.insert((rng.gen_range(0..a.catalog.len()), rng.gen_range(0..suite.len())));
        }
        let mut mismatches = 0;
        for &(mi, ti) in &pairs {
            let m = &a.catalog.mutants()[mi];
            let naive = naive_status(&d.program, &a.catalog, m, &suite.tests[ti], ti, StepBudget::default());
            let probe = probed.status(m.id, ti);
            let weak = |s: Option<Status>| s.map(|s| s >= Status::Weak);
            if weak(naive.as_ref().ok().copied()) != weak(probe) || naive.as_ref().ok().copied() != probe {
                mismatches += 1;
            }
        }
        v5.check(pairs.len() >= PAIRS_PER_CLASS, || format!("{}: only {} pairs", a.class, pairs.len()));
        v5.check(mismatches == 0, || format!("{}: {mismatches} mismatches", a.class));
        checked += pairs.len();
    }
    v5.detail = format!("{checked} pairs over {} classes", artifacts.len());
    verdicts.push(v5);

    // 6: setter mutants stay out of catalogs, evidence, and reports.
    let mut v6 = Verdict::new(6, "setter-mutant exclusion");
    let expected = expected_totals();
    for (class, &file) in &corpus.classes {
        let p = &corpus.files[file].program;
        let original = generate_mutants(p, &Default::default()).for_class(class);
        let d = synthesize_setters(p);
        let aug = generate_mutants(&d.program, &d.synthetic_regions);
        let user = aug.without_synthetic().for_class(class);
        let keys = |c: &testimony_core::mutation::MutantCatalog| c.mutants().iter().map(|m| (m.id, m.alignment_key())).collect::<Vec<_>>();
        v6.check(keys(&original) == keys(&user), || format!("{class}: catalogs do not align"));
        v6.check(expected.get(class) == Some(&user.len()), || format!("{class}: {} mutants, table says {:?}", user.len(), expected.get(class)));
        let synthetic: BTreeSet<MutantId> = aug.mutants().iter().filter(|m| m.synthetic).map(|m| m.id).collect();
        for (seed, report, artifacts) in &runs {
            let a = artifacts.iter().find(|a| &a.class == class).unwrap();
            let ev = derive_evidence_sets(&a.mx_with, &a.mx_without, &a.catalog).unwrap();
            let e = ev.classes.get(class).cloned().unwrap_or_default();
            let seen: BTreeSet<MutantId> = [&e.wkill, &e.kill, &e.wkill_noset, &e.hard_d, &e.hard_o]
                .into_iter()
                .flatten()
                .copied()
                .chain(report.class(class).map(|m| m.hard_d.iter().chain(&m.hard_o).copied().collect::<Vec<_>>()).unwrap_or_default())
                .chain(a.mx_with.mutants().iter().copied())
                .collect();
            v6.check(seen.is_disjoint(&synthetic), || format!("seed {seed} {class}: synthetic id in evidence"));
        }
    }
    for (class, n) in [("Counter", 8), ("Ledger", 13), ("Safe", 17)] {
        v6.check(expected.get(class) == Some(&n), || format!("table row for {class}"));
    }
    v6.detail = format!("{} classes aligned", corpus.classes.len());
    verdicts.push(v6);

    // 7: byte-identical report.json across invocations and worker counts.
    let mut v7 = Verdict::new(7, "determinism");
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for (i, workers) in [1usize, 4, 4].into_iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let cfg = PipelineConfig { out: Some(out.clone()), ..default_config(SEEDS[0], workers) };
        measure(&cfg).unwrap();
        texts.push(std::fs::read(out.join("report.json")).unwrap());
    }
    v7.check(texts.windows(2).all(|w| w[0] == w[1]), || "report.json differs between invocations".into());
    v7.check(texts[0] == runs[0].1.to_json().into_bytes(), || "report.json differs from the in-memory report".into());
    v7.detail = "3 invocations, workers 1/4/4".into();
    verdicts.push(v7);

    // 8: run manifest and union semantics.
    let mut v8 = Verdict::new(8, "protocol fidelity");
    for (seed, report, artifacts) in &runs {
        for m in &report.manifest {
            v8.check(m.runs.len() == 12, || format!("seed {seed} {}: {} runs", m.class, m.runs.len()));
            let mut per: BTreeMap<(String, FitnessKind), usize> = BTreeMap::new();
            for r in &m.runs {
                *per.entry((r.variant.as_str().to_string(), r.fitness)).or_default() += 1;
            }
            v8.check(per.len() == 6 && per.values().all(|&n| n == 2), || format!("seed {seed} {}: schedule {per:?}", m.class));
            let names: BTreeSet<String> = m.runs.iter().map(|r| r.fitness.to_string()).collect();
            v8.check(
                names == ["combined", "line-branch", "weak-mutation"].iter().map(|s| s.to_string()).collect(),
                || format!("fitness names {names:?}"),
            );
            let seeds: BTreeSet<u64> = m.runs.iter().map(|r| r.seed).collect();
            v8.check(seeds.len() == 12, || format!("seed {seed} {}: duplicate sub-seeds", m.class));
            let a = artifacts.iter().find(|a| a.class == m.class).unwrap();
            let drivers: BTreeSet<&Vec<Action>> = a.run_suites.iter().flat_map(|(_, s)| s.tests.iter().map(|t| &t.driver)).collect();
            v8.check(m.union_size == drivers.len() && a.union.len() == drivers.len(), || {
                format!("seed {seed} {}: union {} vs {} distinct drivers", m.class, m.union_size, drivers.len())
            });
            for (r, (_, s)) in m.runs.iter().zip(&a.run_suites) {
                v8.check(r.suite_size == s.len(), || "run suite size".into());
            }
        }
    }
    v8.detail = format!("{} seeds x {} classes", runs.len(), corpus.classes.len());
    verdicts.push(v8);

    let mut all = true;
    for v in &verdicts {
        all &= v.print();
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn random_driver(p: &testimony_core::frontend::Program, class: &str, rng: &mut ChaCha8Rng) -> Vec<Action> {
    const POOL: [i64; 6] = [-1, 0, 1, 2, 7, 100];
    let c = p.class(class).unwrap();
    let mut pick = |ty| {
        let vs = values_for(ty, &POOL);
        vs[rng.gen_range(0..vs.len())].clone()
    };
    let args = c.constructor.params.iter().map(|x| pick(&x.ty)).collect();
    let mut driver = vec![Action::Construct { var: "o".into(), class: class.into(), args }];
    let methods: Vec<_> = c.methods.iter().filter(|m| m.visibility == Visibility::Public).collect();
    if !methods.is_empty() {
        for k in 0..4 {
            let m = methods[(k * 7 + driver.len()) % methods.len()];
            let args = m.params.iter().map(|x| pick(&x.ty)).collect();
            driver.push(Action::Call { var: "o".into(), method: m.name.clone(), args });
        }
    }
    driver
}

fn expected_totals() -> BTreeMap<String, usize> {
    std::fs::read_to_string(corpus_dir().join("EXPECTED_COUNTS.tsv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let cols: Vec<&str> = l.split('\t').collect();
            (cols[0].to_string(), cols[6].parse().unwrap())
        })
        .collect()
}
