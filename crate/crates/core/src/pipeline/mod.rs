//! The measurement protocol over a corpus: de-encapsulation, mutant
//! catalogs, the generation schedule, kill matrices, and metrics.

pub mod corpus;
pub mod oracle;
pub mod report;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::analysis::{build_kill_matrix, derive_evidence_sets, KillMatrix};
use crate::deencap::synthesize_setters;
use crate::frontend::render;
use crate::interp::StepBudget;
use crate::metrics::{estimated_metrics, ClassMetrics, Metric};
use crate::mutation::{generate_mutants, MutantCatalog};
use crate::testcase::TestSuite;
use crate::testgen::{generate_suite_traced, FitnessKind, FitnessSpec, GenConfig, Subject, DEFAULT_ENUM_CAP};

pub use corpus::{Corpus, CorpusError, Manifest, OracleEntry};
pub use oracle::{oracle_check, oracle_check_corpus, OracleClassResult, OracleReport, OracleStatus};
pub use report::{ClassFailure, ClassManifest, ConfigEcho, RunRecord, StageTiming, TestabilityReport};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub budget_ms: u64,
    pub runs_per_fitness: u32,
    pub fitness: Vec<FitnessKind>,
    pub step_budget: u64,
    pub workers: usize,
    /// Template for every generation run; seed, budget and setter access are
    /// overwritten per run.
    pub generator: GenConfig,
    /// Oracle mode: overrides the manifest bounds for every class when set.
    pub oracle_max_calls: Option<usize>,
    pub oracle_arg_pool: Option<Vec<i64>>,
    pub enum_cap: u64,
    /// Reuse the per-run suites persisted under this output directory.
    pub from_suites: Option<PathBuf>,
    pub emit_deencap: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            corpus: PathBuf::from("corpus"),
            out: None,
            seed: 0,
            budget_ms: 5000,
            runs_per_fitness: 2,
            fitness: FitnessKind::ALL.to_vec(),
            step_budget: StepBudget::default().0,
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            generator: GenConfig::default(),
            oracle_max_calls: None,
            oracle_arg_pool: None,
            enum_cap: DEFAULT_ENUM_CAP,
            from_suites: None,
            emit_deencap: false,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.runs_per_fitness == 0 {
            return bad("runs_per_fitness must be at least 1");
        }
        if self.fitness.is_empty() {
            return bad("the fitness list must not be empty");
        }
        let mut seen = self.fitness.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != self.fitness.len() {
            return bad("the fitness list has duplicates");
        }
        if self.budget_ms == 0 {
            return bad("budget_ms must be positive");
        }
        if self.step_budget == 0 {
            return bad("step_budget must be positive");
        }
        if self.workers == 0 {
            return bad("workers must be at least 1");
        }
        if self.oracle_max_calls == Some(0) {
            return bad("max_calls must be at least 1");
        }
        if self.oracle_arg_pool.as_ref().is_some_and(|p| p.is_empty()) {
            return bad("arg_pool must not be empty");
        }
        self.run_config(0, false).validate().map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// `runs_per_fitness × |fitness| × 2`.
    pub fn total_runs(&self) -> usize {
        self.runs_per_fitness as usize * self.fitness.len() * 2
    }

    fn run_config(&self, seed: u64, allow_setters: bool) -> GenConfig {
        GenConfig {
            seed,
            time_budget_ms: self.budget_ms,
            allow_setters,
            step_budget: StepBudget(self.step_budget),
            ..self.generator.clone()
        }
    }

    pub(crate) fn thread_pool(&self) -> Result<rayon::ThreadPool, PipelineError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .stack_size(16 << 20)
            .build()
            .map_err(|e| PipelineError::Config(format!("cannot start workers: {e}")))
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("stored suites: {0}")]
    Stored(String),
}

impl PipelineError {
    pub(crate) fn io(path: &Path, e: impl fmt::Display) -> Self {
        PipelineError::Io { path: path.to_path_buf(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Original,
    Deencap,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Deencap => "deencap",
        }
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one generation run. The fitness index is the kind's position in
/// [`FitnessKind::ALL`], so restricting the fitness list keeps the other
/// runs' seeds.
pub fn sub_seed(seed: u64, class: &str, variant: Variant, fitness: FitnessKind, run: u32) -> u64 {
    let fitness_index = FitnessKind::ALL.iter().position(|k| *k == fitness).expect("known fitness") as u64;
    [fnv1a64(class.as_bytes()), variant as u64, fitness_index, run as u64]
        .into_iter()
        .fold(splitmix64(seed), |h, part| splitmix64(h ^ part))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSpec {
    pub variant: Variant,
    pub fitness: FitnessKind,
    pub run: u32,
}

impl RunSpec {
    pub fn tag(&self) -> String {
        format!("{}-{}-{}", self.variant.as_str(), self.fitness, self.run)
    }
}

/// Runs in canonical order: variant, then configured fitness order, then run.
pub fn schedule(cfg: &PipelineConfig) -> Vec<RunSpec> {
    let mut out = Vec::with_capacity(cfg.total_runs());
    for variant in [Variant::Original, Variant::Deencap] {
        for &fitness in &cfg.fitness {
            for run in 0..cfg.runs_per_fitness {
                out.push(RunSpec { variant, fitness, run });
            }
        }
    }
    out
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Everything computed for one class, kept for persistence.
#[derive(Debug, Clone)]
pub struct ClassArtifacts {
    pub class: String,
    pub catalog: MutantCatalog,
    pub run_suites: Vec<(RunSpec, TestSuite)>,
    pub runs: Vec<RunRecord>,
    pub union: TestSuite,
    pub mx_with: KillMatrix,
    pub mx_without: KillMatrix,
    pub deencap_source: String,
}

struct ClassResult {
    manifest: ClassManifest,
    outcome: Result<(ClassMetrics, ClassArtifacts), ClassFailure>,
    timings: Vec<StageTiming>,
}

/// Loads the corpus named by `cfg`, measures it, and writes the outputs when
/// an output directory is configured.
pub fn measure(cfg: &PipelineConfig) -> Result<TestabilityReport, PipelineError> {
    cfg.validate()?;
    let corpus = Corpus::load(&cfg.corpus)?;
    let (report, artifacts) = measure_corpus(&corpus, cfg)?;
    if let Some(out) = &cfg.out {
        report::write_measure_outputs(out, &report, &artifacts, cfg.emit_deencap)?;
    }
    Ok(report)
}

pub fn measure_corpus(
    corpus: &Corpus,
    cfg: &PipelineConfig,
) -> Result<(TestabilityReport, Vec<ClassArtifacts>), PipelineError> {
    cfg.validate()?;
    let started = Instant::now();
    let pool = cfg.thread_pool()?;
    let classes: Vec<&String> = corpus.classes.keys().collect();
    let results: Vec<Result<ClassResult, PipelineError>> =
        pool.install(|| classes.par_iter().map(|c| measure_class(corpus, c, cfg)).collect());

    let mut report = TestabilityReport::new(cfg);
    let mut artifacts = Vec::new();
    let mut digests = String::new();
    for r in results {
        let r = r?;
        digests.push_str(&r.manifest.catalog_digest);
        report.manifest.push(r.manifest);
        report.timings.extend(r.timings);
        match r.outcome {
            Ok((m, a)) => {
                report.classes.push(m);
                artifacts.push(a);
            }
            Err(f) => report.failures.push(f),
        }
    }
    report.catalog_digest = sha256_hex(digests.as_bytes());
    report.timings.push(StageTiming { class: None, stage: "total".into(), ms: started.elapsed().as_millis() as u64 });
    Ok((report, artifacts))
}

fn measure_class(corpus: &Corpus, class: &str, cfg: &PipelineConfig) -> Result<ClassResult, PipelineError> {
    let file = corpus.file_of(class).expect("class from the corpus index");
    let p = &file.program;
    let mut timings = Vec::new();
    let mut clock = Instant::now();
    let mut lap = |stage: &str, timings: &mut Vec<StageTiming>| {
        let ms = clock.elapsed().as_millis() as u64;
        timings.push(StageTiming { class: Some(class.to_string()), stage: stage.to_string(), ms });
        clock = Instant::now();
    };

    let d = synthesize_setters(p);
    let catalog = generate_mutants(&d.program, &d.synthetic_regions).without_synthetic().for_class(class);
    let mut manifest = ClassManifest {
        class: class.to_string(),
        file: file.name.clone(),
        catalog_digest: sha256_hex(catalog.to_json().as_bytes()),
        n_mutants: catalog.len(),
        union_size: 0,
        runs: Vec::new(),
    };
    lap("catalog", &mut timings);

    let specs = schedule(cfg);
    let generated: Result<Vec<(RunRecord, TestSuite)>, ClassFailure> = match &cfg.from_suites {
        Some(dir) => Ok(load_runs(dir, class, cfg, &specs)?),
        None => specs
            .par_iter()
            .map(|spec| {
                let seed = sub_seed(cfg.seed, class, spec.variant, spec.fitness, spec.run);
                let allow = spec.variant == Variant::Deencap;
                let gen = cfg.run_config(seed, allow);
                let subject = if allow { Subject::deencap(&d) } else { Subject::original(p) };
                let run = generate_suite_traced(&subject, class, &FitnessSpec::new(spec.fitness), &gen, &catalog)
                    .map_err(|e| ClassFailure::new(class, "generate", e))?;
                let mut suite = run.suite;
                for t in &mut suite.tests {
                    t.origin = Some(spec.tag());
                }
                let record = RunRecord {
                    variant: spec.variant,
                    fitness: spec.fitness,
                    run: spec.run,
                    seed,
                    budget_ms: cfg.budget_ms,
                    max_evaluations: gen.max_evaluations(),
                    evaluations: run.evaluations,
                    archive_size: run.archive.len(),
                    suite_size: suite.len(),
                };
                Ok((record, suite))
            })
            .collect(),
    };
    lap("generate", &mut timings);
    let generated = match generated {
        Ok(g) => g,
        Err(f) => return Ok(ClassResult { manifest, outcome: Err(f), timings }),
    };
    manifest.runs = generated.iter().map(|(r, _)| r.clone()).collect();
    let union = TestSuite::union(generated.iter().map(|(_, s)| s));
    manifest.union_size = union.len();

    let budget = StepBudget(cfg.step_budget);
    let analysed = (|| {
        let mx_with = build_kill_matrix(&d.program, &catalog, &union, budget)?;
        let mx_without = build_kill_matrix(p, &catalog, &union.without_setters(), budget)?;
        let ev = derive_evidence_sets(&mx_with, &mx_without, &catalog)?;
        Ok::<_, crate::analysis::AnalysisError>((mx_with, mx_without, ev))
    })();
    lap("analyse", &mut timings);
    let (mx_with, mx_without, ev) = match analysed {
        Ok(x) => x,
        Err(e) => return Ok(ClassResult { manifest, outcome: Err(ClassFailure::new(class, "analyse", e)), timings }),
    };
    let metrics = estimated_metrics(&ev, &catalog).into_iter().find(|m| m.name == class).unwrap_or_else(|| ClassMetrics {
        name: class.to_string(),
        n_mutants: 0,
        n_wkill: 0,
        n_kill: 0,
        n_wkill_noset: 0,
        contr: Metric::UNDEFINED,
        obs: Metric::UNDEFINED,
        hard_d: Vec::new(),
        hard_o: Vec::new(),
    });
    let artifacts = ClassArtifacts {
        class: class.to_string(),
        catalog,
        run_suites: specs.iter().copied().zip(generated.into_iter().map(|(_, s)| s)).collect(),
        runs: manifest.runs.clone(),
        union,
        mx_with,
        mx_without,
        deencap_source: render(&d.program),
    };
    Ok(ClassResult { manifest, outcome: Ok((metrics, artifacts)), timings })
}

/// Reads the run records and per-run suites written by an earlier `measure`
/// and checks that they match the configured schedule.
fn load_runs(
    dir: &Path,
    class: &str,
    cfg: &PipelineConfig,
    specs: &[RunSpec],
) -> Result<Vec<(RunRecord, TestSuite)>, PipelineError> {
    let class_dir = report::class_dir(dir, class);
    let runs_path = class_dir.join(report::RUNS_FILE);
    let text = fs::read_to_string(&runs_path).map_err(|e| PipelineError::io(&runs_path, e))?;
    let records: Vec<RunRecord> =
        serde_json::from_str(&text).map_err(|e| PipelineError::Stored(format!("{}: {e}", runs_path.display())))?;
    let expected: Vec<(Variant, FitnessKind, u32, u64)> = specs
        .iter()
        .map(|s| (s.variant, s.fitness, s.run, sub_seed(cfg.seed, class, s.variant, s.fitness, s.run)))
        .collect();
    let found: Vec<(Variant, FitnessKind, u32, u64)> =
        records.iter().map(|r| (r.variant, r.fitness, r.run, r.seed)).collect();
    if expected != found {
        return Err(PipelineError::Stored(format!("{class}: stored runs do not match the configured schedule")));
    }
    let mut out = Vec::new();
    for (spec, record) in specs.iter().zip(records) {
        let path = class_dir.join(report::RUN_SUITES_DIR).join(format!("{}.json", spec.tag()));
        let text = fs::read_to_string(&path).map_err(|e| PipelineError::io(&path, e))?;
        let suite =
            TestSuite::from_json(&text).map_err(|e| PipelineError::Stored(format!("{}: {e}", path.display())))?;
        out.push((record, suite));
    }
    Ok(out)
}

/// Per-class sub-seeds for the whole schedule, keyed by run tag.
pub fn schedule_seeds(cfg: &PipelineConfig, class: &str) -> BTreeMap<String, u64> {
    schedule(cfg).iter().map(|s| (s.tag(), sub_seed(cfg.seed, class, s.variant, s.fitness, s.run))).collect()
}

#[cfg(test)]
mod tests;
