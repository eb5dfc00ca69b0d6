use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ClassArtifacts, PipelineConfig, PipelineError, Variant};
use crate::metrics::{ClassMetrics, Metric};
use crate::testgen::FitnessKind;

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const TIMINGS_JSON: &str = "timings.json";
pub const ORACLE_JSON: &str = "oracle.json";
pub const CLASSES_DIR: &str = "classes";
pub const RUNS_FILE: &str = "runs.json";
pub const RUN_SUITES_DIR: &str = "runs";

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunRecord {
    pub variant: Variant,
    pub fitness: FitnessKind,
    pub run: u32,
    pub seed: u64,
    pub budget_ms: u64,
    pub max_evaluations: u64,
    pub evaluations: u64,
    pub archive_size: usize,
    pub suite_size: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassManifest {
    pub class: String,
    pub file: String,
    pub catalog_digest: String,
    pub n_mutants: usize,
    /// Size of the deduplicated union of all run suites.
    pub union_size: usize,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassFailure {
    pub class: String,
    pub stage: String,
    pub message: String,
}

impl ClassFailure {
    pub fn new(class: &str, stage: &str, e: impl std::fmt::Display) -> Self {
        ClassFailure { class: class.to_string(), stage: stage.to_string(), message: e.to_string() }
    }
}

/// Wall-clock time of one stage; kept out of `report.json`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageTiming {
    pub class: Option<String>,
    pub stage: String,
    pub ms: u64,
}

/// The settings that influence results. Worker count and paths are left out
/// so the report depends only on the corpus and these values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub seed: u64,
    pub budget_ms: u64,
    pub runs_per_fitness: u32,
    pub fitness: Vec<FitnessKind>,
    pub total_runs: usize,
    pub step_budget: u64,
    pub infection: &'static str,
    pub population_size: usize,
    pub tournament_size: usize,
    pub max_calls_per_driver: usize,
    pub int_pool: Vec<i64>,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
}

impl ConfigEcho {
    pub fn new(cfg: &PipelineConfig) -> Self {
        let g = &cfg.generator;
        ConfigEcho {
            seed: cfg.seed,
            budget_ms: cfg.budget_ms,
            runs_per_fitness: cfg.runs_per_fitness,
            fitness: cfg.fitness.clone(),
            total_runs: cfg.total_runs(),
            step_budget: cfg.step_budget,
            infection: "point",
            population_size: g.population_size,
            tournament_size: g.tournament_size,
            max_calls_per_driver: g.max_calls_per_driver,
            int_pool: g.int_pool.clone(),
            mutation_rate: g.mutation_rate,
            crossover_rate: g.crossover_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestabilityReport {
    pub version: String,
    pub config: ConfigEcho,
    pub catalog_digest: String,
    pub classes: Vec<ClassMetrics>,
    pub failures: Vec<ClassFailure>,
    pub manifest: Vec<ClassManifest>,
    #[serde(skip)]
    pub timings: Vec<StageTiming>,
}

impl TestabilityReport {
    pub fn new(cfg: &PipelineConfig) -> Self {
        TestabilityReport {
            version: TOOL_VERSION.to_string(),
            config: ConfigEcho::new(cfg),
            catalog_digest: String::new(),
            classes: Vec::new(),
            failures: Vec::new(),
            manifest: Vec::new(),
            timings: Vec::new(),
        }
    }

    pub fn class(&self, name: &str) -> Option<&ClassMetrics> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        pretty(self)
    }

    pub fn to_csv(&self) -> String {
        let cell = |m: &Metric| m.decimal().unwrap_or_default();
        let exact = |m: &Metric| if m.is_defined() { m.to_string() } else { String::new() };
        let mut out = String::from("name,n_mutants,n_wkill,n_kill,n_wkill_noset,contr,obs,contr_exact,obs_exact\n");
        for c in &self.classes {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                c.name,
                c.n_mutants,
                c.n_wkill,
                c.n_kill,
                c.n_wkill_noset,
                cell(&c.contr),
                cell(&c.obs),
                exact(&c.contr),
                exact(&c.obs)
            )
            .unwrap();
        }
        out
    }

    pub fn timings_json(&self) -> String {
        pretty(&self.timings)
    }
}

pub(crate) fn pretty<T: Serialize + ?Sized>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report values serialize");
    s.push('\n');
    s
}

pub fn class_dir(out: &Path, class: &str) -> PathBuf {
    out.join(CLASSES_DIR).join(class)
}

pub(crate) fn write(path: &Path, contents: &str) -> Result<(), PipelineError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| PipelineError::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| PipelineError::io(path, e))
}

/// Layout:
/// `report.json`, `report.csv`, `timings.json`, and per class under
/// `classes/<Class>/`: `mutants.json`, `suite.json`, `matrix.csv` (union
/// suite on the de-encapsulated program), `matrix_noset.csv` (setter-free
/// tests on the original program), `runs.json`, `runs/<tag>.json`, and
/// optionally `deencap.mo`.
pub fn write_measure_outputs(
    out: &Path,
    report: &TestabilityReport,
    artifacts: &[ClassArtifacts],
    emit_deencap: bool,
) -> Result<(), PipelineError> {
    write(&out.join(REPORT_JSON), &report.to_json())?;
    write(&out.join(REPORT_CSV), &report.to_csv())?;
    write(&out.join(TIMINGS_JSON), &report.timings_json())?;
    for a in artifacts {
        let dir = class_dir(out, &a.class);
        write(&dir.join("mutants.json"), &(a.catalog.to_json() + "\n"))?;
        write(&dir.join("suite.json"), &(a.union.to_json() + "\n"))?;
        write(&dir.join("matrix.csv"), &a.mx_with.to_csv())?;
        write(&dir.join("matrix_noset.csv"), &a.mx_without.to_csv())?;
        write(&dir.join(RUNS_FILE), &pretty(&a.runs))?;
        for (spec, suite) in &a.run_suites {
            write(&dir.join(RUN_SUITES_DIR).join(format!("{}.json", spec.tag())), &(suite.to_json() + "\n"))?;
        }
        if emit_deencap {
            write(&dir.join("deencap.mo"), &a.deencap_source)?;
        }
    }
    Ok(())
}
