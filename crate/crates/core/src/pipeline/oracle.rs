use rayon::prelude::*;
use serde::Serialize;

use super::report::{pretty, write, ORACLE_JSON, TOOL_VERSION};
use super::{Corpus, PipelineConfig, PipelineError};
use crate::analysis::{build_kill_matrix, derive_evidence_sets};
use crate::deencap::synthesize_setters;
use crate::interp::StepBudget;
use crate::metrics::{estimated_metrics, idealistic_metrics, HardnessCriterion, Metric, OracleModeError};
use crate::mutation::generate_mutants;
use crate::testgen::{enumerate_suite, EnumBound, GenError, Subject};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OracleStatus {
    Equal,
    Discrepancy,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdealValues {
    pub testability: Metric,
    pub contr: Metric,
    pub obs: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatedValues {
    pub contr: Metric,
    pub obs: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleClassResult {
    pub class: String,
    pub max_calls: usize,
    pub arg_pool: Vec<i64>,
    pub status: OracleStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub n_tests: usize,
    pub idealistic: Option<IdealValues>,
    pub estimated: Option<EstimatedValues>,
    /// One line per differing value, empty when equal.
    pub discrepancy: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub version: String,
    pub all_equal: bool,
    pub classes: Vec<OracleClassResult>,
}

impl OracleReport {
    pub fn class(&self, name: &str) -> Option<&OracleClassResult> {
        self.classes.iter().find(|c| c.class == name)
    }
}

pub fn oracle_check(cfg: &PipelineConfig) -> Result<OracleReport, PipelineError> {
    cfg.validate()?;
    let corpus = Corpus::load(&cfg.corpus)?;
    let report = oracle_check_corpus(&corpus, cfg)?;
    if let Some(out) = &cfg.out {
        write(&out.join(ORACLE_JSON), &pretty(&report))?;
    }
    Ok(report)
}

/// Compares the estimated metrics over exhaustive suites with the
/// idealistic metrics for every manifest oracle class.
pub fn oracle_check_corpus(corpus: &Corpus, cfg: &PipelineConfig) -> Result<OracleReport, PipelineError> {
    cfg.validate()?;
    let pool = cfg.thread_pool()?;
    let classes: Vec<OracleClassResult> = pool.install(|| {
        corpus
            .manifest
            .oracle
            .par_iter()
            .map(|entry| {
                let max_calls = cfg.oracle_max_calls.unwrap_or(entry.max_calls);
                let arg_pool = cfg.oracle_arg_pool.clone().unwrap_or_else(|| entry.arg_pool.clone());
                let bound = EnumBound { max_calls, arg_pool, allow_setters: true, cap: cfg.enum_cap };
                check_class(corpus, &entry.class, bound, StepBudget(cfg.step_budget))
            })
            .collect()
    });
    Ok(OracleReport {
        version: TOOL_VERSION.to_string(),
        all_equal: classes.iter().all(|c| c.status == OracleStatus::Equal),
        classes,
    })
}

fn check_class(corpus: &Corpus, class: &str, bound: EnumBound, budget: StepBudget) -> OracleClassResult {
    let mut result = OracleClassResult {
        class: class.to_string(),
        max_calls: bound.max_calls,
        arg_pool: bound.arg_pool.clone(),
        status: OracleStatus::Skipped,
        reason: None,
        n_tests: 0,
        idealistic: None,
        estimated: None,
        discrepancy: Vec::new(),
    };
    let p = corpus.program_of(class).expect("manifest classes are checked at load");
    let ideal = match idealistic_metrics(p, class, &bound, HardnessCriterion::default(), budget) {
        Ok(m) => m,
        Err(e) => {
            result.reason = Some(match e {
                OracleModeError::Gen(GenError::EnumerationTooLarge { size, cap }) => {
                    format!("enumeration too large: {size} drivers, cap {cap}")
                }
                other => other.to_string(),
            });
            return result;
        }
    };
    result.n_tests = ideal.n_tests;
    result.idealistic = Some(IdealValues { testability: ideal.testability, contr: ideal.contr, obs: ideal.obs });

    let estimated = (|| {
        let d = synthesize_setters(p);
        let catalog = generate_mutants(&d.program, &d.synthetic_regions).without_synthetic().for_class(class);
        let suite = enumerate_suite(&Subject::deencap(&d), class, &bound, budget).map_err(|e| e.to_string())?;
        let mx_with = build_kill_matrix(&d.program, &catalog, &suite, budget).map_err(|e| e.to_string())?;
        let mx_without =
            build_kill_matrix(p, &catalog, &suite.without_setters(), budget).map_err(|e| e.to_string())?;
        let ev = derive_evidence_sets(&mx_with, &mx_without, &catalog).map_err(|e| e.to_string())?;
        Ok::<_, String>(
            estimated_metrics(&ev, &catalog)
                .into_iter()
                .find(|m| m.name == class)
                .map(|m| EstimatedValues { contr: m.contr, obs: m.obs })
                .unwrap_or(EstimatedValues { contr: Metric::UNDEFINED, obs: Metric::UNDEFINED }),
        )
    })();
    let est = match estimated {
        Ok(e) => e,
        Err(reason) => {
            result.reason = Some(reason);
            return result;
        }
    };
    for (name, i, e) in [("contr", ideal.contr, est.contr), ("obs", ideal.obs, est.obs)] {
        if i != e {
            result.discrepancy.push(format!("{name}: idealistic {i}, estimated {e}"));
        }
    }
    result.status = if result.discrepancy.is_empty() { OracleStatus::Equal } else { OracleStatus::Discrepancy };
    result.estimated = Some(est);
    result
}
