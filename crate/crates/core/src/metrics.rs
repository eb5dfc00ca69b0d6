//! Estimated controllability and observability, plus the exact idealistic
//! metrics over an exhaustively enumerated test space.

use std::collections::BTreeSet;
use std::fmt;

use num_rational::Ratio;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::analysis::{build_full_matrix, AnalysisError, EvidenceSets, Status};
use crate::deencap::synthesize_setters;
use crate::frontend::ast::Program;
use crate::interp::StepBudget;
use crate::mutation::{generate_mutants, MutantCatalog, MutantId};
use crate::testcase::TestCase;
use crate::testgen::{enumerate_suite, EnumBound, GenError, Subject};

/// An exact ratio in [0, 1], or `None` when there is no evidence to divide by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Metric(pub Option<Ratio<u64>>);

impl Metric {
    pub const UNDEFINED: Metric = Metric(None);
    pub const UNDEFINED_REASON: &'static str = "insufficient-evidence";

    pub fn ratio(num: u64, den: u64) -> Metric {
        if den == 0 {
            Metric::UNDEFINED
        } else {
            Metric(Some(Ratio::new(num, den)))
        }
    }

    pub fn is_defined(&self) -> bool {
        self.0.is_some()
    }

    /// Four decimal places, rounded half up.
    pub fn decimal(&self) -> Option<String> {
        self.0.map(|r| decimal4(*r.numer(), *r.denom()))
    }
}

fn decimal4(num: u64, den: u64) -> String {
    let scaled = (num as u128 * 20_000 + den as u128) / (2 * den as u128);
    format!("{}.{:04}", scaled / 10_000, scaled % 10_000)
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            None => f.write_str("UNDEFINED"),
        }
    }
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            None => s.serialize_none(),
            Some(r) => {
                let mut st = s.serialize_struct("Metric", 3)?;
                st.serialize_field("num", r.numer())?;
                st.serialize_field("den", r.denom())?;
                st.serialize_field("decimal", &decimal4(*r.numer(), *r.denom()))?;
                st.end()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassMetrics {
    pub name: String,
    pub n_mutants: usize,
    pub n_wkill: usize,
    pub n_kill: usize,
    pub n_wkill_noset: usize,
    pub contr: Metric,
    pub obs: Metric,
    pub hard_d: Vec<MutantId>,
    pub hard_o: Vec<MutantId>,
}

/// One entry per class owning a non-synthetic mutant, ordered by name.
pub fn estimated_metrics(ev: &EvidenceSets, catalog: &MutantCatalog) -> Vec<ClassMetrics> {
    let rows = catalog.without_synthetic();
    rows.class_index()
        .iter()
        .map(|(class, ids)| {
            let e = ev.classes.get(class).cloned().unwrap_or_default();
            let n_wkill = e.wkill.len() as u64;
            ClassMetrics {
                name: class.clone(),
                n_mutants: ids.len(),
                n_wkill: e.wkill.len(),
                n_kill: e.kill.len(),
                n_wkill_noset: e.wkill_noset.len(),
                contr: Metric::ratio(e.wkill_noset.len() as u64, n_wkill),
                obs: Metric::ratio(e.kill.len() as u64, n_wkill),
                hard_d: e.hard_d.into_iter().collect(),
                hard_o: e.hard_o.into_iter().collect(),
            }
        })
        .collect()
}

/// Decides which test drivers count as hard to find. Hard oracles are not a
/// predicate on tests: a mutant is hard to observe when no test kills it.
#[derive(Clone, Copy)]
pub struct HardnessCriterion {
    pub hard_d: fn(&TestCase) -> bool,
}

impl Default for HardnessCriterion {
    fn default() -> Self {
        HardnessCriterion { hard_d: |t| t.uses_setters }
    }
}

impl fmt::Debug for HardnessCriterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HardnessCriterion").finish_non_exhaustive()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IdealisticMetrics {
    pub class: String,
    pub n_tests: usize,
    /// Mutants executed by at least one enumerated test.
    pub executable: BTreeSet<MutantId>,
    pub revealable: BTreeSet<MutantId>,
    pub hard_d: BTreeSet<MutantId>,
    pub hard_o: BTreeSet<MutantId>,
    pub testability: Metric,
    pub contr: Metric,
    pub obs: Metric,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleModeError {
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

/// Exact metrics for `target` over every driver within `bound`, judged by
/// unconditional runs of every (mutant, test) pair. Setter tests run on the
/// de-encapsulated program.
pub fn idealistic_metrics(
    p: &Program,
    target: &str,
    bound: &EnumBound,
    hc: HardnessCriterion,
    budget: StepBudget,
) -> Result<IdealisticMetrics, OracleModeError> {
    let d = synthesize_setters(p);
    let catalog = generate_mutants(&d.program, &d.synthetic_regions).without_synthetic().for_class(target);
    let suite = enumerate_suite(&Subject::deencap(&d), target, bound, budget)?;
    let mx = build_full_matrix(&d.program, &catalog, &suite, budget)?;

    let mut executable = BTreeSet::new();
    let mut revealable = BTreeSet::new();
    let mut hard_d = BTreeSet::new();
    for &m in mx.mutants() {
        let row = mx.row(m).expect("row for every catalog mutant");
        let exec: Vec<usize> = (0..row.len()).filter(|&t| row[t] >= Status::Weak).collect();
        if exec.is_empty() {
            continue;
        }
        executable.insert(m);
        if row.contains(&Status::Killed) {
            revealable.insert(m);
        }
        if exec.iter().all(|&t| (hc.hard_d)(&suite.tests[t])) {
            hard_d.insert(m);
        }
    }
    let hard_o: BTreeSet<MutantId> = executable.difference(&revealable).copied().collect();
    let hard: BTreeSet<MutantId> = hard_d.union(&hard_o).copied().collect();
    let n = executable.len() as u64;
    Ok(IdealisticMetrics {
        class: target.to_string(),
        n_tests: suite.len(),
        testability: Metric::ratio(n - hard.len() as u64, n),
        contr: Metric::ratio(n - hard_d.len() as u64, n),
        obs: Metric::ratio(n - hard_o.len() as u64, n),
        executable,
        revealable,
        hard_d,
        hard_o,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::ClassEvidence;
    use crate::frontend::parse;
    use crate::mutation::{Mutant, Operator, Payload};

    fn ids(xs: &[u32]) -> BTreeSet<MutantId> {
        xs.iter().map(|&x| MutantId(x)).collect()
    }

    fn toy_catalog(n: u32) -> MutantCatalog {
        MutantCatalog::from_mutants(
            (1..=n)
                .map(|i| Mutant {
                    id: MutantId(i),
                    node: crate::frontend::ast::NodeId(i),
                    operator: Operator::LVR,
                    payload: Payload::Int(0),
                    owner_class: "C".into(),
                    method: "f".into(),
                    line: 1,
                    synthetic: false,
                    original: "1".into(),
                })
                .collect(),
        )
    }

    #[test]
    fn direct_ratios() {
        let mut ev = EvidenceSets::default();
        ev.classes.insert(
            "C".into(),
            ClassEvidence {
                wkill: ids(&[1, 2, 3, 4]),
                kill: ids(&[1]),
                wkill_noset: ids(&[1, 2]),
                hard_d: ids(&[3, 4]),
                hard_o: ids(&[2, 3, 4]),
            },
        );
        let m = &estimated_metrics(&ev, &toy_catalog(4))[0];
        assert_eq!(m.contr, Metric::ratio(1, 2));
        assert_eq!(m.obs, Metric::ratio(1, 4));
        assert_eq!(m.contr.decimal().as_deref(), Some("0.5000"));
        assert_eq!(m.obs.decimal().as_deref(), Some("0.2500"));
    }

    #[test]
    fn no_evidence_is_undefined() {
        let m = &estimated_metrics(&EvidenceSets::default(), &toy_catalog(3))[0];
        assert_eq!((m.n_mutants, m.n_wkill), (3, 0));
        assert_eq!(m.contr, Metric::UNDEFINED);
        assert_eq!(m.obs, Metric::UNDEFINED);
        assert_eq!(serde_json::to_string(&m.obs).unwrap(), "null");
    }

    #[test]
    fn decimal_rendering() {
        assert_eq!(decimal4(5, 13), "0.3846");
        assert_eq!(decimal4(1, 1), "1.0000");
        assert_eq!(decimal4(0, 7), "0.0000");
        assert_eq!(decimal4(1, 3), "0.3333");
        assert_eq!(decimal4(2, 3), "0.6667");
        assert_eq!(decimal4(1, 20_000), "0.0001");
        assert_eq!(serde_json::to_string(&Metric::ratio(10, 26)).unwrap(), r#"{"num":5,"den":13,"decimal":"0.3846"}"#);
    }

    #[test]
    fn idealistic_known_values() {
        let counter = parse(include_str!("../../../corpus/Counter.mo")).unwrap();
        let c = idealistic_metrics(
            &counter,
            "Counter",
            &EnumBound::new(3, vec![0, 1], true),
            HardnessCriterion::default(),
            StepBudget::default(),
        )
        .unwrap();
        assert_eq!((c.testability, c.contr, c.obs), (Metric::ratio(1, 1), Metric::ratio(1, 1), Metric::ratio(1, 1)));

        let ledger = parse(include_str!("../../../corpus/Ledger.mo")).unwrap();
        let l = idealistic_metrics(
            &ledger,
            "Ledger",
            &EnumBound::new(3, vec![-1, 1], true),
            HardnessCriterion::default(),
            StepBudget::default(),
        )
        .unwrap();
        assert_eq!(l.contr, Metric::ratio(1, 1));
        assert_eq!(l.obs, Metric::ratio(5, 13));
        assert_eq!(l.testability, Metric::ratio(5, 13));
    }

    #[test]
    fn idealistic_without_mutants_is_undefined() {
        let p = parse("class E { E() { } public void f() { } }").unwrap();
        let m =
            idealistic_metrics(&p, "E", &EnumBound::new(3, vec![0], true), HardnessCriterion::default(), StepBudget::default())
                .unwrap();
        assert!(m.executable.is_empty());
        assert_eq!((m.testability, m.contr, m.obs), (Metric::UNDEFINED, Metric::UNDEFINED, Metric::UNDEFINED));
    }
}
