//! Kill matrices and the per-class evidence sets derived from them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::frontend::ast::Program;
use crate::interp::{ContractViolation, Interpreter, Mode, ProbeTable, StepBudget};
use crate::mutation::{apply_mutant, Mutant, MutantCatalog, MutantId};
use crate::testcase::{TestCase, TestSuite};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Status {
    None = 0,
    Weak = 1,
    Killed = 2,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Contract(#[from] ContractViolation),
    #[error("catalog mismatch: {0}")]
    CatalogMismatch(String),
    #[error("internal error: mutant {mutant} is killed by test {test} without being infected")]
    KilledNotInfected { mutant: MutantId, test: usize },
}

/// Rows are mutants (ascending id), columns are tests (suite order).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KillMatrix {
    mutants: Vec<MutantId>,
    uses_setters: Vec<bool>,
    cells: Vec<Status>,
}

impl KillMatrix {
    pub fn mutants(&self) -> &[MutantId] {
        &self.mutants
    }

    pub fn n_tests(&self) -> usize {
        self.uses_setters.len()
    }

    pub fn uses_setters(&self, test: usize) -> bool {
        self.uses_setters[test]
    }

    pub fn row(&self, m: MutantId) -> Option<&[Status]> {
        let r = self.mutants.binary_search(&m).ok()?;
        let n = self.n_tests();
        Some(&self.cells[r * n..(r + 1) * n])
    }

    pub fn status(&self, m: MutantId, test: usize) -> Option<Status> {
        self.row(m).and_then(|r| r.get(test).copied())
    }

    /// Best status of `m` over all tests.
    pub fn best(&self, m: MutantId) -> Status {
        self.row(m).and_then(|r| r.iter().max().copied()).unwrap_or(Status::None)
    }

    /// Rows `mutant,t0,t1,...` with cells 0 (none), 1 (weak), 2 (killed).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mutant");
        for t in 0..self.n_tests() {
            write!(out, ",t{t}").unwrap();
        }
        out.push('\n');
        for m in &self.mutants {
            write!(out, "{}", m.0).unwrap();
            for s in self.row(*m).unwrap() {
                write!(out, ",{}", *s as u8).unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// One probed run per test decides weak status for every mutant; only the
/// infected mutants are then executed to decide strong kills. Synthetic
/// mutants are left out.
pub fn build_kill_matrix(
    p: &Program,
    catalog: &MutantCatalog,
    suite: &TestSuite,
    budget: StepBudget,
) -> Result<KillMatrix, AnalysisError> {
    let rows = catalog.without_synthetic();
    let probes = ProbeTable::new(&rows);
    let it = Interpreter::new(p);
    let columns: Result<Vec<Vec<Status>>, AnalysisError> = suite
        .tests
        .par_iter()
        .map(|t| {
            let base = it.run(t, budget, Mode::Probes(&probes))?;
            rows.mutants()
                .iter()
                .map(|m| {
                    if !base.infected.contains(&m.id) {
                        return Ok(Status::None);
                    }
                    let r = it.run(t, budget, Mode::Mutant(m))?;
                    Ok(if r.outcome.differs(&base.outcome) { Status::Killed } else { Status::Weak })
                })
                .collect()
        })
        .collect();
    Ok(assemble(rows.ids(), suite, columns?))
}

fn assemble(mutants: Vec<MutantId>, suite: &TestSuite, columns: Vec<Vec<Status>>) -> KillMatrix {
    let n = suite.len();
    let mut cells = vec![Status::None; mutants.len() * n];
    for (t, col) in columns.into_iter().enumerate() {
        for (r, s) in col.into_iter().enumerate() {
            cells[r * n + t] = s;
        }
    }
    KillMatrix { mutants, uses_setters: suite.tests.iter().map(|t| t.uses_setters).collect(), cells }
}

/// Reference status of one (mutant, test) pair: materializes the mutant,
/// compares the values observed at its node in both programs, and compares
/// outcomes by unconditional runs.
pub fn naive_status(
    p: &Program,
    catalog: &MutantCatalog,
    m: &Mutant,
    t: &TestCase,
    test_index: usize,
    budget: StepBudget,
) -> Result<Status, AnalysisError> {
    let mutated = apply_mutant(p, catalog, m.id).map_err(|e| AnalysisError::CatalogMismatch(e.to_string()))?;
    let orig = Interpreter::new(p).run(t, budget, Mode::Watch(m.node))?;
    let muta = Interpreter::new(&mutated).run(t, budget, Mode::Watch(m.node))?;
    let infected = orig.watch != muta.watch;
    let killed = muta.outcome.differs(&orig.outcome);
    match (infected, killed) {
        (_, true) if !infected => Err(AnalysisError::KilledNotInfected { mutant: m.id, test: test_index }),
        (_, true) => Ok(Status::Killed),
        (true, false) => Ok(Status::Weak),
        (false, false) => Ok(Status::None),
    }
}

/// Full matrix by unconditional strong runs of every (mutant, test) pair.
/// Slow; used as the exhaustive reference.
pub fn build_full_matrix(
    p: &Program,
    catalog: &MutantCatalog,
    suite: &TestSuite,
    budget: StepBudget,
) -> Result<KillMatrix, AnalysisError> {
    let rows = catalog.without_synthetic();
    let probes = ProbeTable::new(&rows);
    let it = Interpreter::new(p);
    let columns: Result<Vec<Vec<Status>>, AnalysisError> = suite
        .tests
        .par_iter()
        .enumerate()
        .map(|(ti, t)| {
            let base = it.run(t, budget, Mode::Probes(&probes))?;
            rows.mutants()
                .iter()
                .map(|m| {
                    let killed = it.run(t, budget, Mode::Mutant(m))?.outcome.differs(&base.outcome);
                    match (base.infected.contains(&m.id), killed) {
                        (false, true) => Err(AnalysisError::KilledNotInfected { mutant: m.id, test: ti }),
                        (_, true) => Ok(Status::Killed),
                        (true, false) => Ok(Status::Weak),
                        (false, false) => Ok(Status::None),
                    }
                })
                .collect()
        })
        .collect();
    Ok(assemble(rows.ids(), suite, columns?))
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ClassEvidence {
    pub wkill: BTreeSet<MutantId>,
    pub kill: BTreeSet<MutantId>,
    pub wkill_noset: BTreeSet<MutantId>,
    pub hard_d: BTreeSet<MutantId>,
    pub hard_o: BTreeSet<MutantId>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EvidenceSets {
    /// Keyed by owner class; every class with a non-synthetic mutant appears.
    pub classes: BTreeMap<String, ClassEvidence>,
}

/// `mx_with` holds the whole suite on the de-encapsulated program;
/// `mx_without` only setter-free tests on the original program. Both must be
/// indexed by the non-synthetic part of `catalog`.
pub fn derive_evidence_sets(
    mx_with: &KillMatrix,
    mx_without: &KillMatrix,
    catalog: &MutantCatalog,
) -> Result<EvidenceSets, AnalysisError> {
    let rows = catalog.without_synthetic();
    let ids = rows.ids();
    for (name, mx) in [("with-setters", mx_with), ("without-setters", mx_without)] {
        if mx.mutants() != ids.as_slice() {
            return Err(AnalysisError::CatalogMismatch(format!("{name} matrix rows differ from the catalog")));
        }
    }
    if (0..mx_without.n_tests()).any(|t| mx_without.uses_setters(t)) {
        return Err(AnalysisError::CatalogMismatch("without-setters matrix contains a setter test".into()));
    }
    let mut classes: BTreeMap<String, ClassEvidence> = BTreeMap::new();
    for m in rows.mutants() {
        let e = classes.entry(m.owner_class.clone()).or_default();
        let with = mx_with.best(m.id);
        let without = mx_without.best(m.id);
        if with >= Status::Weak || without >= Status::Weak {
            e.wkill.insert(m.id);
        }
        if with == Status::Killed || without == Status::Killed {
            e.kill.insert(m.id);
        }
        if without >= Status::Weak {
            e.wkill_noset.insert(m.id);
        }
    }
    for e in classes.values_mut() {
        e.hard_d = e.wkill.difference(&e.wkill_noset).copied().collect();
        e.hard_o = e.wkill.difference(&e.kill).copied().collect();
    }
    Ok(EvidenceSets { classes })
}
