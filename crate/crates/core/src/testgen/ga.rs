//! Genetic search over drivers with an archive of improving individuals.
//!
//! An individual's fitness is the goal fraction of the archive united with the
//! individual's own goals, so an individual counts as an improvement only if it
//! reaches something the archive has not. Its own goal fraction breaks ties in
//! selection.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{synthesize_with, values_for, ClassApi, FitnessKind, FitnessSpec, GenConfig, GenError, OracleError, Subject};
use crate::frontend::ast::{visit_class, NodeId, NodeRef, StmtKind, Type};
use crate::interp::{Interpreter, Mode, Outcome, ProbeTable};
use crate::mutation::{MutantCatalog, MutantId};
use crate::testcase::{Action, Literal, TestCase, TestSuite};

/// Share of replace mutations that append a public non-void call instead.
const APPEND_OBSERVER_BIAS: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveEntry {
    pub driver: Vec<Action>,
    /// Archive fitness right after this entry was added.
    pub fitness: f64,
    /// 1-based index of the evaluation that produced it.
    pub evaluation: u64,
}

#[derive(Debug, Clone)]
pub struct GenRun {
    pub suite: TestSuite,
    pub archive: Vec<ArchiveEntry>,
    pub evaluations: u64,
}

pub fn generate_suite(
    subject: &Subject<'_>,
    target: &str,
    fit: &FitnessSpec,
    cfg: &GenConfig,
    catalog: &MutantCatalog,
) -> Result<TestSuite, GenError> {
    generate_suite_traced(subject, target, fit, cfg, catalog).map(|r| r.suite)
}

/// Like [`generate_suite`], also returning the archive and evaluation count.
pub fn generate_suite_traced(
    subject: &Subject<'_>,
    target: &str,
    fit: &FitnessSpec,
    cfg: &GenConfig,
    catalog: &MutantCatalog,
) -> Result<GenRun, GenError> {
    cfg.validate()?;
    let api = ClassApi::new(subject, target, cfg.allow_setters)?;
    let goals = Goals::new(subject, &api, fit, catalog);
    let it = Interpreter::new(subject.program);
    let mut search = Search {
        api: &api,
        cfg,
        goals: &goals,
        it: &it,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        cache: HashMap::new(),
        archive_cov: vec![false; goals.cov.len()],
        archive_mut: vec![false; goals.mutants.len()],
        best: goals.union_fitness(&[], &[], &[], &[]),
        archive: Vec::new(),
        evaluations: 0,
    };
    search.run()?;

    let inspectors = api.inspectors();
    let mut tests = Vec::new();
    for entry in &search.archive {
        let mut extended = entry.driver.clone();
        extended.extend(inspectors.iter().map(|m| ClassApi::call(m, Vec::new())));
        let t = match synthesize_with(&it, extended, cfg.step_budget) {
            Err(OracleError::BudgetExhausted) => synthesize_with(&it, entry.driver.clone(), cfg.step_budget),
            other => other,
        };
        match t {
            Ok(t) => tests.push(t),
            Err(OracleError::BudgetExhausted) => {}
            Err(OracleError::Contract(c)) => return Err(c.into()),
        }
    }
    // Extension can make two archived drivers identical; keep the first.
    let suite = TestSuite::union([&TestSuite::new(tests)]);
    Ok(GenRun { suite, archive: search.archive, evaluations: search.evaluations })
}

/// Goal indices for the target class.
struct Goals {
    kind: FitnessKind,
    weights: (f64, f64),
    /// Statement ids and (branch node, taken) edges, as coverage goal keys.
    cov: Vec<CovGoal>,
    cov_index: HashMap<CovGoal, usize>,
    mutants: Vec<MutantId>,
    mut_index: HashMap<MutantId, usize>,
    probes: Option<ProbeTable>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum CovGoal {
    Stmt(NodeId),
    Edge(NodeId, bool),
}

impl Goals {
    fn new(subject: &Subject<'_>, api: &ClassApi<'_>, fit: &FitnessSpec, catalog: &MutantCatalog) -> Self {
        let mut cov = Vec::new();
        visit_class(api.class, &mut |n| {
            if let NodeRef::Stmt(s) = n {
                if subject.is_synthetic(s.id) {
                    return;
                }
                cov.push(CovGoal::Stmt(s.id));
                if matches!(s.kind, StmtKind::If { .. } | StmtKind::While { .. }) {
                    cov.push(CovGoal::Edge(s.id, true));
                    cov.push(CovGoal::Edge(s.id, false));
                }
            }
        });
        let targets = catalog.filter(|m| m.owner_class == api.class.name && !m.synthetic);
        let mutants = targets.ids();
        let needs_probes = fit.kind != FitnessKind::LineBranch;
        Goals {
            kind: fit.kind,
            weights: fit.weights,
            cov_index: cov.iter().enumerate().map(|(i, g)| (*g, i)).collect(),
            cov,
            mut_index: mutants.iter().enumerate().map(|(i, m)| (*m, i)).collect(),
            mutants,
            probes: needs_probes.then(|| ProbeTable::new(&targets)),
        }
    }

    fn union_fitness(&self, a_cov: &[bool], b_cov: &[bool], a_mut: &[bool], b_mut: &[bool]) -> f64 {
        let frac = |n: usize, a: &[bool], b: &[bool]| {
            if n == 0 {
                return 1.0;
            }
            let hit = (0..n).filter(|&i| a.get(i).copied().unwrap_or(false) || b.get(i).copied().unwrap_or(false)).count();
            hit as f64 / n as f64
        };
        let c = frac(self.cov.len(), a_cov, b_cov);
        let m = frac(self.mutants.len(), a_mut, b_mut);
        match self.kind {
            FitnessKind::LineBranch => c,
            FitnessKind::WeakMutation => m,
            FitnessKind::Combined => self.weights.0 * c + self.weights.1 * m,
        }
    }
}

#[derive(Clone)]
struct Evaluated {
    cov: Vec<bool>,
    mutants: Vec<bool>,
    exhausted: bool,
}

#[derive(Clone)]
struct Individual {
    driver: Vec<Action>,
    /// (archive-union fitness at evaluation time, own fitness).
    score: (f64, f64),
}

struct Search<'s, 'p> {
    api: &'s ClassApi<'p>,
    cfg: &'s GenConfig,
    goals: &'s Goals,
    it: &'s Interpreter<'p>,
    rng: ChaCha8Rng,
    cache: HashMap<Vec<Action>, Evaluated>,
    archive_cov: Vec<bool>,
    archive_mut: Vec<bool>,
    best: f64,
    archive: Vec<ArchiveEntry>,
    evaluations: u64,
}

impl Search<'_, '_> {
    fn run(&mut self) -> Result<(), GenError> {
        let max = self.cfg.max_evaluations();
        let mut pop = Vec::with_capacity(self.cfg.population_size);
        for _ in 0..self.cfg.population_size {
            let d = self.random_driver();
            pop.push(self.evaluate(d)?);
        }
        while self.evaluations < max && self.best < 1.0 {
            let elite = pop
                .iter()
                .enumerate()
                .max_by(|(i, a), (j, b)| a.score.partial_cmp(&b.score).unwrap().then(j.cmp(i)))
                .map(|(_, ind)| ind.clone())
                .expect("population is never empty");
            let mut next = vec![elite];
            while next.len() < self.cfg.population_size && self.evaluations < max && self.best < 1.0 {
                let a = self.tournament(&pop);
                let mut child = if self.rng.gen_bool(self.cfg.crossover_rate) {
                    let b = self.tournament(&pop);
                    self.crossover(&pop[a].driver, &pop[b].driver)
                } else {
                    pop[a].driver.clone()
                };
                if self.rng.gen_bool(self.cfg.mutation_rate) {
                    self.mutate(&mut child);
                }
                next.push(self.evaluate(child)?);
            }
            pop = next;
        }
        Ok(())
    }

    fn evaluate(&mut self, driver: Vec<Action>) -> Result<Individual, GenError> {
        self.evaluations += 1;
        let ev = match self.cache.get(&driver) {
            Some(ev) => ev.clone(),
            None => {
                let ev = self.execute(&driver)?;
                self.cache.insert(driver.clone(), ev.clone());
                ev
            }
        };
        let own = self.goals.union_fitness(&ev.cov, &[], &ev.mutants, &[]);
        let union = self.goals.union_fitness(&ev.cov, &self.archive_cov, &ev.mutants, &self.archive_mut);
        if ev.exhausted {
            return Ok(Individual { driver, score: (-1.0, -1.0) });
        }
        if union > self.best {
            self.best = union;
            for (a, b) in self.archive_cov.iter_mut().zip(&ev.cov) {
                *a |= *b;
            }
            for (a, b) in self.archive_mut.iter_mut().zip(&ev.mutants) {
                *a |= *b;
            }
            self.archive.push(ArchiveEntry { driver: driver.clone(), fitness: union, evaluation: self.evaluations });
        }
        Ok(Individual { driver, score: (union, own) })
    }

    fn execute(&self, driver: &[Action]) -> Result<Evaluated, GenError> {
        let t = TestCase::from_driver(driver.to_vec());
        let mode = self.goals.probes.as_ref().map_or(Mode::Plain, Mode::Probes);
        let r = self.it.run(&t, self.cfg.step_budget, mode)?;
        let mut cov = vec![false; self.goals.cov.len()];
        for s in &r.coverage.statements {
            if let Some(&i) = self.goals.cov_index.get(&CovGoal::Stmt(*s)) {
                cov[i] = true;
            }
        }
        for (b, taken) in &r.coverage.branches {
            if let Some(&i) = self.goals.cov_index.get(&CovGoal::Edge(*b, *taken)) {
                cov[i] = true;
            }
        }
        let mut mutants = vec![false; self.goals.mutants.len()];
        for m in &r.infected {
            if let Some(&i) = self.goals.mut_index.get(m) {
                mutants[i] = true;
            }
        }
        Ok(Evaluated { cov, mutants, exhausted: r.outcome == Outcome::BudgetExhausted })
    }

    fn tournament(&mut self, pop: &[Individual]) -> usize {
        let mut best = self.rng.gen_range(0..pop.len());
        for _ in 1..self.cfg.tournament_size {
            let c = self.rng.gen_range(0..pop.len());
            if pop[c].score > pop[best].score {
                best = c;
            }
        }
        best
    }

    fn crossover(&mut self, a: &[Action], b: &[Action]) -> Vec<Action> {
        let cut_a = self.rng.gen_range(1..=a.len());
        let cut_b = self.rng.gen_range(1..=b.len());
        let mut child: Vec<Action> = a[..cut_a].iter().chain(&b[cut_b..]).cloned().collect();
        child.truncate(1 + self.cfg.max_calls_per_driver);
        child
    }

    fn mutate(&mut self, d: &mut Vec<Action>) {
        let calls = d.len() - 1;
        let room = calls < self.cfg.max_calls_per_driver;
        match self.rng.gen_range(0..4) {
            0 if room => {
                if let Some(a) = self.random_call() {
                    let at = self.rng.gen_range(1..=d.len());
                    d.insert(at, a);
                }
            }
            1 if calls > 0 => {
                let at = self.rng.gen_range(1..d.len());
                d.remove(at);
            }
            3 => self.perturb(d),
            _ => {
                if self.rng.gen_bool(APPEND_OBSERVER_BIAS) {
                    if let Some(a) = self.random_observer_call() {
                        if room {
                            d.push(a);
                        } else {
                            *d.last_mut().expect("drivers start with a constructor") = a;
                        }
                        return;
                    }
                }
                let at = self.rng.gen_range(0..d.len());
                if at == 0 {
                    d[0] = self.random_construct();
                } else if let Some(a) = self.random_call() {
                    d[at] = a;
                }
            }
        }
    }

    fn perturb(&mut self, d: &mut [Action]) {
        let slots: Vec<(usize, usize)> = d
            .iter()
            .enumerate()
            .flat_map(|(i, a)| {
                let n = match a {
                    Action::Construct { args, .. } | Action::Call { args, .. } => args.len(),
                    Action::SetterCall { .. } => 1,
                };
                (0..n).map(move |j| (i, j))
            })
            .collect();
        if slots.is_empty() {
            return;
        }
        let (i, j) = slots[self.rng.gen_range(0..slots.len())];
        let ty = self.param_type(&d[i], j);
        let v = self.random_value(&ty);
        match &mut d[i] {
            Action::Construct { args, .. } | Action::Call { args, .. } => args[j] = v,
            Action::SetterCall { value, .. } => *value = v,
        }
    }

    fn param_type(&self, a: &Action, j: usize) -> Type {
        match a {
            Action::Construct { .. } => self.api.class.constructor.params[j].ty.clone(),
            Action::Call { method, .. } => {
                let m = self.api.methods.iter().find(|m| &m.name == method).expect("generated call");
                m.params[j].ty.clone()
            }
            Action::SetterCall { field, .. } => {
                self.api.setters.iter().find(|s| &s.field == field).expect("generated setter").ty.clone()
            }
        }
    }

    fn random_value(&mut self, ty: &Type) -> Literal {
        let vals = values_for(ty, &self.cfg.int_pool);
        vals[self.rng.gen_range(0..vals.len())].clone()
    }

    fn random_args(&mut self, params: &[Type]) -> Vec<Literal> {
        params.iter().map(|t| self.random_value(t)).collect()
    }

    fn random_construct(&mut self) -> Action {
        let params: Vec<Type> = self.api.class.constructor.params.iter().map(|p| p.ty.clone()).collect();
        let args = self.random_args(&params);
        self.api.construct(args)
    }

    fn random_call(&mut self) -> Option<Action> {
        let n = self.api.methods.len() + self.api.setters.len();
        if n == 0 {
            return None;
        }
        let i = self.rng.gen_range(0..n);
        if i < self.api.methods.len() {
            let m = self.api.methods[i];
            let params: Vec<Type> = m.params.iter().map(|p| p.ty.clone()).collect();
            let args = self.random_args(&params);
            Some(ClassApi::call(m, args))
        } else {
            let s = &self.api.setters[i - self.api.methods.len()];
            let ty = s.ty.clone();
            let v = self.random_value(&ty);
            Some(ClassApi::setter_call(&self.api.setters[i - self.api.methods.len()], v))
        }
    }

    fn random_observer_call(&mut self) -> Option<Action> {
        let observers: Vec<_> = self.api.methods.iter().copied().filter(|m| m.ret != Type::Void).collect();
        if observers.is_empty() {
            return None;
        }
        let m = observers[self.rng.gen_range(0..observers.len())];
        let params: Vec<Type> = m.params.iter().map(|p| p.ty.clone()).collect();
        let args = self.random_args(&params);
        Some(ClassApi::call(m, args))
    }

    fn random_driver(&mut self) -> Vec<Action> {
        let mut d = vec![self.random_construct()];
        let calls = self.rng.gen_range(1..=self.cfg.max_calls_per_driver);
        for _ in 0..calls {
            match self.random_call() {
                Some(a) => d.push(a),
                None => break,
            }
        }
        d
    }
}
