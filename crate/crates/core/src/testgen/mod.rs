//! Test generation: seeded genetic search, exhaustive enumeration, and
//! assertion synthesis from observed outputs.

mod ga;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::deencap::DeencapResult;
use crate::frontend::ast::{ClassDecl, MethodDecl, NodeId, Program, Type, Visibility};
use crate::interp::{ContractViolation, Interpreter, Mode, Outcome, StepBudget};
use crate::testcase::{Action, AssertEq, Expectation, Literal, Oracle, TestCase, TestSuite};

pub use ga::{generate_suite, generate_suite_traced, ArchiveEntry, GenRun};

/// Deterministic stand-in for wall-clock time: fitness evaluations allowed per
/// millisecond of configured budget.
pub const EVALS_PER_MS: u64 = 2;

pub const DEFAULT_ENUM_CAP: u64 = 200_000;

/// Variable name used by generated drivers.
pub const DRIVER_VAR: &str = "o";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitnessKind {
    LineBranch,
    WeakMutation,
    Combined,
}

impl FitnessKind {
    pub const ALL: [FitnessKind; 3] = [FitnessKind::LineBranch, FitnessKind::WeakMutation, FitnessKind::Combined];

    pub fn as_str(self) -> &'static str {
        match self {
            FitnessKind::LineBranch => "line-branch",
            FitnessKind::WeakMutation => "weak-mutation",
            FitnessKind::Combined => "combined",
        }
    }
}

impl fmt::Display for FitnessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FitnessKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        FitnessKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown fitness `{s}` (expected line-branch, weak-mutation, or combined)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitnessSpec {
    pub kind: FitnessKind,
    /// Weights of the coverage and mutation scores; used by `combined` only.
    pub weights: (f64, f64),
}

impl FitnessSpec {
    pub fn new(kind: FitnessKind) -> Self {
        FitnessSpec { kind, weights: (0.5, 0.5) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenConfig {
    pub seed: u64,
    pub time_budget_ms: u64,
    pub population_size: usize,
    pub tournament_size: usize,
    /// Calls after the constructor.
    pub max_calls_per_driver: usize,
    pub int_pool: Vec<i64>,
    pub mutation_rate: f64,
    pub crossover_rate: f64,
    pub allow_setters: bool,
    pub step_budget: StepBudget,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            time_budget_ms: 5000,
            population_size: 32,
            tournament_size: 4,
            max_calls_per_driver: 6,
            int_pool: vec![-2, -1, 0, 1, 2, 3, 10, 100],
            mutation_rate: 0.3,
            crossover_rate: 0.7,
            allow_setters: false,
            step_budget: StepBudget::default(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidConfig(m.to_string()));
        if self.population_size < 2 {
            return bad("population_size must be at least 2");
        }
        if self.tournament_size == 0 || self.tournament_size > self.population_size {
            return bad("tournament_size must be in 1..=population_size");
        }
        if self.max_calls_per_driver == 0 {
            return bad("max_calls_per_driver must be positive");
        }
        if self.int_pool.is_empty() {
            return bad("int_pool must not be empty");
        }
        for (name, r) in [("mutation_rate", self.mutation_rate), ("crossover_rate", self.crossover_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(GenError::InvalidConfig(format!("{name} must be in [0, 1]")));
            }
        }
        if self.time_budget_ms == 0 || self.step_budget.0 == 0 {
            return bad("budgets must be positive");
        }
        Ok(())
    }

    pub fn max_evaluations(&self) -> u64 {
        self.time_budget_ms.saturating_mul(EVALS_PER_MS).max(self.population_size as u64)
    }
}

/// Bounds for exhaustive enumeration. `max_calls` counts the constructor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EnumBound {
    pub max_calls: usize,
    pub arg_pool: Vec<i64>,
    pub allow_setters: bool,
    pub cap: u64,
}

impl EnumBound {
    pub fn new(max_calls: usize, arg_pool: Vec<i64>, allow_setters: bool) -> Self {
        EnumBound { max_calls, arg_pool, allow_setters, cap: DEFAULT_ENUM_CAP }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("class `{0}` not found")]
    TargetNotFound(String),
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("enumeration would produce {size} drivers, above the cap of {cap}")]
    EnumerationTooLarge { size: u64, cap: u64 },
    #[error(transparent)]
    Contract(#[from] ContractViolation),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("the driver exhausts the step budget on the original program")]
    BudgetExhausted,
    #[error(transparent)]
    Contract(#[from] ContractViolation),
}

/// A program under test, plus what is known about its synthesized setters.
#[derive(Debug, Clone, Copy)]
pub struct Subject<'a> {
    pub program: &'a Program,
    /// (class, field) → setter name; `None` for an original program.
    pub setters: Option<&'a BTreeMap<(String, String), String>>,
    pub synthetic: Option<&'a BTreeSet<NodeId>>,
}

impl<'a> Subject<'a> {
    pub fn original(program: &'a Program) -> Self {
        Subject { program, setters: None, synthetic: None }
    }

    pub fn deencap(d: &'a DeencapResult) -> Self {
        Subject { program: &d.program, setters: Some(&d.setter_index), synthetic: Some(&d.synthetic_regions) }
    }

    pub fn is_synthetic(&self, id: NodeId) -> bool {
        self.synthetic.is_some_and(|s| s.contains(&id))
    }
}

pub(crate) struct SetterSite {
    pub field: String,
    pub setter: String,
    pub ty: Type,
}

/// The driver-visible surface of one class.
pub(crate) struct ClassApi<'a> {
    pub class: &'a ClassDecl,
    pub methods: Vec<&'a MethodDecl>,
    pub setters: Vec<SetterSite>,
}

impl<'a> ClassApi<'a> {
    pub fn new(subject: &Subject<'a>, target: &str, allow_setters: bool) -> Result<Self, GenError> {
        let class = subject.program.class(target).ok_or_else(|| GenError::TargetNotFound(target.to_string()))?;
        if class.constructor.visibility != Visibility::Public {
            return Err(GenError::InvalidConfig(format!("constructor of `{target}` is hidden")));
        }
        let setter_names: BTreeSet<&str> = subject
            .setters
            .map(|s| s.iter().filter(|((c, _), _)| c == target).map(|(_, n)| n.as_str()).collect())
            .unwrap_or_default();
        let methods = class
            .methods
            .iter()
            .filter(|m| m.visibility == Visibility::Public && !setter_names.contains(m.name.as_str()))
            .collect();
        let mut setters = Vec::new();
        if allow_setters {
            let index = subject.setters.ok_or_else(|| {
                GenError::InvalidConfig("setters allowed but the program is not de-encapsulated".into())
            })?;
            for f in &class.fields {
                if let Some(name) = index.get(&(target.to_string(), f.name.clone())) {
                    setters.push(SetterSite { field: f.name.clone(), setter: name.clone(), ty: f.ty.clone() });
                }
            }
        }
        Ok(ClassApi { class, methods, setters })
    }

    /// Public non-void methods without parameters, in declaration order.
    pub fn inspectors(&self) -> Vec<&'a MethodDecl> {
        self.methods.iter().copied().filter(|m| m.ret != Type::Void && m.params.is_empty()).collect()
    }

    pub fn construct(&self, args: Vec<Literal>) -> Action {
        Action::Construct { var: DRIVER_VAR.into(), class: self.class.name.clone(), args }
    }

    pub fn call(m: &MethodDecl, args: Vec<Literal>) -> Action {
        Action::Call { var: DRIVER_VAR.into(), method: m.name.clone(), args }
    }

    pub fn setter_call(s: &SetterSite, value: Literal) -> Action {
        Action::SetterCall { var: DRIVER_VAR.into(), field: s.field.clone(), setter: s.setter.clone(), value }
    }
}

/// Candidate literals for a parameter of type `ty`.
pub fn values_for(ty: &Type, int_pool: &[i64]) -> Vec<Literal> {
    match ty {
        Type::Int => int_pool.iter().map(|v| Literal::Int(*v)).collect(),
        Type::Bool => vec![Literal::Bool(false), Literal::Bool(true)],
        _ => vec![Literal::Null],
    }
}

fn combo_count(params: &[Type], pool: &[i64]) -> u64 {
    params.iter().fold(1u64, |acc, t| acc.saturating_mul(values_for(t, pool).len() as u64))
}

/// All argument tuples in lexicographic order (first parameter varies slowest).
fn combos(params: &[Type], pool: &[i64]) -> Vec<Vec<Literal>> {
    let mut out = vec![Vec::new()];
    for t in params {
        let vals = values_for(t, pool);
        out = out.iter().flat_map(|prefix| vals.iter().map(move |v| [prefix.clone(), vec![v.clone()]].concat())).collect();
    }
    out
}

/// Runs `driver` on the original semantics and turns what it observed into
/// assertions. A trapping run yields a trap oracle.
pub fn synthesize_oracle(p: &Program, driver: Vec<Action>, budget: StepBudget) -> Result<TestCase, OracleError> {
    synthesize_with(&Interpreter::new(p), driver, budget)
}

pub(crate) fn synthesize_with(it: &Interpreter<'_>, driver: Vec<Action>, budget: StepBudget) -> Result<TestCase, OracleError> {
    let mut t = TestCase::from_driver(driver);
    let r = it.run(&t, budget, Mode::Plain)?;
    t.oracle = match r.outcome {
        Outcome::BudgetExhausted => return Err(OracleError::BudgetExhausted),
        Outcome::Trap { kind, .. } => Oracle { expect: Expectation::Trap { kind }, asserts: Vec::new() },
        Outcome::Completed { .. } => Oracle {
            expect: Expectation::Completed,
            asserts: r
                .observations
                .into_iter()
                .filter_map(|(obs, v)| v.to_literal().map(|value| AssertEq { obs, value }))
                .collect(),
        },
    };
    Ok(t)
}

/// Every driver of at most `bound.max_calls` actions that starts with a
/// constructor call, in shortlex order, each with a synthesized oracle.
/// Drivers that exhaust the step budget are dropped.
pub fn enumerate_suite(
    subject: &Subject<'_>,
    target: &str,
    bound: &EnumBound,
    budget: StepBudget,
) -> Result<TestSuite, GenError> {
    let api = ClassApi::new(subject, target, bound.allow_setters)?;
    let ctor_params: Vec<Type> = api.class.constructor.params.iter().map(|p| p.ty.clone()).collect();
    let ctor_count = combo_count(&ctor_params, &bound.arg_pool);
    let alphabet_size = api
        .methods
        .iter()
        .map(|m| combo_count(&m.params.iter().map(|p| p.ty.clone()).collect::<Vec<_>>(), &bound.arg_pool))
        .chain(api.setters.iter().map(|s| values_for(&s.ty, &bound.arg_pool).len() as u64))
        .fold(0u64, u64::saturating_add);
    let mut size = 0u64;
    let mut layer = ctor_count;
    for _ in 0..bound.max_calls {
        size = size.saturating_add(layer);
        layer = layer.saturating_mul(alphabet_size);
    }
    if size > bound.cap {
        return Err(GenError::EnumerationTooLarge { size, cap: bound.cap });
    }

    let ctors: Vec<Action> = combos(&ctor_params, &bound.arg_pool).into_iter().map(|a| api.construct(a)).collect();
    let mut alphabet: Vec<Action> = Vec::new();
    for m in &api.methods {
        let params: Vec<Type> = m.params.iter().map(|p| p.ty.clone()).collect();
        alphabet.extend(combos(&params, &bound.arg_pool).into_iter().map(|a| ClassApi::call(m, a)));
    }
    for s in &api.setters {
        alphabet.extend(values_for(&s.ty, &bound.arg_pool).into_iter().map(|v| ClassApi::setter_call(s, v)));
    }

    let mut drivers: Vec<Vec<Action>> = Vec::with_capacity(size as usize);
    for calls in 0..bound.max_calls {
        if calls > 0 && alphabet.is_empty() {
            break;
        }
        for ctor in &ctors {
            let mut digits = vec![0usize; calls];
            'tuples: loop {
                let mut d = Vec::with_capacity(calls + 1);
                d.push(ctor.clone());
                d.extend(digits.iter().map(|&i| alphabet[i].clone()));
                drivers.push(d);
                // Odometer increment, last position fastest.
                let mut pos = calls;
                loop {
                    if pos == 0 {
                        break 'tuples;
                    }
                    pos -= 1;
                    digits[pos] += 1;
                    if digits[pos] < alphabet.len() {
                        break;
                    }
                    digits[pos] = 0;
                }
            }
        }
    }

    let it = Interpreter::new(subject.program);
    let tests: Result<Vec<Option<TestCase>>, GenError> = drivers
        .into_par_iter()
        .map(|d| match synthesize_with(&it, d, budget) {
            Ok(t) => Ok(Some(t)),
            Err(OracleError::BudgetExhausted) => Ok(None),
            Err(OracleError::Contract(c)) => Err(GenError::Contract(c)),
        })
        .collect();
    Ok(TestSuite::new(tests?.into_iter().flatten().collect()))
}
