//! Deterministic tree-walking interpreter for checked MiniOO programs.
//!
//! One [`Interpreter`] per program; it is immutable and can be shared across
//! threads. Each run builds its own heap. A run can be plain, can substitute a
//! single mutant in place, can arm infection probes for a whole catalog, or
//! can watch one node and record what it evaluates to.

mod machine;

use std::collections::{BTreeSet, HashMap};

use serde::Serialize;
use thiserror::Error;

use crate::frontend::ast::{ClassDecl, MethodDecl, NodeId, Program, Type, Visibility};
use crate::mutation::{Mutant, MutantCatalog, MutantId, Payload};
use crate::testcase::{Action, Expectation, Literal, Observation, Oracle, TestCase, TrapKind};

pub use machine::{CanonValue, StateSnapshot};

pub const DEFAULT_STEP_BUDGET: u64 = 100_000;

/// Nested MiniOO calls deeper than this trap with `stack-overflow`.
pub const MAX_CALL_DEPTH: usize = 128;

/// Upper bound on statements plus expressions evaluated in one run. Driver
/// actions count one step each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct StepBudget(pub u64);

impl Default for StepBudget {
    fn default() -> Self {
        StepBudget(DEFAULT_STEP_BUDGET)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Null,
    /// Heap index; only meaningful within one run.
    Ref(u32),
    Void,
}

impl Value {
    pub fn from_literal(l: &Literal) -> Value {
        match l {
            Literal::Int(v) => Value::Int(*v),
            Literal::Bool(b) => Value::Bool(*b),
            Literal::Null => Value::Null,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(tag = "outcome", rename_all = "kebab-case")]
pub enum Outcome {
    Completed { verdicts: Vec<bool> },
    Trap { kind: TrapKind, at: NodeId },
    BudgetExhausted,
}

impl Outcome {
    /// Strong-kill judgment: outcomes differ observably. Trap sites are not
    /// observable, only their kind.
    pub fn differs(&self, other: &Outcome) -> bool {
        match (self, other) {
            (Outcome::Completed { verdicts: a }, Outcome::Completed { verdicts: b }) => a != b,
            (Outcome::Trap { kind: a, .. }, Outcome::Trap { kind: b, .. }) => a != b,
            (Outcome::BudgetExhausted, Outcome::BudgetExhausted) => false,
            _ => true,
        }
    }

    pub fn is_budget_exhausted(&self) -> bool {
        matches!(self, Outcome::BudgetExhausted)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CoverageRecord {
    pub statements: BTreeSet<NodeId>,
    /// (if/while node, branch taken).
    pub branches: BTreeSet<(NodeId, bool)>,
}

/// A value as seen by a driver-level observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Observed {
    Int(i64),
    Bool(bool),
    Null,
    /// A non-null reference; never asserted on.
    Object,
}

impl Observed {
    fn of(v: Value) -> Observed {
        match v {
            Value::Int(i) => Observed::Int(i),
            Value::Bool(b) => Observed::Bool(b),
            Value::Null | Value::Void => Observed::Null,
            Value::Ref(_) => Observed::Object,
        }
    }

    pub fn to_literal(self) -> Option<Literal> {
        match self {
            Observed::Int(i) => Some(Literal::Int(i)),
            Observed::Bool(b) => Some(Literal::Bool(b)),
            Observed::Null => Some(Literal::Null),
            Observed::Object => None,
        }
    }
}

/// What a watched node produced on one evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WatchEvent {
    Value(Value),
    /// State after a watched statement.
    State(StateSnapshot),
    /// Evaluation halted: a trap of this kind, or `None` for budget exhaustion.
    Halt(Option<TrapKind>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionResult {
    pub outcome: Outcome,
    pub coverage: CoverageRecord,
    /// Empty unless probes were armed.
    pub infected: BTreeSet<MutantId>,
    pub steps_used: u64,
    /// Driver-level observations in production order.
    pub observations: Vec<(Observation, Observed)>,
    /// Empty unless a node was watched.
    pub watch: Vec<WatchEvent>,
}

impl ExecutionResult {
    /// Whether the run satisfies `oracle`.
    pub fn passes(&self, oracle: &Oracle) -> bool {
        match (&oracle.expect, &self.outcome) {
            (Expectation::Trap { kind }, Outcome::Trap { kind: got, .. }) => kind == got,
            (Expectation::Completed, Outcome::Completed { verdicts }) => verdicts.iter().all(|v| *v),
            _ => false,
        }
    }
}

/// The driver cannot be executed against this program at all.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("contract violation at action {action}: {message}")]
pub struct ContractViolation {
    pub action: usize,
    pub message: String,
}

/// Mutants grouped by node id for O(1) lookup during a probed run.
#[derive(Debug, Clone, Default)]
pub struct ProbeTable {
    starts: Vec<u32>,
    entries: Vec<(MutantId, Payload)>,
}

impl ProbeTable {
    pub fn new(catalog: &MutantCatalog) -> Self {
        let mut sorted: Vec<&Mutant> = catalog.mutants().iter().collect();
        sorted.sort_by_key(|m| (m.node, m.id));
        let len = sorted.last().map_or(0, |m| m.node.0 as usize + 1);
        let mut starts = vec![0u32; len + 1];
        for m in &sorted {
            starts[m.node.0 as usize + 1] += 1;
        }
        for i in 1..starts.len() {
            starts[i] += starts[i - 1];
        }
        let entries = sorted.iter().map(|m| (m.id, m.payload)).collect();
        ProbeTable { starts, entries }
    }

    fn at(&self, id: NodeId) -> &[(MutantId, Payload)] {
        let i = id.0 as usize;
        if i + 1 >= self.starts.len() {
            return &[];
        }
        &self.entries[self.starts[i] as usize..self.starts[i + 1] as usize]
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Mode<'a> {
    Plain,
    /// Evaluate one mutant's payload at its node instead of the original.
    Mutant(&'a Mutant),
    /// Original semantics; record which mutants would infect the state.
    Probes(&'a ProbeTable),
    /// Original semantics; record every evaluation of this node.
    Watch(NodeId),
}

pub(crate) struct ClassInfo<'p> {
    pub decl: &'p ClassDecl,
    pub slots: HashMap<&'p str, usize>,
    pub methods: HashMap<&'p str, &'p MethodDecl>,
    pub defaults: Vec<Value>,
}

pub struct Interpreter<'p> {
    pub(crate) program: &'p Program,
    pub(crate) classes: Vec<ClassInfo<'p>>,
    pub(crate) class_ix: HashMap<&'p str, usize>,
    pub(crate) node_count: usize,
}

pub(crate) enum Step<'p> {
    Construct { class: usize, args: Vec<Value> },
    Call { var: usize, method: &'p MethodDecl, args: Vec<Value>, observe: bool },
}

impl<'p> Interpreter<'p> {
    /// `p` must be free of static errors.
    pub fn new(p: &'p Program) -> Self {
        let mut classes = Vec::with_capacity(p.classes.len());
        let mut class_ix = HashMap::new();
        for (i, c) in p.classes.iter().enumerate() {
            class_ix.insert(c.name.as_str(), i);
            let slots = c.fields.iter().enumerate().map(|(j, f)| (f.name.as_str(), j)).collect();
            let methods = c.methods.iter().map(|m| (m.name.as_str(), m)).collect();
            let defaults = c
                .fields
                .iter()
                .map(|f| match f.ty {
                    Type::Int => Value::Int(0),
                    Type::Bool => Value::Bool(false),
                    _ => Value::Null,
                })
                .collect();
            classes.push(ClassInfo { decl: c, slots, methods, defaults });
        }
        let node_count = p.max_node_id().map_or(0, |id| id.0 as usize + 1);
        Interpreter { program: p, classes, class_ix, node_count }
    }

    pub fn program(&self) -> &'p Program {
        self.program
    }

    pub fn run(&self, t: &TestCase, budget: StepBudget, mode: Mode<'_>) -> Result<ExecutionResult, ContractViolation> {
        let steps = self.resolve(t)?;
        let vars: Vec<&str> = t
            .driver
            .iter()
            .filter(|a| matches!(a, Action::Construct { .. }))
            .map(|a| a.var())
            .collect();
        Ok(machine::Machine::new(self, budget, mode).run_driver(&steps, &vars, &t.oracle))
    }

    fn resolve(&self, t: &TestCase) -> Result<Vec<Step<'p>>, ContractViolation> {
        let fail = |action: usize, message: String| ContractViolation { action, message };
        t.validate().map_err(|e| fail(0, e.to_string()))?;
        let mut vars: Vec<(&str, usize)> = Vec::new();
        let mut out = Vec::with_capacity(t.driver.len());
        for (i, action) in t.driver.iter().enumerate() {
            match action {
                Action::Construct { var, class, args } => {
                    let &ci = self.class_ix.get(class.as_str()).ok_or_else(|| fail(i, format!("unknown class `{class}`")))?;
                    let ctor = &self.classes[ci].decl.constructor;
                    if ctor.visibility != Visibility::Public {
                        return Err(fail(i, format!("constructor of `{class}` is hidden")));
                    }
                    let args = self.literal_args(ctor, args).map_err(|m| fail(i, m))?;
                    vars.push((var, ci));
                    out.push(Step::Construct { class: ci, args });
                }
                Action::Call { var, method, args } => {
                    let (slot, ci) = lookup(&vars, var).ok_or_else(|| fail(i, format!("unbound `{var}`")))?;
                    let m = self.public_method(ci, method).map_err(|m| fail(i, m))?;
                    let args = self.literal_args(m, args).map_err(|m| fail(i, m))?;
                    let observe = m.ret != Type::Void;
                    out.push(Step::Call { var: slot, method: m, args, observe });
                }
                Action::SetterCall { var, setter, value, .. } => {
                    let (slot, ci) = lookup(&vars, var).ok_or_else(|| fail(i, format!("unbound `{var}`")))?;
                    let m = self.public_method(ci, setter).map_err(|m| fail(i, m))?;
                    let args = self.literal_args(m, std::slice::from_ref(value)).map_err(|m| fail(i, m))?;
                    out.push(Step::Call { var: slot, method: m, args, observe: false });
                }
            }
        }
        Ok(out)
    }

    fn public_method(&self, ci: usize, name: &str) -> Result<&'p MethodDecl, String> {
        let info = &self.classes[ci];
        let m = info.methods.get(name).ok_or_else(|| format!("no method `{}.{name}`", info.decl.name))?;
        if m.visibility != Visibility::Public {
            return Err(format!("method `{}.{name}` is hidden", info.decl.name));
        }
        Ok(m)
    }

    fn literal_args(&self, m: &MethodDecl, args: &[Literal]) -> Result<Vec<Value>, String> {
        if args.len() != m.params.len() {
            return Err(format!("`{}` takes {} argument(s), got {}", m.name, m.params.len(), args.len()));
        }
        m.params
            .iter()
            .zip(args)
            .map(|(p, a)| {
                let ok = matches!(
                    (&p.ty, a),
                    (Type::Int, Literal::Int(_)) | (Type::Bool, Literal::Bool(_)) | (Type::Class(_), Literal::Null)
                );
                if ok {
                    Ok(Value::from_literal(a))
                } else {
                    Err(format!("argument `{a}` does not fit parameter `{}: {}`", p.name, p.ty))
                }
            })
            .collect()
    }
}

fn lookup(vars: &[(&str, usize)], name: &str) -> Option<(usize, usize)> {
    vars.iter().position(|(v, _)| *v == name).map(|slot| (slot, vars[slot].1))
}

/// Runs `t` on `p`, substituting `mutant` at its node when given.
pub fn run_test(
    p: &Program,
    t: &TestCase,
    budget: StepBudget,
    mutant: Option<&Mutant>,
) -> Result<ExecutionResult, ContractViolation> {
    let mode = mutant.map_or(Mode::Plain, Mode::Mutant);
    Interpreter::new(p).run(t, budget, mode)
}

/// Runs `t` on the original semantics of `p`, reporting every catalog mutant
/// whose payload would have produced a different value (or, for deletions, a
/// different state) at its node.
pub fn run_with_infection_probes(
    p: &Program,
    catalog: &MutantCatalog,
    t: &TestCase,
    budget: StepBudget,
) -> Result<ExecutionResult, ContractViolation> {
    let probes = ProbeTable::new(catalog);
    Interpreter::new(p).run(t, budget, Mode::Probes(&probes))
}
