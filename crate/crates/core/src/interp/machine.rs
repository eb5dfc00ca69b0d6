use std::collections::{BTreeSet, HashMap};

use crate::frontend::ast::*;
use crate::mutation::{MutantId, Payload};
use crate::testcase::{Observation, Oracle, TrapKind};

use super::{
    CoverageRecord, ExecutionResult, Interpreter, Mode, Observed, Outcome, ProbeTable, Step, StepBudget, Value,
    WatchEvent, MAX_CALL_DEPTH,
};

/// Value with object identity replaced by first-reachability order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CanonValue {
    Int(i64),
    Bool(bool),
    Null,
    Void,
    Obj(u32),
}

/// Roots (driver objects, `this`, locals in scope) plus every object they
/// reach, in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateSnapshot {
    pub roots: Vec<CanonValue>,
    /// (class index, field values) per reachable object.
    pub objects: Vec<(usize, Vec<CanonValue>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Halt {
    Trap(TrapKind, NodeId),
    Budget,
}

impl Halt {
    fn kind(self) -> Option<TrapKind> {
        match self {
            Halt::Trap(k, _) => Some(k),
            Halt::Budget => None,
        }
    }
}

type Eval = Result<Value, Halt>;

fn same(a: &Eval, b: &Eval) -> bool {
    match (a, b) {
        (Ok(x), Ok(y)) => x == y,
        (Err(x), Err(y)) => x.kind() == y.kind(),
        _ => false,
    }
}

enum Flow {
    Normal,
    Return(Value),
}

struct Object {
    class: usize,
    fields: Vec<Value>,
}

struct Frame<'p> {
    this: Option<u32>,
    locals: Vec<(&'p str, Value)>,
}

pub(super) struct Machine<'i, 'p> {
    it: &'i Interpreter<'p>,
    heap: Vec<Object>,
    steps: u64,
    budget: u64,
    depth: usize,
    stmt_cov: Vec<bool>,
    branch_cov: Vec<u8>,
    mutant: Option<(NodeId, Payload)>,
    probes: Option<&'i ProbeTable>,
    watch: Option<NodeId>,
    speculating: bool,
    infected: BTreeSet<MutantId>,
    events: Vec<WatchEvent>,
    roots: Vec<Value>,
}

impl<'i, 'p> Machine<'i, 'p> {
    pub(super) fn new(it: &'i Interpreter<'p>, budget: StepBudget, mode: Mode<'i>) -> Self {
        let (mutant, probes, watch) = match mode {
            Mode::Plain => (None, None, None),
            Mode::Mutant(m) => (Some((m.node, m.payload)), None, None),
            Mode::Probes(t) => (None, Some(t), None),
            Mode::Watch(n) => (None, None, Some(n)),
        };
        Machine {
            it,
            heap: Vec::new(),
            steps: 0,
            budget: budget.0,
            depth: 0,
            stmt_cov: vec![false; it.node_count],
            branch_cov: vec![0; it.node_count],
            mutant,
            probes,
            watch,
            speculating: false,
            infected: BTreeSet::new(),
            events: Vec::new(),
            roots: Vec::new(),
        }
    }

    pub(super) fn run_driver(mut self, steps: &[Step<'p>], vars: &[&str], oracle: &Oracle) -> ExecutionResult {
        let mut observations = Vec::new();
        let mut halted = None;
        for (i, step) in steps.iter().enumerate() {
            if let Err(h) = self.tick().and_then(|_| self.step(i, step, &mut observations)) {
                halted = Some(h);
                break;
            }
        }
        let outcome = match halted {
            Some(Halt::Trap(kind, at)) => Outcome::Trap { kind, at },
            Some(Halt::Budget) => Outcome::BudgetExhausted,
            None => {
                for (var, root) in vars.iter().zip(&self.roots) {
                    let Value::Ref(o) = *root else { continue };
                    let obj = &self.heap[o as usize];
                    let decl = self.it.classes[obj.class].decl;
                    for (f, v) in decl.fields.iter().zip(&obj.fields) {
                        if f.visibility == Visibility::Public {
                            observations
                                .push((Observation::Field { var: var.to_string(), field: f.name.clone() }, Observed::of(*v)));
                        }
                    }
                }
                let verdicts = oracle
                    .asserts
                    .iter()
                    .map(|a| {
                        observations
                            .iter()
                            .find(|(o, _)| *o == a.obs)
                            .is_some_and(|(_, v)| v.to_literal().as_ref() == Some(&a.value))
                    })
                    .collect();
                Outcome::Completed { verdicts }
            }
        };
        let mut coverage = CoverageRecord::default();
        for (i, &c) in self.stmt_cov.iter().enumerate() {
            if c {
                coverage.statements.insert(NodeId(i as u32));
            }
        }
        for (i, &b) in self.branch_cov.iter().enumerate() {
            if b & 1 != 0 {
                coverage.branches.insert((NodeId(i as u32), true));
            }
            if b & 2 != 0 {
                coverage.branches.insert((NodeId(i as u32), false));
            }
        }
        ExecutionResult {
            outcome,
            coverage,
            infected: self.infected,
            steps_used: self.steps,
            observations,
            watch: self.events,
        }
    }

    fn step(&mut self, i: usize, step: &Step<'p>, observations: &mut Vec<(Observation, Observed)>) -> Result<(), Halt> {
        match step {
            Step::Construct { class, args } => {
                let v = self.construct(*class, args.clone(), None)?;
                self.roots.push(v);
            }
            Step::Call { var, method, args, observe } => {
                let Value::Ref(o) = self.roots[*var] else { unreachable!("driver variables hold objects") };
                let v = self.invoke(o, method, args.clone(), None)?;
                if *observe {
                    observations.push((Observation::Ret { action: i }, Observed::of(v)));
                }
            }
        }
        Ok(())
    }

    fn tick(&mut self) -> Result<(), Halt> {
        if self.steps >= self.budget {
            return Err(Halt::Budget);
        }
        self.steps += 1;
        Ok(())
    }

    fn construct(&mut self, class: usize, args: Vec<Value>, at: Option<NodeId>) -> Eval {
        let info = &self.it.classes[class];
        let id = self.heap.len() as u32;
        self.heap.push(Object { class, fields: info.defaults.clone() });
        let ctor = &info.decl.constructor;
        self.invoke(id, ctor, args, at)?;
        Ok(Value::Ref(id))
    }

    fn invoke(&mut self, obj: u32, m: &'p MethodDecl, args: Vec<Value>, at: Option<NodeId>) -> Eval {
        if self.depth >= MAX_CALL_DEPTH {
            return Err(Halt::Trap(TrapKind::StackOverflow, at.unwrap_or(m.id)));
        }
        self.depth += 1;
        let mut frame = Frame { this: Some(obj), locals: m.params.iter().map(|p| p.name.as_str()).zip(args).collect() };
        let r = self.block(&m.body, &mut frame);
        self.depth -= 1;
        match r? {
            Flow::Return(v) => Ok(v),
            Flow::Normal => Ok(Value::Void),
        }
    }

    fn block(&mut self, stmts: &'p [Stmt], fr: &mut Frame<'p>) -> Result<Flow, Halt> {
        let mark = fr.locals.len();
        for s in stmts {
            if let Flow::Return(v) = self.stmt(s, fr)? {
                fr.locals.truncate(mark);
                return Ok(Flow::Return(v));
            }
        }
        fr.locals.truncate(mark);
        Ok(Flow::Normal)
    }

    fn stmt(&mut self, s: &'p Stmt, fr: &mut Frame<'p>) -> Result<Flow, Halt> {
        self.tick()?;
        let idx = s.id.0 as usize;
        if self.speculating {
            return self.stmt_plain(s, fr);
        }
        self.stmt_cov[idx] = true;
        let deleted = self.mutant == Some((s.id, Payload::Delete));
        let probes = self.probes.map_or(&[][..], |t| t.at(s.id));
        let pre = if probes.is_empty() { None } else { Some(self.snapshot(fr)) };
        let r = if deleted { Ok(Flow::Normal) } else { self.stmt_plain(s, fr) };
        if let Some(pre) = pre {
            let infected = r.is_err() || self.snapshot(fr) != pre;
            if infected {
                self.infected.extend(probes.iter().map(|(id, _)| *id));
            }
        }
        if self.watch == Some(s.id) {
            let ev = match &r {
                Ok(_) => WatchEvent::State(self.snapshot(fr)),
                Err(h) => WatchEvent::Halt(h.kind()),
            };
            self.events.push(ev);
        }
        r
    }

    fn stmt_plain(&mut self, s: &'p Stmt, fr: &mut Frame<'p>) -> Result<Flow, Halt> {
        match &s.kind {
            StmtKind::Assign { target, value } => {
                match &target.kind {
                    ExprKind::Var(name) => {
                        let v = self.eval(value, fr)?;
                        if let Some(slot) = fr.locals.iter_mut().rev().find(|(n, _)| n == name) {
                            slot.1 = v;
                        } else {
                            let this = fr.this.expect("field assignment needs a receiver");
                            self.store(this, name, v);
                        }
                    }
                    ExprKind::Field { receiver, name } => {
                        let r = self.eval(receiver, fr)?;
                        let v = self.eval(value, fr)?;
                        let o = self.deref(r, target.id)?;
                        self.store(o, name, v);
                    }
                    _ => unreachable!("checked programs assign only to names and fields"),
                }
                Ok(Flow::Normal)
            }
            StmtKind::Expr(e) => {
                self.eval(e, fr)?;
                Ok(Flow::Normal)
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                let c = self.eval(cond, fr)? == Value::Bool(true);
                self.cover_branch(s.id, c);
                self.block(if c { then_branch } else { else_branch }, fr)
            }
            StmtKind::While { cond, body } => loop {
                let c = self.eval(cond, fr)? == Value::Bool(true);
                self.cover_branch(s.id, c);
                if !c {
                    return Ok(Flow::Normal);
                }
                if let Flow::Return(v) = self.block(body, fr)? {
                    return Ok(Flow::Return(v));
                }
            },
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.eval(e, fr)?,
                    None => Value::Void,
                };
                Ok(Flow::Return(v))
            }
            StmtKind::Local { name, init, .. } => {
                let v = self.eval(init, fr)?;
                fr.locals.push((name.as_str(), v));
                Ok(Flow::Normal)
            }
            StmtKind::Skip => Ok(Flow::Normal),
        }
    }

    fn cover_branch(&mut self, id: NodeId, taken: bool) {
        if !self.speculating {
            self.branch_cov[id.0 as usize] |= if taken { 1 } else { 2 };
        }
    }

    fn store(&mut self, o: u32, name: &str, v: Value) {
        let obj = &mut self.heap[o as usize];
        let slot = self.it.classes[obj.class].slots[name];
        obj.fields[slot] = v;
    }

    fn load(&self, o: u32, name: &str) -> Value {
        let obj = &self.heap[o as usize];
        obj.fields[self.it.classes[obj.class].slots[name]]
    }

    fn deref(&self, v: Value, at: NodeId) -> Result<u32, Halt> {
        match v {
            Value::Ref(o) => Ok(o),
            _ => Err(Halt::Trap(TrapKind::NullDeref, at)),
        }
    }

    fn eval(&mut self, e: &'p Expr, fr: &mut Frame<'p>) -> Eval {
        let r = self.eval_node(e, fr);
        if !self.speculating && self.watch == Some(e.id) {
            self.events.push(match r {
                Ok(v) => WatchEvent::Value(v),
                Err(h) => WatchEvent::Halt(h.kind()),
            });
        }
        r
    }

    fn eval_node(&mut self, e: &'p Expr, fr: &mut Frame<'p>) -> Eval {
        self.tick()?;
        if let Some((node, payload)) = self.mutant {
            if node == e.id {
                return self.eval_mutated(e, payload, fr);
            }
        }
        if !self.speculating {
            if let Some(table) = self.probes {
                let probes = table.at(e.id);
                if !probes.is_empty() {
                    return self.eval_probed(e, probes, fr);
                }
            }
        }
        self.eval_plain(e, fr)
    }

    fn eval_plain(&mut self, e: &'p Expr, fr: &mut Frame<'p>) -> Eval {
        match &e.kind {
            ExprKind::Int(v) => Ok(Value::Int(*v)),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Null => Ok(Value::Null),
            ExprKind::This => Ok(Value::Ref(fr.this.expect("`this` inside a method"))),
            ExprKind::Var(name) => match fr.locals.iter().rev().find(|(n, _)| n == name) {
                Some((_, v)) => Ok(*v),
                None => Ok(self.load(fr.this.expect("field read needs a receiver"), name)),
            },
            ExprKind::Field { receiver, name } => {
                let r = self.eval(receiver, fr)?;
                let o = self.deref(r, e.id)?;
                Ok(self.load(o, name))
            }
            ExprKind::Binary { op, lhs, rhs } => self.binary(*op, lhs, rhs, e.id, fr),
            ExprKind::Unary { op, operand } => {
                let v = self.eval(operand, fr)?;
                Ok(match (op, v) {
                    (UnOp::Not, Value::Bool(b)) => Value::Bool(!b),
                    (UnOp::Neg, Value::Int(i)) => Value::Int(i.wrapping_neg()),
                    _ => unreachable!("checked operand types"),
                })
            }
            ExprKind::Call { receiver, method, args } => {
                let recv = match receiver {
                    Some(r) => self.eval(r, fr)?,
                    None => Value::Ref(fr.this.expect("unqualified call inside a method")),
                };
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a, fr)?);
                }
                let o = self.deref(recv, e.id)?;
                let class = self.heap[o as usize].class;
                let m = self.it.classes[class].methods[method.as_str()];
                self.invoke(o, m, vals, Some(e.id))
            }
            ExprKind::New { class, args } => {
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a, fr)?);
                }
                self.construct(self.it.class_ix[class.as_str()], vals, Some(e.id))
            }
        }
    }

    fn binary(&mut self, op: BinOp, lhs: &'p Expr, rhs: &'p Expr, at: NodeId, fr: &mut Frame<'p>) -> Eval {
        let l = self.eval(lhs, fr)?;
        if let Some(v) = short_circuit(op, l) {
            return Ok(v);
        }
        let r = self.eval(rhs, fr)?;
        apply(op, l, r).map_err(|k| Halt::Trap(k, at))
    }

    fn eval_mutated(&mut self, e: &'p Expr, payload: Payload, fr: &mut Frame<'p>) -> Eval {
        match (&e.kind, payload) {
            (ExprKind::Binary { lhs, rhs, .. }, Payload::Op(op)) => self.binary(op, lhs, rhs, e.id, fr),
            // The replaced node takes the operand's place without an extra step.
            (ExprKind::Binary { lhs, .. }, Payload::Left) => self.eval_plain(lhs, fr),
            (ExprKind::Binary { rhs, .. }, Payload::Right) => self.eval_plain(rhs, fr),
            (_, Payload::Const(b)) | (_, Payload::Bool(b)) => Ok(Value::Bool(b)),
            (_, Payload::Int(v)) => Ok(Value::Int(v)),
            _ => self.eval_plain(e, fr),
        }
    }

    fn eval_probed(&mut self, e: &'p Expr, probes: &'i [(MutantId, Payload)], fr: &mut Frame<'p>) -> Eval {
        let ExprKind::Binary { op, lhs, rhs } = &e.kind else {
            let orig = self.eval_plain(e, fr);
            for &(id, payload) in probes {
                let alt = match payload {
                    Payload::Int(v) => Value::Int(v),
                    Payload::Bool(b) | Payload::Const(b) => Value::Bool(b),
                    _ => continue,
                };
                if orig != Ok(alt) {
                    self.infected.insert(id);
                }
            }
            return orig;
        };
        let op = *op;
        // `right` evaluates the right operand in the state before the left one ran.
        let pre_heap = if probes.iter().any(|(_, p)| *p == Payload::Right) && !is_pure(lhs) {
            Some(self.heap_clone())
        } else {
            None
        };
        let l = self.eval(lhs, fr);
        let r = match l {
            Ok(lv) if short_circuit(op, lv).is_none() => Some(self.eval(rhs, fr)),
            _ => None,
        };
        let orig = combine(op, l, r, e.id);
        for &(id, payload) in probes {
            let alt = match payload {
                Payload::Const(b) => Ok(Value::Bool(b)),
                Payload::Left => l,
                Payload::Right => match (&pre_heap, r) {
                    (Some(heap), _) => self.speculate(rhs, fr, Some(heap)),
                    (None, Some(r)) => r,
                    (None, None) => self.speculate(rhs, fr, None),
                },
                Payload::Op(op2) => match l {
                    Err(h) => Err(h),
                    Ok(lv) => match short_circuit(op2, lv) {
                        Some(v) => Ok(v),
                        None => {
                            let rv = match r {
                                Some(r) => r,
                                None => self.speculate(rhs, fr, None),
                            };
                            rv.and_then(|rv| apply(op2, lv, rv).map_err(|k| Halt::Trap(k, e.id)))
                        }
                    },
                },
                _ => continue,
            };
            if !same(&alt, &orig) {
                self.infected.insert(id);
            }
        }
        orig
    }

    /// Evaluates `e` without lasting effects: the heap and step count are
    /// restored and probes, coverage, and watches are off.
    fn speculate(&mut self, e: &'p Expr, fr: &mut Frame<'p>, heap: Option<&Vec<Object>>) -> Eval {
        let saved_steps = self.steps;
        let saved_heap = match heap {
            Some(h) => std::mem::replace(&mut self.heap, clone_heap(h)),
            None => self.heap_clone(),
        };
        let was = std::mem::replace(&mut self.speculating, true);
        let r = self.eval(e, fr);
        self.speculating = was;
        self.heap = saved_heap;
        self.steps = saved_steps;
        r
    }

    fn heap_clone(&self) -> Vec<Object> {
        clone_heap(&self.heap)
    }

    fn snapshot(&self, fr: &Frame<'p>) -> StateSnapshot {
        let mut ids: HashMap<u32, u32> = HashMap::new();
        let mut queue: Vec<u32> = Vec::new();
        let canon = |v: Value, ids: &mut HashMap<u32, u32>, queue: &mut Vec<u32>| match v {
            Value::Int(i) => CanonValue::Int(i),
            Value::Bool(b) => CanonValue::Bool(b),
            Value::Null => CanonValue::Null,
            Value::Void => CanonValue::Void,
            Value::Ref(o) => {
                let next = ids.len() as u32;
                let c = *ids.entry(o).or_insert_with(|| {
                    queue.push(o);
                    next
                });
                CanonValue::Obj(c)
            }
        };
        let this = fr.this.map(Value::Ref);
        let roots: Vec<CanonValue> = self
            .roots
            .iter()
            .copied()
            .chain(this)
            .chain(fr.locals.iter().map(|(_, v)| *v))
            .map(|v| canon(v, &mut ids, &mut queue))
            .collect();
        let mut objects = Vec::new();
        let mut i = 0;
        while i < queue.len() {
            let obj = &self.heap[queue[i] as usize];
            let fields = obj.fields.iter().map(|v| canon(*v, &mut ids, &mut queue)).collect();
            objects.push((obj.class, fields));
            i += 1;
        }
        StateSnapshot { roots, objects }
    }
}

fn clone_heap(h: &[Object]) -> Vec<Object> {
    h.iter().map(|o| Object { class: o.class, fields: o.fields.clone() }).collect()
}

fn short_circuit(op: BinOp, l: Value) -> Option<Value> {
    match (op, l) {
        (BinOp::And, Value::Bool(false)) => Some(Value::Bool(false)),
        (BinOp::Or, Value::Bool(true)) => Some(Value::Bool(true)),
        _ => None,
    }
}

fn combine(op: BinOp, l: Eval, r: Option<Eval>, at: NodeId) -> Eval {
    let lv = l?;
    if let Some(v) = short_circuit(op, lv) {
        return Ok(v);
    }
    let rv = r.expect("right operand evaluated unless short-circuited")?;
    apply(op, lv, rv).map_err(|k| Halt::Trap(k, at))
}

fn apply(op: BinOp, l: Value, r: Value) -> Result<Value, TrapKind> {
    use BinOp::*;
    Ok(match (l, r) {
        (Value::Int(a), Value::Int(b)) => match op {
            Add => Value::Int(a.wrapping_add(b)),
            Sub => Value::Int(a.wrapping_sub(b)),
            Mul => Value::Int(a.wrapping_mul(b)),
            Div | Rem if b == 0 => return Err(TrapKind::DivByZero),
            Div => Value::Int(a.wrapping_div(b)),
            Rem => Value::Int(a.wrapping_rem(b)),
            Lt => Value::Bool(a < b),
            Le => Value::Bool(a <= b),
            Gt => Value::Bool(a > b),
            Ge => Value::Bool(a >= b),
            Eq => Value::Bool(a == b),
            Ne => Value::Bool(a != b),
            And | Or => unreachable!("checked operand types"),
        },
        (Value::Bool(a), Value::Bool(b)) => match op {
            And => Value::Bool(a && b),
            Or => Value::Bool(a || b),
            Eq => Value::Bool(a == b),
            Ne => Value::Bool(a != b),
            _ => unreachable!("checked operand types"),
        },
        (a, b) => match op {
            Eq => Value::Bool(a == b),
            Ne => Value::Bool(a != b),
            _ => unreachable!("checked operand types"),
        },
    })
}

/// No calls or allocations anywhere below `e`.
fn is_pure(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Call { .. } | ExprKind::New { .. } => false,
        ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Null | ExprKind::This | ExprKind::Var(_) => true,
        ExprKind::Field { receiver, .. } => is_pure(receiver),
        ExprKind::Binary { lhs, rhs, .. } => is_pure(lhs) && is_pure(rhs),
        ExprKind::Unary { operand, .. } => is_pure(operand),
    }
}
