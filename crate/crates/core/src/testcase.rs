//! Test cases: a driver (construction plus calls with literal arguments) and
//! an oracle (assertions over what the driver observed).

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Argument or expected value. Serialized bare: `3`, `true`, `null`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Literal {
    Int(i64),
    Bool(bool),
    Null,
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(v) => write!(f, "{v}"),
            Literal::Bool(b) => write!(f, "{b}"),
            Literal::Null => f.write_str("null"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum Action {
    Construct { var: String, class: String, args: Vec<Literal> },
    Call { var: String, method: String, args: Vec<Literal> },
    /// Call of a synthesized setter; only valid on a de-encapsulated program.
    SetterCall { var: String, field: String, setter: String, value: Literal },
}

impl Action {
    pub fn var(&self) -> &str {
        match self {
            Action::Construct { var, .. } | Action::Call { var, .. } | Action::SetterCall { var, .. } => var,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn args(a: &[Literal]) -> String {
            a.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
        }
        match self {
            Action::Construct { var, class, args: a } => write!(f, "{var} = new {class}({})", args(a)),
            Action::Call { var, method, args: a } => write!(f, "{var}.{method}({})", args(a)),
            Action::SetterCall { var, setter, value, .. } => write!(f, "{var}.{setter}({value})"),
        }
    }
}

/// Something a driver run produces that an assertion can refer to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "obs", rename_all = "snake_case")]
pub enum Observation {
    /// Return value of the driver action at this index.
    Ret { action: usize },
    /// Public field read after the final action.
    Field { var: String, field: String },
}

impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observation::Ret { action } => write!(f, "ret#{action}"),
            Observation::Field { var, field } => write!(f, "{var}.{field}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrapKind {
    DivByZero,
    NullDeref,
    /// Call depth limit; MiniOO has no other way to report unbounded recursion.
    StackOverflow,
}

impl fmt::Display for TrapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrapKind::DivByZero => "div-by-zero",
            TrapKind::NullDeref => "null-deref",
            TrapKind::StackOverflow => "stack-overflow",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AssertEq {
    pub obs: Observation,
    pub value: Literal,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "expect", rename_all = "snake_case")]
pub enum Expectation {
    Completed,
    Trap { kind: TrapKind },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Oracle {
    #[serde(flatten)]
    pub expect: Expectation,
    pub asserts: Vec<AssertEq>,
}

impl Oracle {
    pub fn completed() -> Self {
        Oracle { expect: Expectation::Completed, asserts: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TestCase {
    pub driver: Vec<Action>,
    pub oracle: Oracle,
    pub uses_setters: bool,
    /// Generation run that produced the test, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TestCaseError {
    #[error("action {index}: variable `{var}` used before construction")]
    UnboundVar { index: usize, var: String },
    #[error("action {index}: variable `{var}` constructed twice")]
    Rebound { index: usize, var: String },
    #[error("uses_setters is {declared} but the driver {}", if *declared { "has no setter call" } else { "calls a setter" })]
    SetterFlag { declared: bool },
    #[error("assertion refers to {0}, which the driver does not produce")]
    DanglingObservation(Observation),
    #[error("malformed suite JSON: {0}")]
    Json(String),
}

impl TestCase {
    /// A test with an empty `completed` oracle; `uses_setters` follows the driver.
    pub fn from_driver(driver: Vec<Action>) -> Self {
        let uses_setters = driver.iter().any(|a| matches!(a, Action::SetterCall { .. }));
        TestCase { driver, oracle: Oracle::completed(), uses_setters, origin: None }
    }

    /// Checks the structural invariants that do not need a program.
    pub fn validate(&self) -> Result<(), TestCaseError> {
        let mut bound: HashSet<&str> = HashSet::new();
        for (index, action) in self.driver.iter().enumerate() {
            let var = action.var();
            match action {
                Action::Construct { .. } => {
                    if !bound.insert(var) {
                        return Err(TestCaseError::Rebound { index, var: var.to_string() });
                    }
                }
                _ => {
                    if !bound.contains(var) {
                        return Err(TestCaseError::UnboundVar { index, var: var.to_string() });
                    }
                }
            }
        }
        let has_setter = self.driver.iter().any(|a| matches!(a, Action::SetterCall { .. }));
        if has_setter != self.uses_setters {
            return Err(TestCaseError::SetterFlag { declared: self.uses_setters });
        }
        for a in &self.oracle.asserts {
            let ok = match &a.obs {
                Observation::Ret { action } => matches!(self.driver.get(*action), Some(Action::Call { .. })),
                Observation::Field { var, .. } => bound.contains(var.as_str()),
            };
            if !ok {
                return Err(TestCaseError::DanglingObservation(a.obs.clone()));
            }
        }
        Ok(())
    }
}

/// An ordered list of test cases. Serializes as a bare JSON array.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TestSuite {
    pub tests: Vec<TestCase>,
}

impl TestSuite {
    pub fn new(tests: Vec<TestCase>) -> Self {
        TestSuite { tests }
    }

    pub fn len(&self) -> usize {
        self.tests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tests.is_empty()
    }

    /// Parses and validates a `suite.json` document.
    pub fn from_json(text: &str) -> Result<Self, TestCaseError> {
        let suite: TestSuite = serde_json::from_str(text).map_err(|e| TestCaseError::Json(e.to_string()))?;
        for t in &suite.tests {
            t.validate()?;
        }
        Ok(suite)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("suite serialization is infallible")
    }

    /// Tests that never call a synthesized setter.
    pub fn without_setters(&self) -> TestSuite {
        TestSuite { tests: self.tests.iter().filter(|t| !t.uses_setters).cloned().collect() }
    }

    /// Concatenates suites, keeping the first occurrence of each driver.
    pub fn union<'a>(suites: impl IntoIterator<Item = &'a TestSuite>) -> TestSuite {
        let mut seen = HashSet::new();
        let mut tests = Vec::new();
        for s in suites {
            for t in &s.tests {
                if seen.insert(t.driver.clone()) {
                    tests.push(t.clone());
                }
            }
        }
        TestSuite { tests }
    }
}
