//! Property tests over the whole measurement stack.

use std::collections::BTreeSet;
use std::path::PathBuf;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use testimony_core::analysis::{build_kill_matrix, derive_evidence_sets, naive_status, EvidenceSets, Status};
use testimony_core::deencap::{synthesize_setters, DeencapResult};
use testimony_core::frontend::ast::{Type, Visibility};
use testimony_core::frontend::{parse, render, Program};
use testimony_core::interp::{run_test, Outcome, StepBudget};
use testimony_core::metrics::estimated_metrics;
use testimony_core::mutation::{generate_mutants, literal_replacements, MutantCatalog};
use testimony_core::testcase::{Action, Literal, TestCase, TestSuite};
use testimony_core::testgen::{
    enumerate_suite, generate_suite, synthesize_oracle, values_for, EnumBound, FitnessKind, FitnessSpec, GenConfig, Subject,
};

fn corpus_src(name: &str) -> String {
    std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name)).unwrap()
}

// ---- programs as text ------------------------------------------------------

fn ident() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "c", "x"]).prop_map(str::to_string)
}

fn expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (-1000i64..1000).prop_map(|v| v.to_string()),
        Just(i64::MIN.to_string()),
        Just(i64::MAX.to_string()),
        any::<bool>().prop_map(|b| b.to_string()),
        Just("null".to_string()),
        Just("this".to_string()),
        ident(),
        ident().prop_map(|v| format!("{v}.f")),
    ];
    leaf.prop_recursive(4, 24, 3, |inner| {
        let ops = prop::sample::select(vec!["+", "-", "*", "/", "%", "<", "<=", ">", ">=", "==", "!=", "&&", "||"]);
        prop_oneof![
            (inner.clone(), ops, inner.clone()).prop_map(|(l, o, r)| format!("{l} {o} {r}")),
            (inner.clone(), prop::sample::select(vec!["+", "-", "*", "&&"]), inner.clone())
                .prop_map(|(l, o, r)| format!("({l} {o} {r})")),
            inner.clone().prop_map(|e| format!("!({e})")),
            inner.clone().prop_map(|e| format!("-({e})")),
            (ident(), prop::collection::vec(inner.clone(), 0..3)).prop_map(|(r, a)| format!("{r}.m({})", a.join(", "))),
            prop::collection::vec(inner.clone(), 0..3).prop_map(|a| format!("g({})", a.join(", "))),
            prop::collection::vec(inner, 0..2).prop_map(|a| format!("new K({})", a.join(", "))),
        ]
    })
}

fn block() -> impl Strategy<Value = String> {
    let simple = prop_oneof![
        (ident(), expr()).prop_map(|(v, e)| format!("{v} = {e};")),
        (ident(), expr()).prop_map(|(v, e)| format!("{v}.f = {e};")),
        expr().prop_map(|e| format!("g({e});")),
        expr().prop_map(|e| format!("return {e};")),
        Just("return;".to_string()),
        Just("skip;".to_string()),
        (ident(), expr()).prop_map(|(v, e)| format!("int {v} = {e};")),
    ];
    let stmt = simple.prop_recursive(3, 16, 3, |inner| {
        let body = prop::collection::vec(inner, 0..3).prop_map(|s| s.join(" "));
        prop_oneof![
            (expr(), body.clone(), body.clone()).prop_map(|(c, t, e)| format!("if ({c}) {{ {t} }} else {{ {e} }}")),
            (expr(), body.clone()).prop_map(|(c, t)| format!("if ({c}) {{ {t} }}")),
            (expr(), body).prop_map(|(c, b)| format!("while ({c}) {{ {b} }}")),
        ]
    });
    prop::collection::vec(stmt, 0..4).prop_map(|s| s.join("\n"))
}

fn program_text() -> impl Strategy<Value = String> {
    let ty = prop::sample::select(vec!["int", "bool", "K", "void"]);
    let vis = prop::sample::select(vec!["public ", "hidden ", ""]);
    let method = (vis.clone(), ty.clone(), ident(), block())
        .prop_map(|(v, t, n, b)| format!("  {v}{t} {n}m(int p, bool q) {{\n{b}\n  }}"));
    let field = (prop::sample::select(vec!["public", "hidden"]), prop::sample::select(vec!["int", "bool", "K"]), ident())
        .prop_map(|(v, t, n)| format!("  {v} {t} {n}f;"));
    (prop::collection::vec(field, 0..3), block(), prop::collection::vec(method, 0..3)).prop_map(|(fs, ctor, ms)| {
        format!("class K {{\n{}\n  K() {{\n{ctor}\n  }}\n{}\n}}\n", fs.join("\n"), ms.join("\n"))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn render_parse_round_trip(src in program_text()) {
        let p = parse(&src).unwrap();
        let text = render(&p);
        let q = parse(&text).unwrap();
        prop_assert_eq!(&p, &q);
        prop_assert_eq!(render(&q), text);
        prop_assert_eq!(p.max_node_id(), q.max_node_id());
    }

    #[test]
    fn literal_replacements_are_distinct_changes(k in any::<i64>()) {
        let r = literal_replacements(k);
        prop_assert!(!r.is_empty() && r.len() <= 4);
        prop_assert!(!r.contains(&k));
        let set: BTreeSet<i64> = r.iter().copied().collect();
        prop_assert_eq!(set.len(), r.len());
    }
}

// ---- random drivers ----------------------------------------------------------

const POOL: [i64; 6] = [-1, 0, 1, 2, 5, 123];

/// A driver of up to `calls` public calls, with setters mixed in when `d` is given.
fn random_driver(p: &Program, class: &str, d: Option<&DeencapResult>, seed: u64, calls: usize) -> Vec<Action> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = p.class(class).unwrap();
    let pick = |ty: &Type, rng: &mut ChaCha8Rng| {
        let vs = values_for(ty, &POOL);
        vs[rng.gen_range(0..vs.len())].clone()
    };
    let args = c.constructor.params.iter().map(|pr| pick(&pr.ty, &mut rng)).collect();
    let mut driver = vec![Action::Construct { var: "o".into(), class: class.into(), args }];
    let methods: Vec<_> = c.methods.iter().filter(|m| m.visibility == Visibility::Public).collect();
    let setters: Vec<(&String, &String)> = d
        .map(|d| d.setter_index.iter().filter(|((cl, _), _)| cl == class).map(|((_, f), s)| (f, s)).collect())
        .unwrap_or_default();
    for _ in 0..calls {
        if !setters.is_empty() && rng.gen_bool(0.3) {
            let (field, setter) = setters[rng.gen_range(0..setters.len())];
            let ty = &c.field(field).unwrap().ty;
            let value = pick(ty, &mut rng);
            driver.push(Action::SetterCall { var: "o".into(), field: field.clone(), setter: setter.clone(), value });
        } else if !methods.is_empty() {
            let m = methods[rng.gen_range(0..methods.len())];
            let args = m.params.iter().map(|pr| pick(&pr.ty, &mut rng)).collect();
            driver.push(Action::Call { var: "o".into(), method: m.name.clone(), args });
        }
    }
    driver
}

struct Subjectful {
    p: Program,
    d: DeencapResult,
    cat: MutantCatalog,
}

fn load(file: &str) -> Subjectful {
    let p = parse(&corpus_src(file)).unwrap();
    let d = synthesize_setters(&p);
    let cat = generate_mutants(&d.program, &d.synthetic_regions).without_synthetic();
    Subjectful { p, d, cat }
}

const CLASSES: [(&str, &str); 10] = [
    ("Account.mo", "Account"),
    ("Clamp.mo", "Clamp"),
    ("Counter.mo", "Counter"),
    ("Ledger.mo", "Ledger"),
    ("MathUtil.mo", "MathUtil"),
    ("Stack.mo", "Node"),
    ("Safe.mo", "Safe"),
    ("SafeSmall.mo", "SafeSmall"),
    ("Stack.mo", "Stack"),
    ("Toggle.mo", "Toggle"),
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn probes_agree_with_naive_runs(which in 0..CLASSES.len(), seed in any::<u64>(), calls in 0usize..6, setters in any::<bool>()) {
        let (file, class) = CLASSES[which];
        let s = load(file);
        let program = if setters { &s.d.program } else { &s.p };
        let driver = random_driver(&s.p, class, setters.then_some(&s.d), seed, calls);
        let t = match synthesize_oracle(program, driver, StepBudget::default()) {
            Ok(t) => t,
            Err(_) => return Ok(()),
        };
        let mx = build_kill_matrix(program, &s.cat, &TestSuite::new(vec![t.clone()]), StepBudget::default()).unwrap();
        for m in s.cat.mutants() {
            let naive = naive_status(program, &s.cat, m, &t, 0, StepBudget::default()).unwrap();
            prop_assert_eq!(mx.status(m.id, 0), Some(naive), "{:?}", m);
        }
    }

    #[test]
    fn deencap_preserves_setter_free_behaviour(which in 0..CLASSES.len(), seed in any::<u64>(), calls in 0usize..6) {
        let (file, class) = CLASSES[which];
        let s = load(file);
        let t = TestCase::from_driver(random_driver(&s.p, class, None, seed, calls));
        let a = run_test(&s.p, &t, StepBudget::default(), None).unwrap();
        let b = run_test(&s.d.program, &t, StepBudget::default(), None).unwrap();
        prop_assert_eq!(a.outcome, b.outcome);
        prop_assert_eq!(a.observations, b.observations);
        prop_assert_eq!(a.coverage, b.coverage);
    }

    #[test]
    fn setters_write_their_field(v in any::<i64>()) {
        let s = load("Safe.mo");
        let setter = s.d.setter_for("Safe", "secret").unwrap().to_string();
        let t = synthesize_oracle(
            &s.d.program,
            vec![
                Action::Construct { var: "o".into(), class: "Safe".into(), args: vec![] },
                Action::SetterCall { var: "o".into(), field: "secret".into(), setter, value: Literal::Int(v) },
                Action::Call { var: "o".into(), method: "peek".into(), args: vec![Literal::Int(v)] },
            ],
            StepBudget::default(),
        )
        .unwrap();
        prop_assert_eq!(&t.oracle.asserts[0].value, &Literal::Int(1));

        let c = load("Counter.mo");
        let setter = c.d.setter_for("Counter", "c").unwrap().to_string();
        let t = synthesize_oracle(
            &c.d.program,
            vec![
                Action::Construct { var: "o".into(), class: "Counter".into(), args: vec![] },
                Action::SetterCall { var: "o".into(), field: "c".into(), setter, value: Literal::Int(v) },
                Action::Call { var: "o".into(), method: "inc".into(), args: vec![] },
                Action::Call { var: "o".into(), method: "get".into(), args: vec![] },
            ],
            StepBudget::default(),
        )
        .unwrap();
        prop_assert_eq!(&t.oracle.asserts[0].value, &Literal::Int(v.wrapping_add(1)));
    }

    #[test]
    fn suites_round_trip_through_json(which in 0..CLASSES.len(), seeds in prop::collection::vec(any::<u64>(), 0..5)) {
        let (file, class) = CLASSES[which];
        let s = load(file);
        let tests: Vec<TestCase> = seeds
            .iter()
            .filter_map(|&seed| synthesize_oracle(&s.d.program, random_driver(&s.p, class, Some(&s.d), seed, 4), StepBudget::default()).ok())
            .collect();
        let suite = TestSuite::new(tests);
        prop_assert_eq!(TestSuite::from_json(&suite.to_json()).unwrap(), suite);
    }

    #[test]
    fn outcome_difference_is_symmetric(a in outcome(), b in outcome()) {
        prop_assert_eq!(a.differs(&b), b.differs(&a));
        prop_assert!(!a.differs(&a));
    }
}

fn outcome() -> impl Strategy<Value = Outcome> {
    use testimony_core::frontend::NodeId;
    use testimony_core::testcase::TrapKind;
    prop_oneof![
        prop::collection::vec(any::<bool>(), 0..3).prop_map(|verdicts| Outcome::Completed { verdicts }),
        (prop::sample::select(vec![TrapKind::DivByZero, TrapKind::NullDeref, TrapKind::StackOverflow]), 0u32..4)
            .prop_map(|(kind, at)| Outcome::Trap { kind, at: NodeId(at) }),
        Just(Outcome::BudgetExhausted),
    ]
}

// ---- evidence growth -----------------------------------------------------------

fn evidence(s: &Subjectful, suite: &TestSuite) -> EvidenceSets {
    let with = build_kill_matrix(&s.d.program, &s.cat, suite, StepBudget::default()).unwrap();
    let without = build_kill_matrix(&s.p, &s.cat, &suite.without_setters(), StepBudget::default()).unwrap();
    derive_evidence_sets(&with, &without, &s.cat).unwrap()
}

fn exhaustive(s: &Subjectful, class: &str, pool: Vec<i64>) -> TestSuite {
    enumerate_suite(&Subject::deencap(&s.d), class, &EnumBound::new(3, pool, true), StepBudget::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// Replaying a suite one test at a time: the three evidence sets only
    /// grow, and a mutant can join a hard set only when it is newly executed.
    #[test]
    fn evidence_grows_with_tests(which in prop::sample::select(vec![0usize, 1, 3, 6, 7]), picks in prop::collection::vec(any::<prop::sample::Index>(), 1..8)) {
        let (file, class) = CLASSES[which];
        let s = load(file);
        let pool = if class == "SafeSmall" { vec![0, 123] } else { vec![-1, 1, 5] };
        let all = exhaustive(&s, class, pool);
        let mut tests = Vec::new();
        let mut prev = evidence(&s, &TestSuite::default());
        for ix in picks {
            tests.push(all.tests[ix.index(all.len())].clone());
            let next = evidence(&s, &TestSuite::new(tests.clone()));
            for (c, n) in &next.classes {
                let p = prev.classes.get(c).cloned().unwrap_or_default();
                prop_assert!(p.wkill.is_subset(&n.wkill));
                prop_assert!(p.kill.is_subset(&n.kill));
                prop_assert!(p.wkill_noset.is_subset(&n.wkill_noset));
                let fresh: BTreeSet<_> = n.wkill.difference(&p.wkill).copied().collect();
                prop_assert!(n.hard_d.iter().all(|m| p.hard_d.contains(m) || fresh.contains(m)));
                prop_assert!(n.hard_o.iter().all(|m| p.hard_o.contains(m) || fresh.contains(m)));
                prop_assert!(n.kill.is_subset(&n.wkill) && n.wkill_noset.is_subset(&n.wkill));
                let hd: BTreeSet<_> = n.wkill.difference(&n.wkill_noset).copied().collect();
                let ho: BTreeSet<_> = n.wkill.difference(&n.kill).copied().collect();
                prop_assert_eq!(&n.hard_d, &hd);
                prop_assert_eq!(&n.hard_o, &ho);
                // With the executed set fixed, the metrics cannot drop.
                if fresh.is_empty() && !n.wkill.is_empty() {
                    let before = estimated_metrics(&prev, &s.cat);
                    let after = estimated_metrics(&next, &s.cat);
                    for (b, a) in before.iter().zip(&after) {
                        prop_assert!(b.contr.0 <= a.contr.0 && b.obs.0 <= a.obs.0);
                    }
                }
            }
            for m in estimated_metrics(&next, &s.cat) {
                for r in [m.contr.0, m.obs.0].into_iter().flatten() {
                    prop_assert!(*r.numer() <= *r.denom());
                }
            }
            prev = next;
        }
    }
}

/// Adding a test can put a newly executed mutant into a hard set and lower a
/// metric; only the fixed-execution case above is monotone.
#[test]
fn setter_test_can_grow_hard_d() {
    let s = load("Safe.mo");
    let plain = synthesize_oracle(
        &s.p,
        vec![
            Action::Construct { var: "o".into(), class: "Safe".into(), args: vec![] },
            Action::Call { var: "o".into(), method: "peek".into(), args: vec![Literal::Int(0)] },
        ],
        StepBudget::default(),
    )
    .unwrap();
    let setter = synthesize_oracle(
        &s.d.program,
        vec![
            Action::Construct { var: "o".into(), class: "Safe".into(), args: vec![] },
            Action::SetterCall {
                var: "o".into(),
                field: "secret".into(),
                setter: s.d.setter_for("Safe", "secret").unwrap().into(),
                value: Literal::Int(0),
            },
            Action::Call { var: "o".into(), method: "peek".into(), args: vec![Literal::Int(0)] },
        ],
        StepBudget::default(),
    )
    .unwrap();
    let a = evidence(&s, &TestSuite::new(vec![plain.clone()]));
    let b = evidence(&s, &TestSuite::new(vec![plain, setter]));
    assert!(a.classes["Safe"].hard_d.is_empty());
    assert!(!b.classes["Safe"].hard_d.is_empty());
    let (ma, mb) = (&estimated_metrics(&a, &s.cat)[0], &estimated_metrics(&b, &s.cat)[0]);
    assert!(mb.contr.0 < ma.contr.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn generation_is_a_function_of_the_seed(seed in any::<u64>(), which in prop::sample::select(vec![2usize, 3, 6, 9]), kind in prop::sample::select(FitnessKind::ALL.to_vec()), allow in any::<bool>()) {
        let (file, class) = CLASSES[which];
        let s = load(file);
        let subject = if allow { Subject::deencap(&s.d) } else { Subject::original(&s.p) };
        let cfg = GenConfig { seed, time_budget_ms: 100, allow_setters: allow, ..GenConfig::default() };
        let a = generate_suite(&subject, class, &FitnessSpec::new(kind), &cfg, &s.cat).unwrap();
        let b = generate_suite(&subject, class, &FitnessSpec::new(kind), &cfg, &s.cat).unwrap();
        prop_assert_eq!(&a, &b);
        for t in &a.tests {
            prop_assert!(allow || !t.uses_setters);
            let r = run_test(subject.program, t, StepBudget::default(), None).unwrap();
            prop_assert!(r.passes(&t.oracle));
        }
    }

    #[test]
    fn killed_implies_weak_on_generated_suites(seed in any::<u64>(), which in 0..CLASSES.len()) {
        let (file, class) = CLASSES[which];
        let s = load(file);
        let cfg = GenConfig { seed, time_budget_ms: 100, allow_setters: true, ..GenConfig::default() };
        let suite = generate_suite(&Subject::deencap(&s.d), class, &FitnessSpec::new(FitnessKind::Combined), &cfg, &s.cat).unwrap();
        let mx = build_kill_matrix(&s.d.program, &s.cat, &suite, StepBudget::default()).unwrap();
        for m in mx.mutants() {
            for t in 0..mx.n_tests() {
                let st = mx.status(*m, t).unwrap();
                if st == Status::Killed {
                    let naive = naive_status(&s.d.program, &s.cat, s.cat.get(*m).unwrap(), &suite.tests[t], t, StepBudget::default()).unwrap();
                    prop_assert_eq!(naive, Status::Killed);
                }
            }
        }
    }
}
