#![no_main]

use libfuzzer_sys::fuzz_target;
use testimony_core::deencap::synthesize_setters;
use testimony_core::frontend::parse;
use testimony_core::interp::{run_test, run_with_infection_probes, StepBudget};
use testimony_core::mutation::generate_mutants;
use testimony_core::testcase::TestSuite;

const ACCOUNT: &str = include_str!("../../corpus/Account.mo");

// Arbitrary suites against a fixed program: execution must return, never panic.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(suite) = TestSuite::from_json(text) else { return };
    let p = synthesize_setters(&parse(ACCOUNT).unwrap()).program;
    let cat = generate_mutants(&p, &Default::default());
    let budget = StepBudget(10_000);
    for t in &suite.tests {
        let plain = run_test(&p, t, budget, None);
        let probed = run_with_infection_probes(&p, &cat, t, budget);
        assert_eq!(plain.is_ok(), probed.is_ok());
        if let Some(m) = cat.mutants().first() {
            let _ = run_test(&p, t, budget, Some(m));
        }
    }
});
