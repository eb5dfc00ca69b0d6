#![no_main]

use libfuzzer_sys::fuzz_target;
use testimony_core::deencap::synthesize_setters;
use testimony_core::frontend::{check_program, parse};
use testimony_core::mutation::{apply_mutant, generate_mutants};

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    let Ok(p) = parse(src) else { return };
    if !check_program(&p).is_empty() {
        return;
    }
    let cat = generate_mutants(&p, &Default::default());
    for m in cat.mutants() {
        let q = apply_mutant(&p, &cat, m.id).expect("catalog mutant applies");
        assert!(check_program(&q).is_empty());
    }
    let d = synthesize_setters(&p);
    assert!(check_program(&d.program).is_empty());
});
