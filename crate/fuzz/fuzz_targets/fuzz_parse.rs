#![no_main]

use libfuzzer_sys::fuzz_target;
use testimony_core::frontend::{parse, render};

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(p) = parse(src) {
        let text = render(&p);
        let q = parse(&text).expect("rendered program reparses");
        assert_eq!(p, q);
    }
});
