#![no_main]

use libfuzzer_sys::fuzz_target;
use testimony_core::testcase::TestSuite;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(suite) = TestSuite::from_json(text) {
        let again = TestSuite::from_json(&suite.to_json()).expect("serialized suite reloads");
        assert_eq!(suite, again);
    }
});
