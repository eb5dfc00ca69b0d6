#![no_main]

use libfuzzer_sys::fuzz_target;
use testimony_core::pipeline::Corpus;

const COUNTER: &str = include_str!("../../corpus/Counter.mo");
const LEDGER: &str = include_str!("../../corpus/Ledger.mo");

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let sources = vec![("Counter.mo".to_string(), COUNTER.to_string()), ("Ledger.mo".to_string(), LEDGER.to_string())];
    let _ = Corpus::from_sources(sources, Some(text));
});
