#![no_main]

use entrocon::certify::{BipartiteReport, BipartiteRequest};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(report) = BipartiteReport::parse(text) {
        let back = serde_json::to_string(&report).expect("reports serialize");
        let again = BipartiteReport::parse(&back).expect("emitted reports parse");
        assert_eq!(serde_json::to_string(&again).unwrap(), back);
    }
    let _ = BipartiteRequest::parse(text);
});
