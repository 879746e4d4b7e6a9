#![no_main]

use entrocon::io::ChainDocument;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(doc) = ChainDocument::parse(text) else { return };
    let once = doc.to_json();
    let again = ChainDocument::parse(&once).expect("emitted documents parse");
    assert_eq!(again.to_json(), once);
    let _ = doc.to_pair();
});
