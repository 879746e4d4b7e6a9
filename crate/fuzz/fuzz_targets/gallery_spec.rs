#![no_main]

use entrocon::gallery::{known_constants, make_chain, ChainSpec};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(spec) = serde_json::from_slice::<ChainSpec>(data) else { return };
    let _ = known_constants(&spec);
    // Keep constructions small enough for the fuzzer's time budget.
    let small = spec.params.iter().all(|(name, v)| name == "M" || name == "seed" || v.abs() <= 64.0);
    if small {
        if let Ok(inst) = make_chain(&spec) {
            assert_eq!(inst.states.len(), inst.pair.len());
        }
    }
});
