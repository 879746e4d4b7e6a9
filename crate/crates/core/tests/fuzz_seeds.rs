//! Replays the checked-in fuzz corpus through the same entry points as the
//! fuzz targets, so the seeds are exercised on stable toolchains.

use std::path::PathBuf;

use entrocon::certify::{BipartiteReport, BipartiteRequest};
use entrocon::gallery::{known_constants, make_chain, ChainSpec};
use entrocon::io::ChainDocument;

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut files: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    assert!(!files.is_empty(), "empty corpus {}", dir.display());
    files
        .into_iter()
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn chain_json_seeds() {
    let mut parsed = 0;
    for (name, data) in corpus("chain_json") {
        let Ok(text) = std::str::from_utf8(&data) else {
            continue;
        };
        let Ok(doc) = ChainDocument::parse(text) else {
            continue;
        };
        parsed += 1;
        let once = doc.to_json();
        let again = ChainDocument::parse(&once).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(again.to_json(), once, "{name}");
        let _ = doc.to_pair();
    }
    assert!(parsed >= 2);
}

#[test]
fn gallery_spec_seeds() {
    let mut built = 0;
    for (name, data) in corpus("gallery_spec") {
        let Ok(spec) = serde_json::from_slice::<ChainSpec>(&data) else {
            continue;
        };
        let _ = known_constants(&spec);
        if let Ok(inst) = make_chain(&spec) {
            assert_eq!(inst.states.len(), inst.pair.len(), "{name}");
            built += 1;
        }
    }
    assert!(built >= 3);
}

#[test]
fn certificate_report_seeds() {
    let mut reports = 0;
    let mut requests = 0;
    for (name, data) in corpus("certificate_report") {
        let Ok(text) = std::str::from_utf8(&data) else {
            continue;
        };
        if let Ok(report) = BipartiteReport::parse(text) {
            reports += 1;
            let back = serde_json::to_string(&report).unwrap();
            let again = BipartiteReport::parse(&back).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(again, report, "{name}");
        }
        if BipartiteRequest::parse(text).is_ok() {
            requests += 1;
        }
    }
    assert_eq!((reports, requests), (1, 1));
}
