#![no_main]

use libfuzzer_sys::fuzz_target;
use sea_cli::io::{parse_jsonl, to_jsonl};
use sea_core::grounding::GroundingSample;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(items) = parse_jsonl::<GroundingSample>(text) {
        let again: Vec<GroundingSample> = parse_jsonl(&to_jsonl(&items)).unwrap();
        assert_eq!(again.len(), items.len());
    }
});
