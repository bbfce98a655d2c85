#![no_main]

use libfuzzer_sys::fuzz_target;
use sea_cli::io::{parse_jsonl, to_jsonl};
use sea_core::gate::Trajectory;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(items) = parse_jsonl::<Trajectory>(text) {
        let again: Vec<Trajectory> = parse_jsonl(&to_jsonl(&items)).unwrap();
        assert_eq!(again.len(), items.len());
    }
});
