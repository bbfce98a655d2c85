#![no_main]

use libfuzzer_sys::fuzz_target;
use sea_core::policy::{parse, serialize};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok((thought, action)) = parse(text) {
        let again = parse(&serialize(&thought, &action)).expect("canonical form must parse");
        assert_eq!(again, (thought, action));
    }
});
