#![no_main]

use libfuzzer_sys::fuzz_target;
use sea_core::policy::ParamVector;

fuzz_target!(|data: &[u8]| {
    if let Ok(p) = ParamVector::from_bytes(data) {
        let bytes = p.to_bytes();
        let q = ParamVector::from_bytes(&bytes).unwrap();
        assert_eq!(q.to_bytes(), bytes);
    }
});
