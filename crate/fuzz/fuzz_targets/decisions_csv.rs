#![no_main]

use libfuzzer_sys::fuzz_target;
use scoremap::io::{parse_decisions, write_decisions};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(xs) = parse_decisions(text) {
        let mut buf = Vec::new();
        write_decisions(&mut buf, &xs).unwrap();
        if !xs.is_empty() {
            assert_eq!(parse_decisions(std::str::from_utf8(&buf).unwrap()).unwrap(), xs);
        }
    }
});
