#![no_main]

use libfuzzer_sys::fuzz_target;
use scoremap::io::{parse_transform, transform_sidecar_json, write_transform_csv};

// Input is the knot table and the JSON sidecar separated by a NUL byte.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Some((knots, sidecar)) = text.split_once('\0') else {
        return;
    };
    if let Ok(t) = parse_transform(knots, sidecar) {
        for e in &t.per_objective {
            let (lo, hi) = e.support();
            assert!(e.score(lo) >= e.score(hi));
        }
        let mut buf = Vec::new();
        write_transform_csv(&mut buf, &t).unwrap();
        let side = transform_sidecar_json(&t).unwrap();
        assert_eq!(parse_transform(std::str::from_utf8(&buf).unwrap(), &side).unwrap(), t);
    }
});
