#![no_main]

use libfuzzer_sys::fuzz_target;
use scoremap::io::{parse_archive, write_archive_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(archive) = parse_archive(text, "fuzz") {
        let mut buf = Vec::new();
        write_archive_csv(&mut buf, &archive).unwrap();
        assert_eq!(
            parse_archive(std::str::from_utf8(&buf).unwrap(), "fuzz").unwrap(),
            archive
        );
    }
});
