//! Replays the fuzz seed corpora, plus random mutations of them, through the
//! parsers. The fuzz targets need a nightly toolchain; this keeps the
//! no-panic and round-trip properties checked on stable.

use std::fs;
use std::path::PathBuf;

use proptest::prelude::*;
use scoremap::io;
use scoremap_cli::config::RunConfig;

fn corpus(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut files: Vec<_> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files.iter().map(|p| fs::read(p).unwrap()).collect()
}

/// Returns whether the input parsed; panics on a broken round trip.
fn exercise(target: &str, data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else {
        return false;
    };
    match target {
        "decisions_csv" => match io::parse_decisions(text) {
            Ok(xs) => {
                let mut buf = Vec::new();
                io::write_decisions(&mut buf, &xs).unwrap();
                if !xs.is_empty() {
                    assert_eq!(io::parse_decisions(std::str::from_utf8(&buf).unwrap()).unwrap(), xs);
                }
                true
            }
            Err(_) => false,
        },
        "transform_csv" => {
            let Some((knots, sidecar)) = text.split_once('\0') else {
                return false;
            };
            match io::parse_transform(knots, sidecar) {
                Ok(t) => {
                    let mut buf = Vec::new();
                    io::write_transform_csv(&mut buf, &t).unwrap();
                    let side = io::transform_sidecar_json(&t).unwrap();
                    assert_eq!(
                        io::parse_transform(std::str::from_utf8(&buf).unwrap(), &side).unwrap(),
                        t
                    );
                    true
                }
                Err(_) => false,
            }
        }
        "archive_csv" => match io::parse_archive(text, "seed") {
            Ok(a) => {
                let mut buf = Vec::new();
                io::write_archive_csv(&mut buf, &a).unwrap();
                assert_eq!(
                    io::parse_archive(std::str::from_utf8(&buf).unwrap(), "seed").unwrap(),
                    a
                );
                true
            }
            Err(_) => false,
        },
        "model_json" => match io::parse_model(text) {
            Ok(m) => {
                let _ = m.forward(&vec![1.0; m.input_dim]);
                assert_eq!(io::parse_model(&io::model_to_json(&m).unwrap()).unwrap(), m);
                true
            }
            Err(_) => false,
        },
        "run_config" => RunConfig::from_toml_str(text).is_ok(),
        other => panic!("unknown target {other}"),
    }
}

const TARGETS: [&str; 5] = [
    "decisions_csv",
    "transform_csv",
    "archive_csv",
    "model_json",
    "run_config",
];

#[test]
fn every_seed_parses() {
    for target in TARGETS {
        let seeds = corpus(target);
        assert!(!seeds.is_empty(), "{target} has no seeds");
        for seed in seeds {
            assert!(
                exercise(target, &seed),
                "{target} seed rejected: {}",
                String::from_utf8_lossy(&seed)
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn mutated_seeds_never_panic(
        target in prop::sample::select(TARGETS.to_vec()),
        pick in any::<prop::sample::Index>(),
        edits in prop::collection::vec((any::<prop::sample::Index>(), any::<u8>(), 0u8..3), 1..8),
    ) {
        let seeds = corpus(target);
        let mut data = pick.get(&seeds).clone();
        for (at, byte, op) in edits {
            if data.is_empty() {
                data.push(byte);
                continue;
            }
            let i = at.index(data.len());
            match op {
                0 => data[i] = byte,
                1 => data.insert(i, byte),
                _ => data.truncate(i),
            }
        }
        exercise(target, &data);
    }

    #[test]
    fn arbitrary_text_never_panics(target in prop::sample::select(TARGETS.to_vec()), text in "\\PC{0,200}") {
        exercise(target, text.as_bytes());
    }
}
