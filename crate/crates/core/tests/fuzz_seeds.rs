//! Runs every decoder over the checked-in fuzz corpus.

use std::path::{Path, PathBuf};

use cavity_bec::gp::snapshot::{decode_snapshot, encode_snapshot};
use cavity_bec::scenario::{parse_config, parse_csv, parse_timeseries};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir: PathBuf = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            (
                path.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&path).unwrap(),
            )
        })
        .collect();
    out.sort();
    assert!(!out.is_empty());
    out
}

#[test]
fn config_seeds() {
    for (name, bytes) in seeds("fuzz_config") {
        let text = String::from_utf8(bytes).unwrap();
        let parsed = parse_config(&text);
        assert_eq!(parsed.is_ok(), !name.starts_with("bad_"), "{name}: {parsed:?}");
    }
}

#[test]
fn snapshot_seeds() {
    for (name, bytes) in seeds("fuzz_snapshot") {
        match decode_snapshot(&bytes) {
            Ok(s) => {
                assert!(
                    matches!(name.as_str(), "four_samples.bin" | "empty.bin"),
                    "{name} decoded"
                );
                assert_eq!(encode_snapshot(&s), bytes);
            }
            Err(e) => assert!(e.to_string().contains("snapshot"), "{name}: {e}"),
        }
    }
}

#[test]
fn csv_seeds() {
    for (name, bytes) in seeds("fuzz_timeseries_csv") {
        let text = String::from_utf8(bytes).unwrap();
        let generic = parse_csv(&text);
        assert_eq!(generic.is_ok(), name != "ragged.csv", "{name}: {generic:?}");
        let series = parse_timeseries(&text);
        assert_eq!(
            series.is_ok(),
            matches!(name.as_str(), "dma_head.csv" | "with_branch.csv" | "non_finite.csv"),
            "{name}"
        );
    }
}
