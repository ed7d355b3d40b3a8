#![no_main]

use cavity_bec::scenario::{parse_csv, parse_timeseries};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(t) = parse_csv(text) {
            assert!(t.rows.iter().all(|r| r.len() == t.header.len()));
        }
        let _ = parse_timeseries(text);
    }
});
