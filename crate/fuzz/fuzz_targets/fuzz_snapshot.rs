#![no_main]

use cavity_bec::gp::snapshot::{decode_snapshot, encode_snapshot};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = decode_snapshot(data) {
        assert_eq!(s.x.len(), s.psi.len());
        assert_eq!(encode_snapshot(&s), data);
    }
});
