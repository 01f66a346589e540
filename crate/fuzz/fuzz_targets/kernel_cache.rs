#![no_main]

use fracbin::kernel::cache::{decode, decode_header, encode};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = decode_header(data);
    if let Ok(table) = decode(data) {
        // anything accepted must survive a round trip unchanged
        assert_eq!(encode(&table), data);
    }
});
