#![no_main]

use fracbin::nlist::{format_n_list, parse_n_list};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(list) = parse_n_list(text) {
            assert!(list.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(parse_n_list(&format_n_list(&list)).unwrap(), list);
        }
    }
});
