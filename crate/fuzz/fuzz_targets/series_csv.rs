#![no_main]

use libfuzzer_sys::fuzz_target;
use ptscrc::io::{parse_series_csv, series_to_csv_string};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(series) = parse_series_csv(text) {
        // anything accepted must survive a write/read cycle unchanged
        let again = parse_series_csv(&series_to_csv_string(&series).unwrap()).unwrap();
        assert_eq!(series, again);
    }
});
