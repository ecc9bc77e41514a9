//! Parses a wind CSV and checks that whatever parses writes back to the same series.

#![no_main]

use libfuzzer_sys::fuzz_target;
use robust_dispatch::wind::WindSeries;

fuzz_target!(|data: &[u8]| {
    let Ok(series) = WindSeries::from_csv_reader(data) else {
        return;
    };
    let mut out = Vec::new();
    series.write_csv(&mut out).unwrap();
    let again = WindSeries::from_csv_reader(out.as_slice()).unwrap();
    assert_eq!(series.speeds, again.speeds);
});
