#![no_main]

use libfuzzer_sys::fuzz_target;
use robust_dispatch::sim::DemandSeries;

fuzz_target!(|data: &[u8]| {
    let Ok(series) = DemandSeries::from_csv_reader(data) else {
        return;
    };
    let mut out = Vec::new();
    series.write_csv(&mut out).unwrap();
    let again = DemandSeries::from_csv_reader(out.as_slice()).unwrap();
    assert_eq!(series.values, again.values);
});
