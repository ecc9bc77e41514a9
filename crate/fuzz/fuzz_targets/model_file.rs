#![no_main]

use libfuzzer_sys::fuzz_target;
use robust_dispatch::wind::WindModel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = WindModel::from_json_str(text) {
        let again = WindModel::from_json_str(&model.to_json_string()).unwrap();
        assert_eq!(model.to_json_string(), again.to_json_string());
    }
});
