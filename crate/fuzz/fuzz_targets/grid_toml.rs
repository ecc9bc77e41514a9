#![no_main]

use libfuzzer_sys::fuzz_target;
use robust_dispatch::grid::Grid;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(mut grid) = Grid::from_toml_str(text) {
            let _ = grid.compute_and_cache_ptdf();
        }
    }
});
