//! ```bash
//! cargo fuzz run grid_json corpus/grid_json
//! ```

#![no_main]

use libfuzzer_sys::fuzz_target;
use robust_dispatch::grid::Grid;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(mut grid) = Grid::from_json_str(text) {
        // A grid that validates must also yield shift factors or a clean error.
        let _ = grid.compute_and_cache_ptdf();
    }
});
