#![no_main]

use libfuzzer_sys::fuzz_target;
use retrace_core::analysis::{inter_algorithm_scores, ScoreTable};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(table) = ScoreTable::parse_csv(text) {
        let report = inter_algorithm_scores(&table);
        for f in &report.f {
            assert!(f.windows(2).all(|w| w[1] <= w[0]));
            assert!(f.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
});
