#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use retrace_cli::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    match ExperimentConfig::parse(text, Path::new("/fuzz")) {
        Ok(cfg) => assert!(cfg.mode == retrace_cli::Mode::Scores || !cfg.seeds.is_empty()),
        Err(e) => {
            if let Some(line) = e.line {
                assert!(line >= 1 && line <= text.lines().count());
            }
        }
    }
});
