#![no_main]

use std::path::Path;

use interlayer::pipeline::AnalysisConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = AnalysisConfig::from_str_with_base(text, Path::new("/fuzz")) {
            // anything that parses must also digest
            let _ = cfg.digest();
        }
    }
});
