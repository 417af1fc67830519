#![no_main]

use interlayer::pipeline::PhantomSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(spec) = PhantomSpec::parse(text) {
            assert_eq!(PhantomSpec::parse(&spec.to_text()).ok(), Some(spec));
        }
    }
});
