#![no_main]

use evfuse::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(config) = RunConfig::from_json(text) {
        let json = config.to_json();
        assert_eq!(RunConfig::from_json(&json).expect("own output parses"), config);
    }
});
