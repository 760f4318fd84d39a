#![no_main]

use libfuzzer_sys::fuzz_target;
use wann::harness::{parse_run, run_to_record};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(run) = parse_run(text) {
        let back = parse_run(&run_to_record(&run).to_string()).expect("a written run parses");
        assert_eq!(back.method, run.method);
        assert_eq!(back.seed, run.seed);
        assert_eq!(back.status, run.status);
        assert_eq!(back.curve.len(), run.curve.len());
    }
});
