#![no_main]

use libfuzzer_sys::fuzz_target;
use wann::data::{read_csv, write_csv, CsvSchema};

fuzz_target!(|data: &[u8]| {
    let schemas = [
        CsvSchema::new("y"),
        CsvSchema::new("y").with_domain("domain"),
        CsvSchema::new("y").with_features(vec!["x".into()]),
    ];
    for schema in &schemas {
        let Ok(parsed) = read_csv(data, schema) else {
            continue;
        };
        assert_eq!(parsed.sample.x.nrows(), parsed.sample.y.len());
        assert_eq!(parsed.sample.x.ncols(), parsed.feature_names.len());
        if let Some(tags) = &parsed.is_target {
            assert_eq!(tags.len(), parsed.sample.len());
        }
        // what was read must be writable and read back the same
        let mut out = Vec::new();
        if write_csv(&mut out, &parsed.sample, &parsed.feature_names, "y", parsed.is_target.as_deref()).is_ok() {
            if let Ok(again) = read_csv(out.as_slice(), schema) {
                assert_eq!(again.sample, parsed.sample);
            }
        }
    }
});
