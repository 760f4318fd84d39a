#![no_main]

use libfuzzer_sys::fuzz_target;
use wann::harness::Record;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(record) = text.parse::<Record>() else {
        return;
    };
    // typed lookups used by option resolution must not panic
    for key in ["epochs", "seed", "dims", "clip", "lr", "hidden", "out"] {
        let _ = record.parse::<usize>(key);
        let _ = record.parse::<u64>(key);
        let _ = record.parse::<f64>(key);
        let _ = record.parse_list::<usize>(key);
    }
    let reparsed: Record = record.to_string().parse().expect("a written record parses");
    assert_eq!(reparsed, record);
});
