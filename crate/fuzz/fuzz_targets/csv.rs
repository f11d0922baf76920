#![no_main]

use libfuzzer_sys::fuzz_target;
use rssl::{parse_csv, Task};

fuzz_target!(|data: &[u8]| {
    for task in [Task::Regression, Task::Classification] {
        if let Ok(d) = parse_csv(data, "y", task) {
            assert_eq!(d.features().nrows(), d.target().len());
            let mut buf = Vec::new();
            d.write_csv(&mut buf).unwrap();
            let back = parse_csv(buf.as_slice(), "y", task).unwrap();
            assert_eq!(back.target(), d.target());
        }
    }
});
