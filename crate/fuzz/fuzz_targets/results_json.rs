#![no_main]

use libfuzzer_sys::fuzz_target;
use rssl::report::{parse_results, render_summary, render_svg, TableFormat};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(doc) = parse_results(text) {
        assert_eq!(parse_results(&doc.to_json()).unwrap(), doc);
        let _ = render_summary(&doc, TableFormat::Markdown);
        let _ = render_svg(&doc, true);
    }
});
