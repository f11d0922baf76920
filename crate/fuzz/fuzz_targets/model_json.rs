#![no_main]

use libfuzzer_sys::fuzz_target;
use rssl::EnsembleModel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = EnsembleModel::from_json(text) {
        let again = EnsembleModel::from_json(&model.to_json()).unwrap();
        assert_eq!(again.to_json(), model.to_json());
    }
});
