#![no_main]

use libfuzzer_sys::fuzz_target;
use scoremap::io::{model_to_json, parse_model};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = parse_model(text) {
        let input = vec![1.0; model.input_dim];
        let _ = model.forward(&input);
        assert_eq!(parse_model(&model_to_json(&model).unwrap()).unwrap(), model);
    }
});
