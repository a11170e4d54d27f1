#![no_main]

use libfuzzer_sys::fuzz_target;
use strix::{FancySpec, Ndarray};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = text.parse::<FancySpec>() {
        let x = Ndarray::<f64>::sequential(&[4, 5, 6]).unwrap();
        if let Ok(s) = x.get_fancy(&spec) {
            let mut y = x.clone();
            // duplicate indices are rejected on write
            if y.set_fancy(&spec, &s).is_ok() {
                assert!(y.bitwise_eq(&x));
            }
        }
    }
});
