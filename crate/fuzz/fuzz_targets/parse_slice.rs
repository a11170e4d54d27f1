#![no_main]

use libfuzzer_sys::fuzz_target;
use strix::{Ndarray, SliceSpec};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = text.parse::<SliceSpec>() {
        let back: SliceSpec = spec.to_string().parse().expect("printed spec parses");
        assert_eq!(back, spec);
        let x = Ndarray::<f64>::sequential(&[4, 5, 6]).unwrap();
        if let Ok(s) = x.get_slice(&spec) {
            let mut y = x.clone();
            y.set_slice(&spec, &s).expect("slice writes back");
            assert!(y.bitwise_eq(&x));
        }
    }
});
