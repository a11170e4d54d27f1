#![no_main]

use libfuzzer_sys::fuzz_target;
use strix::AnyArray;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(a) = AnyArray::parse(text) {
        let again = match &a {
            AnyArray::F32(x) => AnyArray::parse(&x.to_text()),
            AnyArray::F64(x) => AnyArray::parse(&x.to_text()),
        }
        .expect("printed array parses");
        assert_eq!(again.shape(), a.shape());
    }
});
