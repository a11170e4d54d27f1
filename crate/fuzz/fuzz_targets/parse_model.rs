#![no_main]

use libfuzzer_sys::fuzz_target;
use strix::models::{LinearModel, Network};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(net) = Network::from_text(text) {
        let again = Network::from_text(&net.to_text()).expect("printed network parses");
        assert_eq!(again.num_params(), net.num_params());
    }
    if let Ok(m) = LinearModel::from_text(text) {
        let again = LinearModel::from_text(&m.to_text()).expect("printed model parses");
        assert_eq!(again.w.shape(), m.w.shape());
    }
});
