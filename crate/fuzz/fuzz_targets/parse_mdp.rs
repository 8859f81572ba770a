#![no_main]

use libfuzzer_sys::fuzz_target;
use retrace_core::Mdp;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(mdp) = Mdp::parse(text) {
        // Anything accepted must survive a round trip.
        let again = Mdp::parse(&mdp.to_text()).expect("serialised MDP parses");
        assert_eq!(again, mdp);
    }
});
