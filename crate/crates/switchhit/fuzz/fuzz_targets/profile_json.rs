#![no_main]

use libfuzzer_sys::fuzz_target;
use switchhit::TechniqueProfile;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = TechniqueProfile::from_json_str(s);
    }
});
