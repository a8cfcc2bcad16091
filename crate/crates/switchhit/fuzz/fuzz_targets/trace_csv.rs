#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // The CSV reader handles arbitrary bytes; row validation must only
    // ever return Err, never panic.
    let _ = switchhit::switch::parse_traces_csv(data);
});
