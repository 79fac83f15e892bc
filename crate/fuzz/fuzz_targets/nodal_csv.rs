#![no_main]

use libfuzzer_sys::fuzz_target;
use pxlap::mesh::parse_nodal_csv;

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let _ = parse_nodal_csv(&text);
});
