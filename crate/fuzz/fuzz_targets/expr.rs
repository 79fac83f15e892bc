#![no_main]

use libfuzzer_sys::fuzz_target;
use pxlap::expr::Expr;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    let Ok(e) = Expr::parse(src, &["x", "y", "s1", "s2"]) else { return };
    let _ = e.eval(&[0.25, 0.5, -1.0, 3.0]);
    // printing must give back something that parses to the same function
    let again = Expr::parse(&e.to_string(), &["x", "y", "s1", "s2"]).expect("printed expression reparses");
    let (a, b) = (e.eval(&[0.3, 0.7, 2.0, -0.5]), again.eval(&[0.3, 0.7, 2.0, -0.5]));
    assert!(a == b || (a.is_nan() && b.is_nan()) || (a - b).abs() <= 1e-9 * a.abs().max(1.0));
});
