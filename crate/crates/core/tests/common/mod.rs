#![allow(dead_code)]

pub mod rfc8032;

use num_bigint::BigInt;

/// `round(value * num / den)`, ties away from zero, clamped to `i32`, computed
/// with arbitrary-precision integers.
pub fn rational_round_oracle(value: i64, num: u32, den: u32) -> i32 {
    let product = BigInt::from(value) * BigInt::from(num);
    let den = BigInt::from(den);
    let two = BigInt::from(2);
    let magnitude = if product < BigInt::from(0) {
        -product.clone()
    } else {
        product.clone()
    };
    // floor((2|a| + d) / 2d) is |a|/d rounded half up.
    let rounded = (&two * &magnitude + &den) / (&two * &den);
    let signed = if product < BigInt::from(0) { -rounded } else { rounded };
    let lo = BigInt::from(i32::MIN);
    let hi = BigInt::from(i32::MAX);
    let clamped = if signed < lo {
        lo
    } else if signed > hi {
        hi
    } else {
        signed
    };
    i32::try_from(clamped).unwrap()
}
