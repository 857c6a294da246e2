//! Exact integer comparisons against fractional powers.
//!
//! Thresholds like Δ^{1/4} or Δ^{9/10} are irrational in general; every
//! comparison here is done on integer powers (u128, overflow treated as
//! larger-than-anything) so no floating-point rounding can flip a verdict.

use std::cmp::Ordering;

/// Compare `a^ae` with `b^be`.  A side that overflows u128 counts as
/// larger; both sides overflowing is outside the supported input range and
/// panics in debug builds.
pub fn pow_cmp(a: u64, ae: u32, b: u64, be: u32) -> Ordering {
    let lhs = (a as u128).checked_pow(ae);
    let rhs = (b as u128).checked_pow(be);
    match (lhs, rhs) {
        (Some(l), Some(r)) => l.cmp(&r),
        (None, Some(_)) => Ordering::Greater,
        (Some(_), None) => Ordering::Less,
        (None, None) => {
            debug_assert!(false, "pow_cmp: both sides overflow");
            Ordering::Equal
        }
    }
}

/// Largest `t` with `t^den <= x^num`, i.e. `floor(x^(num/den))`.
pub fn floor_pow_frac(x: u64, num: u32, den: u32) -> u64 {
    assert!(den > 0 && num <= den, "only powers at most 1 are supported");
    if x == 0 {
        return 0;
    }
    let (mut lo, mut hi) = (0u64, x.max(1) + 1);
    // Invariant: lo^den <= x^num < hi^den.
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if pow_cmp(mid, den, x, num) != Ordering::Greater {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}
