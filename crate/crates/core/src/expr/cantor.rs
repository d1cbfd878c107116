//! Exact queries against the middle-thirds Cantor set.
//!
//! Floats are dyadic rationals, so comparisons against cell endpoints
//! `j / 3^k` are done exactly in 128-bit integer arithmetic.

use std::cmp::Ordering;

/// Ternary depth of the cover used by [`classify`].
pub const CANTOR_DEPTH: u32 = 40;

/// Orbit steps tried by [`membership`] before giving up.
const ORBIT_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoverClass {
    /// The interval misses the depth-`d` cover, hence the Cantor set.
    Disjoint,
    /// The interval contains a whole cell of some level `k <= d`.
    FullCell,
    /// Neither could be shown.
    Partial,
}

/// `x = mantissa * 2^-shift` with `mantissa` odd, for finite `x > 0`.
fn dyadic(x: f64) -> (u64, u32) {
    debug_assert!(x > 0.0 && x.is_finite());
    let bits = x.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    let (mut m, mut e) = if exp == 0 {
        (frac, -1074)
    } else {
        (frac | (1u64 << 52), exp - 1075)
    };
    let tz = m.trailing_zeros();
    m >>= tz;
    e += tz as i32;
    debug_assert!(e < 0 || x >= 1.0);
    (m, (-e).max(0) as u32)
}

const POW3: [u128; CANTOR_DEPTH as usize + 1] = {
    let mut t = [1u128; CANTOR_DEPTH as usize + 1];
    let mut i = 1;
    while i < t.len() {
        t[i] = t[i - 1] * 3;
        i += 1;
    }
    t
};

/// A number in `[0, 1]` as `mantissa * 2^-shift`, decomposed once per query.
#[derive(Clone, Copy)]
struct Dyadic {
    mantissa: u128,
    shift: u32,
}

impl Dyadic {
    fn new(x: f64) -> Self {
        if x == 0.0 {
            return Dyadic { mantissa: 0, shift: 0 };
        }
        let (m, shift) = dyadic(x);
        Dyadic {
            mantissa: m as u128,
            shift,
        }
    }

    /// Sign of `x * 3^k - j`.
    fn cmp_scaled(self, k: u32, j: u64) -> Ordering {
        let t = self.mantissa * POW3[k as usize];
        let (q, rem) = if self.shift >= 128 {
            (0, t != 0)
        } else {
            (t >> self.shift, t & ((1u128 << self.shift) - 1) != 0)
        };
        match q.cmp(&(j as u128)) {
            Ordering::Equal if rem => Ordering::Greater,
            ord => ord,
        }
    }
}

pub fn classify(lo: f64, hi: f64) -> CoverClass {
    classify_to_depth(lo, hi, CANTOR_DEPTH)
}

pub fn classify_to_depth(lo: f64, hi: f64, depth: u32) -> CoverClass {
    debug_assert!(lo <= hi);
    debug_assert!(depth <= CANTOR_DEPTH);
    if hi < 0.0 || lo > 1.0 {
        return CoverClass::Disjoint;
    }
    let (lo, hi) = (Dyadic::new(lo.max(0.0)), Dyadic::new(hi.min(1.0)));
    let mut partial = false;
    // Depth-first, so at most one pending sibling per level sits on the stack.
    let mut stack = [(0u64, 0u32); 2 * CANTOR_DEPTH as usize + 4];
    let mut len = 1;
    while len > 0 {
        len -= 1;
        let (j, k) = stack[len];
        let meets = lo.cmp_scaled(k, j + 1) != Ordering::Greater
            && hi.cmp_scaled(k, j) != Ordering::Less;
        if !meets {
            continue;
        }
        let inside = lo.cmp_scaled(k, j) != Ordering::Greater
            && hi.cmp_scaled(k, j + 1) != Ordering::Less;
        if inside {
            return CoverClass::FullCell;
        }
        if k == depth {
            partial = true;
            continue;
        }
        stack[len] = (3 * j + 2, k + 1);
        stack[len + 1] = (3 * j, k + 1);
        len += 2;
    }
    if partial {
        CoverClass::Partial
    } else {
        CoverClass::Disjoint
    }
}

/// Decides whether the float `x` lies in the Cantor set.
///
/// `x` is in the set iff no iterate of the tripling map `t -> 3t mod 1`
/// lands in the open middle third. For a dyadic `x = m / 2^s` the orbit
/// is purely periodic, so it either hits the middle third or returns to
/// its start. Returns `None` when the denominator is too large or the
/// orbit outlasts the step budget.
pub fn membership(x: f64) -> Option<bool> {
    if !(0.0..=1.0).contains(&x) {
        return Some(false);
    }
    if x == 0.0 || x == 1.0 {
        return Some(true);
    }
    if classify(x, x) == CoverClass::Disjoint {
        return Some(false);
    }
    let (m, shift) = dyadic(x);
    if shift > 125 {
        return None;
    }
    let modulus = 1u128 << shift;
    let start = m as u128;
    let mut r = start;
    for _ in 0..ORBIT_BUDGET {
        let t = 3 * r;
        if modulus < t && t < 2 * modulus {
            return Some(false);
        }
        r = t % modulus;
        if r == start {
            return Some(true);
        }
    }
    None
}
