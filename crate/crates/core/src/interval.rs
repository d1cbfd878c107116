//! Closed, bounded real intervals with outward-rounded arithmetic.
//!
//! Endpoints are plain `f64`. Each basic operation computes the
//! round-to-nearest result together with its exact rounding error (two-sum for
//! addition, Dekker's two-product for products, quotients and square roots).
//! An endpoint is moved one step to the next representable value only
//! when that error points outward, so results are as tight as directed
//! rounding would give without touching the FPU rounding mode. Operations
//! whose residual cannot be trusted (gradual underflow) fall back to an
//! unconditional one-step nudge.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::Serialize;

use crate::error::{Error, Result};

/// Below this magnitude a product residual may itself be rounded.
const RESIDUAL_SAFE: f64 = 1.0e-290;

/// Above this magnitude Veltkamp splitting may overflow.
const SPLIT_SAFE: f64 = 1.0e290;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

/// Distance from `|x|` to the next representable value above it.
pub fn ulp(x: f64) -> f64 {
    let a = x.abs();
    if a.is_finite() {
        a.next_up() - a
    } else {
        f64::INFINITY
    }
}

/// A scalar result bracketed by its round-down and round-up values.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Rounded {
    pub down: f64,
    pub up: f64,
    pub exact: bool,
}

impl Rounded {
    fn exact(v: f64) -> Self {
        Rounded {
            down: v,
            up: v,
            exact: true,
        }
    }

    fn nudged(v: f64) -> Self {
        Rounded {
            down: v.next_down(),
            up: v.next_up(),
            exact: false,
        }
    }

    /// `v` is the nearest value, `err` has the sign of `true - v`.
    fn from_residual(v: f64, err: f64) -> Self {
        if err == 0.0 {
            Rounded::exact(v)
        } else if err > 0.0 {
            Rounded {
                down: v,
                up: v.next_up(),
                exact: false,
            }
        } else {
            Rounded {
                down: v.next_down(),
                up: v,
                exact: false,
            }
        }
    }

    fn overflowed(v: f64) -> Self {
        // +inf after rounding to nearest means the true value is at least MAX.
        if v > 0.0 {
            Rounded {
                down: f64::MAX,
                up: f64::INFINITY,
                exact: false,
            }
        } else {
            Rounded {
                down: f64::NEG_INFINITY,
                up: f64::MIN,
                exact: false,
            }
        }
    }
}

pub(crate) fn add_r(a: f64, b: f64) -> Rounded {
    let s = a + b;
    if !s.is_finite() {
        return Rounded::overflowed(s);
    }
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    Rounded::from_residual(s, err)
}

/// Veltkamp split of `a` into two 26-bit halves.
fn split(a: f64) -> (f64, f64) {
    let c = 134_217_729.0 * a;
    let hi = c - (c - a);
    (hi, a - hi)
}

/// Dekker's exact product: `a * b = p + err` with `p = fl(a * b)`.
/// Used instead of `mul_add`, which is a slow library call on targets built
/// without hardware FMA.
fn two_prod_err(a: f64, b: f64, p: f64) -> f64 {
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    ((ah * bh - p) + ah * bl + al * bh) + al * bl
}

/// Sign-correct value of `a - q * b`, given that it is small relative to `a`.
fn residual(a: f64, q: f64, b: f64) -> f64 {
    let p = q * b;
    // Sterbenz: a and p are within a factor of two, so a - p is exact.
    (a - p) - two_prod_err(q, b, p)
}

fn splittable(a: f64, b: f64) -> bool {
    a.abs() < SPLIT_SAFE && b.abs() < SPLIT_SAFE
}

pub(crate) fn mul_r(a: f64, b: f64) -> Rounded {
    if a == 0.0 || b == 0.0 {
        return Rounded::exact(0.0);
    }
    let p = a * b;
    if !p.is_finite() {
        return Rounded::overflowed(p);
    }
    if p.abs() < RESIDUAL_SAFE || !splittable(a, b) {
        return Rounded::nudged(p);
    }
    Rounded::from_residual(p, two_prod_err(a, b, p))
}

pub(crate) fn div_r(a: f64, b: f64) -> Rounded {
    debug_assert!(b != 0.0);
    if a == 0.0 {
        return Rounded::exact(0.0);
    }
    let q = a / b;
    if !q.is_finite() {
        return Rounded::overflowed(q);
    }
    if q.abs() < RESIDUAL_SAFE || a.abs() < RESIDUAL_SAFE || !splittable(q, b) {
        return Rounded::nudged(q);
    }
    // The true quotient is q + r/b.
    let r = residual(a, q, b);
    let err = if b > 0.0 { r } else { -r };
    Rounded::from_residual(q, err)
}

pub(crate) fn sqrt_r(x: f64) -> Rounded {
    debug_assert!(x >= 0.0);
    let s = x.sqrt();
    if s == 0.0 {
        return Rounded::exact(0.0);
    }
    if x < RESIDUAL_SAFE {
        return Rounded::nudged(s).clamp_below(0.0);
    }
    if !splittable(s, s) {
        return Rounded::nudged(s);
    }
    Rounded::from_residual(s, residual(x, s, s))
}

impl Rounded {
    fn clamp_below(mut self, floor: f64) -> Self {
        self.down = self.down.max(floor);
        self
    }
}

impl Interval {
    /// Rejects `lo > hi`, NaN and infinite endpoints.
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_finite() && hi.is_finite() && lo <= hi {
            Ok(Interval { lo, hi })
        } else {
            Err(Error::InvalidInterval { lo, hi })
        }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    /// Endpoints are assumed ordered; arithmetic results may carry an
    /// infinite endpoint after overflow, which `is_finite` reports.
    pub(crate) const fn raw(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    /// `hi - lo`, rounded up.
    pub fn width(&self) -> f64 {
        add_r(self.hi, -self.lo).up
    }

    pub fn midpoint(&self) -> f64 {
        let m = self.lo + (self.hi - self.lo) * 0.5;
        m.clamp(self.lo, self.hi)
    }

    /// Largest absolute value in the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Smallest absolute value in the interval.
    pub fn mig(&self) -> f64 {
        if self.contains(0.0) {
            0.0
        } else {
            self.lo.abs().min(self.hi.abs())
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersects(&self, other: &Interval) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }

    /// Gap between two intervals, zero when they intersect.
    pub fn distance(&self, other: &Interval) -> f64 {
        if self.intersects(other) {
            0.0
        } else if self.hi < other.lo {
            add_r(other.lo, -self.hi).down
        } else {
            add_r(self.lo, -other.hi).down
        }
    }

    pub fn hull(&self, other: &Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Grows the interval by `eps` on each side.
    pub fn widen(&self, eps: f64) -> Interval {
        Interval {
            lo: add_r(self.lo, -eps).down,
            hi: add_r(self.hi, eps).up,
        }
    }

    pub fn scale(self, k: f64) -> Interval {
        self * Interval::point(k)
    }

    pub fn abs(self) -> Interval {
        if self.lo >= 0.0 {
            self
        } else if self.hi <= 0.0 {
            -self
        } else {
            Interval {
                lo: 0.0,
                hi: (-self.lo).max(self.hi),
            }
        }
    }

    pub fn min(self, other: Interval) -> Interval {
        Interval {
            lo: self.lo.min(other.lo),
            hi: self.hi.min(other.hi),
        }
    }

    pub fn max(self, other: Interval) -> Interval {
        Interval {
            lo: self.lo.max(other.lo),
            hi: self.hi.max(other.hi),
        }
    }

    /// Errors with `DivisionByZeroInterval` when `0 ∈ rhs`.
    pub fn checked_div(self, rhs: Interval) -> Result<Interval> {
        self.div_tight(rhs).map(|(iv, _)| iv)
    }

    pub(crate) fn add_tight(self, rhs: Interval) -> (Interval, bool) {
        let lo = add_r(self.lo, rhs.lo);
        let hi = add_r(self.hi, rhs.hi);
        (Interval::raw(lo.down, hi.up), lo.exact && hi.exact)
    }

    pub(crate) fn sub_tight(self, rhs: Interval) -> (Interval, bool) {
        self.add_tight(-rhs)
    }

    pub(crate) fn mul_tight(self, rhs: Interval) -> (Interval, bool) {
        let products = [
            mul_r(self.lo, rhs.lo),
            mul_r(self.lo, rhs.hi),
            mul_r(self.hi, rhs.lo),
            mul_r(self.hi, rhs.hi),
        ];
        Self::select(&products)
    }

    pub(crate) fn div_tight(self, rhs: Interval) -> Result<(Interval, bool)> {
        if rhs.contains(0.0) {
            return Err(Error::DivisionByZeroInterval);
        }
        let quotients = [
            div_r(self.lo, rhs.lo),
            div_r(self.lo, rhs.hi),
            div_r(self.hi, rhs.lo),
            div_r(self.hi, rhs.hi),
        ];
        Ok(Self::select(&quotients))
    }

    fn select(candidates: &[Rounded; 4]) -> (Interval, bool) {
        let lo = candidates.iter().map(|r| r.down).fold(f64::INFINITY, f64::min);
        let hi = candidates
            .iter()
            .map(|r| r.up)
            .fold(f64::NEG_INFINITY, f64::max);
        let exact = candidates.iter().all(|r| r.exact);
        (Interval::raw(lo, hi), exact)
    }

    pub(crate) fn sqrt_tight(self) -> (Interval, bool) {
        let lo = sqrt_r(self.lo.max(0.0));
        let hi = sqrt_r(self.hi.max(0.0));
        (Interval::raw(lo.down, hi.up), lo.exact && hi.exact)
    }
}

impl Add for Interval {
    type Output = Interval;

    fn add(self, rhs: Interval) -> Interval {
        self.add_tight(rhs).0
    }
}

impl Sub for Interval {
    type Output = Interval;

    fn sub(self, rhs: Interval) -> Interval {
        self.sub_tight(rhs).0
    }
}

impl Mul for Interval {
    type Output = Interval;

    fn mul(self, rhs: Interval) -> Interval {
        self.mul_tight(rhs).0
    }
}

impl Neg for Interval {
    type Output = Interval;

    fn neg(self) -> Interval {
        Interval {
            lo: -self.hi,
            hi: -self.lo,
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lo, self.hi)
    }
}
