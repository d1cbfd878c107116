//! Range enclosures of expressions over an interval.
//!
//! Besides the enclosure itself every subexpression reports whether the
//! enclosure endpoints are the attained minimum and maximum of the true image
//! (`exact`, up to outward rounding), whether no rounding happened at all
//! (`tight`), whether the subexpression is continuous on the queried
//! interval, and whether it mentions `x`. The flags let discontinuous
//! primitives decide when a hull of branch values is the true image.

use std::f64::consts::PI;

use super::cantor::{self, CoverClass};
use super::{provenance, BinaryOp, Node, Provenance, UnaryOp};
use crate::error::{Error, Result};
use crate::interval::{ulp, Interval};

/// Slack, in ulps, allowed between an exact-but-rounded enclosure and the true bounds.
const ROUNDING_ULPS: f64 = 16.0;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Bound {
    pub range: Interval,
    pub exact: bool,
    pub tight: bool,
    pub continuous: bool,
    pub has_var: bool,
}

impl Bound {
    fn constant(v: f64) -> Self {
        Bound {
            range: Interval::point(v),
            exact: true,
            tight: true,
            continuous: true,
            has_var: false,
        }
    }

    /// Result of a discontinuous primitive; constant results are continuous.
    fn jump(range: Interval, exact: bool, has_var: bool) -> Self {
        let constant = range.is_degenerate() && exact;
        Bound {
            range,
            exact,
            tight: exact,
            continuous: constant,
            has_var,
        }
    }

    fn rounding_slack(&self) -> f64 {
        ROUNDING_ULPS * ulp(self.range.mag())
    }

    /// The true image has more than one point.
    fn spreads(&self) -> bool {
        self.exact
            && self.continuous
            && self.range.lo() < self.range.hi()
            && (self.tight || self.range.width() > self.rounding_slack())
    }
}

fn down2(v: f64) -> f64 {
    v.next_down().next_down()
}

fn up2(v: f64) -> f64 {
    v.next_up().next_up()
}

/// Brackets `v^n` for `v >= 0`.
fn pow_nonneg(v: f64, n: u32) -> (Interval, bool) {
    let mut acc = Interval::point(1.0);
    let mut exact = true;
    let base = Interval::point(v);
    for _ in 0..n {
        let (next, e) = acc.mul_tight(base);
        acc = next;
        exact &= e;
    }
    (acc, exact)
}

/// Whether some `offset + 2kπ` may lie in `[lo, hi]`. Errs towards `true`.
fn may_contain_critical(lo: f64, hi: f64, offset: f64) -> bool {
    let two_pi = 2.0 * PI;
    let t_lo = (lo - offset) / two_pi;
    let t_hi = (hi - offset) / two_pi;
    let eps = 1e-9 + 1e-15 * t_lo.abs().max(t_hi.abs());
    (t_lo - eps).ceil() <= t_hi + eps
}

/// Range of sin or cos over `r`, plus whether an interior extremum may occur.
fn trig(r: Interval, is_cos: bool) -> (Interval, bool) {
    if r.width() >= 2.0 * PI {
        return (Interval::raw(-1.0, 1.0), true);
    }
    let f = |v: f64| if is_cos { v.cos() } else { v.sin() };
    let (a, b) = (f(r.lo()), f(r.hi()));
    let (max_at, min_at) = if is_cos { (0.0, PI) } else { (PI / 2.0, -PI / 2.0) };
    let has_max = may_contain_critical(r.lo(), r.hi(), max_at);
    let has_min = may_contain_critical(r.lo(), r.hi(), min_at);
    let lo = if has_min { -1.0 } else { down2(a.min(b)).max(-1.0) };
    let hi = if has_max { 1.0 } else { up2(a.max(b)).min(1.0) };
    (Interval::raw(lo, hi), has_max || has_min)
}

fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub(crate) fn bound(node: &Node, x: Interval) -> Result<Bound> {
    match node {
        Node::Const(c) => Ok(Bound::constant(*c)),
        Node::Pi => Ok(Bound {
            range: Interval::raw(PI, PI.next_up()),
            exact: true,
            tight: false,
            continuous: true,
            has_var: false,
        }),
        Node::Var => Ok(Bound {
            range: x,
            exact: true,
            tight: true,
            continuous: true,
            has_var: true,
        }),
        Node::Step {
            threshold,
            below,
            above,
        } => {
            let range = if x.hi() < *threshold {
                Interval::point(*below)
            } else if x.lo() >= *threshold {
                Interval::point(*above)
            } else {
                Interval::point(*below).hull(&Interval::point(*above))
            };
            Ok(Bound::jump(range, true, true))
        }
        Node::Pow(base, n) => pow(bound(base, x)?, *n),
        Node::Unary(op, arg) => unary(*op, arg, x),
        Node::Binary(op, lhs, rhs) => binary(*op, bound(lhs, x)?, bound(rhs, x)?),
    }
}

fn pow(b: Bound, n: u32) -> Result<Bound> {
    match n {
        0 => return Ok(Bound { has_var: b.has_var, ..Bound::constant(1.0) }),
        1 => return Ok(b),
        _ => {}
    }
    let r = b.range;
    let (lo_mag, hi_mag) = (r.lo().abs(), r.hi().abs());
    let (range, rounded_exact, exact) = if n % 2 == 1 {
        let (pl, el) = pow_nonneg(lo_mag, n);
        let (ph, eh) = pow_nonneg(hi_mag, n);
        let lo = if r.lo() < 0.0 { -pl.hi() } else { pl.lo() };
        let hi = if r.hi() < 0.0 { -ph.lo() } else { ph.hi() };
        (Interval::raw(lo, hi), el && eh, b.exact)
    } else if r.lo() >= 0.0 || r.hi() <= 0.0 {
        let (small, large) = (lo_mag.min(hi_mag), lo_mag.max(hi_mag));
        let (ps, es) = pow_nonneg(small, n);
        let (pl, el) = pow_nonneg(large, n);
        (Interval::raw(ps.lo(), pl.hi()), es && el, b.exact)
    } else {
        let (pl, el) = pow_nonneg(lo_mag.max(hi_mag), n);
        (Interval::raw(0.0, pl.hi()), el, b.exact && b.continuous)
    };
    Ok(Bound {
        range,
        exact,
        tight: exact && b.tight && rounded_exact,
        continuous: b.continuous,
        has_var: b.has_var,
    })
}

fn unary(op: UnaryOp, arg: &Node, x: Interval) -> Result<Bound> {
    let b = bound(arg, x)?;
    let r = b.range;
    let monotone = |range: Interval, tight: bool| Bound {
        range,
        exact: b.exact,
        tight: b.exact && b.tight && tight,
        continuous: b.continuous,
        has_var: b.has_var,
    };
    match op {
        UnaryOp::Neg => Ok(Bound { range: -r, ..b }),
        UnaryOp::Abs => {
            if r.lo() >= 0.0 || r.hi() <= 0.0 {
                Ok(Bound { range: r.abs(), ..b })
            } else {
                let exact = b.exact && b.continuous;
                Ok(Bound {
                    range: r.abs(),
                    exact,
                    tight: exact && b.tight,
                    ..b
                })
            }
        }
        UnaryOp::Sin | UnaryOp::Cos => {
            let is_cos = op == UnaryOp::Cos;
            if r == Interval::point(0.0) {
                return Ok(monotone(Interval::point(if is_cos { 1.0 } else { 0.0 }), true));
            }
            let (range, interior) = trig(r, is_cos);
            Ok(Bound {
                range,
                exact: b.exact && (b.continuous || !interior),
                tight: false,
                continuous: b.continuous,
                has_var: b.has_var,
            })
        }
        UnaryOp::Exp => {
            if r == Interval::point(0.0) {
                return Ok(monotone(Interval::point(1.0), true));
            }
            let range = Interval::raw(down2(r.lo().exp()).max(0.0), up2(r.hi().exp()));
            Ok(monotone(range, false))
        }
        UnaryOp::Ln => {
            if r.lo() <= 0.0 {
                return Err(Error::Domain(format!("ln of a value in {r}, which is not positive")));
            }
            if r == Interval::point(1.0) {
                return Ok(monotone(Interval::point(0.0), true));
            }
            let range = Interval::raw(down2(r.lo().ln()), up2(r.hi().ln()));
            Ok(monotone(range, false))
        }
        UnaryOp::Sqrt => {
            if r.lo() < 0.0 {
                return Err(Error::Domain(format!("sqrt of a value in {r}, which may be negative")));
            }
            let (range, tight) = r.sqrt_tight();
            Ok(monotone(range, tight))
        }
        UnaryOp::Floor => {
            let range = Interval::raw(r.lo().floor(), r.hi().floor());
            let exact = range.is_degenerate() || (b.exact && b.tight);
            Ok(Bound::jump(range, exact, b.has_var))
        }
        UnaryOp::Sign => {
            let range = Interval::raw(sgn(r.lo()), sgn(r.hi()));
            let exact = range.is_degenerate() || (b.exact && b.tight);
            Ok(Bound::jump(range, exact, b.has_var))
        }
        UnaryOp::Dirichlet => Ok(dirichlet(arg, b)),
        UnaryOp::Cantor => Ok(cantor(b)),
    }
}

fn dirichlet(arg: &Node, b: Bound) -> Bound {
    let unit = Interval::raw(0.0, 1.0);
    if !b.has_var {
        // A constant argument: rationality is read off its construction.
        return match provenance(arg, None) {
            Provenance::Rational => Bound::jump(Interval::point(1.0), true, false),
            Provenance::PiAffine { .. } => Bound::jump(Interval::point(0.0), true, false),
            Provenance::Unknown => Bound::jump(unit, false, false),
        };
    }
    if b.range.is_degenerate() && b.tight {
        // The argument is exactly this float, a dyadic rational.
        return Bound::jump(Interval::point(1.0), true, true);
    }
    // A continuous argument sweeping a nondegenerate interval meets both
    // rationals and irrationals.
    Bound::jump(unit, b.spreads(), true)
}

fn cantor(b: Bound) -> Bound {
    let unit = Interval::raw(0.0, 1.0);
    let r = b.range;
    match cantor::classify(r.lo(), r.hi()) {
        CoverClass::Disjoint => Bound::jump(Interval::point(0.0), true, b.has_var),
        _ if r.is_degenerate() && b.tight => match cantor::membership(r.lo()) {
            Some(inside) => Bound::jump(Interval::point(if inside { 1.0 } else { 0.0 }), true, b.has_var),
            None => Bound::jump(unit, false, b.has_var),
        },
        CoverClass::FullCell if b.spreads() => {
            let exact = b.tight || {
                let slack = b.rounding_slack();
                let (lo, hi) = (r.lo() + slack, r.hi() - slack);
                lo < hi && cantor::classify(lo, hi) == CoverClass::FullCell
            };
            Bound::jump(unit, exact, b.has_var)
        }
        _ => Bound::jump(unit, false, b.has_var),
    }
}

fn binary(op: BinaryOp, a: Bound, b: Bound) -> Result<Bound> {
    let (range, rounded_exact) = match op {
        BinaryOp::Add => a.range.add_tight(b.range),
        BinaryOp::Sub => a.range.sub_tight(b.range),
        BinaryOp::Mul => a.range.mul_tight(b.range),
        BinaryOp::Div => a.range.div_tight(b.range).map_err(|_| {
            Error::Domain(format!("division by a value in {}, which may be zero", b.range))
        })?,
        BinaryOp::Min => (a.range.min(b.range), true),
        BinaryOp::Max => (a.range.max(b.range), true),
    };
    // Only a monotone map of one varying operand keeps the bounds attained.
    let exact = !(a.has_var && b.has_var) && a.exact && b.exact;
    Ok(Bound {
        range,
        exact,
        tight: exact && a.tight && b.tight && rounded_exact,
        continuous: a.continuous && b.continuous,
        has_var: a.has_var || b.has_var,
    })
}
