//! Lower and upper pre-primitives built from Darboux sums, and sampled checks
//! of the properties every pre-primitive must have.
//!
//! A pre-primitive `F` of `f` is a function whose difference quotients
//! `(F(y) - F(x)) / (y - x)` lie between any lower and any upper bound of `f`
//! on `[x, y]`. Checks here can refute that property with an explicit
//! witness; passing only means no sampled pair contradicted it.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::darboux::{check_interval, refine, CertifyOptions, IntegrabilityKind};
use crate::error::{Error, Result};
use crate::expr::FuncExpr;
use crate::interval::{ulp, Interval};

/// Maximum witnesses kept in a report.
const MAX_WITNESSES: usize = 8;

/// Distance between the points of a near-coincident sample pair.
const NEAR_GAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WorkBudget {
    /// Requested gap per unit length when certifying a query interval.
    pub slope_tol: f64,
    pub max_rounds: usize,
    pub max_cells: usize,
}

impl Default for WorkBudget {
    fn default() -> Self {
        WorkBudget {
            slope_tol: 1e-4,
            max_rounds: 100_000,
            max_cells: 1 << 20,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PrePrimitiveKind {
    LowerDarboux,
    UpperDarboux,
    Symbolic(FuncExpr),
}

/// Lower sum, upper sum and verdict of one certified query interval.
#[derive(Debug, Clone, Copy)]
struct Certified {
    lower: Interval,
    upper: Interval,
    kind: IntegrabilityKind,
}

type Memo = Arc<Mutex<HashMap<(u64, u64), Certified>>>;

/// A pre-primitive that can be queried for enclosures of its values.
///
/// The Darboux kinds are `x -> I(f; c, x)` for the lower (resp. upper)
/// integral `I`, negated for `x < c` and zero at `c`.
#[derive(Debug, Clone)]
pub struct PrePrimitiveFn {
    kind: PrePrimitiveKind,
    f: Option<FuncExpr>,
    basepoint: f64,
    budget: WorkBudget,
    memo: Memo,
}

pub fn build_lower_preprimitive(f: &FuncExpr, c: f64) -> PrePrimitiveFn {
    PrePrimitiveFn::darboux(PrePrimitiveKind::LowerDarboux, f, c, WorkBudget::default(), Memo::default())
}

pub fn build_upper_preprimitive(f: &FuncExpr, c: f64) -> PrePrimitiveFn {
    PrePrimitiveFn::darboux(PrePrimitiveKind::UpperDarboux, f, c, WorkBudget::default(), Memo::default())
}

impl PrePrimitiveFn {
    fn darboux(kind: PrePrimitiveKind, f: &FuncExpr, c: f64, budget: WorkBudget, memo: Memo) -> Self {
        PrePrimitiveFn {
            kind,
            f: Some(f.clone()),
            basepoint: c,
            budget,
            memo,
        }
    }

    /// Lower and upper pre-primitives at `c` sharing one cache of certified intervals.
    pub fn darboux_pair(f: &FuncExpr, c: f64, budget: WorkBudget) -> (Self, Self) {
        let memo = Memo::default();
        (
            Self::darboux(PrePrimitiveKind::LowerDarboux, f, c, budget, memo.clone()),
            Self::darboux(PrePrimitiveKind::UpperDarboux, f, c, budget, memo),
        )
    }

    pub fn symbolic(big_f: FuncExpr) -> Self {
        PrePrimitiveFn {
            kind: PrePrimitiveKind::Symbolic(big_f),
            f: None,
            basepoint: 0.0,
            budget: WorkBudget::default(),
            memo: Memo::default(),
        }
    }

    pub fn with_budget(mut self, budget: WorkBudget) -> Self {
        self.budget = budget;
        self.memo = Memo::default();
        self
    }

    pub fn kind(&self) -> &PrePrimitiveKind {
        &self.kind
    }

    pub fn basepoint(&self) -> f64 {
        self.basepoint
    }

    pub fn budget(&self) -> WorkBudget {
        self.budget
    }

    /// Enclosure of `F(x)`.
    pub fn eval(&self, x: f64) -> Result<Interval> {
        match &self.kind {
            PrePrimitiveKind::Symbolic(big_f) => symbolic_at(big_f, x),
            _ => self.increment(self.basepoint, x),
        }
    }

    /// Enclosure of `F(y) - F(x)`.
    ///
    /// Constant terms of a symbolic `F` cancel exactly and are not evaluated.
    /// For the Darboux kinds this is the lower (upper) integral over `[x, y]`,
    /// by additivity of the lower and upper integrals, so no cancellation of
    /// two large enclosures is involved.
    pub fn increment(&self, x: f64, y: f64) -> Result<Interval> {
        if let PrePrimitiveKind::Symbolic(big_f) = &self.kind {
            let varying = big_f.without_additive_constants();
            return Ok(symbolic_at(&varying, y)? - symbolic_at(&varying, x)?);
        }
        if x == y {
            return Ok(Interval::point(0.0));
        }
        let (lo, hi) = (x.min(y), x.max(y));
        let v = self.integral(lo, hi)?;
        Ok(if x < y { v } else { -v })
    }

    fn integral(&self, lo: f64, hi: f64) -> Result<Interval> {
        check_interval(lo, hi)?;
        let cert = self.certified(lo, hi)?;
        Ok(match (cert.kind, &self.kind) {
            // A stable gap with exact cell bounds means the sums have reached
            // the lower and upper integrals themselves.
            (IntegrabilityKind::NonIntegrable, PrePrimitiveKind::LowerDarboux) => cert.lower,
            (IntegrabilityKind::NonIntegrable, _) => cert.upper,
            _ => Interval::raw(cert.lower.lo(), cert.upper.hi()),
        })
    }

    fn certified(&self, lo: f64, hi: f64) -> Result<Certified> {
        let key = (lo.to_bits(), hi.to_bits());
        if let Some(c) = self.memo.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Ok(*c);
        }
        let f = self.f.as_ref().expect("Darboux pre-primitive carries its integrand");
        let tol = (self.budget.slope_tol * (hi - lo)).max(f64::MIN_POSITIVE);
        let mut opts = CertifyOptions::new(tol, self.budget.max_rounds);
        opts.max_cells = self.budget.max_cells;
        let r = refine(f, lo, hi, &opts)?;
        let cert = Certified {
            lower: r.sums.lower,
            upper: r.sums.upper,
            kind: r.verdict.kind,
        };
        self.memo.lock().unwrap_or_else(|e| e.into_inner()).insert(key, cert);
        Ok(cert)
    }
}

impl fmt::Display for PrePrimitiveFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            PrePrimitiveKind::Symbolic(e) => write!(f, "{e}"),
            PrePrimitiveKind::LowerDarboux => write!(f, "lower_darboux(c = {})", self.basepoint),
            PrePrimitiveKind::UpperDarboux => write!(f, "upper_darboux(c = {})", self.basepoint),
        }
    }
}

fn symbolic_at(big_f: &FuncExpr, x: f64) -> Result<Interval> {
    big_f.range_on(Interval::point(x)).map(|r| r.range)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Sandwich,
    Lipschitz,
    OneSidedDerivative,
    ConstantDifference,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckVerdict {
    ConsistentAtResolution,
    Refuted,
    Inconclusive,
}

/// Evidence against a property: `observed` lies outside `bound`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub x: f64,
    pub y: f64,
    pub observed: Interval,
    pub bound: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrePrimitiveReport {
    pub property: Property,
    pub verdict: CheckVerdict,
    pub witnesses: Vec<Witness>,
    pub samples_checked: usize,
    /// Allowance for rounding added to every comparison.
    pub slack: f64,
    /// Property-specific summary: the last quotient for derivatives, the hull
    /// of the differences for constant difference.
    pub estimate: Option<Interval>,
}

impl PrePrimitiveReport {
    fn from_witnesses(property: Property, witnesses: Vec<Witness>, samples: usize, slack: f64) -> Self {
        let verdict = if witnesses.is_empty() {
            CheckVerdict::ConsistentAtResolution
        } else {
            CheckVerdict::Refuted
        };
        PrePrimitiveReport {
            property,
            verdict,
            witnesses,
            samples_checked: samples,
            slack,
            estimate: None,
        }
    }
}

/// Structured pairs first (whole interval, both ends, straddles of every
/// syntactic breakpoint), then seeded uniform pairs up to `n_pairs`.
pub fn sample_pairs(f: &FuncExpr, a: f64, b: f64, n_pairs: usize, seed: u64) -> Vec<(f64, f64)> {
    let mut pairs = vec![(a, b)];
    if b - a > NEAR_GAP {
        pairs.push((a, a + NEAR_GAP));
        pairs.push((b - NEAR_GAP, b));
    }
    for d in f.breakpoints(a, b) {
        let (l, r) = ((d - NEAR_GAP).max(a), (d + NEAR_GAP).min(b));
        for p in [(l, r), (a, d), (d, b), (l, d), (d, r)] {
            if p.0 < p.1 {
                pairs.push(p);
            }
        }
    }
    pairs.truncate(n_pairs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while pairs.len() < n_pairs {
        let (x, y) = (rng.gen_range(a..=b), rng.gen_range(a..=b));
        if x != y {
            pairs.push((x.min(y), x.max(y)));
        }
    }
    pairs
}

fn quotient(big_f: &PrePrimitiveFn, x: f64, y: f64) -> Result<Interval> {
    let run = Interval::point(y) - Interval::point(x);
    big_f.increment(x, y)?.checked_div(run)
}

fn rounding_slack(a: &Interval, b: &Interval) -> f64 {
    4.0 * ulp(a.mag().max(b.mag()))
}

/// Refutes when a difference quotient misses `range_on(f, [x, y])`.
pub fn check_sandwich(
    big_f: &PrePrimitiveFn,
    f: &FuncExpr,
    a: f64,
    b: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<PrePrimitiveReport> {
    check_interval(a, b)?;
    let pairs = sample_pairs(f, a, b, n_pairs.max(1), seed);
    let mut witnesses = Vec::new();
    let mut slack: f64 = 0.0;
    for &(x, y) in &pairs {
        let q = quotient(big_f, x, y)?;
        let bound = f.range_on(Interval::raw(x, y))?.range;
        let s = rounding_slack(&q, &bound);
        slack = slack.max(s);
        if q.distance(&bound) > s && witnesses.len() < MAX_WITNESSES {
            witnesses.push(Witness { x, y, observed: q, bound });
        }
    }
    Ok(PrePrimitiveReport::from_witnesses(Property::Sandwich, witnesses, pairs.len(), slack))
}

/// Refutes when `|F(y) - F(x)| > L |y - x|` with `L = max(|inf f|, |sup f|)` on `[a, b]`.
pub fn check_lipschitz(
    big_f: &PrePrimitiveFn,
    f: &FuncExpr,
    a: f64,
    b: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<PrePrimitiveReport> {
    check_interval(a, b)?;
    let lip = f.range_on(Interval::raw(a, b))?.range.mag();
    let pairs = sample_pairs(f, a, b, n_pairs.max(1), seed);
    let mut witnesses = Vec::new();
    let mut slack: f64 = 0.0;
    for &(x, y) in &pairs {
        let inc = big_f.increment(x, y)?;
        let run = Interval::point(y) - Interval::point(x);
        let allowed = (Interval::point(lip) * run).hi();
        let bound = Interval::raw(-allowed, allowed);
        let s = rounding_slack(&inc, &bound);
        slack = slack.max(s);
        if inc.mig() > allowed + s && witnesses.len() < MAX_WITNESSES {
            witnesses.push(Witness { x, y, observed: inc, bound });
        }
    }
    let mut report = PrePrimitiveReport::from_witnesses(Property::Lipschitz, witnesses, pairs.len(), slack);
    report.estimate = Some(Interval::point(lip));
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// `2^-k` for `k = 4..=20`.
pub fn default_h_schedule() -> Vec<f64> {
    (4..=20).map(|k| 2f64.powi(-k)).collect()
}

/// Compares one-sided difference quotients of `F` at `x` with the one-sided
/// range of `f` next to `x`.
///
/// Consistent when the last three quotients agree within `tol` and the last
/// one is within `tol` of the range of `f` over the matching half-open
/// neighbourhood; refuted when they agree but sit further away.
pub fn check_one_sided_derivative(
    big_f: &PrePrimitiveFn,
    f: &FuncExpr,
    x: f64,
    side: Side,
    schedule: &[f64],
    tol: f64,
) -> Result<PrePrimitiveReport> {
    if !(tol > 0.0) {
        return Err(Error::NonPositiveTolerance(tol));
    }
    if schedule.len() < 3 || schedule.iter().any(|h| !(*h > 0.0)) {
        return Err(Error::InvalidArgument("need at least three positive step sizes".into()));
    }
    let mut quotients = Vec::with_capacity(schedule.len());
    let mut last_target = Interval::point(0.0);
    let mut slack: f64 = 0.0;
    for &h in schedule {
        let (u, v, near) = match side {
            Side::Right => (x, x + h, Interval::raw(x.next_up(), x + h)),
            Side::Left => (x - h, x, Interval::raw(x - h, x.next_down())),
        };
        let q = quotient(big_f, u, v)?;
        last_target = f.range_on(near)?.range;
        slack = slack.max(rounding_slack(&q, &last_target));
        quotients.push(q);
    }
    let tail = &quotients[quotients.len() - 3..];
    let hull = tail[1..].iter().fold(tail[0], |acc, q| acc.hull(q));
    let q_last = tail[2];
    let stable = hull.width() <= tol + slack;
    let distance = q_last.distance(&last_target);
    let h_last = schedule[schedule.len() - 1];
    let (verdict, witnesses) = if !stable {
        (CheckVerdict::Inconclusive, vec![])
    } else if distance <= tol + slack {
        (CheckVerdict::ConsistentAtResolution, vec![])
    } else {
        let (wx, wy) = match side {
            Side::Right => (x, x + h_last),
            Side::Left => (x - h_last, x),
        };
        (
            CheckVerdict::Refuted,
            vec![Witness {
                x: wx,
                y: wy,
                observed: q_last,
                bound: last_target,
            }],
        )
    };
    Ok(PrePrimitiveReport {
        property: Property::OneSidedDerivative,
        verdict,
        witnesses,
        samples_checked: quotients.len(),
        slack,
        estimate: Some(q_last),
    })
}

/// Tabulates `F - G` on a uniform grid of `grid` points over `[a, b]`.
///
/// Consistent when the hull of the differences is no wider than `tol` plus
/// the widest single enclosure; refuted when two differences are separated
/// by more than `tol`.
pub fn check_constant_difference(
    big_f: &PrePrimitiveFn,
    big_g: &PrePrimitiveFn,
    a: f64,
    b: f64,
    grid: usize,
    tol: f64,
) -> Result<PrePrimitiveReport> {
    check_interval(a, b)?;
    if grid < 2 {
        return Err(Error::InvalidArgument("grid needs at least two points".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::NonPositiveTolerance(tol));
    }
    let xs: Vec<f64> = (0..grid)
        .map(|i| if i + 1 == grid { b } else { a + (b - a) * (i as f64 / (grid - 1) as f64) })
        .collect();
    let mut diffs = Vec::with_capacity(grid);
    for &x in &xs {
        diffs.push(big_f.eval(x)? - big_g.eval(x)?);
    }
    let hull = diffs[1..].iter().fold(diffs[0], |acc, d| acc.hull(d));
    let widest = diffs.iter().map(Interval::width).fold(0.0, f64::max);
    let slack = diffs.iter().map(|d| 4.0 * ulp(d.mag())).fold(0.0, f64::max);

    let mut witnesses = Vec::new();
    for i in 0..grid {
        for j in i + 1..grid {
            if diffs[i].distance(&diffs[j]) > tol + slack && witnesses.len() < MAX_WITNESSES {
                witnesses.push(Witness {
                    x: xs[i],
                    y: xs[j],
                    observed: diffs[j],
                    bound: diffs[i],
                });
            }
        }
    }
    let verdict = if !witnesses.is_empty() {
        CheckVerdict::Refuted
    } else if hull.width() <= tol + widest + slack {
        CheckVerdict::ConsistentAtResolution
    } else {
        CheckVerdict::Inconclusive
    };
    Ok(PrePrimitiveReport {
        property: Property::ConstantDifference,
        verdict,
        witnesses,
        samples_checked: grid,
        slack,
        estimate: Some(hull),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(s: &str) -> FuncExpr {
        s.parse().unwrap()
    }

    fn sym(s: &str) -> PrePrimitiveFn {
        PrePrimitiveFn::symbolic(e(s))
    }

    #[test]
    fn lower_preprimitive_of_identity() {
        let big_f = build_lower_preprimitive(&e("x"), 0.0);
        let v = big_f.eval(1.0).unwrap();
        assert!(v.contains(0.5) && v.width() <= 1e-4, "{v}");
        assert_eq!(big_f.eval(0.0).unwrap(), Interval::point(0.0));
        // Integral of t from 0 to -1 is +1/2.
        let back = big_f.eval(-1.0).unwrap();
        assert!(back.contains(0.5), "{back}");
    }

    #[test]
    fn dirichlet_preprimitives() {
        let f = e("dirichlet(x)");
        let (lower, upper) = PrePrimitiveFn::darboux_pair(&f, 0.0, WorkBudget::default());
        for x in [0.25, 0.7, 1.0] {
            assert_eq!(lower.eval(x).unwrap(), Interval::point(0.0));
            assert!(upper.eval(x).unwrap().contains(x));
        }
        assert_eq!(upper.eval(0.0).unwrap(), Interval::point(0.0));
    }

    #[test]
    fn sandwich_examples() {
        let r = check_sandwich(&sym("x^2/2"), &e("x"), 0.0, 1.0, 200, 0).unwrap();
        assert_eq!(r.verdict, CheckVerdict::ConsistentAtResolution);
        assert_eq!(r.samples_checked, 200);

        let r = check_sandwich(&sym("2*x"), &e("dirichlet(x)"), 0.0, 1.0, 200, 0).unwrap();
        assert_eq!(r.verdict, CheckVerdict::Refuted);
        let w = r.witnesses[0];
        assert!(w.observed.contains(2.0) && w.bound == Interval::raw(0.0, 1.0));

        let r = check_sandwich(&sym("x"), &e("dirichlet(x)"), 0.0, 1.0, 200, 0).unwrap();
        assert_eq!(r.verdict, CheckVerdict::ConsistentAtResolution);
    }

    #[test]
    fn quotient_is_symmetric() {
        let big_f = build_lower_preprimitive(&e("floor(3*x)"), 0.0);
        for (x, y) in [(0.1, 0.6), (0.0, 1.0), (0.3, 0.35)] {
            assert_eq!(quotient(&big_f, x, y).unwrap(), quotient(&big_f, y, x).unwrap());
        }
    }

    #[test]
    fn lipschitz_examples() {
        let r = check_lipschitz(&sym("x"), &e("dirichlet(x)"), 0.0, 1.0, 200, 0).unwrap();
        assert_eq!(r.verdict, CheckVerdict::ConsistentAtResolution);
        let r = check_lipschitz(&sym("x^2"), &e("x"), 0.0, 3.0, 200, 0).unwrap();
        assert_eq!(r.verdict, CheckVerdict::Refuted);
        // Near x = 3 the quotient x + y approaches 6 > L = 3.
        assert!(r.witnesses.iter().any(|w| w.y == 3.0));
        let r = check_sandwich(&sym("x^2"), &e("x"), 0.0, 3.0, 200, 0).unwrap();
        assert_eq!(r.verdict, CheckVerdict::Refuted);
    }

    #[test]
    fn derivative_examples() {
        let hs = default_h_schedule();
        let step = e("step(0.5, 0, 1)");
        let big_f = build_lower_preprimitive(&step, 0.0);
        let right = check_one_sided_derivative(&big_f, &step, 0.5, Side::Right, &hs, 1e-3).unwrap();
        assert_eq!(right.verdict, CheckVerdict::ConsistentAtResolution);
        assert!(right.estimate.unwrap().distance(&Interval::point(1.0)) <= 1e-3);
        let left = check_one_sided_derivative(&big_f, &step, 0.5, Side::Left, &hs, 1e-3).unwrap();
        assert_eq!(left.verdict, CheckVerdict::ConsistentAtResolution);
        assert!(left.estimate.unwrap().distance(&Interval::point(0.0)) <= 1e-3);

        let r = check_one_sided_derivative(&sym("abs(x)"), &e("sign(x)"), 0.0, Side::Right, &hs, 1e-3).unwrap();
        assert_eq!(r.verdict, CheckVerdict::ConsistentAtResolution);

        let r = check_one_sided_derivative(&sym("2*x"), &e("x"), 0.0, Side::Right, &hs, 1e-3).unwrap();
        assert_eq!(r.verdict, CheckVerdict::Refuted);
    }

    #[test]
    fn constant_difference_examples() {
        let f = e("dirichlet(x)");
        let r = check_constant_difference(&sym("0"), &sym("x"), 0.0, 1.0, 5, 1e-6).unwrap();
        assert_eq!(r.verdict, CheckVerdict::Refuted);
        let (lower, upper) = PrePrimitiveFn::darboux_pair(&f, 0.0, WorkBudget::default());
        let r = check_constant_difference(&lower, &upper, 0.0, 1.0, 5, 1e-6).unwrap();
        assert_eq!(r.verdict, CheckVerdict::Refuted);
        let r = check_constant_difference(&sym("x^2"), &sym("x^2"), 0.0, 1.0, 5, 1e-12).unwrap();
        assert_eq!(r.verdict, CheckVerdict::ConsistentAtResolution);
        assert_eq!(r.estimate.unwrap(), Interval::point(0.0));
        let r = check_constant_difference(&sym("sin(x)"), &sym("sin(x)"), 0.0, 1.0, 5, 1e-12).unwrap();
        assert_eq!(r.verdict, CheckVerdict::ConsistentAtResolution);
    }

    #[test]
    fn sampling_is_seeded() {
        let f = e("step(0.5, 0, 1)");
        let p = sample_pairs(&f, 0.0, 1.0, 50, 7);
        assert_eq!(p, sample_pairs(&f, 0.0, 1.0, 50, 7));
        assert_ne!(p, sample_pairs(&f, 0.0, 1.0, 50, 8));
        assert!(p.contains(&(0.5 - NEAR_GAP, 0.5 + NEAR_GAP)));
        assert!(p.iter().all(|(x, y)| x < y));
    }
}
