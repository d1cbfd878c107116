//! Certificates for `integral of f over [a, b] = F(b) - F(a)` and tabulation
//! of the integral function `x -> integral of f over [c, x]`.

use serde::Serialize;

use crate::darboux::{certify, check_interval, refine, CertifyOptions, IntegrabilityKind};
use crate::error::{Error, Result};
use crate::expr::FuncExpr;
use crate::interval::{ulp, Interval};
use crate::preprimitive::{PrePrimitiveFn, WorkBudget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FtcVerdict {
    Certified,
    Refuted,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FtcCertificate {
    pub f: String,
    #[serde(rename = "F")]
    pub big_f: String,
    pub a: f64,
    pub b: f64,
    /// `[lower.lo, upper.hi]` of the final partition.
    pub integral_enclosure: Interval,
    /// Enclosure of `F(b) - F(a)`.
    pub evaluation: Interval,
    pub verdict: FtcVerdict,
    pub integrability: IntegrabilityKind,
    /// Partitions on which `lower <= F(b) - F(a) <= upper` was checked.
    pub partitions_checked: usize,
    pub sandwich_violations: usize,
    /// Rounding allowance used in every containment test.
    pub slack: f64,
}

/// Certifies `f` on `[a, b]` and compares the result with `F(b) - F(a)`.
///
/// The partition-level sandwich `lower sum <= F(b) - F(a) <= upper sum` holds
/// for every pre-primitive whether or not `f` is integrable, so it is checked
/// on every partition of the refinement; a violation refutes `F`.
pub fn ftc_check(
    f: &FuncExpr,
    big_f: &PrePrimitiveFn,
    a: f64,
    b: f64,
    opts: &CertifyOptions,
) -> Result<FtcCertificate> {
    if !(opts.tol > 0.0) {
        return Err(Error::NonPositiveTolerance(opts.tol));
    }
    let mut cert = FtcCertificate {
        f: f.to_string(),
        big_f: big_f.to_string(),
        a,
        b,
        integral_enclosure: Interval::point(0.0),
        evaluation: Interval::point(0.0),
        verdict: FtcVerdict::Certified,
        integrability: IntegrabilityKind::Integrable,
        partitions_checked: 0,
        sandwich_violations: 0,
        slack: 0.0,
    };
    if a == b && a.is_finite() {
        return Ok(cert);
    }
    check_interval(a, b)?;
    let run = refine(f, a, b, opts)?;
    let evaluation = big_f.increment(a, b)?;
    let v = &run.verdict;
    let mag = evaluation.mag().max(v.upper.mag()).max(v.lower.mag());
    // Two outward-rounded operations per cell and sum, plus the evaluation.
    let ops = 2 * v.final_partition_size + 2;
    let slack = ops as f64 * ulp(mag);
    let violations = v
        .trace
        .iter()
        .filter(|r| {
            let allowed = Interval::raw(r.lower.lo(), r.upper.hi()).widen(slack);
            !allowed.intersects(&evaluation)
        })
        .count();
    cert.integral_enclosure = v.enclosure;
    cert.evaluation = evaluation;
    cert.integrability = v.kind;
    cert.partitions_checked = v.trace.len();
    cert.sandwich_violations = violations;
    cert.slack = slack;
    cert.verdict = if violations > 0 {
        FtcVerdict::Refuted
    } else if v.kind != IntegrabilityKind::Integrable {
        FtcVerdict::Inconclusive
    } else if v.enclosure.widen(slack).intersects(&evaluation) {
        FtcVerdict::Certified
    } else {
        FtcVerdict::Refuted
    };
    Ok(cert)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegralPoint {
    pub x: f64,
    /// Hull of the lower and upper integral enclosures, oriented from `c` to `x`.
    pub enclosure: Interval,
    pub verdict: IntegrabilityKind,
}

/// Enclosures of `x -> integral of f from c to x` at each of `xs`.
pub fn integral_function(f: &FuncExpr, c: f64, xs: &[f64], budget: &WorkBudget) -> Result<Vec<IntegralPoint>> {
    if !c.is_finite() {
        return Err(Error::InvalidArgument(format!("basepoint {c} is not finite")));
    }
    xs.iter()
        .map(|&x| {
            if x == c {
                return Ok(IntegralPoint {
                    x,
                    enclosure: Interval::point(0.0),
                    verdict: IntegrabilityKind::Integrable,
                });
            }
            let (lo, hi) = (c.min(x), c.max(x));
            check_interval(lo, hi)?;
            let tol = (budget.slope_tol * (hi - lo)).max(f64::MIN_POSITIVE);
            let mut opts = CertifyOptions::new(tol, budget.max_rounds);
            opts.max_cells = budget.max_cells;
            let v = certify(f, lo, hi, &opts)?;
            let enclosure = if x > c { v.enclosure } else { -v.enclosure };
            Ok(IntegralPoint {
                x,
                enclosure,
                verdict: v.kind,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::FRAC_PI_2;

    use super::*;
    use crate::preprimitive::build_lower_preprimitive;

    fn e(s: &str) -> FuncExpr {
        s.parse().unwrap()
    }

    #[test]
    fn cos_and_sin() {
        let c = ftc_check(
            &e("cos(x)"),
            &PrePrimitiveFn::symbolic(e("sin(x)")),
            0.0,
            FRAC_PI_2,
            &CertifyOptions::new(1e-6, 100_000),
        )
        .unwrap();
        assert_eq!(c.verdict, FtcVerdict::Certified);
        assert!(c.integral_enclosure.contains(1.0) && c.evaluation.contains(1.0));
        assert_eq!(c.sandwich_violations, 0);
    }

    #[test]
    fn constant_offset_cancels() {
        let opts = CertifyOptions::new(1e-6, 100_000);
        let plain = ftc_check(&e("x"), &PrePrimitiveFn::symbolic(e("x^2/2")), 0.0, 1.0, &opts).unwrap();
        let shifted = ftc_check(&e("x"), &PrePrimitiveFn::symbolic(e("x^2/2 + 7")), 0.0, 1.0, &opts).unwrap();
        assert_eq!(shifted.verdict, FtcVerdict::Certified);
        assert!(shifted.evaluation.contains(0.5));
        assert_eq!(plain.integral_enclosure, shifted.integral_enclosure);
    }

    #[test]
    fn dirichlet_sandwich_holds_without_integrability() {
        let c = ftc_check(
            &e("dirichlet(x)"),
            &PrePrimitiveFn::symbolic(e("x")),
            0.0,
            1.0,
            &CertifyOptions::new(1e-3, 1000),
        )
        .unwrap();
        assert_eq!(c.integrability, IntegrabilityKind::NonIntegrable);
        assert_eq!(c.verdict, FtcVerdict::Inconclusive);
        assert_eq!(c.sandwich_violations, 0);
        assert!(c.partitions_checked >= 5);
    }

    #[test]
    fn wrong_primitive_is_refuted() {
        let c = ftc_check(
            &e("x"),
            &PrePrimitiveFn::symbolic(e("x^2")),
            0.0,
            1.0,
            &CertifyOptions::new(1e-6, 100_000),
        )
        .unwrap();
        assert_eq!(c.verdict, FtcVerdict::Refuted);
        assert!(c.sandwich_violations > 0);
    }

    #[test]
    fn degenerate_and_reversed_intervals() {
        let big_f = PrePrimitiveFn::symbolic(e("x"));
        let c = ftc_check(&e("1"), &big_f, 0.3, 0.3, &CertifyOptions::default()).unwrap();
        assert_eq!(c.verdict, FtcVerdict::Certified);
        assert_eq!((c.integral_enclosure, c.evaluation), (Interval::point(0.0), Interval::point(0.0)));
        assert!(matches!(
            ftc_check(&e("1"), &big_f, 1.0, 0.0, &CertifyOptions::default()),
            Err(Error::InvalidInterval { .. })
        ));
    }

    #[test]
    fn darboux_preprimitive_certifies() {
        let f = e("floor(3*x)");
        let c = ftc_check(&f, &build_lower_preprimitive(&f, 0.0), 0.0, 1.0, &CertifyOptions::new(1e-4, 100_000)).unwrap();
        assert_eq!(c.verdict, FtcVerdict::Certified);
    }

    #[test]
    fn integral_function_examples() {
        let budget = WorkBudget::default();
        let pts = integral_function(&e("cos(x)"), 0.0, &[std::f64::consts::FRAC_PI_6, FRAC_PI_2], &budget).unwrap();
        assert!(pts[0].enclosure.contains(0.5) && pts[1].enclosure.contains(1.0));
        let pts = integral_function(&e("floor(3*x)"), 0.0, &[1.0, 0.0], &budget).unwrap();
        assert!(pts[0].enclosure.contains(1.0));
        assert_eq!(pts[1].enclosure, Interval::point(0.0));
        let back = integral_function(&e("x"), 1.0, &[0.0], &budget).unwrap();
        assert!(back[0].enclosure.contains(-0.5));
    }
}
