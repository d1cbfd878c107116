//! The function-expression language: one free variable `x`, the usual
//! elementary functions, and the indicator functions of the rationals
//! (`dirichlet`) and of the Cantor set (`cantor`).

pub mod cantor;
mod parse;
mod range;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::interval::Interval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Abs,
    Sin,
    Cos,
    Exp,
    Ln,
    Sqrt,
    Floor,
    Sign,
    Dirichlet,
    Cantor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var,
    Pi,
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
    Pow(Box<Node>, u32),
    /// `below` for `x < threshold`, `above` for `x >= threshold`.
    Step {
        threshold: f64,
        below: f64,
        above: f64,
    },
}

impl UnaryOp {
    fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Abs => "abs",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Exp => "exp",
            UnaryOp::Ln => "ln",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Floor => "floor",
            UnaryOp::Sign => "sign",
            UnaryOp::Dirichlet => "dirichlet",
            UnaryOp::Cantor => "cantor",
        }
    }
}

/// A parsed real function of `x`. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct FuncExpr {
    root: Node,
}

/// Sound enclosure of the image of an expression over an interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RangeEnclosure {
    pub range: Interval,
    /// The endpoints are the true infimum and supremum, up to outward rounding.
    pub exact: bool,
}

pub fn parse(src: &str) -> Result<FuncExpr> {
    FuncExpr::parse(src)
}

impl FuncExpr {
    pub fn parse(src: &str) -> Result<Self> {
        parse::parse_node(src).map(|root| FuncExpr { root })
    }

    pub fn from_node(root: Node) -> Self {
        FuncExpr { root }
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn has_var(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::Var | Node::Step { .. } => true,
                Node::Const(_) | Node::Pi => false,
                Node::Unary(_, a) | Node::Pow(a, _) => walk(a),
                Node::Binary(_, a, b) => walk(a) || walk(b),
            }
        }
        walk(&self.root)
    }

    /// The expression with constant summands of its top-level sum removed.
    /// They cancel exactly in any difference `F(y) - F(x)`.
    pub fn without_additive_constants(&self) -> FuncExpr {
        fn strip(n: &Node) -> Option<Node> {
            match n {
                Node::Binary(op @ (BinaryOp::Add | BinaryOp::Sub), a, b) => match (strip(a), strip(b)) {
                    (None, None) => None,
                    (Some(a), None) => Some(a),
                    (None, Some(b)) if *op == BinaryOp::Add => Some(b),
                    (None, Some(b)) => Some(Node::Unary(UnaryOp::Neg, Box::new(b))),
                    (Some(a), Some(b)) => Some(Node::Binary(*op, Box::new(a), Box::new(b))),
                },
                Node::Unary(UnaryOp::Neg, a) => strip(a).map(|a| Node::Unary(UnaryOp::Neg, Box::new(a))),
                n if FuncExpr::from_node(n.clone()).has_var() => Some(n.clone()),
                _ => None,
            }
        }
        FuncExpr::from_node(strip(&self.root).unwrap_or(Node::Const(0.0)))
    }

    /// Enclosure of `{ f(t) : t in iv }`.
    pub fn range_on(&self, iv: Interval) -> Result<RangeEnclosure> {
        let b = range::bound(&self.root, iv)?;
        if !b.range.is_finite() {
            return Err(Error::Domain(format!("value overflows on {iv}")));
        }
        Ok(RangeEnclosure {
            range: b.range,
            exact: b.exact,
        })
    }

    /// Pointwise value at `x`. The point's provenance decides `dirichlet`.
    pub fn eval_point(&self, x: impl Into<Point>) -> Result<f64> {
        let x = x.into();
        let v = eval(&self.root, &x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain(format!("value overflows at x = {}", x.value)))
        }
    }

    /// Points in `[a, b]` where the expression may jump, as far as the syntax shows.
    pub fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        const MAX_FLOOR_POINTS: f64 = 256.0;
        fn slope(n: &Node) -> Option<f64> {
            match n {
                Node::Var => Some(1.0),
                Node::Binary(BinaryOp::Mul, l, r) => match (l.as_ref(), r.as_ref()) {
                    (Node::Const(k), Node::Var) | (Node::Var, Node::Const(k)) => Some(*k),
                    _ => None,
                },
                _ => None,
            }
        }
        fn walk(n: &Node, a: f64, b: f64, out: &mut Vec<f64>) {
            match n {
                Node::Step { threshold, .. } => out.push(*threshold),
                Node::Unary(UnaryOp::Sign | UnaryOp::Abs, arg) if matches!(**arg, Node::Var) => out.push(0.0),
                Node::Unary(UnaryOp::Floor, arg) => {
                    if let Some(k) = slope(arg).filter(|k| *k != 0.0) {
                        let (u, v) = ((k * a).min(k * b), (k * a).max(k * b));
                        if v - u <= MAX_FLOOR_POINTS {
                            let mut j = u.ceil();
                            while j <= v {
                                out.push(j / k);
                                j += 1.0;
                            }
                        }
                    }
                    walk(arg, a, b, out)
                }
                Node::Unary(_, arg) | Node::Pow(arg, _) => walk(arg, a, b, out),
                Node::Binary(_, l, r) => {
                    walk(l, a, b, out);
                    walk(r, a, b, out)
                }
                Node::Const(_) | Node::Var | Node::Pi => {}
            }
        }
        let mut out = Vec::new();
        walk(&self.root, a, b, &mut out);
        out.retain(|t| a <= *t && *t <= b);
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }
}

impl FromStr for FuncExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FuncExpr::parse(s)
    }
}

impl Serialize for FuncExpr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

// Precedence levels used by the printer, mirroring the grammar.
const P_SUM: u8 = 1;
const P_PRODUCT: u8 = 2;
const P_FACTOR: u8 = 3;
const P_ATOM: u8 = 5;

fn precedence(n: &Node) -> u8 {
    match n {
        Node::Binary(BinaryOp::Add | BinaryOp::Sub, ..) => P_SUM,
        Node::Binary(BinaryOp::Mul | BinaryOp::Div, ..) => P_PRODUCT,
        Node::Unary(UnaryOp::Neg, _) => P_FACTOR,
        Node::Const(c) if c.is_sign_negative() => P_FACTOR,
        Node::Pow(..) => 4,
        _ => P_ATOM,
    }
}

fn write_node(n: &Node, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
    let paren = precedence(n) < min_prec;
    if paren {
        f.write_str("(")?;
    }
    match n {
        Node::Const(c) => write!(f, "{c}")?,
        Node::Var => f.write_str("x")?,
        Node::Pi => f.write_str("pi")?,
        Node::Unary(UnaryOp::Neg, a) => {
            f.write_str("-")?;
            write_node(a, f, 4)?;
        }
        Node::Unary(op, a) => {
            write!(f, "{}(", op.name())?;
            write_node(a, f, 0)?;
            f.write_str(")")?;
        }
        Node::Binary(op @ (BinaryOp::Min | BinaryOp::Max), a, b) => {
            f.write_str(if *op == BinaryOp::Min { "min(" } else { "max(" })?;
            write_node(a, f, 0)?;
            f.write_str(", ")?;
            write_node(b, f, 0)?;
            f.write_str(")")?;
        }
        Node::Binary(op, a, b) => {
            let (sym, prec) = match op {
                BinaryOp::Add => (" + ", P_SUM),
                BinaryOp::Sub => (" - ", P_SUM),
                BinaryOp::Mul => (" * ", P_PRODUCT),
                _ => (" / ", P_PRODUCT),
            };
            write_node(a, f, prec)?;
            f.write_str(sym)?;
            write_node(b, f, prec + 1)?;
        }
        Node::Pow(a, k) => {
            write_node(a, f, P_ATOM)?;
            write!(f, "^{k}")?;
        }
        Node::Step {
            threshold,
            below,
            above,
        } => write!(f, "step({threshold}, {below}, {above})")?,
    }
    if paren {
        f.write_str(")")?;
    }
    Ok(())
}

impl fmt::Display for FuncExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_node(&self.root, f, 0)
    }
}

/// What is known about whether a value is rational.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Provenance {
    Rational,
    /// `r + q*pi` with rational `r` and nonzero rational `q`, hence irrational.
    PiAffine { pi_coeff: f64 },
    Unknown,
}

/// An evaluation point whose rationality is known from how it was written.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    value: f64,
    provenance: Provenance,
    enclosure: Interval,
}

impl Point {
    /// A point given as a float, which is a dyadic rational.
    pub fn rational(value: f64) -> Self {
        debug_assert!(value.is_finite());
        Point {
            value,
            provenance: Provenance::Rational,
            enclosure: Interval::point(value),
        }
    }

    /// The irrational number `q * pi`, `q != 0`.
    pub fn pi_multiple(q: f64) -> Self {
        debug_assert!(q != 0.0 && q.is_finite());
        Point {
            value: q * PI,
            provenance: Provenance::PiAffine { pi_coeff: q },
            enclosure: Interval::raw(PI, PI.next_up()).scale(q),
        }
    }

    /// Parses a constant expression such as `0.25`, `pi/4` or `-3*pi`.
    pub fn parse(src: &str) -> Result<Self> {
        let e = FuncExpr::parse(src)?;
        if e.has_var() {
            return Err(Error::InvalidArgument(format!("`{src}` is not a constant")));
        }
        let value = eval_value(&e.root, None)?;
        let enclosure = range::bound(&e.root, Interval::point(0.0))?.range;
        if !value.is_finite() || !enclosure.is_finite() {
            return Err(Error::Domain(format!("`{src}` overflows")));
        }
        Ok(Point {
            value,
            provenance: provenance(&e.root, None),
            enclosure,
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn enclosure(&self) -> Interval {
        self.enclosure
    }
}

impl From<f64> for Point {
    fn from(v: f64) -> Self {
        Point::rational(v)
    }
}

/// Rationality of a subexpression. `var` is the provenance of `x`, if any.
pub(crate) fn provenance(n: &Node, var: Option<&Point>) -> Provenance {
    use Provenance::*;
    let value = |n: &Node| eval_value(n, var).ok();
    match n {
        Node::Const(_) => Rational,
        Node::Pi => PiAffine { pi_coeff: 1.0 },
        Node::Var => var.map_or(Unknown, |p| p.provenance),
        Node::Step { .. } => Rational,
        Node::Unary(op, a) => {
            let pa = provenance(a, var);
            match op {
                UnaryOp::Neg => match pa {
                    PiAffine { pi_coeff } => PiAffine { pi_coeff: -pi_coeff },
                    other => other,
                },
                UnaryOp::Abs => match (pa, value(a)) {
                    (PiAffine { pi_coeff }, Some(v)) => PiAffine {
                        pi_coeff: if v < 0.0 { -pi_coeff } else { pi_coeff },
                    },
                    (PiAffine { .. }, None) => Unknown,
                    (other, _) => other,
                },
                UnaryOp::Floor | UnaryOp::Sign | UnaryOp::Dirichlet | UnaryOp::Cantor => Rational,
                UnaryOp::Sin | UnaryOp::Cos | UnaryOp::Exp | UnaryOp::Ln | UnaryOp::Sqrt => {
                    if pa != Rational {
                        return Unknown;
                    }
                    // sin 0, cos 0, exp 0, ln 1 and exact square roots stay rational.
                    match (op, value(a)) {
                        (UnaryOp::Sin | UnaryOp::Cos | UnaryOp::Exp, Some(v)) if v == 0.0 => Rational,
                        (UnaryOp::Ln, Some(v)) if v == 1.0 => Rational,
                        (UnaryOp::Sqrt, Some(v)) if v >= 0.0 && Interval::point(v).sqrt_tight().1 => Rational,
                        _ => Unknown,
                    }
                }
            }
        }
        Node::Pow(a, k) => match (provenance(a, var), k) {
            (_, 0) => Rational,
            (p, 1) => p,
            (Rational, _) => Rational,
            _ => Unknown,
        },
        Node::Binary(op, a, b) => {
            let (pa, pb) = (provenance(a, var), provenance(b, var));
            let nonzero = |v: Option<f64>| v.is_some_and(|v| v != 0.0);
            match (op, pa, pb) {
                (_, Unknown, _) | (_, _, Unknown) => Unknown,
                (BinaryOp::Min | BinaryOp::Max, Rational, Rational) => Rational,
                (BinaryOp::Min | BinaryOp::Max, ..) => Unknown,
                (_, Rational, Rational) => Rational,
                (BinaryOp::Add, PiAffine { pi_coeff }, Rational)
                | (BinaryOp::Add, Rational, PiAffine { pi_coeff })
                | (BinaryOp::Sub, PiAffine { pi_coeff }, Rational) => PiAffine { pi_coeff },
                (BinaryOp::Sub, Rational, PiAffine { pi_coeff }) => PiAffine { pi_coeff: -pi_coeff },
                (BinaryOp::Add | BinaryOp::Sub, PiAffine { pi_coeff: p }, PiAffine { pi_coeff: q }) => {
                    let sum = if *op == BinaryOp::Add { p + q } else { p - q };
                    if *op == BinaryOp::Add && p == -q || *op == BinaryOp::Sub && p == q {
                        Rational
                    } else if sum != 0.0 {
                        PiAffine { pi_coeff: sum }
                    } else {
                        Unknown
                    }
                }
                (BinaryOp::Mul, Rational, PiAffine { pi_coeff }) => scale_pi(pi_coeff, value(a)),
                (BinaryOp::Mul, PiAffine { pi_coeff }, Rational) => scale_pi(pi_coeff, value(b)),
                (BinaryOp::Div, PiAffine { pi_coeff }, Rational) if nonzero(value(b)) => {
                    let q = pi_coeff / value(b).unwrap_or(1.0);
                    if q != 0.0 && q.is_finite() {
                        PiAffine { pi_coeff: q }
                    } else {
                        Unknown
                    }
                }
                _ => Unknown,
            }
        }
    }
}

fn scale_pi(q: f64, r: Option<f64>) -> Provenance {
    match r {
        Some(r) if r == 0.0 => Provenance::Rational,
        Some(r) if (q * r) != 0.0 && (q * r).is_finite() => Provenance::PiAffine { pi_coeff: q * r },
        _ => Provenance::Unknown,
    }
}

/// Plain floating-point value; `var` of `None` treats `x` as unavailable.
fn eval_value(n: &Node, var: Option<&Point>) -> Result<f64> {
    match var {
        Some(p) => eval(n, p),
        None => {
            if let Node::Var = n {
                return Err(Error::InvalidArgument("expression needs a value for x".into()));
            }
            // Constant subtrees never touch the variable.
            eval(n, &Point::rational(0.0))
        }
    }
}

/// Enclosure of a subexpression at the point, when interval evaluation succeeds.
fn enclose_at(n: &Node, x: &Point) -> Option<Interval> {
    range::bound(n, x.enclosure).ok().map(|b| b.range)
}

fn eval(n: &Node, x: &Point) -> Result<f64> {
    Ok(match n {
        Node::Const(c) => *c,
        Node::Pi => PI,
        Node::Var => x.value,
        Node::Step {
            threshold,
            below,
            above,
        } => {
            // Decide against the exact point when possible.
            let e = x.enclosure;
            if e.hi() < *threshold {
                *below
            } else if e.lo() >= *threshold || x.value >= *threshold {
                *above
            } else {
                *below
            }
        }
        Node::Pow(a, k) => eval(a, x)?.powi(*k as i32),
        Node::Unary(op, a) => {
            let v = eval(a, x)?;
            match op {
                UnaryOp::Neg => -v,
                UnaryOp::Abs => v.abs(),
                UnaryOp::Sin => v.sin(),
                UnaryOp::Cos => v.cos(),
                UnaryOp::Exp => v.exp(),
                UnaryOp::Ln => {
                    if v <= 0.0 {
                        return Err(Error::Domain(format!("ln({v})")));
                    }
                    v.ln()
                }
                UnaryOp::Sqrt => {
                    if v < 0.0 {
                        return Err(Error::Domain(format!("sqrt({v})")));
                    }
                    v.sqrt()
                }
                UnaryOp::Floor => match enclose_at(a, x) {
                    Some(e) if e.lo().floor() == e.hi().floor() => e.lo().floor(),
                    _ => v.floor(),
                },
                UnaryOp::Sign => match enclose_at(a, x) {
                    Some(e) if e.lo() > 0.0 => 1.0,
                    Some(e) if e.hi() < 0.0 => -1.0,
                    Some(e) if e.is_degenerate() => 0.0,
                    _ => range_sign(v),
                },
                UnaryOp::Dirichlet => match provenance(a, Some(x)) {
                    Provenance::Rational => 1.0,
                    Provenance::PiAffine { .. } => 0.0,
                    Provenance::Unknown => {
                        return Err(Error::EvalUndecidable(format!(
                            "whether the argument of dirichlet at x = {} is rational",
                            x.value
                        )))
                    }
                },
                UnaryOp::Cantor => cantor_at(a, x)?,
            }
        }
        Node::Binary(op, a, b) => {
            let (u, w) = (eval(a, x)?, eval(b, x)?);
            match op {
                BinaryOp::Add => u + w,
                BinaryOp::Sub => u - w,
                BinaryOp::Mul => u * w,
                BinaryOp::Div => {
                    if w == 0.0 {
                        return Err(Error::Domain("division by zero".into()));
                    }
                    u / w
                }
                BinaryOp::Min => u.min(w),
                BinaryOp::Max => u.max(w),
            }
        }
    })
}

fn range_sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn cantor_at(arg: &Node, x: &Point) -> Result<f64> {
    let undecidable = || {
        Error::EvalUndecidable(format!(
            "Cantor-set membership of the argument at x = {}",
            x.value
        ))
    };
    let e = enclose_at(arg, x).ok_or_else(undecidable)?;
    if cantor::classify(e.lo(), e.hi()) == cantor::CoverClass::Disjoint {
        return Ok(0.0);
    }
    if !e.is_degenerate() {
        return Err(undecidable());
    }
    match cantor::membership(e.lo()) {
        Some(true) => Ok(1.0),
        Some(false) => Ok(0.0),
        None => Err(undecidable()),
    }
}
