//! Annotated test functions: continuous, monotone, step, and the pathological
//! Dirichlet and Cantor indicators, with primitives and known integrals.

use serde::Serialize;

use crate::expr::cantor::CANTOR_DEPTH;
use crate::expr::FuncExpr;
use crate::interval::Interval;
use crate::preprimitive::Side;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrability {
    Yes,
    No,
    /// Integrable because one-sided limits exist everywhere.
    ViaOneSidedLimits,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    ClosedForm,
    PiecewiseArea,
    CoverCounting,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KnownIntegral {
    pub a: f64,
    pub b: f64,
    pub value: Interval,
    pub basis: Basis,
}

/// `f(x±) = value`, for one-sided derivative checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitProbe {
    pub x: f64,
    pub side: Side,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GalleryEntry {
    pub name: String,
    pub f: FuncExpr,
    pub symbolic_primitive: Option<FuncExpr>,
    pub integrable: Integrability,
    /// Interval the suites exercise the entry on.
    pub domain: (f64, f64),
    pub known_integrals: Vec<KnownIntegral>,
    pub discontinuities: Vec<f64>,
    pub limit_probes: Vec<LimitProbe>,
}

fn parse(src: &str) -> FuncExpr {
    src.parse().unwrap_or_else(|e| panic!("gallery expression `{src}`: {e}"))
}

fn exact(v: f64) -> Interval {
    Interval::point(v)
}

fn ratio(p: f64, q: f64) -> Interval {
    exact(p).checked_div(exact(q)).expect("nonzero denominator")
}

fn probe(x: f64, side: Side, value: f64) -> LimitProbe {
    LimitProbe { x, side, value }
}

struct Builder(GalleryEntry);

impl Builder {
    fn new(name: &str, f: &str, integrable: Integrability) -> Self {
        Builder(GalleryEntry {
            name: name.into(),
            f: parse(f),
            symbolic_primitive: None,
            integrable,
            domain: (0.0, 1.0),
            known_integrals: vec![],
            discontinuities: vec![],
            limit_probes: vec![],
        })
    }

    fn primitive(mut self, src: &str) -> Self {
        self.0.symbolic_primitive = Some(parse(src));
        self
    }

    fn domain(mut self, a: f64, b: f64) -> Self {
        self.0.domain = (a, b);
        self
    }

    fn integral(mut self, a: f64, b: f64, value: Interval, basis: Basis) -> Self {
        self.0.known_integrals.push(KnownIntegral { a, b, value, basis });
        self
    }

    fn jumps(mut self, at: &[f64]) -> Self {
        self.0.discontinuities = at.to_vec();
        self
    }

    fn probes(mut self, p: &[LimitProbe]) -> Self {
        self.0.limit_probes = p.to_vec();
        self
    }
}

/// Thresholds `fl(1/n)`, `n = 1..=10`, of the staircase entry.
pub fn staircase_thresholds() -> Vec<f64> {
    (1..=10).map(|n| 1.0 / n as f64).collect()
}

pub fn builtin_gallery() -> Vec<GalleryEntry> {
    use Integrability::*;
    use Side::{Left, Right};

    let e = std::f64::consts::E;
    let third = 1.0 / 3.0;
    let two_thirds = 2.0 / 3.0;

    let ts = staircase_thresholds();
    let stairs: Vec<String> = ts.iter().map(|t| format!("step({t}, 0, 1)")).collect();
    let stairs_prim: Vec<String> = ts.iter().map(|t| format!("max(x - {t}, 0)")).collect();
    // Each step contributes 1 - t on [0, 1].
    let stairs_area = ts
        .iter()
        .fold(exact(0.0), |acc, t| acc + (exact(1.0) - exact(*t)));

    vec![
        Builder::new("x", "x", Yes)
            .primitive("x^2/2")
            .integral(0.0, 1.0, exact(0.5), Basis::ClosedForm)
            .probes(&[probe(0.5, Right, 0.5), probe(0.5, Left, 0.5)]),
        Builder::new("x^2 - x", "x^2 - x", Yes)
            .primitive("x^3/3 - x^2/2")
            .integral(0.0, 1.0, -ratio(1.0, 6.0), Basis::ClosedForm)
            .probes(&[probe(0.5, Right, -0.25)]),
        Builder::new("cos", "cos(x)", Yes)
            .primitive("sin(x)")
            .integral(0.0, 1.0, exact(1f64.sin()).widen(1e-15), Basis::ClosedForm)
            .probes(&[probe(0.0, Right, 1.0), probe(0.5, Left, 0.5f64.cos())]),
        Builder::new("exp", "exp(x)", Yes)
            .primitive("exp(x)")
            .integral(0.0, 1.0, exact(e - 1.0).widen(1e-15), Basis::ClosedForm)
            .probes(&[probe(0.0, Right, 1.0)]),
        Builder::new("abs", "abs(x)", Yes)
            .primitive("x*abs(x)/2")
            .domain(-1.0, 1.0)
            .integral(-1.0, 1.0, exact(1.0), Basis::ClosedForm)
            .integral(0.0, 1.0, exact(0.5), Basis::ClosedForm)
            .probes(&[probe(0.0, Right, 0.0), probe(0.0, Left, 0.0)]),
        Builder::new("sign", "sign(x)", ViaOneSidedLimits)
            .primitive("abs(x)")
            .domain(-1.0, 1.0)
            .integral(-1.0, 1.0, exact(0.0), Basis::PiecewiseArea)
            .jumps(&[0.0])
            .probes(&[probe(0.0, Right, 1.0), probe(0.0, Left, -1.0)]),
        Builder::new("step", "step(0.5, 0, 1)", ViaOneSidedLimits)
            .primitive("max(x - 0.5, 0)")
            .integral(0.0, 1.0, exact(0.5), Basis::PiecewiseArea)
            .jumps(&[0.5])
            .probes(&[probe(0.5, Right, 1.0), probe(0.5, Left, 0.0)]),
        Builder::new("floor(3x)", "floor(3*x)", Yes)
            .primitive(&format!(
                "max(x - {third}, 0) + max(x - {two_thirds}, 0) + max(x - 1, 0)"
            ))
            .integral(0.0, 1.0, exact(1.0), Basis::PiecewiseArea)
            .jumps(&[third, two_thirds, 1.0])
            .probes(&[probe(0.5, Right, 1.0), probe(0.25, Left, 0.0)]),
        Builder::new("dirichlet", "dirichlet(x)", No),
        Builder::new("cantor", "cantor(x)", Yes)
            .primitive("0")
            .integral(
                0.0,
                1.0,
                // The depth-d cover has 2^d cells of width 3^-d.
                Interval::raw(0.0, (0..CANTOR_DEPTH).fold(exact(1.0), |acc, _| acc * ratio(2.0, 3.0)).hi()),
                Basis::CoverCounting,
            )
            .probes(&[probe(0.5, Right, 0.0), probe(0.5, Left, 0.0)]),
        Builder::new("staircase", &stairs.join(" + "), ViaOneSidedLimits)
            .primitive(&stairs_prim.join(" + "))
            .integral(0.0, 1.0, stairs_area, Basis::PiecewiseArea)
            .jumps(&ts)
            .probes(&[probe(0.5, Right, 9.0), probe(0.5, Left, 8.0)]),
    ]
    .into_iter()
    .map(|b| b.0)
    .collect()
}

pub fn gallery_entry(name: &str) -> Option<GalleryEntry> {
    builtin_gallery().into_iter().find(|g| g.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let g = builtin_gallery();
        let mut names: Vec<&str> = g.iter().map(|e| e.name.as_str()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), g.len());
        assert!(g.len() >= 11);
    }

    #[test]
    fn known_integrals_only_for_integrable_entries() {
        for g in builtin_gallery() {
            if g.integrable == Integrability::No {
                assert!(g.known_integrals.is_empty(), "{}", g.name);
                assert!(g.symbolic_primitive.is_none(), "{}", g.name);
            } else {
                assert!(!g.known_integrals.is_empty(), "{}", g.name);
            }
        }
    }

    #[test]
    fn known_integrals_agree_with_primitives() {
        for g in builtin_gallery() {
            let Some(p) = &g.symbolic_primitive else { continue };
            for k in &g.known_integrals {
                let ev = p.range_on(Interval::point(k.b)).unwrap().range - p.range_on(Interval::point(k.a)).unwrap().range;
                assert!(ev.intersects(&k.value), "{}: {ev} vs {}", g.name, k.value);
            }
        }
    }

    #[test]
    fn probes_match_nearby_values() {
        for g in builtin_gallery() {
            for p in &g.limit_probes {
                let x = match p.side {
                    Side::Right => p.x + 1e-7,
                    Side::Left => p.x - 1e-7,
                };
                let v = g.f.eval_point(x).unwrap();
                assert!((v - p.value).abs() < 1e-6, "{} at {x}: {v} vs {}", g.name, p.value);
            }
        }
    }

    #[test]
    fn staircase_has_ten_jumps() {
        let g = gallery_entry("staircase").unwrap();
        assert_eq!(g.f.breakpoints(0.0, 1.0), {
            let mut t = staircase_thresholds();
            t.reverse();
            t
        });
        assert_eq!(g.f.eval_point(1.0).unwrap(), 10.0);
        assert_eq!(g.f.eval_point(0.05).unwrap(), 0.0);
    }
}
