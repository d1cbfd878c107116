//! Lower and upper Darboux sums, adaptive refinement and the integrability verdict.
//!
//! Cell bounds are range enclosures of the integrand. Any lower bound of `f`
//! on a cell is admissible in a lower sum (and any upper bound in an upper
//! sum), so the sums computed here are genuine Darboux sums; the outward
//! rounded interval around each sum accounts for floating point.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::FuncExpr;
use crate::interval::{ulp, Interval};

/// Below this many cells range evaluation stays on the calling thread.
const PAR_THRESHOLD: usize = 2048;

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    points: Vec<f64>,
}

impl Partition {
    /// Requires at least two finite, strictly increasing points.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidPartition("need at least two points".into()));
        }
        if let Some(bad) = points.iter().find(|p| !p.is_finite()) {
            return Err(Error::InvalidPartition(format!("non-finite point {bad}")));
        }
        if let Some(w) = points.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::InvalidPartition(format!(
                "points must increase strictly, got {} then {}",
                w[0], w[1]
            )));
        }
        Ok(Partition { points })
    }

    /// The one-cell partition `{a, b}`.
    pub fn trivial(a: f64, b: f64) -> Result<Self> {
        check_interval(a, b)?;
        Partition::new(vec![a, b])
    }

    /// `n` cells of (nearly) equal width; duplicate points from rounding are dropped.
    pub fn uniform(a: f64, b: f64, n: usize) -> Result<Self> {
        check_interval(a, b)?;
        if n == 0 {
            return Err(Error::InvalidPartition("need at least one cell".into()));
        }
        let mut points: Vec<f64> = (0..=n)
            .map(|i| if i == n { b } else { a + (b - a) * (i as f64 / n as f64) })
            .collect();
        points.dedup();
        Partition::new(points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn num_cells(&self) -> usize {
        self.points.len() - 1
    }

    pub fn start(&self) -> f64 {
        self.points[0]
    }

    pub fn end(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn cells(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.windows(2).map(|w| (w[0], w[1]))
    }

    /// The union of the breakpoints of two partitions of the same interval.
    pub fn common_refinement(&self, other: &Partition) -> Result<Partition> {
        if self.start() != other.start() || self.end() != other.end() {
            return Err(Error::InvalidPartition("partitions cover different intervals".into()));
        }
        let mut points: Vec<f64> = self.points.iter().chain(&other.points).copied().collect();
        points.sort_by(f64::total_cmp);
        points.dedup();
        Partition::new(points)
    }

    /// Joins a partition of `[a, b]` with one of `[b, c]`.
    pub fn concat(&self, right: &Partition) -> Result<Partition> {
        if self.end() != right.start() {
            return Err(Error::InvalidPartition("partitions do not abut".into()));
        }
        let mut points = self.points.clone();
        points.extend_from_slice(&right.points[1..]);
        Partition::new(points)
    }
}

pub(crate) fn check_interval(a: f64, b: f64) -> Result<()> {
    if a.is_finite() && b.is_finite() && a < b {
        Ok(())
    } else {
        Err(Error::InvalidInterval { lo: a, hi: b })
    }
}

/// One cell of a partition with the bounds used for it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub lo: f64,
    pub hi: f64,
    /// `bounds.lo` is the lower bound p and `bounds.hi` the upper bound q on the cell.
    pub bounds: Interval,
    pub exact: bool,
}

impl Cell {
    fn new(f: &FuncExpr, lo: f64, hi: f64) -> Result<Cell> {
        let r = f.range_on(Interval::raw(lo, hi))?;
        Ok(Cell {
            lo,
            hi,
            bounds: r.range,
            exact: r.exact,
        })
    }

    pub fn width(&self) -> Interval {
        Interval::point(self.hi) - Interval::point(self.lo)
    }

    /// Share of the gap, `(q - p) * width`, rounded to nearest.
    pub fn contribution(&self) -> f64 {
        (self.bounds.hi() - self.bounds.lo()) * (self.hi - self.lo)
    }

    fn midpoint(&self) -> Option<f64> {
        let m = self.lo + (self.hi - self.lo) * 0.5;
        (self.lo < m && m < self.hi).then_some(m)
    }
}

fn evaluate(f: &FuncExpr, spans: &[(f64, f64)]) -> Result<Vec<Cell>> {
    let results: Vec<Result<Cell>> = if spans.len() > PAR_THRESHOLD {
        spans.par_iter().map(|&(lo, hi)| Cell::new(f, lo, hi)).collect()
    } else {
        spans.iter().map(|&(lo, hi)| Cell::new(f, lo, hi)).collect()
    };
    // Sequential collection keeps the reported error deterministic.
    results.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DarbouxSums {
    pub lower: Interval,
    pub upper: Interval,
    #[serde(skip)]
    pub cells: Vec<Cell>,
}

impl DarbouxSums {
    fn from_cells(cells: Vec<Cell>) -> Self {
        let (lower, upper) = sum_cells(&cells);
        DarbouxSums { lower, upper, cells }
    }

    pub fn all_exact(&self) -> bool {
        self.cells.iter().all(|c| c.exact)
    }

    /// `upper.hi - lower.lo`, rounded up.
    pub fn gap(&self) -> f64 {
        Interval::raw(self.lower.lo(), self.upper.hi()).width()
    }

    /// `upper.lo - lower.hi`, rounded down: the gap is at least this.
    pub fn gap_lower_bound(&self) -> f64 {
        (self.upper - self.lower).lo()
    }
}

fn sum_cells(cells: &[Cell]) -> (Interval, Interval) {
    let zero = Interval::point(0.0);
    cells.iter().fold((zero, zero), |(l, u), c| {
        let w = c.width();
        (
            l + Interval::point(c.bounds.lo()) * w,
            u + Interval::point(c.bounds.hi()) * w,
        )
    })
}

pub fn darboux_sums(f: &FuncExpr, p: &Partition) -> Result<DarbouxSums> {
    let spans: Vec<(f64, f64)> = p.cells().collect();
    Ok(DarbouxSums::from_cells(evaluate(f, &spans)?))
}

/// Enclosure of the lower sum with `p_i = range_on(f, cell_i).lo`.
pub fn lower_sum(f: &FuncExpr, p: &Partition) -> Result<Interval> {
    darboux_sums(f, p).map(|s| s.lower)
}

/// Enclosure of the upper sum with `q_i = range_on(f, cell_i).hi`.
pub fn upper_sum(f: &FuncExpr, p: &Partition) -> Result<Interval> {
    darboux_sums(f, p).map(|s| s.upper)
}

/// Bisects the cell with the largest gap contribution, leftmost on ties.
/// Cells too narrow to split are skipped; returns `p` unchanged if none is left.
pub fn refine_once(f: &FuncExpr, p: &Partition) -> Result<Partition> {
    let sums = darboux_sums(f, p)?;
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, c) in sums.cells.iter().enumerate() {
        if let Some(m) = c.midpoint() {
            let contrib = c.contribution();
            if best.is_none_or(|(_, _, b)| contrib > b) {
                best = Some((i, m, contrib));
            }
        }
    }
    let mut points = p.points.clone();
    if let Some((i, m, _)) = best {
        points.insert(i + 1, m);
    }
    Ok(Partition { points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegrabilityKind {
    Integrable,
    NonIntegrable,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    GapClosed,
    GapStable,
    MaxRounds,
    MaxCells,
    NoSplittableCell,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifyOptions {
    pub tol: f64,
    /// Refinement sweeps; each sweep bisects every cell carrying at least half
    /// the largest gap contribution.
    pub max_rounds: usize,
    /// Stop, inconclusive, once the partition has this many cells.
    pub max_cells: usize,
    /// Consecutive rounds with an unchanged gap needed for `NonIntegrable`.
    pub window: usize,
}

impl CertifyOptions {
    pub const DEFAULT_MAX_CELLS: usize = 1 << 23;

    pub fn new(tol: f64, max_rounds: usize) -> Self {
        CertifyOptions {
            tol,
            max_rounds,
            max_cells: Self::DEFAULT_MAX_CELLS,
            window: 5,
        }
    }
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions::new(1e-6, 100_000)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub cells: usize,
    pub lower: Interval,
    pub upper: Interval,
    pub all_exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrabilityVerdict {
    pub kind: IntegrabilityKind,
    pub reason: StopReason,
    /// `[lower.lo, upper.hi]`; contains the integral whenever `f` is integrable.
    pub enclosure: Interval,
    pub lower: Interval,
    pub upper: Interval,
    pub gap: f64,
    pub gap_lower_bound: f64,
    pub rounds: usize,
    pub final_partition_size: usize,
    #[serde(skip)]
    pub trace: Vec<RoundRecord>,
}

/// Outcome of a refinement run together with the final cells.
pub(crate) struct Refined {
    pub verdict: IntegrabilityVerdict,
    pub sums: DarbouxSums,
}

impl Refined {
    pub fn partition(&self) -> Partition {
        let mut points: Vec<f64> = self.sums.cells.iter().map(|c| c.lo).collect();
        points.push(self.sums.cells.last().map_or(f64::NAN, |c| c.hi));
        Partition { points }
    }
}

pub fn certify(f: &FuncExpr, a: f64, b: f64, opts: &CertifyOptions) -> Result<IntegrabilityVerdict> {
    refine(f, a, b, opts).map(|r| r.verdict)
}

/// Rounding noise allowed between two gaps that are "the same".
fn gap_noise(s: &DarbouxSums) -> f64 {
    s.lower.width() + s.upper.width() + 4.0 * ulp(s.gap())
}

pub(crate) fn refine(f: &FuncExpr, a: f64, b: f64, opts: &CertifyOptions) -> Result<Refined> {
    check_interval(a, b)?;
    if !(opts.tol > 0.0) {
        return Err(Error::NonPositiveTolerance(opts.tol));
    }
    let mut sums = DarbouxSums::from_cells(evaluate(f, &[(a, b)])?);
    let mut trace = Vec::new();
    let mut round = 0;
    let reason = loop {
        trace.push(RoundRecord {
            round,
            cells: sums.cells.len(),
            lower: sums.lower,
            upper: sums.upper,
            all_exact: sums.all_exact(),
        });
        if sums.gap() <= opts.tol {
            break StopReason::GapClosed;
        }
        if gap_is_stable(&trace, &sums, opts.window) {
            break StopReason::GapStable;
        }
        if round >= opts.max_rounds {
            break StopReason::MaxRounds;
        }
        if sums.cells.len() >= opts.max_cells {
            break StopReason::MaxCells;
        }
        match sweep(f, &sums.cells, opts.max_cells)? {
            Some(cells) => sums = DarbouxSums::from_cells(cells),
            None => break StopReason::NoSplittableCell,
        }
        round += 1;
    };
    let kind = match reason {
        StopReason::GapClosed => IntegrabilityKind::Integrable,
        StopReason::GapStable => IntegrabilityKind::NonIntegrable,
        _ => IntegrabilityKind::Inconclusive,
    };
    let verdict = IntegrabilityVerdict {
        kind,
        reason,
        enclosure: Interval::raw(sums.lower.lo(), sums.upper.hi()),
        lower: sums.lower,
        upper: sums.upper,
        gap: sums.gap(),
        gap_lower_bound: sums.gap_lower_bound(),
        rounds: round,
        final_partition_size: sums.cells.len() + 1,
        trace,
    };
    Ok(Refined { verdict, sums })
}

/// Every cell exact and the gap unchanged, up to rounding, over the last `window` rounds.
fn gap_is_stable(trace: &[RoundRecord], sums: &DarbouxSums, window: usize) -> bool {
    if window == 0 || trace.len() < window {
        return false;
    }
    let recent = &trace[trace.len() - window..];
    if !recent.iter().all(|r| r.all_exact) {
        return false;
    }
    let noise = gap_noise(sums);
    let gaps: Vec<f64> = recent.iter().map(|r| (r.upper - r.lower).midpoint()).collect();
    let (min, max) = gaps
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(*g), hi.max(*g)));
    max - min <= noise
}

/// Bisects every splittable cell whose contribution is at least half the largest.
fn sweep(f: &FuncExpr, cells: &[Cell], max_cells: usize) -> Result<Option<Vec<Cell>>> {
    let max = cells
        .iter()
        .filter(|c| c.midpoint().is_some())
        .map(Cell::contribution)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Ok(None);
    }
    let mut budget = max_cells.saturating_sub(cells.len()).max(1);
    let mut chosen = vec![false; cells.len()];
    for (i, c) in cells.iter().enumerate() {
        if budget == 0 {
            break;
        }
        let selected = if max > 0.0 { c.contribution() >= max * 0.5 } else { true };
        if selected && c.midpoint().is_some() {
            chosen[i] = true;
            budget -= 1;
            if max <= 0.0 {
                break;
            }
        }
    }
    let mut spans = Vec::new();
    for (c, &split) in cells.iter().zip(&chosen) {
        if split {
            let m = c.midpoint().unwrap_or(c.lo);
            spans.push((c.lo, m));
            spans.push((m, c.hi));
        }
    }
    let mut fresh = evaluate(f, &spans)?.into_iter();
    let mut out = Vec::with_capacity(cells.len() + spans.len() / 2);
    for (c, &split) in cells.iter().zip(&chosen) {
        if split {
            out.extend(fresh.by_ref().take(2));
        } else {
            out.push(*c);
        }
    }
    Ok(Some(out))
}

/// Lower sums on `[x, y]`, `[y, z]` and on the joined partition of `[x, z]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdditivityReport {
    pub left: Interval,
    pub right: Interval,
    pub whole: Interval,
    /// `|mid(left + right) - mid(whole)|`.
    pub discrepancy: f64,
    /// Rounding slack of the three enclosures.
    pub slack: f64,
    pub holds: bool,
    pub cells: usize,
}

/// Refines `[x, y]` and `[y, z]` independently, then recomputes the lower sum
/// over the joined partition of `[x, z]`, in which `y` is a breakpoint.
pub fn lower_integral_additivity_check(
    f: &FuncExpr,
    x: f64,
    y: f64,
    z: f64,
    opts: &CertifyOptions,
) -> Result<AdditivityReport> {
    check_interval(x, y)?;
    check_interval(y, z)?;
    let left = refine(f, x, y, opts)?;
    let right = refine(f, y, z, opts)?;
    let joined = left.partition().concat(&right.partition())?;
    let whole = lower_sum(f, &joined)?;
    let sum = left.sums.lower + right.sums.lower;
    let discrepancy = (sum.midpoint() - whole.midpoint()).abs();
    let slack = sum.width() + whole.width();
    Ok(AdditivityReport {
        left: left.sums.lower,
        right: right.sums.lower,
        whole,
        discrepancy,
        slack,
        holds: sum.intersects(&whole) && discrepancy <= slack,
        cells: joined.num_cells(),
    })
}
