//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use darboux_core::{
    build_lower_preprimitive, builtin_gallery, certify, check_constant_difference, check_lipschitz,
    check_one_sided_derivative, check_sandwich, default_h_schedule, ftc_check, gallery_entry,
    lower_integral_additivity_check, lower_sum, upper_sum, CertifyOptions, CheckVerdict, FtcVerdict,
    FuncExpr, IntegrabilityKind, Interval, Partition, PrePrimitiveFn, WorkBudget,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const AC1_TOL: f64 = 1e-6;
const AC1_SECONDS: f64 = 5.0;
const MAX_ROUNDS: usize = 100_000;
const AC2_TOL: f64 = 1e-3;
const AC2_GAP_SLACK: f64 = 1e-9;
const AC3_TOL: f64 = 1e-3;
const AC3_MAX_DEPTH: u32 = 10;
const AC4_PARTITIONS: usize = 200;
const AC4_MAX_INTERIOR: usize = 64;
const CHECK_PAIRS: usize = 1000;
const AC7_TOL: f64 = 1e-3;
const AC8_TOL: f64 = 1e-3;
const AC8_GRID: usize = 5;
const AC8_SEPARATION: f64 = 0.5;
const AC9_TOL: f64 = 1e-6;
const AC10_SLACK: f64 = 1e-9;
const SUITE_SECONDS: f64 = 60.0;
const SEED: u64 = 0;

/// Budget for pre-primitives that are queried once per entry.
fn query_budget() -> WorkBudget {
    WorkBudget {
        slope_tol: 1e-4,
        max_rounds: MAX_ROUNDS,
        max_cells: 1 << 20,
    }
}

/// Budget for pre-primitives queried on a thousand sub-intervals. The
/// Lipschitz bound holds for the enclosure at any resolution.
fn pair_budget() -> WorkBudget {
    WorkBudget {
        slope_tol: 1e-3,
        max_rounds: MAX_ROUNDS,
        max_cells: 1 << 14,
    }
}

type Check = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Check);

fn e(s: &str) -> FuncExpr {
    s.parse().expect("acceptance expressions parse")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ac1() -> Check {
    let start = Instant::now();
    let v = certify(&e("x"), 0.0, 1.0, &CertifyOptions::new(AC1_TOL, MAX_ROUNDS)).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ensure(v.kind == IntegrabilityKind::Integrable, || format!("kind {:?} ({:?})", v.kind, v.reason))?;
    ensure(v.enclosure.contains(0.5), || format!("enclosure {} misses 0.5", v.enclosure))?;
    ensure(v.enclosure.width() <= AC1_TOL, || format!("width {:e}", v.enclosure.width()))?;
    ensure(v.rounds <= MAX_ROUNDS, || format!("{} rounds", v.rounds))?;
    ensure(secs < AC1_SECONDS, || format!("took {secs:.2} s"))?;
    Ok(format!(
        "enclosure {} width {:.3e}, {} rounds, {} cells, {secs:.2} s",
        v.enclosure,
        v.enclosure.width(),
        v.rounds,
        v.final_partition_size
    ))
}

fn ac2() -> Check {
    let v = certify(&e("dirichlet(x)"), 0.0, 1.0, &CertifyOptions::new(AC2_TOL, MAX_ROUNDS)).map_err(|e| e.to_string())?;
    ensure(v.kind == IntegrabilityKind::NonIntegrable, || format!("kind {:?}", v.kind))?;
    let g = v.gap_lower_bound;
    ensure((1.0 - AC2_GAP_SLACK..=1.0).contains(&g), || format!("gap lower bound {g}"))?;
    ensure(!v.trace.is_empty(), || "empty trace".into())?;
    for r in &v.trace {
        ensure(r.lower == Interval::point(0.0) && r.upper == Interval::point(1.0), || {
            format!("round {}: lower {} upper {}", r.round, r.lower, r.upper)
        })?;
    }
    Ok(format!("gap lower bound {g}, {} rounds all exactly 0 / 1", v.trace.len()))
}

/// `k / 3^d` rounded toward `up`'s side, using the exact division residual.
fn ternary_point(k: u64, d: u32, up: bool) -> f64 {
    let (kf, n) = (k as f64, 3u64.pow(d) as f64);
    let q = kf / n;
    // k - q n is representable, so the fused form is exact.
    let residual = -q.mul_add(n, -kf);
    match (up, residual.partial_cmp(&0.0).unwrap()) {
        (true, std::cmp::Ordering::Greater) => q.next_up(),
        (false, std::cmp::Ordering::Less) => q.next_down(),
        _ => q,
    }
}

/// Cell `[k, k + 1] / 3^d` belongs to the depth-`d` Cantor cover iff no
/// ternary digit of `k` is 1.
fn in_cover(mut k: u64, d: u32) -> bool {
    for _ in 0..d {
        if k % 3 == 1 {
            return false;
        }
        k /= 3;
    }
    true
}

fn ac3() -> Check {
    let f = e("cantor(x)");
    let mut worst: f64 = 0.0;
    for d in 1..=AC3_MAX_DEPTH {
        let n = 3u64.pow(d);
        let mut pts = vec![0.0];
        // Each interior point borders one cover cell and one gap cell; push
        // it into the gap so gap cells stay disjoint from the set.
        for k in 1..n {
            let gap_on_right = !in_cover(k, d);
            pts.push(ternary_point(k, d, gap_on_right));
        }
        pts.push(1.0);
        let p = Partition::new(pts).map_err(|e| e.to_string())?;
        let upper = upper_sum(&f, &p).map_err(|e| e.to_string())?;
        let lower = lower_sum(&f, &p).map_err(|e| e.to_string())?;
        let covered = (0..n).filter(|&k| in_cover(k, d)).count() as u64;
        ensure(covered == 1 << d, || format!("depth {d}: {covered} cover cells"))?;
        let oracle = (1u64 << d) as f64 / n as f64;
        let slack = 2f64.powi(d as i32 + 2) * f64::EPSILON;
        let err = upper.distance(&Interval::point(oracle));
        worst = worst.max(err);
        ensure(err <= slack, || format!("depth {d}: upper {upper} vs (2/3)^{d} = {oracle}"))?;
        ensure(lower == Interval::point(0.0), || format!("depth {d}: lower {lower}"))?;
    }
    let v = certify(&f, 0.0, 1.0, &CertifyOptions::new(AC3_TOL, MAX_ROUNDS)).map_err(|e| e.to_string())?;
    ensure(v.kind == IntegrabilityKind::Integrable, || format!("kind {:?} ({:?}), gap {}", v.kind, v.reason, v.gap))?;
    let target = Interval::new(0.0, AC3_TOL).unwrap();
    ensure(target.contains_interval(&v.enclosure), || format!("enclosure {}", v.enclosure))?;
    Ok(format!(
        "depths 1..={AC3_MAX_DEPTH} within {worst:.1e}; enclosure {} after {} rounds, {} cells",
        v.enclosure, v.rounds, v.final_partition_size
    ))
}

fn random_partition(rng: &mut ChaCha8Rng, a: f64, b: f64) -> Partition {
    let k = rng.gen_range(0..=AC4_MAX_INTERIOR);
    let mut pts: Vec<f64> = (0..k).map(|_| rng.gen_range(a..b)).filter(|p| *p > a).collect();
    pts.push(a);
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    Partition::new(pts).expect("sorted distinct points")
}

fn ac4() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut checked = 0;
    for g in builtin_gallery() {
        let (a, b) = g.domain;
        let big_f = build_lower_preprimitive(&g.f, a).with_budget(query_budget());
        let inc = big_f.increment(a, b).map_err(|e| e.to_string())?;
        for i in 0..AC4_PARTITIONS {
            let p = random_partition(&mut rng, a, b);
            let lower = lower_sum(&g.f, &p).map_err(|e| e.to_string())?;
            let upper = upper_sum(&g.f, &p).map_err(|e| e.to_string())?;
            let slack = (2 * p.num_cells() + 2) as f64 * darboux_core::interval::ulp(upper.mag().max(lower.mag()));
            ensure(lower.hi() - slack <= inc.lo() && inc.hi() <= upper.lo() + slack, || {
                format!("{} partition {i}: lower {lower}, F increment {inc}, upper {upper}", g.name)
            })?;
            checked += 1;
        }
    }
    Ok(format!("{checked} partition checks, zero violations"))
}

fn ac5() -> Check {
    let mut pairs = 0;
    for g in builtin_gallery() {
        let Some(prim) = &g.symbolic_primitive else { continue };
        let (a, b) = g.domain;
        let r = check_sandwich(&PrePrimitiveFn::symbolic(prim.clone()), &g.f, a, b, CHECK_PAIRS, SEED)
            .map_err(|e| e.to_string())?;
        ensure(r.verdict == CheckVerdict::ConsistentAtResolution, || {
            format!("{}: {:?} {:?}", g.name, r.verdict, r.witnesses.first())
        })?;
        pairs += r.samples_checked;
    }
    let negatives = [("dirichlet(x)", "2*x", 0.0, 1.0), ("x", "x^2", 0.0, 3.0)];
    for (f, big_f, a, b) in negatives {
        let r = check_sandwich(&PrePrimitiveFn::symbolic(e(big_f)), &e(f), a, b, CHECK_PAIRS, SEED)
            .map_err(|e| e.to_string())?;
        ensure(r.verdict == CheckVerdict::Refuted && !r.witnesses.is_empty(), || {
            format!("F = {big_f} vs f = {f}: {:?}", r.verdict)
        })?;
        let w = r.witnesses[0];
        ensure(!w.observed.intersects(&w.bound), || format!("witness {w:?} is not separating"))?;
    }
    Ok(format!("{pairs} pairs consistent; both planted negatives refuted with witnesses"))
}

fn ac6() -> Check {
    let mut count = 0;
    for g in builtin_gallery() {
        if g.domain != (0.0, 1.0) {
            continue;
        }
        let big_f = build_lower_preprimitive(&g.f, 0.0).with_budget(pair_budget());
        let r = check_lipschitz(&big_f, &g.f, 0.0, 1.0, CHECK_PAIRS, SEED).map_err(|e| e.to_string())?;
        ensure(r.verdict == CheckVerdict::ConsistentAtResolution, || {
            format!("{}: {:?} {:?}", g.name, r.verdict, r.witnesses.first())
        })?;
        count += 1;
    }
    Ok(format!("{count} Darboux pre-primitives, {CHECK_PAIRS} pairs each"))
}

fn ac7() -> Check {
    let mut probes = 0;
    let schedule = default_h_schedule();
    for g in builtin_gallery() {
        let mut candidates = vec![build_lower_preprimitive(&g.f, g.domain.0).with_budget(query_budget())];
        if let Some(p) = &g.symbolic_primitive {
            candidates.push(PrePrimitiveFn::symbolic(p.clone()));
        }
        for p in &g.limit_probes {
            for big_f in &candidates {
                let r = check_one_sided_derivative(big_f, &g.f, p.x, p.side, &schedule, AC7_TOL)
                    .map_err(|e| e.to_string())?;
                let q = r.estimate.expect("derivative reports carry the last quotient");
                ensure(r.verdict == CheckVerdict::ConsistentAtResolution, || {
                    format!("{} ({big_f}) at {} {:?}: {:?}, quotient {q}", g.name, p.x, p.side, r.verdict)
                })?;
                ensure(q.distance(&Interval::point(p.value)) <= AC7_TOL, || {
                    format!("{} ({big_f}) at {} {:?}: quotient {q} vs {}", g.name, p.x, p.side, p.value)
                })?;
                probes += 1;
            }
        }
    }
    Ok(format!("{probes} probes converged within {AC7_TOL:e}"))
}

fn ac8() -> Check {
    // Cantor at 1e-3 needs about 1.8M cells, above the query budget's cap.
    let budget = WorkBudget {
        slope_tol: AC8_TOL,
        max_rounds: MAX_ROUNDS,
        max_cells: CertifyOptions::DEFAULT_MAX_CELLS,
    };
    let mut widths = Vec::new();
    for src in ["cos(x)", "x", "floor(3*x)", "cantor(x)"] {
        let (lower, upper) = PrePrimitiveFn::darboux_pair(&e(src), 0.0, budget);
        let r = check_constant_difference(&lower, &upper, 0.0, 1.0, AC8_GRID, AC8_TOL).map_err(|e| e.to_string())?;
        let hull = r.estimate.expect("constant-difference reports carry the hull");
        ensure(r.verdict == CheckVerdict::ConsistentAtResolution, || format!("{src}: {:?}, hull {hull}", r.verdict))?;
        ensure(hull.width() <= 2.0 * AC8_TOL, || format!("{src}: hull width {:e}", hull.width()))?;
        widths.push(format!("{src} {:.1e}", hull.width()));
    }
    let (lower, upper) = PrePrimitiveFn::darboux_pair(&e("dirichlet(x)"), 0.0, budget);
    let r = check_constant_difference(&lower, &upper, 0.0, 1.0, AC8_GRID, AC8_TOL).map_err(|e| e.to_string())?;
    ensure(r.verdict == CheckVerdict::Refuted, || format!("dirichlet: {:?}", r.verdict))?;
    let at = |x: f64| -> Result<Interval, String> {
        Ok(lower.eval(x).map_err(|e| e.to_string())? - upper.eval(x).map_err(|e| e.to_string())?)
    };
    let separation = at(0.0)?.distance(&at(1.0)?);
    ensure(separation >= AC8_SEPARATION, || format!("dirichlet separation {separation}"))?;
    Ok(format!("hull widths {}; dirichlet separation {separation}", widths.join(", ")))
}

fn ac9() -> Check {
    let opts = CertifyOptions::new(AC9_TOL, MAX_ROUNDS);
    let run = |f: &str, big_f: &str, b: f64| {
        ftc_check(&e(f), &PrePrimitiveFn::symbolic(e(big_f)), 0.0, b, &opts).map_err(|e| e.to_string())
    };
    let band = Interval::new(1.0 - AC9_TOL, 1.0 + AC9_TOL).unwrap();
    let c = run("cos(x)", "sin(x)", std::f64::consts::FRAC_PI_2)?;
    ensure(c.verdict == FtcVerdict::Certified, || format!("cos/sin: {:?}", c.verdict))?;
    ensure(
        c.integral_enclosure.contains(1.0) && c.evaluation.contains(1.0),
        || format!("cos/sin: {} and {} must contain 1", c.integral_enclosure, c.evaluation),
    )?;
    ensure(
        band.contains_interval(&c.integral_enclosure) && band.contains_interval(&c.evaluation),
        || format!("cos/sin: {} and {} must lie in {band}", c.integral_enclosure, c.evaluation),
    )?;
    let shifted = run("x", "x^2/2 + 7", 1.0)?;
    let plain = run("x", "x^2/2", 1.0)?;
    ensure(shifted.verdict == FtcVerdict::Certified, || format!("x^2/2 + 7: {:?}", shifted.verdict))?;
    ensure(shifted.evaluation.contains(0.5) && shifted.integral_enclosure.contains(0.5), || {
        format!("x^2/2 + 7: {} / {}", shifted.evaluation, shifted.integral_enclosure)
    })?;
    ensure(
        shifted.evaluation == plain.evaluation && shifted.integral_enclosure == plain.integral_enclosure,
        || format!("offset changed the result: {} vs {}", shifted.evaluation, plain.evaluation),
    )?;
    Ok(format!("cos/sin {}; x^2/2 + 7 evaluates to {} bit-identically to x^2/2", c.evaluation, shifted.evaluation))
}

fn ac10() -> Check {
    let opts = CertifyOptions::new(1e-6, MAX_ROUNDS);
    let mut worst: f64 = 0.0;
    for src in ["x", "dirichlet(x)", "floor(3*x)"] {
        let r = lower_integral_additivity_check(&e(src), 0.0, 1.0 / 3.0, 1.0, &opts).map_err(|e| e.to_string())?;
        ensure(r.holds && r.discrepancy <= AC10_SLACK, || format!("{src}: {r:?}"))?;
        worst = worst.max(r.discrepancy);
    }
    Ok(format!("worst discrepancy {worst:e}"))
}

const AC11_RUNS: [&[&str]; 6] = [
    &["certify", "--f", "dirichlet(x)", "--a", "0", "--b", "1", "--tol", "1e-3"],
    &["integrate", "--f", "x^2 - x", "--a", "0", "--b", "1"],
    &["ftc-check", "--f", "cos(x)", "--F", "sin(x)", "--a", "0", "--b", "pi/2"],
    &["preprim-check", "--f", "floor(3*x)", "--a", "0", "--b", "1", "--check", "sandwich,lipschitz,constant", "--tol", "1e-3"],
    &["tabulate", "--f", "step(0.5, 0, 1)", "--a", "0", "--b", "1", "--n", "21", "--format", "json"],
    &["gallery"],
];

fn cli_artifacts(dir: &PathBuf) -> Result<Vec<Vec<u8>>, String> {
    std::fs::create_dir_all(dir).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for (i, args) in AC11_RUNS.iter().enumerate() {
        let run = Command::new(env!("CARGO_BIN_EXE_darboux"))
            .args(*args)
            .args(["--seed", "0"].iter().filter(|_| args[0] == "preprim-check"))
            .output()
            .map_err(|e| e.to_string())?;
        ensure(run.status.code().is_some_and(|c| c <= 2), || {
            format!("{args:?} exited {:?}: {}", run.status.code(), String::from_utf8_lossy(&run.stderr))
        })?;
        std::fs::write(dir.join(format!("{i}-{}.json", args[0])), &run.stdout).map_err(|e| e.to_string())?;
        out.push(run.stdout);
    }
    Ok(out)
}

fn ac11() -> Check {
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    let first = cli_artifacts(&root.join("run1"))?;
    let second = cli_artifacts(&root.join("run2"))?;
    for (i, (x, y)) in first.iter().zip(&second).enumerate() {
        ensure(x == y, || format!("{:?} differs between runs", AC11_RUNS[i]))?;
    }
    let bytes: usize = first.iter().map(Vec::len).sum();
    Ok(format!("{} artifacts, {bytes} bytes, identical across runs", first.len()))
}

fn main() {
    // The gallery lookup doubles as a smoke test of the re-exports.
    assert!(gallery_entry("cantor").is_some());
    let criteria: [Criterion; 11] = [
        ("AC1", "integrable enclosure for x on [0, 1]", ac1),
        ("AC2", "dirichlet is non-integrable with gap 1", ac2),
        ("AC3", "cantor upper sums and certification", ac3),
        ("AC4", "pre-primitive sandwich on random partitions", ac4),
        ("AC5", "symbolic primitives pass the sandwich check", ac5),
        ("AC6", "Darboux pre-primitives are Lipschitz", ac6),
        ("AC7", "one-sided derivatives match one-sided limits", ac7),
        ("AC8", "lower and upper pre-primitives differ by a constant", ac8),
        ("AC9", "fundamental theorem certificates", ac9),
        ("AC10", "additivity of the lower integral", ac10),
        ("AC11", "deterministic CLI output", ac11),
    ];
    panic::set_hook(Box::new(|_| {}));
    let suite = Instant::now();
    let mut failed = 0;
    for (id, title, check) in criteria {
        let start = Instant::now();
        let result = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("{id:<5} PASS  {title}: {detail} [{secs:.2} s]"),
            Err(detail) => {
                failed += 1;
                println!("{id:<5} FAIL  {title}: {detail} [{secs:.2} s]");
            }
        }
    }
    let total = suite.elapsed();
    let within = total < Duration::from_secs_f64(SUITE_SECONDS);
    if !within {
        failed += 1;
    }
    println!(
        "TIME  {}  full suite {:.2} s (target < {SUITE_SECONDS} s)",
        if within { "PASS" } else { "FAIL" },
        total.as_secs_f64()
    );
    println!("{} of 12 lines passed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
