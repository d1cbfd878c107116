//! `darboux`: certify integrals, check pre-primitives and tabulate integral
//! functions from the command line.
//!
//! Exit codes: 0 positive result, 1 refuted or non-integrable, 2 inconclusive,
//! 3 usage or parse error, 4 domain or evaluation error.

use std::io::Write;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use darboux_core::{
    build_lower_preprimitive, builtin_gallery, certify, check_constant_difference, check_lipschitz,
    check_one_sided_derivative, check_sandwich, default_h_schedule, ftc_check, integral_function,
    CertifyOptions, CheckVerdict, Error, FtcVerdict, FuncExpr, IntegrabilityKind, Point,
    PrePrimitiveFn, PrePrimitiveReport, Side, WorkBudget,
};
use serde::Serialize;
use serde_json::{json, Map, Value};

const SCHEMA_VERSION: u32 = 1;

const EXIT_OK: u8 = 0;
const EXIT_NEGATIVE: u8 = 1;
const EXIT_INCONCLUSIVE: u8 = 2;
const EXIT_USAGE: u8 = 3;
const EXIT_DOMAIN: u8 = 4;

#[derive(Parser)]
#[command(name = "darboux", version, about = "Rigorous Darboux-sum integration and pre-primitive checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Enclose the integral of f over [a, b].
    Integrate(Common),
    /// Decide integrability of f on [a, b] and print every refinement round.
    Certify(Common),
    /// Check pre-primitive properties of F against f.
    PreprimCheck(PreprimArgs),
    /// Certify or refute F(b) - F(a) as the integral of f.
    FtcCheck(FtcArgs),
    /// Tabulate x -> integral of f from c to x on a uniform grid.
    Tabulate(TabulateArgs),
    /// Print the built-in function gallery.
    Gallery(GalleryArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Integrand, e.g. "x^2 - x" or "dirichlet(x)".
    #[arg(long = "f")]
    f: String,
    /// Left endpoint; accepts constants such as "pi/4".
    #[arg(long, allow_hyphen_values = true)]
    a: String,
    /// Right endpoint.
    #[arg(long, allow_hyphen_values = true)]
    b: String,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long = "max-rounds", default_value_t = 100_000)]
    max_rounds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args)]
struct PreprimArgs {
    #[command(flatten)]
    common: Common,
    /// Candidate pre-primitive; defaults to the lower Darboux pre-primitive at c.
    #[arg(long = "F")]
    big_f: Option<String>,
    /// Second pre-primitive for the constant-difference check; defaults to the upper Darboux one.
    #[arg(long = "G")]
    big_g: Option<String>,
    /// Basepoint of Darboux pre-primitives; defaults to a.
    #[arg(long, allow_hyphen_values = true)]
    c: Option<String>,
    /// Comma-separated checks: sandwich, lipschitz, derivative, constant.
    #[arg(long, value_delimiter = ',', default_value = "sandwich,lipschitz")]
    check: Vec<CheckKind>,
    #[arg(long, default_value_t = 1000)]
    pairs: usize,
    /// Point for the derivative check; defaults to a.
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    #[arg(long, value_enum, default_value_t = SideArg::Right)]
    side: SideArg,
    /// Grid points for the constant-difference check.
    #[arg(long, default_value_t = 11)]
    grid: usize,
}

#[derive(Args)]
struct FtcArgs {
    #[command(flatten)]
    common: Common,
    /// Candidate primitive; defaults to the lower Darboux pre-primitive at a.
    #[arg(long = "F")]
    big_f: Option<String>,
}

#[derive(Args)]
struct TabulateArgs {
    #[command(flatten)]
    common: Common,
    /// Basepoint; defaults to a.
    #[arg(long, allow_hyphen_values = true)]
    c: Option<String>,
    /// Number of grid points.
    #[arg(long, default_value_t = 11)]
    n: usize,
}

#[derive(Args)]
struct GalleryArgs {
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CheckKind {
    Sandwich,
    Lipschitz,
    Derivative,
    Constant,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SideArg {
    Left,
    Right,
}

enum Failure {
    Usage(String),
    Domain(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_usage() {
            Failure::Usage(e.to_string())
        } else {
            Failure::Domain(e.to_string())
        }
    }
}

type Outcome = Result<(String, u8), Failure>;

fn expr(src: &str) -> Result<FuncExpr, Failure> {
    src.parse().map_err(Failure::from)
}

fn number(name: &str, src: &str) -> Result<f64, Failure> {
    Point::parse(src)
        .map(|p| p.value())
        .map_err(|e| Failure::Usage(format!("--{name}: {e}")))
}

fn endpoints(c: &Common) -> Result<(f64, f64), Failure> {
    let (a, b) = (number("a", &c.a)?, number("b", &c.b)?);
    if !(c.tol > 0.0) {
        return Err(Error::NonPositiveTolerance(c.tol).into());
    }
    Ok((a, b))
}

fn require_ordered(a: f64, b: f64) -> Result<(), Failure> {
    if a < b {
        Ok(())
    } else {
        Err(Error::InvalidInterval { lo: a, hi: b }.into())
    }
}

fn options(c: &Common) -> CertifyOptions {
    CertifyOptions::new(c.tol, c.max_rounds)
}

fn budget(c: &Common, length: f64) -> WorkBudget {
    WorkBudget {
        slope_tol: c.tol / length.max(f64::MIN_POSITIVE),
        max_rounds: c.max_rounds,
        ..WorkBudget::default()
    }
}

/// `{"schema_version", "command", "verdict", "slack"}` followed by `body`'s fields.
fn report(command: &str, verdict: &str, slack: f64, body: impl Serialize) -> String {
    let mut doc = Map::new();
    doc.insert("schema_version".into(), json!(SCHEMA_VERSION));
    doc.insert("command".into(), json!(command));
    doc.insert("verdict".into(), json!(verdict));
    doc.insert("slack".into(), json!(slack));
    if let Value::Object(fields) = serde_json::to_value(body).expect("reports serialize") {
        for (k, v) in fields {
            doc.entry(k).or_insert(v);
        }
    }
    serde_json::to_string_pretty(&Value::Object(doc)).expect("reports serialize")
}

fn kind_name(k: IntegrabilityKind) -> &'static str {
    match k {
        IntegrabilityKind::Integrable => "integrable",
        IntegrabilityKind::NonIntegrable => "non_integrable",
        IntegrabilityKind::Inconclusive => "inconclusive",
    }
}

fn kind_exit(k: IntegrabilityKind) -> u8 {
    match k {
        IntegrabilityKind::Integrable => EXIT_OK,
        IntegrabilityKind::NonIntegrable => EXIT_NEGATIVE,
        IntegrabilityKind::Inconclusive => EXIT_INCONCLUSIVE,
    }
}

fn json_only(format: Format, command: &str) -> Result<(), Failure> {
    match format {
        Format::Json => Ok(()),
        Format::Csv => Err(Failure::Usage(format!("{command} only supports --format json"))),
    }
}

fn run_certify(c: &Common, command: &str, with_trace: bool) -> Outcome {
    json_only(c.format, command)?;
    let f = expr(&c.f)?;
    let (a, b) = endpoints(c)?;
    let v = certify(&f, a, b, &options(c))?;
    let slack = v.lower.width() + v.upper.width();
    let mut body = serde_json::to_value(&v).expect("verdict serializes");
    body["f"] = json!(f.to_string());
    body["a"] = json!(a);
    body["b"] = json!(b);
    body["tol"] = json!(c.tol);
    if with_trace {
        body["trace"] = serde_json::to_value(&v.trace).expect("trace serializes");
    } else {
        body["value"] = json!(v.enclosure.midpoint());
    }
    Ok((report(command, kind_name(v.kind), slack, body), kind_exit(v.kind)))
}

fn check_name(v: CheckVerdict) -> &'static str {
    match v {
        CheckVerdict::ConsistentAtResolution => "consistent_at_resolution",
        CheckVerdict::Refuted => "refuted",
        CheckVerdict::Inconclusive => "inconclusive",
    }
}

fn run_preprim(p: &PreprimArgs) -> Outcome {
    let c = &p.common;
    json_only(c.format, "preprim-check")?;
    let f = expr(&c.f)?;
    let (a, b) = endpoints(c)?;
    require_ordered(a, b)?;
    let basepoint = match &p.c {
        Some(s) => number("c", s)?,
        None => a,
    };
    let (lower, upper) = PrePrimitiveFn::darboux_pair(&f, basepoint, budget(c, b - a));
    let big_f = match &p.big_f {
        Some(s) => PrePrimitiveFn::symbolic(expr(s)?),
        None => lower,
    };
    let big_g = match &p.big_g {
        Some(s) => PrePrimitiveFn::symbolic(expr(s)?),
        None => upper,
    };
    let mut reports: Vec<PrePrimitiveReport> = Vec::new();
    for check in &p.check {
        reports.push(match check {
            CheckKind::Sandwich => check_sandwich(&big_f, &f, a, b, p.pairs, c.seed)?,
            CheckKind::Lipschitz => check_lipschitz(&big_f, &f, a, b, p.pairs, c.seed)?,
            CheckKind::Derivative => {
                let x = match &p.x {
                    Some(s) => number("x", s)?,
                    None => a,
                };
                let side = match p.side {
                    SideArg::Left => Side::Left,
                    SideArg::Right => Side::Right,
                };
                check_one_sided_derivative(&big_f, &f, x, side, &default_h_schedule(), c.tol)?
            }
            CheckKind::Constant => check_constant_difference(&big_f, &big_g, a, b, p.grid, c.tol)?,
        });
    }
    let verdicts: Vec<CheckVerdict> = reports.iter().map(|r| r.verdict).collect();
    let (verdict, code) = if verdicts.contains(&CheckVerdict::Refuted) {
        (CheckVerdict::Refuted, EXIT_NEGATIVE)
    } else if verdicts.contains(&CheckVerdict::Inconclusive) {
        (CheckVerdict::Inconclusive, EXIT_INCONCLUSIVE)
    } else {
        (CheckVerdict::ConsistentAtResolution, EXIT_OK)
    };
    let slack = reports.iter().map(|r| r.slack).fold(0.0, f64::max);
    let body = json!({
        "f": f.to_string(),
        "F": big_f.to_string(),
        "a": a,
        "b": b,
        "seed": c.seed,
        "reports": reports,
    });
    Ok((report("preprim-check", check_name(verdict), slack, body), code))
}

fn run_ftc(p: &FtcArgs) -> Outcome {
    let c = &p.common;
    json_only(c.format, "ftc-check")?;
    let f = expr(&c.f)?;
    let (a, b) = endpoints(c)?;
    let big_f = match &p.big_f {
        Some(s) => PrePrimitiveFn::symbolic(expr(s)?),
        None => build_lower_preprimitive(&f, a).with_budget(budget(c, (b - a).abs())),
    };
    let cert = ftc_check(&f, &big_f, a, b, &options(c))?;
    let (verdict, code) = match cert.verdict {
        FtcVerdict::Certified => ("certified", EXIT_OK),
        FtcVerdict::Refuted => ("refuted", EXIT_NEGATIVE),
        FtcVerdict::Inconclusive if cert.integrability == IntegrabilityKind::NonIntegrable => {
            ("inconclusive", EXIT_NEGATIVE)
        }
        FtcVerdict::Inconclusive => ("inconclusive", EXIT_INCONCLUSIVE),
    };
    Ok((report("ftc-check", verdict, cert.slack, &cert), code))
}

fn run_tabulate(t: &TabulateArgs) -> Outcome {
    let c = &t.common;
    let f = expr(&c.f)?;
    let (a, b) = endpoints(c)?;
    require_ordered(a, b)?;
    if t.n < 2 {
        return Err(Failure::Usage("--n must be at least 2".into()));
    }
    let basepoint = match &t.c {
        Some(s) => number("c", s)?,
        None => a,
    };
    let xs: Vec<f64> = (0..t.n)
        .map(|i| if i + 1 == t.n { b } else { a + (b - a) * (i as f64 / (t.n - 1) as f64) })
        .collect();
    let span = b.max(basepoint) - a.min(basepoint);
    let pts = integral_function(&f, basepoint, &xs, &budget(c, span))?;
    let kinds: Vec<IntegrabilityKind> = pts.iter().map(|p| p.verdict).collect();
    let overall = [IntegrabilityKind::NonIntegrable, IntegrabilityKind::Inconclusive]
        .into_iter()
        .find(|k| kinds.contains(k))
        .unwrap_or(IntegrabilityKind::Integrable);
    let text = match c.format {
        Format::Csv => {
            let mut s = String::from("x,lo,hi\n");
            for p in &pts {
                s.push_str(&format!("{},{},{}\n", p.x, p.enclosure.lo(), p.enclosure.hi()));
            }
            s
        }
        Format::Json => {
            let slack = pts.iter().map(|p| p.enclosure.width()).fold(0.0, f64::max);
            let body = json!({ "f": f.to_string(), "c": basepoint, "points": pts });
            report("tabulate", kind_name(overall), slack, body)
        }
    };
    Ok((text, kind_exit(overall)))
}

fn run_gallery(g: &GalleryArgs) -> Outcome {
    json_only(g.format, "gallery")?;
    let body = json!({ "entries": builtin_gallery() });
    Ok((report("gallery", "ok", 0.0, body), EXIT_OK))
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("DARBOUX_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| Failure::Usage(format!("DARBOUX_THREADS must be a non-negative integer, got `{raw}`")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    Ok(())
}

fn dispatch(cli: &Cli) -> Outcome {
    configure_threads()?;
    match &cli.command {
        Command::Integrate(c) => run_certify(c, "integrate", false),
        Command::Certify(c) => run_certify(c, "certify", true),
        Command::PreprimCheck(p) => run_preprim(p),
        Command::FtcCheck(p) => run_ftc(p),
        Command::Tabulate(t) => run_tabulate(t),
        Command::Gallery(g) => run_gallery(g),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&cli) {
        Ok((text, code)) => {
            let mut out = std::io::stdout().lock();
            let _ = out.write_all(text.as_bytes());
            if !text.ends_with('\n') {
                let _ = out.write_all(b"\n");
            }
            ExitCode::from(code)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Domain(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_DOMAIN)
        }
    }
}
