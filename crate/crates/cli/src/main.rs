//! `torus-dirac`: JSON front end for the torus-dirac library.
//!
//! Every command reads at most one JSON document (inline argument, `--input
//! <path>`, or `--input -` for stdin) and writes one newline-terminated JSON
//! document to stdout. Failures also write a JSON object
//! `{"error": {"kind", "message"}}` to stdout and exit with
//! 2 (invalid input), 3 (precondition violated) or 4 (numerical failure).

use std::collections::BTreeMap;
use std::io::Read;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::{json, Value};
use torus_dirac::cocycle::{
    cocycle_class, equations_to_parametrization, euler_torsion_order, format_rational,
    intersection_index, intersection_index_oracle, parse_rational, CocycleError, GeometricCocycle,
};
use torus_dirac::ktheory::{
    class_of_subtorus, fm_inverse_with, fm_transform_with, pairing, perp_subtorus, wedge, KClass,
    KTheoryError, SignConvention, Subtorus,
};
use torus_dirac::lattice::{kernel_lattice, smith_normal_form, IntMatrix};
use torus_dirac::spectral::{
    build_dolbeault_torus, build_schrodinger_product, commutator_norm, heisenberg_model,
    number_operator, numerical_index, representation_generators, weyl_exponent, SpectralError,
    SpectralReport, TruncatedOperator,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Command {
    Smith,
    Kernel,
    Fm,
    FmInv,
    Wedge,
    SubtorusClass,
    SubtorusPerp,
    Pair,
    CocycleFromEquations,
    Index,
    IndexOracle,
    CocycleClass,
    TorsionOrder,
    Dolbeault,
    HeisenbergIndex,
    Schrodinger,
    Commutators,
    Weyl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
enum Convention {
    #[default]
    Degree,
    Shuffle,
}

impl From<Convention> for SignConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::Degree => SignConvention::Degree,
            Convention::Shuffle => SignConvention::Shuffle,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "torus-dirac", version, about = "Index computations on tori and noncommutative tori")]
struct Cli {
    command: Command,
    /// Inline JSON input.
    #[arg(allow_hyphen_values = true)]
    json: Option<String>,
    /// Read JSON input from a file, or from stdin with `-`.
    #[arg(long)]
    input: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<f64>,
    #[arg(long)]
    cutoff: Option<usize>,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    /// Fit window `lo,hi` for Weyl exponents; defaults to `N/4,N`.
    #[arg(long, value_parser = parse_window)]
    window: Option<(f64, f64)>,
    /// Seed for randomly drawn base points.
    #[arg(long)]
    seed: Option<u64>,
    /// Sign convention of the Fourier–Mukai transform.
    #[arg(long, value_enum, default_value_t)]
    sign_convention: Convention,
    /// Number of smallest singular values to report.
    #[arg(long, default_value_t = 10)]
    head: usize,
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo: f64 = lo.trim().parse().map_err(|e| format!("lo: {e}"))?;
    let hi: f64 = hi.trim().parse().map_err(|e| format!("hi: {e}"))?;
    Ok((lo, hi))
}

#[derive(Debug)]
enum Failure {
    Validation(String),
    Precondition(String),
    Numerical(String),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 2,
            Failure::Precondition(_) => 3,
            Failure::Numerical(_) => 4,
        }
    }

    fn to_json(&self) -> Value {
        let (kind, message) = match self {
            Failure::Validation(m) => ("validation", m),
            Failure::Precondition(m) => ("precondition", m),
            Failure::Numerical(m) => ("numerical", m),
        };
        json!({ "error": { "kind": kind, "message": message } })
    }
}

impl From<KTheoryError> for Failure {
    fn from(e: KTheoryError) -> Self {
        match e {
            KTheoryError::DimensionMismatch(..) => Failure::Precondition(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<CocycleError> for Failure {
    fn from(e: CocycleError) -> Self {
        match e {
            CocycleError::SingularFibreBlock
            | CocycleError::RankDeficient { .. }
            | CocycleError::SingularBaseBlock => Failure::Precondition(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<SpectralError> for Failure {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::InvalidCutoff
            | SpectralError::InvalidTolerance(_)
            | SpectralError::InvalidOperator(_) => Failure::Validation(e.to_string()),
            SpectralError::NumericalFailure(_) => Failure::Numerical(e.to_string()),
            _ => Failure::Precondition(e.to_string()),
        }
    }
}

type Outcome = Result<Value, Failure>;

fn read_input(cli: &Cli) -> Result<Option<Value>, Failure> {
    let text = match (&cli.json, &cli.input) {
        (Some(_), Some(_)) => {
            return Err(Failure::Validation("give either inline JSON or --input, not both".into()))
        }
        (Some(inline), None) => inline.clone(),
        (None, Some(path)) if path == "-" => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .map_err(|e| Failure::Validation(format!("reading stdin: {e}")))?;
            buf
        }
        (None, Some(path)) => std::fs::read_to_string(path)
            .map_err(|e| Failure::Validation(format!("reading {path}: {e}")))?,
        (None, None) => return Ok(None),
    };
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| Failure::Validation(format!("malformed JSON: {e}")))
}

fn require(input: Option<Value>) -> Result<Value, Failure> {
    input.ok_or_else(|| Failure::Validation("this command needs a JSON input".into()))
}

fn parse<T: for<'de> Deserialize<'de>>(value: Value, what: &str) -> Result<T, Failure> {
    serde_json::from_value(value).map_err(|e| Failure::Validation(format!("invalid {what}: {e}")))
}

fn field(value: &Value, key: &str) -> Result<Value, Failure> {
    value
        .get(key)
        .cloned()
        .ok_or_else(|| Failure::Validation(format!("missing field {key:?}")))
}

fn int_json(x: &BigInt) -> Value {
    match i64::try_from(x) {
        Ok(v) => json!(v),
        Err(_) => json!(x.to_string()),
    }
}

fn to_json<T: serde::Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("library types serialize")
}

/// Rounds to 12 significant digits.
fn sig12(x: f64) -> f64 {
    if x.is_finite() {
        format!("{x:.11e}").parse().expect("formatted float parses")
    } else {
        x
    }
}

fn report_json(mut report: SpectralReport) -> Value {
    report.params.values_mut().for_each(|v| *v = sig12(*v));
    report.singular_values_head.iter_mut().for_each(|v| *v = sig12(*v));
    report.weyl_slope = report.weyl_slope.map(sig12);
    report.commutator_norms.values_mut().for_each(|v| *v = sig12(*v));
    to_json(&report)
}

/// A class given either as `{"d", "terms"}` or, with `--d`, a bare terms
/// array. Returns the class and whether the bare form was used.
fn class_input(cli: &Cli, value: Value) -> Result<(KClass, bool), Failure> {
    match value {
        Value::Array(_) => {
            let d = cli
                .d
                .ok_or_else(|| Failure::Validation("a bare terms array needs --d".into()))?;
            Ok((parse(json!({ "d": d, "terms": value }), "class")?, true))
        }
        other => {
            let class: KClass = parse(other, "class")?;
            if cli.d.is_some_and(|d| d != class.dim()) {
                return Err(Failure::Validation(format!(
                    "--d {} disagrees with class dimension {}",
                    cli.d.unwrap_or_default(),
                    class.dim()
                )));
            }
            Ok((class, false))
        }
    }
}

fn class_output(class: &KClass, bare: bool) -> Value {
    let v = to_json(class);
    if bare {
        v["terms"].clone()
    } else {
        v
    }
}

fn two_classes(value: Value) -> Result<(KClass, KClass), Failure> {
    let (a, b) = match value {
        Value::Array(mut items) if items.len() == 2 => {
            let b = items.pop().expect("two items");
            (items.pop().expect("two items"), b)
        }
        other => (field(&other, "a")?, field(&other, "b")?),
    };
    Ok((parse(a, "class a")?, parse(b, "class b")?))
}

#[derive(Deserialize)]
struct Equations {
    #[serde(rename = "A")]
    a: IntMatrix,
    #[serde(rename = "U")]
    u: IntMatrix,
}

/// Accepts a cocycle object, an equations object `{"A", "U"}`, or a loop
/// `{"loop": [q, p]}`.
fn cocycle_input(cli: &Cli, value: Value) -> Result<GeometricCocycle, Failure> {
    let cocycle = if value.get("A").is_some() {
        let eq: Equations = parse(value, "equations")?;
        equations_to_parametrization(&eq.a, &eq.u)?
    } else if let Some(l) = value.get("loop") {
        let (q, p): (i64, i64) = parse(l.clone(), "loop")?;
        GeometricCocycle::loop_cocycle(q, p)?
    } else {
        parse(value, "cocycle")?
    };
    if cli.d.is_some_and(|d| d != cocycle.base_dim()) || cli.n.is_some_and(|n| n != cocycle.fibre_dim()) {
        return Err(Failure::Validation(format!(
            "--d/--n disagree with cocycle dimensions ({}, {})",
            cocycle.base_dim(),
            cocycle.fibre_dim()
        )));
    }
    Ok(cocycle)
}

fn cutoff(cli: &Cli) -> Result<usize, Failure> {
    cli.cutoff
        .ok_or_else(|| Failure::Validation("this command needs --cutoff".into()))
}

fn default_window(n: usize) -> (f64, f64) {
    (n as f64 / 4.0, n as f64)
}

/// Weyl slope over `--window`, or over the default window where a failed
/// fit is reported as null.
fn weyl_slope(cli: &Cli, op: &TruncatedOperator) -> Result<Option<f64>, Failure> {
    match cli.window {
        Some(w) => Ok(Some(weyl_exponent(op, w)?)),
        None => match weyl_exponent(op, default_window(op.cutoff())) {
            Ok(s) => Ok(Some(s)),
            Err(SpectralError::NumericalFailure(m)) => Err(Failure::Numerical(m)),
            Err(_) => Ok(None),
        },
    }
}

fn graded_report(cli: &Cli, op: &TruncatedOperator) -> Result<SpectralReport, Failure> {
    let mut report = SpectralReport::for_operator(op, cli.head)?;
    report.index = match numerical_index(op, cli.tol) {
        Ok(i) => Some(i),
        Err(SpectralError::NotGraded) => None,
        Err(e) => return Err(e.into()),
    };
    report.weyl_slope = weyl_slope(cli, op)?;
    Ok(report)
}

fn commutator_norms(theta: f64, op: &TruncatedOperator) -> Result<BTreeMap<String, f64>, Failure> {
    let (u, v) = representation_generators(theta, op.cutoff())?;
    Ok(BTreeMap::from([
        ("U".to_string(), commutator_norm(op, &u)?),
        ("V".to_string(), commutator_norm(op, &v)?),
    ]))
}

fn run(cli: &Cli) -> Outcome {
    if !(cli.tol > 0.0 && cli.tol.is_finite()) {
        return Err(Failure::Validation(format!("--tol must be positive, got {}", cli.tol)));
    }
    let input = read_input(cli)?;
    match cli.command {
        Command::Smith => {
            let m: IntMatrix = parse(require(input)?, "matrix")?;
            Ok(to_json(&smith_normal_form(&m)))
        }
        Command::Kernel => {
            let m: IntMatrix = parse(require(input)?, "matrix")?;
            Ok(to_json(&kernel_lattice(&m)))
        }
        Command::Fm | Command::FmInv => {
            let (class, bare) = class_input(cli, require(input)?)?;
            let convention = cli.sign_convention.into();
            let out = if cli.command == Command::Fm {
                fm_transform_with(&class, convention)
            } else {
                fm_inverse_with(&class, convention)
            };
            Ok(class_output(&out, bare))
        }
        Command::Wedge => {
            let (a, b) = two_classes(require(input)?)?;
            Ok(to_json(&wedge(&a, &b)?))
        }
        Command::Pair => {
            let (a, b) = two_classes(require(input)?)?;
            Ok(int_json(&pairing(&a, &b)?))
        }
        Command::SubtorusClass => {
            let t: Subtorus = parse(require(input)?, "subtorus")?;
            Ok(to_json(&class_of_subtorus(&t)))
        }
        Command::SubtorusPerp => {
            let t: Subtorus = parse(require(input)?, "subtorus")?;
            Ok(to_json(&perp_subtorus(&t)))
        }
        Command::CocycleFromEquations => {
            let eq: Equations = parse(require(input)?, "equations")?;
            Ok(to_json(&equations_to_parametrization(&eq.a, &eq.u)?))
        }
        Command::Index => {
            let c = cocycle_input(cli, require(input)?)?;
            Ok(int_json(&intersection_index(&c)))
        }
        Command::CocycleClass => {
            let c = cocycle_input(cli, require(input)?)?;
            Ok(to_json(&cocycle_class(&c)))
        }
        Command::IndexOracle => index_oracle(cli, require(input)?),
        Command::TorsionOrder => {
            let value = require(input)?;
            let chi: i64 = match &value {
                Value::Number(_) => parse(value, "Euler characteristic")?,
                _ => match (value.get("chi"), value.get("genus")) {
                    (Some(chi), None) => parse(chi.clone(), "chi")?,
                    (None, Some(g)) => {
                        let g: i64 = parse(g.clone(), "genus")?;
                        2i64.checked_sub(g.checked_mul(2).ok_or_else(|| Failure::Validation("genus too large".into()))?)
                            .ok_or_else(|| Failure::Validation("genus too large".into()))?
                    }
                    _ => return Err(Failure::Validation("expected {\"chi\"} or {\"genus\"}".into())),
                },
            };
            Ok(to_json(&euler_torsion_order(chi)))
        }
        Command::Dolbeault => {
            let op = build_dolbeault_torus(cutoff(cli)?)?;
            let mut report = graded_report(cli, &op)?;
            if let Some(theta) = cli.theta {
                report.params.insert("theta".into(), theta);
                report.commutator_norms = commutator_norms(theta, &op)?;
            }
            Ok(report_json(report))
        }
        Command::HeisenbergIndex => {
            #[derive(Deserialize)]
            struct Module {
                p: i64,
                q: i64,
            }
            let m: Module = parse(require(input)?, "module {\"p\", \"q\"}")?;
            let theta = cli
                .theta
                .ok_or_else(|| Failure::Validation("this command needs --theta".into()))?;
            let op = heisenberg_model(m.p, m.q, cutoff(cli)?, theta)?;
            let mut report = SpectralReport::for_operator(&op, cli.head)?;
            report.index = Some(numerical_index(&op, cli.tol)?);
            Ok(report_json(report))
        }
        Command::Schrodinger => {
            let (n, d) = match (cli.n, cli.d) {
                (Some(n), Some(d)) => (n, d),
                _ => return Err(Failure::Validation("this command needs --n and --d".into())),
            };
            let op = build_schrodinger_product(n, d, cutoff(cli)?)?;
            Ok(report_json(graded_report(cli, &op)?))
        }
        Command::Commutators => {
            let theta = cli
                .theta
                .ok_or_else(|| Failure::Validation("this command needs --theta".into()))?;
            let op = build_dolbeault_torus(cutoff(cli)?)?;
            let mut report = SpectralReport::for_operator(&op, 0)?;
            report.params.insert("theta".into(), theta);
            report.commutator_norms = commutator_norms(theta, &op)?;
            Ok(report_json(report))
        }
        Command::Weyl => weyl(cli, input),
    }
}

fn index_oracle(cli: &Cli, value: Value) -> Outcome {
    let (cocycle_value, point) = match value.get("cocycle") {
        Some(c) => (c.clone(), value.get("base_point").cloned()),
        None => (value, None),
    };
    let c = cocycle_input(cli, cocycle_value)?;
    let point: Vec<BigRational> = match point {
        Some(p) => {
            let strings: Vec<String> = parse(p, "base_point")?;
            strings
                .iter()
                .map(|s| parse_rational(s))
                .collect::<Result<_, _>>()?
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(cli.seed.unwrap_or(0));
            (0..c.base_dim())
                .map(|_| {
                    let den: i64 = rng.gen_range(1..=64);
                    BigRational::new(rng.gen_range(0..den).into(), den.into())
                })
                .collect()
        }
    };
    let count = intersection_index_oracle(&c, &point)?;
    Ok(json!({
        "count": count,
        "base_point": point.iter().map(format_rational).collect::<Vec<_>>(),
    }))
}

fn weyl(cli: &Cli, input: Option<Value>) -> Outcome {
    let name = match &input {
        None => "dolbeault".to_string(),
        Some(v) => parse::<String>(field(v, "operator")?, "operator name")?,
    };
    let n = cutoff(cli)?;
    let op = match name.as_str() {
        "dolbeault" => build_dolbeault_torus(n)?,
        "number" => number_operator(n)?,
        "schrodinger" => match (cli.n, cli.d) {
            (Some(fibre), Some(d)) => build_schrodinger_product(fibre, d, n)?,
            _ => return Err(Failure::Validation("schrodinger needs --n and --d".into())),
        },
        other => return Err(Failure::Validation(format!("unknown operator {other:?}"))),
    };
    let mut report = SpectralReport::for_operator(&op, cli.head)?;
    report.weyl_slope = Some(weyl_exponent(&op, cli.window.unwrap_or(default_window(n)))?);
    Ok(report_json(report))
}

fn emit(value: &Value) {
    println!("{}", serde_json::to_string(value).expect("JSON values serialize"));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let failure = Failure::Validation(e.to_string().trim().to_string());
            emit(&failure.to_json());
            return ExitCode::from(failure.exit_code());
        }
    };
    match run(&cli) {
        Ok(value) => {
            emit(&value);
            ExitCode::SUCCESS
        }
        Err(failure) => {
            emit(&failure.to_json());
            ExitCode::from(failure.exit_code())
        }
    }
}
