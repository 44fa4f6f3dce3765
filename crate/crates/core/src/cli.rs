//! Command-line front end: argument parsing, sweep config files, and the CSV
//! and JSON writers.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{
    dyadic_family, BallFamily, Domain, FamilyMode, Point, Refinement, SampledFunction,
};
use crate::morrey::{morrey_norm, weak_morrey_norm, MorreyParams};
use crate::sweep::{
    apply_operator, classify_region, NormKind, Operator, RegionMap, SuiteSelection, SweepConfig,
};
use crate::verify::{run_suite, SUITES};
use crate::weights::{
    a1_constant_estimate, ap_constant_estimate, classify_trace, estimate_trace,
    rh_constant_estimate, DoublingSchedule, Stability, Weight,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

pub const CSV_HEADER: &str =
    "p,lambda,beta,classification,max_ratio,growth_exponent,witness_id,argmax_center,argmax_radius";

#[derive(Parser, Debug)]
#[command(
    name = "morreylab",
    version,
    about = "Power-weighted Morrey space laboratory"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Strong or weak Morrey norm of a test function.
    Norm(NormArgs),
    /// Muckenhoupt or reverse Hölder constant over doubling families.
    Weights(WeightsArgs),
    /// Apply the maximal operator or the Hilbert transform and dump the output.
    Op(OpArgs),
    /// Classify a (p, lambda, beta) grid from a config file.
    Sweep(SweepArgs),
    /// Run a named invariant suite, or `all`.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
pub struct GridArgs {
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Cells per axis.
    #[arg(long, default_value_t = 256)]
    pub cells: usize,
    #[arg(long, default_value_t = 4.0)]
    pub half_width: f64,
    /// Largest ball radius; defaults to twice the half width.
    #[arg(long)]
    pub radius_max: Option<f64>,
}

#[derive(Args, Debug)]
pub struct NormArgs {
    /// Test function, e.g. `indicator:0,1`, `indicator-ball:0,1`, `power:-0.3`.
    #[arg(long = "f", allow_hyphen_values = true)]
    pub function: String,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Exponent of the weight `|x|^beta`.
    #[arg(long, conflicts_with = "weight", allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// Weight, e.g. `power:0.5`, `shifted:1,2`, `endpoint:0.5`, `power:0.5*const:2`.
    #[arg(long, allow_hyphen_values = true)]
    pub weight: Option<String>,
    #[arg(long)]
    pub weak: bool,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum WeightClass {
    Ap,
    A1,
    Rh,
}

#[derive(Args, Debug)]
pub struct WeightsArgs {
    #[arg(long, allow_hyphen_values = true)]
    pub weight: String,
    #[arg(long, value_enum)]
    pub class: WeightClass,
    /// Exponent of the A_p class.
    #[arg(long)]
    pub p: Option<f64>,
    /// Exponent of the reverse Hölder class.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub dim: usize,
    /// Cells per axis of the first family.
    #[arg(long, default_value_t = 64)]
    pub cells: usize,
    #[arg(long, default_value_t = 4.0)]
    pub half_width: f64,
    /// Number of doubled families.
    #[arg(long, default_value_t = 3)]
    pub levels: usize,
    /// Smallest radius; defaults to the first family's cell size.
    #[arg(long)]
    pub r_min: Option<f64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum OperatorArg {
    #[value(name = "M")]
    M,
    #[value(name = "H")]
    H,
}

#[derive(Args, Debug)]
pub struct OpArgs {
    #[arg(long, value_enum)]
    pub op: OperatorArg,
    #[arg(long = "f", allow_hyphen_values = true)]
    pub function: String,
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// INI-style `key = value` file.
    pub config: PathBuf,
    /// Override a config key, e.g. `--set beta=0,0.5`.
    #[arg(long = "set", value_name = "KEY=VALUE", allow_hyphen_values = true)]
    pub overrides: Vec<String>,
    /// Seed of the random witnesses.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    pub suite: String,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidParameter(_) | Error::Config(_) | Error::Unsupported(_) | Error::Io(_) => {
            EXIT_USAGE
        }
        _ => EXIT_NUMERIC,
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("MORREYLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::Config(format!(
            "MORREYLAB_THREADS must be a positive integer, got {raw:?}"
        ))
    })?;
    // A second call in the same process finds the pool already built.
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Norm(a) => cmd_norm(&a),
        Command::Weights(a) => cmd_weights(&a),
        Command::Op(a) => cmd_op(&a),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Verify(a) => cmd_verify(&a),
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
        }
    }
    Ok(())
}

/// `%.9g` formatting: 9 significant digits, `.` separator, trailing zeros
/// dropped, and exponent form outside `[1e-4, 1e9)`.
pub fn format_sig9(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let fixed = format!("{x:.*}", (8 - exp) as usize);
        trim_zeros(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn format_point(p: &Point, dim: usize) -> String {
    if dim == 1 {
        format_sig9(p[0])
    } else {
        format!("{};{}", format_sig9(p[0]), format_sig9(p[1]))
    }
}

fn numbers(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("not a number: {t:?}")))
        })
        .collect()
}

fn spec_args(spec: &str) -> (&str, &str) {
    match spec.split_once(':') {
        Some((k, rest)) => (k.trim(), rest.trim()),
        None => (spec.trim(), ""),
    }
}

fn arity(kind: &str, args: &[f64], allowed: &[usize]) -> Result<()> {
    if allowed.contains(&args.len()) {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "{kind} takes {allowed:?} arguments, got {}",
            args.len()
        )))
    }
}

/// Samples a named test function on `domain`.
///
/// * `indicator:a,b`: `a < x_1 < b`
/// * `indicator-ball:c,r` or `indicator-ball:c1,c2,r`: ball indicator
/// * `power:a` or `power:a,R`: `|x|^a` on `B(0, R)`, `R = 1` by default
/// * `bump:c,r` or `bump:c1,c2,r`: `(1 - |x-c|^2/r^2)^2` on the ball
/// * `constant:c`
pub fn parse_function(spec: &str, domain: &Arc<Domain>) -> Result<SampledFunction> {
    let (kind, rest) = spec_args(spec);
    let args = if rest.is_empty() {
        Vec::new()
    } else {
        numbers(rest)?
    };
    let center = |args: &[f64]| -> (Point, f64) {
        if args.len() == 3 {
            ([args[0], args[1]], args[2])
        } else {
            ([args[0], 0.0], args[1])
        }
    };
    match kind {
        "indicator" => {
            arity(kind, &args, &[2])?;
            let (a, b) = (args[0], args[1]);
            SampledFunction::from_fn(domain, |x| if x[0] > a && x[0] < b { 1.0 } else { 0.0 })
        }
        "indicator-ball" => {
            arity(kind, &args, &[2, 3])?;
            let (c, r) = center(&args);
            SampledFunction::from_fn(domain, |x| {
                if (x[0] - c[0]).hypot(x[1] - c[1]) < r {
                    1.0
                } else {
                    0.0
                }
            })
        }
        "power" => {
            arity(kind, &args, &[1, 2])?;
            let a = args[0];
            let r = args.get(1).copied().unwrap_or(1.0);
            SampledFunction::from_fn(domain, |x| {
                let rho = x[0].hypot(x[1]);
                if rho < r {
                    rho.powf(a)
                } else {
                    0.0
                }
            })
        }
        "bump" => {
            arity(kind, &args, &[2, 3])?;
            let (c, r) = center(&args);
            SampledFunction::from_fn(domain, |x| {
                let s = (x[0] - c[0]).hypot(x[1] - c[1]) / r;
                if s < 1.0 {
                    (1.0 - s * s).powi(2)
                } else {
                    0.0
                }
            })
        }
        "constant" => {
            arity(kind, &args, &[1])?;
            SampledFunction::constant(domain, args[0])
        }
        _ => Err(Error::Config(format!("unknown function {kind:?}"))),
    }
}

/// Parses a weight: `one`, `const:c`, `power:a`, `shifted:a,c` (or
/// `shifted:a,c1,c2`), `endpoint:lambda`, joined by `*` for products.
pub fn parse_weight(spec: &str, dim: usize) -> Result<Weight> {
    let factors: Vec<Weight> = spec
        .split('*')
        .map(|part| {
            let (kind, rest) = spec_args(part);
            let args = if rest.is_empty() {
                Vec::new()
            } else {
                numbers(rest)?
            };
            match kind {
                "one" => {
                    arity(kind, &args, &[0])?;
                    Ok(Weight::one())
                }
                "const" => {
                    arity(kind, &args, &[1])?;
                    Ok(Weight::Constant(args[0]))
                }
                "power" => {
                    arity(kind, &args, &[1])?;
                    Ok(Weight::power(args[0]))
                }
                "shifted" => {
                    arity(kind, &args, &[2, 3])?;
                    let c = [args[1], args.get(2).copied().unwrap_or(0.0)];
                    Ok(Weight::shifted_power(args[0], c))
                }
                "endpoint" => {
                    arity(kind, &args, &[1])?;
                    Weight::endpoint(args[0], dim)
                }
                _ => Err(Error::Config(format!("unknown weight {kind:?}"))),
            }
        })
        .collect::<Result<_>>()?;
    Ok(if factors.len() == 1 {
        factors.into_iter().next().expect("one factor")
    } else {
        Weight::Product(factors)
    })
}

fn domain_and_family(g: &GridArgs) -> Result<(Arc<Domain>, BallFamily)> {
    let d = Arc::new(Domain::uniform(g.dim, g.half_width, g.cells)?);
    let r_max = g.radius_max.unwrap_or(2.0 * g.half_width);
    let fam = dyadic_family(&d, d.min_cell_size(), r_max, FamilyMode::Full)?;
    Ok((d, fam))
}

#[derive(Serialize)]
struct NormOutput {
    value: f64,
    argmax_center: String,
    argmax_radius: f64,
    argmax_t: Option<f64>,
}

fn cmd_norm(a: &NormArgs) -> Result<i32> {
    let (d, fam) = domain_and_family(&a.grid)?;
    let f = parse_function(&a.function, &d)?;
    let weight = match &a.weight {
        Some(spec) => parse_weight(spec, a.grid.dim)?,
        None => Weight::power(a.beta.unwrap_or(0.0)),
    };
    let params = MorreyParams::new(a.p, a.lambda, weight, a.grid.dim)?;
    let r = if a.weak {
        weak_morrey_norm(&f, &params, &fam)?
    } else {
        morrey_norm(&f, &params, &fam)?
    };
    let out = NormOutput {
        value: r.value,
        argmax_center: format_point(&r.argmax_ball.center, a.grid.dim),
        argmax_radius: r.argmax_ball.radius,
        argmax_t: r.argmax_t,
    };
    let text = if a.json {
        to_json(&out)?
    } else {
        let mut s = String::new();
        let _ = writeln!(s, "value = {}", format_sig9(out.value));
        let _ = writeln!(s, "argmax_center = {}", out.argmax_center);
        let _ = writeln!(s, "argmax_radius = {}", format_sig9(out.argmax_radius));
        if let Some(t) = out.argmax_t {
            let _ = writeln!(s, "argmax_t = {}", format_sig9(t));
        }
        s
    };
    emit(&text, a.out.as_ref())?;
    Ok(if out.value.is_finite() {
        EXIT_OK
    } else {
        EXIT_NUMERIC
    })
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct WeightsOutput {
    constants: Vec<f64>,
    family_sizes: Vec<usize>,
    trace: &'static str,
}

fn stability_name(s: Stability) -> &'static str {
    match s {
        Stability::Stable => "stable",
        Stability::Growing => "growing",
        Stability::Inconclusive => "inconclusive",
    }
}

fn cmd_weights(a: &WeightsArgs) -> Result<i32> {
    let w = parse_weight(&a.weight, a.dim)?;
    let h = 2.0 * a.half_width / a.cells as f64;
    let r_min = a.r_min.unwrap_or(h);
    let base_k = (2.0 * a.half_width / r_min).log2().ceil().max(0.0) as usize;
    let schedule = DoublingSchedule {
        dim: a.dim,
        half_width: a.half_width,
        base_cells: a.cells,
        r_min,
        base_k,
        refinement: Refinement::Uniform,
    };
    let families = schedule.families(a.levels)?;
    let need = |v: Option<f64>, name: &str| {
        v.ok_or_else(|| Error::InvalidParameter(format!("--{name} is required for this class")))
    };
    let constants = match a.class {
        WeightClass::Ap => {
            let p = need(a.p, "p")?;
            estimate_trace(&families, |f| ap_constant_estimate(&w, p, f))?
        }
        WeightClass::A1 => estimate_trace(&families, |f| a1_constant_estimate(&w, f))?,
        WeightClass::Rh => {
            let s = need(a.sigma, "sigma")?;
            estimate_trace(&families, |f| rh_constant_estimate(&w, s, f))?
        }
    };
    let out = WeightsOutput {
        family_sizes: families.iter().map(|f| f.len()).collect(),
        trace: stability_name(classify_trace(&constants)?),
        constants,
    };
    let text = if a.json {
        to_json(&out)?
    } else {
        let mut s = String::new();
        for (i, (c, n)) in out.constants.iter().zip(&out.family_sizes).enumerate() {
            let _ = writeln!(s, "level {i}: balls = {n}, constant = {}", format_sig9(*c));
        }
        let _ = writeln!(s, "trace = {}", out.trace);
        s
    };
    emit(&text, None)?;
    Ok(EXIT_OK)
}

fn cmd_op(a: &OpArgs) -> Result<i32> {
    let (d, fam) = domain_and_family(&a.grid)?;
    let f = parse_function(&a.function, &d)?;
    let op = match a.op {
        OperatorArg::M => Operator::Maximal,
        OperatorArg::H => Operator::Hilbert,
    };
    let g = apply_operator(op, &f, &fam)?;
    let mut s = String::from(if d.dim() == 1 {
        "x,value\n"
    } else {
        "x,y,value\n"
    });
    for k in 0..d.cell_count() {
        let m = d.midpoint(k);
        let pos = if d.dim() == 1 {
            format_sig9(m[0])
        } else {
            format!("{},{}", format_sig9(m[0]), format_sig9(m[1]))
        };
        let _ = writeln!(s, "{pos},{}", format_sig9(g.value(k)));
    }
    emit(&s, a.out.as_ref())?;
    Ok(EXIT_OK)
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Applies one `key = value` assignment to `config`.
pub fn apply_config_entry(config: &mut SweepConfig, key: &str, value: &str) -> Result<()> {
    let v = value.trim();
    let lower = v.to_ascii_lowercase();
    let int = |v: &str| -> Result<usize> {
        v.parse()
            .map_err(|_| config_err(format!("{key}: not an integer: {v:?}")))
    };
    let num = |v: &str| -> Result<f64> {
        v.parse()
            .map_err(|_| config_err(format!("{key}: not a number: {v:?}")))
    };
    match key.trim() {
        "operator" => {
            config.operator = match lower.as_str() {
                "m" | "maximal" => Operator::Maximal,
                "h" | "hilbert" => Operator::Hilbert,
                _ => return Err(config_err(format!("operator must be M or H, got {v:?}"))),
            }
        }
        "p" => config.p_grid = numbers(v)?,
        "lambda" => config.lambda_grid = numbers(v)?,
        "beta" => config.beta_grid = numbers(v)?,
        "dim" => config.dim = int(v)?,
        "half_width" => config.half_width = num(v)?,
        "resolutions" => {
            config.resolutions = v.split(',').map(|t| int(t.trim())).collect::<Result<_>>()?
        }
        "refinement" => {
            config.refinement = if lower == "uniform" {
                Refinement::Uniform
            } else if lower == "origin-log" {
                Refinement::origin_log()
            } else if let Some(rest) = lower.strip_prefix("origin-log:") {
                let parts: Vec<&str> = rest.split(':').collect();
                if parts.len() != 3 {
                    return Err(config_err("refinement origin-log:RATIO:DEPTH:FLOOR"));
                }
                Refinement::OriginLog {
                    ratio: num(parts[0])?,
                    depth: int(parts[1])?,
                    floor: num(parts[2])?,
                }
            } else {
                return Err(config_err(format!("unknown refinement {v:?}")));
            }
        }
        "family" => {
            config.family_mode = match lower.as_str() {
                "full" => FamilyMode::Full,
                "reduced" => FamilyMode::Reduced,
                _ => {
                    return Err(config_err(format!(
                        "family must be full or reduced, got {v:?}"
                    )))
                }
            }
        }
        "r_min_cells" => config.r_min_cells = num(v)?,
        "r_max_factor" => config.r_max_factor = num(v)?,
        "suite" => {
            config.suite = match lower.as_str() {
                "all" => SuiteSelection::All,
                "targeted" => SuiteSelection::Targeted,
                "fillers" => SuiteSelection::Fillers,
                _ => return Err(config_err(format!("unknown suite {v:?}"))),
            }
        }
        "norm" => {
            config.norm = match lower.as_str() {
                "strong" => NormKind::Strong,
                "weak" => NormKind::Weak,
                _ => {
                    return Err(config_err(format!(
                        "norm must be strong or weak, got {v:?}"
                    )))
                }
            }
        }
        "seed" => config.seed = v.parse().map_err(|_| config_err(format!("seed: {v:?}")))?,
        "time_limit" => {
            let secs = num(v)?;
            if !(secs > 0.0 && secs.is_finite()) {
                return Err(config_err(
                    "time_limit must be a positive number of seconds",
                ));
            }
            config.time_limit = Some(Duration::from_secs_f64(secs));
        }
        other => return Err(config_err(format!("unknown key {other:?}"))),
    }
    Ok(())
}

/// Parses INI-style text: `key = value` lines, `#` or `;` comments, and
/// `[section]` headers, which are ignored. Unset keys keep their defaults.
pub fn parse_config(text: &str) -> Result<SweepConfig> {
    let mut config = SweepConfig::default();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty()
            || line.starts_with('#')
            || line.starts_with(';')
            || line.starts_with('[')
        {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| config_err(format!("line {}: expected key = value", i + 1)))?;
        apply_config_entry(&mut config, k, v)?;
    }
    Ok(config)
}

fn load_config(a: &SweepArgs) -> Result<SweepConfig> {
    let text = std::fs::read_to_string(&a.config)
        .map_err(|e| Error::Io(format!("{}: {e}", a.config.display())))?;
    let mut config = parse_config(&text)?;
    for o in &a.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| config_err(format!("override {o:?} is not KEY=VALUE")))?;
        apply_config_entry(&mut config, k, v)?;
    }
    if let Some(seed) = a.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

/// One CSV line per cell under [`CSV_HEADER`].
pub fn region_csv(map: &RegionMap) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for c in &map.cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            format_sig9(c.p),
            format_sig9(c.lambda),
            format_sig9(c.beta),
            c.classification.as_str(),
            format_sig9(c.max_ratio),
            format_sig9(c.growth_exponent),
            c.witness_id,
            format_point(&c.argmax_center, map.dim),
            format_sig9(c.argmax_radius),
        );
    }
    s
}

#[derive(Serialize)]
struct JsonCell<'a> {
    p: f64,
    lambda: f64,
    beta: f64,
    classification: &'a str,
    max_ratio: Option<f64>,
    growth_exponent: Option<f64>,
    witness_id: &'a str,
    argmax_center: String,
    argmax_radius: Option<f64>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// JSON array of cells with the CSV field names; non-finite numbers are `null`.
pub fn region_json(map: &RegionMap) -> Result<String> {
    let cells: Vec<JsonCell> = map
        .cells
        .iter()
        .map(|c| JsonCell {
            p: c.p,
            lambda: c.lambda,
            beta: c.beta,
            classification: c.classification.as_str(),
            max_ratio: finite(c.max_ratio),
            growth_exponent: finite(c.growth_exponent),
            witness_id: &c.witness_id,
            argmax_center: format_point(&c.argmax_center, map.dim),
            argmax_radius: finite(c.argmax_radius),
        })
        .collect();
    to_json(&cells)
}

fn cmd_sweep(a: &SweepArgs) -> Result<i32> {
    let config = load_config(a)?;
    log::info!("sweep config hash {}", config.hash());
    let map = classify_region(&config)?;
    let text = if a.json {
        region_json(&map)?
    } else {
        region_csv(&map)
    };
    emit(&text, a.out.as_ref())?;
    Ok(EXIT_OK)
}

fn cmd_verify(a: &VerifyArgs) -> Result<i32> {
    let names: Vec<&str> = if a.suite == "all" {
        SUITES.to_vec()
    } else {
        vec![a.suite.as_str()]
    };
    let mut failed = 0;
    let mut s = String::new();
    for name in names {
        let report = run_suite(name, a.seed)?;
        for c in &report.checks {
            let tag = if c.passed { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{tag} {name}: {} ({})", c.name, c.detail);
        }
        let _ = writeln!(
            s,
            "{name}: {} passed, {} failed",
            report.passed(),
            report.failed()
        );
        failed += report.failed();
    }
    emit(&s, None)?;
    Ok(if failed == 0 { EXIT_OK } else { EXIT_NUMERIC })
}
