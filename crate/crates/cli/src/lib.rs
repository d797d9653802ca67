//! Argument parsing and subcommand execution for the `kfree` binary.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kfree_core::arith::{format_rational, rational, ExactRational};
use kfree_core::characters::{
    admissible_conductors, build_real_primitive, char_autocorrelation, char_autocorrelation_closed,
    kappa_positive_sum, ChiStarExtension, DiscriminantSign,
};
use kfree_core::correlation::{CorrelationModel, ModelConstants};
use kfree_core::multfun::{pretentious_distance_sq_exact, FTable, FunctionSpec, KFree};
use kfree_core::window::{lambda_closed, lambda_from_correlations, witness_experiment};
use kfree_core::{delta, nearest_int_dist, Error};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// `--help` or `--version` output.
    #[error("{0}")]
    Info(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Capacity(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Info(_) => EXIT_OK,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Capacity(_) | CliError::Io(_) => EXIT_CAPACITY,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(m) => CliError::Config(m),
            Error::Capacity(m) => CliError::Capacity(m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Parser, Debug)]
#[command(
    name = "kfree",
    version,
    about = "Discrepancy experiments for k-free twisted characters"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[arg(long, global = true, value_enum, default_value = "csv")]
    format: Format,
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args, Debug, Clone)]
struct ModelArgs {
    #[arg(long)]
    q: u64,
    /// `+`/`positive` or `-`/`negative`; defaults to `+q` when that is a fundamental discriminant.
    #[arg(long, allow_hyphen_values = true)]
    sign: Option<String>,
    #[arg(long, default_value_t = 2)]
    kfree: u32,
    /// Comma-separated primes where `g(p) = -χ(p)`.
    #[arg(long, default_value = "")]
    flips: String,
    /// `p:±1` pairs for `χ*` at each `p | q`, comma-separated; unspecified primes get `+1`.
    #[arg(long, default_value = "")]
    chistar: String,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the exact identity suites.
    Verify {
        #[arg(long = "q-max", default_value_t = 100)]
        q_max: u64,
    },
    /// Character autocorrelation table.
    Char {
        #[command(flatten)]
        model: ModelArgs,
        /// Shift range; defaults to `0..3q`.
        #[arg(long)]
        d: Option<String>,
    },
    /// Closed-form correlations `S_d`, optionally against empirical means.
    Corr {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "1..24")]
        d: String,
        #[arg(long)]
        x: Option<String>,
        #[arg(long = "prime-bound", default_value_t = 1_000_000)]
        prime_bound: u64,
    },
    /// Window variance `Λ(H)` along all routes.
    Lambda {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "H")]
        h: String,
        #[arg(long)]
        x: Option<String>,
        #[arg(long = "prime-bound", default_value_t = 1_000_000)]
        prime_bound: u64,
        #[arg(long = "d-cutoff")]
        d_cutoff: Option<u64>,
    },
    /// lcm witness lower bounds.
    Witness {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "M", default_value = "8,16,32,64")]
        m: String,
    },
    /// Homogeneous-progression partial-sum records.
    Scan {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long = "x-max", default_value = "1e6")]
        x_max: String,
        #[arg(long = "d-max", default_value_t = 20)]
        d_max: u64,
    },
}

/// A model description that serializes into every JSON report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub q: u64,
    pub discriminant: i64,
    pub kfree: KFree,
    pub flips: BTreeSet<u64>,
    pub chistar: BTreeMap<u64, i8>,
}

#[derive(Debug, Clone)]
pub struct ModelConfig {
    pub info: ModelInfo,
    pub spec: FunctionSpec,
}

#[derive(Debug, Clone)]
pub enum Task {
    Verify {
        q_max: u64,
    },
    Char {
        model: ModelConfig,
        shifts: Vec<u64>,
    },
    Corr {
        model: ModelConfig,
        d: Vec<u64>,
        x: Option<u64>,
        prime_bound: u64,
    },
    Lambda {
        model: ModelConfig,
        h: Vec<u64>,
        x: Option<u64>,
        prime_bound: u64,
        d_cutoff: Option<u64>,
    },
    Witness {
        model: ModelConfig,
        m: Vec<u32>,
    },
    Scan {
        model: ModelConfig,
        x_max: u64,
        d_max: u64,
    },
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub task: Task,
    pub format: Format,
    pub output: Option<PathBuf>,
    pub threads: Option<usize>,
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Integer that may be written in scientific notation, such as `1e7`.
pub fn parse_count(flag: &str, s: &str) -> Result<u64, CliError> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 1.8e19 => Ok(v as u64),
        _ => Err(bad(format!(
            "--{flag}: expected a nonnegative integer, got {s:?}"
        ))),
    }
}

/// `a`, `a,b,c`, `a..b` (inclusive) or `a..bxr` (geometric with ratio `r`).
pub fn parse_range(flag: &str, s: &str) -> Result<Vec<u64>, CliError> {
    let s = s.trim();
    let out: Vec<u64> = if let Some((a, rest)) = s.split_once("..") {
        let a = parse_count(flag, a)?;
        if let Some((b, r)) = rest.split_once('x') {
            let b = parse_count(flag, b)?;
            let r = parse_count(flag, r)?;
            if r < 2 || a == 0 {
                return Err(bad(format!(
                    "--{flag}: geometric range needs start ≥ 1 and ratio ≥ 2"
                )));
            }
            std::iter::successors(Some(a), |&v| v.checked_mul(r))
                .take_while(|&v| v <= b)
                .collect()
        } else {
            let b = parse_count(flag, rest)?;
            (a..=b).collect()
        }
    } else {
        s.split(',')
            .map(|t| parse_count(flag, t.trim()))
            .collect::<Result<_, _>>()?
    };
    if out.is_empty() {
        return Err(bad(format!("--{flag}: range {s:?} is empty")));
    }
    Ok(out)
}

fn parse_model(a: &ModelArgs) -> Result<ModelConfig, CliError> {
    let sign = match a.sign.as_deref() {
        None => None,
        Some("+" | "positive" | "pos") => Some(DiscriminantSign::Positive),
        Some("-" | "negative" | "neg") => Some(DiscriminantSign::Negative),
        Some(other) => return Err(bad(format!("--sign: expected + or -, got {other:?}"))),
    };
    let kfree = KFree::from_k(a.kfree)
        .map_err(|_| bad(format!("--kfree: expected 2 or 3, got {}", a.kfree)))?;
    let chi = build_real_primitive(a.q, sign)?;
    let flips: BTreeSet<u64> = a
        .flips
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| parse_count("flips", t.trim()))
        .collect::<Result<_, _>>()?;
    let mut signs: BTreeMap<u64, i8> = chi.prime_powers().iter().map(|&(p, _)| (p, 1)).collect();
    for pair in a.chistar.split(',').filter(|t| !t.trim().is_empty()) {
        let (p, s) = pair
            .split_once(':')
            .ok_or_else(|| bad(format!("--chistar: expected p:±1, got {pair:?}")))?;
        let p = parse_count("chistar", p.trim())?;
        let s: i8 = s
            .trim()
            .parse()
            .map_err(|_| bad(format!("--chistar: bad sign in {pair:?}")))?;
        if !signs.contains_key(&p) {
            return Err(bad(format!("--chistar: {p} does not divide q = {}", a.q)));
        }
        signs.insert(p, s);
    }
    let ext = ChiStarExtension::new(chi.clone(), signs.clone())
        .map_err(|e| bad(format!("--chistar: {e}")))?;
    let spec =
        FunctionSpec::new(kfree, ext, flips.clone()).map_err(|e| bad(format!("--flips: {e}")))?;
    Ok(ModelConfig {
        info: ModelInfo {
            q: a.q,
            discriminant: chi.discriminant(),
            kfree,
            flips,
            chistar: signs,
        },
        spec,
    })
}

/// Parses and validates a full argument vector (including the program name).
pub fn parse_config<I, T>(argv: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            CliError::Info(e.to_string())
        }
        _ => bad(e
            .to_string()
            .trim_start_matches("error: ")
            .trim_end()
            .to_string()),
    })?;
    let task = match &cli.command {
        Command::Verify { q_max } => {
            if *q_max < 3 {
                return Err(bad("--q-max must be at least 3"));
            }
            Task::Verify { q_max: *q_max }
        }
        Command::Char { model, d } => {
            let model = parse_model(model)?;
            let shifts = match d {
                Some(d) => parse_range("d", d)?,
                None => (0..=3 * model.info.q).collect(),
            };
            Task::Char { model, shifts }
        }
        Command::Corr {
            model,
            d,
            x,
            prime_bound,
        } => {
            let d = parse_range("d", d)?;
            if d.contains(&0) {
                return Err(bad("--d: shifts must be at least 1"));
            }
            Task::Corr {
                model: parse_model(model)?,
                d,
                x: x.as_deref().map(|x| parse_count("x", x)).transpose()?,
                prime_bound: *prime_bound,
            }
        }
        Command::Lambda {
            model,
            h,
            x,
            prime_bound,
            d_cutoff,
        } => {
            let h = parse_range("H", h)?;
            if h.contains(&0) {
                return Err(bad("--H: values must be at least 1"));
            }
            Task::Lambda {
                model: parse_model(model)?,
                h,
                x: x.as_deref().map(|x| parse_count("x", x)).transpose()?,
                prime_bound: *prime_bound,
                d_cutoff: *d_cutoff,
            }
        }
        Command::Witness { model, m } => {
            let m = parse_range("M", m)?
                .into_iter()
                .map(|v| u32::try_from(v).map_err(|_| bad(format!("--M: {v} too large"))))
                .collect::<Result<_, _>>()?;
            Task::Witness {
                model: parse_model(model)?,
                m,
            }
        }
        Command::Scan {
            model,
            x_max,
            d_max,
        } => Task::Scan {
            model: parse_model(model)?,
            x_max: parse_count("x-max", x_max)?,
            d_max: *d_max,
        },
    };
    if cli.threads == Some(0) {
        return Err(bad("--threads must be at least 1"));
    }
    Ok(RunConfig {
        task,
        format: cli.format,
        output: cli.output,
        threads: cli.threads,
    })
}

/// Rounds to 12 significant digits.
pub fn sig12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub suite: String,
    pub cases: u64,
    pub failures: u64,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharRow {
    pub h: u64,
    pub direct: i64,
    pub closed: String,
    pub equal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrRow {
    pub d: u64,
    pub closed_exact_over_c: String,
    pub closed_value: f64,
    pub closed_err: f64,
    pub empirical: Option<f64>,
    pub abs_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub h: u64,
    pub from_sd: f64,
    pub from_sd_err: f64,
    pub closed: f64,
    pub closed_err: f64,
    pub routes_agree: bool,
    pub empirical: Option<f64>,
    pub x: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessCsvRow {
    pub m: u32,
    pub multiple: u64,
    pub h0: String,
    pub lower_bound: String,
    pub lower_bound_value: f64,
    pub norms_exact: bool,
    pub ratio_to_quarter_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub record: u64,
    pub x: u64,
    pub d: u64,
    pub sum: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<R> {
    pub model: Option<ModelInfo>,
    pub results: Vec<R>,
}

fn render<R: Serialize>(
    format: Format,
    model: Option<&ModelInfo>,
    rows: &[R],
) -> Result<String, CliError> {
    match format {
        Format::Json => {
            let report = Report {
                model: model.cloned(),
                results: rows.iter().collect(),
            };
            let mut s = serde_json::to_string_pretty(&report)
                .map_err(|e| CliError::Config(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in rows {
                w.serialize(r)
                    .map_err(|e| CliError::Config(e.to_string()))?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| CliError::Config(e.to_string()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
    }
}

fn suite(name: &str, cases: u64, failures: u64) -> VerifyRow {
    VerifyRow {
        suite: name.into(),
        cases,
        failures,
        status: if failures == 0 { "PASS" } else { "FAIL" }.into(),
    }
}

fn default_spec(q: u64, k: KFree, flips: &[u64]) -> Result<FunctionSpec, CliError> {
    let chi = build_real_primitive(q, None)?;
    Ok(FunctionSpec::new(
        k,
        ChiStarExtension::uniform(chi, 1)?,
        flips.iter().copied().collect(),
    )?)
}

fn n_of_q(q: u64, limit: u64) -> Result<Vec<u64>, CliError> {
    let chi = build_real_primitive(q, None)?;
    let mut out = vec![1u64];
    for &(p, _) in chi.prime_powers() {
        let len = out.len();
        for i in 0..len {
            let mut m = out[i] * p;
            while m <= limit {
                out.push(m);
                m *= p;
            }
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// Sums `(cases, failures)` over items in parallel.
fn tally(
    items: &[u64],
    f: impl Fn(u64) -> Result<(u64, u64), CliError> + Sync,
) -> Result<(u64, u64), CliError> {
    let parts: Vec<(u64, u64)> = items.par_iter().map(|&q| f(q)).collect::<Result<_, _>>()?;
    Ok(parts
        .into_iter()
        .fold((0, 0), |a, b| (a.0 + b.0, a.1 + b.1)))
}

fn run_verify(q_max: u64) -> Result<Vec<VerifyRow>, CliError> {
    let qs = admissible_conductors(q_max);
    let mut rows = Vec::new();

    let (mut n, mut f) = (0, 0);
    for &q in &qs {
        let chi = build_real_primitive(q, None)?;
        for h in 0..=3 * q {
            n += 1;
            if ExactRational::from_integer(char_autocorrelation(&chi, h).into())
                != char_autocorrelation_closed(&chi, h)
            {
                f += 1;
            }
        }
    }
    rows.push(suite("character_identity", n, f));

    let (mut n, mut f) = (0, 0);
    for &q in &qs {
        for k in [KFree::Squarefree, KFree::Cubefree] {
            let m = CorrelationModel::new(default_spec(q, k, &[])?);
            for d in n_of_q(q, 10_000)? {
                let (l, r) = m.ramified_identity_sides(d)?;
                n += 1;
                f += u64::from(l != r);
            }
        }
    }
    rows.push(suite("ramified_identity", n, f));

    let small: Vec<u64> = qs.iter().copied().filter(|&q| q <= 100).collect();
    let (n, f) = tally(&small, |q| {
        let (mut n, mut f) = (0, 0);
        for k in [KFree::Squarefree, KFree::Cubefree] {
            let m = CorrelationModel::new(default_spec(q, k, &[])?);
            for d in 1..=100 {
                let (a, b) = m.s_d_routes(d)?;
                n += 1;
                f += u64::from(a != b);
            }
        }
        Ok((n, f))
    })?;
    rows.push(suite("sd_routes", n, f));

    let (n, f) = tally(&[0, 1, 2, 3, 4, 5], |i| {
        let k = if i < 3 {
            KFree::Squarefree
        } else {
            KFree::Cubefree
        };
        let flips: &[u64] = [&[][..], &[2][..], &[3][..]][i as usize % 3];
        let m = CorrelationModel::new(default_spec(5, k, flips)?);
        let (mut n, mut f) = (0, 0);
        for d in 1..=2000u64 {
            let conv = kfree_core::factorize(d, None)?
                .divisors()
                .into_iter()
                .map(|e| m.u_value(e))
                .sum::<Result<ExactRational, _>>()?;
            n += 1;
            f += u64::from(conv != m.g_value(d)?);
        }
        Ok((n, f))
    })?;
    rows.push(suite("u_convolution", n, f));

    let (mut n, mut f) = (0, 0);
    let two = rational(2, 1);
    for b in 1..=60i64 {
        for a in -240..=240i64 {
            let t = rational(a, b);
            n += 1;
            f += u64::from(
                delta(&t) * rational(4, 1) - delta(&(&t * &two)) != nearest_int_dist(&t) * &two,
            );
        }
    }
    rows.push(suite("kernel_identity", n, f));

    let (n, f) = tally(&qs, |q| {
        let chi = build_real_primitive(q, None)?;
        let (mut n, mut f) = (0, 0);
        for b in 1..=8i64 {
            for a in 0..(b * q as i64) {
                n += 1;
                f += u64::from(
                    kappa_positive_sum(&chi, &rational(a, b))
                        < ExactRational::from_integer(0.into()),
                );
            }
        }
        Ok((n, f))
    })?;
    rows.push(suite("kappa_positivity", n, f));

    let mut f = 0;
    let check = |m: &CorrelationModel, p: u64, e: u32, want: i64| -> Result<bool, CliError> {
        Ok(
            m.u_prime_power(p, e)? * ExactRational::from_integer(p.pow(e).into())
                != rational(want, 1),
        )
    };
    let m = CorrelationModel::new(default_spec(5, KFree::Squarefree, &[2])?);
    f += u64::from(check(&m, 2, 1, -4)?) + u64::from(check(&m, 2, 2, -2)?);
    let m = CorrelationModel::new(default_spec(5, KFree::Squarefree, &[3])?);
    f += u64::from(check(&m, 3, 1, -24)?) + u64::from(check(&m, 3, 2, -9)?);
    let m = CorrelationModel::new(default_spec(5, KFree::Cubefree, &[2])?);
    f += u64::from(check(&m, 2, 1, -4)?)
        + u64::from(check(&m, 2, 2, -8)?)
        + u64::from(check(&m, 2, 3, -4)?);
    f += u64::from(m.h_value(2)? != rational(-1, 4));
    let m = CorrelationModel::new(default_spec(3, KFree::Squarefree, &[5])?);
    f += u64::from(m.h_value(5)? != rational(7, 25));
    rows.push(suite("test_vectors", 9, f));

    let (mut n, mut f) = (0, 0);
    for &q in &qs {
        let s = default_spec(q, KFree::Squarefree, &[])?;
        let chi = s.chi().clone();
        let want = chi
            .prime_powers()
            .iter()
            .fold(ExactRational::from_integer(0.into()), |a, &(p, _)| {
                a + rational(1, p as i64)
            });
        n += 1;
        f += u64::from(pretentious_distance_sq_exact(&s, &chi, 100_000, 64)? != want);
    }
    rows.push(suite("pretentious_distance", n, f));
    Ok(rows)
}

fn execute(cfg: &RunConfig) -> Result<(String, bool), CliError> {
    let fmt = cfg.format;
    match &cfg.task {
        Task::Verify { q_max } => {
            let rows = run_verify(*q_max)?;
            let ok = rows.iter().all(|r| r.failures == 0);
            Ok((render(fmt, None, &rows)?, ok))
        }
        Task::Char { model, shifts } => {
            let chi = model.spec.chi();
            let rows: Vec<CharRow> = shifts
                .iter()
                .map(|&h| {
                    let direct = char_autocorrelation(chi, h);
                    let closed = char_autocorrelation_closed(chi, h);
                    CharRow {
                        h,
                        direct,
                        equal: closed == ExactRational::from_integer(direct.into()),
                        closed: format_rational(&closed),
                    }
                })
                .collect();
            let ok = rows.iter().all(|r| r.equal);
            Ok((render(fmt, Some(&model.info), &rows)?, ok))
        }
        Task::Corr {
            model,
            d,
            x,
            prime_bound,
        } => {
            let cm = CorrelationModel::new(model.spec.clone());
            let mc = ModelConstants::new(&cm, *prime_bound)?;
            let table = match x {
                Some(x) => Some(FTable::build(
                    &model.spec,
                    x + d.iter().max().copied().unwrap_or(0),
                )?),
                None => None,
            };
            let mut rows = Vec::new();
            for &dd in d {
                let exact = cm.s_d_local(dd)?;
                let v = mc.s_d_closed(dd)?;
                let emp = match (&table, x) {
                    (Some(t), Some(x)) => Some(t.empirical_correlation(dd, *x)?),
                    _ => None,
                };
                rows.push(CorrRow {
                    d: dd,
                    closed_exact_over_c: format_rational(&exact),
                    closed_value: sig12(v.value),
                    closed_err: sig12(v.err),
                    empirical: emp.map(sig12),
                    abs_diff: emp.map(|e| sig12((e - v.value).abs())),
                });
            }
            Ok((render(fmt, Some(&model.info), &rows)?, true))
        }
        Task::Lambda {
            model,
            h,
            x,
            prime_bound,
            d_cutoff,
        } => {
            let cm = CorrelationModel::new(model.spec.clone());
            let mc = ModelConstants::new(&cm, *prime_bound)?;
            let table = match x {
                Some(x) => Some(FTable::build(
                    &model.spec,
                    x + h.iter().max().copied().unwrap_or(0),
                )?),
                None => None,
            };
            let mut rows = Vec::new();
            for &hh in h {
                let a = lambda_from_correlations(&mc, hh)?;
                let b = lambda_closed(&mc, hh, *d_cutoff)?;
                let emp = match (&table, x) {
                    (Some(t), Some(x)) => Some(t.lambda(hh, *x)?),
                    _ => None,
                };
                rows.push(LambdaRow {
                    h: hh,
                    from_sd: sig12(a.value),
                    from_sd_err: sig12(a.err),
                    closed: sig12(b.value),
                    closed_err: sig12(b.err),
                    routes_agree: a.agrees_with(&b, 0.0),
                    empirical: emp.map(sig12),
                    x: emp.and(*x),
                });
            }
            let ok = rows.iter().all(|r| r.routes_agree);
            Ok((render(fmt, Some(&model.info), &rows)?, ok))
        }
        Task::Witness { model, m } => {
            let cm = CorrelationModel::new(model.spec.clone());
            let rep = witness_experiment(&cm, m)?;
            let mut rows = Vec::new();
            for row in &rep.rows {
                for v in &row.values {
                    let ratio = rep
                        .ratios
                        .iter()
                        .find(|r| 4 * r.0 == row.m && r.1 == v.multiple)
                        .map(|r| sig12(r.2));
                    rows.push(WitnessCsvRow {
                        m: row.m,
                        multiple: v.multiple,
                        h0: row.h0.clone(),
                        lower_bound: v.lower_bound.clone(),
                        lower_bound_value: sig12(v.lower_bound_f64),
                        norms_exact: v.norms_exact,
                        ratio_to_quarter_m: ratio,
                    });
                }
            }
            let ok = rows.iter().all(|r| r.norms_exact);
            Ok((render(fmt, Some(&model.info), &rows)?, ok))
        }
        Task::Scan {
            model,
            x_max,
            d_max,
        } => {
            let t = FTable::build(&model.spec, *x_max)?;
            let rep = t.hap_scan(*x_max, *d_max)?;
            let rows: Vec<ScanRow> = rep
                .records
                .iter()
                .enumerate()
                .map(|(i, r)| ScanRow {
                    record: i as u64 + 1,
                    x: r.x,
                    d: r.d,
                    sum: r.sum,
                })
                .collect();
            Ok((render(fmt, Some(&model.info), &rows)?, true))
        }
    }
}

/// Runs a parsed configuration and returns the process exit code.
pub fn run(cfg: &RunConfig) -> i32 {
    let result = match cfg.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(cfg)),
            Err(e) => Err(CliError::Capacity(e.to_string())),
        },
        None => execute(cfg),
    };
    let (text, ok) = match result {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let written = match &cfg.output {
        Some(path) => fs::write(path, text.as_bytes()),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_CAPACITY;
    }
    if ok {
        EXIT_OK
    } else {
        eprintln!("verification failed");
        EXIT_VERIFY
    }
}
