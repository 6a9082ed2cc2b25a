//! Command-line driver.
//!
//! Every subcommand reads an optional JSON config file (`--config`) whose
//! keys mirror the long flags; flags override config values. Thread count is
//! taken from `--threads`, then `HALTON_CBC_THREADS`, then the config file.
//!
//! Exit codes: 0 when every requested assertion holds, 1 when one fails,
//! 2 on invalid configuration or runtime errors (one line on stderr,
//! `error: <kind>: <message>`).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bounds::{bound_report, cbc_bound_sq, rms_bound_sq, BoundReport};
use crate::cbc::{cbc_construct_with, minimal_ms, CbcOptions, ShiftVector, DEFAULT_MAX_CANDIDATES};
use crate::halton::{halton_points, shifted_halton_points, BaseVector, ShiftMode};
use crate::verify::{mc_rms_estimate, run_verification, VerificationReport, VerifyGrid};
use crate::wce::{squared_wce, WeightSpec, DEFAULT_MAX_POINTS};
use crate::{Error, Result};

pub const THREADS_ENV: &str = "HALTON_CBC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "halton-cbc", version, about = "CBC construction of shifted Halton point sets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Construct a shift component by component.
    Cbc(CommonArgs),
    /// Squared worst-case error of a shifted Halton point set.
    Wce(CommonArgs),
    /// Evaluate both error bounds for d = 1..s, optionally with a
    /// Monte-Carlo estimate of the mean squared error over random shifts.
    Bound(CommonArgs),
    /// Export (shifted) Halton points as CSV.
    Halton(CommonArgs),
    /// Run CBC over a range of N and tabulate errors against bounds.
    Study(CommonArgs),
    /// Run the verification sweeps.
    Verify(CommonArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Comma-separated distinct primes, e.g. `2,3,5`.
    #[arg(long)]
    pub bases: Option<String>,
    /// Use the first `s` primes as bases.
    #[arg(long)]
    pub dims: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    /// `start:end:xF` (geometric), `start:end:+D` (arithmetic) or a list.
    #[arg(long)]
    pub n_range: Option<String>,
    /// `c/j^a`, `r^j` or an explicit list.
    #[arg(long)]
    pub weights: Option<String>,
    /// Comma-separated m_j overriding the minimal values.
    #[arg(long)]
    pub m: Option<String>,
    /// Comma-separated shift numerators a_j (sigma_j = a_j / p_j^m_j).
    #[arg(long)]
    pub shift: Option<String>,
    /// full | simplified | mid-simplified
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub max_n: Option<usize>,
    #[arg(long)]
    pub max_search: Option<u64>,
    /// Verification grid: default | small | empty.
    #[arg(long)]
    pub grid: Option<String>,
    /// Monte-Carlo trials over random p-adic shifts (`bound` only).
    #[arg(long)]
    pub trials: Option<u64>,
    /// Write coordinates as exact fractions.
    #[arg(long)]
    pub exact: bool,
    /// Leave wall time out of the metadata block.
    #[arg(long)]
    pub no_timing: bool,
    /// Harness self-test: corrupts one verification value.
    #[arg(long, hide = true)]
    pub inject_perturbation: bool,
}

/// Config file schema. All keys optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bases: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_range: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weights: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_search: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad {what} entry {t:?}")))
        })
        .collect()
}

/// Parses `16:512:x2`, `10:50:+10`, `16,32,64` or a single value.
pub fn parse_n_range(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::InvalidArgument(format!("bad n-range {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [start, end, step] => {
            let start: usize = start.trim().parse().map_err(|_| bad())?;
            let end: usize = end.trim().parse().map_err(|_| bad())?;
            let step = step.trim();
            if start == 0 || end < start {
                return Err(bad());
            }
            let mut out = Vec::new();
            let mut n = start;
            if let Some(f) = step.strip_prefix('x') {
                let f: usize = f.parse().map_err(|_| bad())?;
                if f < 2 {
                    return Err(bad());
                }
                while n <= end {
                    out.push(n);
                    n = n.checked_mul(f).ok_or_else(bad)?;
                }
            } else {
                let d: usize = step.trim_start_matches('+').parse().map_err(|_| bad())?;
                if d == 0 {
                    return Err(bad());
                }
                while n <= end {
                    out.push(n);
                    n += d;
                }
            }
            Ok(out)
        }
        [_] => parse_list(s, "n-range"),
        _ => Err(bad()),
    }
}

impl RunConfig {
    fn load(path: &PathBuf) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidArgument(format!("config {}: {e}", path.display())))
    }

    /// Config file values overridden by flags.
    pub fn resolve(args: &CommonArgs) -> Result<Self> {
        let mut c = match &args.config {
            Some(path) => Self::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(b) = &args.bases {
            c.bases = Some(parse_list(b, "bases")?);
            c.dims = None;
        }
        if let Some(d) = args.dims {
            c.dims = Some(d);
            if args.bases.is_none() {
                c.bases = None;
            }
        }
        macro_rules! take {
            ($($f:ident),*) => { $( if args.$f.is_some() { c.$f = args.$f.clone(); } )* };
        }
        take!(n, n_range, weights, mode, format, seed, threads, max_n, max_search, grid, trials, out);
        if let Some(m) = &args.m {
            c.m = Some(parse_list(m, "m")?);
        }
        if let Some(s) = &args.shift {
            c.shift = Some(parse_list(s, "shift")?);
        }
        if args.exact {
            c.exact = Some(true);
        }
        Ok(c)
    }

    pub fn bases(&self) -> Result<BaseVector> {
        match (&self.bases, self.dims) {
            (Some(b), _) => BaseVector::new(b.clone()),
            (None, Some(s)) => BaseVector::first_primes(s),
            (None, None) => Err(Error::InvalidArgument("bases or dims required".into())),
        }
    }

    pub fn n(&self) -> Result<usize> {
        let n = self
            .n
            .ok_or_else(|| Error::InvalidArgument("n required".into()))?;
        self.check_n(n)?;
        Ok(n)
    }

    fn check_n(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        let cap = self.max_n.unwrap_or(DEFAULT_MAX_POINTS);
        if n > cap {
            return Err(Error::CapExceeded {
                what: "N",
                value: n as u128,
                cap: cap as u128,
            });
        }
        Ok(())
    }

    pub fn n_values(&self) -> Result<Vec<usize>> {
        let ns = match (&self.n_range, self.n) {
            (Some(r), _) => parse_n_range(r)?,
            (None, Some(n)) => vec![n],
            (None, None) => return Err(Error::InvalidArgument("n-range or n required".into())),
        };
        for &n in &ns {
            self.check_n(n)?;
        }
        Ok(ns)
    }

    pub fn weights(&self) -> Result<WeightSpec> {
        self.weights.as_deref().unwrap_or("1/j^2").parse()
    }

    pub fn mode(&self) -> Result<ShiftMode> {
        self.mode.as_deref().unwrap_or("mid-simplified").parse()
    }

    fn cbc_options(&self) -> CbcOptions {
        CbcOptions {
            max_points: self.max_n.unwrap_or(DEFAULT_MAX_POINTS),
            max_candidates: self.max_search.unwrap_or(DEFAULT_MAX_CANDIDATES),
            m_override: self.m.clone(),
            naive: false,
        }
    }

    fn shift_vector(&self, bases: &BaseVector, n: usize) -> Result<ShiftVector> {
        let ms = match &self.m {
            Some(m) => m.clone(),
            None => minimal_ms(bases, n)?,
        };
        let numerators = self.shift.clone().unwrap_or_else(|| vec![0; bases.dim()]);
        ShiftVector::new(bases.clone(), ms, numerators)
    }

    /// Echo for output metadata, without execution-only settings.
    fn echo(&self) -> RunConfig {
        RunConfig {
            threads: None,
            out: None,
            ..self.clone()
        }
    }
}

#[derive(Debug, Serialize)]
struct Metadata {
    tool: &'static str,
    version: &'static str,
    config: RunConfig,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_time_s: Option<f64>,
}

struct Context {
    config: RunConfig,
    started: Instant,
    timing: bool,
}

impl Context {
    fn metadata(&self) -> Metadata {
        Metadata {
            tool: "halton-cbc",
            version: env!("CARGO_PKG_VERSION"),
            config: self.config.echo(),
            seed: self.config.seed.unwrap_or(0),
            wall_time_s: self.timing.then(|| self.started.elapsed().as_secs_f64()),
        }
    }

    fn csv_footer(&self) -> String {
        let meta = self.metadata();
        let mut out = String::new();
        let _ = writeln!(out, "# tool: {} {}", meta.tool, meta.version);
        let _ = writeln!(
            out,
            "# config: {}",
            serde_json::to_string(&meta.config).unwrap_or_default()
        );
        let _ = writeln!(out, "# seed: {}", meta.seed);
        if let Some(t) = meta.wall_time_s {
            let _ = writeln!(out, "# wall_time_s: {t}");
        }
        out
    }

    fn format(&self, default: OutputFormat) -> OutputFormat {
        self.config.format.unwrap_or(default)
    }

    fn emit(&self, body: String) -> Result<()> {
        match &self.config.out {
            Some(path) => std::fs::write(path, body)?,
            None => print!("{body}"),
        }
        Ok(())
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// `Ok(true)` when every assertion held.
type Outcome = Result<bool>;

#[derive(Serialize)]
#[serde(untagged)]
enum BoundField {
    Value(f64),
    Flag(bool),
    NotApplicable(&'static str),
}

const NA: BoundField = BoundField::NotApplicable("n/a (N < 2)");

#[derive(Serialize)]
struct CbcDimension {
    d: usize,
    base: u32,
    m: u32,
    numerator: u64,
    sigma: String,
    gamma: f64,
    squared_error: f64,
    cbc_bound_sq: BoundField,
    within_bound: BoundField,
    candidates: u64,
}

#[derive(Serialize)]
struct CbcReport {
    command: &'static str,
    n: usize,
    bases: Vec<u32>,
    weights: Vec<f64>,
    numerators: Vec<u64>,
    dimensions: Vec<CbcDimension>,
    pass: bool,
    metadata: Metadata,
}

fn cmd_cbc(ctx: &Context) -> Outcome {
    let c = &ctx.config;
    let bases = c.bases()?;
    let n = c.n()?;
    let weights = c.weights()?.materialize(bases.dim())?;
    let result = cbc_construct_with(&bases, n, &weights, &c.cbc_options())?;
    let pass = result.within_bounds();
    let dimensions = (0..result.dim())
        .map(|j| {
            let e = result.squared_errors[j];
            let (bound, within) = match result.bounds[j] {
                Some(b) => (BoundField::Value(b), BoundField::Flag(e <= b)),
                None => (NA, NA),
            };
            CbcDimension {
                d: j + 1,
                base: bases.primes()[j],
                m: result.shift.ms()[j],
                numerator: result.shift.numerators()[j],
                sigma: result.shift.fraction(j),
                gamma: weights.gammas()[j],
                squared_error: e,
                cbc_bound_sq: bound,
                within_bound: within,
                candidates: result.candidate_counts[j],
            }
        })
        .collect();
    let report = CbcReport {
        command: "cbc",
        n,
        bases: bases.primes().to_vec(),
        weights: weights.gammas().to_vec(),
        numerators: result.shift.numerators().to_vec(),
        dimensions,
        pass,
        metadata: ctx.metadata(),
    };
    match ctx.format(OutputFormat::Json) {
        OutputFormat::Json => ctx.emit(to_json(&report)?)?,
        OutputFormat::Csv => {
            let mut out =
                String::from("d,base,m,numerator,sigma,gamma,squared_error,cbc_bound_sq,within_bound\n");
            for r in &report.dimensions {
                let field = |b: &BoundField| match b {
                    BoundField::Value(v) => v.to_string(),
                    BoundField::Flag(f) => f.to_string(),
                    BoundField::NotApplicable(_) => "n/a".to_string(),
                };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    r.d,
                    r.base,
                    r.m,
                    r.numerator,
                    r.sigma,
                    r.gamma,
                    r.squared_error,
                    field(&r.cbc_bound_sq),
                    field(&r.within_bound)
                );
            }
            out.push_str(&ctx.csv_footer());
            ctx.emit(out)?;
        }
    }
    Ok(pass)
}

#[derive(Serialize)]
struct WceReport {
    command: &'static str,
    n: usize,
    bases: Vec<u32>,
    ms: Vec<u32>,
    numerators: Vec<u64>,
    mode: ShiftMode,
    weights: Vec<f64>,
    squared_error: f64,
    error: f64,
    metadata: Metadata,
}

fn cmd_wce(ctx: &Context) -> Outcome {
    let c = &ctx.config;
    let bases = c.bases()?;
    let n = c.n()?;
    let weights = c.weights()?.materialize(bases.dim())?;
    let shift = c.shift_vector(&bases, n)?;
    let mode = c.mode()?;
    let points = shifted_halton_points(&bases, n, &shift, mode)?;
    let e2 = squared_wce(&points, &weights)?;
    let report = WceReport {
        command: "wce",
        n,
        bases: bases.primes().to_vec(),
        ms: shift.ms().to_vec(),
        numerators: shift.numerators().to_vec(),
        mode,
        weights: weights.gammas().to_vec(),
        squared_error: e2,
        error: e2.max(0.0).sqrt(),
        metadata: ctx.metadata(),
    };
    match ctx.format(OutputFormat::Json) {
        OutputFormat::Json => ctx.emit(to_json(&report)?)?,
        OutputFormat::Csv => {
            let mut out = format!("n,squared_error,error\n{n},{e2},{}\n", report.error);
            out.push_str(&ctx.csv_footer());
            ctx.emit(out)?;
        }
    }
    Ok(true)
}

#[derive(Serialize)]
struct McRow {
    trials: u64,
    seed: u64,
    mean_sq_error: f64,
    std_error: f64,
    /// `mean <= rms_bound_sq + 3 * std_error`
    within_bound: bool,
}

#[derive(Serialize)]
struct BoundRow {
    #[serde(flatten)]
    report: BoundReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    monte_carlo: Option<McRow>,
}

#[derive(Serialize)]
struct BoundOutput {
    command: &'static str,
    bounds: Vec<BoundRow>,
    pass: bool,
    metadata: Metadata,
}

fn cmd_bound(ctx: &Context) -> Outcome {
    let c = &ctx.config;
    let bases = c.bases()?;
    let n = c.n()?;
    let weights = c.weights()?.materialize(bases.dim())?;
    let seed = c.seed.unwrap_or(0);
    let rows = (1..=bases.dim())
        .map(|d| {
            let report = bound_report(&bases, &weights, n, d)?;
            let monte_carlo = match c.trials {
                Some(trials) => {
                    let est = mc_rms_estimate(&bases.prefix(d)?, n, &weights.prefix(d)?, trials, seed)?;
                    Some(McRow {
                        trials,
                        seed,
                        mean_sq_error: est.mean_sq_error,
                        std_error: est.std_error,
                        within_bound: est.mean_sq_error
                            <= report.rms_bound_sq + 3.0 * est.std_error,
                    })
                }
                None => None,
            };
            Ok(BoundRow {
                report,
                monte_carlo,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let pass = rows
        .iter()
        .all(|r| r.monte_carlo.as_ref().map_or(true, |m| m.within_bound));
    match ctx.format(OutputFormat::Json) {
        OutputFormat::Json => ctx.emit(to_json(&BoundOutput {
            command: "bound",
            bounds: rows,
            pass,
            metadata: ctx.metadata(),
        })?)?,
        OutputFormat::Csv => {
            let mut out = String::from(
                "n,d,rms_bound_sq,cbc_bound_sq,summability,mc_mean_sq_error,mc_std_error\n",
            );
            for r in &rows {
                let b = &r.report;
                let (mean, se) = r.monte_carlo.as_ref().map_or(
                    ("n/a".to_string(), "n/a".to_string()),
                    |m| (m.mean_sq_error.to_string(), m.std_error.to_string()),
                );
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    b.n, b.d, b.rms_bound_sq, b.cbc_bound_sq, b.summability, mean, se
                );
            }
            out.push_str(&ctx.csv_footer());
            ctx.emit(out)?;
        }
    }
    Ok(pass)
}

fn cmd_halton(ctx: &Context) -> Outcome {
    let c = &ctx.config;
    if ctx.format(OutputFormat::Csv) != OutputFormat::Csv {
        return Err(Error::InvalidArgument("halton export supports csv only".into()));
    }
    let bases = c.bases()?;
    let n = c.n()?;
    let points = if c.shift.is_some() {
        shifted_halton_points(&bases, n, &c.shift_vector(&bases, n)?, c.mode()?)?
    } else {
        halton_points(&bases, n)?
    };
    let mut out = points.to_csv(c.exact.unwrap_or(false));
    out.push_str(&ctx.csv_footer());
    ctx.emit(out)?;
    Ok(true)
}

/// One row of a convergence study.
#[derive(Debug, Clone, Serialize)]
pub struct StudyRow {
    pub n: usize,
    pub e: f64,
    pub e_sq: f64,
    pub cbc_bound_sq: Option<f64>,
    pub rms_bound_sq: Option<f64>,
    pub numerators: Vec<u64>,
}

impl StudyRow {
    pub fn within_bound(&self) -> bool {
        self.cbc_bound_sq.map_or(true, |b| self.e <= b.sqrt())
    }
}

pub const STUDY_HEADER: &str = "n,e,e_sq,cbc_bound_sq,rms_bound_sq,within_bound,numerators";

pub fn run_study(config: &RunConfig) -> Result<Vec<StudyRow>> {
    let bases = config.bases()?;
    let weights = config.weights()?.materialize(bases.dim())?;
    let s = bases.dim();
    config
        .n_values()?
        .into_iter()
        .map(|n| {
            let r = cbc_construct_with(&bases, n, &weights, &config.cbc_options())?;
            let e_sq = r.squared_errors[s - 1];
            let (cbc, rms) = if n >= 2 {
                (
                    Some(cbc_bound_sq(&bases, &weights, n, s)?),
                    Some(rms_bound_sq(&bases, &weights, n, s)?),
                )
            } else {
                (None, None)
            };
            Ok(StudyRow {
                n,
                e: e_sq.max(0.0).sqrt(),
                e_sq,
                cbc_bound_sq: cbc,
                rms_bound_sq: rms,
                numerators: r.shift.numerators().to_vec(),
            })
        })
        .collect()
}

fn cmd_study(ctx: &Context) -> Outcome {
    let rows = run_study(&ctx.config)?;
    let pass = rows.iter().all(StudyRow::within_bound);
    match ctx.format(OutputFormat::Csv) {
        OutputFormat::Csv => {
            let opt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| v.to_string());
            let mut out = format!("{STUDY_HEADER}\n");
            for r in &rows {
                let nums: Vec<String> = r.numerators.iter().map(u64::to_string).collect();
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.n,
                    r.e,
                    r.e_sq,
                    opt(r.cbc_bound_sq),
                    opt(r.rms_bound_sq),
                    r.within_bound(),
                    nums.join(";")
                );
            }
            out.push_str(&ctx.csv_footer());
            ctx.emit(out)?;
        }
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct StudyOutput<'a> {
                command: &'static str,
                rows: &'a [StudyRow],
                pass: bool,
                metadata: Metadata,
            }
            ctx.emit(to_json(&StudyOutput {
                command: "study",
                rows: &rows,
                pass,
                metadata: ctx.metadata(),
            })?)?;
        }
    }
    Ok(pass)
}

fn cmd_verify(ctx: &Context, perturb: bool) -> Outcome {
    let grid = VerifyGrid::by_name(ctx.config.grid.as_deref().unwrap_or("default"))?;
    let report = run_verification(&grid, perturb)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(f) = report.first_failure() {
        eprintln!("verification failed: {} [{}] lhs={} rhs={}", f.name, f.case, f.lhs, f.rhs);
    }
    #[derive(Serialize)]
    struct VerifyOutput<'a> {
        command: &'static str,
        #[serde(flatten)]
        report: &'a VerificationReport,
        metadata: Metadata,
    }
    match ctx.format(OutputFormat::Json) {
        OutputFormat::Json => ctx.emit(to_json(&VerifyOutput {
            command: "verify",
            report: &report,
            metadata: ctx.metadata(),
        })?)?,
        OutputFormat::Csv => {
            let mut out = String::from("name,case,lhs,relation,rhs,tolerance,slack,pass\n");
            for c in &report.checks {
                let _ = writeln!(
                    out,
                    "{},\"{}\",{},{},{},{},{},{}",
                    c.name, c.case, c.lhs, c.relation, c.rhs, c.tolerance, c.slack, c.pass
                );
            }
            out.push_str(&ctx.csv_footer());
            ctx.emit(out)?;
        }
    }
    Ok(report.pass)
}

fn thread_count(args: &CommonArgs, config: &RunConfig) -> Result<usize> {
    if let Some(t) = args.threads {
        return Ok(t);
    }
    if let Ok(v) = std::env::var(THREADS_ENV) {
        return v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("{THREADS_ENV}={v:?} is not a count")));
    }
    Ok(config.threads.unwrap_or(0))
}

fn execute(command: &Command) -> Outcome {
    let args = match command {
        Command::Cbc(a)
        | Command::Wce(a)
        | Command::Bound(a)
        | Command::Halton(a)
        | Command::Study(a)
        | Command::Verify(a) => a,
    };
    let config = RunConfig::resolve(args)?;
    let threads = thread_count(args, &config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let ctx = Context {
        config,
        started: Instant::now(),
        timing: !args.no_timing,
    };
    pool.install(|| match command {
        Command::Cbc(_) => cmd_cbc(&ctx),
        Command::Wce(_) => cmd_wce(&ctx),
        Command::Bound(_) => cmd_bound(&ctx),
        Command::Halton(_) => cmd_halton(&ctx),
        Command::Study(_) => cmd_study(&ctx),
        Command::Verify(a) => cmd_verify(&ctx, a.inject_perturbation),
    })
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli.command) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error: {}: {msg}", e.kind());
            2
        }
    }
}
