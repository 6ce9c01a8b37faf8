//! Command-line front end: `limit | check | sweep | means | renyi`.
//!
//! Matrices are JSON objects `{"d": n, "entries": [[[re, im], …], …]}`,
//! optionally carrying a spectral form `"eigenvalues": [...]` with
//! `"eigenvectors"` given row-major and holding the eigenvectors as columns.
//! When both are present the spectral form is used.
//!
//! Exit codes: 0 success, 1 failed check or computation, 2 parse or usage
//! error, 3 dimension or instance-spec error, 4 non-simple `Q` at a gap.

use std::fs;
use std::io::{Read, Write};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::antisym::IndexSet;
use crate::antitrotter::{
    check_maximal, limit_matrix_multi, maximal_limit, LimitReport, MaximalVerdict, Tolerances, DEFAULT_GROUP_TOL, DEFAULT_MINOR_TOL,
    DEFAULT_SPEC_TOL,
};
use crate::error::Error;
use crate::logval::LogValue;
use crate::majorize::{check_alt_monotonicity, check_gm_monotonicity, gelfand_naimark_sandwich, MonotonicityReport, SpectrumVector};
use crate::matnum::{g_p_spectrum, op_norm, z_p_eigenvalues_numeric, CMatrix, PsdMatrix};
use crate::means::{
    g_limit_estimate, g_p_limit_2x2, loewner_le, mean_power, renyi_divergence, spectral_inf, spectral_sup, weighted_lt_limit,
    Normalization, OperatorMeanSpec,
};
use crate::oracle::{doubling_schedule, extrapolate, rng, random_psd_with, ConvergenceTrace, SpectrumSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_DIMENSION: i32 = 3;
pub const EXIT_Q_NOT_RANK_ONE: i32 = 4;

/// One matrix on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixFile {
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvectors: Option<Vec<Vec<[f64; 2]>>>,
}

fn to_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect()
}

fn from_rows(d: usize, rows: &[Vec<[f64; 2]>], what: &str) -> Result<CMatrix, Error> {
    if rows.len() != d || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Parse(format!("{what} must be a {d}×{d} array of [re, im] pairs")));
    }
    Ok(CMatrix::from_fn(d, d, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1])))
}

impl MatrixFile {
    pub fn parse(text: &str) -> Result<Self, Error> {
        let f: MatrixFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if f.entries.is_none() && f.eigenvalues.is_none() {
            return Err(Error::Parse("need \"entries\" or \"eigenvalues\"/\"eigenvectors\"".into()));
        }
        if f.eigenvalues.is_some() != f.eigenvectors.is_some() {
            return Err(Error::Parse("\"eigenvalues\" and \"eigenvectors\" go together".into()));
        }
        Ok(f)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("matrix files serialize")
    }

    pub fn to_psd(&self) -> Result<PsdMatrix, Error> {
        match (&self.eigenvalues, &self.eigenvectors, &self.entries) {
            (Some(vals), Some(vecs), _) => {
                if vals.len() != self.d {
                    return Err(Error::Parse(format!("expected {} eigenvalues, got {}", self.d, vals.len())));
                }
                PsdMatrix::from_spectral(vals.clone(), from_rows(self.d, vecs, "eigenvectors")?)
            }
            (_, _, Some(rows)) => PsdMatrix::from_matrix(from_rows(self.d, rows, "entries")?),
            _ => Err(Error::Parse("no matrix data".into())),
        }
    }

    pub fn from_psd(m: &PsdMatrix, spectral: bool) -> Self {
        if spectral {
            MatrixFile {
                d: m.dim(),
                entries: None,
                eigenvalues: Some(m.eigenvalues().to_vec()),
                eigenvectors: Some(to_rows(m.eigenvectors())),
            }
        } else {
            MatrixFile { d: m.dim(), entries: Some(to_rows(&m.to_matrix())), eigenvalues: None, eigenvectors: None }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Debug, Args)]
pub struct ConfigArgs {
    /// Relative cut for nonzero minors.
    #[arg(long, global = true, default_value_t = DEFAULT_MINOR_TOL)]
    pub minor_tol: f64,
    /// Log-domain tolerance for equal products [default: 1e-9·d].
    #[arg(long, global = true)]
    pub product_tol: Option<f64>,
    /// Relative tolerance for equal input eigenvalues.
    #[arg(long, global = true, default_value_t = DEFAULT_SPEC_TOL)]
    pub spec_tol: f64,
    /// Largest admissible second/first eigenvalue ratio of Q.
    #[arg(long, global = true, default_value_t = DEFAULT_GROUP_TOL)]
    pub group_tol: f64,
    /// Largest p of the doubling schedule.
    #[arg(long, global = true, default_value_t = 4096.0)]
    pub p_max: f64,
    /// Number of schedule points.
    #[arg(long, global = true, default_value_t = 7)]
    pub p_points: usize,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Omit the timestamp so identical runs give identical bytes.
    #[arg(long, global = true)]
    pub deterministic: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Property {
    Alt,
    Gm,
    Sandwich,
    Maximal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Zp,
    Gp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum MeanName {
    Arithmetic,
    Harmonic,
    Geometric,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Direction {
    P0,
    Pinf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NormalizationArg {
    Auto,
    One,
    Two,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Limit eigenvalues and limit matrix of the symmetric product (2 or more matrices).
    Limit {
        #[arg(required = true, num_args = 2..)]
        inputs: Vec<String>,
        /// Use the maximal-case formula (two matrices only).
        #[arg(long)]
        maximal: bool,
    },
    /// Check a property of a pair.
    Check {
        a: String,
        b: String,
        #[arg(long, value_enum)]
        property: Property,
        /// Additive log-domain slack [default: 1e-10·d].
        #[arg(long)]
        slack: Option<f64>,
    },
    /// Seeded ensemble sweep along the p schedule.
    Sweep {
        #[arg(long, value_enum, default_value = "zp")]
        kind: SweepKind,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 1e-3)]
        lo: f64,
        #[arg(long, default_value_t = 1e3)]
        hi: f64,
        /// Write the summary JSON here instead of stderr.
        #[arg(long)]
        summary: Option<String>,
    },
    /// Operator-mean limits as p → 0 or p → ∞.
    Means {
        a: String,
        b: String,
        #[arg(long, value_enum)]
        mean: MeanName,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, value_enum)]
        direction: Direction,
        #[arg(long, value_enum, default_value = "auto")]
        normalization: NormalizationArg,
    },
    /// Sandwiched Rényi divergence D_{α,z}(ρ‖σ).
    Renyi {
        rho: String,
        sigma: String,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        z: f64,
    },
}

#[derive(Debug, Parser)]
#[command(name = "antitrotter", version, about = "Large-p limits of (A^{p/2} B^p A^{p/2})^{1/p} and related quantities")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub config: ConfigArgs,
}

/// Validated run settings.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub minor_tol: f64,
    pub product_tol: Option<f64>,
    pub spec_tol: f64,
    pub group_tol: f64,
    pub p_schedule: Vec<f64>,
    pub seed: u64,
    pub format: Option<Format>,
    pub deterministic: bool,
}

impl RunConfig {
    pub fn from_args(c: &ConfigArgs) -> Result<Self, String> {
        for (name, v) in [("minor-tol", c.minor_tol), ("spec-tol", c.spec_tol), ("group-tol", c.group_tol), ("p-max", c.p_max)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("--{name} must be positive"));
            }
        }
        if c.product_tol.is_some_and(|v| !(v > 0.0 && v.is_finite())) {
            return Err("--product-tol must be positive".into());
        }
        if c.p_points == 0 {
            return Err("--p-points must be at least 1".into());
        }
        Ok(RunConfig {
            minor_tol: c.minor_tol,
            product_tol: c.product_tol,
            spec_tol: c.spec_tol,
            group_tol: c.group_tol,
            p_schedule: doubling_schedule(c.p_max, c.p_points),
            seed: c.seed,
            format: c.format,
            deterministic: c.deterministic,
        })
    }

    pub fn tolerances(&self) -> Tolerances {
        Tolerances {
            minor_tol: self.minor_tol,
            product_tol: self.product_tol,
            spec_tol: self.spec_tol,
            group_tol: self.group_tol,
            verify_grid: self.p_schedule.clone(),
        }
    }

    fn to_json(&self) -> Value {
        json!({
            "minor_tol": self.minor_tol,
            "product_tol": self.product_tol,
            "spec_tol": self.spec_tol,
            "group_tol": self.group_tol,
            "p_schedule": self.p_schedule,
            "seed": self.seed,
        })
    }
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Parse(_)
            | Error::NotHermitian { .. }
            | Error::MateriallyNegative { .. }
            | Error::NotDensity { .. }
            | Error::AlphaOne
            | Error::ZZero => EXIT_PARSE,
            Error::DimensionMismatch { .. } | Error::DimensionTooLarge { .. } | Error::BadSpectrum(_) | Error::LengthMismatch { .. } => {
                EXIT_DIMENSION
            }
            Error::QNotRankOne { .. } => EXIT_Q_NOT_RANK_ONE,
            _ => EXIT_FAIL,
        };
        CliError { code, message: e.to_string() }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError { code: EXIT_PARSE, message: msg.into() }
}

/// Reads files, with `-` meaning standard input (at most once).
struct Inputs<'a> {
    stdin: &'a mut dyn Read,
    used_stdin: bool,
}

impl Inputs<'_> {
    fn load(&mut self, path: &str) -> Result<PsdMatrix, CliError> {
        let text = if path == "-" {
            if self.used_stdin {
                return Err(usage("standard input can be read only once"));
            }
            self.used_stdin = true;
            let mut s = String::new();
            self.stdin.read_to_string(&mut s).map_err(|e| usage(format!("reading stdin: {e}")))?;
            s
        } else {
            fs::read_to_string(path).map_err(|e| usage(format!("reading {path}: {e}")))?
        };
        Ok(MatrixFile::parse(&text)?.to_psd()?)
    }

    fn load_all(&mut self, paths: &[String]) -> Result<Vec<PsdMatrix>, CliError> {
        let mats: Vec<PsdMatrix> = paths.iter().map(|p| self.load(p)).collect::<Result<_, _>>()?;
        if let Some(bad) = mats.iter().find(|m| m.dim() != mats[0].dim()) {
            return Err(Error::DimensionMismatch { expected: mats[0].dim(), found: bad.dim() }.into());
        }
        Ok(mats)
    }
}

/// Finite numbers as JSON numbers, infinities as `"+inf"`/`"-inf"`.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        Value::Null
    } else if x > 0.0 {
        json!("+inf")
    } else {
        json!("-inf")
    }
}

fn logvalue_json(v: &LogValue) -> Value {
    json!({"log10": num(v.log10()), "ln": num(v.logmag()), "linear": num(v.to_real())})
}

fn matrix_json(m: &CMatrix) -> Value {
    json!(to_rows(m).iter().map(|r| r.iter().map(|z| vec![num(z[0]), num(z[1])]).collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn set_json(s: &IndexSet) -> Value {
    json!(s.one_based())
}

fn verdict_json(v: &MaximalVerdict) -> Value {
    json!({
        "holds": v.holds,
        "failing_k": v.failing_k,
        "witnesses": v.witnesses.iter().map(|(k, i, j)| json!({"k": k, "I": set_json(i), "J": set_json(j)})).collect::<Vec<_>>(),
        "eigenvalues_match": v.eigenvalues_match,
    })
}

fn report_json(r: &LimitReport) -> Value {
    json!({
        "eigenvalues": r.limit_eigenvalues.iter().map(logvalue_json).collect::<Vec<_>>(),
        "limit_matrix": matrix_json(&r.limit_matrix.to_matrix()),
        "groups": r.groups.iter().map(|g| json!({
            "first": g.first,
            "last": g.last,
            "eigenvalues": g.eigenvalues.iter().map(logvalue_json).collect::<Vec<_>>(),
            "projection": matrix_json(&g.projection),
        })).collect::<Vec<_>>(),
        "maximality": r.maximal.as_ref().map(verdict_json),
        "residuals": r.diagnostics.iter().map(|d| json!({"p": d.p, "residual": num(d.residual), "relative": num(d.relative)})).collect::<Vec<_>>(),
    })
}

fn finish(mut v: Value, cfg: &RunConfig) -> Value {
    v["config"] = cfg.to_json();
    if !cfg.deterministic {
        let t = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        v["generated_at"] = json!(t);
    }
    v
}

fn emit(out: &mut dyn Write, v: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(v).expect("reports serialize");
    writeln!(out, "{text}").map_err(|e| CliError { code: EXIT_FAIL, message: e.to_string() })
}

fn cmd_limit(inputs: &mut Inputs, paths: &[String], maximal: bool, cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let mats = inputs.load_all(paths)?;
    let tol = cfg.tolerances();
    let mut report = if maximal {
        if mats.len() != 2 {
            return Err(usage("--maximal takes exactly two matrices"));
        }
        maximal_limit(&mats[0], &mats[1], &tol)?
    } else {
        limit_matrix_multi(&mats, &tol)?
    };
    if mats.len() == 2 && report.maximal.is_none() {
        report.maximal = Some(check_maximal(&mats[0], &mats[1], cfg.minor_tol, cfg.spec_tol)?);
    }
    if cfg.format == Some(Format::Csv) {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["k", "log10", "ln", "linear"]).expect("in-memory csv");
        for (k, l) in report.limit_eigenvalues.iter().enumerate() {
            w.write_record([(k + 1).to_string(), l.log10().to_string(), l.logmag().to_string(), l.to_real().to_string()])
                .expect("in-memory csv");
        }
        out.write_all(&w.into_inner().expect("in-memory csv")).map_err(|e| CliError { code: EXIT_FAIL, message: e.to_string() })?;
        return Ok(EXIT_OK);
    }
    let mut v = report_json(&report);
    v["command"] = json!("limit");
    v["m"] = json!(mats.len());
    v["d"] = json!(mats[0].dim());
    emit(out, &finish(v, cfg))?;
    Ok(EXIT_OK)
}

fn monotonicity_json(r: &MonotonicityReport) -> Value {
    json!({
        "holds": r.holds,
        "worst_margin": num(r.worst_margin),
        "worst_total_defect": num(r.worst_total_defect),
        "pairs": r.pairs.iter().map(|c| json!({"p": c.p, "q": c.q, "holds": c.holds, "margin": num(c.margin), "total_defect": num(c.total_defect)})).collect::<Vec<_>>(),
    })
}

fn check_grid(cfg: &RunConfig) -> Vec<f64> {
    let mut g: Vec<f64> = std::iter::successors(Some(1.0), |p| Some(p * 2.0)).take_while(|&p| p < cfg.p_schedule[0]).collect();
    g.extend(cfg.p_schedule.iter().copied());
    g
}

fn cmd_check(inputs: &mut Inputs, a: &str, b: &str, property: Property, slack: Option<f64>, cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let mats = inputs.load_all(&[a.to_string(), b.to_string()])?;
    let (a, b) = (&mats[0], &mats[1]);
    let slack = slack.unwrap_or(1e-10 * a.dim() as f64);
    let grid = check_grid(cfg);
    let (holds, detail) = match property {
        Property::Alt => {
            let r = check_alt_monotonicity(a, b, &grid, slack)?;
            (r.holds, monotonicity_json(&r))
        }
        Property::Gm => {
            let r = check_gm_monotonicity(a, b, &grid, slack)?;
            (r.holds, monotonicity_json(&r))
        }
        Property::Sandwich => {
            let mut all = true;
            let mut rows = Vec::new();
            for &p in &grid {
                let z = SpectrumVector::from_unsorted(z_p_eigenvalues_numeric(a, b, p)?)?;
                let g = SpectrumVector::from_unsorted(g_p_spectrum(a, b, p)?.eigenvalues)?;
                let rz = gelfand_naimark_sandwich(a, b, &z, slack)?;
                let rg = gelfand_naimark_sandwich(a, b, &g, slack)?;
                all &= rz.holds && rg.holds;
                rows.push(json!({"p": p, "z_p": rz.holds, "g_p": rg.holds}));
            }
            (all, json!({"holds": all, "points": rows}))
        }
        Property::Maximal => {
            let v = check_maximal(a, b, cfg.minor_tol, cfg.spec_tol)?;
            (v.holds, verdict_json(&v))
        }
    };
    let v = json!({"command": "check", "property": format!("{property:?}").to_lowercase(), "holds": holds, "slack": slack, "detail": detail});
    emit(out, &finish(v, cfg))?;
    Ok(if holds { EXIT_OK } else { EXIT_FAIL })
}

struct SweepRow {
    seed: u64,
    p: f64,
    logs: Vec<f64>,
    residual: f64,
}

#[allow(clippy::too_many_arguments)]
fn cmd_sweep(
    kind: SweepKind,
    count: usize,
    dim: usize,
    lo: f64,
    hi: f64,
    summary: Option<&str>,
    cfg: &RunConfig,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    if count == 0 || dim == 0 {
        return Err(CliError { code: EXIT_DIMENSION, message: "--count and --dim must be positive".into() });
    }
    let spec = SpectrumSpec::LogUniform { lo, hi };
    let tol = cfg.tolerances();
    let schedule = cfg.p_schedule.clone();
    let per_seed: Vec<(Vec<SweepRow>, Value)> = (0..count as u64)
        .into_par_iter()
        .map(|i| -> Result<_, CliError> {
            let seed = cfg.seed.wrapping_add(i);
            let mut r = rng(seed, 0);
            let a = random_psd_with(&mut r, dim, &spec)?;
            let b = random_psd_with(&mut r, dim, &spec)?;
            let (spectra, residuals, monotone) = match kind {
                SweepKind::Zp => {
                    let lim = limit_matrix_multi(&[a.clone(), b.clone()], &Tolerances { verify_grid: schedule.clone(), ..tol.clone() })?;
                    let spectra: Vec<Vec<LogValue>> = schedule.iter().map(|&p| z_p_eigenvalues_numeric(&a, &b, p)).collect::<Result<_, _>>()?;
                    let rep = check_alt_monotonicity(&a, &b, &schedule, 1e-10 * dim as f64)?;
                    (spectra, lim.diagnostics.iter().map(|d| d.relative).collect::<Vec<_>>(), rep.holds)
                }
                SweepKind::Gp => {
                    let specs: Vec<_> = schedule.iter().map(|&p| g_p_spectrum(&a, &b, p)).collect::<Result<_, _>>()?;
                    let mats: Vec<CMatrix> = specs.iter().map(|s| s.to_psd().to_matrix()).collect();
                    let mut res = vec![f64::NAN];
                    res.extend(mats.windows(2).map(|w| op_norm(&(&w[1] - &w[0]))));
                    let rep = check_gm_monotonicity(&a, &b, &schedule, 1e-10 * dim as f64)?;
                    (specs.into_iter().map(|s| s.eigenvalues).collect(), res, rep.holds)
                }
            };
            let score = if schedule.len() >= 3 {
                extrapolate(&ConvergenceTrace::new(schedule.clone(), spectra.clone(), None)?)?.score
            } else {
                f64::NAN
            };
            let rows = schedule
                .iter()
                .zip(spectra.iter().zip(&residuals))
                .map(|(&p, (s, &res))| SweepRow { seed, p, logs: s.iter().map(|v| v.logmag()).collect(), residual: res })
                .collect();
            Ok((rows, json!({"seed": seed, "monotone": monotone, "convergence_score": num(score)})))
        })
        .collect::<Result<_, _>>()?;

    let rows: Vec<&SweepRow> = per_seed.iter().flat_map(|(r, _)| r.iter()).collect();
    let io = |e: std::io::Error| CliError { code: EXIT_FAIL, message: e.to_string() };
    if cfg.format == Some(Format::Json) {
        let v: Vec<Value> = rows
            .iter()
            .map(|r| json!({"seed": r.seed, "p": r.p, "ln_eigenvalues": r.logs.iter().map(|&x| num(x)).collect::<Vec<_>>(), "residual": num(r.residual)}))
            .collect();
        emit(out, &json!(v))?;
    } else {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["seed".to_string(), "p".to_string()];
        header.extend((1..=dim).map(|k| format!("ln_lambda_{k}")));
        header.push("residual".into());
        w.write_record(&header).expect("in-memory csv");
        for r in &rows {
            let mut rec = vec![r.seed.to_string(), r.p.to_string()];
            rec.extend(r.logs.iter().map(|x| x.to_string()));
            rec.push(r.residual.to_string());
            w.write_record(&rec).expect("in-memory csv");
        }
        out.write_all(&w.into_inner().expect("in-memory csv")).map_err(io)?;
    }
    let seeds: Vec<Value> = per_seed.iter().map(|(_, s)| s.clone()).collect();
    let all = seeds.iter().all(|s| s["monotone"] == json!(true));
    let kind_name = match kind {
        SweepKind::Zp => "zp",
        SweepKind::Gp => "gp",
    };
    let v = finish(json!({"command": "sweep", "kind": kind_name, "dim": dim, "count": count, "all_monotone": all, "seeds": seeds}), cfg);
    match summary {
        Some(path) => fs::write(path, serde_json::to_string_pretty(&v).expect("reports serialize") + "\n").map_err(io)?,
        None => emit(err, &v)?,
    }
    Ok(EXIT_OK)
}

fn mean_spec(mean: MeanName, alpha: f64) -> Result<OperatorMeanSpec, Error> {
    match mean {
        MeanName::Arithmetic => OperatorMeanSpec::arithmetic(alpha),
        MeanName::Harmonic => OperatorMeanSpec::harmonic(alpha),
        MeanName::Geometric => Ok(OperatorMeanSpec::geometric()),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_means(
    inputs: &mut Inputs,
    a: &str,
    b: &str,
    mean: MeanName,
    alpha: f64,
    direction: Direction,
    normalization: NormalizationArg,
    cfg: &RunConfig,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let mats = inputs.load_all(&[a.to_string(), b.to_string()])?;
    let (a, b) = (&mats[0], &mats[1]);
    let sigma = mean_spec(mean, alpha)?;
    let mut v = json!({"command": "means", "mean": sigma.name, "alpha": sigma.alpha});
    match direction {
        Direction::P0 => {
            let norm = match (normalization, mean) {
                (NormalizationArg::One, _) => Normalization::OneOverP,
                (NormalizationArg::Two, _) | (NormalizationArg::Auto, MeanName::Geometric) => Normalization::TwoOverP,
                (NormalizationArg::Auto, _) => Normalization::OneOverP,
            };
            let lim = weighted_lt_limit(a, b, &sigma, norm)?;
            let check_p = 1e-3;
            let finite = mean_power(a, b, &sigma, check_p, norm.exponent())?;
            v["direction"] = json!("p0");
            v["normalization"] = json!(if norm == Normalization::OneOverP { "1/p" } else { "2/p" });
            v["limit_matrix"] = matrix_json(&lim.to_matrix());
            v["eigenvalues"] = json!(lim.eigenvalues().iter().map(|&x| num(x)).collect::<Vec<_>>());
            v["finite_p_check"] = json!({"p": check_p, "residual": num(op_norm(&(finite.to_matrix() - lim.to_matrix())))});
        }
        Direction::Pinf => {
            v["direction"] = json!("pinf");
            match mean {
                MeanName::Arithmetic | MeanName::Harmonic => {
                    let sup = mean == MeanName::Arithmetic;
                    let r = if sup { spectral_sup(a, b, &cfg.p_schedule)? } else { spectral_inf(a, b, &cfg.p_schedule)? };
                    let lm = r.limit.to_matrix();
                    let dominance = if sup {
                        loewner_le(&a.to_matrix(), &lm, 1e-8 * lm.norm()) && loewner_le(&b.to_matrix(), &lm, 1e-8 * lm.norm())
                    } else {
                        loewner_le(&lm, &a.to_matrix(), 1e-8 * a.max_eigenvalue()) && loewner_le(&lm, &b.to_matrix(), 1e-8 * b.max_eigenvalue())
                    };
                    v["limit_matrix"] = matrix_json(&lm);
                    v["eigenvalues"] = json!(r.limit.eigenvalues().iter().map(|&x| num(x)).collect::<Vec<_>>());
                    v["loewner_check"] = json!(dominance);
                    v["cauchy_increments"] = json!(r.increments.iter().map(|&x| num(x)).collect::<Vec<_>>());
                }
                MeanName::Geometric => {
                    if a.dim() == 2 {
                        let g = g_p_limit_2x2(a, b)?;
                        v["limit_matrix"] = matrix_json(&g.matrix.to_matrix());
                        v["eigenvalues"] = json!([num(g.eigenvalues.0), num(g.eigenvalues.1)]);
                        v["branch"] = json!(format!("{:?}", g.branch));
                        v["normalization_derived"] = json!(g.normalization_derived);
                    } else {
                        let e = g_limit_estimate(a, b, &cfg.p_schedule)?;
                        v["heuristic_matrix"] = matrix_json(&e.matrix);
                        v["eigenvalues"] = json!(e.eigenvalues.iter().map(logvalue_json).collect::<Vec<_>>());
                        v["monotone"] = json!(e.monotone);
                        v["cauchy"] = json!(e.cauchy.iter().map(|&x| num(x)).collect::<Vec<_>>());
                        v["convergence_score"] = num(e.score);
                        v["heuristic"] = json!(e.heuristic);
                    }
                }
            }
        }
    }
    emit(out, &finish(v, cfg))?;
    Ok(EXIT_OK)
}

fn cmd_renyi(inputs: &mut Inputs, rho: &str, sigma: &str, alpha: f64, z: f64, cfg: &RunConfig, out: &mut dyn Write) -> Result<i32, CliError> {
    let mats = inputs.load_all(&[rho.to_string(), sigma.to_string()])?;
    let d = renyi_divergence(&mats[0], &mats[1], alpha, z)?;
    if cfg.format == Some(Format::Csv) {
        let text = if d == f64::INFINITY { "+inf".to_string() } else { d.to_string() };
        writeln!(out, "{text}").map_err(|e| CliError { code: EXIT_FAIL, message: e.to_string() })?;
    } else {
        emit(out, &finish(json!({"command": "renyi", "alpha": alpha, "z": z, "value": num(d)}), cfg))?;
    }
    Ok(EXIT_OK)
}

fn configure_threads() {
    if let Some(n) = std::env::var("ANTITROTTER_THREADS").ok().and_then(|s| s.trim().parse::<usize>().ok()).filter(|&n| n > 0) {
        // a pool may already exist when run repeatedly in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Run with explicit streams; returns the exit code.
pub fn run<I, T>(args: I, stdin: &mut dyn Read, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_PARSE;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    configure_threads();
    let cfg = match RunConfig::from_args(&cli.config) {
        Ok(c) => c,
        Err(m) => {
            let _ = writeln!(err, "error: {m}");
            return EXIT_PARSE;
        }
    };
    let mut inputs = Inputs { stdin, used_stdin: false };
    let result = match &cli.command {
        Command::Limit { inputs: paths, maximal } => cmd_limit(&mut inputs, paths, *maximal, &cfg, out),
        Command::Check { a, b, property, slack } => cmd_check(&mut inputs, a, b, *property, *slack, &cfg, out),
        Command::Sweep { kind, count, dim, lo, hi, summary } => {
            cmd_sweep(*kind, *count, *dim, *lo, *hi, summary.as_deref(), &cfg, out, err)
        }
        Command::Means { a, b, mean, alpha, direction, normalization } => {
            cmd_means(&mut inputs, a, b, *mean, *alpha, *direction, *normalization, &cfg, out)
        }
        Command::Renyi { rho, sigma, alpha, z } => cmd_renyi(&mut inputs, rho, sigma, *alpha, *z, &cfg, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_file_round_trip() {
        let text = r#"{"d":2,"entries":[[[5.0,0.0],[4.0,0.0]],[[4.0,0.0],[5.0,0.0]]]}"#;
        let f = MatrixFile::parse(text).unwrap();
        assert_eq!(f.to_json(), text);
        let m = f.to_psd().unwrap();
        assert!((m.eigenvalues()[0] - 9.0).abs() < 1e-12);
        let s = MatrixFile::from_psd(&m, true);
        assert_eq!(MatrixFile::parse(&s.to_json()).unwrap(), s);
        assert!(MatrixFile::parse(r#"{"d":2}"#).is_err());
        assert!(MatrixFile::parse(r#"{"d":2,"entries":[[[1.0,0.0]]]}"#).unwrap().to_psd().is_err());
    }

    #[test]
    fn exit_codes() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut empty = std::io::empty();
        assert_eq!(run(["antitrotter", "limit", "only-one"], &mut empty, &mut out, &mut err), EXIT_PARSE);
        assert_eq!(run(["antitrotter", "sweep", "--p-points", "0"], &mut empty, &mut out, &mut err), EXIT_PARSE);
        assert_eq!(run(["antitrotter", "limit", "/nonexistent/a", "/nonexistent/b"], &mut empty, &mut out, &mut err), EXIT_PARSE);
        assert_eq!(CliError::from(Error::QNotRankOne { k: 1, ratio: 0.5 }).code, EXIT_Q_NOT_RANK_ONE);
        assert_eq!(CliError::from(Error::DimensionMismatch { expected: 2, found: 3 }).code, EXIT_DIMENSION);
        assert_eq!(CliError::from(Error::BadSpectrum("x".into())).code, EXIT_DIMENSION);
    }
}
