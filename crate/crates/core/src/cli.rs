//! Command-line surface: `ct`, `fejer`, `extremal`, `bound` and `job`.
//!
//! Every JSON argument is either inline JSON or a path to a JSON file.
//! Complex numbers are `[re, im]` pairs and floats are written with 17
//! significant digits. Exit codes: 0 success, 2 input error, 3 a negative
//! answer (`Outside`, or not nonnegative), 1 numerical failure.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::caratheodory::{self, Classification};
use crate::error::Error;
use crate::extremal::{self, build_candidate, rotate_to_positive, verify_conditions};
use crate::optimizer::{self, SearchConfig, SearchResult};
use crate::series::{AtomSet, CoeffVec};
use crate::trig_poly::{self, TrigPoly};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERIC: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NEGATIVE: i32 = 3;

/// Samples in the `extremal --emit-profile` CSV and the `fejer` residual grid.
pub const PROFILE_POINTS: usize = 4096;

#[derive(Debug, Parser)]
#[command(
    name = "krzyz",
    version,
    about = "Coefficient-body tests, Fejer-Riesz factors and extremal search"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Toeplitz minors and coefficient-body classification
    Ct(CtArgs),
    /// Fejer-Riesz factor of a nonnegative trigonometric polynomial
    Fejer(FejerArgs),
    /// Optimality conditions for an atomic candidate
    Extremal(ExtremalArgs),
    /// Multi-start search for max |f_n|
    Bound(BoundArgs),
    /// Run a command described by a JSON job file
    Job { file: PathBuf },
}

#[derive(Debug, Args)]
pub struct CtArgs {
    /// {"h": [[re, im], ...]} inline or as a file path
    #[arg(long)]
    pub coeffs: String,
    #[arg(long, default_value_t = caratheodory::DEFAULT_TOL)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct FejerArgs {
    /// {"a0": r, "terms": [[a_k, b_k], ...]} inline or as a file path
    #[arg(long)]
    pub trig: String,
}

#[derive(Debug, Args)]
pub struct ExtremalArgs {
    /// {"atoms": [[alpha, phi], ...]} inline or as a file path
    #[arg(long)]
    pub atoms: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = extremal::DEFAULT_TOL)]
    pub tol: f64,
    /// Write (phi, Re H) samples as CSV
    #[arg(long)]
    pub emit_profile: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BoundArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 200)]
    pub restarts: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// SearchResult JSON destination
    #[arg(long)]
    pub out: PathBuf,
    /// Per-iteration objective values as CSV
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Maximum number of atoms in random starts (default n)
    #[arg(long)]
    pub m_max: Option<usize>,
    #[arg(long, default_value_t = 500)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-12)]
    pub ftol: f64,
}

/// Job file: one command with its parameters; unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "command", rename_all = "lowercase")]
pub enum JobFile {
    Ct(CtJob),
    Fejer(FejerJob),
    Extremal(ExtremalJob),
    Bound(BoundJob),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CtJob {
    pub h: Vec<[f64; 2]>,
    #[serde(default = "default_ct_tol")]
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FejerJob {
    pub a0: f64,
    #[serde(default)]
    pub terms: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtremalJob {
    pub atoms: AtomSet,
    pub n: usize,
    #[serde(default = "default_extremal_tol")]
    pub tol: f64,
    pub emit_profile: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundJob {
    pub n: usize,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub out: PathBuf,
    pub trace: Option<PathBuf>,
    pub m_max: Option<usize>,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_ftol")]
    pub ftol: f64,
}

fn default_ct_tol() -> f64 {
    caratheodory::DEFAULT_TOL
}
fn default_extremal_tol() -> f64 {
    extremal::DEFAULT_TOL
}
fn default_restarts() -> usize {
    200
}
fn default_seed() -> u64 {
    42
}
fn default_max_iters() -> usize {
    500
}
fn default_ftol() -> f64 {
    1e-12
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CoeffInput {
    h: Vec<[f64; 2]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AtomInput {
    atoms: AtomSet,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::NotNonnegative { .. } => EXIT_NEGATIVE,
            Error::Conditioning(_) | Error::Numeric(_) | Error::CannotNormalize | Error::Nondifferentiable => {
                EXIT_NUMERIC
            }
            _ => EXIT_INPUT,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (including the program name), runs the command writing its
/// report to `out`, and returns the exit code. Errors go to stderr.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> CliResult<i32> {
    match command {
        Command::Ct(a) => {
            let input: CoeffInput = read_json(&a.coeffs)?;
            ct(&input.h, a.tol, out)
        }
        Command::Fejer(a) => {
            let t: TrigPoly = read_json(&a.trig)?;
            fejer(t, out)
        }
        Command::Extremal(a) => {
            let input: AtomInput = read_json(&a.atoms)?;
            extremal_verify(&input.atoms, a.n, a.tol, a.emit_profile.as_deref(), out)
        }
        Command::Bound(a) => {
            let mut cfg = SearchConfig::new(a.n);
            cfg.restarts = a.restarts;
            cfg.seed = a.seed;
            cfg.m_max = a.m_max.unwrap_or(a.n);
            cfg.max_iters = a.max_iters;
            cfg.ftol = a.ftol;
            bound(&cfg, &a.out, a.trace.as_deref(), out)
        }
        Command::Job { file } => {
            let text = fs::read_to_string(&file)
                .map_err(|e| CliError::input(format!("cannot read {}: {e}", file.display())))?;
            let job: JobFile =
                serde_json::from_str(&text).map_err(|e| CliError::input(format!("invalid job file: {e}")))?;
            run_job(job, out)
        }
    }
}

pub fn run_job(job: JobFile, out: &mut dyn Write) -> CliResult<i32> {
    match job {
        JobFile::Ct(j) => ct(&j.h, j.tol, out),
        JobFile::Fejer(j) => fejer(TrigPoly::new(j.a0, j.terms)?, out),
        JobFile::Extremal(j) => extremal_verify(&j.atoms, j.n, j.tol, j.emit_profile.as_deref(), out),
        JobFile::Bound(j) => {
            let mut cfg = SearchConfig::new(j.n);
            cfg.restarts = j.restarts;
            cfg.seed = j.seed;
            cfg.m_max = j.m_max.unwrap_or(j.n);
            cfg.max_iters = j.max_iters;
            cfg.ftol = j.ftol;
            bound(&cfg, &j.out, j.trace.as_deref(), out)
        }
    }
}

/// Accepts inline JSON (first non-blank character `{` or `[`) or a file path.
fn read_json<T: serde::de::DeserializeOwned>(arg: &str) -> CliResult<T> {
    let trimmed = arg.trim_start();
    let text = if trimmed.starts_with('{') || trimmed.starts_with('[') {
        arg.to_string()
    } else {
        fs::read_to_string(arg).map_err(|e| CliError::input(format!("cannot read {arg}: {e}")))?
    };
    serde_json::from_str(&text).map_err(|e| CliError::input(format!("malformed input: {e}")))
}

fn ct(h: &[[f64; 2]], tol: f64, out: &mut dyn Write) -> CliResult<i32> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CliError::input("tol must be positive"));
    }
    let h = CoeffVec::new(h.iter().map(|&[re, im]| Complex64::new(re, im)).collect())?;
    let report = caratheodory::toeplitz_minors(&h, tol)?;
    emit(out, &report)?;
    Ok(match report.classification {
        Classification::Outside => EXIT_NEGATIVE,
        _ => EXIT_OK,
    })
}

#[derive(Serialize)]
struct FejerOutput {
    p: Vec<[f64; 2]>,
    max_residual: f64,
}

fn fejer(t: TrigPoly, out: &mut dyn Write) -> CliResult<i32> {
    let t = TrigPoly::new(t.a0, t.terms)?;
    let factor = trig_poly::fejer_riesz(&t)?;
    let max_residual = (0..PROFILE_POINTS)
        .map(|i| {
            let phi = std::f64::consts::TAU * i as f64 / PROFILE_POINTS as f64;
            (factor.eval(Complex64::from_polar(1.0, phi)).norm_sqr() - t.eval(phi)).abs()
        })
        .fold(0.0, f64::max);
    let p = factor.coeffs().iter().map(|c| [c.re, c.im]).collect();
    emit(out, &FejerOutput { p, max_residual })?;
    Ok(EXIT_OK)
}

fn extremal_verify(atoms: &AtomSet, n: usize, tol: f64, profile: Option<&Path>, out: &mut dyn Write) -> CliResult<i32> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(CliError::input("tol must be positive"));
    }
    let candidate = build_candidate(atoms, n)?;
    // conditions are stated for {f}_n >= 0; leave a vanishing leading coefficient alone
    let candidate = match rotate_to_positive(&candidate) {
        Ok(c) => c,
        Err(Error::CannotNormalize) => candidate,
        Err(e) => return Err(e.into()),
    };
    let report = verify_conditions(&candidate, tol);
    if let Some(path) = profile {
        let mut csv = String::from("phi,reH\n");
        for (phi, value) in candidate.real_part_on_circle().profile(PROFILE_POINTS) {
            csv.push_str(&format!("{phi:e},{value:e}\n"));
        }
        write_file(path, csv.as_bytes())?;
    }
    emit(out, &report)?;
    Ok(EXIT_OK)
}

fn bound(cfg: &SearchConfig, json_out: &Path, trace: Option<&Path>, out: &mut dyn Write) -> CliResult<i32> {
    let result = with_thread_pool(|| optimizer::search(cfg))??;
    write_file(json_out, to_json(&result)?.as_bytes())?;
    if let Some(path) = trace {
        write_file(path, trace_csv(&result).as_bytes())?;
    }
    writeln!(
        out,
        "n={} best={} gap={}",
        cfg.n, result.best_value, result.gap_to_conjecture
    )
    .map_err(|e| CliError {
        code: EXIT_NUMERIC,
        message: e.to_string(),
    })?;
    Ok(EXIT_OK)
}

fn trace_csv(result: &SearchResult) -> String {
    let mut csv = String::from("restart,iter,value\n");
    for record in &result.per_restart {
        for (iter, value) in record.trace.iter().enumerate() {
            csv.push_str(&format!("{},{iter},{value:e}\n", record.restart));
        }
    }
    csv
}

/// Runs `f` on a pool capped by `KRZYZ_THREADS` when it is set.
fn with_thread_pool<T: Send>(f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let Ok(value) = std::env::var("KRZYZ_THREADS") else {
        return Ok(f());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::input(format!("KRZYZ_THREADS must be a positive integer, got {value:?}")))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError {
            code: EXIT_NUMERIC,
            message: e.to_string(),
        })?;
    Ok(pool.install(f))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> CliResult<()> {
    let text = to_json(value)?;
    writeln!(out, "{text}").map_err(|e| CliError {
        code: EXIT_NUMERIC,
        message: e.to_string(),
    })
}

/// Writes floats as `{:.16e}` so every value carries 17 significant digits.
struct PreciseFloats;

impl serde_json::ser::Formatter for PreciseFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> CliResult<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, PreciseFloats);
    value.serialize(&mut ser).map_err(|e| CliError {
        code: EXIT_NUMERIC,
        message: e.to_string(),
    })?;
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String) {
        let mut out = Vec::new();
        let code = run(std::iter::once("krzyz").chain(args.iter().copied()), &mut out);
        (code, String::from_utf8(out).unwrap())
    }

    #[test]
    fn floats_have_seventeen_digits() {
        let s = to_json(&vec![1.0f64, 0.1, -2.5e-300]).unwrap();
        assert_eq!(
            s,
            "[1.0000000000000000e0,1.0000000000000001e-1,-2.5000000000000000e-300]"
        );
        let back: Vec<f64> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, vec![1.0, 0.1, -2.5e-300]);
    }

    #[test]
    fn ct_examples() {
        let (code, out) = run_capture(&["ct", "--coeffs", r#"{"h": [[1,0],[2,0]]}"#]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["classification"], "Boundary(1)");
        assert_eq!(v["minors"].as_array().unwrap().len(), 1);
        assert!(v["minors"][0].as_f64().unwrap().abs() < 1e-12);

        let (code, out) = run_capture(&["ct", "--coeffs", r#"{"h": [[1,0],[0,0],[-2,0]]}"#]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["classification"], "Boundary(2)");
        assert!((v["minors"][0].as_f64().unwrap() - 4.0).abs() < 1e-12);
        assert!(v["minors"][1].as_f64().unwrap().abs() < 1e-12);

        let (code, _) = run_capture(&["ct", "--coeffs", r#"{"h": [[1,0],[3,0]]}"#]);
        assert_eq!(code, 3);
    }

    #[test]
    fn ct_input_errors() {
        for bad in [
            r#"{"h": [[1,0],[2]]}"#,
            r#"{"h": []}"#,
            r#"{"h": [[-1,0]]}"#,
            r#"{"x": 1}"#,
            "{",
        ] {
            assert_eq!(run_capture(&["ct", "--coeffs", bad]).0, 2, "{bad}");
        }
        assert_eq!(run_capture(&["ct", "--coeffs", "/nonexistent/file.json"]).0, 2);
        assert_eq!(run_capture(&["ct"]).0, 2);
    }

    #[test]
    fn fejer_examples() {
        let (code, out) = run_capture(&["fejer", "--trig", r#"{"a0": 1, "terms": [[1, 0]]}"#]);
        assert_eq!(code, 0);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        for k in 0..2 {
            assert!((v["p"][k][0].as_f64().unwrap() - h).abs() < 1e-9);
            assert!(v["p"][k][1].as_f64().unwrap().abs() < 1e-9);
        }
        assert!(v["max_residual"].as_f64().unwrap() < 1e-9);

        let (_, out) = run_capture(&["fejer", "--trig", r#"{"a0": 4, "terms": []}"#]);
        let v: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["p"].as_array().unwrap().len(), 1);
        assert!((v["p"][0][0].as_f64().unwrap() - 2.0).abs() < 1e-15);

        let (code, _) = run_capture(&["fejer", "--trig", r#"{"a0": 1, "terms": [[2, 0]]}"#]);
        assert_eq!(code, 3);
        let (code, _) = run_capture(&["fejer", "--trig", r#"{"a0": 1, "terms": [[1, 0]], "extra": 0}"#]);
        assert_eq!(code, 2);
    }

    #[test]
    fn job_file_dispatch() {
        let job: JobFile = serde_json::from_str(r#"{"command": "ct", "h": [[1,0],[2,0]]}"#).unwrap();
        let mut out = Vec::new();
        assert_eq!(run_job(job, &mut out).unwrap(), 0);
        assert!(serde_json::from_str::<JobFile>(r#"{"command": "ct", "h": [[1,0]], "bogus": 1}"#).is_err());
        assert!(serde_json::from_str::<JobFile>(r#"{"command": "nope"}"#).is_err());
    }
}
