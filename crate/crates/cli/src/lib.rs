//! Library side of the `structune` command. Every subcommand is a plain
//! function returning its stdout text, so the binary and the tests drive
//! the same code.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde_json::json;

use structune::io::{parse_program, parse_system, result_json, status_name};
use structune::norms::{h2_norm, hinf_norm, DEFAULT_HINF_TOL};
use structune::program::{solve, SolveOptions, SynthStatus};
use structune::structure::InitStrategy;
use structune::Error;

pub mod demo;

pub use demo::{wave_demo, DemoConfig, DemoReport, GainsOverride};

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const UNSTABLE: i32 = 3;
    pub const INFEASIBLE: i32 = 4;
    pub const UNSTABILIZABLE: i32 = 5;
}

/// Maps a library error to the exit code of the command that hit it.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_) => exit::PARSE,
        Error::Unstable(_)
        | Error::IllPosed
        | Error::NonzeroFeedthrough
        | Error::ResolventSingular(_)
        | Error::SingularR
        | Error::DimensionMismatch(_)
        | Error::InvalidArgument(_)
        | Error::BoundViolation { .. }
        | Error::MissingScheduleValue
        | Error::QEqualsOne
        | Error::NonFinite(_)
        | Error::AlgebraicLoop
        | Error::StepTooLarge { .. }
        | Error::CflViolation(_) => exit::UNSTABLE,
        Error::InfeasibleHard(_) => exit::INFEASIBLE,
        Error::Unstabilizable => exit::UNSTABILIZABLE,
        _ => exit::FAILURE,
    }
}

/// A failed command: exit code plus a stage-labeled message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: i32,
    pub stage: String,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, stage: &str, message: impl Into<String>) -> Self {
        Self {
            code,
            stage: stage.into(),
            message: message.into(),
        }
    }

    pub fn from_lib(stage: &str, e: Error) -> Self {
        Self::new(exit_code(&e), stage, e.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub(crate) fn read_text(path: &Path, stage: &str) -> CliResult<String> {
    fs::read_to_string(path)
        .map_err(|e| CliError::new(exit::PARSE, stage, format!("{}: {e}", path.display())))
}

pub(crate) fn write_text(path: &Path, text: &str, stage: &str) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::new(exit::FAILURE, stage, format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text)
        .map_err(|e| CliError::new(exit::FAILURE, stage, format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum NormKind {
    H2,
    Hinf,
}

/// `norm`: the value with 10 digits on the first line; for H∞ a second
/// line carries the peak frequency (`inf` when attained at ω = ∞).
pub fn cmd_norm(path: &Path, kind: NormKind, tol: Option<f64>) -> CliResult<String> {
    let text = read_text(path, "norm")?;
    let sys = parse_system(&text).map_err(|e| CliError::from_lib("norm", e))?;
    match kind {
        NormKind::H2 => {
            let v = h2_norm(&sys).map_err(|e| CliError::from_lib("norm", e))?;
            Ok(format!("{v:.10}\n"))
        }
        NormKind::Hinf => {
            let r = hinf_norm(&sys, tol.unwrap_or(DEFAULT_HINF_TOL))
                .map_err(|e| CliError::from_lib("norm", e))?;
            let peak = match r.peak_frequencies.first() {
                Some(w) => format!("{w:.10}"),
                None => "inf".to_string(),
            };
            Ok(format!("{:.10}\npeak_frequency {peak}\n", r.value))
        }
    }
}

/// Optional knobs shared by the synthesis commands.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SynthOverrides {
    /// Random start drawn from this seed when the program carries no `x0`.
    pub seed: Option<u64>,
    pub tol_gap: Option<f64>,
    pub tol_step: Option<f64>,
    pub cert_tol: Option<f64>,
    pub max_serious: Option<usize>,
}

impl SynthOverrides {
    pub fn options(&self, x0: Option<DVector<f64>>) -> SolveOptions<f64> {
        let init = match (x0, self.seed) {
            (Some(x), _) => InitStrategy::Given(x),
            (None, Some(s)) => InitStrategy::Random(s),
            (None, None) => InitStrategy::Zeros,
        };
        let mut o = SolveOptions {
            init,
            ..SolveOptions::default()
        };
        if let Some(v) = self.tol_gap {
            o.bundle.tol_gap = v;
        }
        if let Some(v) = self.tol_step {
            o.bundle.tol_step = v;
        }
        if let Some(v) = self.cert_tol {
            o.cert_tol = v;
        }
        if let Some(v) = self.max_serious {
            o.bundle.max_serious = v;
        }
        o
    }
}

pub fn status_exit_code(s: SynthStatus) -> i32 {
    match s {
        SynthStatus::LocalOptimum | SynthStatus::Feasible => exit::OK,
        SynthStatus::InfeasibleHard => exit::INFEASIBLE,
        SynthStatus::Unstabilizable => exit::UNSTABILIZABLE,
    }
}

/// Outcome of `synth`: stdout text and the exit code derived from the
/// final status.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutcome {
    pub stdout: String,
    pub code: i32,
    pub result_path: PathBuf,
    pub history_path: PathBuf,
}

/// `synth`: solves the program in `path`, writes `result.json` and
/// `history.csv` into `out`.
pub fn cmd_synth(path: &Path, out: &Path, overrides: &SynthOverrides) -> CliResult<SynthOutcome> {
    let text = read_text(path, "synth")?;
    let pj = parse_program(&text).map_err(|e| CliError::from_lib("synth", e))?;
    let program = pj
        .to_program()
        .map_err(|e| CliError::from_lib("synth", e))?;
    let opts = overrides.options(pj.initial_point());
    let res = solve(&program, &opts).map_err(|e| CliError::from_lib("synth", e))?;
    let mut doc = result_json(&res);
    doc["history"] = json!("history.csv");
    let result_path = out.join("result.json");
    let history_path = out.join("history.csv");
    write_text(&result_path, &pretty(&doc), "synth")?;
    write_text(&history_path, &res.history_csv(), "synth")?;
    let x: Vec<String> = res.x_star.x.iter().map(|v| format!("{v:.10}")).collect();
    let stdout = format!(
        "status {}\nf {:.10}\ng {:.10}\nx [{}]\n",
        status_name(res.status),
        res.f_star,
        res.g_star,
        x.join(", ")
    );
    Ok(SynthOutcome {
        stdout,
        code: status_exit_code(res.status),
        result_path,
        history_path,
    })
}

pub(crate) fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

/// Worker count requested through `STRUCTUNE_THREADS`, if any.
pub fn threads_from_env(value: Option<&str>) -> CliResult<Option<usize>> {
    match value {
        None => Ok(None),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::new(
                exit::PARSE,
                "environment",
                format!("STRUCTUNE_THREADS must be a positive integer, got {v:?}"),
            )),
        },
    }
}
