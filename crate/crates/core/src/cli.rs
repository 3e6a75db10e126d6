//! Experiment configuration, orchestration, and serialization.
//!
//! Configs are JSON with fixed key names; traces and sweep reports come out
//! as CSV with fixed column orders. Numeric fields are printed in Rust's
//! shortest round-trip form, so identical configs on an identical build give
//! byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{max_deviation, run_agents, run_matrix, Algorithm, Trace};
use crate::graph::{format_graph, parse_schedule, ModelFamily};
use crate::metrics::{
    applicable_bound, convergence_time, sweep, ConvergenceTime, InputSpec, SweepSpec,
};
use crate::spectral::{diameter, weighted_variance, WeightVector};
use crate::verify::{run_all, SuiteOutcome};

/// Tolerance for the optional agent/matrix cross-check in `run`.
pub const EQUIVALENCE_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    OutputWrite {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config is not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Validation(String),
    #[error("schedule file {path}: {message}")]
    Schedule { path: PathBuf, message: String },
    #[error("agent and matrix paths deviate by {deviation:e} (tolerance {EQUIVALENCE_TOL:e})")]
    EquivalenceFailed { deviation: f64 },
}

impl CliError {
    fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    /// Process exit code this error maps to. Unusable inputs (unreadable or
    /// invalid configs) are 2; runtime failures are 1.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_)
            | CliError::Json(_)
            | CliError::Schedule { .. }
            | CliError::Io { .. } => 2,
            _ => 1,
        }
    }
}

/// Algorithm names accepted in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmName {
    EqualNeighbor,
    MaxWeight,
    MaxMetropolis,
}

impl From<AlgorithmName> for Algorithm {
    fn from(name: AlgorithmName) -> Self {
        match name {
            AlgorithmName::EqualNeighbor => Algorithm::EqualNeighbor,
            AlgorithmName::MaxWeight => Algorithm::MaxWeight,
            AlgorithmName::MaxMetropolis => Algorithm::MaxMetropolis,
        }
    }
}

/// Built-in static topologies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeName {
    Path,
    Cycle,
    Complete,
    Star,
}

/// JSON form of a dynamic-graph model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphDescriptor {
    Static { shape: ShapeName },
    Schedule { file: PathBuf },
    RandomConnected { p: f64 },
    RotatingStar { period: u64 },
    DegreeBurst { burst_round: u64 },
}

impl GraphDescriptor {
    /// Turn the descriptor into a size-generic family, loading schedule
    /// files relative to `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<ModelFamily, CliError> {
        Ok(match self {
            GraphDescriptor::Static { shape } => match shape {
                ShapeName::Path => ModelFamily::StaticPath,
                ShapeName::Cycle => ModelFamily::StaticCycle,
                ShapeName::Complete => ModelFamily::StaticComplete,
                ShapeName::Star => ModelFamily::StaticStar,
            },
            GraphDescriptor::Schedule { file } => {
                let path = if file.is_absolute() {
                    file.clone()
                } else {
                    base_dir.join(file)
                };
                let text = fs::read_to_string(&path).map_err(|source| CliError::Io {
                    path: path.clone(),
                    source,
                })?;
                let graphs = parse_schedule(&text).map_err(|e| CliError::Schedule {
                    path: path.clone(),
                    message: e.to_string(),
                })?;
                ModelFamily::Schedule { graphs }
            }
            GraphDescriptor::RandomConnected { p } => ModelFamily::RandomConnected { p: *p },
            GraphDescriptor::RotatingStar { period } => {
                ModelFamily::RotatingStar { period: *period }
            }
            GraphDescriptor::DegreeBurst { burst_round } => ModelFamily::DegreeBurst {
                burst_round: *burst_round,
            },
        })
    }
}

/// One experiment: an algorithm on one model with one input recipe.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: AlgorithmName,
    pub graph: GraphDescriptor,
    pub n: usize,
    pub mu: InputSpec,
    pub epsilon: f64,
    pub max_rounds: u64,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n < 1 {
            return Err(CliError::validation(format!("n = {} must be at least 1", self.n)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(CliError::validation(format!(
                "epsilon = {} must lie strictly between 0 and 1",
                self.epsilon
            )));
        }
        if self.max_rounds < 1 {
            return Err(CliError::validation("max_rounds must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(CliError::validation("seeds must list at least one seed"));
        }
        if let InputSpec::Explicit(values) = &self.mu {
            if values.len() != self.n {
                return Err(CliError::validation(format!(
                    "mu lists {} values but n = {}",
                    values.len(),
                    self.n
                )));
            }
        }
        Ok(())
    }
}

/// Sweep over the cartesian product of algorithms, models, sizes, and seeds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub algorithms: Vec<AlgorithmName>,
    pub models: Vec<GraphDescriptor>,
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub epsilon: f64,
    pub max_rounds: u64,
    pub mu: InputSpec,
    pub output: PathBuf,
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.algorithms.is_empty() {
            return Err(CliError::validation("algorithms must list at least one algorithm"));
        }
        if self.models.is_empty() {
            return Err(CliError::validation("models must list at least one model"));
        }
        if self.sizes.is_empty() || self.sizes.iter().any(|&n| n < 1) {
            return Err(CliError::validation("sizes must list sizes of at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(CliError::validation("seeds must list at least one seed"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(CliError::validation(format!(
                "epsilon = {} must lie strictly between 0 and 1",
                self.epsilon
            )));
        }
        if self.max_rounds < 1 {
            return Err(CliError::validation("max_rounds must be at least 1"));
        }
        Ok(())
    }
}

fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

fn fmt_opt_u64(x: Option<u64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn fmt_opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// Render a trace as CSV: one row per round from 0 to the horizon.
pub fn trace_to_csv(trace: &Trace) -> String {
    let n = trace.n();
    let uniform = WeightVector::uniform(n);
    let mut out = String::from(
        "round,diameter,variance_uniform,mean,min,max,d_prime_sum,learning_round\n",
    );
    for t in 0..=trace.horizon() {
        let x = trace.estimate(t);
        let mean = x.iter().sum::<f64>() / n as f64;
        let min = x.iter().copied().fold(f64::INFINITY, f64::min);
        let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let d_prime_sum: usize = trace.d_prime(t).iter().sum();
        let learning = u8::from(trace.learning_rounds().contains(&t));
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            t,
            fmt_f64(diameter(x)),
            fmt_f64(weighted_variance(&uniform, x)),
            fmt_f64(mean),
            fmt_f64(min),
            fmt_f64(max),
            d_prime_sum,
            learning
        )
        .expect("writing to String cannot fail");
    }
    out
}

/// Render sweep cells as CSV in their run order.
pub fn cells_to_csv(cells: &[crate::metrics::SweepCell]) -> String {
    let mut out = String::from("algorithm,model,n,seed,epsilon,t_eps,bound,ratio,converged\n");
    for cell in cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            cell.algorithm,
            cell.model,
            cell.n,
            cell.seed,
            fmt_f64(cell.epsilon),
            fmt_opt_u64(cell.t_eps),
            fmt_opt_f64(cell.bound),
            fmt_opt_f64(cell.ratio),
            cell.converged
        )
        .expect("writing to String cannot fail");
    }
    out
}

/// Everything `run` produces before any file is written.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub trace_csv: String,
    pub report_line: String,
    pub converged: bool,
    /// Largest agent/matrix deviation, present when the cross-check ran.
    pub equivalence_deviation: Option<f64>,
}

/// Execute one configured run (the first listed seed) and serialize it.
pub fn cmd_run(
    config: &ExperimentConfig,
    base_dir: &Path,
    check_equivalence: bool,
) -> Result<RunOutcome, CliError> {
    config.validate()?;
    let seed = config.seeds[0];
    let family = config.graph.resolve(base_dir)?;
    let model = family
        .instantiate(config.n, seed)
        .map_err(|e| CliError::validation(format!("graph: {e}")))?;
    let mu: DVector<f64> = config
        .mu
        .realize(config.n, seed)
        .map_err(|e| CliError::validation(format!("mu: {e}")))?;
    let algorithm: Algorithm = config.algorithm.into();
    let trace = run_agents(algorithm, &model, &mu, config.max_rounds);

    let equivalence_deviation = if check_equivalence {
        let matrix_trace = run_matrix(&algorithm.into(), &model, &mu, config.max_rounds);
        let deviation = max_deviation(&trace, &matrix_trace);
        if deviation > EQUIVALENCE_TOL {
            return Err(CliError::EquivalenceFailed { deviation });
        }
        Some(deviation)
    } else {
        None
    };

    let t_eps = convergence_time(&trace, config.epsilon);
    let bound = applicable_bound(algorithm, trace.realized_d_prime(), config.epsilon);
    let ratio = match (t_eps.rounds(), bound) {
        (Some(t), Some(b)) if b > 0.0 => Some(t as f64 / b),
        _ => None,
    };
    let t_eps_text = match t_eps {
        ConvergenceTime::Reached(t) => t.to_string(),
        ConvergenceTime::NotReached => "not-reached".to_string(),
    };
    let report_line = format!(
        "algorithm={} n={} seed={} epsilon={} t_eps={} bound={} ratio={}",
        algorithm.name(),
        config.n,
        seed,
        fmt_f64(config.epsilon),
        t_eps_text,
        bound.map(fmt_f64).unwrap_or_else(|| "na".to_string()),
        ratio.map(fmt_f64).unwrap_or_else(|| "na".to_string()),
    );
    Ok(RunOutcome {
        trace_csv: trace_to_csv(&trace),
        report_line,
        converged: t_eps.rounds().is_some(),
        equivalence_deviation,
    })
}

/// Execute a configured sweep and serialize the report table.
pub fn cmd_sweep(config: &SweepConfig, base_dir: &Path) -> Result<String, CliError> {
    config.validate()?;
    let mut models = Vec::new();
    for descriptor in &config.models {
        models.push(descriptor.resolve(base_dir)?);
    }
    let spec = SweepSpec {
        algorithms: config.algorithms.iter().map(|&a| a.into()).collect(),
        models,
        sizes: config.sizes.clone(),
        seeds: config.seeds.clone(),
        epsilon: config.epsilon,
        max_rounds: config.max_rounds,
        input: config.mu.clone(),
    };
    let cells = sweep(&spec).map_err(|e| CliError::validation(e.to_string()))?;
    Ok(cells_to_csv(&cells))
}

/// Outcome of the verification suites plus the overall verdict.
#[derive(Debug, Clone)]
pub struct VerifyOutcome {
    pub suites: Vec<SuiteOutcome>,
}

impl VerifyOutcome {
    pub fn all_passed(&self) -> bool {
        self.suites.iter().all(SuiteOutcome::passed)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for suite in &self.suites {
            writeln!(
                out,
                "{:<28} {:>6} cases  {:>3} failures{}",
                suite.name,
                suite.cases,
                suite.failures,
                suite
                    .first_failure
                    .as_deref()
                    .map(|d| format!("  ({d})"))
                    .unwrap_or_default()
            )
            .expect("writing to String cannot fail");
        }
        let verdict = if self.all_passed() { "PASS" } else { "FAIL" };
        writeln!(out, "verify: {verdict} ({} suites)", self.suites.len())
            .expect("writing to String cannot fail");
        out
    }
}

/// Run every verification suite.
pub fn cmd_verify(n_max: usize, cases: usize, seed: u64) -> Result<VerifyOutcome, CliError> {
    if n_max < 2 {
        return Err(CliError::validation("n-max must be at least 2"));
    }
    if cases < 1 {
        return Err(CliError::validation("cases must be at least 1"));
    }
    Ok(VerifyOutcome {
        suites: run_all(n_max, cases, seed),
    })
}

/// Print the model's round-`t` graph in the schedule text format.
pub fn cmd_graphgen(
    config: &ExperimentConfig,
    base_dir: &Path,
    round: u64,
) -> Result<String, CliError> {
    config.validate()?;
    if round < 1 {
        return Err(CliError::validation("round must be at least 1"));
    }
    let family = config.graph.resolve(base_dir)?;
    let model = family
        .instantiate(config.n, config.seeds[0])
        .map_err(|e| CliError::validation(format!("graph: {e}")))?;
    Ok(format_graph(&model.generate(round)))
}
