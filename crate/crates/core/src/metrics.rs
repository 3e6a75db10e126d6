//! Convergence-time measurement and the closed-form round bounds.
//!
//! A finite trace cannot certify the ∀τ≥t suffix condition by itself, so a
//! measured convergence time counts only when the trailing safety window is
//! violation-free; convex rules additionally have monotone diameters, which
//! makes the window check conservative rather than load-bearing.

use std::collections::BTreeSet;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{run_matrix, Algorithm, Trace};
use crate::graph::{mix64, ModelError, ModelFamily};
use crate::spectral::diameter;

/// Trailing rounds that must stay below threshold before a convergence time
/// is trusted.
pub const DEFAULT_SAFETY_WINDOW: u64 = 50;

/// Measured convergence round, or the admission that the horizon was too
/// short to certify one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceTime {
    Reached(u64),
    NotReached,
}

impl ConvergenceTime {
    pub fn rounds(&self) -> Option<u64> {
        match self {
            ConvergenceTime::Reached(t) => Some(*t),
            ConvergenceTime::NotReached => None,
        }
    }
}

/// Earliest round after which the diameter stays at or below ε·diam(μ),
/// certified by a trailing window of `DEFAULT_SAFETY_WINDOW` clean rounds.
pub fn convergence_time(trace: &Trace, epsilon: f64) -> ConvergenceTime {
    convergence_time_with_window(trace, epsilon, DEFAULT_SAFETY_WINDOW)
}

/// [`convergence_time`] with an explicit safety window (≥ 1).
pub fn convergence_time_with_window(
    trace: &Trace,
    epsilon: f64,
    window: u64,
) -> ConvergenceTime {
    assert!(epsilon > 0.0, "epsilon must be positive");
    assert!(window >= 1, "safety window must be at least one round");
    let initial = diameter(trace.input());
    if initial == 0.0 {
        return ConvergenceTime::Reached(0);
    }
    let threshold = epsilon * initial;
    let mut last_violation = None;
    for (t, x) in trace.estimates().iter().enumerate() {
        if diameter(x) > threshold {
            last_violation = Some(t as u64);
        }
    }
    match last_violation {
        None => ConvergenceTime::Reached(0),
        Some(t) => {
            let window_start = trace.horizon().saturating_sub(window - 1);
            if t >= window_start {
                ConvergenceTime::NotReached
            } else {
                ConvergenceTime::Reached(t + 1)
            }
        }
    }
}

fn validate_bound_domain(d_prime: &[usize], epsilon: f64) {
    let n = d_prime.len();
    assert!(n >= 1, "bound needs at least one agent");
    assert!(
        epsilon > 0.0 && epsilon <= 1.0,
        "epsilon {epsilon} outside (0, 1]"
    );
    for (i, &d) in d_prime.iter().enumerate() {
        assert!(
            d >= 2 && d <= n.max(2),
            "d'[{i}] = {d} outside [2, {}]",
            n.max(2)
        );
    }
}

/// Worst-case round bound for the maximum-degree consensus rule, evaluated
/// at the realized trackers: (n−1)·D′/2 · (Σ log d′ᵢ + log n − 2 log ε − n log 2).
pub fn bound_max_weight(d_prime: &[usize], epsilon: f64) -> f64 {
    validate_bound_domain(d_prime, epsilon);
    let n = d_prime.len();
    let d_sum: f64 = d_prime.iter().map(|&d| d as f64).sum();
    let log_sum: f64 = d_prime.iter().map(|&d| (d as f64).ln()).sum();
    let factor = (n as f64 - 1.0) * d_sum / 2.0;
    factor * (log_sum + (n as f64).ln() - 2.0 * epsilon.ln() - n as f64 * 2.0_f64.ln())
}

/// Worst-case round bound for the symmetric learning rule:
/// n³·(2 Σ log d′ᵢ − log ε − (2n−1) log 2) + D′ − 2n.
pub fn bound_max_metropolis(d_prime: &[usize], epsilon: f64) -> f64 {
    validate_bound_domain(d_prime, epsilon);
    let n = d_prime.len();
    let d_sum: f64 = d_prime.iter().map(|&d| d as f64).sum();
    let log_sum: f64 = d_prime.iter().map(|&d| (d as f64).ln()).sum();
    let nf = n as f64;
    nf.powi(3) * (2.0 * log_sum - epsilon.ln() - (2.0 * nf - 1.0) * 2.0_f64.ln()) + d_sum
        - 2.0 * nf
}

/// The bound matching an algorithm, evaluated at realized trackers; the
/// plain averaging rule has no finite closed form here.
pub fn applicable_bound(algorithm: Algorithm, d_prime: &[usize], epsilon: f64) -> Option<f64> {
    match algorithm {
        Algorithm::EqualNeighbor => None,
        Algorithm::MaxWeight => Some(bound_max_weight(d_prime, epsilon)),
        Algorithm::MaxMetropolis => Some(bound_max_metropolis(d_prime, epsilon)),
    }
}

/// Summary of one trace against the theory: measured time, both closed-form
/// bounds at the realized trackers, and the proof-side constants for the
/// trace's rule family.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub t_eps: ConvergenceTime,
    pub horizon: u64,
    pub diam_series: Vec<f64>,
    pub bound_mw: f64,
    pub bound_mm: f64,
    /// Dispersion-blowup factor: n·Π d′ᵢ/2 for the convex family, its square
    /// over n for the symmetric one.
    pub beta: f64,
    /// Closed-form spectral-gap floor: 1/((n−1)D′) or 1/n³.
    pub gamma_lower: f64,
    pub learning_rounds: BTreeSet<u64>,
}

impl ConvergenceReport {
    pub fn from_trace(trace: &Trace, algorithm: Algorithm, epsilon: f64) -> Self {
        let d_prime = trace.realized_d_prime();
        let n = trace.n() as f64;
        let d_sum: f64 = d_prime.iter().map(|&d| d as f64).sum();
        let half_product: f64 = d_prime.iter().map(|&d| d as f64 / 2.0).product();
        let (beta, gamma_lower) = match algorithm {
            Algorithm::EqualNeighbor | Algorithm::MaxWeight => {
                let gamma = if trace.n() >= 2 {
                    1.0 / ((n - 1.0) * d_sum)
                } else {
                    1.0
                };
                (n * half_product, gamma)
            }
            Algorithm::MaxMetropolis => (half_product * half_product, 1.0 / n.powi(3)),
        };
        ConvergenceReport {
            algorithm,
            epsilon,
            t_eps: convergence_time(trace, epsilon),
            horizon: trace.horizon(),
            diam_series: trace.diameters(),
            bound_mw: bound_max_weight(d_prime, epsilon),
            bound_mm: bound_max_metropolis(d_prime, epsilon),
            beta,
            gamma_lower,
            learning_rounds: trace.learning_rounds().clone(),
        }
    }

    /// The bound this trace is accountable to, if any.
    pub fn bound(&self) -> Option<f64> {
        match self.algorithm {
            Algorithm::EqualNeighbor => None,
            Algorithm::MaxWeight => Some(self.bound_mw),
            Algorithm::MaxMetropolis => Some(self.bound_mm),
        }
    }

    /// t_ε divided by the applicable bound, when both exist.
    pub fn ratio(&self) -> Option<f64> {
        match (self.t_eps.rounds(), self.bound()) {
            (Some(t), Some(b)) if b > 0.0 => Some(t as f64 / b),
            _ => None,
        }
    }
}

/// Input-vector recipe: a unit indicator at the first agent, an explicit
/// list, or seeded uniform draws from [0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InputSpec {
    Keyword(InputKeyword),
    Explicit(Vec<f64>),
    UniformRandom {
        #[serde(rename = "uniform-random")]
        uniform_random: UniformRandomInput,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputKeyword {
    Indicator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UniformRandomInput {
    pub seed: u64,
}

impl InputSpec {
    pub fn indicator() -> Self {
        InputSpec::Keyword(InputKeyword::Indicator)
    }

    /// Concrete input vector for a cell. Uniform draws mix the spec seed with
    /// the cell seed so sweep cells get distinct but reproducible inputs.
    pub fn realize(&self, n: usize, cell_seed: u64) -> Result<DVector<f64>, SweepError> {
        match self {
            InputSpec::Keyword(InputKeyword::Indicator) => {
                let mut v = DVector::zeros(n);
                v[0] = 1.0;
                Ok(v)
            }
            InputSpec::Explicit(values) => {
                if values.len() != n {
                    return Err(SweepError::InputLength {
                        expected: n,
                        found: values.len(),
                    });
                }
                Ok(DVector::from_column_slice(values))
            }
            InputSpec::UniformRandom { uniform_random } => {
                let mut rng = ChaCha8Rng::seed_from_u64(
                    mix64(uniform_random.seed) ^ mix64(cell_seed.rotate_left(17)),
                );
                Ok(DVector::from_iterator(n, (0..n).map(|_| rng.gen::<f64>())))
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("input vector has {found} entries, system needs {expected}")]
    InputLength { expected: usize, found: usize },
    #[error("cell (model {model}, n={n}, seed={seed}): {source}")]
    Model {
        model: String,
        n: usize,
        seed: u64,
        source: ModelError,
    },
    #[error("sweep lists no algorithms")]
    NoAlgorithms,
    #[error("sweep lists no models")]
    NoModels,
    #[error("sweep lists no sizes")]
    NoSizes,
    #[error("sweep lists no seeds")]
    NoSeeds,
}

/// Cartesian experiment specification; cells run in listed order.
#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub algorithms: Vec<Algorithm>,
    pub models: Vec<ModelFamily>,
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub epsilon: f64,
    pub max_rounds: u64,
    pub input: InputSpec,
}

/// Result of one sweep cell. `bound` and `ratio` are absent for algorithms
/// without a closed form, `t_eps` when the horizon could not certify a time.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub algorithm: &'static str,
    pub model: String,
    pub n: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub t_eps: Option<u64>,
    pub bound: Option<f64>,
    pub ratio: Option<f64>,
    pub converged: bool,
}

/// Run every (algorithm, model, n, seed) cell of the spec through the matrix
/// engine and tabulate measured times against the applicable bounds.
/// Non-converging cells are reported with `converged = false`, never dropped.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepCell>, SweepError> {
    if spec.algorithms.is_empty() {
        return Err(SweepError::NoAlgorithms);
    }
    if spec.models.is_empty() {
        return Err(SweepError::NoModels);
    }
    if spec.sizes.is_empty() {
        return Err(SweepError::NoSizes);
    }
    if spec.seeds.is_empty() {
        return Err(SweepError::NoSeeds);
    }
    let mut cells = Vec::new();
    for algorithm in &spec.algorithms {
        for family in &spec.models {
            for &n in &spec.sizes {
                for &seed in &spec.seeds {
                    let model = family.instantiate(n, seed).map_err(|source| {
                        SweepError::Model {
                            model: family.name(),
                            n,
                            seed,
                            source,
                        }
                    })?;
                    let mu = spec.input.realize(n, seed)?;
                    let trace = run_matrix(&(*algorithm).into(), &model, &mu, spec.max_rounds);
                    let t_eps = convergence_time(&trace, spec.epsilon);
                    let bound =
                        applicable_bound(*algorithm, trace.realized_d_prime(), spec.epsilon);
                    let ratio = match (t_eps.rounds(), bound) {
                        (Some(t), Some(b)) if b > 0.0 => Some(t as f64 / b),
                        _ => None,
                    };
                    cells.push(SweepCell {
                        algorithm: algorithm.name(),
                        model: family.name(),
                        n,
                        seed,
                        epsilon: spec.epsilon,
                        t_eps: t_eps.rounds(),
                        bound,
                        ratio,
                        converged: t_eps.rounds().is_some(),
                    });
                }
            }
        }
    }
    Ok(cells)
}
