//! Spectral quantities and numerical checkers for the contraction machinery.
//!
//! Everything here works on the dense update matrices produced by
//! [`crate::rules`]. Eigenvalues of symmetric matrices come straight from a
//! symmetric eigensolver; reversible stochastic matrices are routed through
//! the diag(π)^{1/2}·A·diag(π)^{-1/2} similarity transform so the same solver
//! applies; anything else falls back to a general dense solver. The Perron
//! vector is deliberately computed by power iteration so that closed-form
//! expectations are checked against an independent numerical route.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

use crate::rules::UpdateMatrix;

/// Slack below which a checked inequality counts as violated. Strict
/// inequalities cannot be certified in floating point, so exact ties within
/// this tolerance pass.
pub const SLACK_TOL: f64 = 1e-12;

/// Residual target for the Perron power iteration.
pub const PERRON_RESIDUAL: f64 = 1e-13;

/// Iteration cap for the Perron power iteration.
pub const PERRON_MAX_ITER: usize = 100_000;

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("matrix is not stochastic: {0}")]
    NotStochastic(String),
    #[error("matrix is reducible")]
    Reducible,
    #[error("matrix is not symmetric")]
    NotSymmetric,
    #[error("matrix is not reversible: |π_i a_ij − π_j a_ji| = {asymmetry:.3e}")]
    NotReversible { asymmetry: f64 },
    #[error("matrix has a non-positive diagonal entry at {0}")]
    NonPositiveDiagonal(usize),
    #[error("power iteration failed to reach residual {PERRON_RESIDUAL:e} within {PERRON_MAX_ITER} iterations")]
    PowerIterationStalled,
}

/// Positive stochastic weight vector defining a weighted geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pi: DVector<f64>,
}

impl WeightVector {
    pub fn new(pi: DVector<f64>) -> Self {
        assert!(!pi.is_empty(), "weight vector must be non-empty");
        assert!(pi.iter().all(|&p| p > 0.0), "weight vector must be positive");
        let sum: f64 = pi.iter().sum();
        assert!(
            (sum - 1.0).abs() <= 1e-12,
            "weight vector sums to {sum}, expected 1"
        );
        WeightVector { pi }
    }

    pub fn uniform(n: usize) -> Self {
        WeightVector::new(DVector::from_element(n, 1.0 / n as f64))
    }

    /// Normalize arbitrary positive weights into a weight vector.
    pub fn normalized(weights: &[f64]) -> Self {
        let sum: f64 = weights.iter().sum();
        assert!(sum > 0.0, "weights must have positive sum");
        WeightVector::new(DVector::from_iterator(
            weights.len(),
            weights.iter().map(|w| w / sum),
        ))
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.pi[i]
    }

    pub fn min(&self) -> f64 {
        self.pi.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.pi
    }
}

fn check_stochastic(a: &UpdateMatrix) -> Result<(), SpectralError> {
    if !a.is_nonnegative() {
        return Err(SpectralError::NotStochastic(
            "negative entry present".to_string(),
        ));
    }
    // Row sums are enforced by the UpdateMatrix constructor.
    Ok(())
}

/// Left fixed vector of an irreducible stochastic matrix, by power iteration
/// on the transpose from the uniform start.
pub fn perron_vector(a: &UpdateMatrix) -> Result<WeightVector, SpectralError> {
    check_stochastic(a)?;
    if !a.is_irreducible() {
        return Err(SpectralError::Reducible);
    }
    let n = a.n();
    let at = a.as_matrix().transpose();
    let mut pi = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..PERRON_MAX_ITER {
        let next = &at * &pi;
        let residual = (&next - &pi).amax();
        let sum: f64 = next.iter().sum();
        pi = next / sum;
        if residual <= PERRON_RESIDUAL {
            return Ok(WeightVector::new(pi));
        }
    }
    Err(SpectralError::PowerIterationStalled)
}

fn symmetric_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let eig = SymmetricEigen::new(m);
    eig.eigenvalues.iter().copied().collect()
}

fn general_eigenvalue_moduli(m: &DMatrix<f64>) -> Vec<f64> {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .collect()
}

fn moduli_sorted_desc(mut moduli: Vec<f64>) -> Vec<f64> {
    moduli.sort_by(|x, y| y.partial_cmp(x).expect("eigenvalue modulus is NaN"));
    moduli
}

fn reversibility_asymmetry(a: &UpdateMatrix, pi: &WeightVector) -> f64 {
    let n = a.n();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((pi.get(i) * a.get(i, j) - pi.get(j) * a.get(j, i)).abs());
        }
    }
    worst
}

fn similarity_symmetrized(a: &UpdateMatrix, pi: &WeightVector) -> DMatrix<f64> {
    let n = a.n();
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = (pi.get(i) / pi.get(j)).sqrt() * a.get(i, j);
        }
    }
    // The transform of an exactly reversible matrix is symmetric; average out
    // the floating-point asymmetry before handing it to the solver.
    let st = s.transpose();
    (s + st) * 0.5
}

/// Eigenvalue moduli in decreasing order, solver chosen by matrix structure.
fn eigenvalue_moduli(a: &UpdateMatrix) -> Vec<f64> {
    if a.is_symmetric(1e-12) {
        let sym = (a.as_matrix() + a.as_matrix().transpose()) * 0.5;
        return moduli_sorted_desc(
            symmetric_eigenvalues(sym).into_iter().map(f64::abs).collect(),
        );
    }
    if a.is_nonnegative() && a.is_irreducible() {
        if let Ok(pi) = perron_vector(a) {
            if reversibility_asymmetry(a, &pi) <= 1e-10 {
                let s = similarity_symmetrized(a, &pi);
                return moduli_sorted_desc(
                    symmetric_eigenvalues(s).into_iter().map(f64::abs).collect(),
                );
            }
        }
    }
    moduli_sorted_desc(general_eigenvalue_moduli(a.as_matrix()))
}

/// |λ₁| − |λ₂| with eigenvalues ordered by modulus (1 for a 1×1 matrix).
pub fn spectral_gap(a: &UpdateMatrix) -> f64 {
    let moduli = eigenvalue_moduli(a);
    let second = moduli.get(1).copied().unwrap_or(0.0);
    moduli[0] - second
}

/// Largest eigenvalue modulus.
pub fn spectral_radius(a: &UpdateMatrix) -> f64 {
    eigenvalue_moduli(a)[0]
}

/// Max − min of a vector's entries.
pub fn diameter(v: &DVector<f64>) -> f64 {
    assert!(!v.is_empty(), "diameter of an empty vector");
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &x in v.iter() {
        min = min.min(x);
        max = max.max(x);
    }
    max - min
}

/// Variance of `v` in the π-weighted geometry: ‖v‖²_π − ⟨v, 1⟩²_π, evaluated
/// in the centered form Σ πᵢ(vᵢ − m)² to avoid cancellation near consensus.
pub fn weighted_variance(pi: &WeightVector, v: &DVector<f64>) -> f64 {
    assert_eq!(pi.len(), v.len(), "weight/vector dimension mismatch");
    let mean: f64 = (0..v.len()).map(|i| pi.get(i) * v[i]).sum();
    (0..v.len()).map(|i| pi.get(i) * (v[i] - mean).powi(2)).sum()
}

/// Two sides of a checked inequality lhs ≤ rhs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlackReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub ok: bool,
}

impl SlackReport {
    fn new(lhs: f64, rhs: f64) -> Self {
        let slack = rhs - lhs;
        SlackReport {
            lhs,
            rhs,
            slack,
            ok: slack >= -SLACK_TOL,
        }
    }
}

/// Var_{π′} v ≤ max_i (π′ᵢ/πᵢ) · Var_π v, for any two positive stochastic
/// weight vectors.
pub fn check_variance_switch(
    pi: &WeightVector,
    pi_prime: &WeightVector,
    v: &DVector<f64>,
) -> SlackReport {
    assert_eq!(pi.len(), pi_prime.len(), "weight dimension mismatch");
    assert_eq!(pi.len(), v.len(), "weight/vector dimension mismatch");
    let ratio = (0..pi.len())
        .map(|i| pi_prime.get(i) / pi.get(i))
        .fold(f64::NEG_INFINITY, f64::max);
    SlackReport::new(
        weighted_variance(pi_prime, v),
        ratio * weighted_variance(pi, v),
    )
}

/// Outcome of a dispersion check whose inequalities are strict and therefore
/// vacuous on consensus input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DispersionCheck {
    /// Consensus input: both sides collapse to zero, nothing to verify.
    Degenerate,
    Checked { lower: SlackReport, upper: SlackReport },
}

impl DispersionCheck {
    pub fn ok(&self) -> bool {
        match self {
            DispersionCheck::Degenerate => true,
            DispersionCheck::Checked { lower, upper } => lower.ok && upper.ok,
        }
    }
}

/// 2·Var_π v < (diam v)² < (4/min πᵢ)·Var_π v for non-consensus v.
pub fn check_weighted_dispersion(pi: &WeightVector, v: &DVector<f64>) -> DispersionCheck {
    assert_eq!(pi.len(), v.len(), "weight/vector dimension mismatch");
    let d = diameter(v);
    if d == 0.0 {
        return DispersionCheck::Degenerate;
    }
    let var = weighted_variance(pi, v);
    DispersionCheck::Checked {
        lower: SlackReport::new(2.0 * var, d * d),
        upper: SlackReport::new(d * d, 4.0 / pi.min() * var),
    }
}

/// √(2/n)·‖v‖ < diam v < 2‖v‖ for non-null mean-zero v; the uniform-weight
/// special case of the dispersion bound, stated in norm form.
pub fn check_dispersion_mean_zero(v: &DVector<f64>) -> DispersionCheck {
    let n = v.len();
    assert!(n >= 1, "dispersion of an empty vector");
    let norm = v.norm();
    let mean = v.iter().sum::<f64>() / n as f64;
    assert!(
        mean.abs() <= 1e-9 * (1.0 + norm),
        "vector mean {mean} is not numerically zero"
    );
    let d = diameter(v);
    if d == 0.0 {
        return DispersionCheck::Degenerate;
    }
    DispersionCheck::Checked {
        lower: SlackReport::new((2.0 / n as f64).sqrt() * norm, d),
        upper: SlackReport::new(d, 2.0 * norm),
    }
}

fn require_positive_diagonal(a: &UpdateMatrix) -> Result<(), SpectralError> {
    for i in 0..a.n() {
        if a.get(i, i) <= 0.0 {
            return Err(SpectralError::NonPositiveDiagonal(i));
        }
    }
    Ok(())
}

fn require_reversible(a: &UpdateMatrix) -> Result<WeightVector, SpectralError> {
    check_stochastic(a)?;
    if !a.is_irreducible() {
        return Err(SpectralError::Reducible);
    }
    require_positive_diagonal(a)?;
    let pi = perron_vector(a)?;
    let asymmetry = reversibility_asymmetry(a, &pi);
    if asymmetry > 1e-10 {
        return Err(SpectralError::NotReversible { asymmetry });
    }
    Ok(pi)
}

/// Var_{π(A)}(Av) ≤ (1 − γ(A))² · Var_{π(A)}(v) for reversible stochastic A
/// with positive diagonal.
pub fn check_contraction(a: &UpdateMatrix, v: &DVector<f64>) -> Result<SlackReport, SpectralError> {
    assert_eq!(a.n(), v.len(), "matrix/vector dimension mismatch");
    let pi = require_reversible(a)?;
    let gap = spectral_gap(a);
    let av = a.apply(v);
    Ok(SlackReport::new(
        weighted_variance(&pi, &av),
        (1.0 - gap).powi(2) * weighted_variance(&pi, v),
    ))
}

/// ‖Av‖ ≤ (1 − γ(A))·‖v‖ for symmetric stochastic A with positive diagonal
/// and mean-zero v.
pub fn check_contraction_mean_zero(
    a: &UpdateMatrix,
    v: &DVector<f64>,
) -> Result<SlackReport, SpectralError> {
    assert_eq!(a.n(), v.len(), "matrix/vector dimension mismatch");
    if !a.is_symmetric(1e-12) {
        return Err(SpectralError::NotSymmetric);
    }
    check_stochastic(a)?;
    if !a.is_irreducible() {
        return Err(SpectralError::Reducible);
    }
    require_positive_diagonal(a)?;
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    assert!(
        mean.abs() <= 1e-9 * (1.0 + v.norm()),
        "vector mean {mean} is not numerically zero"
    );
    let gap = spectral_gap(a);
    Ok(SlackReport::new(a.apply(v).norm(), (1.0 - gap) * v.norm()))
}

/// Spectral-gap lower bounds from the smallest weighted and unweighted
/// nonzero entries.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapBoundsReport {
    pub gamma: f64,
    /// α(A)/(n−1) with α(A) the smallest nonzero πᵢ·Aᵢⱼ.
    pub alpha_bound: f64,
    /// A⁻/(n(n−1)) with A⁻ the smallest nonzero entry; symmetric input only.
    pub min_entry_bound: Option<f64>,
    pub ok: bool,
}

/// γ(A) ≥ α(A)/(n−1) for reversible stochastic A with positive diagonal, and
/// additionally γ(A) ≥ A⁻/(n(n−1)) when A is symmetric.
pub fn check_gap_bounds(a: &UpdateMatrix) -> Result<GapBoundsReport, SpectralError> {
    let pi = require_reversible(a)?;
    let n = a.n();
    let gamma = spectral_gap(a);
    let mut alpha = f64::INFINITY;
    let mut min_entry = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            let entry = a.get(i, j);
            if entry != 0.0 {
                alpha = alpha.min(pi.get(i) * entry);
                min_entry = min_entry.min(entry);
            }
        }
    }
    let alpha_bound = if n >= 2 { alpha / (n - 1) as f64 } else { 0.0 };
    let min_entry_bound = if a.is_symmetric(1e-12) && n >= 2 {
        Some(min_entry / (n * (n - 1)) as f64)
    } else {
        None
    };
    let mut ok = gamma >= alpha_bound - SLACK_TOL;
    if let Some(b) = min_entry_bound {
        ok = ok && gamma >= b - SLACK_TOL;
    }
    Ok(GapBoundsReport {
        gamma,
        alpha_bound,
        min_entry_bound,
        ok,
    })
}

/// Laziness defect ν = max_i (1 − min(0, Aᵢᵢ)) and the induced spectral
/// radius bound ν².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuBound {
    pub nu: f64,
    pub radius_bound: f64,
}

/// For a symmetric matrix with unit row sums, every eigenvalue modulus is at
/// most 2ν − 1 ≤ ν².
pub fn nu_bound(a: &UpdateMatrix) -> NuBound {
    assert!(a.is_symmetric(1e-12), "ν bound requires a symmetric matrix");
    let nu = (0..a.n())
        .map(|i| 1.0 - a.get(i, i).min(0.0))
        .fold(1.0_f64, f64::max);
    NuBound {
        nu,
        radius_bound: nu * nu,
    }
}
