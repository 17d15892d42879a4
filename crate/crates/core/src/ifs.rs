//! System descriptors: homogeneous iterated function systems with diagonal
//! linear part, and the compact parameter boxes used by the covering
//! machinery.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on `sum(probs) == 1`.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Relative singular-value threshold for the irreducibility rank test.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum IfsError {
    #[error("invalid system: {0}")]
    Invalid(String),
    #[error("malformed descriptor file: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Validation outcome for a candidate descriptor. Report-style: an invalid
/// descriptor is described, not panicked over.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A homogeneous self-affine system `{x -> Ax + a_j}` with
/// `A = Diag[1/theta_1, ..., 1/theta_d]`, digit set `{a_j}` and probability
/// vector `p`. Immutable after construction; cheap to clone and safe to
/// share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneousIfs {
    theta: Vec<f64>,
    digits: Vec<Vec<f64>>,
    probs: Vec<f64>,
}

/// On-disk JSON schema for a system descriptor. Read by every CLI
/// subcommand taking `--ifs`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IfsFile {
    pub theta: Vec<f64>,
    pub digits: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
}

/// Checks every descriptor invariant and returns the full report.
///
/// Violations: expansion factors with `|theta_j| <= 1`, fewer than two
/// digits, duplicate digits, dimension mismatches, non-positive
/// probabilities or a probability sum off by more than [`PROB_SUM_TOL`].
/// A two-digit system whose nonzero digit has a zero coordinate only
/// warns: the product bound along that coordinate is vacuous there.
pub fn validate(theta: &[f64], digits: &[Vec<f64>], probs: &[f64]) -> ValidationReport {
    let mut report = ValidationReport::default();
    let d = theta.len();
    if d == 0 {
        report.violations.push("dimension is zero".into());
    }
    for (j, t) in theta.iter().enumerate() {
        if !(t.abs() > 1.0) {
            report
                .violations
                .push(format!("|theta_{}| <= 1 (got {t})", j + 1));
        }
    }
    if digits.len() < 2 {
        report
            .violations
            .push(format!("need at least 2 digits, got {}", digits.len()));
    }
    for (j, a) in digits.iter().enumerate() {
        if a.len() != d {
            report.violations.push(format!(
                "digit {} has dimension {}, expected {d}",
                j + 1,
                a.len()
            ));
        }
    }
    for i in 0..digits.len() {
        for j in i + 1..digits.len() {
            if digits[i] == digits[j] {
                report
                    .violations
                    .push(format!("digits {} and {} coincide", i + 1, j + 1));
            }
        }
    }
    if probs.len() != digits.len() {
        report.violations.push(format!(
            "{} probabilities for {} digits",
            probs.len(),
            digits.len()
        ));
    }
    for (j, p) in probs.iter().enumerate() {
        if !(p > &0.0) {
            report
                .violations
                .push(format!("prob {} not strictly positive (got {p})", j + 1));
        }
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > PROB_SUM_TOL {
        report
            .violations
            .push(format!("probs sum != 1 (got {sum:.17})"));
    }
    // Two-digit reduction path: a zero coordinate in the nonzero digit means
    // that coordinate never contributes to the phase sums.
    if digits.len() == 2 && report.passed() {
        let base = &digits[0];
        let other = &digits[1];
        if base.iter().all(|x| *x == 0.0) && other.iter().any(|x| *x == 0.0) {
            report.warnings.push(
                "two-digit system with a zero coordinate in the nonzero digit; \
                 the coordinate is inert in the two-digit reduction"
                    .into(),
            );
        }
    }
    report
}

/// Rescales a candidate probability vector to sum to exactly one.
/// Convenience for user-supplied decimals that do not sum exactly.
pub fn renormalize_probs(probs: &mut [f64]) {
    let sum: f64 = probs.iter().sum();
    if sum > 0.0 {
        for p in probs.iter_mut() {
            *p /= sum;
        }
    }
}

impl HomogeneousIfs {
    pub fn new(theta: Vec<f64>, digits: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self, IfsError> {
        let report = validate(&theta, &digits, &probs);
        if !report.passed() {
            return Err(IfsError::Invalid(report.violations.join("; ")));
        }
        Ok(Self {
            theta,
            digits,
            probs,
        })
    }

    /// Parses the JSON descriptor format, renormalizing the probability
    /// vector (entries must still be positive).
    pub fn from_json(text: &str) -> Result<Self, IfsError> {
        let file: IfsFile = serde_json::from_str(text)?;
        let mut probs = file.probs;
        renormalize_probs(&mut probs);
        Self::new(file.theta, file.digits, probs)
    }

    pub fn to_file(&self) -> IfsFile {
        IfsFile {
            theta: self.theta.clone(),
            digits: self.digits.clone(),
            probs: self.probs.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn map_count(&self) -> usize {
        self.digits.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn digits(&self) -> &[Vec<f64>] {
        &self.digits
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn min_prob(&self) -> f64 {
        self.probs.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// min_j |theta_j|; the slowest expansion rate, > 1.
    pub fn min_expansion(&self) -> f64 {
        self.theta.iter().map(|t| t.abs()).fold(f64::INFINITY, f64::min)
    }

    /// max_j |theta_j|.
    pub fn max_expansion(&self) -> f64 {
        self.theta.iter().map(|t| t.abs()).fold(0.0, f64::max)
    }

    /// Largest l1 norm over the digit set. Drives truncation bounds.
    pub fn max_digit_l1(&self) -> f64 {
        self.digits
            .iter()
            .map(|a| a.iter().map(|x| x.abs()).sum())
            .fold(0.0, f64::max)
    }

    /// Applies `A = Diag[1/theta]` to a vector.
    pub fn contract(&self, v: &[f64]) -> Vec<f64> {
        v.iter().zip(&self.theta).map(|(x, t)| x / t).collect()
    }

    pub fn is_normalized(&self) -> bool {
        self.digits[0].iter().all(|x| *x == 0.0)
    }

    /// Conjugates by a translation so the first digit becomes 0. The
    /// invariant measure only moves by a translation; the transform modulus
    /// is unchanged at every frequency.
    pub fn normalize(&self) -> Self {
        let base = self.digits[0].clone();
        let digits = self
            .digits
            .iter()
            .map(|a| a.iter().zip(&base).map(|(x, b)| x - b).collect())
            .collect();
        Self {
            theta: self.theta.clone(),
            digits,
            probs: self.probs.clone(),
        }
    }

    /// Whether the digit set is a cyclic family for `A`: the vectors
    /// `A^n a_j`, `0 <= n < d`, must span R^d. Tested on a normalized
    /// system through the singular values of the assembled matrix.
    pub fn is_affinely_irreducible(&self) -> bool {
        let sys = if self.is_normalized() {
            self.clone()
        } else {
            self.normalize()
        };
        let d = sys.dim();
        let mut cols: Vec<f64> = Vec::new();
        for a in &sys.digits {
            let mut v = a.clone();
            for _ in 0..d {
                cols.extend_from_slice(&v);
                v = sys.contract(&v);
            }
        }
        let ncols = cols.len() / d;
        let m = DMatrix::from_vec(d, ncols, cols);
        let sv = m.singular_values();
        let smax = sv.iter().cloned().fold(0.0, f64::max);
        if smax == 0.0 {
            return false;
        }
        let rank = sv.iter().filter(|s| **s > RANK_TOL * smax).count();
        rank == d
    }

    /// The factor system with contraction `A^n` and digit set `A^j D`.
    /// The original measure is the convolution of these factors over
    /// `j = 0..n-1`.
    pub fn power_factor_system(&self, n: u32, j: u32) -> Self {
        assert!(n >= 1 && j < n, "need 0 <= j < n");
        let theta = self.theta.iter().map(|t| t.powi(n as i32)).collect();
        let digits = self
            .digits
            .iter()
            .map(|a| {
                a.iter()
                    .zip(&self.theta)
                    .map(|(x, t)| x / t.powi(j as i32))
                    .collect()
            })
            .collect();
        Self {
            theta,
            digits,
            probs: self.probs.clone(),
        }
    }
}

/// Compact parameter box `H`: expansion factors with
/// `b1 <= |theta_j| <= b2` and pairwise gaps `|theta_i - theta_j| >= c1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterBox {
    pub b1: f64,
    pub b2: f64,
    pub c1: f64,
    pub dim: usize,
}

impl ParameterBox {
    pub fn new(b1: f64, b2: f64, c1: f64, dim: usize) -> Result<Self, IfsError> {
        if !(b1 > 1.0) {
            return Err(IfsError::Invalid(format!("b1 must exceed 1, got {b1}")));
        }
        if !(b2 >= b1) {
            return Err(IfsError::Invalid(format!("b2 < b1 ({b2} < {b1})")));
        }
        if !(c1 > 0.0) {
            return Err(IfsError::Invalid(format!("c1 must be positive, got {c1}")));
        }
        if dim == 0 {
            return Err(IfsError::Invalid("dimension is zero".into()));
        }
        Ok(Self { b1, b2, c1, dim })
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        if theta.len() != self.dim {
            return false;
        }
        let in_band = theta
            .iter()
            .all(|t| t.abs() >= self.b1 && t.abs() <= self.b2);
        let separated = (0..theta.len()).all(|i| {
            (i + 1..theta.len()).all(|j| (theta[i] - theta[j]).abs() >= self.c1)
        });
        in_band && separated
    }
}
