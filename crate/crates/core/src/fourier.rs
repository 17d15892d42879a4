//! Fourier transform of a homogeneous self-affine measure via its
//! convergent infinite product, frequency renormalization, and the
//! elementary factor/product upper bounds used for decay estimates.

use num_complex::Complex64;
use std::f64::consts::TAU;
use thiserror::Error;

use crate::ifs::HomogeneousIfs;

#[derive(Debug, Error)]
pub enum FourierError {
    #[error("renormalization needs ||xi||_inf >= 1, got {0}")]
    FrequencyBelowOne(f64),
}

/// Distance from `x` to the nearest integer.
pub fn dist_to_int(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// `exp(-2 pi i x)`, evaluated after reducing `x` modulo 1 to `[-1/2, 1/2]`.
/// The reduction is exact in binary floating point, so integer arguments map
/// to exactly `1` and large arguments lose no phase accuracy.
pub fn unit_phase(x: f64) -> Complex64 {
    let t = TAU * (x - x.round());
    Complex64::new(t.cos(), -t.sin())
}

fn dot(u: &[f64], a: &[f64]) -> f64 {
    u.iter().zip(a).map(|(x, y)| x * y).sum()
}

fn norm_inf(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// One factor of the product: `sum_j p_j exp(-2 pi i <xi, a_j>)`.
/// Modulus never exceeds 1.
pub fn one_step_factor(sys: &HomogeneousIfs, xi: &[f64]) -> Complex64 {
    sys.probs()
        .iter()
        .zip(sys.digits())
        .map(|(p, a)| p * unit_phase(dot(xi, a)))
        .sum()
}

/// Evaluation request: frequency, absolute truncation-error target, and a
/// cap on the number of product terms.
#[derive(Debug, Clone)]
pub struct TransformQuery {
    pub xi: Vec<f64>,
    pub tolerance: f64,
    pub max_terms: usize,
}

impl TransformQuery {
    pub fn new(xi: Vec<f64>) -> Self {
        Self {
            xi,
            tolerance: 1e-12,
            max_terms: 4096,
        }
    }

    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        assert!(tolerance > 0.0, "tolerance must be positive");
        self.tolerance = tolerance;
        self
    }
}

/// A truncated-product value together with the number of terms taken and
/// the rigorous bound on the neglected tail. `converged` is false when the
/// term cap was hit before the bound dropped below the tolerance.
#[derive(Debug, Clone)]
pub struct Transform {
    pub value: Complex64,
    pub terms: usize,
    pub error_bound: f64,
    pub converged: bool,
}

/// Factor sequence of the infinite product at `xi`, truncated when the tail
/// bound drops below `tol`. Each omitted factor differs from 1 by at most
/// `2 pi ||(A^t)^n xi||_inf * max_j ||a_j||_1`, the omitted norms are
/// dominated by a geometric series with ratio `1/min|theta|`, and since all
/// factors have modulus <= 1 the accumulated effect is at most
/// `exp(sum) - 1`.
fn product_factors(
    sys: &HomogeneousIfs,
    xi: &[f64],
    tol: f64,
    max_terms: usize,
) -> (Vec<Complex64>, f64, bool) {
    let b1 = sys.min_expansion();
    let geo = b1 / (b1 - 1.0);
    let scale = TAU * sys.max_digit_l1() * geo;
    let mut factors = Vec::new();
    let mut u = xi.to_vec();
    loop {
        let bound = (scale * norm_inf(&u)).exp_m1();
        if bound <= tol {
            return (factors, bound, true);
        }
        if factors.len() >= max_terms {
            return (factors, bound, false);
        }
        factors.push(one_step_factor(sys, &u));
        u = sys.contract(&u);
    }
}

/// Transform of the invariant measure at `q.xi` by the truncated infinite
/// product.
pub fn mu_hat(sys: &HomogeneousIfs, q: &TransformQuery) -> Transform {
    assert!(q.tolerance > 0.0 && q.max_terms >= 1);
    let (factors, error_bound, converged) = product_factors(sys, &q.xi, q.tolerance, q.max_terms);
    let value = factors.iter().product();
    Transform {
        value,
        terms: factors.len(),
        error_bound,
        converged,
    }
}

/// Transform value with the default tolerance (1e-12).
pub fn mu_hat_value(sys: &HomogeneousIfs, xi: &[f64]) -> Complex64 {
    mu_hat(sys, &TransformQuery::new(xi.to_vec())).value
}

/// Frequency pulled back to the fundamental band: `eta = (A^t)^N xi` with
/// `N` maximal such that `||eta||_inf >= 1`, so `1 <= ||eta||_inf <=
/// max|theta_j|`.
#[derive(Debug, Clone)]
pub struct RenormalizedFrequency {
    pub n_steps: u32,
    pub eta: Vec<f64>,
}

pub fn renormalize(
    sys: &HomogeneousIfs,
    xi: &[f64],
) -> Result<RenormalizedFrequency, FourierError> {
    let start = norm_inf(xi);
    if start < 1.0 {
        return Err(FourierError::FrequencyBelowOne(start));
    }
    let mut eta = xi.to_vec();
    let mut n_steps = 0;
    loop {
        let next = sys.contract(&eta);
        if norm_inf(&next) >= 1.0 {
            eta = next;
            n_steps += 1;
        } else {
            return Ok(RenormalizedFrequency { n_steps, eta });
        }
    }
}

/// Elementary factor bound `1 - 2 pi eps ||alphas[k]||^2`, where `eps` is
/// the least probability and `||.||` is the distance to the nearest
/// integer. `alphas[0]` must be 0 and `k >= 1` selects the phase whose
/// distance witnesses the bound.
pub fn factor_bound(probs: &[f64], alphas: &[f64], k: usize) -> f64 {
    assert_eq!(probs.len(), alphas.len());
    assert_eq!(alphas[0], 0.0, "first phase must be zero");
    assert!(k >= 1 && k < alphas.len(), "k must index a non-base phase");
    let eps = probs.iter().cloned().fold(f64::INFINITY, f64::min);
    let d = dist_to_int(alphas[k]);
    1.0 - TAU * eps * d * d
}

/// Product upper bound for the two-digit reduced system: the product over
/// `n = 1..=n_steps` of `1 - 2 pi eps || sum_k eta_k theta_k^n ||^2`, each
/// factor clamped at 0 (the bound can go negative while the true modulus
/// cannot).
pub fn decay_upper_bound(theta: &[f64], eta: &[f64], eps: f64, n_steps: u32) -> f64 {
    assert_eq!(theta.len(), eta.len());
    assert!(theta.iter().all(|t| t.abs() > 1.0));
    assert!(eps > 0.0 && eps <= 1.0);
    let mut powers = theta.to_vec();
    let mut product = 1.0;
    for _ in 0..n_steps {
        let s: f64 = eta.iter().zip(&powers).map(|(e, p)| e * p).sum();
        let d = dist_to_int(s);
        product *= (1.0 - TAU * eps * d * d).max(0.0);
        for (p, t) in powers.iter_mut().zip(theta) {
            *p *= t;
        }
    }
    product
}

/// Outcome of the convolution-factorization identity check
/// `mu_hat(xi) = prod_j mu_hat_{(A^n, A^j D)}(xi)`.
#[derive(Debug, Clone)]
pub struct FactorizationCheck {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
    pub within_tol: bool,
}

/// Evaluates both sides of the factorization identity with truncation
/// budgets summing below `tol` and compares.
pub fn verify_factorization(
    sys: &HomogeneousIfs,
    n: u32,
    xi: &[f64],
    tol: f64,
) -> FactorizationCheck {
    assert!(n >= 2);
    let per_eval = 0.25 * tol / (n as f64 + 1.0);
    let query = |s: &HomogeneousIfs| {
        mu_hat(
            s,
            &TransformQuery::new(xi.to_vec()).with_tolerance(per_eval),
        )
        .value
    };
    let lhs = query(sys);
    let mut rhs = Complex64::new(1.0, 0.0);
    for j in 0..n {
        rhs *= query(&sys.power_factor_system(n, j));
    }
    let residual = (lhs - rhs).norm();
    FactorizationCheck {
        lhs,
        rhs,
        residual,
        within_tol: residual <= tol,
    }
}

/// Outcome of the renormalization identity check: `mu_hat(xi)` against
/// `mu_hat(eta) * prod_{n=1..N} (sum_j p_j exp(-2 pi i <eta, A^-n a_j>))`.
#[derive(Debug, Clone)]
pub struct RenormalizationCheck {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
    pub relative_residual: f64,
    pub n_steps: u32,
    pub truncation_bound: f64,
}

/// Checks the renormalization identity at `xi`. The prefactor phases
/// `<eta, A^-n a_j> = <(A^t)^{N-n} xi, a_j>` are evaluated along the same
/// pullback orbit that defines `eta`, so the residual isolates the identity
/// itself rather than rounding differences between power routes.
pub fn verify_renormalization(
    sys: &HomogeneousIfs,
    xi: &[f64],
    tol: f64,
) -> Result<RenormalizationCheck, FourierError> {
    let rn = renormalize(sys, xi)?;
    let n = rn.n_steps as usize;
    let tol = tol.min(1e-12);
    let (factors, bound, _) = product_factors(sys, xi, tol, 1 << 20);
    debug_assert!(factors.len() >= n);
    let lhs: Complex64 = factors.iter().product();
    let prefactor: Complex64 = factors[..n].iter().product();
    let tail = mu_hat(sys, &TransformQuery::new(rn.eta.clone()).with_tolerance(tol));
    let rhs = prefactor * tail.value;
    let residual = (lhs - rhs).norm();
    let denom = lhs.norm().max(rhs.norm()).max(f64::MIN_POSITIVE);
    Ok(RenormalizationCheck {
        lhs,
        rhs,
        residual,
        relative_residual: residual / denom,
        n_steps: rn.n_steps,
        truncation_bound: bound + tail.error_bound,
    })
}
