//! Integer-polynomial root machinery and the Pisot number / Pisot family
//! decision procedures.

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PisotError {
    #[error("polynomial must be monic with integer coefficients and degree >= 1")]
    Malformed,
    #[error("not a minimal polynomial: {0}")]
    NotMinimal(String),
    #[error("root iteration did not converge (residual {residual:.3e})")]
    NoConvergence { residual: f64, partial: Vec<Complex64> },
}

/// Monic integer polynomial, coefficients stored leading-first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegerPolynomial {
    coeffs: Vec<i64>,
}

impl IntegerPolynomial {
    pub fn new(coeffs: Vec<i64>) -> Result<Self, PisotError> {
        if coeffs.len() < 2 || coeffs[0] != 1 {
            return Err(PisotError::Malformed);
        }
        Ok(Self { coeffs })
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + *c as f64)
    }

    pub fn eval_derivative(&self, z: Complex64) -> Complex64 {
        let n = self.degree();
        self.coeffs[..n]
            .iter()
            .enumerate()
            .fold(Complex64::new(0.0, 0.0), |acc, (i, c)| {
                acc * z + (*c as f64) * (n - i) as f64
            })
    }

    /// Exact integer evaluation; `None` on overflow (such a candidate is
    /// simply not screened).
    fn eval_int(&self, x: i64) -> Option<i128> {
        let mut acc = 0i128;
        for c in &self.coeffs {
            acc = acc.checked_mul(x as i128)?.checked_add(*c as i128)?;
        }
        Some(acc)
    }
}

/// All complex roots with multiplicity, plus the worst residual
/// `max |P(root)|`.
#[derive(Debug, Clone)]
pub struct RootSet {
    pub roots: Vec<Complex64>,
    pub residual: f64,
}

/// Roots by Durand-Kerner iteration polished with Newton steps.
pub fn roots(p: &IntegerPolynomial) -> Result<RootSet, PisotError> {
    let n = p.degree();
    let radius = 1.0
        + p.coeffs()
            .iter()
            .map(|c| (*c as f64).abs())
            .fold(0.0, f64::max);
    // standard asymmetric start: powers of 0.4 + 0.9i scaled to the root bound
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..n)
        .map(|i| seed.powu(i as u32 + 1) / seed.norm() * radius)
        .collect();
    let mut converged = false;
    for _ in 0..600 {
        let mut delta_max = 0.0_f64;
        for i in 0..n {
            let mut denom = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    denom *= z[i] - z[j];
                }
            }
            if denom.norm() == 0.0 {
                // coincident iterates; nudge apart
                z[i] += Complex64::new(1e-6, 1e-6);
                continue;
            }
            let step = p.eval(z[i]) / denom;
            z[i] -= step;
            delta_max = delta_max.max(step.norm() / (1.0 + z[i].norm()));
        }
        if delta_max < 1e-14 {
            converged = true;
            break;
        }
    }
    // Newton polish; skips with a near-zero derivative (multiple roots)
    for zi in z.iter_mut() {
        for _ in 0..3 {
            let dp = p.eval_derivative(*zi);
            if dp.norm() < 1e-12 {
                break;
            }
            *zi -= p.eval(*zi) / dp;
        }
    }
    let residual = z.iter().map(|zi| p.eval(*zi).norm()).fold(0.0, f64::max);
    // scale-aware acceptance: |P| near a root of size R is conditioned by R^n
    let scale = z
        .iter()
        .map(|zi| zi.norm().max(1.0).powi(n as i32))
        .fold(1.0, f64::max);
    if !converged && residual > 1e-6 * scale {
        return Err(PisotError::NoConvergence {
            residual,
            partial: z,
        });
    }
    Ok(RootSet { roots: z, residual })
}

/// Three-valued decision. `Ambiguous` reports a root modulus inside the
/// tolerance band around 1, where floating point cannot responsibly decide
/// (Salem-like configurations).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Yes,
    No,
    Ambiguous,
}

impl std::fmt::Display for Decision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Decision::Yes => write!(f, "yes"),
            Decision::No => write!(f, "no"),
            Decision::Ambiguous => write!(f, "ambiguous"),
        }
    }
}

/// Irreducibility screen: full verification for degree <= 3 (a monic cubic
/// or quadratic is reducible over Q iff it has an integer root), integer
/// root scan above that.
#[derive(Debug, Clone)]
pub struct MinimalityScreen {
    pub reducible: bool,
    pub fully_verified: bool,
    pub note: String,
}

pub fn minimality_screen(p: &IntegerPolynomial) -> MinimalityScreen {
    let a0 = *p.coeffs().last().unwrap();
    let mut int_root = None;
    if a0 == 0 {
        int_root = Some(0);
    } else {
        // monic: rational roots are integers dividing the constant term
        let bound = a0.unsigned_abs();
        let mut k = 1u64;
        'scan: while k * k <= bound {
            if bound % k == 0 {
                for m in [k, bound / k] {
                    for cand in [m as i64, -(m as i64)] {
                        if p.eval_int(cand) == Some(0) {
                            int_root = Some(cand);
                            break 'scan;
                        }
                    }
                }
            }
            k += 1;
        }
    }
    let degree = p.degree();
    match int_root {
        Some(r) if degree > 1 => MinimalityScreen {
            reducible: true,
            fully_verified: true,
            note: format!("integer root {r} splits off a linear factor"),
        },
        _ => MinimalityScreen {
            reducible: false,
            fully_verified: degree <= 3,
            note: if degree <= 3 {
                "irreducibility verified (degree <= 3, no rational root)".into()
            } else {
                "rational-root screen only; irreducibility unverified".into()
            },
        },
    }
}

#[derive(Debug, Clone)]
pub struct PisotReport {
    pub decision: Decision,
    pub roots: RootSet,
    /// The real root > 1 when the decision is yes.
    pub dominant: Option<f64>,
    pub failed_clause: Option<String>,
    pub screen: MinimalityScreen,
}

/// Decides whether the (assumed minimal) polynomial defines a Pisot number:
/// exactly one real root greater than 1, all other roots of modulus below
/// `1 - tol`. Moduli inside `[1 - tol, 1 + tol]` yield `Ambiguous`.
pub fn is_pisot_number(p: &IntegerPolynomial, tol: f64) -> Result<PisotReport, PisotError> {
    let screen = minimality_screen(p);
    if screen.reducible {
        return Err(PisotError::NotMinimal(screen.note));
    }
    let rs = roots(p)?;
    let mut sorted = rs.roots.clone();
    sorted.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());
    let top = sorted[0];
    let top_real = top.im.abs() <= tol * (1.0 + top.norm());

    // The dominant root must be verifiably real and strictly above 1;
    // otherwise the candidate is simply not a Pisot number. The tolerance
    // band around 1 yields "ambiguous" only for conjugates (Salem-like
    // configurations), not here.
    if !top_real || top.re <= 1.0 + tol {
        return Ok(PisotReport {
            decision: Decision::No,
            roots: rs,
            dominant: None,
            failed_clause: Some("no real root greater than 1 dominates".into()),
            screen,
        });
    }
    let mut ambiguous = false;
    for z in &sorted[1..] {
        let m = z.norm();
        if m > 1.0 + tol {
            return Ok(PisotReport {
                decision: Decision::No,
                roots: rs,
                dominant: Some(top.re),
                failed_clause: Some(format!("conjugate root with modulus {m:.12} > 1")),
                screen,
            });
        }
        if m >= 1.0 - tol {
            ambiguous = true;
        }
    }
    if ambiguous {
        return Ok(PisotReport {
            decision: Decision::Ambiguous,
            roots: rs,
            dominant: Some(top.re),
            failed_clause: Some("conjugate modulus within tolerance of 1".into()),
            screen,
        });
    }
    Ok(PisotReport {
        decision: Decision::Yes,
        roots: rs,
        dominant: Some(top.re),
        failed_clause: None,
        screen,
    })
}

#[derive(Debug, Clone)]
pub struct FamilyReport {
    pub decision: Decision,
    pub roots: RootSet,
    pub failed_clause: Option<String>,
    pub screen: MinimalityScreen,
}

/// Decides the Pisot-family property of a tuple against a candidate monic
/// integer polynomial: every tuple entry must exceed 1 in modulus (clause
/// i), match a root of `p`, and every unmatched root must have modulus
/// below 1 (clause ii). Reducible `p` is flagged but not rejected.
pub fn is_pisot_family(
    p: &IntegerPolynomial,
    thetas: &[Complex64],
    tol: f64,
) -> Result<FamilyReport, PisotError> {
    assert!(!thetas.is_empty());
    let screen = minimality_screen(p);
    let rs = roots(p)?;
    let mut matched = vec![false; rs.roots.len()];

    let mut decision = Decision::Yes;
    let mut failed = None;

    for t in thetas {
        let m = t.norm();
        if m <= 1.0 + tol {
            if m >= 1.0 - tol {
                decision = Decision::Ambiguous;
                failed = Some(format!("clause (i): |{t}| within tolerance of 1"));
            } else {
                decision = Decision::No;
                failed = Some(format!("clause (i): |{t}| = {m:.12} <= 1"));
            }
            break;
        }
        // nearest unmatched root
        let match_tol = 1e-6_f64.max(tol) * (1.0 + m);
        let best = rs
            .roots
            .iter()
            .enumerate()
            .filter(|(i, _)| !matched[*i])
            .min_by(|(_, a), (_, b)| {
                (*a - t).norm().partial_cmp(&(*b - t).norm()).unwrap()
            });
        match best {
            Some((i, z)) if (*z - t).norm() <= match_tol => matched[i] = true,
            _ => {
                decision = Decision::No;
                failed = Some(format!("clause (ii): {t} is not a root of P"));
                break;
            }
        }
    }

    if decision == Decision::Yes {
        for (i, z) in rs.roots.iter().enumerate() {
            if matched[i] {
                continue;
            }
            let m = z.norm();
            if m > 1.0 + tol {
                decision = Decision::No;
                failed = Some(format!(
                    "clause (ii): unmatched root with modulus {m:.12} >= 1"
                ));
                break;
            }
            if m >= 1.0 - tol {
                decision = Decision::Ambiguous;
                failed = Some("clause (ii): unmatched root modulus within tolerance of 1".into());
            }
        }
    }

    Ok(FamilyReport {
        decision,
        roots: rs,
        failed_clause: failed,
        screen,
    })
}
