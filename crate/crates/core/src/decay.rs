//! Empirical Fourier decay: shell suprema of the transform modulus,
//! log-log exponent fits, and orbit traces along geometric frequency
//! sequences (where Pisot parameters show their non-decay).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::fourier::{mu_hat, TransformQuery};
use crate::ifs::HomogeneousIfs;

/// Deterministic probe radii per stratified direction. Kept independent of
/// the sample budget so that enlarging the budget only appends random
/// draws, never perturbing the probes.
const PROBE_GRID: usize = 65;

/// Decay profile over dyadic shells: left endpoints, estimated shell
/// suprema of `|mu_hat|`, the least-squares exponent of
/// `-log sup` against `log R`, and the RMS fit residual.
#[derive(Debug, Clone)]
pub struct DecayProfile {
    pub radii: Vec<f64>,
    pub shell_sup: Vec<f64>,
    pub alpha_fit: f64,
    pub fit_residual: f64,
    /// Shells whose supremum was floored at 1e-15 before taking logs.
    pub floored_shells: usize,
}

fn shell_frequencies(dim: usize, r: f64, samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(samples);
    // Stratified probes: each axis plus the all-ones diagonal, on a fixed
    // radial grid of the shell [r, 2r].
    let mut directions: Vec<Vec<f64>> = (0..dim)
        .map(|k| {
            let mut e = vec![0.0; dim];
            e[k] = 1.0;
            e
        })
        .collect();
    if dim > 1 {
        directions.push(vec![1.0; dim]);
    }
    'probe: for i in 0..PROBE_GRID {
        let radius = r * (1.0 + i as f64 / (PROBE_GRID - 1) as f64);
        for dir in &directions {
            if out.len() >= samples {
                break 'probe;
            }
            out.push(dir.iter().map(|x| x * radius).collect());
        }
    }
    // Seeded uniform draws stratified by dominant coordinate, so the whole
    // shell ||xi||_inf in [r, 2r] stays reachable.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < samples {
        let lead = rng.random_range(0..dim);
        let magnitude = r * (1.0 + rng.random::<f64>());
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        let xi: Vec<f64> = (0..dim)
            .map(|k| {
                if k == lead {
                    sign * magnitude
                } else {
                    (2.0 * rng.random::<f64>() - 1.0) * magnitude
                }
            })
            .collect();
        out.push(xi);
    }
    out
}

/// Estimated supremum of `|mu_hat|` over `samples` frequencies with
/// `||xi||_inf in [r, 2r]`. Deterministic in `(r, samples, seed)`, and
/// monotone under doubling `samples`: the probe prefix is fixed and the
/// random draws extend a single stream.
pub fn shell_supremum(sys: &HomogeneousIfs, r: f64, samples: usize, seed: u64) -> f64 {
    assert!(r >= 1.0, "shells start at radius 1");
    assert!(samples >= 1);
    let freqs = shell_frequencies(sys.dim(), r, samples, seed);
    freqs
        .par_iter()
        .map(|xi| {
            mu_hat(sys, &TransformQuery::new(xi.clone()).with_tolerance(1e-10))
                .value
                .norm()
        })
        .reduce(|| 0.0, f64::max)
}

/// Ordinary least squares of `log shell_sup` against `log R`; the decay
/// exponent is the negated slope. Shells reporting 0 are floored at 1e-15
/// and counted in `floored_shells`.
pub fn fit_alpha(points: &[(f64, f64)]) -> DecayProfile {
    assert!(points.len() >= 3, "need at least 3 shells");
    let mut floored = 0;
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|(r, s)| {
            let s = if *s < 1e-15 {
                floored += 1;
                1e-15
            } else {
                *s
            };
            (r.ln(), s.ln())
        })
        .collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|(x, _)| x).sum::<f64>() / n;
    let my = logs.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    let sxy: f64 = logs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = logs
        .iter()
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    DecayProfile {
        radii: points.iter().map(|(r, _)| *r).collect(),
        shell_sup: points.iter().map(|(_, s)| *s).collect(),
        alpha_fit: -slope,
        fit_residual: (rss / n).sqrt(),
        floored_shells: floored,
    }
}

/// Scans dyadic shells `[r, 2r]` for `r = r_min, 2 r_min, ..., <= r_max`
/// and fits the exponent.
pub fn decay_scan(
    sys: &HomogeneousIfs,
    r_min: f64,
    r_max: f64,
    samples: usize,
    seed: u64,
) -> DecayProfile {
    let mut points = Vec::new();
    let mut r = r_min;
    while r <= r_max * (1.0 + 1e-12) {
        points.push((r, shell_supremum(sys, r, samples, seed)));
        r *= 2.0;
    }
    fit_alpha(&points)
}

/// `|mu_hat(base^n * direction)|` for `n = 0..=n_max`.
pub fn orbit_trace(
    sys: &HomogeneousIfs,
    direction: &[f64],
    base: f64,
    n_max: u32,
) -> Vec<(u32, f64)> {
    assert!(base > 1.0);
    assert_eq!(direction.len(), sys.dim());
    (0..=n_max)
        .map(|n| {
            let r = base.powi(n as i32);
            let xi: Vec<f64> = direction.iter().map(|x| x * r).collect();
            let m = mu_hat(sys, &TransformQuery::new(xi).with_tolerance(1e-11))
                .value
                .norm();
            (n, m)
        })
        .collect()
}
