//! Monte Carlo side of the toolkit: direct sampling of the truncated digit
//! series and the empirical characteristic function. Serves as an
//! independent oracle for the product formula.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::fourier::unit_phase;
use crate::ifs::HomogeneousIfs;

/// Points per sampling partition. Each partition draws from its own seeded
/// stream, so results do not depend on how partitions are scheduled over
/// threads.
const PARTITION: usize = 1 << 14;

#[derive(Debug, Clone, Copy)]
pub struct SampleConfig {
    pub num_points: usize,
    pub depth: u32,
    pub seed: u64,
}

impl SampleConfig {
    /// Config with the depth chosen so the neglected series tail is below
    /// 1e-12 in every coordinate.
    pub fn auto(sys: &HomogeneousIfs, num_points: usize, seed: u64) -> Self {
        Self {
            num_points,
            depth: auto_depth(sys),
            seed,
        }
    }
}

/// Smallest depth with `||A||_inf^depth * max||a_j|| * b1/(b1-1) < 1e-12`.
pub fn auto_depth(sys: &HomogeneousIfs) -> u32 {
    let b1 = sys.min_expansion();
    let lead = sys.max_digit_l1().max(1.0) * b1 / (b1 - 1.0);
    let mut depth = 1;
    let mut tail = lead / b1;
    while tail >= 1e-12 && depth < 4096 {
        depth += 1;
        tail /= b1;
    }
    depth
}

/// Flat row-major point store.
#[derive(Debug, Clone)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.coords.chunks_exact(self.dim)
    }
}

/// Draws `cfg.num_points` independent samples of the truncated series
/// `sum_{n < depth} A^n b_n`, digits chosen with the system's
/// probabilities. This samples the law of the invariant measure up to the
/// series tail, which the auto depth keeps below 1e-12.
pub fn sample_points(sys: &HomogeneousIfs, cfg: &SampleConfig) -> PointSet {
    assert!(cfg.num_points >= 1 && cfg.depth >= 1);
    let d = sys.dim();
    let cdf: Vec<f64> = sys
        .probs()
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let parts = cfg.num_points.div_ceil(PARTITION);
    let chunks: Vec<Vec<f64>> = (0..parts)
        .into_par_iter()
        .map(|part| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(part as u64 + 1);
            let count = PARTITION.min(cfg.num_points - part * PARTITION);
            let mut out = vec![0.0; count * d];
            let mut scale = vec![0.0; d];
            for point in out.chunks_exact_mut(d) {
                scale.fill(1.0);
                for _ in 0..cfg.depth {
                    let u: f64 = rng.random();
                    let j = cdf.partition_point(|c| *c < u).min(cdf.len() - 1);
                    let digit = &sys.digits()[j];
                    for k in 0..d {
                        point[k] += scale[k] * digit[k];
                        scale[k] /= sys.theta()[k];
                    }
                }
            }
            out
        })
        .collect();
    let mut coords = Vec::with_capacity(cfg.num_points * d);
    for c in chunks {
        coords.extend_from_slice(&c);
    }
    PointSet { dim: d, coords }
}

/// `(1/M) sum_i exp(-2 pi i <xi, x_i>)`. Standard error is at most
/// `1/sqrt(M)` per real component.
pub fn empirical_cf(points: &PointSet, xi: &[f64]) -> Complex64 {
    assert!(!points.is_empty());
    assert_eq!(points.dim(), xi.len());
    let sums: Vec<Complex64> = points
        .coords
        .par_chunks(PARTITION * points.dim)
        .map(|block| {
            block
                .chunks_exact(points.dim)
                .map(|x| unit_phase(x.iter().zip(xi).map(|(a, b)| a * b).sum()))
                .sum()
        })
        .collect();
    let total: Complex64 = sums.iter().sum();
    total / points.len() as f64
}
