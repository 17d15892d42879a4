//! Numerical toolkit for homogeneous self-affine measures with a diagonal
//! linear part.
//!
//! A system is described by expansion factors `theta` (the contraction is
//! `A = Diag[1/theta_1, ..., 1/theta_d]`), a digit set, and a probability
//! vector. The crate evaluates the Fourier transform of the invariant
//! measure through its convergent infinite product, samples the attractor
//! as an independent Monte Carlo cross-check, measures empirical decay
//! over dyadic shells, decides Pisot numbers and Pisot families from
//! integer polynomials, and implements the nearest-integer trace /
//! difference-table machinery with a branching enumeration that covers
//! the "bad" parameter sets by small intervals.

pub mod decay;
pub mod ek;
pub mod fourier;
pub mod ifs;
pub mod pisot;
pub mod sampler;

pub use fourier::{Transform, TransformQuery};
pub use ifs::{HomogeneousIfs, ParameterBox, ValidationReport};
