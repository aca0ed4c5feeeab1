//! Fractional Laplacians, quantum metrics and crossed-product spectral
//! triples on finite models of compact fractal spaces.

// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commutator;
pub mod crossed;
pub mod dyadic;
pub mod error;
pub mod laplacian;
pub mod mk;
pub mod rng;
pub mod spaces;
pub mod verify;

pub use error::{Error, Result};
pub use spaces::{FiniteSpace, SpaceKind, State, WalkDimension};

/// Scalar field of function values: `f64` or `Complex<f64>`.
pub trait Scalar: nalgebra::ComplexField<RealField = f64> + Copy {}

impl<T: nalgebra::ComplexField<RealField = f64> + Copy> Scalar for T {}
