//! Crossed products by dual groups and their truncated seminorms.
//!
//! Length functions come from Laplacian eigenvalues on characters: the
//! circle group `𝕋` has dual `ℤ`, and the Cantor group `(ℤ/N)^ℕ` has dual
//! `⊕ ℤ/N`. Operators live on `ℓ²` of a finite ball in the dual group.

mod fourier;
mod group;
mod length;
mod seminorm;

pub use fourier::{cantor_fourier_check, circle_fourier_check, CircleFourierReport, FourierReport};
pub use group::GroupModel;
pub use length::{
    cantor_dual_length, circle_dual_length, circle_length_value, translation_tail_report, LengthFunction,
    LengthSource, TailReport, DEFAULT_QUADRATURE_NODES,
};
pub use seminorm::{
    Action, BaseSeminorm, CombinedSeminorm, CrossedElement, CrossedSystem, EvaluationReport, GroupSeminorm, SENSITIVITY_GUARD,
};
