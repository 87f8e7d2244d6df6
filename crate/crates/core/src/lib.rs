//! Numerical laboratory for Hardy–Littlewood type inequalities of m-linear
//! operators on `ℓp` spaces.
//!
//! The crate is organised bottom-up:
//!
//! * [`exponents`] — the optimal mixed-sum exponents `λ` (and the scalar `δ`
//!   case) together with admissibility predicates.
//! * [`tensor`] — dense coefficient tensors `A(e_{j1}, …, e_{jm})` and the
//!   nested mixed-norm evaluator.
//! * [`opnorm`] — operator norms on products of `ℓp` balls: alternating
//!   ascent (lower bounds), sign enumeration (exact) and closed forms.
//! * [`witnesses`] — the extremal operator families (diagonal, lift, slice)
//!   and Rademacher matrices.
//! * [`experiments`] — constant-one verification campaigns and growth-rate
//!   scans for inadmissible exponents.
//! * [`cli`] — the `hllab` batch front-end.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod exponents;
pub mod opnorm;
pub mod tensor;
pub mod witnesses;

pub use error::{Error, Result};
pub use exponents::{Exponent, ExponentProfile, MixedExponents};
pub use opnorm::{NormEstimate, NormStatus};
pub use tensor::CoefficientTensor;
