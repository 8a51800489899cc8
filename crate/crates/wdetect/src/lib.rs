//! Detection probability of an N-pulse non-coherent detector against
//! Weibull-fluctuating targets.
//!
//! Four independent routes to the same number:
//!
//! * [`detection::pd_series`]: residue double series over the fitted α-μ law.
//! * [`detection::pd_quadrature`]: direct quadrature of the defining integral.
//! * [`fox_h::pd_fox`]: multivariate Fox H-function contour integral.
//! * [`monte_carlo::run`]: simulation of the test statistic.
//!
//! The sum of Weibull pulse powers is approximated by an α-μ law whose
//! parameters come from [`weibull_sum::fit_alpha_mu`].

// `!(x > 0.0)` is used on purpose so NaN is rejected too; coefficient
// tables keep their published digits.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod detection;
pub mod error;
pub mod exec;
pub mod fox_h;
pub mod monte_carlo;
pub mod pipeline;
pub mod quad;
pub mod special;
pub mod weibull_sum;

pub use error::{Error, Result};
pub use exec::Exec;
pub use num_complex::Complex64;
