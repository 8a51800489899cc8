//! Real and complex special functions.

mod gamma;
mod hyper;
mod incomplete;
mod marcum;

pub use gamma::{digamma, ln_gamma, ln_gamma_real};
pub use hyper::{kummer_1f1, laguerre_normalized};
pub use incomplete::{
    inverse_regularized_q, ln_regularized_p, regularized_p, regularized_pq, regularized_q, upper_gamma,
};
pub use marcum::marcum_q;
