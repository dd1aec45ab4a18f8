//! Numerical kernels used by the inference engines.

pub mod dist;
pub mod linalg;
pub mod random;
pub mod special;

pub use dist::{
    gamma_quantile, normal_cdf, normal_quantile, student_t_cdf, student_t_pdf, student_t_quantile,
    student_t_sf, student_t_std,
};
pub use linalg::SpdFactor;
pub use random::{rng_stream, RandomSource};
pub use special::{digamma, ln_beta, ln_gamma, LN_2PI};
