//! Numerical substrate: log-space special functions, half-line quadrature and
//! tabulated inverse-CDF sampling.

pub mod inverse_cdf;
pub mod quadrature;
pub mod special;

pub use inverse_cdf::InverseCdfSampler;
pub use quadrature::{
    integrate_log_density, integrate_log_density_between, integrate_log_density_many,
    QuadratureConfig, Transform,
};
pub use special::{log_add, log_gamma, log_sum_exp, LogValue};
