//! Special functions and quadrature used by the analytic evaluators.

pub mod adaptive;
pub mod bessel;
pub mod gamma;
pub mod laguerre;
pub mod normal;

pub use bessel::bessel_i0_scaled;
pub use gamma::{
    chi_squared_cdf, chi_squared_sf, ln_gamma, regularized_gamma_pair, regularized_lower_gamma,
    regularized_upper_gamma,
};
pub use laguerre::{cached_gauss_laguerre, gauss_laguerre_rule, QuadratureRule};
pub use normal::q_function;
