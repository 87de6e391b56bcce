/// Gaussian tail probability `Q(x) = P(Z > x)` for a standard normal `Z`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x * std::f64::consts::FRAC_1_SQRT_2)
}
