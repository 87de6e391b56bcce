use crate::error::{Error, Result};

const SERIES_CUTOFF: f64 = 15.0;

/// Exponentially scaled modified Bessel function of the first kind, order
/// zero: `e^{-x} I₀(x)` for `x ≥ 0`.
///
/// The scaled form stays finite for every representable argument, whereas
/// `I₀` itself overflows near `x ≈ 713`.
pub fn bessel_i0_scaled(x: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::domain(format!("bessel_i0_scaled needs x >= 0, got {x}")));
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    Ok(if x < SERIES_CUTOFF {
        ascending_series(x) * (-x).exp()
    } else {
        asymptotic_scaled(x)
    })
}

// I₀(x) = Σ (x²/4)^k / (k!)²
fn ascending_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    while term > sum * 1e-17 {
        k += 1.0;
        term *= q / (k * k);
        sum += term;
    }
    sum
}

// e^{-x} I₀(x) ~ (2πx)^{-1/2} Σ ((2k-1)!!)² / (k! 8^k x^k), truncated at its
// smallest term.
fn asymptotic_scaled(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    loop {
        k += 1.0;
        let next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * x);
        if next >= term || next < sum * 1e-17 {
            break;
        }
        term = next;
        sum += term;
    }
    sum / (2.0 * std::f64::consts::PI * x).sqrt()
}
