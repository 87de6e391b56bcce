//! Analytic bit-error probabilities.
//!
//! Conditioned on the channel magnitude the detection statistic is a scaled
//! chi-squared variable with `2N` degrees of freedom, which gives the exact
//! conditional error. The Rician average is evaluated two independent ways:
//! a Gauss–Laguerre sum in the variable `x = r²(K+1)` and an adaptive
//! Gauss–Kronrod integral directly over the envelope `r`.
//!
//! Below roughly `1e-14` the conditional error is dominated by rounding in
//! the chi-squared tails; such values are reported as computed.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::adaptive::{self, DEFAULT_PANEL_BUDGET};
use crate::kernels::{
    bessel_i0_scaled, cached_gauss_laguerre, q_function, regularized_lower_gamma,
    regularized_upper_gamma, QuadratureRule,
};
use crate::system::{
    received_variances, resolve_threshold, rician_lambda, rician_sigma_s2, ChannelModel,
    SystemParams, ThresholdRule,
};

pub const DEFAULT_QUADRATURE_ORDER: usize = 30;

const CLAMP_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BepMethod {
    ExactConditional,
    RicianGaussLaguerre,
    RicianAdaptiveOracle,
    ApproxQFunction,
    AsymptoticFloor,
    MonteCarlo,
}

impl fmt::Display for BepMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BepMethod::ExactConditional => "exact",
            BepMethod::RicianGaussLaguerre => "gl",
            BepMethod::RicianAdaptiveOracle => "adaptive",
            BepMethod::ApproxQFunction => "approx",
            BepMethod::AsymptoticFloor => "asymptotic",
            BepMethod::MonteCarlo => "mc",
        })
    }
}

impl std::str::FromStr for BepMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "exact" => BepMethod::ExactConditional,
            "gl" => BepMethod::RicianGaussLaguerre,
            "adaptive" => BepMethod::RicianAdaptiveOracle,
            "approx" => BepMethod::ApproxQFunction,
            "asymptotic" => BepMethod::AsymptoticFloor,
            "mc" => BepMethod::MonteCarlo,
            other => {
                return Err(Error::validation(
                    "methods",
                    format!("unknown method {other:?} (exact, gl, adaptive, approx, asymptotic, mc)"),
                ))
            }
        })
    }
}

/// A bit-error probability together with what produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct BepEstimate {
    pub value: f64,
    pub method: BepMethod,
    pub rule: Option<ThresholdRule>,
    pub alpha: f64,
    pub n_samples: u32,
    /// Full operating point; absent for the δ-independent floor.
    pub params: Option<SystemParams>,
    pub channel: Option<ChannelModel>,
    pub quadrature_order: Option<usize>,
    /// Error bound reported by adaptive quadrature.
    pub error_bound: Option<f64>,
}

impl BepEstimate {
    fn new(value: f64, method: BepMethod, params: &SystemParams) -> Self {
        BepEstimate {
            value,
            method,
            rule: None,
            alpha: params.alpha(),
            n_samples: params.n_samples(),
            params: Some(*params),
            channel: None,
            quadrature_order: None,
            error_bound: None,
        }
    }
}

/// Clamp roundoff excursions outside `[0, 1]`; anything larger is a failure.
fn clamp_probability(value: f64, context: &str) -> Result<f64> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else if (-CLAMP_SLACK..=1.0 + CLAMP_SLACK).contains(&value) {
        Ok(value.clamp(0.0, 1.0))
    } else {
        Err(Error::Numerical(format!(
            "{context}: probability {value:e} outside [0, 1] beyond roundoff"
        )))
    }
}

/// `½[1 − F_Z(2Nγ/σ_x0²) + F_Z(2Nγ/σ_x1²)]` for an explicit threshold.
pub fn error_probability_at(p: &SystemParams, h_mag: f64, gamma: f64) -> Result<f64> {
    let n = f64::from(p.n_samples());
    let (s0, s1) = received_variances(p, h_mag);
    // F_Z(2Nγ/σ²) at 2N degrees of freedom is P(N, Nγ/σ²).
    let miss0 = regularized_upper_gamma(n, n * gamma / s0)?;
    let miss1 = regularized_lower_gamma(n, n * gamma / s1)?;
    Ok(0.5 * (miss0 + miss1))
}

/// Conditional error probability for a given rule; `|h| = 0` yields ½.
pub fn conditional_error(p: &SystemParams, h_mag: f64, rule: ThresholdRule) -> Result<f64> {
    if h_mag == 0.0 {
        return Ok(0.5);
    }
    let gamma = resolve_threshold(rule, p, h_mag)?;
    error_probability_at(p, h_mag, gamma)
}

pub fn bep_conditional(p: &SystemParams, h_mag: f64, rule: ThresholdRule) -> Result<BepEstimate> {
    let value = clamp_probability(conditional_error(p, h_mag, rule)?, "conditional BEP")?;
    Ok(BepEstimate {
        rule: Some(rule),
        channel: Some(ChannelModel::constant(h_mag)?),
        ..BepEstimate::new(value, BepMethod::ExactConditional, p)
    })
}

/// Rician average by Gauss–Laguerre quadrature of order `order`.
pub fn bep_rician_gl(
    p: &SystemParams,
    k_factor: f64,
    rule: ThresholdRule,
    order: usize,
) -> Result<BepEstimate> {
    let quad = cached_gauss_laguerre(order)?;
    bep_rician_with_rule(p, k_factor, rule, quad)
}

/// Same as [`bep_rician_gl`] with a caller-supplied rule.
///
/// With `λ² = K/(K+1)` and `2σ_s² = 1/(K+1)` each term reduces to
/// `w_j e^{-K} I₀(2√(K x_j)) P_e(√(x_j/(K+1)))`, evaluated through the scaled
/// Bessel function so that nothing overflows for large `K x_j`.
pub fn bep_rician_with_rule(
    p: &SystemParams,
    k_factor: f64,
    rule: ThresholdRule,
    quad: &QuadratureRule,
) -> Result<BepEstimate> {
    let channel = ChannelModel::rician(k_factor)?;
    let mut sum = 0.0;
    for (&x, &log_w) in quad.nodes().iter().zip(quad.log_weights()) {
        let b = 2.0 * (k_factor * x).sqrt();
        let i0e = bessel_i0_scaled(b)?;
        if i0e == 0.0 {
            continue;
        }
        let weight = (log_w + i0e.ln() + b - k_factor).exp();
        if weight == 0.0 {
            continue;
        }
        let r = (x / (k_factor + 1.0)).sqrt();
        sum += weight * conditional_error(p, r, rule)?;
    }
    let value = clamp_probability(sum, "Gauss-Laguerre Rician BEP")?;
    Ok(BepEstimate {
        rule: Some(rule),
        channel: Some(channel),
        quadrature_order: Some(quad.order()),
        ..BepEstimate::new(value, BepMethod::RicianGaussLaguerre, p)
    })
}

/// Rician envelope density `f_R(r)`, overflow-safe.
pub fn rician_pdf(k_factor: f64, r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let lambda = rician_lambda(k_factor);
    let s2 = rician_sigma_s2(k_factor);
    let arg = r * lambda / s2;
    // e^{-(r²+λ²)/2σ²} I₀(rλ/σ²) = e^{-(r-λ)²/2σ²} · e^{-arg} I₀(arg)
    let scaled = bessel_i0_scaled(arg).unwrap_or(0.0);
    r / s2 * (-(r - lambda).powi(2) / (2.0 * s2)).exp() * scaled
}

fn check_rel_tol(rel_tol: f64) -> Result<()> {
    if (1e-12..=1e-4).contains(&rel_tol) {
        Ok(())
    } else {
        Err(Error::domain(format!("rel_tol must lie in [1e-12, 1e-4], got {rel_tol}")))
    }
}

/// Integrate `g(r) f_R(r)` over the envelope, truncated where the Rician
/// tail mass is far below `rel_tol`.
fn integrate_over_envelope(
    p: &SystemParams,
    k_factor: f64,
    rel_tol: f64,
    mut g: impl FnMut(f64) -> Result<f64>,
) -> Result<adaptive::Integral> {
    let lambda = rician_lambda(k_factor);
    let s2 = rician_sigma_s2(k_factor);
    let sigma = s2.sqrt();
    // P(R > λ + t) ≤ P(|scatter| > t) = e^{-t²/2σ²}; keep tail mass ≤ 1e-3·rel_tol.
    let r_max = lambda + sigma * (2.0 * (1e3 / rel_tol).ln()).sqrt();

    // The conditional error switches from ½ to its floor around r²δ ≈ 1/α.
    let knee = 1.0 / (p.delta() * p.alpha()).sqrt();
    let mut breaks: Vec<f64> = (-3..=3).map(|e| knee * 10f64.powi(e)).collect();
    breaks.push(1.0 / p.delta().sqrt());
    breaks.extend([-6.0, -3.0, -1.0, 0.0, 1.0, 3.0, 6.0].map(|c| lambda + c * sigma));

    let mut failure = None;
    let integral = adaptive::integrate(
        |r| match g(r) {
            Ok(v) => v * rician_pdf(k_factor, r),
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        },
        0.0,
        r_max,
        &breaks,
        0.0,
        rel_tol,
        DEFAULT_PANEL_BUDGET,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    integral
}

/// Rician average by adaptive integration over `r`; the independent oracle
/// for [`bep_rician_gl`].
pub fn bep_rician_adaptive(
    p: &SystemParams,
    k_factor: f64,
    rule: ThresholdRule,
    rel_tol: f64,
) -> Result<BepEstimate> {
    check_rel_tol(rel_tol)?;
    let channel = ChannelModel::rician(k_factor)?;
    let integral = integrate_over_envelope(p, k_factor, rel_tol, |r| conditional_error(p, r, rule))?;
    let value = clamp_probability(integral.value, "adaptive Rician BEP")?;
    Ok(BepEstimate {
        rule: Some(rule),
        channel: Some(channel),
        error_bound: Some(integral.error_bound),
        ..BepEstimate::new(value, BepMethod::RicianAdaptiveOracle, p)
    })
}

/// Large-δ error floor; depends on α and N only.
pub fn bep_asymptotic(alpha: f64, n_samples: u32) -> Result<BepEstimate> {
    // Validate through the shared constructor; δ and σ_w² are placeholders.
    SystemParams::new(alpha, 1.0, 1.0, n_samples)?;
    let n = f64::from(n_samples);
    let t = alpha.ln() / (alpha - 1.0);
    let value = 0.5 * (regularized_upper_gamma(n, alpha * n * t)? + regularized_lower_gamma(n, n * t)?);
    Ok(BepEstimate {
        value: clamp_probability(value, "asymptotic BEP")?,
        method: BepMethod::AsymptoticFloor,
        rule: Some(ThresholdRule::OptimalMl),
        alpha,
        n_samples,
        params: None,
        channel: None,
        quadrature_order: None,
        error_bound: None,
    })
}

/// Argument of the Gaussian-approximation error, `√N g(α−1) / (2 + g(α+1))`
/// with `g = |h|²δ`.
pub fn approx_q_argument(p: &SystemParams, h_mag: f64) -> f64 {
    let g = h_mag * h_mag * p.delta();
    let a = p.alpha();
    f64::from(p.n_samples()).sqrt() * g * (a - 1.0) / (2.0 + g * (a + 1.0))
}

/// Gaussian-approximation BEP; constant channels are closed form, Rician
/// channels are averaged adaptively like [`bep_rician_adaptive`].
pub fn bep_approx_qfunction(
    p: &SystemParams,
    channel: ChannelModel,
    rel_tol: f64,
) -> Result<BepEstimate> {
    let (value, error_bound) = match channel {
        ChannelModel::Constant { h_mag } => (q_function(approx_q_argument(p, h_mag)), None),
        ChannelModel::Rician { k_factor } => {
            check_rel_tol(rel_tol)?;
            let integral = integrate_over_envelope(p, k_factor, rel_tol, |r| {
                Ok(q_function(approx_q_argument(p, r)))
            })?;
            (integral.value, Some(integral.error_bound))
        }
    };
    Ok(BepEstimate {
        rule: Some(ThresholdRule::SuboptimalGaussian),
        channel: Some(channel),
        error_bound,
        ..BepEstimate::new(
            clamp_probability(value, "approximate BEP")?,
            BepMethod::ApproxQFunction,
            p,
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::system::{optimal_threshold, suboptimal_threshold};

    fn params(alpha: f64, delta: f64, n: u32) -> SystemParams {
        SystemParams::new(alpha, delta, 1.0, n).unwrap()
    }

    #[test]
    fn vanishing_threshold_always_decides_one() {
        let p = params(8.0, 0.8, 50);
        let v = bep_conditional(&p, 1.0, ThresholdRule::Fixed(1e-300)).unwrap();
        assert!((v.value - 0.5).abs() < 1e-15);
    }

    #[test]
    fn degenerate_channel_is_a_coin_flip() {
        let p = params(8.0, 0.8, 50);
        for rule in [ThresholdRule::OptimalMl, ThresholdRule::SuboptimalGaussian, ThresholdRule::Fixed(3.0)] {
            assert_eq!(bep_conditional(&p, 0.0, rule).unwrap().value, 0.5);
        }
    }

    #[test]
    fn single_sample_closed_form() {
        for (alpha, delta, h) in [(8.0, 0.8, 1.0), (3.0, 2.0, 0.4), (25.0, 0.3, 1.7)] {
            let p = params(alpha, delta, 1);
            let (s0, s1) = received_variances(&p, h);
            for rule in [ThresholdRule::OptimalMl, ThresholdRule::SuboptimalGaussian] {
                let g = resolve_threshold(rule, &p, h).unwrap();
                let expected = 0.5 * ((-g / s0).exp() + 1.0 - (-g / s1).exp());
                let got = bep_conditional(&p, h, rule).unwrap().value;
                assert!((got - expected).abs() < 1e-15, "{got} vs {expected}");
            }
        }
    }

    #[test]
    fn gaussian_approximation_at_subopt_matches_q_argument() {
        // Under σ̂² ~ Normal(σ_i², σ_i⁴/N) both error tails at the harmonic-mean
        // threshold equal Q(√N (γ/σ_x0² − 1)).
        for (alpha, delta, h, n) in [(8.0, 0.8, 1.0, 50), (4.0, 0.2, 2.0, 15), (30.0, 3.0, 0.5, 100)] {
            let p = params(alpha, delta, n);
            let (s0, s1) = received_variances(&p, h);
            let g = suboptimal_threshold(&p, h).unwrap();
            let nf = f64::from(n).sqrt();
            let from_bit0 = nf * (g / s0 - 1.0);
            let from_bit1 = nf * (1.0 - g / s1);
            let arg = approx_q_argument(&p, h);
            assert!((from_bit0 / arg - 1.0).abs() < 1e-13);
            assert!((from_bit1 / arg - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn approx_constant_channel() {
        let p = params(8.0, 0.8, 50);
        let zero = bep_approx_qfunction(&p, ChannelModel::Constant { h_mag: 0.0 }, 1e-9).unwrap();
        assert_eq!(zero.value, 0.5);
        let a = bep_approx_qfunction(&p, ChannelModel::Constant { h_mag: 1.0 }, 1e-9).unwrap();
        let b = bep_approx_qfunction(&p.with_n_samples(100).unwrap(), ChannelModel::Constant { h_mag: 1.0 }, 1e-9)
            .unwrap();
        assert!(b.value < a.value);
    }

    #[test]
    fn asymptotic_floor_values() {
        let a8 = 8f64;
        let t = a8.ln() / 7.0;
        let expected = 0.5
            * (1.0 - regularized_lower_gamma(30.0, 8.0 * 30.0 * t).unwrap()
                + regularized_lower_gamma(30.0, 30.0 * t).unwrap());
        let got = bep_asymptotic(8.0, 30).unwrap();
        assert!((got.value / expected - 1.0).abs() < 1e-9);
        assert!(got.params.is_none());
        assert!(bep_asymptotic(8.0, 100).unwrap().value < bep_asymptotic(8.0, 10).unwrap().value);
        assert!(bep_asymptotic(1.0, 10).is_err());
        assert!(bep_asymptotic(8.0, 0).is_err());
    }

    #[test]
    fn rician_pdf_is_normalized() {
        for k in [0.0, 3.0, 10.0, 1e4] {
            let sigma = rician_sigma_s2(k).sqrt();
            let hi = rician_lambda(k) + 12.0 * sigma;
            let mass = adaptive::integrate(|r| rician_pdf(k, r), 0.0, hi, &[rician_lambda(k)], 0.0, 1e-13, 10_000)
                .unwrap()
                .value;
            assert!((mass - 1.0).abs() < 1e-12, "K={k}: {mass}");
        }
    }

    #[test]
    fn rayleigh_gl_matches_adaptive_in_smooth_regime() {
        let p = params(8.0, 0.05, 2);
        let gl = bep_rician_gl(&p, 0.0, ThresholdRule::OptimalMl, 30).unwrap().value;
        let ad = bep_rician_adaptive(&p, 0.0, ThresholdRule::OptimalMl, 1e-11).unwrap().value;
        assert!((gl / ad - 1.0).abs() < 1e-8, "gl {gl} adaptive {ad}");
    }

    #[test]
    fn gl_and_adaptive_agree_with_sixty_nodes() {
        for (delta, n, k) in [(0.3, 15, 3.0), (0.8, 50, 3.0), (0.8, 70, 10.0), (3.0, 30, 10.0)] {
            let p = params(8.0, delta, n);
            let gl = bep_rician_gl(&p, k, ThresholdRule::OptimalMl, 60).unwrap().value;
            let ad = bep_rician_adaptive(&p, k, ThresholdRule::OptimalMl, 1e-10).unwrap().value;
            assert!((gl / ad - 1.0).abs() < 1e-6 || (gl - ad).abs() < 1e-14, "{delta} {n} {k}: {gl} {ad}");
        }
    }

    #[test]
    fn strong_line_of_sight_collapses_to_constant_channel() {
        let p = params(8.0, 0.3, 15);
        let constant = bep_conditional(&p, 1.0, ThresholdRule::OptimalMl).unwrap().value;
        let rician = bep_rician_adaptive(&p, 1e4, ThresholdRule::OptimalMl, 1e-10).unwrap().value;
        assert!((rician / constant - 1.0).abs() < 1e-3, "{rician} vs {constant}");
    }

    #[test]
    fn adaptive_rejects_tolerance_out_of_range() {
        let p = params(8.0, 0.8, 50);
        assert!(bep_rician_adaptive(&p, 3.0, ThresholdRule::OptimalMl, 1e-3).is_err());
        assert!(bep_rician_adaptive(&p, 3.0, ThresholdRule::OptimalMl, 1e-13).is_err());
    }

    #[test]
    fn optimal_threshold_minimises_the_conditional_error() {
        let p = params(8.0, 0.3, 30);
        let (s0, s1) = received_variances(&p, 1.0);
        let opt = optimal_threshold(&p, 1.0).unwrap();
        let at_opt = error_probability_at(&p, 1.0, opt).unwrap();
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..1000 {
            let g = s0 * (s1 / s0).powf(i as f64 / 999.0);
            let v = error_probability_at(&p, 1.0, g).unwrap();
            assert!(v >= at_opt - 1e-15);
            if v < best.0 {
                best = (v, g);
            }
        }
        let step = (s1 / s0).ln() / 999.0;
        assert!((best.1 / opt).ln().abs() <= step);
    }
}
