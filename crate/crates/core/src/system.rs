//! Operating point of a binary thermal-noise link and its detection thresholds.
//!
//! Received variances follow `σ_x0² = σ_w²(|h|²δ + 1)` and
//! `σ_x1² = σ_w²(|h|²αδ + 1)`, i.e. δ is the ratio of the bit-0 transmit
//! noise variance to the receiver noise variance.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Boltzmann constant in J/K (exact SI value).
pub const BOLTZMANN: f64 = 1.380_649e-23;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    alpha: f64,
    delta: f64,
    sigma_w2: f64,
    n_samples: u32,
}

impl SystemParams {
    pub fn new(alpha: f64, delta: f64, sigma_w2: f64, n_samples: u32) -> Result<Self> {
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(Error::validation("alpha", format!("must be finite and > 1, got {alpha}")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::validation("delta", format!("must be finite and > 0, got {delta}")));
        }
        if !(sigma_w2 > 0.0 && sigma_w2.is_finite()) {
            return Err(Error::validation(
                "sigma_w2",
                format!("must be finite and > 0, got {sigma_w2}"),
            ));
        }
        if n_samples == 0 {
            return Err(Error::validation("n_samples", "must be at least 1"));
        }
        Ok(Self {
            alpha,
            delta,
            sigma_w2,
            n_samples,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn sigma_w2(&self) -> f64 {
        self.sigma_w2
    }

    pub fn n_samples(&self) -> u32 {
        self.n_samples
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        Self::new(alpha, self.delta, self.sigma_w2, self.n_samples)
    }

    pub fn with_delta(self, delta: f64) -> Result<Self> {
        Self::new(self.alpha, delta, self.sigma_w2, self.n_samples)
    }

    pub fn with_sigma_w2(self, sigma_w2: f64) -> Result<Self> {
        Self::new(self.alpha, self.delta, sigma_w2, self.n_samples)
    }

    pub fn with_n_samples(self, n_samples: u32) -> Result<Self> {
        Self::new(self.alpha, self.delta, self.sigma_w2, n_samples)
    }

    /// Transmit-side noise variances `(σ₀², σ₁²) = (δσ_w², αδσ_w²)`.
    pub fn transmit_variances(&self) -> (f64, f64) {
        let s0 = self.delta * self.sigma_w2;
        (s0, self.alpha * s0)
    }
}

/// A resistor at a given temperature, observed over a given bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalNoiseSource {
    resistance: f64,
    temperature: f64,
    bandwidth: f64,
}

impl PhysicalNoiseSource {
    pub fn new(resistance: f64, temperature: f64, bandwidth: f64) -> Result<Self> {
        for (name, v) in [
            ("resistance", resistance),
            ("temperature", temperature),
            ("bandwidth", bandwidth),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(name, format!("must be finite and > 0, got {v}")));
            }
        }
        Ok(Self {
            resistance,
            temperature,
            bandwidth,
        })
    }
}

/// Johnson–Nyquist noise variance `4 R k T B`.
pub fn thermal_variance(src: &PhysicalNoiseSource) -> f64 {
    4.0 * src.resistance * BOLTZMANN * src.temperature * src.bandwidth
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChannelModel {
    /// Known deterministic gain magnitude `|h|`.
    Constant { h_mag: f64 },
    /// Rician envelope with unit mean-square gain.
    Rician { k_factor: f64 },
}

impl ChannelModel {
    pub fn constant(h_mag: f64) -> Result<Self> {
        if !(h_mag >= 0.0 && h_mag.is_finite()) {
            return Err(Error::validation("h_mag", format!("must be finite and >= 0, got {h_mag}")));
        }
        Ok(ChannelModel::Constant { h_mag })
    }

    pub fn rician(k_factor: f64) -> Result<Self> {
        if !(k_factor >= 0.0 && k_factor.is_finite()) {
            return Err(Error::validation(
                "k_factor",
                format!("must be finite and >= 0, got {k_factor}"),
            ));
        }
        Ok(ChannelModel::Rician { k_factor })
    }
}

/// Line-of-sight amplitude `λ = √(K/(K+1))`.
pub fn rician_lambda(k_factor: f64) -> f64 {
    (k_factor / (k_factor + 1.0)).sqrt()
}

/// Scattered power per quadrature component, `σ_s² = 1/(2(K+1))`.
pub fn rician_sigma_s2(k_factor: f64) -> f64 {
    0.5 / (k_factor + 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThresholdRule {
    /// Maximum-likelihood threshold on the sample variance.
    OptimalMl,
    /// Equal-tail threshold of the Gaussian approximation (harmonic mean).
    SuboptimalGaussian,
    /// User-supplied threshold in variance units.
    Fixed(f64),
}

impl ThresholdRule {
    pub fn fixed(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::validation("rule", format!("fixed threshold must be > 0, got {gamma}")));
        }
        Ok(ThresholdRule::Fixed(gamma))
    }
}

impl fmt::Display for ThresholdRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdRule::OptimalMl => f.write_str("opt"),
            ThresholdRule::SuboptimalGaussian => f.write_str("subopt"),
            ThresholdRule::Fixed(g) => write!(f, "fixed:{g:.16e}"),
        }
    }
}

impl FromStr for ThresholdRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "opt" => Ok(ThresholdRule::OptimalMl),
            "subopt" => Ok(ThresholdRule::SuboptimalGaussian),
            other => {
                let value = other
                    .strip_prefix("fixed:")
                    .and_then(|g| g.trim().parse::<f64>().ok())
                    .ok_or_else(|| {
                        Error::validation("rule", format!("expected opt, subopt or fixed:<gamma>, got {other:?}"))
                    })?;
                ThresholdRule::fixed(value)
            }
        }
    }
}

/// `(σ_x0², σ_x1²)` seen by the receiver for channel magnitude `h_mag`.
pub fn received_variances(p: &SystemParams, h_mag: f64) -> (f64, f64) {
    let g = h_mag * h_mag * p.delta;
    (p.sigma_w2 * (g + 1.0), p.sigma_w2 * (g * p.alpha + 1.0))
}

fn check_channel(h_mag: f64) -> Result<()> {
    if h_mag == 0.0 {
        Err(Error::DegenerateChannel)
    } else if !(h_mag > 0.0 && h_mag.is_finite()) {
        Err(Error::domain(format!("|h| must be finite and >= 0, got {h_mag}")))
    } else {
        Ok(())
    }
}

/// Maximum-likelihood threshold
/// `γ = σ_x0²σ_x1² ln(σ_x1²/σ_x0²) / (σ_x1² − σ_x0²)`.
pub fn optimal_threshold(p: &SystemParams, h_mag: f64) -> Result<f64> {
    check_channel(h_mag)?;
    let (s0, s1) = received_variances(p, h_mag);
    let g = h_mag * h_mag * p.delta;
    // σ_x1² − σ_x0² and ln(σ_x1²/σ_x0²) both formed without cancellation.
    let gap = p.sigma_w2 * g * (p.alpha - 1.0);
    let log_ratio = (g * (p.alpha - 1.0) / (1.0 + g)).ln_1p();
    Ok(s0 * s1 / gap * log_ratio)
}

/// Harmonic mean of the two received variances.
pub fn suboptimal_threshold(p: &SystemParams, h_mag: f64) -> Result<f64> {
    check_channel(h_mag)?;
    let (s0, s1) = received_variances(p, h_mag);
    Ok(2.0 * s0 * s1 / (s0 + s1))
}

pub fn resolve_threshold(rule: ThresholdRule, p: &SystemParams, h_mag: f64) -> Result<f64> {
    match rule {
        ThresholdRule::OptimalMl => optimal_threshold(p, h_mag),
        ThresholdRule::SuboptimalGaussian => suboptimal_threshold(p, h_mag),
        ThresholdRule::Fixed(g) if g > 0.0 => Ok(g),
        ThresholdRule::Fixed(g) => Err(Error::domain(format!("fixed threshold must be > 0, got {g}"))),
    }
}
