//! Bit-level Monte Carlo simulation of the variance detector.
//!
//! Work is split over a fixed number of random streams. Stream `i` is a
//! ChaCha8 generator keyed by the master seed with stream id `i`, so results
//! depend only on `(seed, streams)` and never on the worker count. Bits are
//! processed in rounds; after every round the error total is compared with
//! the early-stop target.
//!
//! Gaussian variates come from `rand_distr::StandardNormal` (ziggurat) and
//! chi-squared variates from `rand_distr::Gamma`. Changing either changes
//! every seeded result.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::system::{
    received_variances, resolve_threshold, rician_lambda, rician_sigma_s2, ChannelModel,
    SystemParams, ThresholdRule,
};

pub const DEFAULT_STREAMS: u32 = 64;
const ROUND_BITS_PER_STREAM: u64 = 1 << 14;
/// Two-sided 95 % standard normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplePath {
    /// Draw every complex sample `x_n = h s_n + w_n`.
    Physical,
    /// Draw the sample variance directly as a scaled chi-squared variate.
    Statistical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialConfig {
    n_bits: u64,
    seed: u64,
    max_errors: Option<u64>,
    path: SamplePath,
    streams: u32,
}

impl TrialConfig {
    pub fn new(n_bits: u64, seed: u64) -> Result<Self> {
        if n_bits == 0 {
            return Err(Error::validation("n_bits", "must be at least 1"));
        }
        Ok(TrialConfig {
            n_bits,
            seed,
            max_errors: None,
            path: SamplePath::Statistical,
            streams: DEFAULT_STREAMS,
        })
    }

    pub fn with_max_errors(mut self, max_errors: Option<u64>) -> Result<Self> {
        if let Some(m) = max_errors {
            if m < 10 {
                return Err(Error::validation("max_errors", format!("must be >= 10, got {m}")));
            }
        }
        self.max_errors = max_errors;
        Ok(self)
    }

    pub fn with_path(mut self, path: SamplePath) -> Self {
        self.path = path;
        self
    }

    pub fn with_streams(mut self, streams: u32) -> Result<Self> {
        if streams == 0 {
            return Err(Error::validation("streams", "must be at least 1"));
        }
        self.streams = streams;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn n_bits(&self) -> u64 {
        self.n_bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn max_errors(&self) -> Option<u64> {
        self.max_errors
    }

    pub fn path(&self) -> SamplePath {
        self.path
    }

    pub fn streams(&self) -> u32 {
        self.streams
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub errors: u64,
    pub trials: u64,
    pub bep_hat: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
    pub streams: u32,
}

impl McResult {
    pub fn contains(&self, value: f64) -> bool {
        self.ci_low <= value && value <= self.ci_high
    }
}

/// 95 % Wilson score interval for `errors` successes out of `trials`.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

/// Samples complex gains with a Rician envelope of unit mean-square power.
#[derive(Debug, Clone, Copy)]
pub struct RicianGain {
    lambda: f64,
    sigma: f64,
}

impl RicianGain {
    pub fn new(k_factor: f64) -> Result<Self> {
        ChannelModel::rician(k_factor)?;
        Ok(RicianGain {
            lambda: rician_lambda(k_factor),
            sigma: rician_sigma_s2(k_factor).sqrt(),
        })
    }
}

impl Distribution<Complex64> for RicianGain {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Complex64 {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.sample(StandardNormal);
        Complex64::new(self.lambda + self.sigma * a, self.sigma * b)
    }
}

pub fn draw_rician_gain<R: Rng + ?Sized>(k_factor: f64, rng: &mut R) -> Result<Complex64> {
    Ok(RicianGain::new(k_factor)?.sample(rng))
}

/// Draws the per-symbol sample variance `(1/N) Σ |x_n|²`.
#[derive(Debug, Clone)]
pub struct SymbolSampler {
    params: SystemParams,
    path: SamplePath,
    gamma: Gamma<f64>,
}

impl SymbolSampler {
    pub fn new(params: SystemParams, path: SamplePath) -> Self {
        let gamma = Gamma::new(f64::from(params.n_samples()), 1.0)
            .expect("shape N >= 1 and unit scale are valid");
        SymbolSampler { params, path, gamma }
    }

    pub fn sample<R: Rng + ?Sized>(&self, h: Complex64, bit: bool, rng: &mut R) -> f64 {
        let n = self.params.n_samples();
        match self.path {
            SamplePath::Statistical => {
                let (s0, s1) = received_variances(&self.params, h.norm());
                let var = if bit { s1 } else { s0 };
                // (σ²/2N)·χ²_{2N} = (σ²/N)·Gamma(N, 1)
                var / f64::from(n) * self.gamma.sample(rng)
            }
            SamplePath::Physical => {
                let (tx0, tx1) = self.params.transmit_variances();
                let s_std = (if bit { tx1 } else { tx0 } * 0.5).sqrt();
                let w_std = (self.params.sigma_w2() * 0.5).sqrt();
                let mut acc = 0.0;
                for _ in 0..n {
                    let s = Complex64::new(
                        s_std * rng.sample::<f64, _>(StandardNormal),
                        s_std * rng.sample::<f64, _>(StandardNormal),
                    );
                    let w = Complex64::new(
                        w_std * rng.sample::<f64, _>(StandardNormal),
                        w_std * rng.sample::<f64, _>(StandardNormal),
                    );
                    acc += (h * s + w).norm_sqr();
                }
                acc / f64::from(n)
            }
        }
    }
}

pub fn simulate_symbol_variance<R: Rng + ?Sized>(
    p: &SystemParams,
    h: Complex64,
    bit: bool,
    path: SamplePath,
    rng: &mut R,
) -> f64 {
    SymbolSampler::new(*p, path).sample(h, bit, rng)
}

/// Generator for stream `index` under master `seed`.
pub fn stream_rng(seed: u64, index: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(index));
    rng
}

enum Gain {
    Fixed { h: Complex64, threshold: Option<f64> },
    Rician(RicianGain),
}

struct Simulator {
    sampler: SymbolSampler,
    gain: Gain,
    rule: ThresholdRule,
}

impl Simulator {
    fn run_bits(&self, rng: &mut ChaCha8Rng, bits: u64) -> u64 {
        let mut errors = 0;
        for _ in 0..bits {
            let bit: bool = rng.random();
            let (h, threshold) = match &self.gain {
                Gain::Fixed { h, threshold } => (*h, *threshold),
                Gain::Rician(dist) => {
                    let h = dist.sample(rng);
                    (h, resolve_threshold(self.rule, &self.sampler.params, h.norm()).ok())
                }
            };
            let var = self.sampler.sample(h, bit, rng);
            let decided = match threshold {
                Some(g) => var > g,
                // |h| = 0: the observation carries no information.
                None => rng.random(),
            };
            errors += u64::from(decided != bit);
        }
        errors
    }
}

/// Simulated bit-error rate with a 95 % Wilson interval.
pub fn estimate_bep(
    p: &SystemParams,
    channel: ChannelModel,
    rule: ThresholdRule,
    cfg: &TrialConfig,
) -> Result<McResult> {
    estimate_bep_with(p, channel, rule, cfg, Execution::default())
}

pub fn estimate_bep_with(
    p: &SystemParams,
    channel: ChannelModel,
    rule: ThresholdRule,
    cfg: &TrialConfig,
    exec: Execution,
) -> Result<McResult> {
    if cfg.n_bits == 0 {
        return Err(Error::validation("n_bits", "must be at least 1"));
    }
    if let ThresholdRule::Fixed(g) = rule {
        ThresholdRule::fixed(g)?;
    }
    let gain = match channel {
        ChannelModel::Constant { h_mag } => {
            ChannelModel::constant(h_mag)?;
            let threshold = match resolve_threshold(rule, p, h_mag) {
                Ok(g) => Some(g),
                Err(Error::DegenerateChannel) => None,
                Err(e) => return Err(e),
            };
            Gain::Fixed {
                h: Complex64::new(h_mag, 0.0),
                threshold,
            }
        }
        ChannelModel::Rician { k_factor } => Gain::Rician(RicianGain::new(k_factor)?),
    };
    let sim = Simulator {
        sampler: SymbolSampler::new(*p, cfg.path),
        gain,
        rule,
    };

    let streams = cfg.streams as u64;
    let mut rngs: Vec<ChaCha8Rng> = (0..cfg.streams).map(|i| stream_rng(cfg.seed, i)).collect();
    let mut trials = 0u64;
    let mut errors = 0u64;
    while trials < cfg.n_bits {
        let round = (cfg.n_bits - trials).min(streams * ROUND_BITS_PER_STREAM);
        let (base, extra) = (round / streams, round % streams);
        let quota = |i: usize| base + u64::from((i as u64) < extra);
        errors += exec.map_sum(&mut rngs, |i, rng| sim.run_bits(rng, quota(i)));
        trials += round;
        if cfg.max_errors.is_some_and(|m| errors >= m) {
            break;
        }
    }

    let (ci_low, ci_high) = wilson_interval(errors, trials);
    Ok(McResult {
        errors,
        trials,
        bep_hat: errors as f64 / trials as f64,
        ci_low,
        ci_high,
        seed: cfg.seed,
        streams: cfg.streams,
    })
}
