//! Experiment configuration: a TOML file whose keys mirror the sweep fields,
//! overlaid by command-line values.
//!
//! ```toml
//! variable = "delta"
//! from = 0.1
//! to = 100.0
//! points = 40
//! scale = "log"
//! alpha = 8.0
//! n_samples = 30
//! channel = "rician"
//! k_factor = 10.0
//! methods = ["gl", "asymptotic"]
//! rules = ["opt"]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bep::{BepMethod, DEFAULT_QUADRATURE_ORDER};
use crate::error::{Error, Result};
use crate::mc::{SamplePath, TrialConfig, DEFAULT_STREAMS};
use crate::sweep::{Scale, SweepSpec, SweepValues, SweepVar};
use crate::system::{ChannelModel, SystemParams, ThresholdRule};

pub const DEFAULT_REL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub variable: Option<String>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub points: Option<usize>,
    pub scale: Option<String>,
    pub values: Option<Vec<f64>>,

    pub alpha: Option<f64>,
    pub delta: Option<f64>,
    pub sigma_w2: Option<f64>,
    pub n_samples: Option<u32>,

    /// `constant` or `rician`.
    pub channel: Option<String>,
    pub h_mag: Option<f64>,
    pub k_factor: Option<f64>,

    pub methods: Option<Vec<String>>,
    pub rules: Option<Vec<String>>,

    pub n_bits: Option<u64>,
    pub seed: Option<u64>,
    pub max_errors: Option<u64>,
    /// `statistical` or `physical`.
    pub path: Option<String>,
    pub streams: Option<u32>,

    pub n_a: Option<usize>,
    pub rel_tol: Option<f64>,
}

macro_rules! overlay_fields {
    ($dst:ident, $src:ident; $($f:ident),*) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f; } )*
    };
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::validation("config", e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::validation("config", format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(mut self, other: RunConfig) -> Self {
        let dst = &mut self;
        overlay_fields!(dst, other;
            variable, from, to, points, scale, values, alpha, delta, sigma_w2, n_samples,
            channel, h_mag, k_factor, methods, rules, n_bits, seed, max_errors, path, streams,
            n_a, rel_tol);
        self
    }

    pub fn params(&self) -> Result<SystemParams> {
        SystemParams::new(
            self.alpha.unwrap_or(8.0),
            self.delta.unwrap_or(0.8),
            self.sigma_w2.unwrap_or(1.0),
            self.n_samples.unwrap_or(30),
        )
    }

    pub fn channel(&self) -> Result<ChannelModel> {
        match self.channel.as_deref().unwrap_or(if self.k_factor.is_some() { "rician" } else { "constant" }) {
            "constant" => ChannelModel::constant(self.h_mag.unwrap_or(1.0)),
            "rician" => ChannelModel::rician(self.k_factor.unwrap_or(3.0)),
            other => Err(Error::validation("channel", format!("expected constant or rician, got {other:?}"))),
        }
    }

    pub fn rules(&self) -> Result<Vec<ThresholdRule>> {
        match &self.rules {
            None => Ok(vec![ThresholdRule::OptimalMl]),
            Some(list) => list.iter().map(|r| r.parse()).collect(),
        }
    }

    pub fn methods(&self) -> Result<Vec<BepMethod>> {
        match &self.methods {
            None => Ok(vec![BepMethod::ExactConditional]),
            Some(list) => list.iter().map(|m| m.parse()).collect(),
        }
    }

    pub fn sample_path(&self) -> Result<SamplePath> {
        match self.path.as_deref().unwrap_or("statistical") {
            "statistical" => Ok(SamplePath::Statistical),
            "physical" => Ok(SamplePath::Physical),
            other => Err(Error::validation("path", format!("expected statistical or physical, got {other:?}"))),
        }
    }

    pub fn trial_config(&self) -> Result<TrialConfig> {
        Ok(TrialConfig::new(self.n_bits.unwrap_or(10_000_000), self.seed.unwrap_or(1))?
            .with_max_errors(self.max_errors)?
            .with_streams(self.streams.unwrap_or(DEFAULT_STREAMS))?
            .with_path(self.sample_path()?))
    }

    pub fn quadrature_order(&self) -> usize {
        self.n_a.unwrap_or(DEFAULT_QUADRATURE_ORDER)
    }

    pub fn rel_tol(&self) -> f64 {
        self.rel_tol.unwrap_or(DEFAULT_REL_TOL)
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec> {
        let variable: SweepVar = self
            .variable
            .as_deref()
            .ok_or_else(|| Error::validation("variable", "a sweep variable is required"))?
            .parse()?;
        let values = match (&self.values, self.from, self.to, self.points) {
            (Some(list), None, None, None) => SweepValues::List(list.clone()),
            (None, Some(from), Some(to), Some(points)) => SweepValues::Range {
                from,
                to,
                points,
                scale: self.scale.as_deref().unwrap_or("linear").parse::<Scale>()?,
            },
            (Some(_), _, _, _) => {
                return Err(Error::validation("values", "give either values or from/to/points, not both"))
            }
            _ => return Err(Error::validation("from", "a range needs from, to and points")),
        };
        let methods = self.methods()?;
        let mc = if methods.contains(&BepMethod::MonteCarlo) {
            Some(self.trial_config()?)
        } else {
            None
        };
        let spec = SweepSpec {
            variable,
            values,
            params: self.params()?,
            channel: self.channel()?,
            methods,
            rules: self.rules()?,
            mc,
            quadrature_order: self.quadrature_order(),
            rel_tol: self.rel_tol(),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
        variable = "delta"
        from = 0.1
        to = 100.0
        points = 12
        scale = "log"
        alpha = 8.0
        n_samples = 30
        channel = "rician"
        k_factor = 10.0
        methods = ["gl", "asymptotic"]
        rules = ["opt", "subopt"]
    "#;

    #[test]
    fn parses_sweep_file() {
        let spec = RunConfig::from_toml(SAMPLE).unwrap().sweep_spec().unwrap();
        assert_eq!(spec.variable, SweepVar::Delta);
        assert_eq!(spec.channel, ChannelModel::Rician { k_factor: 10.0 });
        assert_eq!(spec.methods, vec![BepMethod::RicianGaussLaguerre, BepMethod::AsymptoticFloor]);
        assert_eq!(spec.rules.len(), 2);
        assert_eq!(spec.quadrature_order, 30);
        assert!(spec.mc.is_none());
    }

    #[test]
    fn flags_win_over_file() {
        let file = RunConfig::from_toml(SAMPLE).unwrap();
        let flags = RunConfig {
            k_factor: Some(3.0),
            points: Some(4),
            ..Default::default()
        };
        let spec = file.overlay(flags).sweep_spec().unwrap();
        assert_eq!(spec.channel, ChannelModel::Rician { k_factor: 3.0 });
        assert_eq!(spec.values.points().len(), 4);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_reported() {
        assert!(matches!(
            RunConfig::from_toml("alpah = 3.0"),
            Err(Error::Validation { field, .. }) if field == "config"
        ));
        let cfg = RunConfig::from_toml("variable = \"delta\"\nvalues = [1.0]\nmethods = [\"magic\"]").unwrap();
        assert!(matches!(cfg.sweep_spec(), Err(Error::Validation { field, .. }) if field == "methods"));
        let cfg = RunConfig::from_toml("variable = \"delta\"\nvalues = [1.0]\nchannel = \"awgn\"").unwrap();
        assert!(matches!(cfg.sweep_spec(), Err(Error::Validation { field, .. }) if field == "channel"));
    }

    #[test]
    fn trial_config_from_keys() {
        let cfg = RunConfig::from_toml("n_bits = 1000\nseed = 9\nmax_errors = 20\npath = \"physical\"\nstreams = 3")
            .unwrap()
            .trial_config()
            .unwrap();
        assert_eq!(cfg.n_bits(), 1000);
        assert_eq!(cfg.seed(), 9);
        assert_eq!(cfg.max_errors(), Some(20));
        assert_eq!(cfg.path(), SamplePath::Physical);
        assert_eq!(cfg.streams(), 3);
    }
}
