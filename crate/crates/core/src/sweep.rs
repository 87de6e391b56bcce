//! Parameter sweeps over the analytic evaluators and the simulator.
//!
//! Rows are ordered by sweep value, then method, then rule, and are written
//! as CSV with a fixed column order. Floats use 17 significant digits so a
//! row's echoed parameters reproduce its value exactly when fed back in.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bep::{
    bep_approx_qfunction, bep_asymptotic, bep_conditional, bep_rician_adaptive, bep_rician_gl,
    BepMethod,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::mc::{estimate_bep_with, TrialConfig};
use crate::system::{ChannelModel, SystemParams, ThresholdRule};

pub const CSV_COLUMNS: [&str; 16] = [
    "sweep_var",
    "sweep_value",
    "method",
    "rule",
    "alpha",
    "delta",
    "K_factor",
    "n_samples",
    "N_a",
    "h_mag",
    "sigma_w2",
    "bep",
    "ci_low",
    "ci_high",
    "seed",
    "error",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVar {
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "delta")]
    Delta,
    #[serde(rename = "alpha")]
    Alpha,
    #[serde(rename = "K")]
    K,
    #[serde(rename = "N")]
    N,
}

impl fmt::Display for SweepVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepVar::Gamma => "gamma",
            SweepVar::Delta => "delta",
            SweepVar::Alpha => "alpha",
            SweepVar::K => "K",
            SweepVar::N => "N",
        })
    }
}

impl FromStr for SweepVar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gamma" => Ok(SweepVar::Gamma),
            "delta" => Ok(SweepVar::Delta),
            "alpha" => Ok(SweepVar::Alpha),
            "K" | "k" => Ok(SweepVar::K),
            "N" | "n" => Ok(SweepVar::N),
            other => Err(Error::validation(
                "variable",
                format!("expected gamma, delta, alpha, K or N, got {other:?}"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Linear,
    Log,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "linear" | "lin" => Ok(Scale::Linear),
            "log" => Ok(Scale::Log),
            other => Err(Error::validation("scale", format!("expected linear or log, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepValues {
    Range {
        from: f64,
        to: f64,
        points: usize,
        scale: Scale,
    },
    List(Vec<f64>),
}

impl SweepValues {
    pub fn validate(&self, variable: SweepVar) -> Result<()> {
        match self {
            SweepValues::Range {
                from,
                to,
                points,
                scale,
            } => {
                if variable == SweepVar::N {
                    return Err(Error::validation("values", "N is swept over an explicit integer list"));
                }
                if !(from.is_finite() && to.is_finite() && from < to) {
                    return Err(Error::validation("from", format!("need finite from < to, got {from} .. {to}")));
                }
                if *points < 2 {
                    return Err(Error::validation("points", format!("need at least 2, got {points}")));
                }
                if *scale == Scale::Log && !(*from > 0.0) {
                    return Err(Error::validation("from", "log scale requires from > 0"));
                }
            }
            SweepValues::List(values) => {
                if values.is_empty() {
                    return Err(Error::validation("values", "list is empty"));
                }
                if variable == SweepVar::N
                    && values.iter().any(|v| !(v.fract() == 0.0 && *v >= 1.0 && *v <= f64::from(u32::MAX)))
                {
                    return Err(Error::validation("values", "N values must be positive integers"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::validation("values", "values must be finite"));
                }
            }
        }
        Ok(())
    }

    pub fn points(&self) -> Vec<f64> {
        match self {
            SweepValues::List(v) => v.clone(),
            SweepValues::Range {
                from,
                to,
                points,
                scale,
            } => {
                let last = points - 1;
                (0..*points)
                    .map(|i| {
                        if i == last {
                            return *to;
                        }
                        let t = i as f64 / last as f64;
                        match scale {
                            Scale::Linear => from + (to - from) * t,
                            Scale::Log => from * (to / from).powf(t),
                        }
                    })
                    .collect()
            }
        }
    }
}

/// Parameters of a sweep whose non-swept fields are held fixed.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVar,
    pub values: SweepValues,
    pub params: SystemParams,
    pub channel: ChannelModel,
    pub methods: Vec<BepMethod>,
    pub rules: Vec<ThresholdRule>,
    pub mc: Option<TrialConfig>,
    pub quadrature_order: usize,
    pub rel_tol: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.values.validate(self.variable)?;
        if self.methods.is_empty() {
            return Err(Error::validation("methods", "at least one method is required"));
        }
        if self.rules.is_empty() {
            return Err(Error::validation("rules", "at least one rule is required"));
        }
        if self.methods.contains(&BepMethod::MonteCarlo) && self.mc.is_none() {
            return Err(Error::validation("mc", "method mc needs n_bits and seed"));
        }
        if !(1..=crate::kernels::laguerre::MAX_ORDER).contains(&self.quadrature_order) {
            return Err(Error::validation("n_a", format!("must be in 1..=200, got {}", self.quadrature_order)));
        }
        if !(1e-12..=1e-4).contains(&self.rel_tol) {
            return Err(Error::validation("rel_tol", format!("must be in [1e-12, 1e-4], got {}", self.rel_tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub sweep_var: SweepVar,
    pub sweep_value: f64,
    pub method: BepMethod,
    pub rule: ThresholdRule,
    pub alpha: f64,
    pub delta: f64,
    pub k_factor: Option<f64>,
    pub n_samples: u32,
    pub quadrature_order: Option<usize>,
    pub h_mag: Option<f64>,
    pub sigma_w2: f64,
    pub bep: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub seed: Option<u64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy)]
struct Point {
    value: f64,
    alpha: f64,
    delta: f64,
    sigma_w2: f64,
    n_samples: u32,
    channel: ChannelModel,
}

fn point_at(spec: &SweepSpec, value: f64) -> Point {
    let p = &spec.params;
    let mut pt = Point {
        value,
        alpha: p.alpha(),
        delta: p.delta(),
        sigma_w2: p.sigma_w2(),
        n_samples: p.n_samples(),
        channel: spec.channel,
    };
    match spec.variable {
        SweepVar::Gamma => {}
        SweepVar::Delta => pt.delta = value,
        SweepVar::Alpha => pt.alpha = value,
        SweepVar::K => pt.channel = ChannelModel::Rician { k_factor: value },
        SweepVar::N => pt.n_samples = value as u32,
    }
    pt
}

fn evaluate(spec: &SweepSpec, pt: &Point, method: BepMethod, rule: ThresholdRule, exec: Execution) -> Row {
    let (k_factor, h_mag) = match pt.channel {
        ChannelModel::Constant { h_mag } => (None, Some(h_mag)),
        ChannelModel::Rician { k_factor } => (Some(k_factor), None),
    };
    let mut row = Row {
        sweep_var: spec.variable,
        sweep_value: pt.value,
        method,
        rule,
        alpha: pt.alpha,
        delta: pt.delta,
        k_factor,
        n_samples: pt.n_samples,
        quadrature_order: (method == BepMethod::RicianGaussLaguerre).then_some(spec.quadrature_order),
        h_mag,
        sigma_w2: pt.sigma_w2,
        bep: None,
        ci_low: None,
        ci_high: None,
        seed: None,
        error: None,
    };
    let outcome = (|| -> Result<()> {
        let p = SystemParams::new(pt.alpha, pt.delta, pt.sigma_w2, pt.n_samples)?;
        let channel = match pt.channel {
            ChannelModel::Constant { h_mag } => ChannelModel::constant(h_mag)?,
            ChannelModel::Rician { k_factor } => ChannelModel::rician(k_factor)?,
        };
        let need_rician = || match channel {
            ChannelModel::Rician { k_factor } => Ok(k_factor),
            ChannelModel::Constant { .. } => Err(Error::validation("channel", format!("method {method} needs a Rician channel"))),
        };
        row.bep = Some(match method {
            BepMethod::ExactConditional => match channel {
                ChannelModel::Constant { h_mag } => bep_conditional(&p, h_mag, rule)?.value,
                ChannelModel::Rician { .. } => {
                    return Err(Error::validation("channel", "method exact needs a constant channel"))
                }
            },
            BepMethod::RicianGaussLaguerre => {
                bep_rician_gl(&p, need_rician()?, rule, spec.quadrature_order)?.value
            }
            BepMethod::RicianAdaptiveOracle => {
                bep_rician_adaptive(&p, need_rician()?, rule, spec.rel_tol)?.value
            }
            BepMethod::ApproxQFunction => bep_approx_qfunction(&p, channel, spec.rel_tol)?.value,
            BepMethod::AsymptoticFloor => bep_asymptotic(p.alpha(), p.n_samples())?.value,
            BepMethod::MonteCarlo => {
                let cfg = spec.mc.as_ref().ok_or_else(|| Error::validation("mc", "missing trial config"))?;
                row.seed = Some(cfg.seed());
                let r = estimate_bep_with(&p, channel, rule, cfg, exec)?;
                row.ci_low = Some(r.ci_low);
                row.ci_high = Some(r.ci_high);
                r.bep_hat
            }
        });
        Ok(())
    })();
    if let Err(e) = outcome {
        log::warn!("{} = {}: {method}/{rule}: {e}", spec.variable, pt.value);
        row.error = Some(e.to_string());
    }
    row
}

pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<Row>> {
    run_sweep_with(spec, Execution::default())
}

/// Evaluate every (value, method, rule) cell. Evaluator failures land in the
/// row's `error` column; only an invalid spec aborts.
pub fn run_sweep_with(spec: &SweepSpec, exec: Execution) -> Result<Vec<Row>> {
    spec.validate()?;
    let mut cells = Vec::new();
    for value in spec.values.points() {
        let pt = point_at(spec, value);
        for &method in &spec.methods {
            if spec.variable == SweepVar::Gamma {
                cells.push((pt, method, ThresholdRule::Fixed(value)));
            } else {
                cells.extend(spec.rules.iter().map(|&rule| (pt, method, rule)));
            }
        }
    }
    // Simulations already fan out internally; run them one at a time.
    let (inner, outer) = if spec.methods.contains(&BepMethod::MonteCarlo) {
        (exec, Execution::Sequential)
    } else {
        (Execution::Sequential, exec)
    };
    Ok(outer.map_collect(&cells, |(pt, method, rule)| evaluate(spec, pt, *method, *rule, inner)))
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map(f).unwrap_or_default()
}

impl Row {
    pub fn csv_record(&self) -> [String; 16] {
        [
            self.sweep_var.to_string(),
            format_float(self.sweep_value),
            self.method.to_string(),
            self.rule.to_string(),
            format_float(self.alpha),
            format_float(self.delta),
            opt(self.k_factor, format_float),
            self.n_samples.to_string(),
            opt(self.quadrature_order, |n| n.to_string()),
            opt(self.h_mag, format_float),
            format_float(self.sigma_w2),
            opt(self.bep, format_float),
            opt(self.ci_low, format_float),
            opt(self.ci_high, format_float),
            opt(self.seed, |s| s.to_string()),
            self.error.clone().unwrap_or_default(),
        ]
    }
}

pub fn write_csv<W: Write>(rows: &[Row], out: W) -> Result<()> {
    let io_err = |e: csv::Error| Error::Numerical(format!("writing CSV: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS).map_err(io_err)?;
    for row in rows {
        w.write_record(row.csv_record()).map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::Numerical(format!("writing CSV: {e}")))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(variable: SweepVar, values: SweepValues, methods: Vec<BepMethod>) -> SweepSpec {
        SweepSpec {
            variable,
            values,
            params: SystemParams::new(8.0, 0.3, 1.0, 30).unwrap(),
            channel: ChannelModel::Constant { h_mag: 1.0 },
            methods,
            rules: vec![ThresholdRule::OptimalMl],
            mc: None,
            quadrature_order: 30,
            rel_tol: 1e-9,
        }
    }

    #[test]
    fn grids() {
        let log = SweepValues::Range { from: 0.1, to: 1000.0, points: 5, scale: Scale::Log };
        let pts = log.points();
        assert_eq!(pts.len(), 5);
        assert_eq!(pts[4], 1000.0);
        assert!((pts[2] - 10.0).abs() < 1e-12);
        let lin = SweepValues::Range { from: 1.0, to: 2.0, points: 3, scale: Scale::Linear };
        assert_eq!(lin.points(), vec![1.0, 1.5, 2.0]);
    }

    #[test]
    fn validation_names_the_field() {
        let range = SweepValues::Range { from: 0.1, to: 10.0, points: 4, scale: Scale::Log };
        let bad = spec(SweepVar::Delta, range.clone(), vec![]);
        assert!(matches!(run_sweep(&bad), Err(Error::Validation { field, .. }) if field == "methods"));
        let mut bad = spec(SweepVar::Delta, range.clone(), vec![BepMethod::ExactConditional]);
        bad.rules.clear();
        assert!(matches!(bad.validate(), Err(Error::Validation { field, .. }) if field == "rules"));
        let bad = spec(
            SweepVar::Delta,
            SweepValues::Range { from: -1.0, to: 10.0, points: 4, scale: Scale::Log },
            vec![BepMethod::ExactConditional],
        );
        assert!(matches!(bad.validate(), Err(Error::Validation { field, .. }) if field == "from"));
        let bad = spec(
            SweepVar::Delta,
            SweepValues::Range { from: 1.0, to: 10.0, points: 1, scale: Scale::Linear },
            vec![BepMethod::ExactConditional],
        );
        assert!(matches!(bad.validate(), Err(Error::Validation { field, .. }) if field == "points"));
        let bad = spec(SweepVar::N, SweepValues::List(vec![10.0, 2.5]), vec![BepMethod::ExactConditional]);
        assert!(matches!(bad.validate(), Err(Error::Validation { field, .. }) if field == "values"));
        let bad = spec(SweepVar::Delta, range, vec![BepMethod::MonteCarlo]);
        assert!(matches!(bad.validate(), Err(Error::Validation { field, .. }) if field == "mc"));
    }

    #[test]
    fn row_order_is_value_method_rule() {
        let mut s = spec(
            SweepVar::Delta,
            SweepValues::List(vec![0.3, 0.8]),
            vec![BepMethod::ExactConditional, BepMethod::AsymptoticFloor],
        );
        s.rules = vec![ThresholdRule::OptimalMl, ThresholdRule::SuboptimalGaussian];
        let rows = run_sweep(&s).unwrap();
        let keys: Vec<(f64, BepMethod, ThresholdRule)> = rows.iter().map(|r| (r.delta, r.method, r.rule)).collect();
        let mut expected = Vec::new();
        for d in [0.3, 0.8] {
            for m in [BepMethod::ExactConditional, BepMethod::AsymptoticFloor] {
                for r in [ThresholdRule::OptimalMl, ThresholdRule::SuboptimalGaussian] {
                    expected.push((d, m, r));
                }
            }
        }
        assert_eq!(keys, expected);
    }

    #[test]
    fn evaluator_errors_stay_in_their_row() {
        let mut s = spec(
            SweepVar::Alpha,
            SweepValues::List(vec![0.5, 8.0]),
            vec![BepMethod::ExactConditional, BepMethod::RicianGaussLaguerre],
        );
        s.channel = ChannelModel::Constant { h_mag: 1.0 };
        let rows = run_sweep(&s).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows[0].error.as_deref().unwrap().contains("alpha"));
        assert!(rows[2].bep.is_some() && rows[2].error.is_none());
        assert!(rows[3].error.as_deref().unwrap().contains("Rician"));
    }

    #[test]
    fn gamma_sweep_uses_fixed_rules() {
        let s = spec(
            SweepVar::Gamma,
            SweepValues::Range { from: 1.3, to: 3.4, points: 11, scale: Scale::Log },
            vec![BepMethod::ExactConditional],
        );
        let rows = run_sweep(&s).unwrap();
        assert!(rows.iter().all(|r| r.rule == ThresholdRule::Fixed(r.sweep_value)));
    }

    #[test]
    fn csv_header_and_empty_fields() {
        let s = spec(SweepVar::Delta, SweepValues::List(vec![0.8]), vec![BepMethod::ExactConditional]);
        let rows = run_sweep(&s).unwrap();
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
        let fields: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(fields.len(), 16);
        assert_eq!(fields[0], "delta");
        assert_eq!(fields[6], "");
        assert_eq!(fields[9], "1.0000000000000000e0");
        assert_eq!(fields[12], "");
    }
}
