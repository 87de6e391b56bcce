//! Gauss–Laguerre quadrature for `∫₀^∞ e^{-x} f(x) dx`.
//!
//! Nodes are found by Newton iteration on the three-term Laguerre recurrence
//! with the usual asymptotic starting guesses. Weights are kept in log form
//! as well: for orders above ~180 the weights of the outermost nodes fall
//! below the smallest subnormal double, while `ln w` remains representable.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::kernels::gamma::ln_gamma;

pub const MAX_ORDER: usize = 200;

const NEWTON_TOL: f64 = 1e-14;
const NEWTON_MAX_ITER: usize = 100;
const NEWTON_STALL_TOL: f64 = 1e-11;
const MOMENT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes in ascending order.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Weights; may underflow to zero for the outermost nodes of very high orders.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// `Σ w_j f(x_j)`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    /// Relative deviation of the `k`-th factorial moment, `Σ w_j x_j^k / k! - 1`.
    pub fn moment_error(&self, k: u32) -> f64 {
        let log_fact = ln_gamma(f64::from(k) + 1.0);
        let sum: f64 = self
            .nodes
            .iter()
            .zip(&self.log_weights)
            .map(|(&x, &lw)| (lw + f64::from(k) * x.ln() - log_fact).exp())
            .sum();
        sum - 1.0
    }

    /// Copy of this rule with every weight multiplied by `factor`.
    ///
    /// Exists so diagnostics can check that a corrupted rule is detected; the
    /// result deliberately skips validation.
    #[doc(hidden)]
    pub fn with_scaled_weights(&self, factor: f64) -> QuadratureRule {
        QuadratureRule {
            nodes: self.nodes.clone(),
            weights: self.weights.iter().map(|w| w * factor).collect(),
            log_weights: self.log_weights.iter().map(|lw| lw + factor.ln()).collect(),
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.order();
        let ascending = self.nodes.windows(2).all(|p| p[0] < p[1]);
        if !ascending || self.nodes.first().is_some_and(|&x| !(x > 0.0)) {
            return Err(Error::Numerical(format!(
                "Gauss-Laguerre order {n}: nodes not strictly increasing and positive"
            )));
        }
        if self.log_weights.iter().any(|lw| !lw.is_finite()) {
            return Err(Error::Numerical(format!(
                "Gauss-Laguerre order {n}: non-finite weight"
            )));
        }
        for k in 0..2 * n as u32 {
            let err = self.moment_error(k);
            if !(err.abs() <= MOMENT_TOL) {
                return Err(Error::Numerical(format!(
                    "Gauss-Laguerre order {n}: moment {k} off by {err:e}"
                )));
            }
        }
        Ok(())
    }
}

/// Laguerre values `(L_n(x), L_{n-1}(x))` sharing a common scale `e^{log_scale}`.
fn laguerre_scaled(n: usize, x: f64) -> (f64, f64, f64) {
    let mut prev = 1.0;
    let mut cur = 1.0 - x;
    let mut log_scale = 0.0;
    if n == 0 {
        return (1.0, 0.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 - x) * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
        if cur.abs() > 1e150 {
            cur *= 1e-150;
            prev *= 1e-150;
            log_scale += 150.0 * std::f64::consts::LN_10;
        }
    }
    (cur, prev, log_scale)
}

fn check_order(order: usize) -> Result<()> {
    if (1..=MAX_ORDER).contains(&order) {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "Gauss-Laguerre order must be in 1..={MAX_ORDER}, got {order}"
        )))
    }
}

/// Build the `order`-point Gauss–Laguerre rule and check it against the
/// factorial moments before handing it out.
pub fn gauss_laguerre_rule(order: usize) -> Result<QuadratureRule> {
    check_order(order)?;
    let n = order as f64;
    let mut nodes: Vec<f64> = Vec::with_capacity(order);
    let mut log_weights = Vec::with_capacity(order);
    let mut z = 0.0;
    for i in 0..order {
        z = match i {
            0 => 3.0 / (1.0 + 2.4 * n),
            1 => z + 15.0 / (1.0 + 2.5 * n),
            _ => {
                let ai = (i - 1) as f64;
                z + (1.0 + 2.55 * ai) / (1.9 * ai) * (z - nodes[i - 2])
            }
        };
        let mut converged = false;
        let mut last_step = f64::INFINITY;
        for _ in 0..NEWTON_MAX_ITER {
            let (l_n, l_nm1, _) = laguerre_scaled(order, z);
            // L_n'(z) = n (L_n - L_{n-1}) / z
            let step = z * l_n / (n * (l_n - l_nm1));
            // At high order the recurrence carries ~n ulps of noise, so the
            // step stalls above NEWTON_TOL; stop once it no longer shrinks.
            let stalled = step.abs() >= last_step && step.abs() <= NEWTON_STALL_TOL * z.abs();
            z -= step;
            if step.abs() <= NEWTON_TOL * z.abs() || stalled {
                converged = true;
                break;
            }
            last_step = step.abs();
        }
        if !converged {
            return Err(Error::Convergence {
                what: format!("Gauss-Laguerre node {i} of order {order}"),
                estimate: z,
                error_bound: f64::NAN,
            });
        }
        let (l_n, l_nm1, log_scale) = laguerre_scaled(order, z);
        let log_deriv = (n * (l_n - l_nm1) / z).abs().ln() + log_scale;
        // w = 1 / (x [L_n'(x)]²)
        log_weights.push(-z.ln() - 2.0 * log_deriv);
        nodes.push(z);
    }
    let weights = log_weights.iter().map(|lw: &f64| lw.exp()).collect();
    let rule = QuadratureRule {
        nodes,
        weights,
        log_weights,
    };
    rule.validate()?;
    Ok(rule)
}

/// Shared, lazily built rule of the given order.
pub fn cached_gauss_laguerre(order: usize) -> Result<&'static QuadratureRule> {
    static RULES: [OnceLock<Result<QuadratureRule>>; MAX_ORDER] =
        [const { OnceLock::new() }; MAX_ORDER];
    check_order(order)?;
    RULES[order - 1]
        .get_or_init(|| gauss_laguerre_rule(order))
        .as_ref()
        .map_err(Clone::clone)
}
