//! Stationary maximum-likelihood fit: one shared GEV for all observations.

use serde::{Deserialize, Serialize};

use super::{gev_logpdf, nll_item, to_raw, transform_raw, GevParams, RawGevParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    /// Initial step size on the mean NLL.
    pub lr: f64,
    pub max_iters: usize,
    /// Stop once a full step changes the mean NLL by less than this.
    pub tol: f64,
    /// Starting raw shape. Zero would sit in the Gumbel branch, whose shape
    /// gradient is identically zero.
    pub xi_raw0: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lr: 0.1,
            max_iters: 20_000,
            tol: 1e-8,
            xi_raw0: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct StationaryFit<F> {
    pub params: GevParams<F>,
    pub initial_nll: F,
    pub final_nll: F,
    pub iterations: usize,
    pub converged: bool,
}

fn mean_nll<F: Scalar>(z: &[F], p: GevParams<F>) -> F {
    let n = F::lit(z.len() as f64);
    z.iter().fold(F::zero(), |acc, &x| acc - gev_logpdf(x, p)) / n
}

fn mean_grad<F: Scalar>(z: &[F], p: GevParams<F>) -> [F; 3] {
    let n = F::lit(z.len() as f64);
    let mut g = [F::zero(); 3];
    for &x in z {
        let it = nll_item(x, p);
        g[0] += it.d_xi_raw;
        g[1] += it.d_sigma_raw;
        g[2] += it.d_mu;
    }
    g.map(|v| v / n)
}

fn moment_start<F: Scalar>(z: &[F], xi_raw0: F) -> RawGevParams<F> {
    let n = F::lit(z.len() as f64);
    let mean = z.iter().copied().sum::<F>() / n;
    let var = z.iter().map(|&x| (x - mean) * (x - mean)).sum::<F>() / n;
    let std = var.sqrt().max(F::lit(1e-6));
    RawGevParams {
        xi_raw: xi_raw0,
        sigma_raw: (std * F::lit(6.0).sqrt() / F::PI()).ln(),
        mu_raw: mean,
    }
}

/// Gradient descent on the raw parameters, minimizing the mean NLL.
///
/// Steps that do not decrease the exact NLL (including steps that leave the
/// support) are halved until they do; accepted full steps grow the step size.
pub fn fit_stationary<F: Scalar>(z: &[F], cfg: &FitConfig) -> Result<StationaryFit<F>> {
    if z.len() < 10 {
        return Err(Error::InvalidArgument(format!(
            "stationary fit needs at least 10 observations, got {}",
            z.len()
        )));
    }
    if z.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite("observation".into()));
    }
    let mut raw = moment_start(z, F::lit(cfg.xi_raw0));
    let mut p = transform_raw(raw)?;
    let mut loss = mean_nll(z, p);
    if !loss.is_finite() {
        // Outside the support of the shifted start; fall back to Gumbel.
        raw.xi_raw = F::zero();
        p = transform_raw(raw)?;
        loss = mean_nll(z, p);
        if !loss.is_finite() {
            return Err(Error::Numerical("initial NLL is not finite".into()));
        }
    }
    let initial_nll = loss;
    let mut lr = F::lit(cfg.lr);
    let max_lr = F::lit(cfg.lr * 64.0);
    let tol = F::lit(cfg.tol);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_iters {
        iterations += 1;
        let g = mean_grad(z, p);
        let mut step = lr;
        let mut halvings = 0;
        let (next_raw, next_p, next_loss) = loop {
            let cand = RawGevParams {
                xi_raw: raw.xi_raw - step * g[0],
                sigma_raw: raw.sigma_raw - step * g[1],
                mu_raw: raw.mu_raw - step * g[2],
            };
            let cp = transform_raw(cand)?;
            let cl = mean_nll(z, cp);
            if cl.is_finite() && cl <= loss {
                break (cand, cp, cl);
            }
            halvings += 1;
            step = step * F::lit(0.5);
            if halvings > 60 {
                return Err(Error::Numerical("step size collapsed".into()));
            }
        };
        let delta = (loss - next_loss).abs();
        raw = next_raw;
        p = next_p;
        loss = next_loss;
        if halvings == 0 {
            if delta < tol {
                converged = true;
                break;
            }
            lr = (lr * F::lit(1.2)).min(max_lr);
        } else {
            lr = step;
        }
    }
    Ok(StationaryFit {
        params: p,
        initial_nll,
        final_nll: loss,
        iterations,
        converged,
    })
}

/// Raw parameters of a fit, e.g. to seed a network head.
pub fn fitted_raw<F: Scalar>(fit: &StationaryFit<F>) -> RawGevParams<F> {
    to_raw(fit.params)
}
