//! Generalized extreme value distribution.
//!
//! ```text
//! F(z) = exp(-[1 + xi (z - mu) / sigma]^(-1/xi))     xi != 0
//! F(z) = exp(-exp(-(z - mu) / sigma))                xi == 0
//! ```
//!
//! Shapes with `|xi| < XI_EPS` use the Gumbel branch throughout.

mod crps;
mod fit;
mod nll;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub use crps::{crps, crps_mean};
pub use fit::{fit_stationary, fitted_raw, FitConfig, StationaryFit};
pub use nll::{nll_and_grads, nll_item, BatchNll, NllGrad};

/// Below this magnitude the shape is treated as exactly zero.
pub const XI_EPS: f64 = 1e-6;

/// Floor applied to `1 + xi (z - mu) / sigma` inside logs during training.
pub const SUPPORT_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct GevParams<F> {
    pub xi: F,
    pub sigma: F,
    pub mu: F,
}

/// Unconstrained network outputs before [`transform_raw`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct RawGevParams<F> {
    pub xi_raw: F,
    pub sigma_raw: F,
    pub mu_raw: F,
}

/// `xi = tanh(xi_raw)`, `sigma = exp(sigma_raw)`, `mu = mu_raw`.
pub fn transform_raw<F: Scalar>(raw: RawGevParams<F>) -> Result<GevParams<F>> {
    if !(raw.xi_raw.is_finite() && raw.sigma_raw.is_finite() && raw.mu_raw.is_finite()) {
        return Err(Error::NonFinite(format!("raw GEV parameters {raw:?}")));
    }
    // exp underflows to 0 for very negative inputs; keep the scale positive.
    let sigma = raw.sigma_raw.exp().max(F::min_positive_value());
    // tanh rounds to +-1 for |xi_raw| > ~19; keep the shape strictly inside.
    let bound = F::one() - F::epsilon();
    Ok(GevParams {
        xi: raw.xi_raw.tanh().max(-bound).min(bound),
        sigma,
        mu: raw.mu_raw,
    })
}

/// Inverse of [`transform_raw`] for `|xi| < 1`.
pub fn to_raw<F: Scalar>(p: GevParams<F>) -> RawGevParams<F> {
    RawGevParams {
        xi_raw: p.xi.atanh(),
        sigma_raw: p.sigma.ln(),
        mu_raw: p.mu,
    }
}

impl<F: Scalar> GevParams<F> {
    pub fn new(xi: F, sigma: F, mu: F) -> Result<Self> {
        if !(xi.is_finite() && sigma.is_finite() && mu.is_finite()) {
            return Err(Error::NonFinite(format!("GEV({xi}, {sigma}, {mu})")));
        }
        if sigma <= F::zero() {
            return Err(Error::InvalidArgument(format!("sigma = {sigma} must be > 0")));
        }
        Ok(Self { xi, sigma, mu })
    }

    pub fn gumbel(mu: F, sigma: F) -> Self {
        Self {
            xi: F::zero(),
            sigma,
            mu,
        }
    }

    pub fn is_gumbel(&self) -> bool {
        self.xi.abs() < F::lit(XI_EPS)
    }

    pub fn cdf(&self, z: F) -> F {
        gev_cdf(z, *self)
    }

    pub fn logpdf(&self, z: F) -> F {
        gev_logpdf(z, *self)
    }

    pub fn quantile(&self, u: F) -> Result<F> {
        gev_quantile(u, *self)
    }

    pub fn cast<G: Scalar>(&self) -> GevParams<G> {
        GevParams {
            xi: G::lit(self.xi.as_f64()),
            sigma: G::lit(self.sigma.as_f64()),
            mu: G::lit(self.mu.as_f64()),
        }
    }
}

pub fn gev_cdf<F: Scalar>(z: F, p: GevParams<F>) -> F {
    let y = (z - p.mu) / p.sigma;
    if p.is_gumbel() {
        return (-(-y).exp()).exp();
    }
    let xy = p.xi * y;
    if xy <= -F::one() {
        return if p.xi > F::zero() { F::zero() } else { F::one() };
    }
    (-(-xy.ln_1p() / p.xi).exp()).exp()
}

/// Log-density; `-inf` outside the support.
pub fn gev_logpdf<F: Scalar>(z: F, p: GevParams<F>) -> F {
    let y = (z - p.mu) / p.sigma;
    if p.is_gumbel() {
        return -y - (-y).exp() - p.sigma.ln();
    }
    let xy = p.xi * y;
    if xy <= -F::one() {
        return F::neg_infinity();
    }
    let log_s = xy.ln_1p();
    -(F::one() + p.xi.recip()) * log_s - (-log_s / p.xi).exp() - p.sigma.ln()
}

pub fn gev_quantile<F: Scalar>(u: F, p: GevParams<F>) -> Result<F> {
    if !(u > F::zero() && u < F::one()) {
        return Err(Error::InvalidArgument(format!("probability {u} not in (0, 1)")));
    }
    let log_neg_log_u = (-u.ln()).ln();
    if p.is_gumbel() {
        return Ok(p.mu - p.sigma * log_neg_log_u);
    }
    Ok(p.mu + p.sigma * (-p.xi * log_neg_log_u).exp_m1() / p.xi)
}

/// Inverse-CDF draws from a seeded ChaCha8 stream.
pub fn gev_sample<F: Scalar>(p: GevParams<F>, n: usize, seed: u64) -> Vec<F> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    gev_sample_with(p, n, &mut rng)
}

pub fn gev_sample_with<F: Scalar, R: Rng + ?Sized>(p: GevParams<F>, n: usize, rng: &mut R) -> Vec<F> {
    (0..n)
        .map(|_| {
            let u = loop {
                let u: f64 = rng.gen();
                if u > 0.0 {
                    break u;
                }
            };
            gev_quantile(F::lit(u), p).expect("u in (0, 1)")
        })
        .collect()
}
