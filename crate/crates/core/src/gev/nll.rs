//! Negative log-likelihood and its analytic gradients.
//!
//! For `xi != 0`, with `y = (z - mu) / sigma`, `s = 1 + xi y` and
//! `B = s^(-1/xi)`:
//!
//! ```text
//! nll      = ln sigma + (1 + 1/xi) ln s + B
//! d/ds     = [(1 + 1/xi) - B / xi] / s
//! d/dmu    = d/ds * (-xi / sigma)
//! d/dsigma = 1/sigma + d/ds * (-xi y / sigma)
//! d/dxi    = (B - 1) ln s / xi^2 + d/ds * y
//! ```
//!
//! The Gumbel branch uses `nll = ln sigma + y + e^-y` with a zero shape
//! gradient.
//!
//! Below the support floor the loss continues linearly in `s` from its value
//! at the floor, so observations outside the support always cost more than
//! observations inside it and their gradient pulls the support back over them.

use super::{GevParams, SUPPORT_FLOOR};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NllGrad<F> {
    pub nll: F,
    pub d_xi: F,
    pub d_sigma: F,
    pub d_mu: F,
    pub d_xi_raw: F,
    pub d_sigma_raw: F,
    /// `s` fell below the support floor and was clamped.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNll<F> {
    pub loss: F,
    pub items: Vec<NllGrad<F>>,
    pub clamped: usize,
}

/// Slope of the out-of-support continuation, per unit of `s`.
pub const SUPPORT_PENALTY: f64 = 1000.0;

/// Largest exponent allowed in `B = s^(-1/xi)`; raises the effective floor
/// for small positive `xi` so that `B` stays finite.
const LOG_B_CAP: f64 = 50.0;

/// NLL and gradients of a single observation. Below [`SUPPORT_FLOOR`] the
/// loss is the value at the floor plus [`SUPPORT_PENALTY`] per unit of `s`
/// short of it.
pub fn nll_item<F: Scalar>(z: F, p: GevParams<F>) -> NllGrad<F> {
    let one = F::one();
    let y = (z - p.mu) / p.sigma;
    let (nll, d_xi, d_sigma, d_mu, clamped) = if p.is_gumbel() {
        let e = (-y).exp();
        let nll = p.sigma.ln() + y + e;
        let d_mu = (e - one) / p.sigma;
        let d_sigma = (one - y + y * e) / p.sigma;
        (nll, F::zero(), d_sigma, d_mu, false)
    } else {
        let xi = p.xi;
        let mut log_floor = F::lit(SUPPORT_FLOOR.ln());
        if xi > F::zero() {
            log_floor = log_floor.max(-F::lit(LOG_B_CAP) * xi);
        }
        let floor = log_floor.exp();
        let raw_s = one + xi * y;
        let clamped = !(raw_s >= floor);
        let log_s = if clamped { log_floor } else { (xi * y).ln_1p() };
        let b = (-log_s / xi).exp();
        let mut nll = p.sigma.ln() + (one + xi.recip()) * log_s + b;
        let d_s = if clamped {
            let penalty = F::lit(SUPPORT_PENALTY);
            nll += penalty * (floor - raw_s);
            -penalty
        } else {
            ((one + xi.recip()) - b / xi) / raw_s
        };
        let d_mu = d_s * (-xi / p.sigma);
        let d_sigma = p.sigma.recip() + d_s * (-xi * y / p.sigma);
        let d_xi = (b - one) * log_s / (xi * xi) + d_s * y;
        (nll, d_xi, d_sigma, d_mu, clamped)
    };
    NllGrad {
        nll,
        d_xi,
        d_sigma,
        d_mu,
        d_xi_raw: d_xi * (one - p.xi * p.xi),
        d_sigma_raw: d_sigma * p.sigma,
        clamped,
    }
}

/// Summed NLL over a batch, reduced in input order.
pub fn nll_and_grads<F: Scalar>(z: &[F], params: &[GevParams<F>]) -> BatchNll<F> {
    assert_eq!(z.len(), params.len(), "one parameter triple per observation");
    let items: Vec<NllGrad<F>> = z.iter().zip(params).map(|(&z, &p)| nll_item(z, p)).collect();
    let loss = items.iter().fold(F::zero(), |acc, it| acc + it.nll);
    let clamped = items.iter().filter(|it| it.clamped).count();
    BatchNll { loss, items, clamped }
}
