//! Continuous ranked probability score by quadrature.

use super::{gev_cdf, gev_quantile, GevParams};
use crate::quadrature::integrate_panels;
use crate::scalar::Scalar;

const PANEL_PROBS: [f64; 23] = [
    1e-8, 1e-6, 1e-4, 1e-3, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95,
    0.99, 0.999, 1.0 - 1e-4, 1.0 - 1e-5, 1.0 - 1e-6, 1.0 - 1e-7, 1.0 - 1e-8,
];

const TOLERANCE: f64 = 1e-6;

/// `integral (F(x) - 1{x >= y})^2 dx`, truncated to the central
/// `1 - 2e-8` probability mass (extended to reach `y`).
pub fn crps<F: Scalar>(p: GevParams<F>, y: F) -> F {
    let mut breaks: Vec<F> = PANEL_PROBS
        .iter()
        .map(|&u| gev_quantile(F::lit(u), p).expect("u in (0, 1)"))
        .collect();
    breaks.push(y);
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
    breaks.dedup();
    let split = breaks.partition_point(|&b| b < y);
    let below = &breaks[..=split.min(breaks.len() - 1)];
    let above = &breaks[split..];
    let tol = F::lit(TOLERANCE * 0.5);
    let left = integrate_panels(
        |x| {
            let f = gev_cdf(x, p);
            f * f
        },
        below,
        tol,
    );
    let right = integrate_panels(
        |x| {
            let g = F::one() - gev_cdf(x, p);
            g * g
        },
        above,
        tol,
    );
    left + right
}

/// Mean CRPS over observation/forecast pairs.
pub fn crps_mean<F: Scalar>(pairs: &[(F, GevParams<F>)]) -> F {
    if pairs.is_empty() {
        return F::nan();
    }
    let total = pairs.iter().fold(F::zero(), |acc, &(y, p)| acc + crps(p, y));
    total / F::lit(pairs.len() as f64)
}
