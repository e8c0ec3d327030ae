//! Crash-risk scoring from a pair of crash / non-crash GEV distributions.
//!
//! For a threshold `i` on the danger scale, `1 - F_crash(i)` is the crash
//! mass above it and `F_noncrash(i)` the non-crash mass below it. Their sum
//! lies in `[0, 2]`; the risk value `M` is its maximum over thresholds between
//! the scale floor `-Q` and the current danger value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gev::{gev_cdf, GevParams};
use crate::nsbm_gat::TrainedModel;
use crate::scalar::Scalar;
use crate::scene_graph::SceneGraph;
use crate::trajectory::Label;

pub const DEFAULT_GRID_POINTS: usize = 200;
pub const DEFAULT_M_STEP: f64 = 0.05;

/// Threshold grid for [`risk_value`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskGrid {
    /// Lowest threshold, `-Q` on the negated-MRD scale.
    pub floor: f64,
    pub points: usize,
}

impl RiskGrid {
    pub fn new(q: f64) -> Self {
        Self {
            floor: -q,
            points: DEFAULT_GRID_POINTS,
        }
    }
}

/// `[1 - F_crash(i)] + F_noncrash(i)`.
pub fn metric<F: Scalar>(i: F, crash: GevParams<F>, noncrash: GevParams<F>) -> F {
    (F::one() - gev_cdf(i, crash)) + gev_cdf(i, noncrash)
}

/// Risk value `M` in `[0, 2]`.
///
/// Thresholds are `points` evenly spaced values from `floor` to `current_z`
/// inclusive. When the current value is at or below the floor the single
/// threshold `current_z` is used.
pub fn risk_value<F: Scalar>(
    current_z: F,
    crash: GevParams<F>,
    noncrash: GevParams<F>,
    grid: RiskGrid,
) -> F {
    let floor = F::lit(grid.floor);
    let two = F::lit(2.0);
    let clamp = |m: F| m.max(F::zero()).min(two);
    if !(current_z > floor) || grid.points < 2 {
        return clamp(metric(current_z, crash, noncrash));
    }
    let span = current_z - floor;
    let last = F::lit((grid.points - 1) as f64);
    let best = (0..grid.points)
        .map(|k| {
            let i = if k + 1 == grid.points {
                current_z
            } else {
                floor + span * F::lit(k as f64) / last
            };
            metric(i, crash, noncrash)
        })
        .fold(F::neg_infinity(), |a, b| if b > a { b } else { a });
    clamp(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VPoint {
    pub m: f64,
    pub v: f64,
}

/// Warning threshold chosen on training data for one lead time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdCalibration {
    pub lead_time: f64,
    pub m_star: f64,
    pub v_curve: Vec<VPoint>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub config_hash: String,
}

impl ThresholdCalibration {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

fn fraction_at_least(xs: &[f64], m: f64) -> f64 {
    xs.iter().filter(|&&x| x >= m).count() as f64 / xs.len() as f64
}

/// Sweeps `m = 0, step, 2 step, ..., 2` and maximizes
/// `V = Recall + 1 - FAR`; ties go to the smallest `m`.
pub fn calibrate_threshold(
    crash_ms: &[f64],
    noncrash_ms: &[f64],
    step: f64,
    lead_time: f64,
) -> Result<ThresholdCalibration> {
    if crash_ms.is_empty() || noncrash_ms.is_empty() {
        return Err(Error::InvalidArgument("calibration needs both crash and non-crash values".into()));
    }
    if !(step > 0.0) || step > 2.0 {
        return Err(Error::InvalidArgument(format!("grid step {step}")));
    }
    let n = (2.0 / step).round() as usize;
    let mut v_curve = Vec::with_capacity(n + 1);
    let mut best = VPoint { m: 0.0, v: f64::NEG_INFINITY };
    for k in 0..=n {
        let m = (k as f64 * step).min(2.0);
        let v = fraction_at_least(crash_ms, m) + 1.0 - fraction_at_least(noncrash_ms, m);
        if v > best.v {
            best = VPoint { m, v };
        }
        v_curve.push(VPoint { m, v });
    }
    Ok(ThresholdCalibration {
        lead_time,
        m_star: best.m,
        v_curve,
        config_hash: String::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct RiskAssessment<F> {
    pub t: f64,
    pub m: F,
    pub warn: bool,
    pub crash_params: GevParams<F>,
    pub noncrash_params: GevParams<F>,
}

/// Scores one frame with both networks.
pub fn predict<F: Scalar>(
    graph: &SceneGraph<F>,
    crash_model: &TrainedModel<F>,
    noncrash_model: &TrainedModel<F>,
    m_star: f64,
    current_z: F,
    grid: RiskGrid,
) -> Result<RiskAssessment<F>> {
    for (model, want) in [(crash_model, Label::Crash), (noncrash_model, Label::NonCrash)] {
        if model.tag != want {
            return Err(Error::TagMismatch {
                expected: want.as_str().into(),
                actual: model.tag.as_str().into(),
            });
        }
    }
    let crash_params = crash_model.predict(graph)?;
    let noncrash_params = noncrash_model.predict(graph)?;
    let m = risk_value(current_z, crash_params, noncrash_params, grid);
    Ok(RiskAssessment {
        t: graph.t,
        m,
        warn: m >= F::lit(m_star),
        crash_params,
        noncrash_params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(xi: f64, sigma: f64, mu: f64) -> GevParams<f64> {
        GevParams { xi, sigma, mu }
    }

    fn grid(points: usize) -> RiskGrid {
        RiskGrid { floor: -1.0, points }
    }

    #[test]
    fn equal_distributions_score_one() {
        let g = p(0.1, 0.3, -0.4);
        for z in [-0.9, -0.5, -0.01, 0.0, -3.0, f64::NEG_INFINITY] {
            assert!((risk_value(z, g, g, grid(200)) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn separated_distributions_score_near_two() {
        let crash = p(0.0, 0.01, -0.05);
        let noncrash = p(0.0, 0.01, -0.9);
        assert!(risk_value(-0.02, crash, noncrash, grid(200)) >= 1.99);
    }

    /// Exhaustive scan of 10^5 thresholds.
    fn fine_grid(z: f64, c: GevParams<f64>, n: GevParams<f64>) -> f64 {
        let points = 100_000;
        (0..points)
            .map(|k| -1.0 + (z + 1.0) * k as f64 / (points - 1) as f64)
            .map(|i| metric(i, c, n))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn coarse_grid_matches_fine_grid() {
        let c = p(0.0, 0.05, -0.1);
        let n = p(0.0, 0.2, -0.8);
        let coarse = risk_value(-0.2, c, n, grid(200));
        let fine = fine_grid(-0.2, c, n);
        assert!((coarse - fine).abs() < 1e-3, "{coarse} vs {fine}");
    }

    #[test]
    fn nested_refinement_is_monotone() {
        let c = p(0.2, 0.1, -0.15);
        let n = p(-0.1, 0.25, -0.7);
        let mut prev = 0.0;
        for k in 1..12 {
            let m = risk_value(-0.05, c, n, grid((1 << k) + 1));
            assert!(m >= prev - 1e-15);
            prev = m;
        }
        assert!(fine_grid(-0.05, c, n) >= prev - 1e-12);
    }

    #[test]
    fn calibration_examples() {
        let cal = calibrate_threshold(&[2.0; 4], &[0.0; 20], 0.05, 1.0).unwrap();
        assert!((cal.m_star - 0.05).abs() < 1e-12);
        assert_eq!(cal.v_curve.len(), 41);
        assert!((cal.v_curve[40].m - 2.0).abs() < 1e-12);

        let same = [0.3, 1.2, 1.7];
        let cal = calibrate_threshold(&same, &same, 0.05, 1.0).unwrap();
        assert_eq!(cal.m_star, 0.0);
        assert!(cal.v_curve.iter().all(|pt| (pt.v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn calibration_matches_brute_force() {
        let crash = [1.5, 1.6, 1.4, 1.3];
        let noncrash = [0.5, 0.7, 1.35, 0.9, 0.6];
        let cal = calibrate_threshold(&crash, &noncrash, 0.05, 1.0).unwrap();
        // direct pairwise sweep over the same 41 grid points
        let mut best = (0.0, f64::NEG_INFINITY);
        for k in 0..=40 {
            let m = k as f64 * 0.05;
            let recall = crash.iter().filter(|&&x| x >= m).count() as f64 / 4.0;
            let far = noncrash.iter().filter(|&&x| x >= m).count() as f64 / 5.0;
            if recall + 1.0 - far > best.1 + 1e-12 {
                best = (m, recall + 1.0 - far);
            }
        }
        assert!((cal.m_star - best.0).abs() < 1e-12);
        // every crash value >= 1.3 is caught and 1.35 is the only false alarm left
        assert!((cal.m_star - 0.95).abs() < 1e-12, "{}", cal.m_star);
        assert!((best.1 - 1.8).abs() < 1e-12);
    }

    #[test]
    fn calibration_rejects_empty_lists() {
        assert!(calibrate_threshold(&[], &[1.0], 0.05, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn risk_in_range(
            xc in -0.9..0.9f64, sc in 0.01..1.0f64, mc in -1.5..0.5f64,
            xn in -0.9..0.9f64, sn in 0.01..1.0f64, mn in -1.5..0.5f64,
            z in -2.0..0.0f64,
        ) {
            let m = risk_value(z, p(xc, sc, mc), p(xn, sn, mn), grid(50));
            prop_assert!((0.0..=2.0).contains(&m));
        }

        #[test]
        fn calibration_invariant_to_duplication(
            crash in proptest::collection::vec(0.0..2.0f64, 1..20),
            noncrash in proptest::collection::vec(0.0..2.0f64, 1..40),
        ) {
            let a = calibrate_threshold(&crash, &noncrash, 0.05, 1.0).unwrap();
            let c2: Vec<f64> = crash.iter().chain(&crash).copied().collect();
            let n2: Vec<f64> = noncrash.iter().chain(&noncrash).copied().collect();
            let b = calibrate_threshold(&c2, &n2, 0.05, 1.0).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
