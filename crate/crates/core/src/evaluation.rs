//! Fit diagnostics and prediction metrics: P-P points, CRPS aggregation,
//! average prediction accuracy, ROC/AUC and surrogate safety measures.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gev::{gev_cdf, GevParams};
use crate::scalar::Scalar;
use crate::trajectory::VehicleState;

pub const TTC_THRESHOLD: f64 = 1.5;
pub const MTTC_THRESHOLD: f64 = 1.5;
pub const DRAC_THRESHOLD: f64 = 3.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PpPoint {
    pub empirical: f64,
    pub theoretical: f64,
}

/// Probability integral transforms `F(z_i; theta_i)`.
pub fn pit<F: Scalar>(events: &[(F, GevParams<F>)]) -> Vec<f64> {
    events.iter().map(|&(z, p)| gev_cdf(z, p).as_f64()).collect()
}

/// Sorted PIT values against plotting positions `i / (n + 1)`.
pub fn pp_points<F: Scalar>(events: &[(F, GevParams<F>)]) -> Vec<PpPoint> {
    let mut u = pit(events);
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    u.into_iter()
        .enumerate()
        .map(|(i, theoretical)| PpPoint {
            empirical: (i + 1) as f64 / (n + 1.0),
            theoretical,
        })
        .collect()
}

/// One-sample Kolmogorov-Smirnov distance to the uniform distribution.
pub fn ks_uniform(u: &[f64]) -> f64 {
    let mut s = u.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let x = x.clamp(0.0, 1.0);
            ((i + 1) as f64 / n - x).max(x - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value, `sqrt(-ln(alpha/2)/2) / sqrt(n)`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

/// Fraction of timesteps at or above the threshold.
pub fn hit_fraction(series: &[f64], m_star: f64) -> f64 {
    if series.is_empty() {
        return 0.0;
    }
    series.iter().filter(|&&m| m >= m_star).count() as f64 / series.len() as f64
}

/// Average prediction accuracy: mean over samples of the per-sample hit fraction.
pub fn ap<S: AsRef<[f64]>>(per_sample: &[S], m_star: f64) -> f64 {
    if per_sample.is_empty() {
        return 0.0;
    }
    per_sample.iter().map(|s| hit_fraction(s.as_ref(), m_star)).sum::<f64>() / per_sample.len() as f64
}

/// Same as [`ap`] for boolean warning series.
pub fn ap_flags<S: AsRef<[bool]>>(per_sample: &[S]) -> f64 {
    if per_sample.is_empty() {
        return 0.0;
    }
    let frac = |s: &[bool]| {
        if s.is_empty() {
            0.0
        } else {
            s.iter().filter(|&&b| b).count() as f64 / s.len() as f64
        }
    };
    per_sample.iter().map(|s| frac(s.as_ref())).sum::<f64>() / per_sample.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC curve over every distinct score (descending), starting at (0, 0),
/// with trapezoidal AUC. Higher scores indicate cases.
pub fn roc_auc(cases: &[f64], controls: &[f64]) -> Result<RocCurve> {
    if cases.is_empty() || controls.is_empty() {
        return Err(Error::InvalidArgument("ROC needs both cases and controls".into()));
    }
    if cases.iter().chain(controls).any(|s| s.is_nan()) {
        return Err(Error::NonFinite("NaN score".into()));
    }
    let mut scored: Vec<(f64, bool)> = cases
        .iter()
        .map(|&s| (s, true))
        .chain(controls.iter().map(|&s| (s, false)))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (np, nn) = (cases.len() as f64, controls.len() as f64);
    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    // accumulated in integer units to keep the area exact
    let mut area2 = 0u128;
    let mut i = 0;
    while i < scored.len() {
        let threshold = scored[i].0;
        let (tp0, fp0) = (tp, fp);
        while i < scored.len() && scored[i].0 == threshold {
            if scored[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        area2 += ((fp - fp0) * (tp + tp0)) as u128;
        points.push(RocPoint {
            threshold,
            fpr: fp as f64 / nn,
            tpr: tp as f64 / np,
        });
    }
    Ok(RocCurve {
        points,
        auc: area2 as f64 / (2.0 * np * nn),
    })
}

/// Mann-Whitney pairwise fraction with ties counted as one half.
pub fn mann_whitney(cases: &[f64], controls: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &c in cases {
        for &k in controls {
            if c > k {
                wins += 1.0;
            } else if c == k {
                wins += 0.5;
            }
        }
    }
    wins / (cases.len() * controls.len()) as f64
}

/// Seeded choice of `min(ratio * cases, pool)` control indices, sorted.
pub fn sample_controls(pool: usize, cases: usize, ratio: usize, seed: u64) -> Vec<usize> {
    let k = (cases * ratio).min(pool);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample_indices(&mut rng, pool, k).into_vec();
    idx.sort_unstable();
    idx
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsmFlags {
    pub ttc: bool,
    pub mttc: bool,
    pub drac: bool,
}

/// Surrogate safety measures for a subject following a same-lane leader.
/// Infinite times mean no conflict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsmScores {
    pub gap: f64,
    pub ttc: f64,
    pub mttc: f64,
    pub drac: f64,
    pub flags: SsmFlags,
}

impl SsmScores {
    /// Monotone danger scores (higher = riskier) for ROC analysis.
    pub fn inverse_ttc(&self) -> f64 {
        inv(self.ttc)
    }

    pub fn inverse_mttc(&self) -> f64 {
        inv(self.mttc)
    }
}

fn inv(t: f64) -> f64 {
    if t.is_finite() {
        1.0 / t
    } else {
        0.0
    }
}

/// Smallest positive root of `a/2 t^2 + b t - gap = 0`.
fn first_contact(gap: f64, dv: f64, da: f64) -> f64 {
    if da == 0.0 {
        return if dv > 0.0 { gap / dv } else { f64::INFINITY };
    }
    let disc = dv * dv + 2.0 * da * gap;
    if disc < 0.0 {
        return f64::INFINITY;
    }
    let sq = disc.sqrt();
    // numerically stable pair of roots
    let q = -0.5 * (dv + dv.signum() * sq);
    let mut roots = [f64::INFINITY; 2];
    if q != 0.0 {
        roots[0] = -gap / q;
        roots[1] = q / (0.5 * da);
    } else {
        roots[0] = sq / da;
        roots[1] = -sq / da;
    }
    roots
        .into_iter()
        .filter(|&t| t > 0.0 && t.is_finite())
        .fold(f64::INFINITY, f64::min)
}

pub fn ssm_scores(subject: &VehicleState, lead: &VehicleState) -> Result<SsmScores> {
    let gap = lead.x - subject.x - 0.5 * (lead.length + subject.length);
    if !(gap > 0.0) {
        return Err(Error::VehiclesOverlapping);
    }
    let dv = subject.speed - lead.speed;
    let da = subject.accel - lead.accel;
    let ttc = if dv > 0.0 { gap / dv } else { f64::INFINITY };
    let mttc = first_contact(gap, dv, da);
    let drac = if dv > 0.0 { dv * dv / (2.0 * gap) } else { 0.0 };
    Ok(SsmScores {
        gap,
        ttc,
        mttc,
        drac,
        flags: SsmFlags {
            ttc: ttc < TTC_THRESHOLD,
            mttc: mttc < MTTC_THRESHOLD,
            drac: drac > DRAC_THRESHOLD,
        },
    })
}

/// Metrics for one model; keys of the maps are lead times formatted with one decimal.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    /// Mean CRPS on held-out crash extremes; `null` for the SSM baselines.
    #[serde(rename = "crps", default)]
    pub crps_avg: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub crps_noncrash: Option<f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub crps_by_t: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub pp_points: Vec<PpPoint>,
    #[serde(rename = "ap")]
    pub ap_by_t: BTreeMap<String, f64>,
    #[serde(rename = "auc")]
    pub auc_by_t: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config_hash: String,
    pub seed: u64,
    pub models: BTreeMap<String, ModelReport>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn t_key(t: f64) -> String {
    format!("{t:.1}")
}

pub fn write_pp_csv<W: Write>(out: W, model: &str, points: &[PpPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "empirical", "theoretical"])?;
    for p in points {
        w.write_record([model.to_string(), format!("{:.9}", p.empirical), format!("{:.9}", p.theoretical)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_roc_csv<W: Write>(out: W, curves: &BTreeMap<String, RocCurve>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "threshold", "fpr", "tpr"])?;
    for (model, curve) in curves {
        for p in &curve.points {
            w.write_record([model.clone(), format!("{:.9}", p.threshold), format!("{:.9}", p.fpr), format!("{:.9}", p.tpr)])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_ap_csv<W: Write>(out: W, report: &EvalReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["model", "lead_time", "ap", "auc"])?;
    for (model, r) in &report.models {
        for (t, ap) in &r.ap_by_t {
            let auc = r.auc_by_t.get(t).map(|a| format!("{a:.9}")).unwrap_or_default();
            w.write_record([model.clone(), t.clone(), format!("{ap:.9}"), auc])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gev::gev_sample_with;
    use proptest::prelude::*;
    use rand::Rng;

    fn vehicle(x: f64, speed: f64, accel: f64) -> VehicleState {
        VehicleState {
            vehicle_id: 0,
            t: 0.0,
            x,
            y: 0.0,
            speed,
            accel,
            heading: 0.0,
            lane: 1,
            length: 4.0,
            width: 2.0,
        }
    }

    #[test]
    fn ap_examples() {
        let mut fig = vec![1.5; 21];
        fig[3] = 0.2;
        assert!((ap(&[fig], 1.2) - 20.0 / 21.0).abs() < 1e-15);
        assert_eq!(ap(&[vec![0.1; 21]], 1.2), 0.0);
        let a = vec![2.0; 4];
        let b = vec![2.0, 2.0, 0.0, 0.0];
        assert!((ap(&[a, b], 1.0) - 0.75).abs() < 1e-15);
        assert!((ap_flags(&[vec![true, false], vec![true, true]]) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn auc_examples() {
        let r = roc_auc(&[0.9, 0.8, 0.4], &[0.7, 0.3, 0.2]).unwrap();
        assert!((r.auc - 8.0 / 9.0).abs() < 1e-15);
        assert_eq!(roc_auc(&[3.0, 4.0], &[1.0, 2.0]).unwrap().auc, 1.0);
        assert_eq!(roc_auc(&[1.0, 2.0, 2.0], &[2.0, 1.0, 2.0]).unwrap().auc, 0.5);
        let last = r.points.last().unwrap();
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
        assert!(roc_auc(&[], &[1.0]).is_err());
    }

    proptest! {
        #[test]
        fn auc_equals_mann_whitney(
            cases in proptest::collection::vec(0u8..20, 1..40),
            controls in proptest::collection::vec(0u8..20, 1..60),
        ) {
            // coarse integer scores force plenty of ties
            let c: Vec<f64> = cases.iter().map(|&v| v as f64 * 0.1).collect();
            let k: Vec<f64> = controls.iter().map(|&v| v as f64 * 0.1).collect();
            let auc = roc_auc(&c, &k).unwrap().auc;
            prop_assert!((auc - mann_whitney(&c, &k)).abs() <= 1e-12);
            prop_assert!((0.0..=1.0).contains(&auc));
        }

        #[test]
        fn ap_is_order_invariant(series in proptest::collection::vec(proptest::collection::vec(0.0..2.0f64, 1..25), 1..10)) {
            let mut rev = series.clone();
            rev.reverse();
            prop_assert!((ap(&series, 1.0) - ap(&rev, 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn pp_examples() {
        let p = GevParams { xi: 0.1, sigma: 1.0, mu: 0.0 };
        let single = pp_points(&[(0.3, p)]);
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].empirical, 0.5);
        assert!((single[0].theoretical - gev_cdf(0.3, p)).abs() < 1e-15);

        let med = p.quantile(0.5).unwrap();
        assert!(pp_points(&[(med, p); 5]).iter().all(|pt| (pt.theoretical - 0.5).abs() < 1e-12));
    }

    #[test]
    fn pit_of_correct_model_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let events: Vec<(f64, GevParams<f64>)> = (0..1000)
            .map(|_| {
                let p = GevParams {
                    xi: rng.gen_range(-0.4..0.4),
                    sigma: rng.gen_range(0.1..2.0),
                    mu: rng.gen_range(-1.0..1.0),
                };
                (gev_sample_with(p, 1, &mut rng)[0], p)
            })
            .collect();
        let d = ks_uniform(&pit(&events));
        assert!(d < ks_critical(1000, 0.01), "{d}");
        let band = ks_critical(1000, 0.01);
        assert!(pp_points(&events).iter().all(|pt| (pt.empirical - pt.theoretical).abs() < band + 1e-3));
    }

    #[test]
    fn ks_critical_value() {
        assert!((ks_critical(1, 0.01) - 1.6276).abs() < 1e-4);
    }

    #[test]
    fn ssm_examples() {
        // 30 m bumper gap with 4 m vehicles
        let s = ssm_scores(&vehicle(0.0, 30.0, 0.0), &vehicle(34.0, 10.0, 0.0)).unwrap();
        assert!((s.gap - 30.0).abs() < 1e-12);
        assert!((s.ttc - 1.5).abs() < 1e-12);
        assert!((s.mttc - 1.5).abs() < 1e-12);
        assert!(!s.flags.ttc && !s.flags.mttc);
        assert!((s.drac - 400.0 / 60.0).abs() < 1e-12);
        assert!(s.flags.drac);

        let d = ssm_scores(&vehicle(0.0, 10.0, -1.0), &vehicle(34.0, 12.0, 0.0)).unwrap();
        assert!(d.ttc.is_infinite() && d.mttc.is_infinite());
        assert_eq!(d.drac, 0.0);
        assert_eq!(d.flags, SsmFlags { ttc: false, mttc: false, drac: false });
        assert_eq!((d.inverse_ttc(), d.inverse_mttc()), (0.0, 0.0));

        assert!(matches!(
            ssm_scores(&vehicle(0.0, 10.0, 0.0), &vehicle(3.0, 10.0, 0.0)),
            Err(Error::VehiclesOverlapping)
        ));
    }

    #[test]
    fn mttc_with_acceleration() {
        // dv = 0, subject accelerating 2 m/s^2 faster: gap = t^2 -> t = sqrt(gap)
        let s = ssm_scores(&vehicle(0.0, 10.0, 2.0), &vehicle(13.0, 10.0, 0.0)).unwrap();
        assert!((s.mttc - 3.0).abs() < 1e-12);
        assert!(s.ttc.is_infinite());
        // closing but decelerating hard enough to never touch
        let s = ssm_scores(&vehicle(0.0, 12.0, -5.0), &vehicle(34.0, 10.0, 0.0)).unwrap();
        assert!(s.mttc.is_infinite());
        assert!((s.ttc - 15.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn mttc_is_a_root(gap in 0.1..50.0f64, dv in -10.0..10.0f64, da in -5.0..5.0f64) {
            let t = first_contact(gap, dv, da);
            if t.is_finite() {
                prop_assert!(t > 0.0);
                let resid = dv * t + 0.5 * da * t * t - gap;
                prop_assert!(resid.abs() < 1e-8 * (1.0 + gap));
                // no earlier positive contact
                let steps = 1000;
                for k in 1..steps {
                    let s = t * k as f64 / steps as f64;
                    prop_assert!(dv * s + 0.5 * da * s * s < gap + 1e-9);
                }
            }
        }
    }

    #[test]
    fn controls_are_seeded_and_distinct() {
        let a = sample_controls(100, 10, 5, 3);
        assert_eq!(a.len(), 50);
        assert_eq!(a, sample_controls(100, 10, 5, 3));
        assert_ne!(a, sample_controls(100, 10, 5, 4));
        let mut d = a.clone();
        d.dedup();
        assert_eq!(d.len(), 50);
        assert_eq!(sample_controls(7, 10, 5, 3).len(), 7);
    }

    #[test]
    fn report_round_trip_and_csv() {
        let mut report = EvalReport { config_hash: "abc".into(), seed: 1, models: BTreeMap::new() };
        let mut m = ModelReport { crps_avg: Some(0.25), ..Default::default() };
        m.ap_by_t.insert(t_key(1.0), 0.9);
        m.auc_by_t.insert(t_key(1.0), 0.8);
        report.models.insert("nsbm_gat".into(), m);
        let json = report.to_json().unwrap();
        assert_eq!(EvalReport::from_json(&json).unwrap(), report);
        let mut buf = Vec::new();
        write_ap_csv(&mut buf, &report).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "model,lead_time,ap,auc\nnsbm_gat,1.0,0.900000000,0.800000000\n");
    }
}
