//! Mini-batch gradient descent against the summed GEV negative log-likelihood.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{backward, forward, forward_cached};
use super::params::{Hyper, InputScaling, ModelParams};
use crate::error::{Error, Result};
use crate::gev::{fit_stationary, gev_cdf, nll_item, to_raw, FitConfig, GevParams};
use crate::scalar::Scalar;
use crate::scene_graph::{SceneGraph, EDGE_DIM, NODE_DIM};
use crate::trajectory::Label;

pub const MODEL_FORMAT: &str = "nsbm-gat-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub patience: usize,
    pub validation_fraction: f64,
    pub hyper: Hyper,
    /// Scale of the initial head weights relative to Glorot.
    pub head_gain: f64,
    /// Start the head bias at the stationary fit of the training targets.
    pub warm_start: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            batch_size: 32,
            max_epochs: 500,
            seed: 0,
            patience: 25,
            validation_fraction: 0.1,
            hyper: Hyper::default(),
            head_gain: 0.0,
            warm_start: true,
        }
    }
}

/// One training pair: the graph at an extreme event and its danger value.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainItem<F> {
    pub graph: SceneGraph<F>,
    pub z: F,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_nll: f64,
    pub val_nll: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub lr: f64,
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_nll: f64,
    pub final_train_nll: f64,
    pub train_items: usize,
    pub val_items: usize,
    pub history: Vec<EpochRecord>,
    /// Hash of the pipeline configuration that produced the model, if any.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct TrainedModel<F> {
    pub format: String,
    pub version: u32,
    pub tag: Label,
    pub seed: u64,
    pub params: ModelParams<F>,
    pub meta: TrainMeta,
}

impl<F: Scalar> TrainedModel<F> {
    pub fn predict(&self, graph: &SceneGraph<F>) -> Result<GevParams<F>> {
        forward(graph, &self.params)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        if m.format != MODEL_FORMAT || m.version != MODEL_FORMAT_VERSION {
            return Err(Error::Data(format!(
                "unsupported model format {} v{}",
                m.format, m.version
            )));
        }
        m.params.check_shapes()?;
        Ok(m)
    }
}

/// Mean and spread of present-node features, RMS of active-edge features.
pub fn fit_scaling<F: Scalar>(items: &[&TrainItem<F>]) -> InputScaling<F> {
    let mut s = InputScaling::default();
    let mut n_nodes = 0.0;
    let mut sum = [0.0; NODE_DIM];
    let mut sq = [0.0; NODE_DIM];
    let mut n_edges = 0.0;
    let mut esq = [0.0; EDGE_DIM];
    for it in items {
        for (x, _) in it.graph.nodes.iter().zip(&it.graph.node_present).filter(|(_, p)| **p) {
            n_nodes += 1.0;
            for k in 0..NODE_DIM {
                sum[k] += x[k].as_f64();
                sq[k] += x[k].as_f64().powi(2);
            }
        }
        for e in it.graph.edges.iter().filter(|e| e.active) {
            n_edges += 1.0;
            for k in 0..EDGE_DIM {
                esq[k] += e.features[k].as_f64().powi(2);
            }
        }
    }
    if n_nodes > 0.0 {
        for k in 0..NODE_DIM {
            let mean = sum[k] / n_nodes;
            let var = (sq[k] / n_nodes - mean * mean).max(0.0);
            s.node_mean[k] = F::lit(mean);
            s.node_scale[k] = F::lit(if var.sqrt() > 1e-6 { var.sqrt() } else { 1.0 });
        }
    }
    if n_edges > 0.0 {
        for k in 0..EDGE_DIM {
            let rms = (esq[k] / n_edges).sqrt();
            s.edge_scale[k] = F::lit(if rms > 1e-6 { rms } else { 1.0 });
        }
    }
    s
}

/// Splits item indices by sample id; the holdout takes
/// `round(fraction * ids)` samples (at least one when there are two or more).
pub fn split_by_sample<F: Scalar>(
    items: &[TrainItem<F>],
    fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let ids: BTreeSet<&str> = items.iter().map(|it| it.graph.sample_id.as_str()).collect();
    let mut ids: Vec<&str> = ids.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SPLIT_SALT);
    ids.shuffle(&mut rng);
    let n_val = if ids.len() >= 2 && fraction > 0.0 {
        ((fraction * ids.len() as f64).round() as usize).clamp(1, ids.len() - 1)
    } else {
        0
    };
    let val_ids: BTreeSet<&str> = ids[..n_val].iter().copied().collect();
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (i, it) in items.iter().enumerate() {
        if val_ids.contains(it.graph.sample_id.as_str()) {
            val.push(i);
        } else {
            train.push(i);
        }
    }
    (train, val)
}

const SPLIT_SALT: u64 = 0x5eed_5151;

/// An epoch whose mean training NLL exceeds the starting value by this many
/// nats per item counts as diverged, like a non-finite loss.
pub const DIVERGENCE_MARGIN: f64 = 1.0;

/// Head bias that reproduces a stationary GEV for the targets.
fn warm_start_bias<F: Scalar>(z: &[F]) -> [F; 3] {
    if z.len() >= 10 {
        if let Ok(fit) = fit_stationary(z, &FitConfig::default()) {
            let raw = to_raw(fit.params);
            return [raw.xi_raw, raw.sigma_raw, raw.mu_raw];
        }
    }
    let n = F::lit(z.len() as f64);
    let mean = z.iter().copied().sum::<F>() / n;
    let var = z.iter().map(|&x| (x - mean) * (x - mean)).sum::<F>() / n;
    let sigma = (var.sqrt() * F::lit(6.0f64.sqrt() / std::f64::consts::PI)).max(F::lit(0.1));
    [F::zero(), sigma.ln(), mean]
}

/// Summed NLL of `items` and the gradient of that sum.
pub fn batch_loss_and_grad<F: Scalar>(
    m: &ModelParams<F>,
    items: &[&TrainItem<F>],
    grads: &mut ModelParams<F>,
) -> Result<F> {
    let mut loss = F::zero();
    for it in items {
        let cache = forward_cached(&it.graph, m)?;
        let g = nll_item(it.z, cache.params);
        loss += g.nll;
        backward(&cache, m, [g.d_xi_raw, g.d_sigma_raw, g.d_mu], grads);
    }
    Ok(loss)
}

/// One plain gradient-descent update on a batch; returns the batch loss
/// before the update.
pub fn gradient_step<F: Scalar>(m: &mut ModelParams<F>, items: &[&TrainItem<F>], lr: F) -> Result<F> {
    let mut grads = m.zeros_like();
    let loss = batch_loss_and_grad(m, items, &mut grads)?;
    if !loss.is_finite() || !grads.is_finite() {
        return Err(Error::Numerical("non-finite loss or gradient".into()));
    }
    m.add_scaled(&grads, -lr);
    Ok(loss)
}

/// Mean (clamped) NLL of a set of items.
pub fn mean_nll<F: Scalar>(m: &ModelParams<F>, items: &[&TrainItem<F>]) -> Result<f64> {
    if items.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for it in items {
        total += nll_item(it.z, forward(&it.graph, m)?).nll.as_f64();
    }
    Ok(total / items.len() as f64)
}

/// PIT value `F(z; theta(graph))` of an item under a model.
pub fn pit<F: Scalar>(m: &ModelParams<F>, item: &TrainItem<F>) -> Result<F> {
    Ok(gev_cdf(item.z, forward(&item.graph, m)?))
}

fn run<F: Scalar>(
    train: &[&TrainItem<F>],
    val: &[&TrainItem<F>],
    cfg: &TrainConfig,
    lr: f64,
) -> Result<(ModelParams<F>, TrainMeta)> {
    let mut m = ModelParams::init(cfg.hyper, cfg.seed, cfg.head_gain);
    m.scaling = fit_scaling(train);
    if cfg.warm_start {
        let z: Vec<F> = train.iter().map(|it| it.z).collect();
        m.head_b.data.copy_from_slice(&warm_start_bias(&z));
    }
    let start_train = mean_nll(&m, train)?;
    let select = if val.is_empty() { train } else { val };
    let mut best_val = mean_nll(&m, select)?;
    let mut best = m.clone();
    let mut best_epoch = 0;
    let mut since = 0;
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x7a11));
    let lr_f = F::lit(lr);
    let mut epochs = 0;
    for epoch in 1..=cfg.max_epochs {
        epochs = epoch;
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let batch: Vec<&TrainItem<F>> = chunk.iter().map(|&i| train[i]).collect();
            total += gradient_step(&mut m, &batch, lr_f)?.as_f64();
        }
        let train_nll = total / train.len() as f64;
        if !(train_nll <= start_train + DIVERGENCE_MARGIN) {
            return Err(Error::Numerical(format!(
                "training NLL rose from {start_train:.4} to {train_nll:.4}"
            )));
        }
        let val_nll = mean_nll(&m, select)?;
        if !val_nll.is_finite() {
            return Err(Error::Numerical("non-finite validation NLL".into()));
        }
        history.push(EpochRecord {
            epoch,
            train_nll,
            val_nll,
        });
        if val_nll < best_val {
            best_val = val_nll;
            best = m.clone();
            best_epoch = epoch;
            since = 0;
        } else {
            since += 1;
            if since >= cfg.patience {
                break;
            }
        }
    }
    let final_train_nll = mean_nll(&best, train)?;
    Ok((
        best,
        TrainMeta {
            lr,
            epochs,
            best_epoch,
            best_val_nll: best_val,
            final_train_nll,
            train_items: train.len(),
            val_items: val.len(),
            history,
            config_hash: String::new(),
        },
    ))
}

/// Trains one scenario network. Deterministic for a given seed.
pub fn train<F: Scalar>(items: &[TrainItem<F>], cfg: &TrainConfig, tag: Label) -> Result<TrainedModel<F>> {
    if items.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if !(cfg.lr > 0.0) || cfg.batch_size == 0 {
        return Err(Error::InvalidArgument("lr must be > 0 and batch size >= 1".into()));
    }
    let (train_idx, val_idx) = split_by_sample(items, cfg.validation_fraction, cfg.seed);
    let train: Vec<&TrainItem<F>> = train_idx.iter().map(|&i| &items[i]).collect();
    let val: Vec<&TrainItem<F>> = val_idx.iter().map(|&i| &items[i]).collect();
    let mut lr = cfg.lr;
    let mut last = None;
    for _ in 0..=5 {
        match run(&train, &val, cfg, lr) {
            Ok((params, meta)) => {
                return Ok(TrainedModel {
                    format: MODEL_FORMAT.to_string(),
                    version: MODEL_FORMAT_VERSION,
                    tag,
                    seed: cfg.seed,
                    params,
                    meta,
                })
            }
            Err(Error::Numerical(msg)) => {
                last = Some(msg);
                lr *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    Err(Error::Numerical(format!(
        "training diverged after 5 learning-rate halvings: {}",
        last.unwrap_or_default()
    )))
}
