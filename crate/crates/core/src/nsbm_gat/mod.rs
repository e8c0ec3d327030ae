//! Graph-attention covariate network producing per-scene GEV parameters.

mod grad_check;
mod network;
mod params;
mod train;

pub use grad_check::{grad_check, loss_and_grad, GradCheckReport, GRAD_FLOOR};
pub use network::{backward, forward, forward_cached, softmax, ForwardCache};
pub use params::{Aggregation, Hyper, InputScaling, ModelParams, Tensor};
pub use train::{
    batch_loss_and_grad, fit_scaling, gradient_step, mean_nll, pit, split_by_sample, train,
    EpochRecord, TrainConfig, TrainItem, TrainMeta, TrainedModel, MODEL_FORMAT,
    MODEL_FORMAT_VERSION,
};

#[cfg(test)]
pub(crate) mod test_support {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::scene_graph::{Edge, SceneGraph, EDGE_ENDPOINTS, MAX_NODES};

    /// Canonical topology with a random subset of neighbors and random
    /// features.
    pub fn random_graph(rng: &mut ChaCha8Rng, sample_id: &str) -> SceneGraph<f64> {
        let mut present = vec![true; MAX_NODES];
        for p in present.iter_mut().skip(1) {
            *p = rng.gen_bool(0.7);
        }
        let nodes = present
            .iter()
            .map(|&p| {
                if p {
                    std::array::from_fn(|_| rng.gen_range(-1.5..1.5))
                } else {
                    [0.0; 6]
                }
            })
            .collect();
        let edges = EDGE_ENDPOINTS
            .iter()
            .map(|&(src, dst)| {
                let active = present[src] && present[dst];
                Edge {
                    src,
                    dst,
                    features: if active {
                        std::array::from_fn(|_| rng.gen_range(-1.5..1.5))
                    } else {
                        [0.0; 5]
                    },
                    active,
                }
            })
            .collect();
        SceneGraph {
            nodes,
            node_present: present,
            edges,
            sample_id: sample_id.to_string(),
            t: 0.0,
        }
    }

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }
}
