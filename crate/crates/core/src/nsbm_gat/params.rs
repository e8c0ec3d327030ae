//! Learnable weights, hyperparameters and fixed input scaling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::scene_graph::{EDGE_DIM, NODE_DIM};

/// Dense row-major matrix; vectors are `n x 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Tensor<F> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> F {
        self.data[r * self.cols + c]
    }

    /// `self * x`.
    pub fn matvec(&self, x: &[F]) -> Vec<F> {
        debug_assert_eq!(x.len(), self.cols);
        self.data
            .chunks_exact(self.cols)
            .map(|row| dot(row, x))
            .collect()
    }

    /// `self^T * y`, accumulated into `out`.
    pub fn matvec_t_acc(&self, y: &[F], out: &mut [F]) {
        debug_assert_eq!(y.len(), self.rows);
        for (row, &yr) in self.data.chunks_exact(self.cols).zip(y) {
            if yr == F::zero() {
                continue;
            }
            for (o, &w) in out.iter_mut().zip(row) {
                *o += w * yr;
            }
        }
    }

    /// `self += scale * y x^T`.
    pub fn add_outer(&mut self, y: &[F], x: &[F], scale: F) {
        for (row, &yr) in self.data.chunks_exact_mut(self.cols).zip(y) {
            let s = yr * scale;
            if s == F::zero() {
                continue;
            }
            for (w, &xc) in row.iter_mut().zip(x) {
                *w += s * xc;
            }
        }
    }

    fn glorot<R: Rng>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Self {
        let limit = (6.0 / (rows + cols) as f64).sqrt() * gain;
        Self {
            rows,
            cols,
            data: (0..rows * cols)
                .map(|_| F::lit(rng.gen_range(-limit..=limit)))
                .collect(),
        }
    }
}

#[inline]
pub fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter().zip(b).fold(F::zero(), |acc, (&x, &y)| acc + x * y)
}

/// How a GAT layer combines attention-weighted features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// `sum_u alpha_vu W H_v`: the node's own transformed features, weighted
    /// by attention over its neighborhood.
    Center,
    /// `sum_u alpha_vu W H_u`: the usual GAT message passing.
    Neighbor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyper {
    pub score_hidden: usize,
    pub global_dim: usize,
    pub local_dim: usize,
    pub hidden: usize,
    pub leaky_slope: f64,
    pub aggregation: Aggregation,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            score_hidden: 8,
            global_dim: 16,
            local_dim: 16,
            hidden: 32,
            leaky_slope: 0.2,
            aggregation: Aggregation::Center,
        }
    }
}

impl Hyper {
    pub fn gat_input_dim(&self) -> usize {
        NODE_DIM + self.global_dim + self.local_dim
    }
}

/// Fixed affine scaling of raw graph features, fitted on training data.
/// Edge features are only rescaled so that their sign structure survives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct InputScaling<F> {
    pub node_mean: [F; NODE_DIM],
    pub node_scale: [F; NODE_DIM],
    pub edge_scale: [F; EDGE_DIM],
}

impl<F: Scalar> Default for InputScaling<F> {
    fn default() -> Self {
        Self {
            node_mean: [F::zero(); NODE_DIM],
            node_scale: [F::one(); NODE_DIM],
            edge_scale: [F::one(); EDGE_DIM],
        }
    }
}

/// All learnable weights of the network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct ModelParams<F> {
    pub hyper: Hyper,
    pub scaling: InputScaling<F>,
    /// Edge score MLP `d_e -> score_hidden -> 1`.
    pub score_w1: Tensor<F>,
    pub score_b1: Tensor<F>,
    pub score_w2: Tensor<F>,
    pub score_b2: Tensor<F>,
    /// Linear map of edge features into the global vector.
    pub global_w: Tensor<F>,
    /// Edge attention: `W_e`, `W_h` and the attention vector `a`.
    pub local_we: Tensor<F>,
    pub local_wh: Tensor<F>,
    pub local_a: Tensor<F>,
    pub gat1_w: Tensor<F>,
    pub gat1_a: Tensor<F>,
    pub gat1_att_bias: Tensor<F>,
    pub gat1_b: Tensor<F>,
    pub gat2_w: Tensor<F>,
    pub gat2_a: Tensor<F>,
    pub gat2_att_bias: Tensor<F>,
    pub gat2_b: Tensor<F>,
    /// Pooled vector to `[xi_raw, sigma_raw, mu_raw]`.
    pub head_w: Tensor<F>,
    pub head_b: Tensor<F>,
}

macro_rules! for_each_tensor {
    ($self:ident, $f:ident) => {
        [
            ("score_w1", $f!($self.score_w1)),
            ("score_b1", $f!($self.score_b1)),
            ("score_w2", $f!($self.score_w2)),
            ("score_b2", $f!($self.score_b2)),
            ("global_w", $f!($self.global_w)),
            ("local_we", $f!($self.local_we)),
            ("local_wh", $f!($self.local_wh)),
            ("local_a", $f!($self.local_a)),
            ("gat1_w", $f!($self.gat1_w)),
            ("gat1_a", $f!($self.gat1_a)),
            ("gat1_att_bias", $f!($self.gat1_att_bias)),
            ("gat1_b", $f!($self.gat1_b)),
            ("gat2_w", $f!($self.gat2_w)),
            ("gat2_a", $f!($self.gat2_a)),
            ("gat2_att_bias", $f!($self.gat2_att_bias)),
            ("gat2_b", $f!($self.gat2_b)),
            ("head_w", $f!($self.head_w)),
            ("head_b", $f!($self.head_b)),
        ]
    };
}

macro_rules! by_ref {
    ($e:expr) => {
        &$e
    };
}

macro_rules! by_mut {
    ($e:expr) => {
        &mut $e
    };
}

impl<F: Scalar> ModelParams<F> {
    /// All-zero weights with the shapes implied by `hyper`.
    pub fn zeros(hyper: Hyper) -> Self {
        let h = hyper;
        Self {
            hyper,
            scaling: InputScaling::default(),
            score_w1: Tensor::zeros(h.score_hidden, EDGE_DIM),
            score_b1: Tensor::zeros(h.score_hidden, 1),
            score_w2: Tensor::zeros(1, h.score_hidden),
            score_b2: Tensor::zeros(1, 1),
            global_w: Tensor::zeros(h.global_dim, EDGE_DIM),
            local_we: Tensor::zeros(h.local_dim, EDGE_DIM),
            local_wh: Tensor::zeros(h.local_dim, NODE_DIM),
            local_a: Tensor::zeros(2 * h.local_dim, 1),
            gat1_w: Tensor::zeros(h.hidden, h.gat_input_dim()),
            gat1_a: Tensor::zeros(2 * h.hidden, 1),
            gat1_att_bias: Tensor::zeros(1, 1),
            gat1_b: Tensor::zeros(h.hidden, 1),
            gat2_w: Tensor::zeros(h.hidden, h.hidden),
            gat2_a: Tensor::zeros(2 * h.hidden, 1),
            gat2_att_bias: Tensor::zeros(1, 1),
            gat2_b: Tensor::zeros(h.hidden, 1),
            head_w: Tensor::zeros(3, h.hidden),
            head_b: Tensor::zeros(3, 1),
        }
    }

    /// Seeded Glorot-uniform weight matrices, zero biases. The head weights
    /// are shrunk by `head_gain` so the initial output sits near `head_b`.
    pub fn init(hyper: Hyper, seed: u64, head_gain: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(hyper);
        let h = hyper;
        p.score_w1 = Tensor::glorot(h.score_hidden, EDGE_DIM, 1.0, &mut rng);
        p.score_w2 = Tensor::glorot(1, h.score_hidden, 1.0, &mut rng);
        p.global_w = Tensor::glorot(h.global_dim, EDGE_DIM, 1.0, &mut rng);
        p.local_we = Tensor::glorot(h.local_dim, EDGE_DIM, 1.0, &mut rng);
        p.local_wh = Tensor::glorot(h.local_dim, NODE_DIM, 1.0, &mut rng);
        p.local_a = Tensor::glorot(2 * h.local_dim, 1, 1.0, &mut rng);
        p.gat1_w = Tensor::glorot(h.hidden, h.gat_input_dim(), 1.0, &mut rng);
        p.gat1_a = Tensor::glorot(2 * h.hidden, 1, 1.0, &mut rng);
        p.gat2_w = Tensor::glorot(h.hidden, h.hidden, 1.0, &mut rng);
        p.gat2_a = Tensor::glorot(2 * h.hidden, 1, 1.0, &mut rng);
        p.head_w = Tensor::glorot(3, h.hidden, head_gain, &mut rng);
        p
    }

    pub fn tensors(&self) -> [(&'static str, &Tensor<F>); 18] {
        for_each_tensor!(self, by_ref)
    }

    pub fn tensors_mut(&mut self) -> [(&'static str, &mut Tensor<F>); 18] {
        for_each_tensor!(self, by_mut)
    }

    pub fn num_weights(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Same shapes, all zeros; used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut z = Self::zeros(self.hyper);
        z.scaling = self.scaling.clone();
        z
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.data.iter().all(|x| x.is_finite()))
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &Self, scale: F) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, &y) in a.data.iter_mut().zip(&b.data) {
                *x += scale * y;
            }
        }
    }

    /// Checks every tensor against the shapes implied by the hyperparameters.
    pub fn check_shapes(&self) -> Result<()> {
        let want = Self::zeros(self.hyper);
        for ((name, a), (_, b)) in self.tensors().into_iter().zip(want.tensors()) {
            if a.rows != b.rows || a.cols != b.cols || a.data.len() != b.rows * b.cols {
                return Err(Error::ShapeMismatch(format!(
                    "{name}: {}x{} with {} values, expected {}x{}",
                    a.rows,
                    a.cols,
                    a.data.len(),
                    b.rows,
                    b.cols
                )));
            }
        }
        Ok(())
    }
}
