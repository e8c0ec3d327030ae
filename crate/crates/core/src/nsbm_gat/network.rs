//! Forward pass and manual backpropagation.
//!
//! Per graph:
//! 1. Global edge summary: score MLP per active edge, softmax over active
//!    edges, weighted sum of linearly projected edge features.
//! 2. Local edge attention per present node over its incident active edges,
//!    `alpha = softmax(LeakyReLU(a . [W_e A_vu || W_h h_v]))`, summed over
//!    `W_e A_vu`.
//! 3. `H_v = [h_v || F_g || F_L,v]` through two GAT layers whose attention
//!    runs over the node itself and its active neighbors.
//! 4. Element-wise max over present nodes, linear head, parameter transform.

use super::params::{dot, Aggregation, ModelParams, Tensor};
use crate::error::{Error, Result};
use crate::gev::{transform_raw, GevParams, RawGevParams};
use crate::scalar::Scalar;
use crate::scene_graph::{SceneGraph, EDGE_DIM, NODE_DIM};

#[inline]
fn leaky<F: Scalar>(x: F, slope: F) -> F {
    if x > F::zero() {
        x
    } else {
        slope * x
    }
}

#[inline]
fn leaky_grad<F: Scalar>(x: F, slope: F) -> F {
    if x > F::zero() {
        F::one()
    } else {
        slope
    }
}

/// Numerically stable softmax.
pub fn softmax<F: Scalar>(scores: &[F]) -> Vec<F> {
    let m = scores
        .iter()
        .copied()
        .fold(F::neg_infinity(), |a, b| if b > a { b } else { a });
    let e: Vec<F> = scores.iter().map(|&s| (s - m).exp()).collect();
    let total = e.iter().fold(F::zero(), |a, &b| a + b);
    e.into_iter().map(|x| x / total).collect()
}

/// Gradient of a softmax input given the gradient of its outputs.
fn softmax_backward<F: Scalar>(alpha: &[F], d_alpha: &[F]) -> Vec<F> {
    let mean = dot(alpha, d_alpha);
    alpha
        .iter()
        .zip(d_alpha)
        .map(|(&a, &d)| a * (d - mean))
        .collect()
}

fn axpy<F: Scalar>(out: &mut [F], scale: F, x: &[F]) {
    for (o, &v) in out.iter_mut().zip(x) {
        *o += scale * v;
    }
}

#[derive(Debug, Clone)]
struct LocalCache<F> {
    /// `(edge index, +1 if the node is the edge source else -1)`.
    incident: Vec<(usize, F)>,
    e_vec: Vec<Vec<F>>,
    hv: Vec<F>,
    scores: Vec<F>,
    alpha: Vec<F>,
}

#[derive(Debug, Clone)]
struct LayerCache<F> {
    input: Vec<Vec<F>>,
    z: Vec<Vec<F>>,
    /// Attention neighborhood of each present node, itself first.
    nbrs: Vec<Vec<usize>>,
    logits: Vec<Vec<F>>,
    alpha: Vec<Vec<F>>,
    pre: Vec<Vec<F>>,
    out: Vec<Vec<F>>,
}

/// Everything the backward pass needs from one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<F> {
    node_feats: Vec<Vec<F>>,
    edge_feats: Vec<Vec<F>>,
    active: Vec<usize>,
    present: Vec<usize>,
    score_pre: Vec<Vec<F>>,
    score_act: Vec<Vec<F>>,
    beta: Vec<F>,
    proj: Vec<Vec<F>>,
    global: Vec<F>,
    local: Vec<Option<LocalCache<F>>>,
    layers: [LayerCache<F>; 2],
    pooled: Vec<F>,
    argmax: Vec<usize>,
    pub raw: RawGevParams<F>,
    pub params: GevParams<F>,
}

impl<F: Scalar> ForwardCache<F> {
    /// Global edge attention weights, one per active edge.
    pub fn global_attention(&self) -> &[F] {
        &self.beta
    }

    pub fn global_features(&self) -> &[F] {
        &self.global
    }

    /// Local edge attention weights of node `v` (empty when absent or
    /// isolated).
    pub fn local_attention(&self, v: usize) -> &[F] {
        self.local[v].as_ref().map(|c| c.alpha.as_slice()).unwrap_or(&[])
    }

    /// GAT attention weights of node `v` in layer `l` (0 or 1).
    pub fn gat_attention(&self, l: usize, v: usize) -> &[F] {
        &self.layers[l].alpha[v]
    }

    /// Activation pattern of every piecewise-linear unit and max-pool winner.
    /// Two evaluations with equal signatures lie on the same linear piece.
    pub fn kink_signature(&self) -> Vec<u32> {
        let mut sig = Vec::new();
        let sign = |x: &F| (*x > F::zero()) as u32;
        for u in &self.score_pre {
            sig.extend(u.iter().map(sign));
        }
        for c in self.local.iter().flatten() {
            sig.extend(c.scores.iter().map(sign));
        }
        for l in &self.layers {
            for (q, p) in l.logits.iter().zip(&l.pre) {
                sig.extend(q.iter().map(sign));
                sig.extend(p.iter().map(sign));
            }
        }
        sig.extend(self.argmax.iter().map(|&i| i as u32));
        sig
    }
}

/// Scaled inputs are clipped to this many units so that scenes far outside
/// the training range cannot drive the linear layers into wild extrapolation.
pub const INPUT_CLIP: f64 = 3.0;

fn clip<F: Scalar>(x: F) -> F {
    x.max(F::lit(-INPUT_CLIP)).min(F::lit(INPUT_CLIP))
}

fn scale_inputs<F: Scalar>(graph: &SceneGraph<F>, m: &ModelParams<F>) -> (Vec<Vec<F>>, Vec<Vec<F>>) {
    let s = &m.scaling;
    let nodes = graph
        .nodes
        .iter()
        .zip(&graph.node_present)
        .map(|(x, &present)| {
            if present {
                (0..NODE_DIM)
                    .map(|k| clip((x[k] - s.node_mean[k]) / s.node_scale[k]))
                    .collect()
            } else {
                vec![F::zero(); NODE_DIM]
            }
        })
        .collect();
    let edges = graph
        .edges
        .iter()
        .map(|e| {
            if e.active {
                (0..EDGE_DIM).map(|k| clip(e.features[k] / s.edge_scale[k])).collect()
            } else {
                vec![F::zero(); EDGE_DIM]
            }
        })
        .collect();
    (nodes, edges)
}

fn gat_layer<F: Scalar>(
    input: Vec<Vec<F>>,
    w: &Tensor<F>,
    a: &Tensor<F>,
    att_bias: F,
    b: &Tensor<F>,
    nbrs: &[Vec<usize>],
    present: &[usize],
    slope: F,
    aggregation: Aggregation,
) -> LayerCache<F> {
    let n = input.len();
    let hidden = w.rows;
    let mut z = vec![Vec::new(); n];
    for &v in present {
        z[v] = w.matvec(&input[v]);
    }
    let (a_src, a_dst) = a.data.split_at(hidden);
    let mut logits = vec![Vec::new(); n];
    let mut alpha = vec![Vec::new(); n];
    let mut pre = vec![Vec::new(); n];
    let mut out = vec![vec![F::zero(); hidden]; n];
    for &v in present {
        let base = dot(a_src, &z[v]) + att_bias;
        let q: Vec<F> = nbrs[v].iter().map(|&u| base + dot(a_dst, &z[u])).collect();
        let e: Vec<F> = q.iter().map(|&x| leaky(x, slope)).collect();
        let al = softmax(&e);
        let mut p = b.data.clone();
        for (&u, &wt) in nbrs[v].iter().zip(&al) {
            let src = match aggregation {
                Aggregation::Center => v,
                Aggregation::Neighbor => u,
            };
            axpy(&mut p, wt, &z[src]);
        }
        out[v] = p.iter().map(|&x| x.max(F::zero())).collect();
        logits[v] = q;
        alpha[v] = al;
        pre[v] = p;
    }
    LayerCache {
        input,
        z,
        nbrs: nbrs.to_vec(),
        logits,
        alpha,
        pre,
        out,
    }
}

/// Runs the network on one graph and keeps the intermediates.
pub fn forward_cached<F: Scalar>(graph: &SceneGraph<F>, m: &ModelParams<F>) -> Result<ForwardCache<F>> {
    graph.validate()?;
    m.check_shapes()?;
    let h = m.hyper;
    let slope = F::lit(h.leaky_slope);
    let (node_feats, edge_feats) = scale_inputs(graph, m);
    let n = graph.nodes.len();
    let edge_ends: Vec<(usize, usize)> = graph.edges.iter().map(|e| (e.src, e.dst)).collect();
    let active: Vec<usize> = (0..graph.edges.len()).filter(|&k| graph.edges[k].active).collect();
    let present: Vec<usize> = (0..n).filter(|&v| graph.node_present[v]).collect();
    if present.is_empty() {
        return Err(Error::ShapeMismatch("graph has no present node".into()));
    }

    // Global edge summary.
    let mut score_pre = Vec::with_capacity(active.len());
    let mut score_act = Vec::with_capacity(active.len());
    let mut scores = Vec::with_capacity(active.len());
    let mut proj = Vec::with_capacity(active.len());
    for &k in &active {
        let mut u = m.score_w1.matvec(&edge_feats[k]);
        axpy(&mut u, F::one(), &m.score_b1.data);
        let act: Vec<F> = u.iter().map(|&x| leaky(x, slope)).collect();
        scores.push(dot(&m.score_w2.data, &act) + m.score_b2.data[0]);
        score_pre.push(u);
        score_act.push(act);
        proj.push(m.global_w.matvec(&edge_feats[k]));
    }
    let beta = softmax(&scores);
    let mut global = vec![F::zero(); h.global_dim];
    for (p, &b) in proj.iter().zip(&beta) {
        axpy(&mut global, b, p);
    }

    // Local edge attention.
    let (a_edge, a_node) = m.local_a.data.split_at(h.local_dim);
    let mut local: Vec<Option<LocalCache<F>>> = vec![None; n];
    let mut h_in = vec![vec![F::zero(); h.gat_input_dim()]; n];
    for &v in &present {
        let incident: Vec<(usize, F)> = active
            .iter()
            .filter_map(|&k| {
                let (s, d) = edge_ends[k];
                if s == v {
                    Some((k, F::one()))
                } else if d == v {
                    Some((k, -F::one()))
                } else {
                    None
                }
            })
            .collect();
        let hv = m.local_wh.matvec(&node_feats[v]);
        let node_term = dot(a_node, &hv);
        let e_vec: Vec<Vec<F>> = incident
            .iter()
            .map(|&(k, sign)| m.local_we.matvec(&edge_feats[k]).into_iter().map(|x| x * sign).collect())
            .collect();
        let scores: Vec<F> = e_vec.iter().map(|e| dot(a_edge, e) + node_term).collect();
        let act: Vec<F> = scores.iter().map(|&x| leaky(x, slope)).collect();
        let alpha = softmax(&act);
        let mut fl = vec![F::zero(); h.local_dim];
        for (e, &a) in e_vec.iter().zip(&alpha) {
            axpy(&mut fl, a, e);
        }
        let row = &mut h_in[v];
        row[..NODE_DIM].copy_from_slice(&node_feats[v]);
        row[NODE_DIM..NODE_DIM + h.global_dim].copy_from_slice(&global);
        row[NODE_DIM + h.global_dim..].copy_from_slice(&fl);
        local[v] = Some(LocalCache {
            incident,
            e_vec,
            hv,
            scores,
            alpha,
        });
    }

    // Attention neighborhoods: self first, then active neighbors by edge order.
    let mut nbrs: Vec<Vec<usize>> = (0..n).map(|v| vec![v]).collect();
    for &k in &active {
        let (s, d) = edge_ends[k];
        nbrs[s].push(d);
        nbrs[d].push(s);
    }

    let l1 = gat_layer(
        h_in,
        &m.gat1_w,
        &m.gat1_a,
        m.gat1_att_bias.data[0],
        &m.gat1_b,
        &nbrs,
        &present,
        slope,
        h.aggregation,
    );
    let l2 = gat_layer(
        l1.out.clone(),
        &m.gat2_w,
        &m.gat2_a,
        m.gat2_att_bias.data[0],
        &m.gat2_b,
        &nbrs,
        &present,
        slope,
        h.aggregation,
    );

    let mut pooled = vec![F::neg_infinity(); h.hidden];
    let mut argmax = vec![present[0]; h.hidden];
    for &v in &present {
        for j in 0..h.hidden {
            if l2.out[v][j] > pooled[j] {
                pooled[j] = l2.out[v][j];
                argmax[j] = v;
            }
        }
    }

    let mut out = m.head_w.matvec(&pooled);
    axpy(&mut out, F::one(), &m.head_b.data);
    let raw = RawGevParams {
        xi_raw: out[0],
        sigma_raw: out[1],
        mu_raw: out[2],
    };
    let params = transform_raw(raw)?;
    Ok(ForwardCache {
        node_feats,
        edge_feats,
        active,
        present,
        score_pre,
        score_act,
        beta,
        proj,
        global,
        local,
        layers: [l1, l2],
        pooled,
        argmax,
        raw,
        params,
    })
}

/// GEV parameters for one graph.
pub fn forward<F: Scalar>(graph: &SceneGraph<F>, m: &ModelParams<F>) -> Result<GevParams<F>> {
    Ok(forward_cached(graph, m)?.params)
}

/// Backward through one GAT layer; returns the gradient of its input.
#[allow(clippy::too_many_arguments)]
fn gat_backward<F: Scalar>(
    l: &LayerCache<F>,
    d_out: &[Vec<F>],
    w: &Tensor<F>,
    a: &Tensor<F>,
    present: &[usize],
    slope: F,
    aggregation: Aggregation,
    g_w: &mut Tensor<F>,
    g_a: &mut Tensor<F>,
    g_att_bias: &mut Tensor<F>,
    g_b: &mut Tensor<F>,
) -> Vec<Vec<F>> {
    let hidden = w.rows;
    let n = l.input.len();
    let (a_src, a_dst) = a.data.split_at(hidden);
    let mut d_z = vec![vec![F::zero(); hidden]; n];
    for &v in present {
        let d_pre: Vec<F> = d_out[v]
            .iter()
            .zip(&l.pre[v])
            .map(|(&g, &p)| if p > F::zero() { g } else { F::zero() })
            .collect();
        axpy(&mut g_b.data, F::one(), &d_pre);
        let mut d_alpha = Vec::with_capacity(l.nbrs[v].len());
        for (&u, &wt) in l.nbrs[v].iter().zip(&l.alpha[v]) {
            let src = match aggregation {
                Aggregation::Center => v,
                Aggregation::Neighbor => u,
            };
            d_alpha.push(dot(&d_pre, &l.z[src]));
            axpy(&mut d_z[src], wt, &d_pre);
        }
        let d_e = softmax_backward(&l.alpha[v], &d_alpha);
        for ((&u, &de), &q) in l.nbrs[v].iter().zip(&d_e).zip(&l.logits[v]) {
            let dq = de * leaky_grad(q, slope);
            if dq == F::zero() {
                continue;
            }
            g_att_bias.data[0] += dq;
            let (ga_src, ga_dst) = g_a.data.split_at_mut(hidden);
            axpy(ga_src, dq, &l.z[v]);
            axpy(ga_dst, dq, &l.z[u]);
            axpy(&mut d_z[v], dq, a_src);
            axpy(&mut d_z[u], dq, a_dst);
        }
    }
    let mut d_in = vec![vec![F::zero(); w.cols]; n];
    for &v in present {
        g_w.add_outer(&d_z[v], &l.input[v], F::one());
        w.matvec_t_acc(&d_z[v], &mut d_in[v]);
    }
    d_in
}

/// Accumulates `d loss / d weights` into `grads`, given the gradient of the
/// loss with respect to the raw head outputs `[xi_raw, sigma_raw, mu_raw]`.
pub fn backward<F: Scalar>(
    cache: &ForwardCache<F>,
    m: &ModelParams<F>,
    d_raw: [F; 3],
    grads: &mut ModelParams<F>,
) {
    let h = m.hyper;
    let slope = F::lit(h.leaky_slope);

    // Head.
    grads.head_w.add_outer(&d_raw, &cache.pooled, F::one());
    axpy(&mut grads.head_b.data, F::one(), &d_raw);
    let mut d_pooled = vec![F::zero(); h.hidden];
    m.head_w.matvec_t_acc(&d_raw, &mut d_pooled);

    // Max pool.
    let n = cache.node_feats.len();
    let mut d_out2 = vec![vec![F::zero(); h.hidden]; n];
    for (j, &v) in cache.argmax.iter().enumerate() {
        d_out2[v][j] += d_pooled[j];
    }

    let d_out1 = gat_backward(
        &cache.layers[1],
        &d_out2,
        &m.gat2_w,
        &m.gat2_a,
        &cache.present,
        slope,
        h.aggregation,
        &mut grads.gat2_w,
        &mut grads.gat2_a,
        &mut grads.gat2_att_bias,
        &mut grads.gat2_b,
    );
    let d_h = gat_backward(
        &cache.layers[0],
        &d_out1,
        &m.gat1_w,
        &m.gat1_a,
        &cache.present,
        slope,
        h.aggregation,
        &mut grads.gat1_w,
        &mut grads.gat1_a,
        &mut grads.gat1_att_bias,
        &mut grads.gat1_b,
    );

    // Split H_v = [h_v || F_g || F_L,v].
    let mut d_global = vec![F::zero(); h.global_dim];
    let (a_edge, a_node) = m.local_a.data.split_at(h.local_dim);
    for &v in &cache.present {
        let row = &d_h[v];
        axpy(&mut d_global, F::one(), &row[NODE_DIM..NODE_DIM + h.global_dim]);
        let d_fl = &row[NODE_DIM + h.global_dim..];
        let Some(lc) = &cache.local[v] else { continue };
        if lc.incident.is_empty() {
            continue;
        }
        let mut d_e_vec: Vec<Vec<F>> = lc.alpha.iter().map(|&a| d_fl.iter().map(|&g| a * g).collect()).collect();
        let d_alpha: Vec<F> = lc.e_vec.iter().map(|e| dot(d_fl, e)).collect();
        let d_act = softmax_backward(&lc.alpha, &d_alpha);
        let mut d_hv = vec![F::zero(); h.local_dim];
        for (i, (&da, &c)) in d_act.iter().zip(&lc.scores).enumerate() {
            let dc = da * leaky_grad(c, slope);
            if dc == F::zero() {
                continue;
            }
            let (ga_edge, ga_node) = grads.local_a.data.split_at_mut(h.local_dim);
            axpy(ga_edge, dc, &lc.e_vec[i]);
            axpy(ga_node, dc, &lc.hv);
            axpy(&mut d_hv, dc, a_node);
            axpy(&mut d_e_vec[i], dc, a_edge);
        }
        for (&(k, sign), de) in lc.incident.iter().zip(&d_e_vec) {
            grads.local_we.add_outer(de, &cache.edge_feats[k], sign);
        }
        grads.local_wh.add_outer(&d_hv, &cache.node_feats[v], F::one());
    }

    // Global edge summary.
    if cache.active.is_empty() {
        return;
    }
    let d_beta: Vec<F> = cache.proj.iter().map(|p| dot(&d_global, p)).collect();
    let d_scores = softmax_backward(&cache.beta, &d_beta);
    for (i, &k) in cache.active.iter().enumerate() {
        let a_k = &cache.edge_feats[k];
        grads.global_w.add_outer(&d_global, a_k, cache.beta[i]);
        let ds = d_scores[i];
        if ds == F::zero() {
            continue;
        }
        axpy(&mut grads.score_w2.data, ds, &cache.score_act[i]);
        grads.score_b2.data[0] += ds;
        let d_u: Vec<F> = m
            .score_w2
            .data
            .iter()
            .zip(&cache.score_pre[i])
            .map(|(&w, &u)| ds * w * leaky_grad(u, slope))
            .collect();
        grads.score_w1.add_outer(&d_u, a_k, F::one());
        axpy(&mut grads.score_b1.data, F::one(), &d_u);
    }
}
