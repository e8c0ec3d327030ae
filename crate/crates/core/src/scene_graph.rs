//! Per-frame interaction graph: the subject vehicle plus up to six lane
//! neighbors.
//!
//! Node order is `[subject, lead_left, lead_same, lead_right, lag_left,
//! lag_same, lag_right]`. The 11 candidate edges are the six subject-neighbor
//! pairs plus the lead chain, the lag chain and the lead/lag link in the
//! subject's lane. Edges point from the lower node index to the higher one and
//! carry `neighbor - source` differences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::trajectory::{NeighborSet, Role, VehicleId, VehicleState};

pub const NODE_DIM: usize = 6;
pub const EDGE_DIM: usize = 5;
pub const MAX_NODES: usize = 7;
pub const MAX_EDGES: usize = 11;

pub const EDGE_ENDPOINTS: [(usize, usize); MAX_EDGES] = [
    (0, 1),
    (0, 2),
    (0, 3),
    (0, 4),
    (0, 5),
    (0, 6),
    (1, 2),
    (2, 3),
    (4, 5),
    (5, 6),
    (2, 5),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct Edge<F> {
    pub src: usize,
    pub dst: usize,
    pub features: [F; EDGE_DIM],
    pub active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "F: Scalar")]
pub struct SceneGraph<F> {
    /// `[speed, accel, heading, lane, x, y]`, positions relative to the
    /// subject; zeros for absent nodes.
    pub nodes: Vec<[F; NODE_DIM]>,
    pub node_present: Vec<bool>,
    pub edges: Vec<Edge<F>>,
    pub sample_id: String,
    pub t: f64,
}

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut w = a.rem_euclid(two_pi);
    if w > std::f64::consts::PI {
        w -= two_pi;
    }
    w
}

/// `[relative speed, relative accel, lateral dy, longitudinal dx, relative
/// heading]` of `to` with respect to `from`.
pub fn edge_features(from: &VehicleState, to: &VehicleState) -> [f64; EDGE_DIM] {
    [
        to.speed - from.speed,
        to.accel - from.accel,
        to.y - from.y,
        to.x - from.x,
        wrap_angle(to.heading - from.heading),
    ]
}

fn node_features(v: &VehicleState, origin: &VehicleState) -> [f64; NODE_DIM] {
    [
        v.speed,
        v.accel,
        v.heading,
        v.lane as f64,
        v.x - origin.x,
        v.y - origin.y,
    ]
}

impl<F: Scalar> SceneGraph<F> {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn present_nodes(&self) -> usize {
        self.node_present.iter().filter(|p| **p).count()
    }

    pub fn active_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.active).count()
    }

    /// Checks shapes and that active edges join present nodes.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.len() != self.node_present.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} nodes but {} presence flags",
                self.nodes.len(),
                self.node_present.len()
            )));
        }
        for e in &self.edges {
            if e.src >= self.nodes.len() || e.dst >= self.nodes.len() || e.src == e.dst {
                return Err(Error::ShapeMismatch(format!("edge {}-{}", e.src, e.dst)));
            }
            if e.active && !(self.node_present[e.src] && self.node_present[e.dst]) {
                return Err(Error::ShapeMismatch(format!(
                    "active edge {}-{} touches an absent node",
                    e.src, e.dst
                )));
            }
        }
        Ok(())
    }
}

/// Builds the canonical graph for one frame.
pub fn build_graph<F: Scalar>(
    frame: &[VehicleState],
    subject_id: VehicleId,
    neighbors: &NeighborSet,
    sample_id: &str,
    t: f64,
) -> Result<SceneGraph<F>> {
    let subject = frame
        .iter()
        .find(|v| v.vehicle_id == subject_id)
        .ok_or(Error::SubjectMissing)?;
    let mut states: Vec<Option<&VehicleState>> = vec![Some(subject)];
    for role in Role::ALL {
        let state = neighbors
            .get(role)
            .and_then(|id| frame.iter().find(|v| v.vehicle_id == id));
        states.push(state);
    }
    let cast = |xs: &[f64]| -> Vec<F> { xs.iter().map(|&x| F::lit(x)).collect() };
    let nodes = states
        .iter()
        .map(|s| match s {
            Some(v) => {
                let f = cast(&node_features(v, subject));
                std::array::from_fn(|i| f[i])
            }
            None => [F::zero(); NODE_DIM],
        })
        .collect();
    let node_present: Vec<bool> = states.iter().map(Option::is_some).collect();
    let edges = EDGE_ENDPOINTS
        .iter()
        .map(|&(src, dst)| match (states[src], states[dst]) {
            (Some(a), Some(b)) => {
                let f = cast(&edge_features(a, b));
                Edge {
                    src,
                    dst,
                    features: std::array::from_fn(|i| f[i]),
                    active: true,
                }
            }
            _ => Edge {
                src,
                dst,
                features: [F::zero(); EDGE_DIM],
                active: false,
            },
        })
        .collect();
    Ok(SceneGraph {
        nodes,
        node_present,
        edges,
        sample_id: sample_id.to_string(),
        t,
    })
}

/// Neighbor identification and graph construction in one step.
pub fn graph_for_frame<F: Scalar>(
    frame: &[VehicleState],
    subject_id: VehicleId,
    sample_id: &str,
    t: f64,
) -> Result<SceneGraph<F>> {
    let neighbors = crate::trajectory::identify_neighbors(frame, subject_id)?;
    build_graph(frame, subject_id, &neighbors, sample_id, t)
}
