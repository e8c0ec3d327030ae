//! Crash-risk modeling with non-stationary block-maxima extreme value theory.
//!
//! Pre-crash vehicle interactions are reduced to block maxima of the negated
//! minimum remaining distance between a subject vehicle and its six lane
//! neighbors. A graph-attention network maps the scene graph at each extreme
//! event to the parameters of a generalized extreme value (GEV) distribution.
//! Two such networks, one trained on crash episodes and one on normal traffic,
//! are compared frame by frame to produce a risk value in `[0, 2]`.

pub mod error;
pub mod evaluation;
pub mod gev;
pub mod nsbm_gat;
pub mod pipeline;
pub mod quadrature;
pub mod risk;
pub mod scalar;
pub mod scene_graph;
pub mod synth;
pub mod trajectory;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type GevParams64 = gev::GevParams<f64>;
pub type GevParams32 = gev::GevParams<f32>;
pub type RawGevParams64 = gev::RawGevParams<f64>;
pub type RawGevParams32 = gev::RawGevParams<f32>;
pub type SceneGraph64 = scene_graph::SceneGraph<f64>;
pub type SceneGraph32 = scene_graph::SceneGraph<f32>;
pub type ModelParams64 = nsbm_gat::ModelParams<f64>;
pub type ModelParams32 = nsbm_gat::ModelParams<f32>;
pub type TrainedModel64 = nsbm_gat::TrainedModel<f64>;
pub type TrainedModel32 = nsbm_gat::TrainedModel<f32>;
pub type RiskAssessment64 = risk::RiskAssessment<f64>;
pub type RiskAssessment32 = risk::RiskAssessment<f32>;
