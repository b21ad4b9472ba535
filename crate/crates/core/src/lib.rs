//! Transfer-learning toolkit for object detection at desk scale.
//!
//! The crate covers the full selection pipeline around a weight-sharing
//! detection supernet:
//!
//! * [`labelspace`] merges per-dataset label spaces through word-embedding
//!   similarity and plans classifier-head surgery.
//! * [`archspace`] defines the anchor sub search spaces, the depth-quantile
//!   sampling rules and the progressive-shrinking schedule.
//! * [`costmodel`] counts FLOPs of a ResNet-bottleneck + FPN two-stage detector.
//! * [`evaluator`] scores architectures at three fidelities (simulated or
//!   through an external trainer speaking the `gaia-eval` line protocol).
//! * [`tsas`] runs the two-step group search and Kendall-Tau ranking studies.
//! * [`tsds`] selects upstream images by represent-vector similarity.
//! * [`supernet`] is a fully-connected toy supernet with lowest-index slicing,
//!   exact reverse-mode gradients, progressive-shrinking training and head surgery.
//! * [`report`] renders deterministic SVG charts from CSV tables.

pub mod archspace;
pub mod config;
pub mod costmodel;
pub mod evaluator;
pub mod labelspace;
pub mod report;
pub mod rng;
pub mod supernet;
pub mod tsas;
pub mod tsds;

pub use archspace::{Architecture, Grid, SubSpace};
pub use costmodel::{detector_flops, CostBreakdown, HeadConfig};
pub use evaluator::{EvalRequest, EvalResult, Evaluator, Fidelity};
