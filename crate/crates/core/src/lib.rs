//! Teacher-student learning of one-convolution-layer graph neural networks.
//!
//! The crate covers both task families:
//!
//! - node-level (NGNN): one graph, one label per node, `y = σ(D⁻¹AHW)v`;
//! - graph-level (GGNN): many graphs, one label per graph, `y_j = a_j σ(D_j⁻¹A_jH_jW)v`.
//!
//! Training uses approximate gradient descent: the W-gradient replaces the
//! activation derivative with the inverse of an auxiliary matrix Ξ (see
//! [`xi`]), the v-gradient is exact, and W is renormalized onto the unit
//! Frobenius sphere after every step (see [`trainer`]).
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! parallel sweeps live in the companion `gnnlab` crate.
#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod activation;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod model;
pub mod rng;
pub mod teacher;
pub mod theory;
pub mod trainer;
pub mod xi;

pub use activation::Activation;
pub use error::{Error, Result};
pub use graph::{avg_inv_degree, conv_operator, er_graph, ConvOperator, DegreeConvention, Graph};
pub use linalg::Matrix;
pub use model::{make_aggregation, Aggregation, AggregationMode, Params};
pub use teacher::{sample_teacher, synth_ggnn, synth_ngnn, GgnnDataset, GgnnSynth, GraphSample, NgnnDataset};
pub use theory::{check_confinement, constants, sample_condition, Structure, TheoryConstants, TheoryInput};
pub use trainer::{train, EpochRecord, InitMode, Mode, TrainConfig, TrainError, TrainOutcome, TrainingData, Trajectory, XiConfig};
pub use xi::{estimate_xi_ggnn, estimate_xi_ngnn, solve_inverse, XiEstimator, XiOperator, XiSource};
