//! Latent-variable generative modeling of graphs.
//!
//! The crate bundles a small dense-matrix autodiff engine, graph utilities
//! (generators, normalization, edge splits, a Weisfeiler-Lehman isomorphism
//! heuristic), message-passing layers, the Graphite encoder/decoder family
//! (with GAE/VGAE as the zero-refinement special case), a numerical verifier
//! for the GNN/mean-field correspondence, and the experiment harnesses for
//! density estimation, link prediction, and semi-supervised node
//! classification.

pub mod gnn;
pub mod graph;
pub mod model;
pub mod tensor;

pub use graph::{Graph, GraphError};
pub use model::{GraphiteModel, ModelConfig, ModelError, ModelKind};
pub use tensor::{Mat, ParamStore, Tape, Tensor, TensorError};
