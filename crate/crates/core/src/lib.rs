//! Nonlinear embeddings (EE, SNE, t-SNE, UMAP) with per-point pressure
//! diagnostics and extra-dimension refinement of converged embeddings.
//!
//! A typical pipeline: [`affinity::build_affinities`] on a [`Dataset`],
//! [`optimizer::minimize`] from a random start, [`pressure::pressure`] to see
//! which points are trapped, and [`optimizer::pp_optimize`] to move them.

pub mod affinity;
pub mod augmented;
pub mod cli;
pub mod data_io;
pub mod error;
pub mod linalg;
pub mod objectives;
pub mod optimizer;
pub mod pressure;
pub mod types;

pub use error::{EmbedError, Result};
pub use objectives::{Method, MethodTag};
pub use types::{
    pairwise_sqdist, AffinityGraph, AugmentedState, Dataset, Embedding, OptimRun, PressureReport,
    TraceRecord,
};
