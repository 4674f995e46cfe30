//! Multi-hop graph neighborhood signatures via Bloom filters, and
//! collaborative-filtering solvers that exploit them.
//!
//! The pipeline: take a sparse undirected graph over users, propagate
//! per-node Bloom filters along edges for `d` rounds ([`dna::encode`]) so
//! that row `i` of the resulting bit matrix approximately encodes the
//! d-hop neighborhood of node `i`, then feed that matrix into matrix
//! factorization either as extra pseudo-nodes of an augmented graph
//! ([`graph::augment`]) or as a co-factored side matrix
//! ([`factorize::train_cofactor`]).
//!
//! Modules:
//! - [`bloom`]: the bit-array filter itself (add / union / cardinality
//!   estimate / sizing).
//! - [`graph`]: sparse undirected graphs, Laplacians, exact matrix powers
//!   with thresholding (the expensive baseline), augmentation.
//! - [`dna`]: the propagation encoder producing the n x c signature matrix.
//! - [`bounds`]: Monte-Carlo verification of the closed-form envelopes on
//!   common-bit counts between two filters.
//! - [`factorize`]: GRMF, weighted implicit MF, and co-factorization
//!   solvers (alternating ridge updates).
//! - [`metrics`]: RMSE, relative graph gain, and ranking metrics.
//! - [`synth`]: synthetic rating generator whose user factors are smoothed
//!   over a random friendship graph.

pub mod bloom;
pub mod bounds;
pub mod dna;
pub mod error;
pub mod factorize;
pub mod graph;
pub mod metrics;
pub mod synth;

pub use error::{Error, Result};
