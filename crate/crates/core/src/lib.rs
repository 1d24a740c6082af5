//! Synthetic retail transactions under SKU stock constraints.
//!
//! The crate is organised as a pipeline:
//!
//! - [`corpus`]: domain records, CSV ingestion and a stock-aware synthetic
//!   corpus generator.
//! - [`embed`]: product and customer embeddings (skip-gram, Cleora-style
//!   hypergraph propagation, recurrent next-item encoder) and the `EMB1`
//!   binary table format.
//! - [`features`]: cyclic date features, log prices, min-max scaling, the
//!   item vector layout and stock embeddings.
//! - [`nn`]: a small dense-network engine with first- and second-order
//!   backpropagation, Adam and RMSprop.
//! - [`gan`]: the stock-conditioned WGAN-GP, its training loop, generation
//!   and stock-masked decoding.
//! - [`eval`]: JSD, EMD, discriminative accuracy and the experiment report.
//! - [`pipeline`]: config parsing, run directories and the command layer used
//!   by the `stockgan` binary.
//!
//! Runnable walkthroughs for each stage live in the crate's `examples/`
//! directory (`cargo run --release --example <name>`).

pub mod corpus;
pub mod embed;
pub mod eval;
pub mod features;
pub mod gan;
pub mod nn;
pub mod pipeline;

pub(crate) mod rng;

pub use corpus::Id;
