//! Product and customer embeddings.
//!
//! - [`train_skipgram_products`]: skip-gram with negative sampling over
//!   co-basket pairs.
//! - [`build_hypergraph`] + [`train_cleora`]: iterated, normalised
//!   propagation over basket hyperedges, yielding product and customer tables
//!   from one run.
//! - [`train_rnn_consumer`]: a tanh recurrent encoder trained on next-product
//!   prediction; the final hidden state is the customer embedding.
//!
//! Tables persist in the little-endian `EMB1` format ([`save_embeddings`]).

mod cleora;
mod io;
mod rnn;
mod skipgram;
mod table;

use thiserror::Error;

use crate::corpus::Id;

pub use cleora::{
    build_hypergraph, initial_embedding, propagate, train_cleora, CleoraConfig, Hypergraph, Node, NodeKind,
};
pub use io::{load_embeddings, read_embeddings, save_embeddings, write_embeddings, MAGIC};
pub use rnn::{customer_sequences, train_rnn_consumer, RnnEncoderConfig, RnnOutput};
pub use skipgram::{train_skipgram_products, SkipGramConfig};
pub use table::{cosine, EmbeddingTable};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("embedding file: {0}")]
    Format(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("duplicate id {0}")]
    DuplicateId(Id),
    #[error("row {row} ({id}) has a non-finite value")]
    NonFinite { row: usize, id: Id },
    #[error("matrix shape {rows}x{cols} does not match {ids} ids of dim {dim}")]
    Shape { rows: usize, cols: usize, ids: usize, dim: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("nodes without edges: {0:?}")]
    Orphans(Vec<Id>),
    #[error("invalid config: {0}")]
    Config(String),
}

pub type Result<T, E = EmbedError> = std::result::Result<T, E>;

/// Product embedding method of an experiment cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProductMethod {
    W2v,
    Cleora,
}

/// Customer embedding method of an experiment cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConsumerMethod {
    Rnn,
    Cleora,
}

impl ProductMethod {
    pub const ALL: [ProductMethod; 2] = [ProductMethod::W2v, ProductMethod::Cleora];

    pub fn as_str(&self) -> &'static str {
        match self {
            ProductMethod::W2v => "w2v",
            ProductMethod::Cleora => "cleora",
        }
    }
}

impl ConsumerMethod {
    pub const ALL: [ConsumerMethod; 2] = [ConsumerMethod::Rnn, ConsumerMethod::Cleora];

    pub fn as_str(&self) -> &'static str {
        match self {
            ConsumerMethod::Rnn => "rnn",
            ConsumerMethod::Cleora => "cleora",
        }
    }
}

impl std::fmt::Display for ProductMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::fmt::Display for ConsumerMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ProductMethod {
    type Err = EmbedError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "w2v" => Ok(ProductMethod::W2v),
            "cleora" => Ok(ProductMethod::Cleora),
            other => Err(EmbedError::Config(format!("unknown product method `{other}` (expected w2v or cleora)"))),
        }
    }
}

impl std::str::FromStr for ConsumerMethod {
    type Err = EmbedError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rnn" => Ok(ConsumerMethod::Rnn),
            "cleora" => Ok(ConsumerMethod::Cleora),
            other => Err(EmbedError::Config(format!("unknown consumer method `{other}` (expected rnn or cleora)"))),
        }
    }
}
