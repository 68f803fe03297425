//! Dense retrieval: text encoders, the per-project embedding index, and
//! exhaustive cosine top-n search.

mod embed;
mod search;

pub use embed::{
    tokenize, EmbedderInfo, EmbedderKind, EncodeError, Encoder, LocalEncoder, RemoteEncoder,
    DEFAULT_LOCAL_DIM, DEFAULT_LOCAL_SEED, EMBEDDING_KEY_ENV, EMBEDDING_MODEL_ENV, EMBEDDING_URL_ENV,
};
pub use search::{
    cosine, top_n, top_n_vector, DimensionMismatch, EmbeddingIndex, EmbeddingVector, IndexError,
    IndexRow, QueryMode, RetrievalError, RetrievalQuery, ScoredEntry,
};
