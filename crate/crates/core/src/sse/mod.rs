//! Searchable encryption over the ledger.
//!
//! Two index layouts share one token derivation. Scheme A publishes the whole
//! encrypted index in a single transaction; scheme B publishes one encrypted
//! record per keyword, each linking back to the previous keyword's record,
//! and splits oversized payloads into back-linked chunks.

mod chunk;
mod corpus;
mod index;
mod search;

pub use chunk::{chunk_ciphertext, read_blob, reassemble, store_blob, store_document_b, ChunkPlan};
pub use corpus::{load_corpus, tokenize, Corpus, Document, MANIFEST_FILE};
pub use index::{
    build_index_a, build_index_b, build_posting_lists, decode_index_a, decode_record, encode_index_a,
    encrypt_record, index_entries, index_size_a, publish_corpus, Broadcast, IndexEntry, IndexStats,
    PostingList, PublishedIndex,
};
pub use search::{
    decrypt_results, derive_trapdoor, empty_digest, phi_search, phi_search_a, phi_search_b,
    SearchResult, Trapdoor,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainError, Txid};
use crate::crypto::CryptoError;

/// Index layout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    /// Whole index in one transaction.
    A,
    /// Per-keyword encrypted record chain.
    B,
}

impl Scheme {
    pub fn tag(self) -> u8 {
        match self {
            Scheme::A => b'A',
            Scheme::B => b'B',
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            b'A' | b'a' => Some(Scheme::A),
            b'B' | b'b' => Some(Scheme::B),
            _ => None,
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.tag() as char)
    }
}

impl std::str::FromStr for Scheme {
    type Err = SseError;

    fn from_str(s: &str) -> Result<Self, SseError> {
        match s.as_bytes() {
            [c] => Scheme::from_tag(*c).ok_or_else(|| SseError::Param(format!("unknown scheme {s:?}"))),
            _ => Err(SseError::Param(format!("unknown scheme {s:?}"))),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SseError {
    #[error("keyword not in index")]
    NoMatch,
    #[error("result digest does not match the index digest")]
    DigestMismatch,
    #[error("transaction {0} not found")]
    NotFound(Txid),
    #[error("linked chain broken at {0}")]
    CorruptChain(Txid),
    #[error("integrity error: {0}")]
    Integrity(String),
    #[error("ciphertext {index} failed to decrypt")]
    Decrypt { index: usize },
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("index of {len} bytes exceeds embed limit {limit}")]
    IndexTooLarge { len: usize, limit: usize },
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Chain(ChainError),
}

impl From<ChainError> for SseError {
    fn from(e: ChainError) -> Self {
        match e {
            ChainError::NotFound(id) => SseError::NotFound(id),
            ChainError::CorruptChain(id) => SseError::CorruptChain(id),
            other => SseError::Chain(other),
        }
    }
}
