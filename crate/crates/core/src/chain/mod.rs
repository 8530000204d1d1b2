//! Deterministic single-process UTXO ledger.
//!
//! A transaction is accepted iff its locktime has been reached, every input
//! script satisfies the output script it redeems, and none of the redeemed
//! outputs were already spent. Blocks are mined on demand; each block
//! advances a logical clock by a fixed tick.

pub mod codec;
mod embed;
mod ledger;
mod persist;
mod script;
mod tx;
mod wallet;

pub use embed::{
    embed_payload, follow_chain, linked_fragment, publish_plan, read_split3, EmbedMode,
    EmbedPlan, EmbedRequest, Fragment, LinkRule, Split3Record,
};
pub use ledger::{Block, BlockSummary, ChainConfig, Ledger, Receipt, Reject};
pub use persist::LEDGER_MAGIC;
pub use script::{
    make_multisig_2of2, make_payload_gate, make_sig_script, InputScript, MacDigestVerifier,
    OutputScript, PayloadGate, PayloadVerifier, ScriptError, MAC_DIGEST_VERIFIER,
};
pub use tx::{OutPoint, Transaction, TxInput, TxOutput, Txid};
pub use wallet::Wallet;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChainError {
    #[error("transaction {0} not found")]
    NotFound(Txid),
    #[error("linked chain broken at {0}")]
    CorruptChain(Txid),
    #[error("payload fragment of {len} bytes exceeds embed limit {limit}")]
    PayloadTooLarge { len: usize, limit: usize },
    #[error("transaction rejected: {0}")]
    Rejected(#[from] Reject),
    #[error("no spendable output worth at least {needed}")]
    Funding { needed: u64 },
    #[error("transaction {0} not mined within the confirmation window")]
    StoreTimeout(Txid),
    #[error("invalid chain configuration: {0}")]
    Config(String),
    #[error("ledger file: {0}")]
    Decode(#[from] codec::DecodeError),
}
