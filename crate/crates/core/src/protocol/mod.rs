//! Paid search: `U′` posts an ask carrying a trapdoor and a deposit, the
//! searcher `Q` claims the deposit with a return whose results the ledger
//! checks against the index, and a pre-signed time-locked Fuse refunds `U′`
//! if no valid return arrives in time.

mod flow;
mod messages;
pub mod scenario;
mod verifier;

pub use flow::{
    abort_before_inclusion, build_return, decrypt_return, fulfill, make_ask, read_ask, refund_after_timeout,
    settlement, submit_return, AskOffer, AskParams, FuseCosigner, FuseRefund, Refuse, ReturnClaim, Settlement,
};
pub use messages::{fragments, AskPayload, GateArgument, ReturnPayload};
pub use scenario::{parse_script, run_scenario, OfferState, Parties, Scenario, ScenarioConfig, ScenarioError, Step, TranscriptRecord};
pub use verifier::{register, SseReturnVerifier, SSE_RETURN_VERIFIER};

use thiserror::Error;

use crate::chain::codec::DecodeError;
use crate::chain::{ChainError, Reject, Txid};
use crate::sse::SseError;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("searcher refused to cosign the refund; nothing was broadcast")]
    CosignRefused,
    #[error("ask already mined; use the refund path")]
    CannotAbort,
    #[error("too early to abort: clock {clock}, allowed from {earliest}")]
    TooEarly { clock: u64, earliest: u64 },
    #[error("ask is not mined")]
    AskNotMined,
    #[error("deadline {deadline} has passed (clock {clock})")]
    DeadlinePassed { clock: u64, deadline: u64 },
    #[error("return rejected: {0}")]
    ClaimRejected(Reject),
    #[error("locktime {locktime} not reached (clock {clock})")]
    LocktimeNotReached { locktime: u64, clock: u64 },
    #[error("deposit already spent{}", .0.as_ref().map(|t| format!(" by {t}")).unwrap_or_default())]
    AlreadySpent(Option<Txid>),
    #[error("no return transaction for this ask")]
    NoReturn,
    #[error("transaction rejected: {0}")]
    Rejected(Reject),
    #[error("malformed: {0}")]
    Malformed(&'static str),
    #[error(transparent)]
    Sse(#[from] SseError),
    #[error(transparent)]
    Chain(ChainError),
}

impl From<ChainError> for ProtocolError {
    fn from(e: ChainError) -> Self {
        match e {
            ChainError::Rejected(r) => ProtocolError::Rejected(r),
            other => ProtocolError::Chain(other),
        }
    }
}

impl From<DecodeError> for ProtocolError {
    fn from(e: DecodeError) -> Self {
        ProtocolError::Chain(e.into())
    }
}
