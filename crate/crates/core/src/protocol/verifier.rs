use std::sync::Arc;

use super::messages::{AskPayload, GateArgument, ReturnPayload};
use crate::chain::{Ledger, OutPoint, PayloadGate, PayloadVerifier, Transaction};
use crate::crypto::keyed_hash;
use crate::sse::{empty_digest, SseError};

pub const SSE_RETURN_VERIFIER: &str = "sse-return/v1";

/// Accepts a return transaction iff its results hash to the digest stored in
/// the index entry the ask's trapdoor points at.
///
/// The MAC key comes from the ask payload (the spent transaction), and the
/// entry is located by re-reading the index from the ledger. The number of
/// returned ciphertexts must equal the number of non-pad posting entries.
/// For a keyword absent from the index, only the empty result with the empty
/// digest is accepted.
pub struct SseReturnVerifier;

impl SseReturnVerifier {
    fn check(ledger: &Ledger, gate: &PayloadGate, spent: &OutPoint, spending: &Transaction) -> Option<()> {
        let arg = GateArgument::from_bytes(&gate.argument).ok()?;
        let ask = ledger.transaction(&spent.txid)?;
        let ask = AskPayload::from_bytes(&ask.payload()).ok()?;
        let td = &ask.trapdoor;
        if td.scheme != arg.scheme || ask.locator != arg.locator || td.token.as_bytes() != arg.token {
            return None;
        }
        let ret = ReturnPayload::from_bytes(&spending.payload()).ok()?;
        if keyed_hash(&td.mac_key, &ret.ciphertexts.concat()) != ret.digest {
            return None;
        }
        match td.locate(ledger, &ask.locator) {
            Ok((entry, _)) => {
                let listed = td.open_list(&entry, ledger.txid_bytes()).ok()?;
                (entry.digest == ret.digest && listed.len() == ret.ciphertexts.len()).then_some(())
            }
            Err(SseError::NoMatch) => {
                (ret.ciphertexts.is_empty() && ret.digest == empty_digest(&td.mac_key)).then_some(())
            }
            Err(_) => None,
        }
    }
}

impl PayloadVerifier for SseReturnVerifier {
    fn verify(&self, ledger: &Ledger, gate: &PayloadGate, spent: &OutPoint, spending: &Transaction) -> bool {
        Self::check(ledger, gate, spent, spending).is_some()
    }
}

/// Registers [`SseReturnVerifier`] under [`SSE_RETURN_VERIFIER`].
pub fn register(ledger: &mut Ledger) {
    ledger.register_verifier(SSE_RETURN_VERIFIER, Arc::new(SseReturnVerifier));
}
