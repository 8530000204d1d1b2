//! The three output-script kinds and their input-script counterparts.
//!
//! Scripts are a closed enum evaluated by [`check_spend`]; there is no stack
//! machine.

use thiserror::Error;

use super::codec::{DecodeError, Reader, Writer};
use super::ledger::Ledger;
use super::tx::{OutPoint, Transaction};
use crate::crypto::{keyed_hash, verify, Key, Keypair, PublicKey, Signature};

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum OutputScript {
    /// Spendable with one signature by the key.
    Sig(PublicKey),
    /// Spendable with signatures by both keys.
    MultiSig2of2(PublicKey, PublicKey),
    /// Spendable by `claimant` when a registered verifier accepts the spending
    /// transaction's payload, or by both `fallback` keys together.
    PayloadGate(PayloadGate),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct PayloadGate {
    pub verifier: String,
    pub argument: Vec<u8>,
    pub claimant: PublicKey,
    pub fallback: (PublicKey, PublicKey),
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub enum InputScript {
    /// Coinbase inputs only.
    Empty,
    Sig(Signature),
    MultiSig(Signature, Signature),
    /// Claimant's signature on a gated spend.
    GateClaim(Signature),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScriptError {
    #[error("signature does not verify")]
    BadSignature,
    #[error("input script kind does not match the output script")]
    WrongInputKind,
    #[error("unknown payload verifier {0:?}")]
    UnknownVerifier(String),
    #[error("payload verifier {0:?} rejected the spending transaction")]
    PayloadRejected(String),
}

pub fn make_sig_script(keypair: &Keypair) -> OutputScript {
    OutputScript::Sig(keypair.public())
}

pub fn make_multisig_2of2(a: PublicKey, b: PublicKey) -> OutputScript {
    OutputScript::MultiSig2of2(a, b)
}

pub fn make_payload_gate(gate: PayloadGate) -> OutputScript {
    OutputScript::PayloadGate(gate)
}

/// A predicate over the spending transaction, looked up by name when a
/// gated output is claimed. Implementations read mined state only.
pub trait PayloadVerifier: Send + Sync {
    fn verify(
        &self,
        ledger: &Ledger,
        gate: &PayloadGate,
        spent: &OutPoint,
        spending: &Transaction,
    ) -> bool;
}

/// Built-in verifier `mac-digest`: the argument is `key ‖ digest` and the
/// spending transaction's payload must hash to `digest` under `key`.
pub struct MacDigestVerifier;

pub const MAC_DIGEST_VERIFIER: &str = "mac-digest";

impl PayloadVerifier for MacDigestVerifier {
    fn verify(&self, _: &Ledger, gate: &PayloadGate, _: &OutPoint, spending: &Transaction) -> bool {
        let arg = &gate.argument;
        if !arg.len().is_multiple_of(2) {
            return false;
        }
        let (key, digest) = arg.split_at(arg.len() / 2);
        let Ok(key) = Key::from_slice(key) else {
            return false;
        };
        keyed_hash(&key, &spending.payload()) == digest
    }
}

pub(crate) fn check_spend(
    ledger: &Ledger,
    output: &OutputScript,
    input: &InputScript,
    spent: &OutPoint,
    spending: &Transaction,
    sighash: &[u8],
) -> Result<(), ScriptError> {
    match (output, input) {
        (OutputScript::Sig(pk), InputScript::Sig(sig)) => check_sig(pk, sighash, sig),
        (OutputScript::MultiSig2of2(a, b), InputScript::MultiSig(sa, sb)) => {
            check_sig(a, sighash, sa)?;
            check_sig(b, sighash, sb)
        }
        (OutputScript::PayloadGate(gate), InputScript::MultiSig(sa, sb)) => {
            check_sig(&gate.fallback.0, sighash, sa)?;
            check_sig(&gate.fallback.1, sighash, sb)
        }
        (OutputScript::PayloadGate(gate), InputScript::GateClaim(sig)) => {
            check_sig(&gate.claimant, sighash, sig)?;
            let verifier = ledger
                .verifier(&gate.verifier)
                .ok_or_else(|| ScriptError::UnknownVerifier(gate.verifier.clone()))?;
            if verifier.verify(ledger, gate, spent, spending) {
                Ok(())
            } else {
                Err(ScriptError::PayloadRejected(gate.verifier.clone()))
            }
        }
        _ => Err(ScriptError::WrongInputKind),
    }
}

fn check_sig(pk: &PublicKey, msg: &[u8], sig: &Signature) -> Result<(), ScriptError> {
    if verify(pk, msg, sig) {
        Ok(())
    } else {
        Err(ScriptError::BadSignature)
    }
}

impl OutputScript {
    pub(crate) fn encode(&self, w: &mut Writer) {
        match self {
            OutputScript::Sig(pk) => {
                w.u8(1).raw(&pk.0);
            }
            OutputScript::MultiSig2of2(a, b) => {
                w.u8(2).raw(&a.0).raw(&b.0);
            }
            OutputScript::PayloadGate(g) => {
                w.u8(3)
                    .bytes(g.verifier.as_bytes())
                    .bytes(&g.argument)
                    .raw(&g.claimant.0)
                    .raw(&g.fallback.0 .0)
                    .raw(&g.fallback.1 .0);
            }
        }
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(match r.u8()? {
            1 => OutputScript::Sig(PublicKey(r.array()?)),
            2 => OutputScript::MultiSig2of2(PublicKey(r.array()?), PublicKey(r.array()?)),
            3 => {
                let verifier = String::from_utf8(r.bytes()?.to_vec())
                    .map_err(|_| DecodeError::Invalid("verifier id"))?;
                let argument = r.bytes()?.to_vec();
                OutputScript::PayloadGate(PayloadGate {
                    verifier,
                    argument,
                    claimant: PublicKey(r.array()?),
                    fallback: (PublicKey(r.array()?), PublicKey(r.array()?)),
                })
            }
            t => return Err(r.bad_tag(t)),
        })
    }

    /// The single key that controls this output, if any.
    pub fn owner(&self) -> Option<&PublicKey> {
        match self {
            OutputScript::Sig(pk) => Some(pk),
            _ => None,
        }
    }
}

impl InputScript {
    pub(crate) fn encode(&self, w: &mut Writer) {
        match self {
            InputScript::Empty => {
                w.u8(0);
            }
            InputScript::Sig(s) => {
                w.u8(1).raw(&s.0);
            }
            InputScript::MultiSig(a, b) => {
                w.u8(2).raw(&a.0).raw(&b.0);
            }
            InputScript::GateClaim(s) => {
                w.u8(3).raw(&s.0);
            }
        }
    }

    pub(crate) fn decode(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        Ok(match r.u8()? {
            0 => InputScript::Empty,
            1 => InputScript::Sig(Signature(r.array()?)),
            2 => InputScript::MultiSig(Signature(r.array()?), Signature(r.array()?)),
            3 => InputScript::GateClaim(Signature(r.array()?)),
            t => return Err(r.bad_tag(t)),
        })
    }
}
