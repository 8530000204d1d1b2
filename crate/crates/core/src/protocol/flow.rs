use super::messages::{fragments, AskPayload, GateArgument, ReturnPayload};
use super::verifier::SSE_RETURN_VERIFIER;
use super::ProtocolError;
use crate::chain::codec::{Reader, Writer};
use crate::chain::{
    make_payload_gate, InputScript, Ledger, OutPoint, OutputScript, PayloadGate, Reject, Transaction,
    TxInput, TxOutput, Txid, Wallet,
};
use crate::crypto::{PublicKey, Signature};
use crate::sse::{derive_trapdoor, empty_digest, phi_search, Broadcast, SseError, Trapdoor};
use crate::crypto::KeyBundle;

/// An ask as held by `U′`: the transaction, and what it commits to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AskOffer {
    pub ask_tx: Transaction,
    pub ask_txid: Txid,
    pub payload: AskPayload,
    pub deposit: u64,
    pub owner: PublicKey,
    pub searcher: PublicKey,
    /// `max_{U′}`: how long before the deadline `U′` waits for the ask to be
    /// mined before aborting.
    pub max_delay: u64,
}

impl AskOffer {
    /// Reconstructs an offer from its transaction.
    pub fn from_tx(ask_tx: Transaction, txid_bytes: usize, max_delay: u64) -> Result<Self, ProtocolError> {
        let bad = || ProtocolError::Malformed("not an ask transaction");
        let payload = AskPayload::from_bytes(&ask_tx.payload()).map_err(|_| bad())?;
        let out = ask_tx.outputs.first().ok_or_else(bad)?;
        let OutputScript::PayloadGate(gate) = &out.script else {
            return Err(bad());
        };
        if gate.verifier != SSE_RETURN_VERIFIER {
            return Err(bad());
        }
        Ok(AskOffer {
            ask_txid: ask_tx.txid(txid_bytes),
            deposit: out.value,
            owner: gate.fallback.0,
            searcher: gate.claimant,
            payload,
            ask_tx,
            max_delay,
        })
    }

    pub fn deadline(&self) -> u64 {
        self.payload.deadline
    }

    pub fn trapdoor(&self) -> &Trapdoor {
        &self.payload.trapdoor
    }

    /// The deposit output.
    pub fn outpoint(&self) -> OutPoint {
        OutPoint::new(self.ask_txid.clone(), 0)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.bytes(&self.ask_tx.to_bytes()).u64(self.max_delay);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8], txid_bytes: usize) -> Result<Self, ProtocolError> {
        let mut r = Reader::new(bytes);
        let tx = Transaction::from_bytes(r.bytes()?)?;
        let max_delay = r.u64()?;
        r.finish()?;
        Self::from_tx(tx, txid_bytes, max_delay)
    }
}

/// The pre-signed, time-locked 2-of-2 refund of the deposit to `U′`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FuseRefund {
    pub tx: Transaction,
    pub txid: Txid,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReturnClaim {
    pub tx: Transaction,
    pub txid: Txid,
    pub payload: ReturnPayload,
}

/// The searcher's side of the Fuse exchange.
pub trait FuseCosigner {
    /// Signs the Fuse for `offer`, or refuses.
    fn cosign_fuse(&self, offer: &AskOffer, fuse: &Transaction) -> Option<Signature>;
}

impl FuseCosigner for Wallet {
    fn cosign_fuse(&self, offer: &AskOffer, fuse: &Transaction) -> Option<Signature> {
        let spends_deposit = matches!(&fuse.inputs[..], [i] if i.prev == offer.outpoint());
        let ok = spends_deposit && fuse.locktime == Some(offer.deadline()) && offer.searcher == self.public();
        ok.then(|| self.sign(fuse))
    }
}

/// A searcher that never cosigns.
pub struct Refuse;

impl FuseCosigner for Refuse {
    fn cosign_fuse(&self, _: &AskOffer, _: &Transaction) -> Option<Signature> {
        None
    }
}

#[derive(Clone, Debug)]
pub struct AskParams {
    pub keyword: String,
    pub deposit: u64,
    pub deadline: u64,
    pub max_delay: u64,
}

/// Builds the ask and its Fuse, has the searcher cosign the Fuse, and only
/// then submits the ask. Nothing is submitted if any step fails.
pub fn make_ask(
    ledger: &mut Ledger,
    uprime: &Wallet,
    keys: &KeyBundle,
    index: &Broadcast,
    searcher: PublicKey,
    cosigner: &dyn FuseCosigner,
    params: &AskParams,
) -> Result<(AskOffer, FuseRefund), ProtocolError> {
    let clock = ledger.clock();
    let margin = ledger.config().confirm_window;
    if params.max_delay >= params.deadline {
        return Err(ProtocolError::Config(format!(
            "max_delay {} must be below the deadline {}",
            params.max_delay, params.deadline
        )));
    }
    if params.deadline <= clock + margin {
        return Err(ProtocolError::Config(format!(
            "deadline {} must exceed clock {clock} plus confirmation margin {margin}",
            params.deadline
        )));
    }
    if params.deposit < uprime.fee {
        return Err(ProtocolError::Config("deposit must cover the refund fee".into()));
    }
    let p = ledger.txid_bytes();
    let (input, value) = uprime.select_input(ledger, params.deposit + uprime.fee)?;
    let payload = AskPayload {
        trapdoor: derive_trapdoor(keys, &params.keyword, index.scheme, p),
        locator: index.locator.clone(),
        deadline: params.deadline,
    };
    let gate = PayloadGate {
        verifier: SSE_RETURN_VERIFIER.into(),
        argument: GateArgument {
            scheme: index.scheme,
            locator: index.locator.clone(),
            token: payload.trapdoor.token.as_bytes().to_vec(),
        }
        .to_bytes(),
        claimant: searcher,
        fallback: (uprime.public(), searcher),
    };
    let mut outputs = vec![TxOutput::new(params.deposit, make_payload_gate(gate))];
    let change = value - params.deposit - uprime.fee;
    if change > 0 {
        outputs.push(TxOutput::new(change, OutputScript::Sig(uprime.public())));
    }
    attach_payload(&mut outputs, &payload.to_bytes(), ledger.config().embed_limit, uprime.public());
    let mut ask_tx = Transaction {
        inputs: vec![TxInput {
            prev: input,
            script: InputScript::Empty,
        }],
        outputs,
        locktime: None,
    };
    let offer = AskOffer::from_tx(ask_tx.clone(), p, params.max_delay)?;

    let mut fuse = Transaction {
        inputs: vec![TxInput {
            prev: offer.outpoint(),
            script: InputScript::Empty,
        }],
        outputs: vec![TxOutput::new(params.deposit - uprime.fee, OutputScript::Sig(uprime.public()))],
        locktime: Some(params.deadline),
    };
    let q_sig = cosigner
        .cosign_fuse(&offer, &fuse)
        .ok_or(ProtocolError::CosignRefused)?;
    fuse.inputs[0].script = InputScript::MultiSig(uprime.sign(&fuse), q_sig);
    let fuse = FuseRefund {
        txid: ledger.txid(&fuse),
        tx: fuse,
    };

    uprime.sign_all(&mut ask_tx);
    ledger.submit(ask_tx.clone()).map_err(ProtocolError::Rejected)?;
    Ok((AskOffer { ask_tx, ..offer }, fuse))
}

/// Spreads `payload` over the outputs, one fragment each, adding zero-value
/// outputs to `owner` when there are more fragments than outputs.
fn attach_payload(outputs: &mut Vec<TxOutput>, payload: &[u8], limit: usize, owner: PublicKey) {
    for (i, frag) in fragments(payload, limit).into_iter().enumerate() {
        if i == outputs.len() {
            outputs.push(TxOutput::new(0, OutputScript::Sig(owner)));
        }
        outputs[i].payload = Some(frag);
    }
}

/// `U′` redeems the ask's funding output itself when the ask has not been
/// mined by `deadline − max_delay`. Submits and returns the refund.
pub fn abort_before_inclusion(ledger: &mut Ledger, uprime: &Wallet, offer: &AskOffer) -> Result<Txid, ProtocolError> {
    if ledger.is_mined(&offer.ask_txid) {
        return Err(ProtocolError::CannotAbort);
    }
    let earliest = offer.deadline() - offer.max_delay;
    if ledger.clock() < earliest {
        return Err(ProtocolError::TooEarly {
            clock: ledger.clock(),
            earliest,
        });
    }
    let mut inputs = vec![];
    let mut value = 0;
    for i in &offer.ask_tx.inputs {
        value += ledger
            .unspent(&i.prev)
            .ok_or_else(|| ProtocolError::Rejected(Reject::DoubleSpend(i.prev.clone())))?
            .value;
        inputs.push(TxInput {
            prev: i.prev.clone(),
            script: InputScript::Empty,
        });
    }
    let mut tx = Transaction {
        inputs,
        outputs: vec![TxOutput::new(value.saturating_sub(uprime.fee), OutputScript::Sig(uprime.public()))],
        locktime: None,
    };
    uprime.sign_all(&mut tx);
    Ok(ledger.submit(tx).map_err(ProtocolError::Rejected)?.txid)
}

/// Reads and parses a mined ask.
pub fn read_ask(ledger: &Ledger, ask_txid: &Txid) -> Result<AskOffer, ProtocolError> {
    let tx = ledger.transaction(ask_txid).ok_or(ProtocolError::AskNotMined)?;
    AskOffer::from_tx(tx.clone(), ledger.txid_bytes(), 0)
}

/// The return transaction claiming `offer`'s deposit with the given result.
pub fn build_return(ledger: &Ledger, q: &Wallet, offer: &AskOffer, payload: ReturnPayload) -> ReturnClaim {
    let mut outputs = vec![TxOutput::new(offer.deposit.saturating_sub(q.fee), OutputScript::Sig(q.public()))];
    attach_payload(&mut outputs, &payload.to_bytes(), ledger.config().embed_limit, q.public());
    let mut tx = Transaction {
        inputs: vec![TxInput {
            prev: offer.outpoint(),
            script: InputScript::Empty,
        }],
        outputs,
        locktime: None,
    };
    tx.inputs[0].script = InputScript::GateClaim(q.sign(&tx));
    ReturnClaim {
        txid: ledger.txid(&tx),
        tx,
        payload,
    }
}

/// Submits a return; a failing gate surfaces as `ClaimRejected`.
pub fn submit_return(ledger: &mut Ledger, claim: &ReturnClaim) -> Result<Txid, ProtocolError> {
    ledger
        .submit(claim.tx.clone())
        .map(|r| r.txid)
        .map_err(ProtocolError::ClaimRejected)
}

/// The honest searcher: runs the search named by a mined ask and claims the
/// deposit with its result. An unknown keyword is answered with the empty
/// result.
pub fn fulfill(ledger: &mut Ledger, q: &Wallet, ask_txid: &Txid) -> Result<ReturnClaim, ProtocolError> {
    let offer = read_ask(ledger, ask_txid)?;
    if ledger.clock() >= offer.deadline() {
        return Err(ProtocolError::DeadlinePassed {
            clock: ledger.clock(),
            deadline: offer.deadline(),
        });
    }
    let td = offer.trapdoor();
    let payload = match phi_search(ledger, td, &offer.payload.locator) {
        Ok(r) => ReturnPayload {
            ciphertexts: r.ciphertexts,
            digest: r.digest,
        },
        Err(SseError::NoMatch) => ReturnPayload {
            ciphertexts: vec![],
            digest: empty_digest(&td.mac_key),
        },
        Err(e) => return Err(e.into()),
    };
    let claim = build_return(ledger, q, &offer, payload);
    submit_return(ledger, &claim)?;
    Ok(claim)
}

/// Submits the Fuse once its locktime has passed. Checks validity first so
/// that an early or superseded refund is reported rather than queued.
pub fn refund_after_timeout(ledger: &mut Ledger, fuse: &FuseRefund) -> Result<Txid, ProtocolError> {
    match ledger.validate(&fuse.tx) {
        Ok(()) => {}
        Err(Reject::LocktimeNotReached { locktime, clock }) => {
            return Err(ProtocolError::LocktimeNotReached { locktime, clock })
        }
        Err(Reject::DoubleSpend(op)) => {
            let by = ledger.spender_of(&op).cloned();
            return Err(ProtocolError::AlreadySpent(by));
        }
        Err(e) => return Err(ProtocolError::Rejected(e)),
    }
    Ok(ledger.submit(fuse.tx.clone()).map_err(ProtocolError::Rejected)?.txid)
}

/// How the deposit of an offer was settled, if it was.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Settlement {
    Open,
    Returned(Txid, ReturnPayload),
    Refunded(Txid),
}

pub fn settlement(ledger: &Ledger, offer: &AskOffer) -> Settlement {
    let Some(id) = ledger.spender_of(&offer.outpoint()) else {
        return Settlement::Open;
    };
    let tx = ledger.transaction(id).expect("spender is mined");
    match &tx.inputs[0].script {
        InputScript::GateClaim(_) => match ReturnPayload::from_bytes(&tx.payload()) {
            Ok(p) => Settlement::Returned(id.clone(), p),
            Err(_) => Settlement::Refunded(id.clone()),
        },
        _ => Settlement::Refunded(id.clone()),
    }
}

/// `U′` reads a mined return, checks its digest and decrypts it.
pub fn decrypt_return(ledger: &Ledger, keys: &KeyBundle, offer: &AskOffer) -> Result<Vec<Vec<u8>>, ProtocolError> {
    match settlement(ledger, offer) {
        Settlement::Returned(_, p) => {
            let td = offer.trapdoor();
            if crate::crypto::keyed_hash(&td.mac_key, &p.ciphertexts.concat()) != p.digest {
                return Err(SseError::DigestMismatch.into());
            }
            Ok(crate::sse::decrypt_results(keys, &p.ciphertexts)?)
        }
        Settlement::Refunded(_) => Err(ProtocolError::NoReturn),
        Settlement::Open => Err(ProtocolError::NoReturn),
    }
}
