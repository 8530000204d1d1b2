use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::script::{
    check_spend, InputScript, MacDigestVerifier, OutputScript, PayloadVerifier, ScriptError,
    MAC_DIGEST_VERIFIER,
};
use super::tx::{OutPoint, Transaction, TxOutput, Txid};
use super::ChainError;
use crate::crypto::PublicKey;

/// Ledger parameters. Lengths are in bytes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    /// Maximum payload carried by a single output (ι).
    pub embed_limit: usize,
    /// Transaction identifier length (p / 8).
    pub txid_bytes: usize,
    /// Logical clock advance per mined block.
    pub clock_tick: u64,
    /// Blocks a publisher waits for inclusion before giving up.
    pub confirm_window: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            embed_limit: 80,
            txid_bytes: 32,
            clock_tick: 1,
            confirm_window: 3,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), ChainError> {
        if !(8..=32).contains(&self.txid_bytes) {
            return Err(ChainError::Config(format!(
                "txid length {} bytes outside 8..=32",
                self.txid_bytes
            )));
        }
        if self.embed_limit == 0 {
            return Err(ChainError::Config("embed limit must be positive".into()));
        }
        if self.clock_tick == 0 {
            return Err(ChainError::Config("clock tick must be positive".into()));
        }
        Ok(())
    }
}

/// Why a transaction failed validation.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Reject {
    #[error("locktime {locktime} not reached (clock {clock})")]
    LocktimeNotReached { locktime: u64, clock: u64 },
    #[error("script failed on input {input}: {reason}")]
    ScriptFailed { input: usize, reason: ScriptError },
    #[error("output {0:?} already redeemed")]
    DoubleSpend(OutPoint),
    #[error("output {0:?} does not exist")]
    UnknownInput(OutPoint),
    #[error("outputs {outputs} exceed inputs {inputs}")]
    Inflation { inputs: u64, outputs: u64 },
    #[error("payload of output {output} is {len} bytes, limit {limit}")]
    PayloadTooLarge { output: usize, len: usize, limit: usize },
    #[error("malformed transaction: {0}")]
    Malformed(&'static str),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub height: u64,
    pub time: u64,
    pub txs: Vec<Transaction>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Receipt {
    pub txid: Txid,
    /// Waiting for its locktime.
    pub pending: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BlockSummary {
    pub height: u64,
    pub time: u64,
    pub included: Vec<Txid>,
    pub rejected: Vec<(Txid, Reject)>,
    pub still_pending: Vec<Txid>,
}

/// Single-process UTXO ledger with on-demand mining and a logical clock.
///
/// Mutation goes through `&mut self`; reads take `&self` and only see mined
/// state.
pub struct Ledger {
    pub(super) config: ChainConfig,
    pub(super) blocks: Vec<Block>,
    pub(super) utxo: BTreeMap<OutPoint, TxOutput>,
    pub(super) mempool: VecDeque<(Txid, Transaction)>,
    pub(super) withheld: BTreeSet<Txid>,
    pub(super) clock: u64,
    pub(super) fees: u64,
    pub(super) minted: u64,
    tx_index: HashMap<Txid, (usize, usize)>,
    spent_by: HashMap<OutPoint, Txid>,
    verifiers: BTreeMap<String, Arc<dyn PayloadVerifier>>,
    reads: AtomicU64,
}

impl std::fmt::Debug for Ledger {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Ledger")
            .field("height", &self.height())
            .field("clock", &self.clock)
            .field("utxo", &self.utxo.len())
            .field("mempool", &self.mempool.len())
            .finish()
    }
}

impl Ledger {
    /// A fresh ledger whose genesis block mints `allocations`.
    pub fn genesis(config: ChainConfig, allocations: &[(PublicKey, u64)]) -> Result<Self, ChainError> {
        config.validate()?;
        let coinbase = Transaction {
            inputs: vec![],
            outputs: allocations
                .iter()
                .map(|(pk, v)| TxOutput::new(*v, OutputScript::Sig(*pk)))
                .collect(),
            locktime: None,
        };
        let mut ledger = Ledger::empty(config);
        ledger.blocks.push(Block {
            height: 0,
            time: 0,
            txs: vec![],
        });
        ledger.apply(coinbase);
        Ok(ledger)
    }

    pub(super) fn empty(config: ChainConfig) -> Self {
        let mut verifiers: BTreeMap<String, Arc<dyn PayloadVerifier>> = BTreeMap::new();
        verifiers.insert(MAC_DIGEST_VERIFIER.into(), Arc::new(MacDigestVerifier));
        Ledger {
            config,
            blocks: vec![],
            utxo: BTreeMap::new(),
            mempool: VecDeque::new(),
            withheld: BTreeSet::new(),
            clock: 0,
            fees: 0,
            minted: 0,
            tx_index: HashMap::new(),
            spent_by: HashMap::new(),
            verifiers,
            reads: AtomicU64::new(0),
        }
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn txid_bytes(&self) -> usize {
        self.config.txid_bytes
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn height(&self) -> u64 {
        self.blocks.len().saturating_sub(1) as u64
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn register_verifier(&mut self, name: &str, verifier: Arc<dyn PayloadVerifier>) {
        self.verifiers.insert(name.to_string(), verifier);
    }

    pub fn verifier(&self, name: &str) -> Option<&dyn PayloadVerifier> {
        self.verifiers.get(name).map(|v| v.as_ref())
    }

    pub fn txid(&self, tx: &Transaction) -> Txid {
        tx.txid(self.config.txid_bytes)
    }

    /// Looks up a mined transaction. Counts as one ledger read.
    pub fn transaction(&self, txid: &Txid) -> Option<&Transaction> {
        self.reads.fetch_add(1, Ordering::Relaxed);
        self.tx_index
            .get(txid)
            .map(|&(h, i)| &self.blocks[h].txs[i])
    }

    pub fn is_mined(&self, txid: &Txid) -> bool {
        self.tx_index.contains_key(txid)
    }

    pub fn block_height_of(&self, txid: &Txid) -> Option<u64> {
        self.tx_index.get(txid).map(|&(h, _)| h as u64)
    }

    pub fn in_mempool(&self, txid: &Txid) -> bool {
        self.mempool.iter().any(|(id, _)| id == txid)
    }

    pub fn mempool(&self) -> impl Iterator<Item = (&Txid, &Transaction)> {
        self.mempool.iter().map(|(id, tx)| (id, tx))
    }

    /// Embedded payload of a mined transaction, verbatim.
    pub fn read_payload(&self, txid: &Txid) -> Result<Vec<u8>, ChainError> {
        self.transaction(txid)
            .map(Transaction::payload)
            .ok_or_else(|| ChainError::NotFound(txid.clone()))
    }

    /// Number of transaction lookups served since creation or the last reset.
    pub fn reads(&self) -> u64 {
        self.reads.load(Ordering::Relaxed)
    }

    pub fn reset_reads(&self) {
        self.reads.store(0, Ordering::Relaxed);
    }

    pub fn utxo(&self) -> impl Iterator<Item = (&OutPoint, &TxOutput)> {
        self.utxo.iter()
    }

    pub fn unspent(&self, outpoint: &OutPoint) -> Option<&TxOutput> {
        self.utxo.get(outpoint)
    }

    /// The mined transaction that redeemed `outpoint`, if any.
    pub fn spender_of(&self, outpoint: &OutPoint) -> Option<&Txid> {
        self.spent_by.get(outpoint)
    }

    pub fn spent_in_mempool(&self, outpoint: &OutPoint) -> bool {
        self.mempool
            .iter()
            .any(|(_, tx)| tx.inputs.iter().any(|i| &i.prev == outpoint))
    }

    /// Unspent outputs locked to `pk`, in outpoint order.
    pub fn utxos_of(&self, pk: &PublicKey) -> Vec<(OutPoint, u64)> {
        self.utxo
            .iter()
            .filter(|(_, o)| o.script.owner() == Some(pk))
            .map(|(op, o)| (op.clone(), o.value))
            .collect()
    }

    pub fn balance(&self, pk: &PublicKey) -> u64 {
        self.utxos_of(pk).iter().map(|(_, v)| v).sum()
    }

    pub fn utxo_value(&self) -> u64 {
        self.utxo.values().map(|o| o.value).sum()
    }

    pub fn total_minted(&self) -> u64 {
        self.minted
    }

    pub fn total_fees(&self) -> u64 {
        self.fees
    }

    /// Checks the three validity conditions (plus structural limits) against
    /// the current mined state and clock.
    pub fn validate(&self, tx: &Transaction) -> Result<(), Reject> {
        self.check(tx, false)
    }

    fn check(&self, tx: &Transaction, ignore_locktime: bool) -> Result<(), Reject> {
        if tx.inputs.is_empty() {
            return Err(Reject::Malformed("transaction has no inputs"));
        }
        for (i, out) in tx.outputs.iter().enumerate() {
            if let Some(p) = &out.payload {
                if p.len() > self.config.embed_limit {
                    return Err(Reject::PayloadTooLarge {
                        output: i,
                        len: p.len(),
                        limit: self.config.embed_limit,
                    });
                }
            }
        }
        if let Some(t) = tx.locktime {
            if t > self.clock && !ignore_locktime {
                return Err(Reject::LocktimeNotReached {
                    locktime: t,
                    clock: self.clock,
                });
            }
        }
        let mut seen = BTreeSet::new();
        let mut spent = Vec::with_capacity(tx.inputs.len());
        for input in &tx.inputs {
            if !seen.insert(&input.prev) {
                return Err(Reject::DoubleSpend(input.prev.clone()));
            }
            match self.utxo.get(&input.prev) {
                Some(out) => spent.push(out),
                None if self.spent_by.contains_key(&input.prev) => {
                    return Err(Reject::DoubleSpend(input.prev.clone()))
                }
                None => return Err(Reject::UnknownInput(input.prev.clone())),
            }
        }
        let inputs = spent
            .iter()
            .try_fold(0u64, |acc, o| acc.checked_add(o.value))
            .ok_or(Reject::Malformed("input value overflow"))?;
        let outputs = tx
            .outputs
            .iter()
            .try_fold(0u64, |acc, o| acc.checked_add(o.value))
            .ok_or(Reject::Malformed("output value overflow"))?;
        if outputs > inputs {
            return Err(Reject::Inflation { inputs, outputs });
        }
        let sighash = tx.sighash();
        for (i, (input, out)) in tx.inputs.iter().zip(spent).enumerate() {
            if matches!(input.script, InputScript::Empty) {
                return Err(Reject::ScriptFailed {
                    input: i,
                    reason: ScriptError::WrongInputKind,
                });
            }
            check_spend(self, &out.script, &input.script, &input.prev, tx, &sighash)
                .map_err(|reason| Reject::ScriptFailed { input: i, reason })?;
        }
        Ok(())
    }

    /// Queues a transaction. Transactions that are valid apart from an
    /// unreached locktime are accepted as pending.
    pub fn submit(&mut self, tx: Transaction) -> Result<Receipt, Reject> {
        let txid = self.txid(&tx);
        if self.in_mempool(&txid) {
            let first = tx.inputs.first().map(|i| i.prev.clone());
            return Err(first.map_or(Reject::Malformed("duplicate"), Reject::DoubleSpend));
        }
        let pending = match self.check(&tx, false) {
            Ok(()) => false,
            Err(Reject::LocktimeNotReached { .. }) => {
                self.check(&tx, true)?;
                true
            }
            Err(e) => return Err(e),
        };
        self.mempool.push_back((txid.clone(), tx));
        Ok(Receipt { txid, pending })
    }

    /// Miners withhold this transaction from blocks until released.
    pub fn withhold(&mut self, txid: &Txid) {
        self.withheld.insert(txid.clone());
    }

    pub fn release(&mut self, txid: &Txid) {
        self.withheld.remove(txid);
    }

    /// Mines one block at the current clock, including every mempool
    /// transaction that is valid in FIFO order, then advances the clock.
    pub fn mine_block(&mut self) -> BlockSummary {
        let height = self.blocks.len() as u64;
        let time = self.clock;
        self.blocks.push(Block {
            height,
            time,
            txs: vec![],
        });
        let mut summary = BlockSummary {
            height,
            time,
            ..Default::default()
        };
        let queue = std::mem::take(&mut self.mempool);
        for (txid, tx) in queue {
            if self.withheld.contains(&txid) {
                summary.still_pending.push(txid.clone());
                self.mempool.push_back((txid, tx));
                continue;
            }
            match self.validate(&tx) {
                Ok(()) => {
                    self.apply(tx);
                    summary.included.push(txid);
                }
                Err(Reject::LocktimeNotReached { .. }) => {
                    summary.still_pending.push(txid.clone());
                    self.mempool.push_back((txid, tx));
                }
                Err(e) => summary.rejected.push((txid, e)),
            }
        }
        self.clock += self.config.clock_tick;
        summary
    }

    pub fn mine_blocks(&mut self, n: u64) -> Vec<BlockSummary> {
        (0..n).map(|_| self.mine_block()).collect()
    }

    /// Mines until the clock reaches `time`.
    pub fn advance_to(&mut self, time: u64) -> Vec<BlockSummary> {
        let mut out = vec![];
        while self.clock < time {
            out.push(self.mine_block());
        }
        out
    }

    /// Appends a transaction to the newest block without validation.
    pub(super) fn apply(&mut self, tx: Transaction) {
        let txid = self.txid(&tx);
        let mut value_in = 0;
        for input in &tx.inputs {
            if let Some(out) = self.utxo.remove(&input.prev) {
                value_in += out.value;
            }
            self.spent_by.insert(input.prev.clone(), txid.clone());
        }
        let value_out = tx.output_value();
        if tx.is_coinbase() {
            self.minted += value_out;
        } else {
            self.fees += value_in - value_out;
        }
        for (i, out) in tx.outputs.iter().enumerate() {
            self.utxo
                .insert(OutPoint::new(txid.clone(), i as u32), out.clone());
        }
        let h = self.blocks.len() - 1;
        let block = &mut self.blocks[h];
        self.tx_index.insert(txid, (h, block.txs.len()));
        block.txs.push(tx);
    }

    /// Overwrites one byte of a mined payload in place, leaving the index
    /// untouched. Only for exercising tamper detection.
    #[doc(hidden)]
    pub fn corrupt_payload_for_testing(&mut self, txid: &Txid, output: usize, byte: usize) {
        let &(h, i) = self.tx_index.get(txid).expect("mined transaction");
        let payload = self.blocks[h].txs[i].outputs[output]
            .payload
            .as_mut()
            .expect("payload output");
        payload[byte] ^= 0x01;
    }
}
