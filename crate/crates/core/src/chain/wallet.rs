use super::script::{InputScript, OutputScript};
use super::tx::{OutPoint, Transaction, TxInput, TxOutput, Txid};
use super::{ChainError, Ledger};
use crate::crypto::{Keypair, PublicKey, Signature};

/// A party's signing key plus the flat fee it attaches to every transaction.
#[derive(Clone, Debug)]
pub struct Wallet {
    keypair: Keypair,
    pub fee: u64,
}

impl Wallet {
    pub fn new(keypair: Keypair, fee: u64) -> Self {
        Wallet { keypair, fee }
    }

    pub fn public(&self) -> PublicKey {
        self.keypair.public()
    }

    pub fn keypair(&self) -> &Keypair {
        &self.keypair
    }

    pub fn sign(&self, tx: &Transaction) -> Signature {
        self.keypair.sign(&tx.sighash())
    }

    /// Largest unspent output owned by this wallet that no queued transaction
    /// already spends.
    pub fn select_input(&self, ledger: &Ledger, min_value: u64) -> Result<(OutPoint, u64), ChainError> {
        ledger
            .utxos_of(&self.public())
            .into_iter()
            .filter(|(op, v)| *v >= min_value && !ledger.spent_in_mempool(op))
            .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
            .ok_or(ChainError::Funding { needed: min_value })
    }

    /// Sets a single-signature input script on every input.
    pub fn sign_all(&self, tx: &mut Transaction) {
        let sig = self.sign(tx);
        for input in &mut tx.inputs {
            input.script = InputScript::Sig(sig);
        }
    }

    /// A self-transfer carrying `payloads`, one per output. The first output
    /// keeps the change; the rest carry zero value.
    pub fn payload_tx(&self, ledger: &Ledger, payloads: Vec<Vec<u8>>) -> Result<Transaction, ChainError> {
        let (outpoint, value) = self.select_input(ledger, self.fee)?;
        let me = OutputScript::Sig(self.public());
        let mut outputs: Vec<TxOutput> = payloads
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                let v = if i == 0 { value - self.fee } else { 0 };
                TxOutput::new(v, me.clone()).with_payload(p)
            })
            .collect();
        if outputs.is_empty() {
            outputs.push(TxOutput::new(value - self.fee, me));
        }
        let mut tx = Transaction {
            inputs: vec![TxInput {
                prev: outpoint,
                script: InputScript::Empty,
            }],
            outputs,
            locktime: None,
        };
        self.sign_all(&mut tx);
        Ok(tx)
    }

    /// Pays `amount` to `to`, returning change to self.
    pub fn transfer(&self, ledger: &Ledger, to: PublicKey, amount: u64) -> Result<Transaction, ChainError> {
        let needed = amount + self.fee;
        let (outpoint, value) = self.select_input(ledger, needed)?;
        let mut outputs = vec![TxOutput::new(amount, OutputScript::Sig(to))];
        if value > needed {
            outputs.push(TxOutput::new(value - needed, OutputScript::Sig(self.public())));
        }
        let mut tx = Transaction {
            inputs: vec![TxInput {
                prev: outpoint,
                script: InputScript::Empty,
            }],
            outputs,
            locktime: None,
        };
        self.sign_all(&mut tx);
        Ok(tx)
    }

    /// Submits `tx` and mines until it is included, up to the ledger's
    /// confirmation window.
    pub fn publish(&self, ledger: &mut Ledger, tx: Transaction) -> Result<Txid, ChainError> {
        let receipt = ledger.submit(tx)?;
        for _ in 0..ledger.config().confirm_window.max(1) {
            let summary = ledger.mine_block();
            if summary.included.contains(&receipt.txid) {
                return Ok(receipt.txid);
            }
            if let Some((_, reason)) = summary.rejected.iter().find(|(id, _)| *id == receipt.txid) {
                return Err(ChainError::Rejected(reason.clone()));
            }
        }
        Err(ChainError::StoreTimeout(receipt.txid))
    }

    /// Builds and publishes a self-transfer carrying `payloads`.
    pub fn embed(&self, ledger: &mut Ledger, payloads: Vec<Vec<u8>>) -> Result<Txid, ChainError> {
        let tx = self.payload_tx(ledger, payloads)?;
        self.publish(ledger, tx)
    }
}
