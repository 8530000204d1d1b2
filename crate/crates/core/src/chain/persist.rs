use std::path::Path;

use super::codec::{DecodeError, Reader, Writer};
use super::ledger::{Block, ChainConfig, Ledger};
use super::tx::{Transaction, Txid};
use super::ChainError;

pub const LEDGER_MAGIC: &[u8; 8] = b"SSEBCLDG";
const LEDGER_VERSION: u32 = 1;

impl Ledger {
    /// Serializes blocks, mempool, withheld set and clock. The UTXO set and
    /// fee totals are rebuilt from the blocks on load.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.raw(LEDGER_MAGIC).u32(LEDGER_VERSION);
        w.u64(self.config.embed_limit as u64)
            .u32(self.config.txid_bytes as u32)
            .u64(self.config.clock_tick)
            .u64(self.config.confirm_window);
        w.u64(self.clock);
        w.u32(self.blocks.len() as u32);
        for block in &self.blocks {
            let mut b = Writer::new();
            b.u64(block.height).u64(block.time).u32(block.txs.len() as u32);
            for tx in &block.txs {
                b.bytes(&tx.to_bytes());
            }
            w.bytes(&b.finish());
        }
        w.u32(self.mempool.len() as u32);
        for (_, tx) in &self.mempool {
            w.bytes(&tx.to_bytes());
        }
        w.u32(self.withheld.len() as u32);
        for id in &self.withheld {
            w.bytes(id.as_bytes());
        }
        w.finish()
    }

    /// Inverse of [`Ledger::to_bytes`]. Payload verifiers are not persisted
    /// and must be registered again by the caller.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ChainError> {
        let mut r = Reader::new(bytes);
        if r.raw(8)? != LEDGER_MAGIC {
            return Err(DecodeError::Invalid("ledger magic").into());
        }
        let version = r.u32()?;
        if version != LEDGER_VERSION {
            return Err(DecodeError::Invalid("ledger version").into());
        }
        let config = ChainConfig {
            embed_limit: r.u64()? as usize,
            txid_bytes: r.u32()? as usize,
            clock_tick: r.u64()?,
            confirm_window: r.u64()?,
        };
        config.validate()?;
        let mut ledger = Ledger::empty(config);
        let clock = r.u64()?;
        let n_blocks = r.count(4)?;
        for expected in 0..n_blocks {
            let mut b = Reader::new(r.bytes()?);
            let height = b.u64()?;
            let time = b.u64()?;
            if height != expected as u64 {
                return Err(DecodeError::Invalid("block height").into());
            }
            ledger.blocks.push(Block {
                height,
                time,
                txs: vec![],
            });
            let n_tx = b.count(4)?;
            for _ in 0..n_tx {
                let tx = Transaction::from_bytes(b.bytes()?)?;
                ledger.apply(tx);
            }
            b.finish()?;
        }
        ledger.clock = clock;
        let n_pool = r.count(4)?;
        for _ in 0..n_pool {
            let tx = Transaction::from_bytes(r.bytes()?)?;
            ledger.mempool.push_back((ledger.txid(&tx), tx));
        }
        let n_held = r.count(4)?;
        for _ in 0..n_held {
            ledger.withheld.insert(Txid::from_bytes(r.bytes()?));
        }
        r.finish()?;
        Ok(ledger)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, Box<dyn std::error::Error + Send + Sync>> {
        let bytes = std::fs::read(path)?;
        Ok(Ledger::from_bytes(&bytes)?)
    }
}
