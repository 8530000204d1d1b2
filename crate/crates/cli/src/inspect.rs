//! Read-only ledger inspection. Prints structure and sizes only; payload
//! bytes are never echoed.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use ssebc_core::chain::{linked_fragment, InputScript, Ledger, OutputScript, Transaction, Txid};
use ssebc_core::crypto::{chain_key, KeyBundle};
use ssebc_core::protocol::{AskPayload, ReturnPayload};
use ssebc_core::sse::{decode_index_a, decode_record, read_blob, Broadcast, Scheme};

/// What the owner knows about its own index transactions.
#[derive(Default)]
pub struct IndexMap {
    /// Scheme A index transaction and its entry count.
    index_a: Option<(Txid, usize)>,
    /// Scheme B record head txid -> (position from the head, link).
    records: BTreeMap<Txid, (usize, Txid)>,
}

impl IndexMap {
    pub fn new(ledger: &Ledger, keys: &KeyBundle, broadcast: Option<&Broadcast>) -> Self {
        let mut map = IndexMap::default();
        let Some(b) = broadcast else { return map };
        let p = ledger.txid_bytes();
        match b.scheme {
            Scheme::A => {
                let n = ledger
                    .read_payload(&b.locator)
                    .ok()
                    .and_then(|bytes| decode_index_a(&bytes, keys.level().key_bytes()).ok())
                    .map_or(0, |e| e.len());
                map.index_a = Some((b.locator.clone(), n));
            }
            Scheme::B => {
                let k11 = chain_key(keys, p);
                let mut cur = b.locator.clone();
                let mut pos = 0;
                while !cur.is_zero() && !map.records.contains_key(&cur) {
                    let Ok((bytes, _)) = read_blob(ledger, &cur) else { break };
                    let Ok((_, prev)) = decode_record(&k11.0, &bytes, p) else { break };
                    map.records.insert(cur.clone(), (pos, prev.clone()));
                    cur = prev;
                    pos += 1;
                }
            }
        }
        map
    }
}

fn kind(ledger: &Ledger, map: &IndexMap, txid: &Txid, tx: &Transaction) -> String {
    let p = ledger.txid_bytes();
    if tx.is_coinbase() {
        return "coinbase".into();
    }
    if let Some(OutputScript::PayloadGate(_)) = tx.outputs.first().map(|o| &o.script) {
        return match AskPayload::from_bytes(&tx.payload()) {
            Ok(a) => format!("ask deposit={} deadline={}", tx.outputs[0].value, a.deadline),
            Err(_) => "ask (malformed payload)".into(),
        };
    }
    if let Some(InputScript::GateClaim(_)) = tx.inputs.first().map(|i| &i.script) {
        return match ReturnPayload::from_bytes(&tx.payload()) {
            Ok(r) => format!("return results={} digest_len={}", r.ciphertexts.len(), r.digest.len()),
            Err(_) => "return (malformed payload)".into(),
        };
    }
    if tx.locktime.is_some() && matches!(tx.inputs.first().map(|i| &i.script), Some(InputScript::MultiSig(..))) {
        return format!("fuse locktime={}", tx.locktime.unwrap_or(0));
    }
    if let Some((id, n)) = &map.index_a {
        if id == txid {
            return format!("index-a entries={n}");
        }
    }
    if let Some((pos, prev)) = map.records.get(txid) {
        let link = if prev.is_zero() { "none".to_string() } else { prev.to_hex() };
        let chunk = linked_fragment(tx, p).map_or(String::new(), |(_, l)| format!(" chunk_link={l}"));
        return format!("index-record position={pos} link={link}{chunk}");
    }
    if let Some((_, link)) = linked_fragment(tx, p) {
        return format!("linked-fragment link={link}");
    }
    match tx.payloads().count() {
        0 => "transfer".into(),
        _ => "data".into(),
    }
}

pub fn describe(ledger: &Ledger, map: &IndexMap, txid: &Txid) -> Option<String> {
    let tx = ledger.transaction(txid)?;
    let height = ledger.block_height_of(txid);
    let payload: usize = tx.payloads().map(<[u8]>::len).sum();
    let mut s = String::new();
    let _ = write!(
        s,
        "{txid} height={} type={} inputs={} outputs={} value={} payload_bytes={payload}",
        height.map_or("mempool".to_string(), |h| h.to_string()),
        kind(ledger, map, txid, tx),
        tx.inputs.len(),
        tx.outputs.len(),
        tx.output_value(),
    );
    Some(s)
}

/// One line per mined transaction, oldest first.
pub fn describe_all(ledger: &Ledger, map: &IndexMap) -> Vec<String> {
    ledger
        .blocks()
        .iter()
        .flat_map(|b| b.txs.iter())
        .filter_map(|tx| describe(ledger, map, &ledger.txid(tx)))
        .collect()
}
