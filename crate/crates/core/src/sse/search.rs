use super::chunk::read_blob;
use super::index::{decode_index_a, decode_record, IndexEntry, PostingList};
use super::{Scheme, SseError};
use crate::chain::{Ledger, Txid};
use crate::crypto::{chain_key, det_decrypt, keyed_hash, sym_decrypt, Key, KeyBundle, KeywordTokens};

/// Search capability for one keyword. Never contains `K1` or `K2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trapdoor {
    pub scheme: Scheme,
    pub token: Key,
    pub list_key: Key,
    pub mac_key: Key,
    /// `K11`, present for scheme B only.
    pub chain_key: Option<Key>,
}

/// Derives `(t_w, l_w, k_w)` and, for scheme B, `K11` for id length `p`.
pub fn derive_trapdoor(keys: &KeyBundle, w: &str, scheme: Scheme, p: usize) -> Trapdoor {
    let t = KeywordTokens::derive(keys, w);
    Trapdoor {
        scheme,
        token: t.token,
        list_key: t.list_key,
        mac_key: t.mac_key,
        chain_key: (scheme == Scheme::B).then(|| chain_key(keys, p).0),
    }
}

/// Digest over an empty result set.
pub fn empty_digest(mac_key: &Key) -> Vec<u8> {
    keyed_hash(mac_key, b"")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchResult {
    /// Matching document transactions, in posting order.
    pub doc_txids: Vec<Txid>,
    pub ciphertexts: Vec<Vec<u8>>,
    /// `h_w` from the index entry.
    pub digest: Vec<u8>,
    /// Index records read before the match.
    pub hops: usize,
}

impl SearchResult {
    pub fn verifies(&self, mac_key: &Key) -> bool {
        keyed_hash(mac_key, &self.ciphertexts.concat()) == self.digest
    }
}

impl Trapdoor {
    /// Finds this keyword's index entry; also returns the number of records
    /// read.
    pub fn locate(&self, ledger: &Ledger, locator: &Txid) -> Result<(IndexEntry, usize), SseError> {
        match self.scheme {
            Scheme::A => {
                let payload = ledger.read_payload(locator)?;
                let entries = decode_index_a(&payload, self.token.len())?;
                entries
                    .into_iter()
                    .find(|e| e.token == self.token.as_bytes())
                    .map(|e| (e, 1))
                    .ok_or(SseError::NoMatch)
            }
            Scheme::B => {
                let k11 = self
                    .chain_key
                    .as_ref()
                    .ok_or_else(|| SseError::Param("scheme B trapdoor without chain key".into()))?;
                let p = ledger.txid_bytes();
                let mut cur = locator.clone();
                let mut hops = 0;
                loop {
                    let (record, _) = read_blob(ledger, &cur).map_err(|e| match e {
                        SseError::NotFound(id) if hops > 0 => SseError::CorruptChain(id),
                        other => other,
                    })?;
                    hops += 1;
                    let (entry, prev) = decode_record(k11, &record, p)?;
                    if entry.token == self.token.as_bytes() {
                        return Ok((entry, hops));
                    }
                    if prev.is_zero() {
                        return Err(SseError::NoMatch);
                    }
                    cur = prev;
                }
            }
        }
    }

    /// Decrypts an entry's posting list, dropping pad entries.
    pub fn open_list(&self, entry: &IndexEntry, p: usize) -> Result<Vec<Txid>, SseError> {
        let bytes = det_decrypt(&self.list_key, &entry.list)
            .map_err(|_| SseError::Integrity("posting list failed to decrypt".into()))?;
        PostingList::parse_ids(&bytes, p)
    }
}

/// Locates the entry, fetches every listed ciphertext (reassembling chunked
/// ones) and checks the digest.
pub fn phi_search(ledger: &Ledger, trapdoor: &Trapdoor, locator: &Txid) -> Result<SearchResult, SseError> {
    let (entry, hops) = trapdoor.locate(ledger, locator)?;
    let doc_txids = trapdoor.open_list(&entry, ledger.txid_bytes())?;
    let ciphertexts = doc_txids
        .iter()
        .map(|id| read_blob(ledger, id).map(|(c, _)| c))
        .collect::<Result<Vec<_>, _>>()?;
    let result = SearchResult {
        doc_txids,
        ciphertexts,
        digest: entry.digest,
        hops,
    };
    if !result.verifies(&trapdoor.mac_key) {
        return Err(SseError::DigestMismatch);
    }
    Ok(result)
}

pub fn phi_search_a(ledger: &Ledger, trapdoor: &Trapdoor, inx: &Txid) -> Result<SearchResult, SseError> {
    if trapdoor.scheme != Scheme::A {
        return Err(SseError::Param("expected a scheme A trapdoor".into()));
    }
    phi_search(ledger, trapdoor, inx)
}

pub fn phi_search_b(ledger: &Ledger, trapdoor: &Trapdoor, head: &Txid) -> Result<SearchResult, SseError> {
    if trapdoor.scheme != Scheme::B {
        return Err(SseError::Param("expected a scheme B trapdoor".into()));
    }
    phi_search(ledger, trapdoor, head)
}

pub fn decrypt_results(keys: &KeyBundle, ciphertexts: &[Vec<u8>]) -> Result<Vec<Vec<u8>>, SseError> {
    ciphertexts
        .iter()
        .enumerate()
        .map(|(index, c)| sym_decrypt(&keys.k1, c).map_err(|_| SseError::Decrypt { index }))
        .collect()
}
