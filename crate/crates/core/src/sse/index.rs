use std::collections::{BTreeMap, BTreeSet};

use rand::{CryptoRng, RngCore};
use serde::{Deserialize, Serialize};

use super::chunk::store_blob;
use super::{Corpus, Scheme, SseError};
use crate::chain::codec::{Reader, Writer};
use crate::chain::{Ledger, Txid, Wallet};
use crate::crypto::{chain_key, det_decrypt, det_encrypt, keyed_hash, sym_encrypt, Key, KeyBundle, KeywordTokens, DET_OVERHEAD, SYM_OVERHEAD};

/// Matching document ids for one keyword, padded with all-zero ids to the
/// common length `Δ`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PostingList {
    pub keyword: String,
    pub entries: Vec<Txid>,
    /// Number of leading non-pad entries.
    pub matches: usize,
}

impl PostingList {
    pub fn delta(&self) -> usize {
        self.entries.len()
    }

    pub fn unpadded(&self) -> &[Txid] {
        &self.entries[..self.matches]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.entries.iter().flat_map(|t| t.as_bytes().iter().copied()).collect()
    }

    /// Parses a serialized list and drops pad entries.
    pub fn parse_ids(bytes: &[u8], p: usize) -> Result<Vec<Txid>, SseError> {
        if !bytes.len().is_multiple_of(p) {
            return Err(SseError::Integrity("posting list length".into()));
        }
        Ok(bytes
            .chunks(p)
            .map(Txid::from_bytes)
            .filter(|t| !t.is_zero())
            .collect())
    }
}

/// One posting list per dictionary keyword, entries in ascending doc id order,
/// all padded to the longest list.
pub fn build_posting_lists(
    corpus: &Corpus,
    doc_txids: &BTreeMap<u64, Txid>,
    p: usize,
) -> Result<BTreeMap<String, PostingList>, SseError> {
    corpus.validate()?;
    let mut docs: Vec<_> = corpus.documents.iter().collect();
    docs.sort_by_key(|d| d.doc_id);
    let mut lists: BTreeMap<String, PostingList> = corpus
        .dictionary
        .iter()
        .map(|w| {
            let list = PostingList {
                keyword: w.clone(),
                entries: vec![],
                matches: 0,
            };
            (w.clone(), list)
        })
        .collect();
    for d in docs {
        let id = doc_txids
            .get(&d.doc_id)
            .ok_or_else(|| SseError::Param(format!("no transaction for doc {}", d.doc_id)))?;
        for w in &d.keywords {
            let list = lists.get_mut(w).expect("validated keyword");
            list.entries.push(id.clone());
            list.matches += 1;
        }
    }
    let delta = lists.values().map(|l| l.matches).max().unwrap_or(0);
    for list in lists.values_mut() {
        list.entries.resize(delta, Txid::zero(p));
    }
    Ok(lists)
}

/// `(t_w, e_w, h_w)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    #[serde(with = "hex")]
    pub token: Vec<u8>,
    #[serde(with = "hex")]
    pub list: Vec<u8>,
    #[serde(with = "hex")]
    pub digest: Vec<u8>,
}

impl IndexEntry {
    pub fn to_bytes(&self) -> Vec<u8> {
        [&self.token[..], &self.list, &self.digest].concat()
    }

    /// Splits `t ‖ e ‖ h` given the key length `k` (bytes).
    pub fn from_bytes(bytes: &[u8], k: usize) -> Result<Self, SseError> {
        if bytes.len() < 2 * k + DET_OVERHEAD {
            return Err(SseError::Integrity("index entry too short".into()));
        }
        let (token, rest) = bytes.split_at(k);
        let (list, digest) = rest.split_at(rest.len() - k);
        Ok(IndexEntry {
            token: token.to_vec(),
            list: list.to_vec(),
            digest: digest.to_vec(),
        })
    }
}

/// Operation counts for one index build.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexStats {
    pub prf_calls: u64,
    pub posting_entries: u64,
    pub mac_inputs: u64,
    pub transactions: u64,
}

impl IndexStats {
    pub fn op_count(&self) -> u64 {
        self.prf_calls + self.posting_entries + self.mac_inputs + self.transactions
    }
}

/// Entries for every posting list, in dictionary order.
pub fn index_entries(
    keys: &KeyBundle,
    posting_lists: &BTreeMap<String, PostingList>,
    ciphertexts: &BTreeMap<Txid, Vec<u8>>,
    stats: &mut IndexStats,
) -> Result<Vec<IndexEntry>, SseError> {
    posting_lists
        .values()
        .map(|list| {
            let tokens = KeywordTokens::derive(keys, &list.keyword);
            stats.prf_calls += 3;
            let mut concat = Vec::new();
            for id in list.unpadded() {
                let c = ciphertexts
                    .get(id)
                    .ok_or_else(|| SseError::Integrity(format!("missing ciphertext for {id}")))?;
                concat.extend_from_slice(c);
                stats.posting_entries += 1;
                stats.mac_inputs += 1;
            }
            Ok(IndexEntry {
                token: tokens.token.as_bytes().to_vec(),
                list: det_encrypt(&tokens.list_key, &list.to_bytes()),
                digest: keyed_hash(&tokens.mac_key, &concat),
            })
        })
        .collect()
}

/// The array `ℐ` for scheme A.
pub fn build_index_a(
    keys: &KeyBundle,
    posting_lists: &BTreeMap<String, PostingList>,
    ciphertexts: &BTreeMap<Txid, Vec<u8>>,
) -> Result<Vec<IndexEntry>, SseError> {
    index_entries(keys, posting_lists, ciphertexts, &mut IndexStats::default())
}

/// Serialized size of `ℐ` with `m` keywords.
pub fn index_size_a(m: usize, delta: usize, k: usize, p: usize) -> usize {
    8 + m * (2 * k + DET_OVERHEAD + delta * p)
}

pub fn encode_index_a(entries: &[IndexEntry]) -> Vec<u8> {
    let len = entries.first().map_or(0, |e| e.to_bytes().len());
    let mut w = Writer::new();
    w.u32(entries.len() as u32).u32(len as u32);
    for e in entries {
        let b = e.to_bytes();
        assert_eq!(b.len(), len, "index entries must be equal length");
        w.raw(&b);
    }
    w.finish()
}

pub fn decode_index_a(bytes: &[u8], k: usize) -> Result<Vec<IndexEntry>, SseError> {
    let bad = |_| SseError::Integrity("malformed index".into());
    let mut r = Reader::new(bytes);
    let n = r.u32().map_err(bad)? as usize;
    let len = r.u32().map_err(bad)? as usize;
    if len.checked_mul(n) != Some(r.remaining()) {
        return Err(SseError::Integrity("malformed index".into()));
    }
    (0..n)
        .map(|_| IndexEntry::from_bytes(r.raw(len).map_err(bad)?, k))
        .collect()
}

/// `r = det_enc(K11, t ‖ e ‖ h ‖ prev)`.
pub fn encrypt_record(k11: &Key, entry: &IndexEntry, prev: &Txid) -> Vec<u8> {
    let mut pt = entry.to_bytes();
    pt.extend_from_slice(prev.as_bytes());
    det_encrypt(k11, &pt)
}

pub fn decode_record(k11: &Key, record: &[u8], p: usize) -> Result<(IndexEntry, Txid), SseError> {
    let pt = det_decrypt(k11, record).map_err(|_| SseError::Integrity("index record failed to decrypt".into()))?;
    if pt.len() < p {
        return Err(SseError::Integrity("index record too short".into()));
    }
    let (body, prev) = pt.split_at(pt.len() - p);
    Ok((IndexEntry::from_bytes(body, k11.len())?, Txid::from_bytes(prev)))
}

/// Publishes one record per entry, each linking to the previous record's
/// transaction. Returns the head (last record) and the number of
/// transactions written.
pub fn build_index_b(
    ledger: &mut Ledger,
    wallet: &Wallet,
    keys: &KeyBundle,
    entries: &[IndexEntry],
) -> Result<(Txid, usize), SseError> {
    if entries.is_empty() {
        return Err(SseError::Param("scheme B needs at least one keyword".into()));
    }
    let p = ledger.txid_bytes();
    let k11 = chain_key(keys, p).0;
    let mut prev = Txid::zero(p);
    let mut txs = 0;
    for e in entries {
        let (id, n) = store_blob(ledger, wallet, &encrypt_record(&k11, e, &prev))?;
        prev = id;
        txs += n;
    }
    Ok((prev, txs))
}

/// What the owner announces after indexing: the scheme and the index
/// transaction (scheme A) or chain head (scheme B).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Broadcast {
    pub scheme: Scheme,
    pub locator: Txid,
}

impl std::fmt::Display for Broadcast {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{} {}", self.scheme, self.locator)
    }
}

impl std::str::FromStr for Broadcast {
    type Err = SseError;

    fn from_str(s: &str) -> Result<Self, SseError> {
        let bad = || SseError::Param(format!("malformed broadcast {s:?}"));
        let (scheme, id) = s.trim().split_once(' ').ok_or_else(bad)?;
        Ok(Broadcast {
            scheme: scheme.parse()?,
            locator: Txid::from_hex(id.trim()).map_err(|_| bad())?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PublishedIndex {
    pub broadcast: Broadcast,
    pub doc_txids: BTreeMap<u64, Txid>,
    pub posting_lists: BTreeMap<String, PostingList>,
    pub entries: Vec<IndexEntry>,
    pub stats: IndexStats,
}

impl PublishedIndex {
    pub fn delta(&self) -> usize {
        self.posting_lists.values().next().map_or(0, PostingList::delta)
    }

    pub fn keywords(&self) -> BTreeSet<&str> {
        self.posting_lists.keys().map(String::as_str).collect()
    }
}

/// Encrypts and stores every document, then builds and publishes the index.
///
/// Scheme A stores each ciphertext in one transaction and the whole index in
/// one more; the sizes are checked against the embed limit before anything is
/// published. Scheme B chunks oversized ciphertexts and records.
pub fn publish_corpus<R: RngCore + CryptoRng>(
    ledger: &mut Ledger,
    wallet: &Wallet,
    keys: &KeyBundle,
    corpus: &Corpus,
    scheme: Scheme,
    rng: &mut R,
) -> Result<PublishedIndex, SseError> {
    corpus.validate()?;
    let p = ledger.txid_bytes();
    let iota = ledger.config().embed_limit;
    if scheme == Scheme::A {
        let k = keys.level().key_bytes();
        let mut delta = BTreeMap::<&str, usize>::new();
        for d in &corpus.documents {
            let len = d.plaintext.len() + SYM_OVERHEAD;
            if len > iota {
                return Err(SseError::Chain(crate::chain::ChainError::PayloadTooLarge { len, limit: iota }));
            }
            for w in &d.keywords {
                *delta.entry(w).or_default() += 1;
            }
        }
        let delta = delta.values().copied().max().unwrap_or(0);
        let len = index_size_a(corpus.dictionary.len(), delta, k, p);
        if len > iota {
            return Err(SseError::IndexTooLarge { len, limit: iota });
        }
    } else if corpus.dictionary.is_empty() {
        return Err(SseError::Param("scheme B needs at least one keyword".into()));
    }

    let mut docs: Vec<_> = corpus.documents.iter().collect();
    docs.sort_by_key(|d| d.doc_id);
    let mut doc_txids = BTreeMap::new();
    let mut ciphertexts = BTreeMap::new();
    for d in docs {
        let c = sym_encrypt(&keys.k1, &d.plaintext, rng);
        let (id, _) = store_blob(ledger, wallet, &c)?;
        doc_txids.insert(d.doc_id, id.clone());
        ciphertexts.insert(id, c);
    }

    let posting_lists = build_posting_lists(corpus, &doc_txids, p)?;
    let mut stats = IndexStats::default();
    let entries = index_entries(keys, &posting_lists, &ciphertexts, &mut stats)?;
    let locator = match scheme {
        Scheme::A => {
            stats.transactions = 1;
            wallet.embed(ledger, vec![encode_index_a(&entries)])?
        }
        Scheme::B => {
            stats.prf_calls += 1;
            let (head, txs) = build_index_b(ledger, wallet, keys, &entries)?;
            stats.transactions = txs as u64;
            head
        }
    };
    Ok(PublishedIndex {
        broadcast: Broadcast { scheme, locator },
        doc_txids,
        posting_lists,
        entries,
        stats,
    })
}
