use hmac::{Hmac, Mac};
use sha2::Sha256;

use super::{CryptoError, Key, KeyBundle};

type HmacSha256 = Hmac<Sha256>;

/// Which of the three keyword PRFs to evaluate. The discriminant is the
/// domain-separation byte prepended to the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum PrfIndex {
    /// `F1`, search tokens.
    Token = 1,
    /// `F2`, posting-list and chain keys.
    List = 2,
    /// `F3`, digest keys.
    Mac = 3,
}

fn hmac(key: &[u8], parts: &[&[u8]]) -> [u8; 32] {
    let mut mac = HmacSha256::new_from_slice(key).expect("hmac accepts any key length");
    for part in parts {
        mac.update(part);
    }
    mac.finalize().into_bytes().into()
}

/// `F_index(key, input)`: HMAC-SHA256 over `index ‖ input`, truncated to the
/// key length.
pub fn prf(index: PrfIndex, key: &Key, input: &[u8]) -> Key {
    let out = hmac(key.as_bytes(), &[&[index as u8], input]);
    Key(out[..key.len()].to_vec())
}

/// Raw-key variant of [`prf`] that validates the key length.
pub fn prf_bytes(index: PrfIndex, key: &[u8], input: &[u8]) -> Result<Vec<u8>, CryptoError> {
    let key = Key::from_slice(key)?;
    Ok(prf(index, &key, input).0)
}

/// Keyed digest `H(key, message)`: HMAC-SHA256 over `0x00 ‖ message`,
/// truncated to the key length. Accepts messages of any length, including
/// the empty concatenation.
pub fn keyed_hash(key: &Key, message: &[u8]) -> Vec<u8> {
    hmac(key.as_bytes(), &[&[0u8], message])[..key.len()].to_vec()
}

/// Derives `len` bytes of sub-key material bound to `label`.
pub fn expand(key: &Key, label: &[u8], len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len + 32);
    let mut counter = 1u8;
    while out.len() < len {
        out.extend_from_slice(&hmac(key.as_bytes(), &[b"ssebc-expand|", label, &[counter]]));
        counter = counter.wrapping_add(1);
    }
    out.truncate(len);
    out
}

/// The per-keyword token triple `(t_w, l_w, k_w)`.
#[derive(Clone, PartialEq, Eq)]
pub struct KeywordTokens {
    pub token: Key,
    pub list_key: Key,
    pub mac_key: Key,
}

impl KeywordTokens {
    pub fn derive(keys: &KeyBundle, keyword: &str) -> Self {
        let w = keyword.as_bytes();
        KeywordTokens {
            token: prf(PrfIndex::Token, &keys.k2, w),
            list_key: prf(PrfIndex::List, &keys.k2, w),
            mac_key: prf(PrfIndex::Mac, &keys.k2, w),
        }
    }
}

impl std::fmt::Debug for KeywordTokens {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "KeywordTokens(t={})", hex::encode(self.token.as_bytes()))
    }
}

/// `K11 = F2(K2, 0^p)`, the key under which every index-chain record is
/// encrypted.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ChainKey(pub Key);

pub fn chain_key(keys: &KeyBundle, txid_bytes: usize) -> ChainKey {
    ChainKey(prf(PrfIndex::List, &keys.k2, &vec![0u8; txid_bytes]))
}
