use rand::{CryptoRng, RngCore};

use super::{Document, SseError};
use crate::chain::{follow_chain, linked_fragment, publish_plan, EmbedMode, EmbedPlan, Fragment, Ledger, LinkRule, Txid, Wallet};
use crate::crypto::{sym_encrypt, KeyBundle};

/// A ciphertext cut into pieces of at most `ι − p` bytes, so that each piece
/// plus a `p`-byte back-link fits one payload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChunkPlan {
    pub chunks: Vec<Vec<u8>>,
}

impl ChunkPlan {
    pub fn s(&self) -> usize {
        self.chunks.len()
    }
}

pub fn chunk_ciphertext(c: &[u8], iota: usize, p: usize) -> Result<ChunkPlan, SseError> {
    if iota <= p {
        return Err(SseError::Param(format!("embed limit {iota} must exceed id length {p}")));
    }
    Ok(ChunkPlan {
        chunks: c.chunks(iota - p).map(<[u8]>::to_vec).collect(),
    })
}

pub fn reassemble<C: AsRef<[u8]>>(chunks: &[C]) -> Vec<u8> {
    chunks.iter().flat_map(|c| c.as_ref().iter().copied()).collect()
}

/// Stores `data` in one transaction if it fits, otherwise as a chain of
/// back-linked chunks. Returns the id of the last transaction written and the
/// number of transactions.
pub fn store_blob(ledger: &mut Ledger, wallet: &Wallet, data: &[u8]) -> Result<(Txid, usize), SseError> {
    let iota = ledger.config().embed_limit;
    let p = ledger.txid_bytes();
    if data.len() <= iota {
        return Ok((wallet.embed(ledger, vec![data.to_vec()])?, 1));
    }
    let plan = chunk_ciphertext(data, iota, p)?;
    let fragments = plan
        .chunks
        .into_iter()
        .enumerate()
        .map(|(i, data)| Fragment {
            data,
            link: if i == 0 { LinkRule::Fixed(Txid::zero(p)) } else { LinkRule::Previous },
        })
        .collect();
    let plan = EmbedPlan {
        mode: EmbedMode::Single,
        fragments,
    };
    let ids = publish_plan(ledger, wallet, &plan)?;
    let n = ids.len();
    Ok((ids.into_iter().next_back().expect("at least two chunks"), n))
}

/// Inverse of [`store_blob`]: a single payload is returned verbatim, a chunk
/// chain is walked back to its terminator and reassembled. Also returns the
/// number of transactions read.
pub fn read_blob(ledger: &Ledger, head: &Txid) -> Result<(Vec<u8>, usize), SseError> {
    let tx = ledger.transaction(head).ok_or_else(|| SseError::NotFound(head.clone()))?;
    if linked_fragment(tx, ledger.txid_bytes()).is_none() {
        return Ok((tx.payload(), 1));
    }
    let mut chunks = follow_chain(ledger, head)?;
    chunks.reverse();
    let n = chunks.len();
    Ok((reassemble(&chunks), n))
}

/// Encrypts `doc` under `K1` and stores it; returns the final transaction id
/// and the ciphertext.
pub fn store_document_b<R: RngCore + CryptoRng>(
    ledger: &mut Ledger,
    wallet: &Wallet,
    keys: &KeyBundle,
    doc: &Document,
    rng: &mut R,
) -> Result<(Txid, Vec<u8>), SseError> {
    let c = sym_encrypt(&keys.k1, &doc.plaintext, rng);
    let (id, _) = store_blob(ledger, wallet, &c)?;
    Ok((id, c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn chunk_sizes_follow_ceiling_formula() {
        let plan = chunk_ciphertext(&[0; 100], 64, 32).unwrap();
        let sizes: Vec<_> = plan.chunks.iter().map(Vec::len).collect();
        assert_eq!(sizes, [32, 32, 32, 4]);
        assert_eq!(chunk_ciphertext(&[0; 10], 80, 32).unwrap().s(), 1);
        assert!(chunk_ciphertext(&[0; 10], 32, 32).is_err());
    }

    proptest! {
        #[test]
        fn chunk_then_reassemble_is_identity(c in proptest::collection::vec(any::<u8>(), 0..5000), p in 1usize..64, extra in 1usize..200) {
            let iota = p + extra;
            let plan = chunk_ciphertext(&c, iota, p).unwrap();
            prop_assert_eq!(plan.s(), c.len().div_ceil(iota - p));
            prop_assert!(plan.chunks.iter().all(|x| x.len() + p <= iota));
            prop_assert_eq!(reassemble(&plan.chunks), c);
        }
    }
}
