//! Payload embedding plans.
//!
//! A linked fragment is stored as a transaction with exactly two payload
//! outputs: the fragment data followed by the `p`-byte identifier of the
//! previous fragment's transaction (all zeros for the first fragment). Its
//! embedded payload is therefore `data ‖ link`, and `|data| + p ≤ ι`.

use super::tx::{Transaction, Txid};
use super::{ChainError, Ledger, Wallet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EmbedMode {
    Single,
    Split3,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LinkRule {
    /// Unlinked fragment: the data is the whole payload.
    None,
    /// Link to a fixed transaction; the zero id terminates the chain.
    Fixed(Txid),
    /// Link to the transaction carrying the preceding fragment of the plan.
    Previous,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fragment {
    pub data: Vec<u8>,
    pub link: LinkRule,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EmbedPlan {
    pub mode: EmbedMode,
    pub fragments: Vec<Fragment>,
}

/// What to embed.
#[derive(Clone, Debug)]
pub enum EmbedRequest<'a> {
    Single(&'a [u8]),
    /// An index triple split over three transactions: the first carries
    /// `h ‖ prev`, the second `e ‖ txid(first)`, the third `t ‖ txid(second)`.
    Split3 {
        t: &'a [u8],
        e: &'a [u8],
        h: &'a [u8],
        prev: Option<Txid>,
    },
}

pub fn embed_payload(request: EmbedRequest<'_>, limit: usize, txid_bytes: usize) -> Result<EmbedPlan, ChainError> {
    let plan = match request {
        EmbedRequest::Single(data) => EmbedPlan {
            mode: EmbedMode::Single,
            fragments: vec![Fragment {
                data: data.to_vec(),
                link: LinkRule::None,
            }],
        },
        EmbedRequest::Split3 { t, e, h, prev } => {
            let prev = prev.unwrap_or_else(|| Txid::zero(txid_bytes));
            EmbedPlan {
                mode: EmbedMode::Split3,
                fragments: vec![
                    Fragment {
                        data: h.to_vec(),
                        link: LinkRule::Fixed(prev),
                    },
                    Fragment {
                        data: e.to_vec(),
                        link: LinkRule::Previous,
                    },
                    Fragment {
                        data: t.to_vec(),
                        link: LinkRule::Previous,
                    },
                ],
            }
        }
    };
    for f in &plan.fragments {
        let len = f.data.len() + if f.link == LinkRule::None { 0 } else { txid_bytes };
        if len > limit {
            return Err(ChainError::PayloadTooLarge { len, limit });
        }
    }
    Ok(plan)
}

/// Publishes each fragment in order, resolving links as it goes. Returns the
/// transaction ids in fragment order.
pub fn publish_plan(ledger: &mut Ledger, wallet: &Wallet, plan: &EmbedPlan) -> Result<Vec<Txid>, ChainError> {
    let mut ids: Vec<Txid> = Vec::with_capacity(plan.fragments.len());
    for f in &plan.fragments {
        let payloads = match &f.link {
            LinkRule::None => vec![f.data.clone()],
            LinkRule::Fixed(id) => vec![f.data.clone(), id.as_bytes().to_vec()],
            LinkRule::Previous => {
                let prev = ids
                    .last()
                    .cloned()
                    .unwrap_or_else(|| Txid::zero(ledger.txid_bytes()));
                vec![f.data.clone(), prev.as_bytes().to_vec()]
            }
        };
        ids.push(wallet.embed(ledger, payloads)?);
    }
    Ok(ids)
}

/// Splits a linked-fragment transaction into `(data, link)`.
pub fn linked_fragment(tx: &Transaction, txid_bytes: usize) -> Option<(&[u8], Txid)> {
    let mut payloads = tx.payloads();
    let data = payloads.next()?;
    let link = payloads.next()?;
    if payloads.next().is_some() || link.len() != txid_bytes {
        return None;
    }
    Some((data, Txid::from_bytes(link)))
}

/// Walks linked fragments from `head` back to the terminator, returning the
/// fragment data in walk order (newest first).
pub fn follow_chain(ledger: &Ledger, head: &Txid) -> Result<Vec<Vec<u8>>, ChainError> {
    let p = ledger.txid_bytes();
    let mut out = vec![];
    let mut cur = head.clone();
    loop {
        let tx = ledger.transaction(&cur).ok_or_else(|| {
            if out.is_empty() {
                ChainError::NotFound(cur.clone())
            } else {
                ChainError::CorruptChain(cur.clone())
            }
        })?;
        let (data, link) = linked_fragment(tx, p).ok_or_else(|| ChainError::CorruptChain(cur.clone()))?;
        out.push(data.to_vec());
        if link.is_zero() {
            return Ok(out);
        }
        // Identifiers commit to their body, so a link cannot form a cycle.
        cur = link;
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split3Record {
    pub t: Vec<u8>,
    pub e: Vec<u8>,
    pub h: Vec<u8>,
    /// Link carried by the first fragment: the previous keyword's last
    /// transaction, or the zero id.
    pub prev: Txid,
}

/// Reassembles a split3 triple from the id of its third transaction.
pub fn read_split3(ledger: &Ledger, head: &Txid) -> Result<Split3Record, ChainError> {
    let p = ledger.txid_bytes();
    let read = |id: &Txid, first: bool| -> Result<(Vec<u8>, Txid), ChainError> {
        let tx = ledger.transaction(id).ok_or_else(|| {
            if first {
                ChainError::NotFound(id.clone())
            } else {
                ChainError::CorruptChain(id.clone())
            }
        })?;
        let (data, link) = linked_fragment(tx, p).ok_or_else(|| ChainError::CorruptChain(id.clone()))?;
        Ok((data.to_vec(), link))
    };
    let (t, second) = read(head, true)?;
    if second.is_zero() {
        return Err(ChainError::CorruptChain(head.clone()));
    }
    let (e, first) = read(&second, false)?;
    if first.is_zero() {
        return Err(ChainError::CorruptChain(second));
    }
    let (h, prev) = read(&first, false)?;
    Ok(Split3Record { t, e, h, prev })
}
