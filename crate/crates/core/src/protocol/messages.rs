//! Wire formats for the ask payload, the gate argument and the return
//! payload.

use crate::chain::codec::{DecodeError, Reader, Writer};
use crate::chain::Txid;
use crate::crypto::Key;
use crate::sse::{Scheme, Trapdoor};

const VERSION: u8 = 1;

/// What `U′` embeds in the ask: the trapdoor, where the index lives, and the
/// deadline after which the Fuse becomes valid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AskPayload {
    pub trapdoor: Trapdoor,
    pub locator: Txid,
    pub deadline: u64,
}

impl AskPayload {
    pub fn to_bytes(&self) -> Vec<u8> {
        let td = &self.trapdoor;
        let mut w = Writer::new();
        w.u8(VERSION)
            .u8(td.scheme.tag())
            .bytes(td.token.as_bytes())
            .bytes(td.list_key.as_bytes())
            .bytes(td.mac_key.as_bytes())
            .bytes(td.chain_key.as_ref().map_or(&[][..], Key::as_bytes))
            .bytes(self.locator.as_bytes())
            .u64(self.deadline);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        if r.u8()? != VERSION {
            return Err(DecodeError::Invalid("ask version"));
        }
        let scheme = Scheme::from_tag(r.u8()?).ok_or(DecodeError::Invalid("scheme"))?;
        let key = |b: &[u8]| Key::from_slice(b).map_err(|_| DecodeError::Invalid("key length"));
        let token = key(r.bytes()?)?;
        let list_key = key(r.bytes()?)?;
        let mac_key = key(r.bytes()?)?;
        let k11 = r.bytes()?;
        let chain_key = match (scheme, k11.is_empty()) {
            (Scheme::A, true) => None,
            (Scheme::B, false) => Some(key(k11)?),
            _ => return Err(DecodeError::Invalid("chain key")),
        };
        let locator = Txid::from_bytes(r.bytes()?);
        let deadline = r.u64()?;
        r.finish()?;
        Ok(AskPayload {
            trapdoor: Trapdoor {
                scheme,
                token,
                list_key,
                mac_key,
                chain_key,
            },
            locator,
            deadline,
        })
    }
}

/// Argument of the gated ask output: `scheme ‖ locator ‖ t_w`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GateArgument {
    pub scheme: Scheme,
    pub locator: Txid,
    pub token: Vec<u8>,
}

impl GateArgument {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u8(self.scheme.tag()).bytes(self.locator.as_bytes()).bytes(&self.token);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let scheme = Scheme::from_tag(r.u8()?).ok_or(DecodeError::Invalid("scheme"))?;
        let locator = Txid::from_bytes(r.bytes()?);
        let token = r.bytes()?.to_vec();
        r.finish()?;
        Ok(GateArgument { scheme, locator, token })
    }
}

/// `({C_j}, h_w)` as embedded by the searcher.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReturnPayload {
    pub ciphertexts: Vec<Vec<u8>>,
    pub digest: Vec<u8>,
}

impl ReturnPayload {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u8(VERSION).u32(self.ciphertexts.len() as u32);
        for c in &self.ciphertexts {
            w.bytes(c);
        }
        w.bytes(&self.digest);
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        if r.u8()? != VERSION {
            return Err(DecodeError::Invalid("return version"));
        }
        let n = r.count(4)?;
        let ciphertexts = (0..n).map(|_| r.bytes().map(<[u8]>::to_vec)).collect::<Result<_, _>>()?;
        let digest = r.bytes()?.to_vec();
        r.finish()?;
        Ok(ReturnPayload { ciphertexts, digest })
    }
}

/// Cuts a payload into per-output fragments of at most `limit` bytes. An
/// empty payload still yields one (empty) fragment.
pub fn fragments(payload: &[u8], limit: usize) -> Vec<Vec<u8>> {
    if payload.is_empty() {
        return vec![vec![]];
    }
    payload.chunks(limit.max(1)).map(<[u8]>::to_vec).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::KeyBundle;
    use crate::sse::derive_trapdoor;

    #[test]
    fn payloads_round_trip() {
        let keys = KeyBundle::from_seed(128, [1; 32]).unwrap();
        for scheme in [Scheme::A, Scheme::B] {
            let ask = AskPayload {
                trapdoor: derive_trapdoor(&keys, "w", scheme, 32),
                locator: Txid::from_bytes(&[5; 32]),
                deadline: 40,
            };
            assert_eq!(AskPayload::from_bytes(&ask.to_bytes()).unwrap(), ask);
        }
        let ret = ReturnPayload {
            ciphertexts: vec![vec![1, 2], vec![], vec![3]],
            digest: vec![9; 16],
        };
        assert_eq!(ReturnPayload::from_bytes(&ret.to_bytes()).unwrap(), ret);
        let arg = GateArgument {
            scheme: Scheme::B,
            locator: Txid::from_bytes(&[1; 16]),
            token: vec![2; 16],
        };
        assert_eq!(GateArgument::from_bytes(&arg.to_bytes()).unwrap(), arg);
    }

    #[test]
    fn fragments_reassemble() {
        let data: Vec<u8> = (0..=200).collect();
        let f = fragments(&data, 80);
        assert_eq!(f.iter().map(Vec::len).collect::<Vec<_>>(), [80, 80, 41]);
        assert_eq!(f.concat(), data);
        assert_eq!(fragments(&[], 80), [Vec::<u8>::new()]);
    }
}
