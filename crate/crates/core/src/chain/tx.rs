use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use super::codec::{DecodeError, Reader, Writer};
use super::script::{InputScript, OutputScript};

/// Transaction identifier: the leading `p/8` bytes of SHA-256 over the
/// transaction body. The all-zero id is reserved as the chain terminator.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Txid(Vec<u8>);

impl Txid {
    pub fn from_bytes(bytes: &[u8]) -> Self {
        Txid(bytes.to_vec())
    }

    /// The `0^p` terminator.
    pub fn zero(len: usize) -> Self {
        Txid(vec![0; len])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|b| *b == 0)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.0)
    }

    pub fn from_hex(s: &str) -> Result<Self, hex::FromHexError> {
        Ok(Txid(hex::decode(s.trim())?))
    }
}

impl fmt::Display for Txid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl fmt::Debug for Txid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let hex = self.to_hex();
        write!(f, "Txid({})", &hex[..hex.len().min(16)])
    }
}

impl Serialize for Txid {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Txid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Txid::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// A reference to one output of a previous transaction.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct OutPoint {
    pub txid: Txid,
    pub index: u32,
}

impl OutPoint {
    pub fn new(txid: Txid, index: u32) -> Self {
        OutPoint { txid, index }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TxInput {
    pub prev: OutPoint,
    pub script: InputScript,
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct TxOutput {
    pub value: u64,
    pub script: OutputScript,
    pub payload: Option<Vec<u8>>,
}

impl TxOutput {
    pub fn new(value: u64, script: OutputScript) -> Self {
        TxOutput {
            value,
            script,
            payload: None,
        }
    }

    pub fn with_payload(mut self, payload: Vec<u8>) -> Self {
        self.payload = Some(payload);
        self
    }
}

#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct Transaction {
    pub inputs: Vec<TxInput>,
    pub outputs: Vec<TxOutput>,
    pub locktime: Option<u64>,
}

const TX_VERSION: u8 = 1;
const SIGHASH_DOMAIN: &[u8] = b"ssebc-sighash/v1";

impl Transaction {
    /// Canonical body `[T_x]`: everything except the input scripts.
    pub fn body_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write_body(&mut w);
        w.finish()
    }

    fn write_body(&self, w: &mut Writer) {
        w.u8(TX_VERSION);
        w.u32(self.inputs.len() as u32);
        for input in &self.inputs {
            w.bytes(input.prev.txid.as_bytes()).u32(input.prev.index);
        }
        w.u32(self.outputs.len() as u32);
        for out in &self.outputs {
            w.u64(out.value);
            out.script.encode(w);
            match &out.payload {
                None => w.u8(0),
                Some(p) => w.u8(1).bytes(p),
            };
        }
        match self.locktime {
            None => w.u8(0),
            Some(t) => w.u8(1).u64(t),
        };
    }

    /// Full encoding: body followed by the input scripts.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write_body(&mut w);
        w.u32(self.inputs.len() as u32);
        for input in &self.inputs {
            input.script.encode(&mut w);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, DecodeError> {
        let mut r = Reader::new(bytes);
        let tx = Self::read(&mut r)?;
        r.finish()?;
        Ok(tx)
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self, DecodeError> {
        let version = r.u8()?;
        if version != TX_VERSION {
            return Err(r.bad_tag(version));
        }
        let n_in = r.count(8)?;
        let mut prevs = Vec::with_capacity(n_in);
        for _ in 0..n_in {
            let txid = Txid::from_bytes(r.bytes()?);
            let index = r.u32()?;
            prevs.push(OutPoint { txid, index });
        }
        let n_out = r.count(10)?;
        let mut outputs = Vec::with_capacity(n_out);
        for _ in 0..n_out {
            let value = r.u64()?;
            let script = OutputScript::decode(r)?;
            let payload = match r.u8()? {
                0 => None,
                1 => Some(r.bytes()?.to_vec()),
                t => return Err(r.bad_tag(t)),
            };
            outputs.push(TxOutput {
                value,
                script,
                payload,
            });
        }
        let locktime = match r.u8()? {
            0 => None,
            1 => Some(r.u64()?),
            t => return Err(r.bad_tag(t)),
        };
        if r.u32()? as usize != n_in {
            return Err(DecodeError::Invalid("input script count"));
        }
        let inputs = prevs
            .into_iter()
            .map(|prev| Ok(TxInput { prev, script: InputScript::decode(r)? }))
            .collect::<Result<_, DecodeError>>()?;
        Ok(Transaction {
            inputs,
            outputs,
            locktime,
        })
    }

    /// Identifier of length `txid_bytes` (at most 32).
    pub fn txid(&self, txid_bytes: usize) -> Txid {
        let digest = Sha256::digest(self.body_bytes());
        Txid(digest[..txid_bytes].to_vec())
    }

    /// The message every input signature commits to.
    pub fn sighash(&self) -> Vec<u8> {
        let mut msg = SIGHASH_DOMAIN.to_vec();
        msg.extend_from_slice(&self.body_bytes());
        msg
    }

    pub fn output_value(&self) -> u64 {
        self.outputs.iter().map(|o| o.value).sum()
    }

    /// Payload-bearing outputs, in output order.
    pub fn payloads(&self) -> impl Iterator<Item = &[u8]> {
        self.outputs.iter().filter_map(|o| o.payload.as_deref())
    }

    /// Concatenation of every output payload, in output order.
    pub fn payload(&self) -> Vec<u8> {
        self.payloads().flat_map(|p| p.iter().copied()).collect()
    }

    pub fn is_coinbase(&self) -> bool {
        self.inputs.is_empty()
    }
}
