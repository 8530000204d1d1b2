//! Keyed primitives used by both search schemes.
//!
//! Every primitive is built on a small set of audited constructions:
//!
//! * PRFs `F1`, `F2`, `F3` and the key expander are HMAC-SHA256 with a
//!   one-byte domain prefix, truncated to the security parameter.
//! * The randomized cipher is ChaCha20-Poly1305 with the nonce carried in
//!   front of the ciphertext.
//! * The deterministic cipher is AES-256-SIV with no associated data.
//! * Transaction signatures are Ed25519.
//!
//! All functions are pure; randomness is always an explicit parameter.

mod cipher;
mod prf;
mod sig;

pub use cipher::{det_decrypt, det_encrypt, sym_decrypt, sym_encrypt, DET_OVERHEAD, SYM_OVERHEAD};
pub use prf::{chain_key, expand, keyed_hash, prf, prf_bytes, ChainKey, KeywordTokens, PrfIndex};
pub use sig::{verify, Keypair, PublicKey, Signature};

use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("unsupported security parameter {0} (expected 128 or 256)")]
    UnsupportedSecurityParam(u32),
    #[error("key length {0} bytes is not a supported size (16 or 32)")]
    BadKeyLength(usize),
    #[error("authenticated decryption failed")]
    Decryption,
    #[error("ciphertext is too short ({0} bytes)")]
    Truncated(usize),
}

/// Security parameter `k`, in bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub enum SecurityLevel {
    K128,
    K256,
}

impl SecurityLevel {
    pub fn from_bits(bits: u32) -> Result<Self, CryptoError> {
        match bits {
            128 => Ok(SecurityLevel::K128),
            256 => Ok(SecurityLevel::K256),
            other => Err(CryptoError::UnsupportedSecurityParam(other)),
        }
    }

    pub fn bits(self) -> u32 {
        match self {
            SecurityLevel::K128 => 128,
            SecurityLevel::K256 => 256,
        }
    }

    pub fn key_bytes(self) -> usize {
        self.bits() as usize / 8
    }
}

impl TryFrom<u32> for SecurityLevel {
    type Error = CryptoError;
    fn try_from(bits: u32) -> Result<Self, Self::Error> {
        SecurityLevel::from_bits(bits)
    }
}

impl From<SecurityLevel> for u32 {
    fn from(level: SecurityLevel) -> u32 {
        level.bits()
    }
}

/// A secret key of exactly `k/8` bytes.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Key(Vec<u8>);

impl Key {
    pub fn from_slice(bytes: &[u8]) -> Result<Self, CryptoError> {
        match bytes.len() {
            16 | 32 => Ok(Key(bytes.to_vec())),
            n => Err(CryptoError::BadKeyLength(n)),
        }
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

    pub fn level(&self) -> SecurityLevel {
        if self.0.len() == 16 {
            SecurityLevel::K128
        } else {
            SecurityLevel::K256
        }
    }

    fn random<R: RngCore + CryptoRng>(level: SecurityLevel, rng: &mut R) -> Self {
        let mut bytes = vec![0u8; level.key_bytes()];
        rng.fill_bytes(&mut bytes);
        Key(bytes)
    }
}

impl std::fmt::Debug for Key {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Key({} bytes)", self.0.len())
    }
}

/// The owner's secret key array: `k1` encrypts documents, `k2` is the index
/// master key from which every search token is derived.
#[derive(Clone, PartialEq, Eq)]
pub struct KeyBundle {
    pub k1: Key,
    pub k2: Key,
}

impl KeyBundle {
    /// Samples both keys independently from `rng`.
    pub fn generate<R: RngCore + CryptoRng>(
        security_bits: u32,
        rng: &mut R,
    ) -> Result<Self, CryptoError> {
        let level = SecurityLevel::from_bits(security_bits)?;
        let k1 = Key::random(level, rng);
        let k2 = Key::random(level, rng);
        Ok(KeyBundle { k1, k2 })
    }

    /// Deterministic generation from a 32-byte seed (ChaCha20 stream, nonce 0).
    pub fn from_seed(security_bits: u32, seed: [u8; 32]) -> Result<Self, CryptoError> {
        KeyBundle::generate(security_bits, &mut ChaCha20Rng::from_seed(seed))
    }

    pub fn level(&self) -> SecurityLevel {
        self.k1.level()
    }

    /// `k1 ‖ k2`, the on-disk form of the bundle.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = self.k1.as_bytes().to_vec();
        out.extend_from_slice(self.k2.as_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        if bytes.len() != 32 && bytes.len() != 64 {
            return Err(CryptoError::BadKeyLength(bytes.len() / 2));
        }
        let (a, b) = bytes.split_at(bytes.len() / 2);
        Ok(KeyBundle {
            k1: Key::from_slice(a)?,
            k2: Key::from_slice(b)?,
        })
    }
}

impl std::fmt::Debug for KeyBundle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KeyBundle")
            .field("level", &self.level().bits())
            .finish_non_exhaustive()
    }
}
