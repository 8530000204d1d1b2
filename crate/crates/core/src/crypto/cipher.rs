use aes_siv::siv::Aes256Siv;
use chacha20poly1305::aead::{Aead, KeyInit};
use chacha20poly1305::{ChaCha20Poly1305, Nonce};
use rand::{CryptoRng, RngCore};

use super::{expand, CryptoError, Key};

const NONCE_LEN: usize = 12;
const TAG_LEN: usize = 16;

/// Bytes added by [`sym_encrypt`]: nonce plus Poly1305 tag.
pub const SYM_OVERHEAD: usize = NONCE_LEN + TAG_LEN;
/// Bytes added by [`det_encrypt`]: the synthetic IV.
pub const DET_OVERHEAD: usize = TAG_LEN;

fn aead(key: &Key) -> ChaCha20Poly1305 {
    let sub = expand(key, b"aead", 32);
    ChaCha20Poly1305::new_from_slice(&sub).expect("32-byte key")
}

fn siv(key: &Key) -> Aes256Siv {
    let sub = expand(key, b"siv", 64);
    Aes256Siv::new_from_slice(&sub).expect("64-byte key")
}

/// Randomized authenticated encryption. Output is `nonce ‖ ciphertext ‖ tag`.
pub fn sym_encrypt<R: RngCore + CryptoRng>(key: &Key, plaintext: &[u8], rng: &mut R) -> Vec<u8> {
    let mut nonce = [0u8; NONCE_LEN];
    rng.fill_bytes(&mut nonce);
    let body = aead(key)
        .encrypt(Nonce::from_slice(&nonce), plaintext)
        .expect("chacha20poly1305 encryption is infallible for in-memory buffers");
    let mut out = Vec::with_capacity(NONCE_LEN + body.len());
    out.extend_from_slice(&nonce);
    out.extend_from_slice(&body);
    out
}

pub fn sym_decrypt(key: &Key, ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if ciphertext.len() < SYM_OVERHEAD {
        return Err(CryptoError::Truncated(ciphertext.len()));
    }
    let (nonce, body) = ciphertext.split_at(NONCE_LEN);
    aead(key)
        .decrypt(Nonce::from_slice(nonce), body)
        .map_err(|_| CryptoError::Decryption)
}

/// Deterministic authenticated encryption (AES-SIV). Output is
/// `siv ‖ ciphertext`, always `plaintext.len() + DET_OVERHEAD` bytes.
pub fn det_encrypt(key: &Key, plaintext: &[u8]) -> Vec<u8> {
    let no_headers: [&[u8]; 0] = [];
    siv(key)
        .encrypt(no_headers, plaintext)
        .expect("AES-SIV encryption is infallible without too many headers")
}

pub fn det_decrypt(key: &Key, ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if ciphertext.len() < DET_OVERHEAD {
        return Err(CryptoError::Truncated(ciphertext.len()));
    }
    let no_headers: [&[u8]; 0] = [];
    siv(key)
        .decrypt(no_headers, ciphertext)
        .map_err(|_| CryptoError::Decryption)
}
