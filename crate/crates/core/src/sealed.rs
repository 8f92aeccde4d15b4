//! Authenticated encryption for designated-verifier blobs
//! (ChaCha20-Poly1305, 32-byte pre-shared key).
//!
//! The nonce is a keyed hash of the seed, associated data and plaintext, so
//! sealing is deterministic and a nonce repeats only for an identical message.

use std::fmt;

use chacha20poly1305::aead::{Aead, KeyInit, Payload};
use chacha20poly1305::{ChaCha20Poly1305, Key, Nonce};

use crate::crypto::Sha256;

pub const KEY_LEN: usize = 32;
pub const NONCE_LEN: usize = 12;

#[derive(Clone, PartialEq, Eq)]
pub struct DvKey(pub [u8; KEY_LEN]);

impl fmt::Debug for DvKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("DvKey(..)")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SealError {
    #[error("designated-verifier key must be {KEY_LEN} bytes of hex")]
    BadKey,
    #[error("sealed blob is truncated")]
    Truncated,
    #[error("authentication failed")]
    AuthFailed,
}

impl DvKey {
    /// Key used when the prover is only given a seed.
    pub fn derive_from_seed(seed: &[u8]) -> DvKey {
        let mut h = Sha256::new();
        h.update(b"zkbtc/dv-key").update(seed);
        DvKey(h.finalize())
    }

    pub fn from_hex(s: &str) -> Result<DvKey, SealError> {
        hex::decode(s.trim())
            .ok()
            .and_then(|b| b.try_into().ok())
            .map(DvKey)
            .ok_or(SealError::BadKey)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

fn lp(h: &mut Sha256, bytes: &[u8]) {
    h.update(&(bytes.len() as u64).to_le_bytes()).update(bytes);
}

/// Returns `nonce ‖ ciphertext ‖ tag`.
pub fn seal(key: &DvKey, aad: &[u8], plaintext: &[u8], seed: &[u8]) -> Vec<u8> {
    let mut h = Sha256::new();
    h.update(b"zkbtc/dv-nonce");
    lp(&mut h, &key.0);
    lp(&mut h, seed);
    lp(&mut h, aad);
    lp(&mut h, plaintext);
    let nonce_bytes: [u8; NONCE_LEN] = h.finalize()[..NONCE_LEN].try_into().unwrap();
    let cipher = ChaCha20Poly1305::new(Key::from_slice(&key.0));
    let ct = cipher
        .encrypt(Nonce::from_slice(&nonce_bytes), Payload { msg: plaintext, aad })
        .expect("in-memory encryption does not fail");
    let mut out = nonce_bytes.to_vec();
    out.extend_from_slice(&ct);
    out
}

pub fn open(key: &DvKey, aad: &[u8], blob: &[u8]) -> Result<Vec<u8>, SealError> {
    if blob.len() < NONCE_LEN + 16 {
        return Err(SealError::Truncated);
    }
    let (nonce, ct) = blob.split_at(NONCE_LEN);
    ChaCha20Poly1305::new(Key::from_slice(&key.0))
        .decrypt(Nonce::from_slice(nonce), Payload { msg: ct, aad })
        .map_err(|_| SealError::AuthFailed)
}
