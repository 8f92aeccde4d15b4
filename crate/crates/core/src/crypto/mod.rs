//! Hashes, secp256k1 arithmetic and the Schnorr key-knowledge proof.

pub mod field;
pub mod point;
pub mod ripemd160;
pub mod sha256;
pub mod sigma;
pub mod transcript;

pub use field::{FieldElement, Scalar};
pub use point::{pubkey_hash, Point, PointError, PubKeyHash, SecretKey};
pub use ripemd160::ripemd160;
pub use sha256::{sha256, sha256d, Sha256};
pub use sigma::{
    extract_witness, sigma_prove, sigma_verify, simulate_transcript, verify_transcript, SigmaError, SigmaProof,
};
pub use transcript::Transcript;

/// `ripemd160(sha256(x))`.
pub fn hash160(msg: &[u8]) -> [u8; 20] {
    ripemd160(&sha256(msg))
}
