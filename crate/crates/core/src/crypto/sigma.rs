//! Non-interactive Schnorr proof of knowledge of a discrete logarithm.
//!
//! Prover holds `sk` with `pub = sk * G`. It commits `A = k * G`, derives
//! `c = H(G, pub, A, context)` from the transcript and answers
//! `s = k + c * sk mod n`. The verifier accepts iff `s * G = A + c * pub`.
//! The nonce `k` is derived from `(seed, sk, context)`, so equal inputs give
//! equal proofs and the nonce never depends on an external RNG.

use super::field::Scalar;
use super::point::{Point, PointError, SecretKey};
use super::sha256::Sha256;
use super::transcript::Transcript;
use crate::codec::{read_varint, write_varint, CodecError, Reader};

const LABEL: &str = "zkbtc/sigma-dlog";

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SigmaProof {
    pub commitment: Point,
    pub response: Scalar,
    pub context: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SigmaError {
    #[error("public key does not match the secret key")]
    PubkeyMismatch,
    #[error("malformed sigma proof: {0}")]
    Malformed(String),
}

pub fn challenge(public: &Point, commitment: &Point, context: &[u8]) -> Result<Scalar, PointError> {
    let mut t = Transcript::new(LABEL);
    t.absorb("G", &Point::generator().to_compressed()?);
    t.absorb("pub", &public.to_compressed()?);
    t.absorb("A", &commitment.to_compressed()?);
    t.absorb("context", context);
    Ok(Scalar::from_be_bytes_reduced(&t.challenge_bytes("c")))
}

fn derive_nonce(seed: &[u8], sk: &SecretKey, context: &[u8]) -> Scalar {
    let mut counter = 0u32;
    loop {
        let mut h = Sha256::new();
        h.update(b"zkbtc/sigma-nonce")
            .update(&(seed.len() as u64).to_le_bytes())
            .update(seed)
            .update(&sk.to_be_bytes())
            .update(&(context.len() as u64).to_le_bytes())
            .update(context)
            .update(&counter.to_le_bytes());
        let k = Scalar::from_be_bytes_reduced(&h.finalize());
        if !k.is_zero() {
            return k;
        }
        counter += 1;
    }
}

pub fn sigma_prove(
    sk: &SecretKey,
    public: &Point,
    context: &[u8],
    rng_seed: &[u8],
) -> Result<SigmaProof, SigmaError> {
    if sk.public_key() != *public {
        return Err(SigmaError::PubkeyMismatch);
    }
    let k = derive_nonce(rng_seed, sk, context);
    let commitment = Point::generator().mul(&k);
    let c = challenge(public, &commitment, context).map_err(|_| SigmaError::PubkeyMismatch)?;
    Ok(SigmaProof { commitment, response: k + c * sk.scalar(), context: context.to_vec() })
}

pub fn sigma_verify(public: &Point, proof: &SigmaProof) -> bool {
    if proof.commitment.is_infinity() || !proof.commitment.is_on_curve() || !public.is_on_curve() {
        return false;
    }
    let Ok(c) = challenge(public, &proof.commitment, &proof.context) else {
        return false;
    };
    verify_transcript(public, &proof.commitment, &c, &proof.response)
}

/// Interactive-protocol check `s * G = A + c * pub` for a given challenge.
pub fn verify_transcript(public: &Point, commitment: &Point, c: &Scalar, s: &Scalar) -> bool {
    Point::generator().mul(s) == commitment.add(&public.mul(c))
}

/// Honest-verifier simulator: picks `A = s * G - c * pub` so that `(A, c, s)`
/// is accepting without knowledge of the secret.
pub fn simulate_transcript(public: &Point, c: &Scalar, s: &Scalar) -> Point {
    Point::generator().mul(s).add(&public.mul(c).negate())
}

/// Secret from two accepting transcripts with the same commitment and
/// distinct challenges.
pub fn extract_witness(c1: &Scalar, s1: &Scalar, c2: &Scalar, s2: &Scalar) -> Option<Scalar> {
    (*c1 - *c2).invert().map(|d| (*s1 - *s2) * d)
}

impl SigmaProof {
    /// `A` (33 bytes compressed) ‖ `s` (32 bytes big-endian) ‖ varint-length context.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(66 + self.context.len());
        out.extend_from_slice(
            &self.commitment.to_compressed().expect("commitment is never infinity"),
        );
        out.extend_from_slice(&self.response.to_be_bytes());
        write_varint(&mut out, self.context.len() as u64);
        out.extend_from_slice(&self.context);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SigmaError> {
        let malformed = |e: CodecError| SigmaError::Malformed(e.to_string());
        let mut r = Reader::new(bytes);
        let a = r.take(33).map_err(malformed)?;
        let commitment =
            Point::from_compressed(a).map_err(|e| SigmaError::Malformed(e.to_string()))?;
        let s = r.take_array::<32>().map_err(malformed)?;
        let response = Scalar::from_canonical(crate::uint::U256::from_be_bytes(&s))
            .ok_or_else(|| SigmaError::Malformed("response not reduced".into()))?;
        let len = read_varint(&mut r).map_err(malformed)?;
        let context = r.take(len as usize).map_err(malformed)?.to_vec();
        r.finish().map_err(malformed)?;
        Ok(SigmaProof { commitment, response, context })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::uint::U256;

    fn key(v: u64) -> SecretKey {
        SecretKey::new(Scalar::from_u64(v)).unwrap()
    }

    fn extract(p1: &SigmaProof, p2: &SigmaProof, public: &Point) -> Scalar {
        let c1 = challenge(public, &p1.commitment, &p1.context).unwrap();
        let c2 = challenge(public, &p2.commitment, &p2.context).unwrap();
        extract_witness(&c1, &p1.response, &c2, &p2.response).unwrap()
    }

    #[test]
    fn completeness_and_determinism() {
        let sk = key(0xdeadbeef);
        let pk = sk.public_key();
        let p = sigma_prove(&sk, &pk, b"ctx", b"seed").unwrap();
        assert!(sigma_verify(&pk, &p));
        assert_eq!(p.to_bytes(), sigma_prove(&sk, &pk, b"ctx", b"seed").unwrap().to_bytes());
    }

    #[test]
    fn rejects_wrong_key_and_bumped_response() {
        let sk = key(42);
        let pk = sk.public_key();
        let p = sigma_prove(&sk, &pk, b"ctx", b"seed").unwrap();
        assert!(!sigma_verify(&key(43).public_key(), &p));
        let bumped = SigmaProof { response: p.response + Scalar::ONE, ..p.clone() };
        assert!(!sigma_verify(&pk, &bumped));
        let other_ctx = SigmaProof { context: b"ctx2".to_vec(), ..p };
        assert!(!sigma_verify(&pk, &other_ctx));
    }

    #[test]
    fn prove_refuses_mismatched_pubkey() {
        assert_eq!(
            sigma_prove(&key(1), &key(2).public_key(), b"", b"").unwrap_err(),
            SigmaError::PubkeyMismatch
        );
    }

    #[test]
    fn special_soundness_extracts_secret() {
        let sk = key(987654321);
        let pk = sk.public_key();
        // Same nonce, two contexts: force A equal by proving manually.
        let k = Scalar::from_u64(5555);
        let a = Point::generator().mul(&k);
        let mk = |ctx: &[u8]| {
            let c = challenge(&pk, &a, ctx).unwrap();
            SigmaProof { commitment: a, response: k + c * sk.scalar(), context: ctx.to_vec() }
        };
        let (p1, p2) = (mk(b"one"), mk(b"two"));
        assert!(sigma_verify(&pk, &p1) && sigma_verify(&pk, &p2));
        assert_eq!(extract(&p1, &p2, &pk), sk.scalar());
    }

    #[test]
    fn simulated_transcripts_accept() {
        let pk = key(31337).public_key();
        for i in 1..20u64 {
            let (c, s) = (Scalar::from_u64(i * 7919), Scalar::from_u64(i * 104729));
            let a = simulate_transcript(&pk, &c, &s);
            assert!(verify_transcript(&pk, &a, &c, &s));
            assert!(!verify_transcript(&pk, &a, &(c + Scalar::ONE), &s));
        }
    }

    #[test]
    fn serialization_round_trip() {
        let sk = key(77);
        let pk = sk.public_key();
        let p = sigma_prove(&sk, &pk, &[9u8; 300], b"s").unwrap();
        let bytes = p.to_bytes();
        assert_eq!(bytes.len(), 33 + 32 + 3 + 300);
        assert_eq!(SigmaProof::from_bytes(&bytes).unwrap(), p);
        assert!(SigmaProof::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut unreduced = bytes.clone();
        unreduced[33..65].copy_from_slice(&U256::MAX.to_be_bytes());
        assert!(SigmaProof::from_bytes(&unreduced).is_err());
    }
}
