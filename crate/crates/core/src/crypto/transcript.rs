//! Fiat–Shamir transcript: a SHA-256 sponge with length-prefixed absorbs.

use super::sha256::Sha256;

#[derive(Clone, Debug)]
pub struct Transcript {
    state: [u8; 32],
}

impl Transcript {
    /// Starts a transcript under an ASCII domain-separation label.
    pub fn new(label: &str) -> Self {
        let mut h = Sha256::new();
        h.update(b"zkbtc-transcript-v1");
        absorb_lp(&mut h, label.as_bytes());
        Transcript { state: h.finalize() }
    }

    pub fn absorb(&mut self, label: &str, msg: &[u8]) {
        let mut h = Sha256::new();
        h.update(&self.state).update(&[0x00]);
        absorb_lp(&mut h, label.as_bytes());
        absorb_lp(&mut h, msg);
        self.state = h.finalize();
    }

    pub fn absorb_u64(&mut self, label: &str, v: u64) {
        self.absorb(label, &v.to_le_bytes());
    }

    /// Squeezes 32 challenge bytes and ratchets the state.
    pub fn challenge_bytes(&mut self, label: &str) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(&self.state).update(&[0x01]);
        absorb_lp(&mut h, label.as_bytes());
        let out = h.finalize();
        let mut r = Sha256::new();
        r.update(&self.state).update(&[0x02]).update(&out);
        self.state = r.finalize();
        out
    }

    pub fn challenge_u64(&mut self, label: &str) -> u64 {
        let b = self.challenge_bytes(label);
        u64::from_le_bytes(b[..8].try_into().unwrap())
    }
}

fn absorb_lp(h: &mut Sha256, bytes: &[u8]) {
    h.update(&(bytes.len() as u64).to_le_bytes()).update(bytes);
}
