use serde::{Deserialize, Serialize};

use super::{CodecError, Hash256, Reader};

pub const HEADER_LEN: usize = 80;

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize, Deserialize)]
pub struct BlockHeader {
    pub version: i32,
    pub prev_hash: Hash256,
    pub merkle_root: Hash256,
    pub timestamp: u32,
    pub nbits: u32,
    pub nonce: u32,
}

impl BlockHeader {
    pub fn encode(&self) -> [u8; HEADER_LEN] {
        encode_header(self)
    }

    pub fn block_hash(&self) -> Hash256 {
        Hash256::hash(&self.encode())
    }
}

pub fn encode_header(h: &BlockHeader) -> [u8; HEADER_LEN] {
    let mut out = [0u8; HEADER_LEN];
    out[0..4].copy_from_slice(&h.version.to_le_bytes());
    out[4..36].copy_from_slice(&h.prev_hash.0);
    out[36..68].copy_from_slice(&h.merkle_root.0);
    out[68..72].copy_from_slice(&h.timestamp.to_le_bytes());
    out[72..76].copy_from_slice(&h.nbits.to_le_bytes());
    out[76..80].copy_from_slice(&h.nonce.to_le_bytes());
    out
}

pub fn decode_header(bytes: &[u8]) -> Result<BlockHeader, CodecError> {
    if bytes.len() != HEADER_LEN {
        return Err(CodecError::WrongLength { expected: HEADER_LEN, got: bytes.len() });
    }
    let mut r = Reader::new(bytes);
    Ok(BlockHeader {
        version: r.i32_le()?,
        prev_hash: r.hash()?,
        merkle_root: r.hash()?,
        timestamp: r.u32_le()?,
        nbits: r.u32_le()?,
        nonce: r.u32_le()?,
    })
}

/// Splits a headers file (concatenated 80-byte headers, no framing).
pub fn read_headers(bytes: &[u8]) -> Result<Vec<BlockHeader>, CodecError> {
    if bytes.len() % HEADER_LEN != 0 {
        return Err(CodecError::WrongLength {
            expected: (bytes.len() / HEADER_LEN + 1) * HEADER_LEN,
            got: bytes.len(),
        });
    }
    bytes.chunks_exact(HEADER_LEN).map(decode_header).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) const GENESIS_HEX: &str = "0100000000000000000000000000000000000000000000000000000000000000000000003ba3edfd7a7b12b27ac72c3e67768f617fc81bc3888a51323a9fb8aa4b1e5e4a29ab5f49ffff001d1dac2b7c";

    #[test]
    fn genesis_header_hash() {
        let bytes = hex::decode(GENESIS_HEX).unwrap();
        let h = decode_header(&bytes).unwrap();
        assert_eq!(h.version, 1);
        assert_eq!(h.timestamp, 1231006505);
        assert_eq!(h.nbits, 0x1d00ffff);
        assert_eq!(h.nonce, 2083236893);
        assert_eq!(
            h.block_hash().to_display_hex(),
            "000000000019d6689c085ae165831e934ff763ae46a2a6c172b3f1b60a8ce26f"
        );
        assert_eq!(encode_header(&h).to_vec(), bytes);
    }

    #[test]
    fn wrong_length_rejected() {
        assert_eq!(
            decode_header(&[0u8; 79]),
            Err(CodecError::WrongLength { expected: 80, got: 79 })
        );
        assert!(read_headers(&[0u8; 81]).is_err());
        assert_eq!(read_headers(&[]).unwrap(), vec![]);
    }

    #[test]
    fn zero_header_encodes_to_zero_bytes_except_version() {
        let h = BlockHeader {
            version: 2,
            prev_hash: Hash256::ZERO,
            merkle_root: Hash256::ZERO,
            timestamp: 0,
            nbits: 0,
            nonce: 0,
        };
        let b = encode_header(&h);
        assert_eq!(&b[..4], &[2, 0, 0, 0]);
        assert!(b[4..].iter().all(|&x| x == 0));
    }

    proptest! {
        #[test]
        fn bytes_round_trip(bytes in proptest::collection::vec(any::<u8>(), 80)) {
            let h = decode_header(&bytes).unwrap();
            prop_assert_eq!(encode_header(&h).to_vec(), bytes);
        }
    }
}
