//! Bitcoin consensus encodings: headers, transactions, Merkle trees and
//! compact difficulty targets.
//!
//! Hashes are stored in wire byte order. Only the hex form shown to users
//! is byte-reversed.

mod compact;
mod header;
mod merkle;
mod tx;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use compact::{nbits_to_target, target_to_nbits, CompactError};
pub use header::{decode_header, encode_header, read_headers, BlockHeader, HEADER_LEN};
pub use merkle::{
    build_merkle_branch, merkle_root, verify_merkle_branch, verify_merkle_branch_strict,
    MerkleBranch, MerkleError,
};
pub use tx::{
    decode_block_body, decode_tx, encode_block_body, txid, wtxid, OutPoint, Transaction, TxIn,
    TxOut, MAX_MONEY,
};

use crate::crypto::sha256d;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("expected {expected} bytes, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("input truncated")]
    Truncated,
    #[error("{0} trailing bytes after the encoded value")]
    TrailingBytes(usize),
    #[error("segwit marker must be followed by flag 0x01")]
    BadSegwitMarker,
    #[error("non-canonical compact-size integer")]
    VarIntNonCanonical,
    #[error("transaction has no inputs")]
    NoInputs,
    #[error("transaction has no outputs")]
    NoOutputs,
    #[error("output value {0} exceeds the money supply")]
    ValueOutOfRange(u64),
    #[error("invalid hex: {0}")]
    InvalidHex(String),
}

/// 32-byte hash in wire byte order.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Hash256(pub [u8; 32]);

impl Hash256 {
    pub const ZERO: Hash256 = Hash256([0; 32]);

    pub fn hash(data: &[u8]) -> Hash256 {
        Hash256(sha256d(data))
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// Byte-reversed lowercase hex.
    pub fn to_display_hex(&self) -> String {
        let mut b = self.0;
        b.reverse();
        hex::encode(b)
    }

    pub fn from_display_hex(s: &str) -> Result<Hash256, CodecError> {
        let bytes = hex::decode(s).map_err(|e| CodecError::InvalidHex(e.to_string()))?;
        let mut arr: [u8; 32] = bytes
            .try_into()
            .map_err(|b: Vec<u8>| CodecError::WrongLength { expected: 32, got: b.len() })?;
        arr.reverse();
        Ok(Hash256(arr))
    }
}

impl fmt::Display for Hash256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_display_hex())
    }
}

impl fmt::Debug for Hash256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Hash256({})", self.to_display_hex())
    }
}

impl FromStr for Hash256 {
    type Err = CodecError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Hash256::from_display_hex(s)
    }
}

impl Serialize for Hash256 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_display_hex())
    }
}

impl<'de> Deserialize<'de> for Hash256 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Hash256::from_display_hex(&s).map_err(serde::de::Error::custom)
    }
}

/// Cursor over a byte slice with consensus-style primitive reads.
pub struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Reader { data, pos: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.remaining() < n {
            return Err(CodecError::Truncated);
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn take_array<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        Ok(self.take(N)?.try_into().unwrap())
    }

    pub fn peek(&self) -> Result<u8, CodecError> {
        self.data.get(self.pos).copied().ok_or(CodecError::Truncated)
    }

    pub fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16_le(&mut self) -> Result<u16, CodecError> {
        Ok(u16::from_le_bytes(self.take_array()?))
    }

    pub fn u32_le(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_le_bytes(self.take_array()?))
    }

    pub fn i32_le(&mut self) -> Result<i32, CodecError> {
        Ok(i32::from_le_bytes(self.take_array()?))
    }

    pub fn u64_le(&mut self) -> Result<u64, CodecError> {
        Ok(u64::from_le_bytes(self.take_array()?))
    }

    pub fn hash(&mut self) -> Result<Hash256, CodecError> {
        Ok(Hash256(self.take_array()?))
    }

    /// Varint-prefixed byte string.
    pub fn var_bytes(&mut self) -> Result<&'a [u8], CodecError> {
        let len = read_varint(self)?;
        if len > self.remaining() as u64 {
            return Err(CodecError::Truncated);
        }
        self.take(len as usize)
    }

    /// Varint element count, rejected early when it cannot fit in the
    /// remaining input at `min_size` bytes per element.
    pub fn count(&mut self, min_size: usize) -> Result<usize, CodecError> {
        let n = read_varint(self)?;
        if n.saturating_mul(min_size as u64) > self.remaining() as u64 {
            return Err(CodecError::Truncated);
        }
        Ok(n as usize)
    }

    pub fn finish(self) -> Result<(), CodecError> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(CodecError::TrailingBytes(n)),
        }
    }
}

/// Reads a compact-size integer, rejecting non-minimal encodings.
pub fn read_varint(r: &mut Reader<'_>) -> Result<u64, CodecError> {
    let v = match r.u8()? {
        0xfd => {
            let v = r.u16_le()? as u64;
            if v < 0xfd {
                return Err(CodecError::VarIntNonCanonical);
            }
            v
        }
        0xfe => {
            let v = r.u32_le()? as u64;
            if v <= 0xffff {
                return Err(CodecError::VarIntNonCanonical);
            }
            v
        }
        0xff => {
            let v = r.u64_le()?;
            if v <= 0xffff_ffff {
                return Err(CodecError::VarIntNonCanonical);
            }
            v
        }
        b => b as u64,
    };
    Ok(v)
}

pub fn write_varint(out: &mut Vec<u8>, v: u64) {
    match v {
        0..=0xfc => out.push(v as u8),
        0xfd..=0xffff => {
            out.push(0xfd);
            out.extend_from_slice(&(v as u16).to_le_bytes());
        }
        0x1_0000..=0xffff_ffff => {
            out.push(0xfe);
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        _ => {
            out.push(0xff);
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
}

pub fn write_var_bytes(out: &mut Vec<u8>, bytes: &[u8]) {
    write_varint(out, bytes.len() as u64);
    out.extend_from_slice(bytes);
}

/// `OP_DUP OP_HASH160 <20 bytes> OP_EQUALVERIFY OP_CHECKSIG`
pub fn p2pkh_script(pubkey_hash: &[u8; 20]) -> Vec<u8> {
    let mut s = Vec::with_capacity(25);
    s.extend_from_slice(&[0x76, 0xa9, 0x14]);
    s.extend_from_slice(pubkey_hash);
    s.extend_from_slice(&[0x88, 0xac]);
    s
}

pub fn decode_hex(s: &str) -> Result<Vec<u8>, CodecError> {
    hex::decode(s.trim()).map_err(|e| CodecError::InvalidHex(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn varint_boundaries() {
        for (v, len) in [(0u64, 1), (0xfc, 1), (0xfd, 3), (0xffff, 3), (0x10000, 5), (0xffff_ffff, 5), (0x1_0000_0000, 9)] {
            let mut buf = Vec::new();
            write_varint(&mut buf, v);
            assert_eq!(buf.len(), len, "value {v:#x}");
            let mut r = Reader::new(&buf);
            assert_eq!(read_varint(&mut r).unwrap(), v);
            r.finish().unwrap();
        }
    }

    #[test]
    fn varint_rejects_non_minimal() {
        for bytes in [&[0xfd, 0xfc, 0x00][..], &[0xfe, 0xff, 0xff, 0x00, 0x00], &[0xff, 1, 0, 0, 0, 0, 0, 0, 0]] {
            assert_eq!(read_varint(&mut Reader::new(bytes)), Err(CodecError::VarIntNonCanonical));
        }
        assert_eq!(read_varint(&mut Reader::new(&[0xfd, 0x01])), Err(CodecError::Truncated));
    }

    #[test]
    fn hash_display_is_reversed() {
        let mut b = [0u8; 32];
        b[0] = 0xab;
        let h = Hash256(b);
        assert!(h.to_display_hex().ends_with("ab"));
        assert_eq!(Hash256::from_display_hex(&h.to_display_hex()).unwrap(), h);
        assert!(Hash256::from_display_hex("abcd").is_err());
    }

    proptest! {
        #[test]
        fn varint_round_trip(v in any::<u64>()) {
            let mut buf = Vec::new();
            write_varint(&mut buf, v);
            let mut r = Reader::new(&buf);
            prop_assert_eq!(read_varint(&mut r).unwrap(), v);
            prop_assert!(r.finish().is_ok());
        }
    }
}
