//! Fixed-width 256-bit unsigned integer.
//!
//! Used for proof-of-work targets, chain work and as the limb container for
//! secp256k1 field and scalar arithmetic. Limbs are little-endian `u64`s.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct U256(pub [u64; 4]);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid 256-bit hex integer: {0}")]
pub struct ParseU256Error(String);

impl U256 {
    pub const ZERO: U256 = U256([0; 4]);
    pub const ONE: U256 = U256([1, 0, 0, 0]);
    pub const MAX: U256 = U256([u64::MAX; 4]);

    pub const fn from_u64(v: u64) -> Self {
        U256([v, 0, 0, 0])
    }

    pub fn from_u128(v: u128) -> Self {
        U256([v as u64, (v >> 64) as u64, 0, 0])
    }

    /// `2^n` for `n < 256`.
    pub fn pow2(n: u32) -> Self {
        assert!(n < 256, "2^{n} does not fit in 256 bits");
        let mut r = U256::ZERO;
        r.0[(n / 64) as usize] = 1u64 << (n % 64);
        r
    }

    pub fn from_be_bytes(bytes: &[u8; 32]) -> Self {
        let mut limbs = [0u64; 4];
        for (i, limb) in limbs.iter_mut().enumerate() {
            let start = 32 - 8 * (i + 1);
            *limb = u64::from_be_bytes(bytes[start..start + 8].try_into().unwrap());
        }
        U256(limbs)
    }

    pub fn to_be_bytes(&self) -> [u8; 32] {
        let mut out = [0u8; 32];
        for i in 0..4 {
            let start = 32 - 8 * (i + 1);
            out[start..start + 8].copy_from_slice(&self.0[i].to_be_bytes());
        }
        out
    }

    pub fn from_le_bytes(bytes: &[u8; 32]) -> Self {
        let mut be = *bytes;
        be.reverse();
        Self::from_be_bytes(&be)
    }

    pub fn to_le_bytes(&self) -> [u8; 32] {
        let mut b = self.to_be_bytes();
        b.reverse();
        b
    }

    pub fn is_zero(&self) -> bool {
        self.0 == [0; 4]
    }

    pub fn low_u64(&self) -> u64 {
        self.0[0]
    }

    /// Number of significant bits.
    pub fn bits(&self) -> u32 {
        for i in (0..4).rev() {
            if self.0[i] != 0 {
                return 64 * i as u32 + (64 - self.0[i].leading_zeros());
            }
        }
        0
    }

    pub fn bit(&self, n: u32) -> bool {
        n < 256 && (self.0[(n / 64) as usize] >> (n % 64)) & 1 == 1
    }

    pub fn overflowing_add(&self, rhs: &U256) -> (U256, bool) {
        let mut out = [0u64; 4];
        let mut carry = false;
        for (i, o) in out.iter_mut().enumerate() {
            let (s1, c1) = self.0[i].overflowing_add(rhs.0[i]);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            *o = s2;
            carry = c1 || c2;
        }
        (U256(out), carry)
    }

    pub fn overflowing_sub(&self, rhs: &U256) -> (U256, bool) {
        let mut out = [0u64; 4];
        let mut borrow = false;
        for (i, o) in out.iter_mut().enumerate() {
            let (d1, b1) = self.0[i].overflowing_sub(rhs.0[i]);
            let (d2, b2) = d1.overflowing_sub(borrow as u64);
            *o = d2;
            borrow = b1 || b2;
        }
        (U256(out), borrow)
    }

    pub fn checked_add(&self, rhs: &U256) -> Option<U256> {
        match self.overflowing_add(rhs) {
            (v, false) => Some(v),
            _ => None,
        }
    }

    pub fn checked_sub(&self, rhs: &U256) -> Option<U256> {
        match self.overflowing_sub(rhs) {
            (v, false) => Some(v),
            _ => None,
        }
    }

    pub fn wrapping_add(&self, rhs: &U256) -> U256 {
        self.overflowing_add(rhs).0
    }

    pub fn wrapping_sub(&self, rhs: &U256) -> U256 {
        self.overflowing_sub(rhs).0
    }

    /// Full 512-bit product as `(low, high)`.
    pub fn widening_mul(&self, rhs: &U256) -> (U256, U256) {
        let mut t = [0u64; 8];
        for i in 0..4 {
            let mut carry: u128 = 0;
            for j in 0..4 {
                let cur = t[i + j] as u128 + (self.0[i] as u128) * (rhs.0[j] as u128) + carry;
                t[i + j] = cur as u64;
                carry = cur >> 64;
            }
            t[i + 4] = carry as u64;
        }
        (U256([t[0], t[1], t[2], t[3]]), U256([t[4], t[5], t[6], t[7]]))
    }

    pub fn checked_mul(&self, rhs: &U256) -> Option<U256> {
        let (lo, hi) = self.widening_mul(rhs);
        hi.is_zero().then_some(lo)
    }

    /// `self * rhs` as `(low 256 bits, carry limb)`.
    pub fn mul_u64(&self, rhs: u64) -> (U256, u64) {
        let mut out = [0u64; 4];
        let mut carry: u128 = 0;
        for (i, o) in out.iter_mut().enumerate() {
            let cur = (self.0[i] as u128) * (rhs as u128) + carry;
            *o = cur as u64;
            carry = cur >> 64;
        }
        (U256(out), carry as u64)
    }

    /// `floor(self * num / den)`, or `None` if the quotient exceeds 256 bits.
    pub fn mul_div_u64(&self, num: u64, den: u64) -> Option<U256> {
        assert!(den != 0, "division by zero");
        let (lo, hi) = self.mul_u64(num);
        // Long division of the 320-bit value [lo.0[0..4], hi] by den.
        let limbs = [lo.0[0], lo.0[1], lo.0[2], lo.0[3], hi];
        let mut q = [0u64; 5];
        let mut rem: u128 = 0;
        for i in (0..5).rev() {
            let cur = (rem << 64) | limbs[i] as u128;
            q[i] = (cur / den as u128) as u64;
            rem = cur % den as u128;
        }
        (q[4] == 0).then_some(U256([q[0], q[1], q[2], q[3]]))
    }

    pub fn div_rem(&self, divisor: &U256) -> (U256, U256) {
        assert!(!divisor.is_zero(), "division by zero");
        if self < divisor {
            return (U256::ZERO, *self);
        }
        let mut quotient = U256::ZERO;
        let mut rem = U256::ZERO;
        for i in (0..self.bits()).rev() {
            let overflow = rem.bit(255);
            rem = rem << 1;
            if self.bit(i) {
                rem.0[0] |= 1;
            }
            if overflow || rem >= *divisor {
                rem = rem.wrapping_sub(divisor);
                quotient.0[(i / 64) as usize] |= 1u64 << (i % 64);
            }
        }
        (quotient, rem)
    }

    pub fn to_hex(&self) -> String {
        let s = hex::encode(self.to_be_bytes());
        let trimmed = s.trim_start_matches('0');
        if trimmed.is_empty() {
            "0".to_string()
        } else {
            trimmed.to_string()
        }
    }

    pub fn from_hex(s: &str) -> Result<Self, ParseU256Error> {
        let digits = s.strip_prefix("0x").unwrap_or(s);
        if digits.is_empty() || digits.len() > 64 {
            return Err(ParseU256Error(s.to_string()));
        }
        let padded = format!("{digits:0>64}");
        let bytes = hex::decode(padded).map_err(|_| ParseU256Error(s.to_string()))?;
        Ok(Self::from_be_bytes(&bytes.try_into().unwrap()))
    }
}

impl Ord for U256 {
    fn cmp(&self, other: &Self) -> Ordering {
        for i in (0..4).rev() {
            match self.0[i].cmp(&other.0[i]) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }
}

impl PartialOrd for U256 {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl std::ops::Shl<u32> for U256 {
    type Output = U256;
    fn shl(self, n: u32) -> U256 {
        if n >= 256 {
            return U256::ZERO;
        }
        let limb_shift = (n / 64) as usize;
        let bit_shift = n % 64;
        let mut out = [0u64; 4];
        for i in (limb_shift..4).rev() {
            let src = i - limb_shift;
            out[i] = self.0[src] << bit_shift;
            if bit_shift > 0 && src > 0 {
                out[i] |= self.0[src - 1] >> (64 - bit_shift);
            }
        }
        U256(out)
    }
}

impl std::ops::Shr<u32> for U256 {
    type Output = U256;
    fn shr(self, n: u32) -> U256 {
        if n >= 256 {
            return U256::ZERO;
        }
        let limb_shift = (n / 64) as usize;
        let bit_shift = n % 64;
        let mut out = [0u64; 4];
        for i in 0..(4 - limb_shift) {
            let src = i + limb_shift;
            out[i] = self.0[src] >> bit_shift;
            if bit_shift > 0 && src + 1 < 4 {
                out[i] |= self.0[src + 1] << (64 - bit_shift);
            }
        }
        U256(out)
    }
}

impl std::ops::Not for U256 {
    type Output = U256;
    fn not(self) -> U256 {
        U256(self.0.map(|l| !l))
    }
}

impl fmt::Debug for U256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", self.to_hex())
    }
}

impl fmt::Display for U256 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", self.to_hex())
    }
}

impl FromStr for U256 {
    type Err = ParseU256Error;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::from_hex(s)
    }
}

impl Serialize for U256 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for U256 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        U256::from_hex(&s).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigUint;
    use proptest::prelude::*;

    fn big(x: &U256) -> BigUint {
        BigUint::from_bytes_be(&x.to_be_bytes())
    }

    fn from_big(b: &BigUint) -> U256 {
        let bytes = b.to_bytes_be();
        assert!(bytes.len() <= 32);
        let mut buf = [0u8; 32];
        buf[32 - bytes.len()..].copy_from_slice(&bytes);
        U256::from_be_bytes(&buf)
    }

    fn arb_u256() -> impl Strategy<Value = U256> {
        (any::<[u64; 4]>(), 0u32..256).prop_map(|(l, shift)| U256(l) >> shift)
    }

    proptest! {
        #[test]
        fn arithmetic_matches_bigint(a in arb_u256(), b in arb_u256()) {
            let m = BigUint::from(1u8) << 256;
            prop_assert_eq!(big(&a.wrapping_add(&b)), (big(&a) + big(&b)) % &m);
            let (lo, hi) = a.widening_mul(&b);
            prop_assert_eq!(big(&lo) + (big(&hi) << 256), big(&a) * big(&b));
            if !b.is_zero() {
                let (q, r) = a.div_rem(&b);
                prop_assert_eq!(big(&q), big(&a) / big(&b));
                prop_assert_eq!(big(&r), big(&a) % big(&b));
            }
        }

        #[test]
        fn shifts_match_bigint(a in arb_u256(), n in 0u32..256) {
            let m = (BigUint::from(1u8) << 256) - 1u8;
            prop_assert_eq!(big(&(a << n)), (big(&a) << n) & m);
            prop_assert_eq!(big(&(a >> n)), big(&a) >> n);
        }

        #[test]
        fn mul_div_matches_bigint(a in arb_u256(), num in any::<u64>(), den in 1u64..) {
            let exact = big(&a) * num / den;
            match a.mul_div_u64(num, den) {
                Some(v) => prop_assert_eq!(big(&v), exact),
                None => prop_assert!(exact.bits() > 256),
            }
        }
    }

    #[test]
    fn hex_round_trip() {
        let v = from_big(&(BigUint::from(0xffffu32) << 208));
        assert_eq!(v.to_hex(), format!("ffff{}", "0".repeat(52)));
        assert_eq!(U256::from_hex(&v.to_hex()).unwrap(), v);
        assert_eq!(U256::ZERO.to_hex(), "0");
        assert!(U256::from_hex("xyz").is_err());
    }

    #[test]
    fn bits_and_pow2() {
        assert_eq!(U256::ZERO.bits(), 0);
        assert_eq!(U256::pow2(255).bits(), 256);
        assert_eq!(U256::pow2(240), U256::ONE << 240);
    }
}
