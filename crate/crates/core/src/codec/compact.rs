//! Compact ("nBits") encoding of 256-bit proof-of-work targets.

use crate::uint::U256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum CompactError {
    #[error("compact target {0:#010x} has the sign bit set")]
    NegativeTarget(u32),
    #[error("compact target {0:#010x} overflows 256 bits")]
    Overflow(u32),
    #[error("target must be non-zero")]
    ZeroTarget,
}

/// `mantissa * 256^(exponent - 3)`. A zero mantissa decodes to target 0.
pub fn nbits_to_target(nbits: u32) -> Result<U256, CompactError> {
    let exponent = nbits >> 24;
    let mantissa = nbits & 0x007f_ffff;
    if mantissa == 0 {
        return Ok(U256::ZERO);
    }
    if nbits & 0x0080_0000 != 0 {
        return Err(CompactError::NegativeTarget(nbits));
    }
    if exponent <= 3 {
        return Ok(U256::from_u64((mantissa >> (8 * (3 - exponent))) as u64));
    }
    let mantissa_bytes = match mantissa {
        0..=0xff => 1,
        0x100..=0xffff => 2,
        _ => 3,
    };
    if mantissa_bytes + (exponent - 3) > 32 {
        return Err(CompactError::Overflow(nbits));
    }
    Ok(U256::from_u64(mantissa as u64) << (8 * (exponent - 3)))
}

/// Canonical compact encoding; precision beyond the top three bytes is truncated.
pub fn target_to_nbits(target: &U256) -> Result<u32, CompactError> {
    if target.is_zero() {
        return Err(CompactError::ZeroTarget);
    }
    let mut size = target.bits().div_ceil(8);
    let mut mantissa = if size <= 3 {
        (target.low_u64() << (8 * (3 - size))) as u32
    } else {
        (*target >> (8 * (size - 3))).low_u64() as u32
    };
    if mantissa & 0x0080_0000 != 0 {
        mantissa >>= 8;
        size += 1;
    }
    Ok(mantissa | (size << 24))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn genesis_difficulty() {
        let t = nbits_to_target(0x1d00ffff).unwrap();
        assert_eq!(t, U256::from_u64(0xffff) << 208);
        assert_eq!(target_to_nbits(&t).unwrap(), 0x1d00ffff);
    }

    #[test]
    fn small_exponents() {
        assert_eq!(nbits_to_target(0x03123456).unwrap(), U256::from_u64(0x123456));
        assert_eq!(nbits_to_target(0x02123456).unwrap(), U256::from_u64(0x1234));
        assert_eq!(nbits_to_target(0x01123456).unwrap(), U256::from_u64(0x12));
        assert_eq!(nbits_to_target(0x00123456).unwrap(), U256::ZERO);
    }

    #[test]
    fn sign_zero_and_overflow() {
        assert_eq!(nbits_to_target(0x04923456), Err(CompactError::NegativeTarget(0x04923456)));
        assert_eq!(nbits_to_target(0x04800000).unwrap(), U256::ZERO);
        assert_eq!(nbits_to_target(0x1d000000).unwrap(), U256::ZERO);
        assert_eq!(nbits_to_target(0xff123456), Err(CompactError::Overflow(0xff123456)));
        assert!(nbits_to_target(0x220000ff).is_ok());
        assert!(nbits_to_target(0x2200ffff).is_err());
        assert_eq!(target_to_nbits(&U256::ZERO), Err(CompactError::ZeroTarget));
    }

    #[test]
    fn high_mantissa_bit_bumps_exponent() {
        // 0x80 as the leading byte would read as a sign bit.
        let t = U256::from_u64(0x80) << 200;
        let nbits = target_to_nbits(&t).unwrap();
        assert_eq!(nbits & 0x0080_0000, 0);
        assert_eq!(nbits, 0x1b008000);
        assert_eq!(nbits_to_target(nbits).unwrap(), t);
        assert_eq!(target_to_nbits(&U256::pow2(240)).unwrap(), 0x1f010000);
    }

    proptest! {
        #[test]
        fn truncation_bound(limbs in any::<[u64; 4]>(), shift in 0u32..256) {
            let t = U256(limbs) >> shift;
            prop_assume!(!t.is_zero());
            let nbits = target_to_nbits(&t).unwrap();
            let back = nbits_to_target(nbits).unwrap();
            prop_assert!(back <= t);
            let exp = nbits >> 24;
            if exp > 3 {
                prop_assert!(t.wrapping_sub(&back) < U256::ONE << (8 * (exp - 3)));
            } else {
                prop_assert_eq!(back, t);
            }
            // Idempotent once truncated.
            prop_assert_eq!(target_to_nbits(&back).unwrap(), nbits);
        }
    }
}
