//! Arithmetic modulo the secp256k1 field prime and group order.
//!
//! Both moduli have the form `2^256 - c` with small `c`, so a 512-bit
//! product reduces by repeatedly folding the high half as `hi * c`.
//! No constant-time guarantee is made.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::uint::U256;

/// `x mod m` for `x = hi * 2^256 + lo` and `m = 2^256 - c`.
fn reduce_wide(mut lo: U256, mut hi: U256, c: &U256, m: &U256) -> U256 {
    while !hi.is_zero() {
        let (plo, phi) = hi.widening_mul(c);
        let (sum, carry) = plo.overflowing_add(&lo);
        lo = sum;
        hi = phi.wrapping_add(&U256::from_u64(carry as u64));
    }
    while lo >= *m {
        lo = lo.wrapping_sub(m);
    }
    lo
}

macro_rules! modular_type {
    ($name:ident, $modulus:expr, $complement:expr) => {
        #[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
        pub struct $name(U256);

        impl $name {
            pub const MODULUS: U256 = $modulus;
            const COMPLEMENT: U256 = $complement;
            pub const ZERO: $name = $name(U256::ZERO);
            pub const ONE: $name = $name(U256::ONE);

            /// Reduces an arbitrary 256-bit integer.
            pub fn new(v: U256) -> Self {
                $name(reduce_wide(v, U256::ZERO, &Self::COMPLEMENT, &Self::MODULUS))
            }

            /// Canonical value only; `None` if `v >= modulus`.
            pub fn from_canonical(v: U256) -> Option<Self> {
                (v < Self::MODULUS).then_some($name(v))
            }

            pub fn from_u64(v: u64) -> Self {
                $name(U256::from_u64(v))
            }

            pub fn from_be_bytes_reduced(bytes: &[u8; 32]) -> Self {
                Self::new(U256::from_be_bytes(bytes))
            }

            pub fn to_be_bytes(&self) -> [u8; 32] {
                self.0.to_be_bytes()
            }

            pub fn value(&self) -> U256 {
                self.0
            }

            pub fn is_zero(&self) -> bool {
                self.0.is_zero()
            }

            pub fn square(&self) -> Self {
                *self * *self
            }

            pub fn pow(&self, exp: &U256) -> Self {
                let mut acc = Self::ONE;
                for i in (0..exp.bits()).rev() {
                    acc = acc.square();
                    if exp.bit(i) {
                        acc = acc * *self;
                    }
                }
                acc
            }

            /// Multiplicative inverse by Fermat; `None` for zero.
            pub fn invert(&self) -> Option<Self> {
                if self.is_zero() {
                    return None;
                }
                Some(self.pow(&Self::MODULUS.wrapping_sub(&U256::from_u64(2))))
            }
        }

        impl Add for $name {
            type Output = $name;
            fn add(self, rhs: $name) -> $name {
                let (s, carry) = self.0.overflowing_add(&rhs.0);
                if carry || s >= Self::MODULUS {
                    $name(s.wrapping_sub(&Self::MODULUS))
                } else {
                    $name(s)
                }
            }
        }

        impl Sub for $name {
            type Output = $name;
            fn sub(self, rhs: $name) -> $name {
                let (d, borrow) = self.0.overflowing_sub(&rhs.0);
                if borrow {
                    $name(d.wrapping_add(&Self::MODULUS))
                } else {
                    $name(d)
                }
            }
        }

        impl Neg for $name {
            type Output = $name;
            fn neg(self) -> $name {
                $name::ZERO - self
            }
        }

        impl Mul for $name {
            type Output = $name;
            fn mul(self, rhs: $name) -> $name {
                let (lo, hi) = self.0.widening_mul(&rhs.0);
                $name(reduce_wide(lo, hi, &Self::COMPLEMENT, &Self::MODULUS))
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}({})", stringify!($name), hex::encode(self.to_be_bytes()))
            }
        }
    };
}

// p = 2^256 - 2^32 - 977
modular_type!(
    FieldElement,
    U256([0xFFFFFFFEFFFFFC2F, 0xFFFFFFFFFFFFFFFF, 0xFFFFFFFFFFFFFFFF, 0xFFFFFFFFFFFFFFFF]),
    U256([0x00000001000003D1, 0, 0, 0])
);

// n = FFFFFFFF FFFFFFFF FFFFFFFF FFFFFFFE BAAEDCE6 AF48A03B BFD25E8C D0364141
modular_type!(
    Scalar,
    U256([0xBFD25E8CD0364141, 0xBAAEDCE6AF48A03B, 0xFFFFFFFFFFFFFFFE, 0xFFFFFFFFFFFFFFFF]),
    U256([0x402DA1732FC9BEBF, 0x4551231950B75FC4, 0x0000000000000001, 0])
);

impl FieldElement {
    /// Square root when one exists. `p = 3 mod 4`, so `a^((p+1)/4)` is a candidate.
    pub fn sqrt(&self) -> Option<Self> {
        let exp = Self::MODULUS.wrapping_add(&U256::ONE) >> 2;
        let r = self.pow(&exp);
        (r.square() == *self).then_some(r)
    }

    pub fn is_odd(&self) -> bool {
        self.0.bit(0)
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

    #[test]
    fn moduli_constants() {
        let two256 = BigUint::from(1u8) << 256;
        let p = &two256 - (BigUint::from(1u8) << 32) - 977u32;
        assert_eq!(big(&FieldElement::MODULUS), p);
        assert_eq!(big(&FieldElement::COMPLEMENT), &two256 - &p);
        let n = BigUint::parse_bytes(
            b"FFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141",
            16,
        )
        .unwrap();
        assert_eq!(big(&Scalar::MODULUS), n);
        assert_eq!(big(&Scalar::COMPLEMENT), &two256 - &n);
    }

    proptest! {
        #[test]
        fn field_ops_match_bigint(a in any::<[u64; 4]>(), b in any::<[u64; 4]>()) {
            let p = big(&FieldElement::MODULUS);
            let (x, y) = (FieldElement::new(U256(a)), FieldElement::new(U256(b)));
            let (bx, by) = (big(&U256(a)) % &p, big(&U256(b)) % &p);
            prop_assert_eq!(big(&x.value()), bx.clone());
            prop_assert_eq!(big(&(x + y).value()), (&bx + &by) % &p);
            prop_assert_eq!(big(&(x - y).value()), (&bx + &p - &by) % &p);
            prop_assert_eq!(big(&(x * y).value()), (&bx * &by) % &p);
            if !x.is_zero() {
                prop_assert_eq!(x * x.invert().unwrap(), FieldElement::ONE);
            }
        }

        #[test]
        fn scalar_ops_match_bigint(a in any::<[u64; 4]>(), b in any::<[u64; 4]>()) {
            let n = big(&Scalar::MODULUS);
            let (x, y) = (Scalar::new(U256(a)), Scalar::new(U256(b)));
            let (bx, by) = (big(&U256(a)) % &n, big(&U256(b)) % &n);
            prop_assert_eq!(big(&(x + y).value()), (&bx + &by) % &n);
            prop_assert_eq!(big(&(x - y).value()), (&bx + &n - &by) % &n);
            prop_assert_eq!(big(&(x * y).value()), (&bx * &by) % &n);
            if !x.is_zero() {
                prop_assert_eq!(x * x.invert().unwrap(), Scalar::ONE);
            }
        }
    }

    #[test]
    fn sqrt_of_square() {
        for v in [1u64, 2, 7, 12345, u64::MAX] {
            let a = FieldElement::from_u64(v);
            let r = a.square().sqrt().unwrap();
            assert!(r == a || r == -a);
        }
        // -1 is a non-residue since p = 3 mod 4.
        assert!((-FieldElement::ONE).sqrt().is_none());
    }

    #[test]
    fn zero_has_no_inverse() {
        assert!(FieldElement::ZERO.invert().is_none());
        assert!(Scalar::ZERO.invert().is_none());
    }
}
