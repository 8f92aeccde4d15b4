//! Arithmetic modulo p = 2^64 - 2^32 + 1.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const MODULUS: u64 = 0xFFFF_FFFF_0000_0001;
/// 2^64 mod p.
const EPSILON: u64 = 0xFFFF_FFFF;

/// Canonical field element, always `< MODULUS`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct GElement(u64);

impl GElement {
    pub const ZERO: GElement = GElement(0);
    pub const ONE: GElement = GElement(1);
    /// Generator of the full multiplicative group.
    pub const GENERATOR: GElement = GElement(7);
    pub const TWO_ADICITY: u32 = 32;

    pub const fn new(v: u64) -> Self {
        GElement(if v >= MODULUS { v - MODULUS } else { v })
    }

    pub fn from_canonical(v: u64) -> Option<Self> {
        (v < MODULUS).then_some(GElement(v))
    }

    pub fn from_u128(v: u128) -> Self {
        GElement(reduce128(v))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn square(self) -> Self {
        self * self
    }

    pub fn double(self) -> Self {
        self + self
    }

    pub fn pow(self, mut e: u64) -> Self {
        let mut base = self;
        let mut acc = GElement::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base = base.square();
            e >>= 1;
        }
        acc
    }

    pub fn inverse(self) -> Option<Self> {
        (!self.is_zero()).then(|| self.pow(MODULUS - 2))
    }

    /// Primitive `2^log_n`-th root of unity.
    pub fn root_of_unity(log_n: u32) -> Self {
        assert!(log_n <= Self::TWO_ADICITY, "no subgroup of order 2^{log_n}");
        Self::GENERATOR.pow((MODULUS - 1) >> log_n)
    }

    pub fn to_le_bytes(self) -> [u8; 8] {
        self.0.to_le_bytes()
    }

    pub fn from_le_bytes(b: [u8; 8]) -> Option<Self> {
        Self::from_canonical(u64::from_le_bytes(b))
    }

    pub fn to_hex(self) -> String {
        format!("{:016x}", self.0)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        if s.len() != 16 {
            return None;
        }
        u64::from_str_radix(s, 16).ok().and_then(Self::from_canonical)
    }
}

/// Inverts every element with one field inversion. All inputs must be non-zero.
pub fn batch_inverse(values: &[GElement]) -> Vec<GElement> {
    let mut prefix = Vec::with_capacity(values.len());
    let mut acc = GElement::ONE;
    for v in values {
        prefix.push(acc);
        acc *= *v;
    }
    let mut inv = acc.inverse().expect("batch_inverse input contains zero");
    let mut out = vec![GElement::ZERO; values.len()];
    for i in (0..values.len()).rev() {
        out[i] = prefix[i] * inv;
        inv *= values[i];
    }
    out
}

fn reduce128(x: u128) -> u64 {
    let lo = x as u64;
    let hi = (x >> 64) as u64;
    let hi_hi = hi >> 32;
    let hi_lo = hi & EPSILON;
    // x = lo + hi_lo * 2^64 + hi_hi * 2^96, with 2^64 = EPSILON and 2^96 = -1.
    let (mut t0, borrow) = lo.overflowing_sub(hi_hi);
    if borrow {
        t0 = t0.wrapping_sub(EPSILON);
    }
    let t1 = hi_lo * EPSILON;
    let (mut r, carry) = t0.overflowing_add(t1);
    if carry {
        r = r.wrapping_add(EPSILON);
    }
    if r >= MODULUS {
        r -= MODULUS;
    }
    r
}

impl Add for GElement {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let (mut r, carry) = self.0.overflowing_add(rhs.0);
        if carry {
            r = r.wrapping_add(EPSILON);
        }
        GElement::new(r)
    }
}

impl Sub for GElement {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let (r, borrow) = self.0.overflowing_sub(rhs.0);
        GElement(if borrow { r.wrapping_sub(EPSILON) } else { r })
    }
}

impl Neg for GElement {
    type Output = Self;
    fn neg(self) -> Self {
        GElement::ZERO - self
    }
}

impl Mul for GElement {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        GElement(reduce128(self.0 as u128 * rhs.0 as u128))
    }
}

impl AddAssign for GElement {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl SubAssign for GElement {
    fn sub_assign(&mut self, rhs: Self) {
        *self = *self - rhs;
    }
}

impl MulAssign for GElement {
    fn mul_assign(&mut self, rhs: Self) {
        *self = *self * rhs;
    }
}

impl From<u64> for GElement {
    fn from(v: u64) -> Self {
        GElement::new(v)
    }
}

impl fmt::Debug for GElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for GElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for GElement {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for GElement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        GElement::from_hex(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("bad field element {s:?}")))
    }
}
