//! secp256k1 group elements: `y^2 = x^3 + 7` over the field prime.

use std::fmt;

use super::field::{FieldElement, Scalar};
use super::hash160;
use crate::uint::U256;

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub enum Point {
    Infinity,
    Affine { x: FieldElement, y: FieldElement },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PointError {
    #[error("point at infinity has no encoding")]
    InfinityPoint,
    #[error("invalid compressed point encoding")]
    InvalidEncoding,
    #[error("x coordinate is not on the curve")]
    NotOnCurve,
}

const GX: U256 = U256([0x59F2815B16F81798, 0x029BFCDB2DCE28D9, 0x55A06295CE870B07, 0x79BE667EF9DCBBAC]);
const GY: U256 = U256([0x9C47D08FFB10D4B8, 0xFD17B448A6855419, 0x5DA4FBFC0E1108A8, 0x483ADA7726A3C465]);

fn curve_b() -> FieldElement {
    FieldElement::from_u64(7)
}

impl Point {
    pub fn generator() -> Point {
        Point::Affine {
            x: FieldElement::from_canonical(GX).unwrap(),
            y: FieldElement::from_canonical(GY).unwrap(),
        }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, Point::Infinity)
    }

    pub fn is_on_curve(&self) -> bool {
        match self {
            Point::Infinity => true,
            Point::Affine { x, y } => y.square() == x.square() * *x + curve_b(),
        }
    }

    pub fn negate(&self) -> Point {
        match *self {
            Point::Infinity => Point::Infinity,
            Point::Affine { x, y } => Point::Affine { x, y: -y },
        }
    }

    /// Affine chord-and-tangent addition.
    pub fn add(&self, other: &Point) -> Point {
        match (*self, *other) {
            (Point::Infinity, q) => q,
            (p, Point::Infinity) => p,
            (Point::Affine { x: x1, y: y1 }, Point::Affine { x: x2, y: y2 }) => {
                let slope = if x1 == x2 {
                    if y1 != y2 || y1.is_zero() {
                        return Point::Infinity;
                    }
                    let three = FieldElement::from_u64(3);
                    let two = FieldElement::from_u64(2);
                    three * x1.square() * (two * y1).invert().unwrap()
                } else {
                    (y2 - y1) * (x2 - x1).invert().unwrap()
                };
                let x3 = slope.square() - x1 - x2;
                let y3 = slope * (x1 - x3) - y1;
                Point::Affine { x: x3, y: y3 }
            }
        }
    }

    pub fn double(&self) -> Point {
        self.add(self)
    }

    /// `k * self` by double-and-add over all 256 bits of `k`.
    pub fn mul(&self, k: &Scalar) -> Point {
        let base = Jacobian::from_affine(self);
        let bits = k.value();
        let mut acc = Jacobian::INFINITY;
        for i in (0..256).rev() {
            acc = acc.double();
            if bits.bit(i) {
                acc = acc.add(&base);
            }
        }
        acc.to_affine()
    }

    /// 33-byte SEC1 compressed encoding.
    pub fn to_compressed(&self) -> Result<[u8; 33], PointError> {
        match self {
            Point::Infinity => Err(PointError::InfinityPoint),
            Point::Affine { x, y } => {
                let mut out = [0u8; 33];
                out[0] = if y.is_odd() { 0x03 } else { 0x02 };
                out[1..].copy_from_slice(&x.to_be_bytes());
                Ok(out)
            }
        }
    }

    pub fn from_compressed(bytes: &[u8]) -> Result<Point, PointError> {
        if bytes.len() != 33 || (bytes[0] != 0x02 && bytes[0] != 0x03) {
            return Err(PointError::InvalidEncoding);
        }
        let x = FieldElement::from_canonical(U256::from_be_bytes(bytes[1..].try_into().unwrap()))
            .ok_or(PointError::InvalidEncoding)?;
        let y2 = x.square() * x + curve_b();
        let mut y = y2.sqrt().ok_or(PointError::NotOnCurve)?;
        if y.is_odd() != (bytes[0] == 0x03) {
            y = -y;
        }
        Ok(Point::Affine { x, y })
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_compressed() {
            Ok(c) => write!(f, "Point({})", hex::encode(c)),
            Err(_) => write!(f, "Point(infinity)"),
        }
    }
}

/// Jacobian coordinates `(X, Y, Z)` representing `(X/Z^2, Y/Z^3)`; used
/// internally so scalar multiplication needs a single inversion.
#[derive(Clone, Copy)]
struct Jacobian {
    x: FieldElement,
    y: FieldElement,
    z: FieldElement,
}

impl Jacobian {
    const INFINITY: Jacobian =
        Jacobian { x: FieldElement::ONE, y: FieldElement::ONE, z: FieldElement::ZERO };

    fn from_affine(p: &Point) -> Jacobian {
        match *p {
            Point::Infinity => Jacobian::INFINITY,
            Point::Affine { x, y } => Jacobian { x, y, z: FieldElement::ONE },
        }
    }

    fn is_infinity(&self) -> bool {
        self.z.is_zero()
    }

    fn to_affine(&self) -> Point {
        if self.is_infinity() {
            return Point::Infinity;
        }
        let zinv = self.z.invert().unwrap();
        let zinv2 = zinv.square();
        Point::Affine { x: self.x * zinv2, y: self.y * zinv2 * zinv }
    }

    fn double(&self) -> Jacobian {
        if self.is_infinity() || self.y.is_zero() {
            return Jacobian::INFINITY;
        }
        // a = 0 doubling formulas.
        let two = FieldElement::from_u64(2);
        let three = FieldElement::from_u64(3);
        let y2 = self.y.square();
        let s = FieldElement::from_u64(4) * self.x * y2;
        let m = three * self.x.square();
        let x3 = m.square() - two * s;
        let y3 = m * (s - x3) - FieldElement::from_u64(8) * y2.square();
        let z3 = two * self.y * self.z;
        Jacobian { x: x3, y: y3, z: z3 }
    }

    fn add(&self, other: &Jacobian) -> Jacobian {
        if self.is_infinity() {
            return *other;
        }
        if other.is_infinity() {
            return *self;
        }
        let z1z1 = self.z.square();
        let z2z2 = other.z.square();
        let u1 = self.x * z2z2;
        let u2 = other.x * z1z1;
        let s1 = self.y * z2z2 * other.z;
        let s2 = other.y * z1z1 * self.z;
        if u1 == u2 {
            return if s1 == s2 { self.double() } else { Jacobian::INFINITY };
        }
        let h = u2 - u1;
        let r = s2 - s1;
        let h2 = h.square();
        let h3 = h2 * h;
        let u1h2 = u1 * h2;
        let x3 = r.square() - h3 - FieldElement::from_u64(2) * u1h2;
        let y3 = r * (u1h2 - x3) - s1 * h3;
        let z3 = self.z * other.z * h;
        Jacobian { x: x3, y: y3, z: z3 }
    }
}

/// A non-zero secret scalar.
#[derive(Clone, Copy, PartialEq, Eq)]
pub struct SecretKey(Scalar);

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("secret key must be in [1, n)")]
pub struct InvalidSecretKey;

impl SecretKey {
    pub fn new(s: Scalar) -> Result<Self, InvalidSecretKey> {
        if s.is_zero() {
            Err(InvalidSecretKey)
        } else {
            Ok(SecretKey(s))
        }
    }

    pub fn from_be_bytes(bytes: &[u8; 32]) -> Result<Self, InvalidSecretKey> {
        let s = Scalar::from_canonical(U256::from_be_bytes(bytes)).ok_or(InvalidSecretKey)?;
        Self::new(s)
    }

    pub fn scalar(&self) -> Scalar {
        self.0
    }

    pub fn to_be_bytes(&self) -> [u8; 32] {
        self.0.to_be_bytes()
    }

    pub fn public_key(&self) -> Point {
        Point::generator().mul(&self.0)
    }
}

impl fmt::Debug for SecretKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SecretKey(..)")
    }
}

/// `hash160` of a compressed public key, as committed to by P2PKH outputs.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PubKeyHash(pub [u8; 20]);

impl PubKeyHash {
    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for PubKeyHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PubKeyHash({})", self.to_hex())
    }
}

pub fn pubkey_hash(p: &Point) -> Result<PubKeyHash, PointError> {
    Ok(PubKeyHash(hash160(&p.to_compressed()?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{ripemd160, sha256};
    use proptest::prelude::*;

    fn g() -> Point {
        Point::generator()
    }

    fn scalar(v: u64) -> Scalar {
        Scalar::from_u64(v)
    }

    #[test]
    fn generator_is_on_curve() {
        assert!(g().is_on_curve());
        assert_eq!(
            hex::encode(g().to_compressed().unwrap()),
            "0279be667ef9dcbbac55a06295ce870b07029bfcdb2dce28d959f2815b16f81798"
        );
    }

    #[test]
    fn small_multiples_match_repeated_addition() {
        assert_eq!(g().mul(&Scalar::ZERO), Point::Infinity);
        assert_eq!(g().mul(&Scalar::ONE), g());
        let mut acc = Point::Infinity;
        for k in 1..=100u64 {
            acc = acc.add(&g());
            assert_eq!(g().mul(&scalar(k)), acc, "k = {k}");
        }
    }

    #[test]
    fn group_order_annihilates_generator() {
        let n_minus_one = Scalar::ZERO - Scalar::ONE;
        assert_eq!(g().mul(&n_minus_one), g().negate());
        assert_eq!(g().mul(&n_minus_one).add(&g()), Point::Infinity);
    }

    #[test]
    fn known_multiple() {
        // 2G from the SEC2 test data.
        let two_g = g().mul(&scalar(2));
        assert_eq!(
            hex::encode(two_g.to_compressed().unwrap()),
            "02c6047f9441ed7d6d3045406e95c07cd85c778e4b8cef3ca7abac09b95c709ee5"
        );
    }

    #[test]
    fn compressed_round_trip_and_parity() {
        for k in [1u64, 2, 3, 1000, 123456789] {
            let p = g().mul(&scalar(k));
            let enc = p.to_compressed().unwrap();
            assert_eq!(Point::from_compressed(&enc).unwrap(), p);
            let neg = p.negate().to_compressed().unwrap();
            assert_ne!(enc[0], neg[0]);
            assert_eq!(enc[1..], neg[1..]);
            assert_ne!(pubkey_hash(&p).unwrap(), pubkey_hash(&p.negate()).unwrap());
        }
        assert_eq!(Point::Infinity.to_compressed(), Err(PointError::InfinityPoint));
        assert_eq!(Point::from_compressed(&[0x04; 33]), Err(PointError::InvalidEncoding));
    }

    #[test]
    fn pubkey_hash_of_generator() {
        let compressed = g().to_compressed().unwrap();
        let expected = ripemd160::ripemd160(&sha256::sha256(&compressed));
        assert_eq!(pubkey_hash(&g()).unwrap().0, expected);
        // Well-known hash160 of the compressed generator (secret key 1).
        assert_eq!(pubkey_hash(&g()).unwrap().to_hex(), "751e76e8199196d454941c45d1b3a323f1433bd6");
        assert_eq!(pubkey_hash(&Point::Infinity), Err(PointError::InfinityPoint));
    }

    #[test]
    fn secret_key_rejects_zero_and_out_of_range() {
        assert!(SecretKey::new(Scalar::ZERO).is_err());
        assert!(SecretKey::from_be_bytes(&Scalar::MODULUS.to_be_bytes()).is_err());
        assert!(SecretKey::from_be_bytes(&[0xff; 32]).is_err());
        assert!(SecretKey::from_be_bytes(&U256::ONE.to_be_bytes()).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn scalar_mul_distributes(a in any::<[u64; 4]>(), b in any::<[u64; 4]>()) {
            let (a, b) = (Scalar::new(U256(a)), Scalar::new(U256(b)));
            let p = g().mul(&scalar(7));
            prop_assert_eq!(p.mul(&(a + b)), p.mul(&a).add(&p.mul(&b)));
            prop_assert!(p.mul(&a).is_on_curve());
        }
    }
}
