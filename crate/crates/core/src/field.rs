//! Finite fields: prime fields GF(p) and binary extension fields GF(2^m).
//!
//! Elements are carried as `u32` representatives in `[0, q)`. For GF(2^m) the
//! representative is the coefficient bit-vector of the polynomial basis, so
//! addition is XOR. The default byte field GF(2^8) mod `0x11D` multiplies via
//! log/antilog tables built once per process; other binary fields use
//! shift-and-reduce.

use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduction polynomial x^8 + x^4 + x^3 + x^2 + 1.
pub const GF256_POLY: u32 = 0x11D;

/// Largest supported field size.
pub const MAX_FIELD_SIZE: u32 = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSpec {
    Prime {
        p: u32,
    },
    /// `poly` includes the leading x^m term.
    Binary {
        m: u32,
        poly: u32,
    },
}

impl FieldSpec {
    pub fn prime(p: u32) -> Result<Self> {
        if p < 2 || !is_prime(p) {
            return Err(Error::InvalidField(format!("{p} is not prime")));
        }
        if p > MAX_FIELD_SIZE {
            return Err(Error::InvalidField(format!(
                "prime {p} exceeds the maximum field size {MAX_FIELD_SIZE}"
            )));
        }
        Ok(FieldSpec::Prime { p })
    }

    pub fn binary(m: u32, poly: u32) -> Result<Self> {
        if !(1..=16).contains(&m) {
            return Err(Error::InvalidField(format!(
                "extension degree {m} not in 1..=16"
            )));
        }
        if poly >> m != 1 {
            return Err(Error::InvalidField(format!(
                "polynomial {poly:#x} does not have degree {m}"
            )));
        }
        if !is_irreducible_gf2(poly) {
            return Err(Error::InvalidField(format!(
                "polynomial {poly:#x} is reducible"
            )));
        }
        Ok(FieldSpec::Binary { m, poly })
    }

    pub fn gf256() -> Self {
        FieldSpec::Binary {
            m: 8,
            poly: GF256_POLY,
        }
    }

    /// Number of elements q.
    pub fn size(&self) -> u32 {
        match *self {
            FieldSpec::Prime { p } => p,
            FieldSpec::Binary { m, .. } => 1 << m,
        }
    }

    pub fn contains(&self, v: u32) -> bool {
        v < self.size()
    }

    pub fn check(&self, v: u32) -> Result<u32> {
        if self.contains(v) {
            Ok(v)
        } else {
            Err(Error::ValueOutOfRange {
                value: v,
                field: *self,
            })
        }
    }

    /// Element with integer representative `v`.
    pub fn element(&self, v: u32) -> Result<FieldElement> {
        Ok(FieldElement {
            value: self.check(v)?,
            field: *self,
        })
    }

    /// Image of the integer `i` under the natural map used for evaluation
    /// points: `i mod p` in GF(p), the bit pattern of `i` in GF(2^m).
    pub fn from_index(&self, i: u64) -> u32 {
        match *self {
            FieldSpec::Prime { p } => (i % p as u64) as u32,
            FieldSpec::Binary { m, .. } => (i & ((1u64 << m) - 1)) as u32,
        }
    }

    #[inline]
    pub fn add(&self, a: u32, b: u32) -> u32 {
        match *self {
            FieldSpec::Prime { p } => {
                let s = a + b;
                if s >= p {
                    s - p
                } else {
                    s
                }
            }
            FieldSpec::Binary { .. } => a ^ b,
        }
    }

    #[inline]
    pub fn neg(&self, a: u32) -> u32 {
        match *self {
            FieldSpec::Prime { p } => {
                if a == 0 {
                    0
                } else {
                    p - a
                }
            }
            FieldSpec::Binary { .. } => a,
        }
    }

    #[inline]
    pub fn sub(&self, a: u32, b: u32) -> u32 {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: u32, b: u32) -> u32 {
        match *self {
            FieldSpec::Prime { p } => ((a as u64 * b as u64) % p as u64) as u32,
            FieldSpec::Binary {
                m: 8,
                poly: GF256_POLY,
            } => gf256_mul(a as u8, b as u8) as u32,
            FieldSpec::Binary { m, poly } => gf2m_mul(a, b, m, poly),
        }
    }

    pub fn pow(&self, mut base: u32, mut exp: u64) -> u32 {
        let mut acc = 1;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    pub fn inv(&self, a: u32) -> Result<u32> {
        if a == 0 {
            return Err(Error::ZeroInverse);
        }
        Ok(match *self {
            FieldSpec::Binary {
                m: 8,
                poly: GF256_POLY,
            } => gf256_inv(a as u8) as u32,
            // a^(q-2) = a^-1 in any finite field.
            _ => self.pow(a, self.size() as u64 - 2),
        })
    }

    pub fn div(&self, a: u32, b: u32) -> Result<u32> {
        Ok(self.mul(a, self.inv(b)?))
    }

    /// Inner product of two equal-length vectors.
    pub fn dot(&self, a: &[u32], b: &[u32]) -> u32 {
        debug_assert_eq!(a.len(), b.len());
        a.iter()
            .zip(b)
            .fold(0, |acc, (&x, &y)| self.add(acc, self.mul(x, y)))
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            FieldSpec::Prime { p } => write!(f, "GF({p})"),
            FieldSpec::Binary { m, poly } => write!(f, "GF(2^{m}; {poly:#x})"),
        }
    }
}

/// A field value tagged with the field it lives in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u32,
    field: FieldSpec,
}

#[allow(clippy::should_implement_trait)]
impl FieldElement {
    pub fn value(&self) -> u32 {
        self.value
    }

    pub fn field(&self) -> FieldSpec {
        self.field
    }

    fn same_field(&self, other: &FieldElement) -> Result<FieldSpec> {
        if self.field != other.field {
            return Err(Error::FieldMismatch {
                left: self.field,
                right: other.field,
            });
        }
        Ok(self.field)
    }

    pub fn add(self, other: FieldElement) -> Result<FieldElement> {
        let f = self.same_field(&other)?;
        Ok(FieldElement {
            value: f.add(self.value, other.value),
            field: f,
        })
    }

    pub fn sub(self, other: FieldElement) -> Result<FieldElement> {
        let f = self.same_field(&other)?;
        Ok(FieldElement {
            value: f.sub(self.value, other.value),
            field: f,
        })
    }

    pub fn mul(self, other: FieldElement) -> Result<FieldElement> {
        let f = self.same_field(&other)?;
        Ok(FieldElement {
            value: f.mul(self.value, other.value),
            field: f,
        })
    }

    pub fn inv(self) -> Result<FieldElement> {
        Ok(FieldElement {
            value: self.field.inv(self.value)?,
            field: self.field,
        })
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

struct Gf256Tables {
    exp: [u8; 512],
    log: [u8; 256],
}

fn gf256_tables() -> &'static Gf256Tables {
    static TABLES: OnceLock<Gf256Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let mut exp = [0u8; 512];
        let mut log = [0u8; 256];
        let mut x: u32 = 1;
        for (i, slot) in exp.iter_mut().enumerate().take(255) {
            *slot = x as u8;
            log[x as usize] = i as u8;
            x <<= 1;
            if x & 0x100 != 0 {
                x ^= GF256_POLY;
            }
        }
        for i in 255..512 {
            exp[i] = exp[i - 255];
        }
        Gf256Tables { exp, log }
    })
}

#[inline]
fn gf256_mul(a: u8, b: u8) -> u8 {
    if a == 0 || b == 0 {
        return 0;
    }
    let t = gf256_tables();
    t.exp[t.log[a as usize] as usize + t.log[b as usize] as usize]
}

#[inline]
fn gf256_inv(a: u8) -> u8 {
    let t = gf256_tables();
    t.exp[255 - t.log[a as usize] as usize]
}

fn gf2m_mul(mut a: u32, mut b: u32, m: u32, poly: u32) -> u32 {
    let top = 1u32 << m;
    let mut acc = 0;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        b >>= 1;
        a <<= 1;
        if a & top != 0 {
            a ^= poly;
        }
    }
    acc
}

fn is_prime(p: u32) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2u32;
    while d * d <= p {
        if p.is_multiple_of(d) {
            return false;
        }
        d += 1;
    }
    true
}

fn gf2_degree(p: u32) -> i32 {
    31 - p.leading_zeros() as i32
}

fn gf2_rem(mut a: u32, b: u32) -> u32 {
    let db = gf2_degree(b);
    while a != 0 && gf2_degree(a) >= db {
        a ^= b << (gf2_degree(a) - db);
    }
    a
}

/// Trial division by every polynomial of degree 1..=deg/2.
fn is_irreducible_gf2(poly: u32) -> bool {
    let deg = gf2_degree(poly);
    if deg < 1 {
        return false;
    }
    for d in 1..=deg / 2 {
        for divisor in (1u32 << d)..(1u32 << (d + 1)) {
            if gf2_rem(poly, divisor) == 0 {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gf7() -> FieldSpec {
        FieldSpec::prime(7).unwrap()
    }

    #[test]
    fn prime_field_examples() {
        let f = gf7();
        assert_eq!(f.add(3, 5), 1);
        assert_eq!(f.add(0, 4), 4);
        assert_eq!(f.mul(3, 5), 1);
        assert_eq!(f.mul(1, 6), 6);
        assert_eq!(f.inv(3).unwrap(), 5);
        assert_eq!(f.inv(1).unwrap(), 1);
        assert_eq!(f.inv(0), Err(Error::ZeroInverse));
    }

    #[test]
    fn gf256_examples() {
        let f = FieldSpec::gf256();
        assert_eq!(f.add(0x53, 0x53), 0);
        assert_eq!(f.mul(0x02, 0x80), 0x1D);
        assert_eq!(f.mul(1, 0xA7), 0xA7);
        for x in 1..256 {
            let y = f.inv(x).unwrap();
            assert_eq!(f.mul(x, y), 1, "x = {x}");
        }
    }

    #[test]
    fn table_mul_matches_shift_reduce() {
        for a in 0..256 {
            for b in 0..256 {
                assert_eq!(
                    gf256_mul(a as u8, b as u8) as u32,
                    gf2m_mul(a, b, 8, GF256_POLY)
                );
            }
        }
    }

    #[test]
    fn element_ops_reject_mixed_fields() {
        let a = gf7().element(3).unwrap();
        let b = FieldSpec::gf256().element(3).unwrap();
        assert!(matches!(a.add(b), Err(Error::FieldMismatch { .. })));
        assert!(matches!(a.mul(b), Err(Error::FieldMismatch { .. })));
        let c = gf7().element(5).unwrap();
        assert_eq!(a.add(c).unwrap().value(), 1);
        assert_eq!(a.mul(c).unwrap().value(), 1);
        assert!(gf7().element(7).is_err());
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(FieldSpec::prime(1).is_err());
        assert!(FieldSpec::prime(9).is_err());
        assert!(FieldSpec::prime(65537).is_err());
        // x^8 + 1 = (x + 1)^8
        assert!(FieldSpec::binary(8, 0x101).is_err());
        assert!(FieldSpec::binary(8, 0x1D).is_err());
        assert!(FieldSpec::binary(8, GF256_POLY).is_ok());
        assert!(FieldSpec::binary(4, 0x13).is_ok());
        assert!(FieldSpec::binary(16, 0x1100B).is_ok());
    }

    fn axioms_hold(f: FieldSpec) {
        let q = f.size();
        for a in 0..q {
            assert_eq!(f.add(a, 0), a);
            assert_eq!(f.mul(a, 1), a);
            assert_eq!(f.add(a, f.neg(a)), 0);
            if a != 0 {
                assert_eq!(f.mul(a, f.inv(a).unwrap()), 1);
            }
            for b in 0..q {
                assert_eq!(f.add(a, b), f.add(b, a));
                assert_eq!(f.mul(a, b), f.mul(b, a));
            }
        }
    }

    fn triple_axioms_hold(f: FieldSpec) {
        let q = f.size();
        for a in 0..q {
            for b in 0..q {
                for c in 0..q {
                    assert_eq!(f.add(f.add(a, b), c), f.add(a, f.add(b, c)));
                    assert_eq!(f.mul(f.mul(a, b), c), f.mul(a, f.mul(b, c)));
                    assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                }
            }
        }
    }

    #[test]
    fn small_fields_satisfy_axioms_exhaustively() {
        for f in [
            gf7(),
            FieldSpec::prime(11).unwrap(),
            FieldSpec::prime(31).unwrap(),
            FieldSpec::binary(4, 0x13).unwrap(),
            FieldSpec::binary(5, 0x25).unwrap(),
        ] {
            axioms_hold(f);
            triple_axioms_hold(f);
        }
    }

    #[test]
    fn gf256_satisfies_axioms_exhaustively() {
        let f = FieldSpec::gf256();
        axioms_hold(f);
        triple_axioms_hold(f);
    }
}
