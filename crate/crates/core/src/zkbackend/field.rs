//! Prime field arithmetic for the constraint system and the proof backends.
//!
//! The modulus is `p = 2^127 - 2^65 + 1 = (2^63 - 2) * 2^64 + 1`. It exceeds
//! `2^64` and `p - 1` is divisible by `2^65`, so power-of-two evaluation
//! domains up to `2^65` points exist. Elements are kept in Montgomery form
//! with `R = 2^128`.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use rand::RngCore;

/// The field modulus.
pub const MODULUS: u128 = 0x7fff_ffff_ffff_fffe_0000_0000_0000_0001;
/// Largest `s` with `2^s | p - 1`.
pub const TWO_ADICITY: u32 = 65;
/// A generator of the multiplicative group.
pub const GENERATOR: u64 = 5;

const P0: u64 = MODULUS as u64;
const P1: u64 = (MODULUS >> 64) as u64;
// -p^{-1} mod 2^64; p = 1 mod 2^64.
const INV: u64 = u64::MAX;
// 2^256 mod p
const R2: u128 = 0x2f_ffff_ffff_ffff_ffe4;

/// An element of the prime field, stored in Montgomery form.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Fe(u128);

#[inline(always)]
fn mont_mul(a: u128, b: u128) -> u128 {
    let a = [a as u64, (a >> 64) as u64];
    let b = [b as u64, (b >> 64) as u64];
    let mut t = [0u64; 4];
    for &bi in &b {
        let mut carry = 0u64;
        for j in 0..2 {
            let s = t[j] as u128 + (a[j] as u128) * (bi as u128) + carry as u128;
            t[j] = s as u64;
            carry = (s >> 64) as u64;
        }
        let s = t[2] as u128 + carry as u128;
        t[2] = s as u64;
        t[3] = (s >> 64) as u64;

        let m = t[0].wrapping_mul(INV);
        let s = t[0] as u128 + (m as u128) * (P0 as u128);
        let mut carry = (s >> 64) as u64;
        let s = t[1] as u128 + (m as u128) * (P1 as u128) + carry as u128;
        t[0] = s as u64;
        carry = (s >> 64) as u64;
        let s = t[2] as u128 + carry as u128;
        t[1] = s as u64;
        carry = (s >> 64) as u64;
        t[2] = t[3] + carry;
    }
    let r = (t[0] as u128) | ((t[1] as u128) << 64);
    debug_assert_eq!(t[2], 0);
    if r >= MODULUS {
        r - MODULUS
    } else {
        r
    }
}

impl Fe {
    pub const ZERO: Fe = Fe(0);
    // R mod p
    pub const ONE: Fe = Fe(0x3_ffff_ffff_ffff_fffe);

    /// Reduces an arbitrary integer into the field.
    pub fn from_u128(v: u128) -> Fe {
        Fe(mont_mul(v % MODULUS, R2))
    }

    pub fn from_u64(v: u64) -> Fe {
        Fe::from_u128(v as u128)
    }

    /// Returns the canonical representative in `[0, p)`.
    pub fn to_canonical(self) -> u128 {
        mont_mul(self.0, 1)
    }

    /// Canonical little-endian encoding.
    pub fn to_le_bytes(self) -> [u8; 16] {
        self.to_canonical().to_le_bytes()
    }

    /// Decodes a canonical little-endian encoding; rejects values `>= p`.
    pub fn from_le_bytes(bytes: [u8; 16]) -> Option<Fe> {
        let v = u128::from_le_bytes(bytes);
        (v < MODULUS).then(|| Fe::from_u128(v))
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn square(self) -> Fe {
        self * self
    }

    pub fn pow(self, mut exp: u128) -> Fe {
        let mut base = self;
        let mut acc = Fe::ONE;
        while exp > 0 {
            if exp & 1 == 1 {
                acc *= base;
            }
            base = base.square();
            exp >>= 1;
        }
        acc
    }

    pub fn inverse(self) -> Option<Fe> {
        (!self.is_zero()).then(|| self.pow(MODULUS - 2))
    }

    /// A primitive `2^log_n`-th root of unity.
    pub fn root_of_unity(log_n: u32) -> Fe {
        assert!(log_n <= TWO_ADICITY, "domain too large for the field");
        Fe::from_u64(GENERATOR).pow((MODULUS - 1) >> log_n)
    }

    /// Uniform sampling by rejection on 127-bit draws.
    pub fn random<R: RngCore + ?Sized>(rng: &mut R) -> Fe {
        loop {
            let mut buf = [0u8; 16];
            rng.fill_bytes(&mut buf);
            let v = u128::from_le_bytes(buf) & (u128::MAX >> 1);
            if v < MODULUS {
                return Fe::from_u128(v);
            }
        }
    }
}

/// Inverts every nonzero element of `values` in place with one field inversion.
pub fn batch_inverse(values: &mut [Fe]) {
    let mut prefix = Vec::with_capacity(values.len());
    let mut acc = Fe::ONE;
    for v in values.iter() {
        prefix.push(acc);
        if !v.is_zero() {
            acc *= *v;
        }
    }
    let mut inv = acc.inverse().expect("product of nonzero elements");
    for (v, pre) in values.iter_mut().zip(prefix).rev() {
        if v.is_zero() {
            continue;
        }
        let next = inv * *v;
        *v = inv * pre;
        inv = next;
    }
}

impl From<u64> for Fe {
    fn from(v: u64) -> Fe {
        Fe::from_u64(v)
    }
}

impl From<u32> for Fe {
    fn from(v: u32) -> Fe {
        Fe::from_u64(v as u64)
    }
}

impl From<bool> for Fe {
    fn from(v: bool) -> Fe {
        if v {
            Fe::ONE
        } else {
            Fe::ZERO
        }
    }
}

impl Add for Fe {
    type Output = Fe;
    #[inline(always)]
    fn add(self, rhs: Fe) -> Fe {
        let s = self.0 + rhs.0;
        Fe(if s >= MODULUS { s - MODULUS } else { s })
    }
}

impl Sub for Fe {
    type Output = Fe;
    #[inline(always)]
    fn sub(self, rhs: Fe) -> Fe {
        Fe(if self.0 >= rhs.0 {
            self.0 - rhs.0
        } else {
            self.0 + MODULUS - rhs.0
        })
    }
}

impl Neg for Fe {
    type Output = Fe;
    fn neg(self) -> Fe {
        Fe::ZERO - self
    }
}

impl Mul for Fe {
    type Output = Fe;
    #[inline(always)]
    fn mul(self, rhs: Fe) -> Fe {
        Fe(mont_mul(self.0, rhs.0))
    }
}

impl AddAssign for Fe {
    fn add_assign(&mut self, rhs: Fe) {
        *self = *self + rhs;
    }
}

impl SubAssign for Fe {
    fn sub_assign(&mut self, rhs: Fe) {
        *self = *self - rhs;
    }
}

impl MulAssign for Fe {
    fn mul_assign(&mut self, rhs: Fe) {
        *self = *self * rhs;
    }
}

impl std::iter::Sum for Fe {
    fn sum<I: Iterator<Item = Fe>>(iter: I) -> Fe {
        iter.fold(Fe::ZERO, |a, b| a + b)
    }
}

impl fmt::Debug for Fe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fe({:#x})", self.to_canonical())
    }
}

impl fmt::Display for Fe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_canonical())
    }
}
