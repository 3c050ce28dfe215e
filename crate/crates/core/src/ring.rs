//! Coefficient contexts.
//!
//! Arithmetic is done through a context object (`Rationals`, `PrimeField`,
//! `QpField`, `QuadExt`, `Reals`) rather than through operator overloading,
//! because most contexts carry parameters (the prime, the working precision,
//! the square class of the extension) that the element alone does not know.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

/// Tag describing where the coefficients of a form or space live.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Context {
    Int,
    Rat,
    ModP { p: u64 },
    PAdic { p: u64, precision: u32 },
    QuadExt { p: u64, precision: u32, d: String },
    RatQuad { d: String },
    Real,
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Context::Int => write!(f, "int"),
            Context::Rat => write!(f, "rat"),
            Context::ModP { p } => write!(f, "mod {p}"),
            Context::PAdic { p, precision } => write!(f, "Q_{p} (N={precision})"),
            Context::QuadExt { p, precision, d } => write!(f, "Q_{p}(sqrt {d}) (N={precision})"),
            Context::RatQuad { d } => write!(f, "Q(sqrt {d})"),
            Context::Real => write!(f, "real"),
        }
    }
}

pub trait Ring: Clone + fmt::Debug + Send + Sync {
    type Elem: Clone + fmt::Debug + PartialEq + Send + Sync;

    fn zero(&self) -> Self::Elem;
    fn one(&self) -> Self::Elem;
    fn from_int(&self, n: &BigInt) -> Self::Elem;
    fn add(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn neg(&self, a: &Self::Elem) -> Self::Elem;
    fn mul(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem;
    fn is_zero(&self, a: &Self::Elem) -> bool;
    /// 0 for characteristic-zero contexts.
    fn characteristic(&self) -> u64;
    fn context(&self) -> Context;

    fn from_i64(&self, n: i64) -> Self::Elem {
        self.from_int(&BigInt::from(n))
    }

    fn sub(&self, a: &Self::Elem, b: &Self::Elem) -> Self::Elem {
        self.add(a, &self.neg(b))
    }

    fn pow(&self, a: &Self::Elem, e: u32) -> Self::Elem {
        let mut acc = self.one();
        for _ in 0..e {
            acc = self.mul(&acc, a);
        }
        acc
    }

    /// Equality up to the known precision of the operands.
    fn eq_approx(&self, a: &Self::Elem, b: &Self::Elem) -> bool {
        self.is_zero(&self.sub(a, b))
    }

    fn scale_int(&self, a: &Self::Elem, n: i64) -> Self::Elem {
        self.mul(a, &self.from_i64(n))
    }

    fn dot(&self, a: &[Self::Elem], b: &[Self::Elem]) -> Self::Elem {
        a.iter()
            .zip(b)
            .fold(self.zero(), |acc, (x, y)| self.add(&acc, &self.mul(x, y)))
    }
}

pub trait Field: Ring {
    fn inv(&self, a: &Self::Elem) -> Option<Self::Elem>;

    /// Pivot preference for elimination: `None` for zero, smaller is better.
    fn pivot_weight(&self, a: &Self::Elem) -> Option<i64> {
        if self.is_zero(a) {
            None
        } else {
            Some(0)
        }
    }

    fn div(&self, a: &Self::Elem, b: &Self::Elem) -> Option<Self::Elem> {
        self.inv(b).map(|bi| self.mul(a, &bi))
    }
}

/// Exact rationals; integer forms live here too.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Rationals;

impl Ring for Rationals {
    type Elem = BigRational;

    fn zero(&self) -> BigRational {
        BigRational::zero()
    }
    fn one(&self) -> BigRational {
        BigRational::one()
    }
    fn from_int(&self, n: &BigInt) -> BigRational {
        BigRational::from_integer(n.clone())
    }
    fn add(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a + b
    }
    fn neg(&self, a: &BigRational) -> BigRational {
        -a
    }
    fn sub(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a - b
    }
    fn mul(&self, a: &BigRational, b: &BigRational) -> BigRational {
        a * b
    }
    fn is_zero(&self, a: &BigRational) -> bool {
        a.is_zero()
    }
    fn characteristic(&self) -> u64 {
        0
    }
    fn context(&self) -> Context {
        Context::Rat
    }
}

impl Field for Rationals {
    fn inv(&self, a: &BigRational) -> Option<BigRational> {
        if a.is_zero() {
            None
        } else {
            Some(a.recip())
        }
    }

    // Prefer small heights to keep exact elimination tame.
    fn pivot_weight(&self, a: &BigRational) -> Option<i64> {
        if a.is_zero() {
            None
        } else {
            Some((a.numer().bits() + a.denom().bits()) as i64)
        }
    }
}

/// The prime field F_p with p < 2^32, elements stored reduced in `0..p`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PrimeField {
    p: u64,
}

impl PrimeField {
    pub fn new(p: u64) -> Self {
        assert!(p >= 2 && p < (1 << 32) && is_prime(p), "{p} is not a supported prime");
        PrimeField { p }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn reduce_int(&self, n: &BigInt) -> u64 {
        n.mod_floor(&BigInt::from(self.p)).to_u64().unwrap()
    }

    /// Reduces a rational whose denominator is prime to p.
    pub fn reduce_rational(&self, q: &BigRational) -> Option<u64> {
        let den = self.reduce_int(q.denom());
        let inv = self.inv(&den)?;
        Some(self.mul(&self.reduce_int(q.numer()), &inv))
    }

    pub fn pow_u(&self, a: u64, mut e: u64) -> u64 {
        let mut base = a % self.p;
        let mut acc = 1 % self.p;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base % self.p;
            }
            base = base * base % self.p;
            e >>= 1;
        }
        acc
    }

    /// Legendre symbol for odd p: 1, p-1 (i.e. -1) or 0.
    pub fn legendre(&self, a: u64) -> i32 {
        let a = a % self.p;
        if a == 0 {
            return 0;
        }
        if self.p == 2 {
            return 1;
        }
        if self.pow_u(a, (self.p - 1) / 2) == 1 {
            1
        } else {
            -1
        }
    }

    /// Square root by exhaustive search; p is small in every use here.
    pub fn sqrt(&self, a: u64) -> Option<u64> {
        let a = a % self.p;
        (0..self.p).find(|x| x * x % self.p == a)
    }

    pub fn least_non_residue(&self) -> u64 {
        (2..self.p).find(|&u| self.legendre(u) == -1).unwrap_or(1)
    }
}

impl Ring for PrimeField {
    type Elem = u64;

    fn zero(&self) -> u64 {
        0
    }
    fn one(&self) -> u64 {
        1 % self.p
    }
    fn from_int(&self, n: &BigInt) -> u64 {
        self.reduce_int(n)
    }
    fn from_i64(&self, n: i64) -> u64 {
        n.rem_euclid(self.p as i64) as u64
    }
    fn add(&self, a: &u64, b: &u64) -> u64 {
        (a + b) % self.p
    }
    fn neg(&self, a: &u64) -> u64 {
        (self.p - a % self.p) % self.p
    }
    fn mul(&self, a: &u64, b: &u64) -> u64 {
        a * b % self.p
    }
    fn is_zero(&self, a: &u64) -> bool {
        *a % self.p == 0
    }
    fn characteristic(&self) -> u64 {
        self.p
    }
    fn context(&self) -> Context {
        Context::ModP { p: self.p }
    }
}

impl Field for PrimeField {
    fn inv(&self, a: &u64) -> Option<u64> {
        if *a % self.p == 0 {
            None
        } else {
            Some(self.pow_u(*a, self.p - 2))
        }
    }
}

/// Double-precision reals for the numerical geometry.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Reals;

impl Ring for Reals {
    type Elem = f64;

    fn zero(&self) -> f64 {
        0.0
    }
    fn one(&self) -> f64 {
        1.0
    }
    fn from_int(&self, n: &BigInt) -> f64 {
        n.to_f64().unwrap_or(f64::NAN)
    }
    fn from_i64(&self, n: i64) -> f64 {
        n as f64
    }
    fn add(&self, a: &f64, b: &f64) -> f64 {
        a + b
    }
    fn neg(&self, a: &f64) -> f64 {
        -a
    }
    fn mul(&self, a: &f64, b: &f64) -> f64 {
        a * b
    }
    fn is_zero(&self, a: &f64) -> bool {
        *a == 0.0
    }
    fn characteristic(&self) -> u64 {
        0
    }
    fn context(&self) -> Context {
        Context::Real
    }
}

impl Field for Reals {
    fn inv(&self, a: &f64) -> Option<f64> {
        if *a == 0.0 {
            None
        } else {
            Some(1.0 / a)
        }
    }

    fn pivot_weight(&self, a: &f64) -> Option<i64> {
        if *a == 0.0 {
            None
        } else {
            // larger magnitude = better pivot
            Some(-(a.abs().log2() * 1024.0) as i64)
        }
    }
}

pub fn rational_to_f64(q: &BigRational) -> f64 {
    let n = q.numer().to_f64().unwrap_or(f64::NAN);
    let d = q.denom().to_f64().unwrap_or(f64::NAN);
    if n.is_finite() && d.is_finite() {
        n / d
    } else {
        // very large heights: shift both before converting
        let shift = q.numer().bits().max(q.denom().bits()).saturating_sub(900);
        let n = (q.numer() >> shift).to_f64().unwrap_or(0.0);
        let d = (q.denom() >> shift).to_f64().unwrap_or(1.0);
        n / d
    }
}

/// Exact p-adic valuation of a nonzero integer.
pub fn int_valuation(n: &BigInt, p: u64) -> Option<i64> {
    if n.is_zero() {
        return None;
    }
    let pb = BigInt::from(p);
    let mut n = n.abs();
    let mut v = 0;
    loop {
        let (q, r) = n.div_rem(&pb);
        if !r.is_zero() {
            return Some(v);
        }
        n = q;
        v += 1;
    }
}

pub fn rational_valuation(q: &BigRational, p: u64) -> Option<i64> {
    let vn = int_valuation(q.numer(), p)?;
    Some(vn - int_valuation(q.denom(), p).unwrap_or(0))
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

pub fn next_prime(n: u64) -> u64 {
    let mut q = n + 1;
    while !is_prime(q) {
        q += 1;
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prime_field_basics() {
        let f = PrimeField::new(7);
        assert_eq!(f.inv(&3), Some(5));
        assert_eq!(f.neg(&0), 0);
        assert_eq!(f.legendre(2), 1);
        assert_eq!(f.legendre(3), -1);
        assert_eq!(f.least_non_residue(), 3);
        assert_eq!(f.from_i64(-1), 6);
    }

    #[test]
    fn valuations() {
        assert_eq!(int_valuation(&BigInt::from(250), 5), Some(3));
        assert_eq!(int_valuation(&BigInt::from(0), 5), None);
        let q = BigRational::new(BigInt::from(3), BigInt::from(50));
        assert_eq!(rational_valuation(&q, 5), Some(-2));
    }

    #[test]
    fn primes() {
        assert_eq!(next_prime(5), 7);
        assert_eq!(next_prime(13), 17);
        assert!(!is_prime(1));
    }
}
