//! Finite-precision p-adic numbers, quadratic extensions, square classes,
//! Hilbert symbols and Hensel lifting.

mod ext;
mod lift;
mod residue;

pub use ext::{ExtDescriptor, ExtKind, QuadElem, QuadExt, RatQuad};
pub use lift::{hensel_lift_system, hensel_lift_univariate, local_sqrt, LiftError, LocalField, Poly};
pub use residue::ResidueField;

use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ring::{int_valuation, Context, Field, PrimeField, Ring};

pub const DEFAULT_PRECISION: u32 = 30;
/// Digits of slack allowed between working precision and verified precision.
pub const DEFAULT_SLACK: u32 = 5;

/// Valuation used for an exact zero; large enough to dominate any real
/// precision, small enough that sums never overflow.
const EXACT_ZERO: i64 = 1 << 40;
const EXACT_ZERO_JSON: u32 = u32::MAX;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PAdicError {
    #[error("insufficient precision: {0}")]
    InsufficientPrecision(String),
    #[error("argument is zero")]
    Zero,
    #[error("not a square")]
    NotASquare,
    #[error("odd valuation {0}")]
    OddValuation(i64),
    #[error("invalid p-adic data: {0}")]
    Invalid(String),
}

/// `unit · p^val`, known modulo `p^(val + rel)`.
///
/// A zero to precision `k` has `unit = 0`, `rel = 0`, `val = k`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PAdic {
    val: i64,
    rel: u32,
    unit: BigInt,
}

impl PAdic {
    pub fn zero_to(abs: i64) -> Self {
        PAdic { val: abs, rel: 0, unit: BigInt::zero() }
    }

    pub fn exact_zero() -> Self {
        Self::zero_to(EXACT_ZERO)
    }

    pub fn is_zero(&self) -> bool {
        self.unit.is_zero()
    }

    pub fn is_exact_zero(&self) -> bool {
        self.is_zero() && self.val >= EXACT_ZERO
    }

    /// `None` when zero to the known precision.
    pub fn valuation(&self) -> Option<i64> {
        if self.is_zero() {
            None
        } else {
            Some(self.val)
        }
    }

    /// Valuation, reading a zero as its absolute precision.
    pub fn valuation_or_precision(&self) -> i64 {
        self.val
    }

    pub fn abs_precision(&self) -> i64 {
        self.val + self.rel as i64
    }

    pub fn rel_precision(&self) -> u32 {
        self.rel
    }

    pub fn unit(&self) -> &BigInt {
        &self.unit
    }
}

/// The field Q_p at working (relative) precision N.
#[derive(Clone)]
pub struct QpField {
    p: u64,
    n: u32,
    powers: Arc<Vec<BigInt>>,
}

impl fmt::Debug for QpField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "QpField(p={}, N={})", self.p, self.n)
    }
}

impl PartialEq for QpField {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.n == other.n
    }
}

impl QpField {
    pub fn new(p: u64, precision: u32) -> Self {
        assert!(crate::ring::is_prime(p), "{p} is not prime");
        assert!(precision >= 1);
        let pb = BigInt::from(p);
        let mut powers = Vec::with_capacity(2 * precision as usize + 2);
        let mut acc = BigInt::one();
        for _ in 0..=(2 * precision as usize + 1) {
            powers.push(acc.clone());
            acc *= &pb;
        }
        QpField { p, n: precision, powers: Arc::new(powers) }
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn precision(&self) -> u32 {
        self.n
    }

    pub fn with_precision(&self, n: u32) -> Self {
        QpField::new(self.p, n)
    }

    pub fn pow_p(&self, k: u32) -> BigInt {
        match self.powers.get(k as usize) {
            Some(x) => x.clone(),
            None => num_traits::pow(BigInt::from(self.p), k as usize),
        }
    }

    fn split(&self, n: &BigInt) -> (i64, BigInt) {
        let v = int_valuation(n, self.p).expect("nonzero");
        (v, n / self.pow_p(v as u32))
    }

    /// Builds `u · p^v` with `u` reduced mod `p^rel` (u may carry extra p-factors).
    fn make(&self, v: i64, u: BigInt, rel: i64) -> PAdic {
        if rel <= 0 {
            return PAdic::zero_to(v);
        }
        let rel = rel.min(self.n as i64 + 64) as u32;
        let m = self.pow_p(rel);
        let u = u.mod_floor(&m);
        if u.is_zero() {
            return PAdic::zero_to(v + rel as i64);
        }
        let (k, unit) = self.split(&u);
        let rel = (rel as i64 - k).min(self.n as i64) as u32;
        let unit = unit.mod_floor(&self.pow_p(rel));
        PAdic { val: v + k, rel, unit }
    }

    pub fn from_rational(&self, q: &BigRational) -> PAdic {
        if q.is_zero() {
            return PAdic::exact_zero();
        }
        let (vn, un) = self.split(q.numer());
        let (vd, ud) = self.split(q.denom());
        let m = self.pow_p(self.n);
        let inv = mod_inverse(&ud, &m).expect("unit denominator");
        self.make(vn - vd, un * inv, self.n as i64)
    }

    /// Drops digits beyond absolute precision `abs`.
    pub fn truncate(&self, a: &PAdic, abs: i64) -> PAdic {
        if a.abs_precision() <= abs {
            return a.clone();
        }
        if a.is_zero() || a.val >= abs {
            return PAdic::zero_to(abs.min(a.abs_precision()));
        }
        self.make(a.val, a.unit.clone(), abs - a.val)
    }

    /// The rational `unit · p^val` (a zero maps to 0).
    pub fn to_rational(&self, a: &PAdic) -> BigRational {
        if a.is_zero() {
            return BigRational::zero();
        }
        let u = BigRational::from_integer(a.unit.clone());
        if a.val >= 0 {
            u * BigRational::from_integer(self.pow_p(a.val as u32))
        } else {
            u / BigRational::from_integer(self.pow_p((-a.val) as u32))
        }
    }

    /// Integer representative in `[0, p^k)`; requires nonnegative valuation.
    pub fn lift_mod(&self, a: &PAdic, k: u32) -> Option<BigInt> {
        if a.is_zero() {
            return Some(BigInt::zero());
        }
        if a.val < 0 {
            return None;
        }
        if a.val >= k as i64 {
            return Some(BigInt::zero());
        }
        Some((&a.unit * self.pow_p(a.val as u32)).mod_floor(&self.pow_p(k)))
    }

    /// Symmetric integer representative: the unit is taken in `(-p^rel/2, p^rel/2]`.
    pub fn balanced_integer(&self, a: &PAdic) -> Option<BigInt> {
        if a.is_zero() {
            return Some(BigInt::zero());
        }
        if a.val < 0 {
            return None;
        }
        let m = self.pow_p(a.rel);
        let mut u = a.unit.clone();
        if &u * 2 > m {
            u -= m;
        }
        Some(u * self.pow_p(a.val as u32))
    }

    /// Residue mod p of an integral element.
    pub fn residue(&self, a: &PAdic) -> Option<u64> {
        if a.is_zero() {
            return if a.val >= 1 { Some(0) } else { None };
        }
        match a.val {
            v if v > 0 => Some(0),
            0 => (&a.unit % self.p).to_u64(),
            _ => None,
        }
    }

    pub fn p_power(&self, k: i64) -> PAdic {
        PAdic { val: k, rel: self.n, unit: BigInt::one() }
    }

    pub fn from_parts(&self, v: i64, unit: &BigInt) -> PAdic {
        self.make(v, unit.clone(), self.n as i64)
    }

    pub fn square_class(&self, a: &PAdic) -> Result<SquareClass, PAdicError> {
        if a.is_zero() {
            return Err(PAdicError::Zero);
        }
        let parity = a.val.rem_euclid(2) as u8;
        if self.p == 2 {
            if a.rel < 3 {
                return Err(PAdicError::InsufficientPrecision("need 3 relative digits for a 2-adic square class".into()));
            }
            let u8 = (&a.unit % 8u32).to_u64().unwrap();
            Ok(SquareClass { p: 2, parity, unit: u8 })
        } else {
            let f = PrimeField::new(self.p);
            let r = (&a.unit % self.p).to_u64().unwrap();
            let unit = if f.legendre(r) == 1 { 1 } else { f.least_non_residue() };
            Ok(SquareClass { p: self.p, parity, unit })
        }
    }

    pub fn is_square(&self, a: &PAdic) -> Result<bool, PAdicError> {
        if a.is_zero() {
            return Ok(true);
        }
        Ok(self.square_class(a)?.is_trivial())
    }

    pub fn hilbert_symbol(&self, a: &PAdic, b: &PAdic) -> Result<i32, PAdicError> {
        let ca = self.square_class(a)?;
        let cb = self.square_class(b)?;
        Ok(hilbert_classes(&ca, &cb))
    }

    /// Square root with the canonical residue choice: for odd p the root
    /// whose residue lies in `1..=(p-1)/2`.
    pub fn sqrt(&self, a: &PAdic) -> Result<PAdic, PAdicError> {
        if a.is_zero() {
            return Ok(PAdic::zero_to(a.val.div_euclid(2)));
        }
        if a.val % 2 != 0 {
            return Err(PAdicError::OddValuation(a.val));
        }
        if !self.square_class(a)?.is_trivial() {
            return Err(PAdicError::NotASquare);
        }
        let half = a.val / 2;
        if self.p == 2 {
            // x² ≡ u mod 2^k determines x mod 2^(k-1); lift bit by bit.
            let k = a.rel;
            let mut x = BigInt::one();
            for j in 3..k {
                let m = self.pow_p(j + 1);
                if (&x * &x - &a.unit).mod_floor(&m) != BigInt::zero() {
                    x += self.pow_p(j - 1);
                }
            }
            return Ok(self.make(half, x, k as i64 - 1));
        }
        let f = PrimeField::new(self.p);
        let r = (&a.unit % self.p).to_u64().unwrap();
        let mut r0 = f.sqrt(r).expect("residue is a square");
        if r0 > (self.p - 1) / 2 {
            r0 = self.p - r0;
        }
        let m = self.pow_p(a.rel);
        let two_inv = mod_inverse(&BigInt::from(2), &m).unwrap();
        let mut x = BigInt::from(r0);
        let mut digits = 1u32;
        while digits < a.rel {
            let inv = mod_inverse(&x, &m).unwrap();
            x = ((&x + &a.unit * inv) * &two_inv).mod_floor(&m);
            digits *= 2;
        }
        Ok(self.make(half, x, a.rel as i64))
    }

    pub fn to_json(&self, a: &PAdic) -> PAdicJson {
        PAdicJson {
            p: self.p,
            n: if a.is_exact_zero() {
                EXACT_ZERO_JSON
            } else if a.is_zero() {
                a.val.clamp(0, i64::from(EXACT_ZERO_JSON - 1)) as u32
            } else {
                a.rel
            },
            v: a.valuation(),
            unit: a.unit.to_string(),
        }
    }

    pub fn from_json(&self, j: &PAdicJson) -> Result<PAdic, PAdicError> {
        if j.p != self.p {
            return Err(PAdicError::Invalid(format!("prime {} in a Q_{} context", j.p, self.p)));
        }
        match j.v {
            None if j.n == EXACT_ZERO_JSON => Ok(PAdic::exact_zero()),
            None => Ok(PAdic::zero_to(j.n as i64)),
            Some(v) => {
                let u: BigInt = j.unit.parse().map_err(|_| PAdicError::Invalid(j.unit.clone()))?;
                if (&u % self.p).is_zero() {
                    return Err(PAdicError::Invalid("unit divisible by p".into()));
                }
                Ok(self.make(v, u, j.n.min(self.n) as i64))
            }
        }
    }
}

/// `{"p":5, "N":30, "v":0, "unit":"…"}`; `v` is null for a zero (then `N`
/// is its absolute precision, with `u32::MAX` marking an exact zero).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PAdicJson {
    pub p: u64,
    #[serde(rename = "N")]
    pub n: u32,
    pub v: Option<i64>,
    pub unit: String,
}

pub fn mod_inverse(a: &BigInt, m: &BigInt) -> Option<BigInt> {
    let e = a.mod_floor(m).extended_gcd(m);
    if e.gcd.is_one() {
        Some(e.x.mod_floor(m))
    } else {
        None
    }
}

impl Ring for QpField {
    type Elem = PAdic;

    fn zero(&self) -> PAdic {
        PAdic::exact_zero()
    }
    fn one(&self) -> PAdic {
        PAdic { val: 0, rel: self.n, unit: BigInt::one() }
    }
    fn from_int(&self, n: &BigInt) -> PAdic {
        if n.is_zero() {
            return PAdic::exact_zero();
        }
        let (v, u) = self.split(n);
        self.make(v, u, self.n as i64)
    }

    fn add(&self, a: &PAdic, b: &PAdic) -> PAdic {
        let abs = a.abs_precision().min(b.abs_precision());
        if a.is_zero() {
            return self.truncate(b, abs);
        }
        if b.is_zero() {
            return self.truncate(a, abs);
        }
        let m = a.val.min(b.val);
        if abs <= m {
            return PAdic::zero_to(abs);
        }
        let width = (abs - m) as u32;
        let shift = |x: &PAdic| {
            let s = (x.val - m) as u32;
            if s >= width {
                BigInt::zero()
            } else {
                &x.unit * self.pow_p(s)
            }
        };
        self.make(m, shift(a) + shift(b), width as i64)
    }

    fn neg(&self, a: &PAdic) -> PAdic {
        if a.is_zero() {
            return a.clone();
        }
        let m = self.pow_p(a.rel);
        PAdic { val: a.val, rel: a.rel, unit: (&m - &a.unit).mod_floor(&m) }
    }

    fn mul(&self, a: &PAdic, b: &PAdic) -> PAdic {
        match (a.is_zero(), b.is_zero()) {
            (true, true) => PAdic::zero_to((a.val + b.val).min(EXACT_ZERO)),
            (true, false) => PAdic::zero_to((a.val + b.val).min(EXACT_ZERO)),
            (false, true) => PAdic::zero_to((a.val + b.val).min(EXACT_ZERO)),
            (false, false) => {
                let rel = a.rel.min(b.rel);
                let unit = (&a.unit * &b.unit).mod_floor(&self.pow_p(rel));
                PAdic { val: a.val + b.val, rel, unit }
            }
        }
    }

    fn is_zero(&self, a: &PAdic) -> bool {
        a.is_zero()
    }
    fn characteristic(&self) -> u64 {
        0
    }
    fn context(&self) -> Context {
        Context::PAdic { p: self.p, precision: self.n }
    }
}

impl Field for QpField {
    fn inv(&self, a: &PAdic) -> Option<PAdic> {
        if a.is_zero() {
            return None;
        }
        let unit = mod_inverse(&a.unit, &self.pow_p(a.rel))?;
        Some(PAdic { val: -a.val, rel: a.rel, unit })
    }

    // Smallest valuation first: the p-adic analogue of partial pivoting.
    fn pivot_weight(&self, a: &PAdic) -> Option<i64> {
        a.valuation()
    }
}

/// An element of Q_p*/(Q_p*)²: valuation parity plus unit class
/// (1 or the least non-residue for odd p, a residue mod 8 for p = 2).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SquareClass {
    pub p: u64,
    pub parity: u8,
    pub unit: u64,
}

impl SquareClass {
    pub fn all(p: u64) -> Vec<SquareClass> {
        let units: Vec<u64> = if p == 2 { vec![1, 3, 5, 7] } else { vec![1, PrimeField::new(p).least_non_residue()] };
        let mut out = Vec::new();
        for parity in 0..2 {
            for &unit in &units {
                out.push(SquareClass { p, parity, unit });
            }
        }
        out
    }

    pub fn is_trivial(&self) -> bool {
        self.parity == 0 && self.unit == 1
    }

    /// The canonical integer representative `unit · p^parity`.
    pub fn representative(&self) -> BigInt {
        BigInt::from(self.unit) * BigInt::from(if self.parity == 1 { self.p } else { 1 })
    }

    pub fn label(&self) -> String {
        if self.p == 2 {
            return self.representative().to_string();
        }
        match (self.parity, self.unit) {
            (0, 1) => "1".into(),
            (0, _) => "u".into(),
            (1, 1) => "p".into(),
            _ => "up".into(),
        }
    }

    pub fn mul(&self, other: &SquareClass) -> SquareClass {
        assert_eq!(self.p, other.p);
        let parity = (self.parity + other.parity) % 2;
        let unit = if self.p == 2 {
            self.unit * other.unit % 8
        } else if (self.unit == 1) == (other.unit == 1) {
            1
        } else {
            PrimeField::new(self.p).least_non_residue()
        };
        // p·p = p² is a square; unit parts as computed
        SquareClass { p: self.p, parity, unit }
    }
}

/// Hilbert symbol from square classes (Serre's closed forms).
pub fn hilbert_classes(a: &SquareClass, b: &SquareClass) -> i32 {
    let p = a.p;
    let (al, be) = (a.parity as u64, b.parity as u64);
    if p == 2 {
        let eps = |u: u64| ((u - 1) / 2) % 2;
        let omega = |u: u64| ((u * u - 1) / 8) % 2;
        let e = eps(a.unit) * eps(b.unit) + al * omega(b.unit) + be * omega(a.unit);
        if e % 2 == 0 {
            1
        } else {
            -1
        }
    } else {
        let f = PrimeField::new(p);
        let mut s = if (al * be * ((p - 1) / 2)) % 2 == 0 { 1 } else { -1 };
        if be == 1 {
            s *= f.legendre(a.unit);
        }
        if al == 1 {
            s *= f.legendre(b.unit);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q5() -> QpField {
        QpField::new(5, 30)
    }

    #[test]
    fn basic_arithmetic() {
        let k = q5();
        let a = k.from_i64(10);
        assert_eq!(a.valuation(), Some(1));
        let b = k.inv(&a).unwrap();
        assert_eq!(b.valuation(), Some(-1));
        assert_eq!(k.mul(&a, &b), k.one());
        let c = k.sub(&k.from_i64(7), &k.from_i64(7));
        assert!(c.is_zero());
        let d = k.sub(&k.from_i64(26), &k.from_i64(1));
        assert_eq!(d.valuation(), Some(2));
        assert_eq!(d.abs_precision(), 30);
        assert_eq!(k.to_rational(&d), BigRational::from_integer(25.into()));
    }

    #[test]
    fn rational_round_trip() {
        let k = q5();
        let q = BigRational::new(BigInt::from(-7), BigInt::from(50));
        let a = k.from_rational(&q);
        assert_eq!(a.valuation(), Some(-2));
        let back = k.mul(&a, &k.from_i64(50));
        assert_eq!(back, k.from_i64(-7));
    }

    #[test]
    fn square_classes() {
        let k = q5();
        assert!(k.square_class(&k.from_i64(4)).unwrap().is_trivial());
        assert_eq!(k.square_class(&k.from_i64(2)).unwrap().label(), "u");
        assert_eq!(k.square_class(&k.from_i64(10)).unwrap().label(), "up");
        let k2 = QpField::new(2, 30);
        assert!(!k2.is_square(&k2.from_i64(-1)).unwrap());
        assert!(k2.is_square(&k2.from_i64(17)).unwrap());
        assert!(!k2.is_square(&k2.from_i64(5)).unwrap());
    }

    #[test]
    fn hilbert_examples() {
        let k = q5();
        assert_eq!(k.hilbert_symbol(&k.from_i64(2), &k.from_i64(5)).unwrap(), -1);
        assert_eq!(k.hilbert_symbol(&k.from_i64(1), &k.from_i64(10)).unwrap(), 1);
        assert_eq!(k.hilbert_symbol(&k.from_i64(10), &k.from_i64(-10)).unwrap(), 1);
        assert!(k.hilbert_symbol(&k.zero(), &k.one()).is_err());
    }

    #[test]
    fn square_roots() {
        let k = q5();
        assert_eq!(k.sqrt(&k.from_i64(4)).unwrap(), k.from_i64(2));
        let r = k.sqrt(&k.from_i64(6)).unwrap();
        assert_eq!(k.residue(&r), Some(1));
        assert_eq!(k.mul(&r, &r), k.from_i64(6));
        assert_eq!(k.sqrt(&k.from_i64(5)), Err(PAdicError::OddValuation(1)));
        assert_eq!(k.sqrt(&k.from_i64(2)), Err(PAdicError::NotASquare));
        let k2 = QpField::new(2, 20);
        let r = k2.sqrt(&k2.from_i64(17)).unwrap();
        let diff = k2.sub(&k2.mul(&r, &r), &k2.from_i64(17));
        assert!(diff.valuation_or_precision() >= 19);
    }

    #[test]
    fn json_round_trip() {
        let k = q5();
        let a = k.from_i64(-75);
        let j = k.to_json(&a);
        assert_eq!(j.v, Some(2));
        let s = serde_json::to_string(&j).unwrap();
        assert!(s.contains("\"N\":30"));
        assert_eq!(k.from_json(&serde_json::from_str(&s).unwrap()).unwrap(), a);
        let z = k.to_json(&PAdic::zero_to(12));
        assert_eq!(z.v, None);
    }
}
