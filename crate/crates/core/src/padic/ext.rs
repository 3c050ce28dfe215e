use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::{PAdic, PAdicError, QpField, SquareClass};
use crate::ring::{rational_valuation, Context, Field, PrimeField, Ring};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtKind {
    /// d is a square: L = Q_p.
    Degenerate,
    Unramified,
    Ramified,
}

impl ExtKind {
    pub fn of_class(c: &SquareClass) -> Self {
        if c.is_trivial() {
            ExtKind::Degenerate
        } else if c.parity == 1 {
            ExtKind::Ramified
        } else {
            ExtKind::Unramified
        }
    }

    pub fn ramification(&self) -> u32 {
        if *self == ExtKind::Ramified {
            2
        } else {
            1
        }
    }

    /// Valuation in uniformizer units from the component valuations
    /// (`None` = zero); `d` has valuation 1 in the ramified case.
    pub fn combine_valuations(&self, va: Option<i64>, vb: Option<i64>) -> Option<i64> {
        let (a, b) = match self {
            ExtKind::Degenerate => return va,
            ExtKind::Unramified => (va, vb),
            ExtKind::Ramified => (va.map(|v| 2 * v), vb.map(|v| 2 * v + 1)),
        };
        match (a, b) {
            (None, None) => None,
            (Some(x), None) | (None, Some(x)) => Some(x),
            (Some(x), Some(y)) => Some(x.min(y)),
        }
    }
}

/// L = Q_p(√d) with d the canonical representative of its square class
/// (odd p). Elements are pairs `(a, b)` meaning `a + b√d`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadExt {
    base: QpField,
    class: SquareClass,
    d: PAdic,
    kind: ExtKind,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadElem {
    pub a: PAdic,
    pub b: PAdic,
}

impl QuadExt {
    pub fn new(base: QpField, class: SquareClass) -> Result<Self, PAdicError> {
        if class.p != base.p() {
            return Err(PAdicError::Invalid("square class of a different prime".into()));
        }
        let kind = ExtKind::of_class(&class);
        if base.p() == 2 && kind != ExtKind::Degenerate {
            return Err(PAdicError::Invalid("quadratic extensions of Q_2 are not supported".into()));
        }
        let d = base.from_int(&class.representative());
        Ok(QuadExt { base, class, d, kind })
    }

    /// Q_p(√a) for a nonzero a ∈ Q_p.
    pub fn adjoining_sqrt(base: QpField, a: &PAdic) -> Result<Self, PAdicError> {
        let class = base.square_class(a)?;
        Self::new(base, class)
    }

    /// The unramified quadratic extension.
    pub fn unramified(base: QpField) -> Result<Self, PAdicError> {
        let u = PrimeField::new(base.p()).least_non_residue();
        Self::new(base.clone(), SquareClass { p: base.p(), parity: 0, unit: u })
    }

    pub fn degenerate(base: QpField) -> Self {
        let p = base.p();
        Self::new(base, SquareClass { p, parity: 0, unit: 1 }).expect("trivial class")
    }

    pub fn base(&self) -> &QpField {
        &self.base
    }
    pub fn kind(&self) -> ExtKind {
        self.kind
    }
    pub fn class(&self) -> SquareClass {
        self.class
    }
    pub fn d(&self) -> BigInt {
        self.class.representative()
    }

    pub fn embed(&self, a: &PAdic) -> QuadElem {
        QuadElem { a: a.clone(), b: PAdic::exact_zero() }
    }

    pub fn sqrt_d(&self) -> QuadElem {
        if self.kind == ExtKind::Degenerate {
            return QuadElem { a: self.base.one(), b: PAdic::exact_zero() };
        }
        QuadElem { a: PAdic::exact_zero(), b: self.base.one() }
    }

    pub fn conj(&self, x: &QuadElem) -> QuadElem {
        QuadElem { a: x.a.clone(), b: self.base.neg(&x.b) }
    }

    /// `a² − d b²` ∈ Q_p.
    pub fn norm(&self, x: &QuadElem) -> PAdic {
        let k = &self.base;
        k.sub(&k.mul(&x.a, &x.a), &k.mul(&self.d, &k.mul(&x.b, &x.b)))
    }

    /// Valuation in uniformizer units.
    pub fn valuation(&self, x: &QuadElem) -> Option<i64> {
        self.kind.combine_valuations(x.a.valuation(), x.b.valuation())
    }

    pub fn abs_precision(&self, x: &QuadElem) -> i64 {
        match self.kind {
            ExtKind::Degenerate => x.a.abs_precision(),
            ExtKind::Unramified => x.a.abs_precision().min(x.b.abs_precision()),
            ExtKind::Ramified => (2 * x.a.abs_precision()).min(2 * x.b.abs_precision() + 1),
        }
    }

    /// Field descriptor for certificates and JSON output.
    pub fn descriptor(&self) -> ExtDescriptor {
        ExtDescriptor {
            p: self.base.p(),
            precision: self.base.precision(),
            d: self.d().to_string(),
            class: self.class.label(),
            kind: self.kind,
            residue_field_size: if self.kind == ExtKind::Unramified { self.base.p() * self.base.p() } else { self.base.p() },
        }
    }

    pub fn to_exact(&self, x: &QuadElem) -> (BigRational, BigRational) {
        (self.base.to_rational(&x.a), self.base.to_rational(&x.b))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtDescriptor {
    pub p: u64,
    pub precision: u32,
    pub d: String,
    pub class: String,
    pub kind: ExtKind,
    pub residue_field_size: u64,
}

impl Ring for QuadExt {
    type Elem = QuadElem;

    fn zero(&self) -> QuadElem {
        QuadElem { a: PAdic::exact_zero(), b: PAdic::exact_zero() }
    }
    fn one(&self) -> QuadElem {
        self.embed(&self.base.one())
    }
    fn from_int(&self, n: &BigInt) -> QuadElem {
        self.embed(&self.base.from_int(n))
    }
    fn add(&self, x: &QuadElem, y: &QuadElem) -> QuadElem {
        QuadElem { a: self.base.add(&x.a, &y.a), b: self.base.add(&x.b, &y.b) }
    }
    fn neg(&self, x: &QuadElem) -> QuadElem {
        QuadElem { a: self.base.neg(&x.a), b: self.base.neg(&x.b) }
    }
    fn mul(&self, x: &QuadElem, y: &QuadElem) -> QuadElem {
        let k = &self.base;
        if x.b.is_exact_zero() && y.b.is_exact_zero() {
            return self.embed(&k.mul(&x.a, &y.a));
        }
        let ac = k.mul(&x.a, &y.a);
        let bd = k.mul(&k.mul(&x.b, &y.b), &self.d);
        let ad = k.mul(&x.a, &y.b);
        let bc = k.mul(&x.b, &y.a);
        QuadElem { a: k.add(&ac, &bd), b: k.add(&ad, &bc) }
    }
    fn is_zero(&self, x: &QuadElem) -> bool {
        x.a.is_zero() && x.b.is_zero()
    }
    fn characteristic(&self) -> u64 {
        0
    }
    fn context(&self) -> Context {
        Context::QuadExt { p: self.base.p(), precision: self.base.precision(), d: self.d().to_string() }
    }
}

impl Field for QuadExt {
    fn inv(&self, x: &QuadElem) -> Option<QuadElem> {
        if self.is_zero(x) {
            return None;
        }
        if x.b.is_exact_zero() {
            return Some(self.embed(&self.base.inv(&x.a)?));
        }
        let ni = self.base.inv(&self.norm(x))?;
        let c = self.conj(x);
        Some(QuadElem { a: self.base.mul(&c.a, &ni), b: self.base.mul(&c.b, &ni) })
    }

    fn pivot_weight(&self, x: &QuadElem) -> Option<i64> {
        self.valuation(x)
    }
}

/// Exact arithmetic in Q(√d) for a squarefree-class integer d; used to
/// re-verify p-adic results on rational representatives.
#[derive(Clone, Debug, PartialEq)]
pub struct RatQuad {
    pub d: BigInt,
}

impl RatQuad {
    pub fn new(d: BigInt) -> Self {
        RatQuad { d }
    }

    /// Valuation in uniformizer units of `L = Q_p(√d)` (kind decides the normalization).
    pub fn valuation(&self, kind: ExtKind, p: u64, x: &(BigRational, BigRational)) -> Option<i64> {
        if kind == ExtKind::Degenerate {
            // d = 1: a + b√1 = a + b
            return rational_valuation(&(&x.0 + &x.1), p);
        }
        kind.combine_valuations(rational_valuation(&x.0, p), rational_valuation(&x.1, p))
    }
}

impl Ring for RatQuad {
    type Elem = (BigRational, BigRational);

    fn zero(&self) -> Self::Elem {
        (BigRational::zero(), BigRational::zero())
    }
    fn one(&self) -> Self::Elem {
        (BigRational::one(), BigRational::zero())
    }
    fn from_int(&self, n: &BigInt) -> Self::Elem {
        (BigRational::from_integer(n.clone()), BigRational::zero())
    }
    fn add(&self, x: &Self::Elem, y: &Self::Elem) -> Self::Elem {
        (&x.0 + &y.0, &x.1 + &y.1)
    }
    fn neg(&self, x: &Self::Elem) -> Self::Elem {
        (-&x.0, -&x.1)
    }
    fn mul(&self, x: &Self::Elem, y: &Self::Elem) -> Self::Elem {
        if x.1.is_zero() && y.1.is_zero() {
            return (&x.0 * &y.0, BigRational::zero());
        }
        let d = BigRational::from_integer(self.d.clone());
        (&x.0 * &y.0 + d * &x.1 * &y.1, &x.0 * &y.1 + &x.1 * &y.0)
    }
    fn is_zero(&self, x: &Self::Elem) -> bool {
        x.0.is_zero() && x.1.is_zero()
    }
    fn characteristic(&self) -> u64 {
        0
    }
    fn context(&self) -> Context {
        Context::RatQuad { d: self.d.to_string() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::padic::LocalField;

    fn l5() -> QuadExt {
        QuadExt::unramified(QpField::new(5, 30)).unwrap()
    }

    fn elem(l: &QuadExt, a: i64, b: i64) -> QuadElem {
        QuadElem { a: l.base().from_i64(a), b: l.base().from_i64(b) }
    }

    #[test]
    fn norm_conj_inverse() {
        let l = l5();
        let x = elem(&l, 3, 7);
        let y = elem(&l, -4, 10);
        assert_eq!(l.norm(&x), l.base().from_i64(9 - 2 * 49));
        assert_eq!(l.conj(&l.conj(&x)), x);
        assert!(l.base().eq_approx(&l.norm(&l.mul(&x, &y)), &l.base().mul(&l.norm(&x), &l.norm(&y))));
        assert!(l.eq_approx(&l.mul(&x, &l.inv(&x).unwrap()), &l.one()));
        assert!(l.eq_approx(&l.conj(&l.mul(&x, &y)), &l.mul(&l.conj(&x), &l.conj(&y))));
    }

    #[test]
    fn residue_field_of_unramified_extension_has_p_squared_elements() {
        let l = l5();
        let mut seen = std::collections::BTreeSet::new();
        for a in 0..10 {
            for b in 0..10 {
                seen.insert(l.residue(&elem(&l, a, b)).unwrap());
            }
        }
        assert_eq!(seen.len(), 25);
        assert_eq!(l.residue_field().size(), 25);
    }

    #[test]
    fn ramified_valuations() {
        let k = QpField::new(5, 30);
        let l = QuadExt::adjoining_sqrt(k.clone(), &k.from_i64(5)).unwrap();
        assert_eq!(l.kind(), ExtKind::Ramified);
        assert_eq!(l.valuation(&l.sqrt_d()), Some(1));
        assert_eq!(l.valuation(&l.from_i64(5)), Some(2));
        let pi2 = l.mul(&l.sqrt_d(), &l.sqrt_d());
        assert!(l.eq_approx(&pi2, &l.from_i64(5)));
    }

    #[test]
    fn exact_ring_agrees() {
        let r = RatQuad::new(BigInt::from(2));
        let x = (BigRational::from_integer(3.into()), BigRational::from_integer(1.into()));
        let sq = r.mul(&x, &x);
        assert_eq!(sq, (BigRational::from_integer(11.into()), BigRational::from_integer(6.into())));
        assert_eq!(r.valuation(ExtKind::Unramified, 5, &(BigRational::from_integer(25.into()), BigRational::from_integer(5.into()))), Some(1));
    }
}
