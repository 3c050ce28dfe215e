use thiserror::Error;

use super::{ExtKind, PAdic, PAdicError, QpField, QuadElem, QuadExt, ResidueField};
use crate::forms::Form;
use crate::linalg;
use crate::ring::{Field, Ring};

/// A complete discretely valued field at finite working precision.
/// Valuations are in units of a uniformizer π (so `v(p) = e`).
pub trait LocalField: Field {
    fn prime(&self) -> u64;
    fn precision(&self) -> u32;
    fn ramification(&self) -> u32;
    /// `None` for an element that is zero to its known precision.
    fn valuation(&self, a: &Self::Elem) -> Option<i64>;
    fn abs_precision(&self, a: &Self::Elem) -> i64;
    fn residue_field(&self) -> ResidueField;
    /// Reduction mod π; `None` when `a` is not integral.
    fn residue(&self, a: &Self::Elem) -> Option<u64>;
    /// A fixed lift of a residue class.
    fn lift(&self, r: u64) -> Self::Elem;
    fn uniformizer_pow(&self, k: i64) -> Self::Elem;
    fn from_qp(&self, a: &PAdic) -> Self::Elem;

    /// Valuation reading a zero as its absolute precision.
    fn valuation_or_precision(&self, a: &Self::Elem) -> i64 {
        self.valuation(a).unwrap_or_else(|| self.abs_precision(a))
    }

    /// Multiplies by π^(-m) where m is the minimal valuation, making the
    /// entries integral with at least one unit. Returns `m` (None if all zero).
    fn make_primitive(&self, v: &mut [Self::Elem]) -> Option<i64> {
        let m = v.iter().filter_map(|x| self.valuation(x)).min()?;
        if m != 0 {
            let s = self.uniformizer_pow(-m);
            for x in v.iter_mut() {
                *x = self.mul(x, &s);
            }
        }
        Some(m)
    }
}

impl LocalField for QpField {
    fn prime(&self) -> u64 {
        self.p()
    }
    fn precision(&self) -> u32 {
        QpField::precision(self)
    }
    fn ramification(&self) -> u32 {
        1
    }
    fn valuation(&self, a: &PAdic) -> Option<i64> {
        a.valuation()
    }
    fn abs_precision(&self, a: &PAdic) -> i64 {
        a.abs_precision()
    }
    fn residue_field(&self) -> ResidueField {
        ResidueField::prime(self.p())
    }
    fn residue(&self, a: &PAdic) -> Option<u64> {
        QpField::residue(self, a)
    }
    fn lift(&self, r: u64) -> PAdic {
        self.from_i64(r as i64)
    }
    fn uniformizer_pow(&self, k: i64) -> PAdic {
        self.p_power(k)
    }
    fn from_qp(&self, a: &PAdic) -> PAdic {
        a.clone()
    }
}

impl LocalField for QuadExt {
    fn prime(&self) -> u64 {
        self.base().p()
    }
    fn precision(&self) -> u32 {
        self.base().precision()
    }
    fn ramification(&self) -> u32 {
        self.kind().ramification()
    }
    fn valuation(&self, a: &QuadElem) -> Option<i64> {
        QuadExt::valuation(self, a)
    }
    fn abs_precision(&self, a: &QuadElem) -> i64 {
        QuadExt::abs_precision(self, a)
    }
    fn residue_field(&self) -> ResidueField {
        let p = self.base().p();
        match self.kind() {
            ExtKind::Unramified => ResidueField::quadratic(p, self.class().unit),
            _ => ResidueField::prime(p),
        }
    }
    fn residue(&self, x: &QuadElem) -> Option<u64> {
        let k = self.base();
        let ra = k.residue(&x.a);
        match self.kind() {
            ExtKind::Degenerate => ra,
            ExtKind::Unramified => Some(ra? + k.p() * k.residue(&x.b)?),
            // √d ≡ 0 mod π; b must be integral
            ExtKind::Ramified => {
                if x.b.valuation().map_or(false, |v| v < 0) {
                    return None;
                }
                ra
            }
        }
    }
    fn lift(&self, r: u64) -> QuadElem {
        let p = self.base().p();
        match self.kind() {
            ExtKind::Unramified => QuadElem { a: self.base().from_i64((r % p) as i64), b: self.base().from_i64((r / p) as i64) },
            _ => self.embed(&self.base().from_i64(r as i64)),
        }
    }
    fn uniformizer_pow(&self, k: i64) -> QuadElem {
        let base = self.base();
        if self.kind() != ExtKind::Ramified {
            return self.embed(&base.p_power(k));
        }
        // π = √d with v_p(d) = 1: π^(2m) = d^m, π^(2m+1) = d^m √d
        let m = k.div_euclid(2);
        let d = base.from_int(&self.d());
        let dm = if m >= 0 { base.pow(&d, m as u32) } else { base.pow(&base.inv(&d).unwrap(), (-m) as u32) };
        if k.rem_euclid(2) == 0 {
            self.embed(&dm)
        } else {
            QuadElem { a: PAdic::exact_zero(), b: dm }
        }
    }
    fn from_qp(&self, a: &PAdic) -> QuadElem {
        self.embed(a)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LiftError {
    #[error("Newton condition fails: v(f(x0)) = {fv:?}, v(f'(x0)) = {dv:?}")]
    NewtonCondition { fv: Option<i64>, dv: Option<i64> },
    #[error("starting point is not a zero mod p")]
    NotAResidueZero,
    #[error("Jacobian is rank deficient mod p (rank {rank}, need {need})")]
    RankDeficient { rank: usize, need: usize },
    #[error("starting point is not integral")]
    NotIntegral,
    #[error("no convergence within {0} Newton steps")]
    NoConvergence(usize),
    #[error(transparent)]
    PAdic(#[from] PAdicError),
}

const NEWTON_BUDGET: usize = 80;

/// Square root in a local field of odd residue characteristic; the root's
/// residue is the first square root found in the residue field's order.
pub fn local_sqrt<K: LocalField>(k: &K, a: &K::Elem) -> Result<K::Elem, PAdicError> {
    if k.prime() == 2 {
        return Err(PAdicError::Invalid("generic square roots need odd p".into()));
    }
    let Some(v) = k.valuation(a) else {
        return Ok(k.zero());
    };
    if v % 2 != 0 {
        return Err(PAdicError::OddValuation(v));
    }
    let w = k.mul(a, &k.uniformizer_pow(-v));
    let rf = k.residue_field();
    let r = k.residue(&w).ok_or_else(|| PAdicError::Invalid("non-integral unit part".into()))?;
    let s = rf.elements().skip(1).find(|x| rf.mul(x, x) == r).ok_or(PAdicError::NotASquare)?;
    let mut x = k.lift(s);
    let half = k.inv(&k.from_i64(2)).unwrap();
    let target = (k.precision() * k.ramification()) as i64;
    for _ in 0..NEWTON_BUDGET {
        let err = k.sub(&k.mul(&x, &x), &w);
        if k.valuation(&err).map_or(true, |e| e >= target) {
            break;
        }
        x = k.mul(&k.add(&x, &k.div(&w, &x).unwrap()), &half);
    }
    Ok(k.mul(&x, &k.uniformizer_pow(v / 2)))
}

/// Sparse inhomogeneous polynomial with coefficients in a ring.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly<E> {
    pub n_vars: usize,
    pub terms: Vec<(Vec<u32>, E)>,
}

impl<E: Clone + std::fmt::Debug + PartialEq + Send + Sync> Poly<E> {
    pub fn new(n_vars: usize, terms: Vec<(Vec<u32>, E)>) -> Self {
        assert!(terms.iter().all(|(e, _)| e.len() == n_vars));
        Poly { n_vars, terms }
    }

    pub fn from_form(form: &Form<E>) -> Self {
        Poly {
            n_vars: form.n_vars(),
            terms: form.terms().map(|(m, c)| (m.0.iter().map(|&e| e as u32).collect(), c.clone())).collect(),
        }
    }

    /// Univariate polynomial from ascending coefficients.
    pub fn univariate(coeffs: Vec<E>) -> Self {
        Poly { n_vars: 1, terms: coeffs.into_iter().enumerate().map(|(i, c)| (vec![i as u32], c)).collect() }
    }

    pub fn map<R: Ring>(&self, f: impl Fn(&E) -> R::Elem) -> Poly<R::Elem> {
        Poly { n_vars: self.n_vars, terms: self.terms.iter().map(|(e, c)| (e.clone(), f(c))).collect() }
    }

    pub fn eval<R: Ring<Elem = E>>(&self, ring: &R, x: &[E]) -> E {
        let mut acc = ring.zero();
        for (e, c) in &self.terms {
            let mut t = c.clone();
            for (xi, &k) in x.iter().zip(e) {
                if k > 0 {
                    t = ring.mul(&t, &ring.pow(xi, k));
                }
            }
            acc = ring.add(&acc, &t);
        }
        acc
    }

    pub fn partial<R: Ring<Elem = E>>(&self, ring: &R, i: usize) -> Poly<E> {
        let terms = self
            .terms
            .iter()
            .filter(|(e, _)| e[i] > 0)
            .map(|(e, c)| {
                let mut e2 = e.clone();
                e2[i] -= 1;
                (e2, ring.scale_int(c, e[i] as i64))
            })
            .collect();
        Poly { n_vars: self.n_vars, terms }
    }
}

/// Newton lifting of a root of a univariate polynomial (ascending
/// coefficients) from an approximate root `x0` satisfying
/// `v(f(x0)) > 2·v(f'(x0))`. Stops when `f(x)` is zero to the
/// working precision.
pub fn hensel_lift_univariate<K: LocalField>(k: &K, coeffs: &[K::Elem], x0: &K::Elem) -> Result<K::Elem, LiftError> {
    let f = Poly::univariate(coeffs.to_vec());
    let df = f.partial(k, 0);
    let mut x = x0.clone();
    let fv = k.valuation(&f.eval(k, std::slice::from_ref(&x)));
    let dv = k.valuation(&df.eval(k, std::slice::from_ref(&x)));
    match (fv, dv) {
        (None, _) => return Ok(x),
        (Some(a), Some(b)) if a > 2 * b => {}
        _ => return Err(LiftError::NewtonCondition { fv, dv }),
    }
    let target = (k.precision() * k.ramification()) as i64;
    for _ in 0..NEWTON_BUDGET {
        let fx = f.eval(k, std::slice::from_ref(&x));
        match k.valuation(&fx) {
            None => return Ok(x),
            Some(v) if v >= target => return Ok(x),
            _ => {}
        }
        let d = df.eval(k, std::slice::from_ref(&x));
        let step = k.div(&fx, &d).ok_or(LiftError::NewtonCondition { fv, dv: None })?;
        x = k.sub(&x, &step);
    }
    Err(LiftError::NoConvergence(NEWTON_BUDGET))
}

/// Multivariate Newton lifting from an integral point that is a zero of
/// every polynomial mod π and at which the Jacobian has full row rank mod π.
/// Only the coordinates of a unit minor of the Jacobian are moved.
pub fn hensel_lift_system<K: LocalField>(k: &K, polys: &[Poly<K::Elem>], x0: &[K::Elem]) -> Result<Vec<K::Elem>, LiftError> {
    let m = polys.len();
    let n = x0.len();
    if x0.iter().any(|x| k.residue(x).is_none()) {
        return Err(LiftError::NotIntegral);
    }
    for f in polys {
        if k.valuation(&f.eval(k, x0)).map_or(false, |v| v < 1) {
            return Err(LiftError::NotAResidueZero);
        }
    }
    let jac: Vec<Vec<Poly<K::Elem>>> = polys.iter().map(|f| (0..n).map(|i| f.partial(k, i)).collect()).collect();
    let eval_jac = |x: &[K::Elem]| -> Vec<Vec<K::Elem>> {
        jac.iter().map(|row| row.iter().map(|d| d.eval(k, x)).collect()).collect()
    };
    let rf = k.residue_field();
    let j0 = eval_jac(x0);
    let mut red: Vec<Vec<u64>> = Vec::with_capacity(m);
    for row in &j0 {
        let r: Option<Vec<u64>> = row.iter().map(|e| k.residue(e)).collect();
        red.push(r.ok_or(LiftError::NotIntegral)?);
    }
    let pivots = linalg::row_reduce(&rf, &mut red);
    if pivots.len() < m {
        return Err(LiftError::RankDeficient { rank: pivots.len(), need: m });
    }
    let cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
    let target = (k.precision() * k.ramification()) as i64;
    let mut x = x0.to_vec();
    for _ in 0..NEWTON_BUDGET {
        let fx: Vec<K::Elem> = polys.iter().map(|f| f.eval(k, &x)).collect();
        if fx.iter().all(|v| k.valuation(v).map_or(true, |v| v >= target)) {
            return Ok(x);
        }
        let j = eval_jac(&x);
        let sub: Vec<Vec<K::Elem>> = j.iter().map(|row| cols.iter().map(|&c| row[c].clone()).collect()).collect();
        let rhs: Vec<K::Elem> = fx.iter().map(|v| k.neg(v)).collect();
        let delta = linalg::solve(k, &sub, &rhs).ok_or(LiftError::RankDeficient { rank: m - 1, need: m })?;
        for (&c, d) in cols.iter().zip(&delta) {
            x[c] = k.add(&x[c], d);
        }
    }
    Err(LiftError::NoConvergence(NEWTON_BUDGET))
}
