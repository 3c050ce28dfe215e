//! Homogeneous forms of degree 1–3 and the polar (trilinear) machinery.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::ring::{Context, Field, PrimeField, Rationals, Ring};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("expected a form of degree {expected}, got degree {got}")]
    WrongDegree { expected: u32, got: u32 },
    #[error("unsupported degree {0} (forms of degree 1 to 3 only)")]
    UnsupportedDegree(u32),
    #[error("monomial {exp:?} does not have degree {degree}")]
    NotHomogeneous { exp: Vec<u8>, degree: u32 },
    #[error("zero coefficient stored for monomial {0:?}")]
    ZeroCoefficient(Vec<u8>),
    #[error("monomial {0:?} listed twice")]
    DuplicateMonomial(Vec<u8>),
    #[error("basis vectors are linearly dependent")]
    DependentBasis,
    #[error("coefficient context mismatch: {0}")]
    ContextMismatch(String),
    #[error("parse error: {0}")]
    Parse(String),
}

/// Exponent vector of a monomial.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(pub Vec<u8>);

impl Monomial {
    pub fn degree(&self) -> u32 {
        self.0.iter().map(|&e| e as u32).sum()
    }

    /// Variable indices with multiplicity, ascending.
    pub fn variables(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(3);
        for (i, &e) in self.0.iter().enumerate() {
            for _ in 0..e {
                out.push(i);
            }
        }
        out
    }

    pub fn from_variables(n: usize, vars: &[usize]) -> Self {
        let mut exp = vec![0u8; n];
        for &v in vars {
            exp[v] += 1;
        }
        Monomial(exp)
    }
}

/// A homogeneous form stored as a sparse map from exponent vectors to
/// nonzero coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct Form<E> {
    n_vars: usize,
    degree: u32,
    terms: BTreeMap<Monomial, E>,
    context: Context,
}

impl<E: Clone + fmt::Debug + PartialEq> Form<E> {
    pub fn n_vars(&self) -> usize {
        self.n_vars
    }
    pub fn degree(&self) -> u32 {
        self.degree
    }
    pub fn context(&self) -> &Context {
        &self.context
    }
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &E)> {
        self.terms.iter()
    }
    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }
    pub fn coefficient(&self, exp: &[u8]) -> Option<&E> {
        self.terms.get(&Monomial(exp.to_vec()))
    }
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

impl<E: Clone + fmt::Debug + PartialEq + Send + Sync> Form<E> {
    /// Validating constructor: rejects inhomogeneous, duplicate or zero terms.
    pub fn new<R: Ring<Elem = E>>(
        ring: &R,
        n_vars: usize,
        degree: u32,
        terms: impl IntoIterator<Item = (Vec<u8>, E)>,
    ) -> Result<Self, FormError> {
        if n_vars == 0 {
            return Err(FormError::DimensionMismatch { expected: 1, got: 0 });
        }
        if !(1..=3).contains(&degree) {
            return Err(FormError::UnsupportedDegree(degree));
        }
        let mut map = BTreeMap::new();
        for (exp, c) in terms {
            if exp.len() != n_vars {
                return Err(FormError::DimensionMismatch { expected: n_vars, got: exp.len() });
            }
            let m = Monomial(exp);
            if m.degree() != degree {
                return Err(FormError::NotHomogeneous { exp: m.0, degree });
            }
            if ring.is_zero(&c) {
                return Err(FormError::ZeroCoefficient(m.0));
            }
            if map.contains_key(&m) {
                return Err(FormError::DuplicateMonomial(m.0));
            }
            map.insert(m, c);
        }
        Ok(Form { n_vars, degree, terms: map, context: ring.context() })
    }

    /// Accumulating constructor for computed forms: sums repeated monomials
    /// and drops coefficients that vanish in the context.
    pub fn from_accumulated<R: Ring<Elem = E>>(
        ring: &R,
        n_vars: usize,
        degree: u32,
        terms: impl IntoIterator<Item = (Monomial, E)>,
    ) -> Self {
        let mut map: BTreeMap<Monomial, E> = BTreeMap::new();
        for (m, c) in terms {
            debug_assert_eq!(m.degree(), degree);
            match map.get_mut(&m) {
                Some(old) => *old = ring.add(old, &c),
                None => {
                    map.insert(m, c);
                }
            }
        }
        map.retain(|_, c| !ring.is_zero(c));
        Form { n_vars, degree, terms: map, context: ring.context() }
    }

    pub fn map_coeffs<R2: Ring>(&self, ring: &R2, f: impl Fn(&E) -> R2::Elem) -> Form<R2::Elem> {
        Form::from_accumulated(
            ring,
            self.n_vars,
            self.degree,
            self.terms.iter().map(|(m, c)| (m.clone(), f(c))),
        )
    }

    pub fn try_map_coeffs<R2: Ring>(
        &self,
        ring: &R2,
        f: impl Fn(&E) -> Option<R2::Elem>,
    ) -> Result<Form<R2::Elem>, FormError> {
        let mut out = Vec::with_capacity(self.terms.len());
        for (m, c) in &self.terms {
            let c2 = f(c).ok_or_else(|| {
                FormError::ContextMismatch(format!("coefficient {c:?} has no image in {}", ring.context()))
            })?;
            out.push((m.clone(), c2));
        }
        Ok(Form::from_accumulated(ring, self.n_vars, self.degree, out))
    }

    pub fn scale<R: Ring<Elem = E>>(&self, ring: &R, c: &E) -> Self {
        self.map_coeffs(ring, |x| ring.mul(x, c))
    }

    /// Direct sum placement: embeds into `n_total` variables starting at `offset`.
    pub fn embed<R: Ring<Elem = E>>(&self, ring: &R, n_total: usize, offset: usize) -> Self {
        assert!(offset + self.n_vars <= n_total);
        let terms = self.terms.iter().map(|(m, c)| {
            let mut exp = vec![0u8; n_total];
            exp[offset..offset + self.n_vars].copy_from_slice(&m.0);
            (Monomial(exp), c.clone())
        });
        Form::from_accumulated(ring, n_total, self.degree, terms)
    }

    pub fn add_form<R: Ring<Elem = E>>(&self, ring: &R, other: &Self) -> Result<Self, FormError> {
        if self.n_vars != other.n_vars {
            return Err(FormError::DimensionMismatch { expected: self.n_vars, got: other.n_vars });
        }
        if self.degree != other.degree {
            return Err(FormError::WrongDegree { expected: self.degree, got: other.degree });
        }
        let terms = self.terms.iter().chain(other.terms.iter()).map(|(m, c)| (m.clone(), c.clone()));
        Ok(Form::from_accumulated(ring, self.n_vars, self.degree, terms))
    }

    fn check_len(&self, x: &[E]) -> Result<(), FormError> {
        if x.len() != self.n_vars {
            return Err(FormError::DimensionMismatch { expected: self.n_vars, got: x.len() });
        }
        Ok(())
    }

    pub fn evaluate<R: Ring<Elem = E>>(&self, ring: &R, x: &[E]) -> Result<E, FormError> {
        self.check_len(x)?;
        Ok(self.eval_unchecked(ring, x))
    }

    pub(crate) fn eval_unchecked<R: Ring<Elem = E>>(&self, ring: &R, x: &[E]) -> E {
        let mut acc = ring.zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for v in m.variables() {
                t = ring.mul(&t, &x[v]);
            }
            acc = ring.add(&acc, &t);
        }
        acc
    }

    pub fn gradient<R: Ring<Elem = E>>(&self, ring: &R, x: &[E]) -> Result<Vec<E>, FormError> {
        self.check_len(x)?;
        Ok(self.gradient_unchecked(ring, x))
    }

    pub(crate) fn gradient_unchecked<R: Ring<Elem = E>>(&self, ring: &R, x: &[E]) -> Vec<E> {
        let mut g = vec![ring.zero(); self.n_vars];
        for (m, c) in &self.terms {
            for (i, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let mut t = ring.scale_int(c, e as i64);
                for (j, &ej) in m.0.iter().enumerate() {
                    let k = if j == i { ej - 1 } else { ej };
                    for _ in 0..k {
                        t = ring.mul(&t, &x[j]);
                    }
                }
                g[i] = ring.add(&g[i], &t);
            }
        }
        g
    }

    /// Coefficients `(A, B, C, D)` of `F(s·x + t·y) = A s³ + B s²t + C st² + D t³`
    /// (generally `[c_0, …, c_d]` with `c_k` the coefficient of `s^{d-k} t^k`),
    /// computed by substitution, so valid in every characteristic.
    pub fn binary_restriction_coeffs<R: Ring<Elem = E>>(
        &self,
        ring: &R,
        x: &[E],
        y: &[E],
    ) -> Result<Vec<E>, FormError> {
        self.check_len(x)?;
        self.check_len(y)?;
        Ok(self.binary_unchecked(ring, x, y))
    }

    pub(crate) fn binary_unchecked<R: Ring<Elem = E>>(&self, ring: &R, x: &[E], y: &[E]) -> Vec<E> {
        let d = self.degree as usize;
        let mut out = vec![ring.zero(); d + 1];
        for (m, c) in &self.terms {
            // poly[k] = coefficient of s^{deg-k} t^k
            let mut poly = vec![c.clone()];
            for v in m.variables() {
                let mut next = vec![ring.zero(); poly.len() + 1];
                for (k, a) in poly.iter().enumerate() {
                    next[k] = ring.add(&next[k], &ring.mul(a, &x[v]));
                    next[k + 1] = ring.add(&next[k + 1], &ring.mul(a, &y[v]));
                }
                poly = next;
            }
            for (o, a) in out.iter_mut().zip(&poly) {
                *o = ring.add(o, a);
            }
        }
        out
    }

    /// Substitutes `x = Σ_a u_a · vectors[a]` without checking independence.
    pub fn substitute<R: Ring<Elem = E>>(&self, ring: &R, vectors: &[Vec<E>]) -> Result<Self, FormError> {
        for v in vectors {
            self.check_len(v)?;
        }
        Ok(self.substitute_unchecked(ring, vectors))
    }

    pub(crate) fn substitute_unchecked<R: Ring<Elem = E>>(&self, ring: &R, vectors: &[Vec<E>]) -> Self {
        let k = vectors.len();
        // row i: the linear form in u giving x_i
        let lin: Vec<Vec<E>> = (0..self.n_vars)
            .map(|i| vectors.iter().map(|v| v[i].clone()).collect())
            .collect();
        let quad_index = SymIndex::new(k, 2);
        let cubic_index = SymIndex::new(k, 3);
        match self.degree {
            1 => {
                let mut acc = vec![ring.zero(); k];
                for (m, c) in &self.terms {
                    let i = m.variables()[0];
                    for a in 0..k {
                        acc[a] = ring.add(&acc[a], &ring.mul(c, &lin[i][a]));
                    }
                }
                let terms = (0..k).map(|a| (Monomial::from_variables(k, &[a]), acc[a].clone()));
                Form::from_accumulated(ring, k, 1, terms)
            }
            2 => {
                let mut acc = vec![ring.zero(); quad_index.len()];
                for (m, c) in &self.terms {
                    let vs = m.variables();
                    let prod = linear_product(ring, &lin[vs[0]], &lin[vs[1]], &quad_index);
                    for (o, t) in acc.iter_mut().zip(&prod) {
                        *o = ring.add(o, &ring.mul(c, t));
                    }
                }
                Form::from_accumulated(ring, k, 2, quad_index.monomials(k).into_iter().zip(acc))
            }
            3 => {
                // F = Σ_i x_i · G_i with G_i collecting monomials whose smallest variable is i
                let mut quad_cache: BTreeMap<(usize, usize), Vec<E>> = BTreeMap::new();
                let mut grouped: BTreeMap<usize, Vec<E>> = BTreeMap::new();
                for (m, c) in &self.terms {
                    let vs = m.variables();
                    let q = quad_cache
                        .entry((vs[1], vs[2]))
                        .or_insert_with(|| linear_product(ring, &lin[vs[1]], &lin[vs[2]], &quad_index));
                    let g = grouped.entry(vs[0]).or_insert_with(|| vec![ring.zero(); quad_index.len()]);
                    for (o, t) in g.iter_mut().zip(q.iter()) {
                        *o = ring.add(o, &ring.mul(c, t));
                    }
                }
                let mut acc = vec![ring.zero(); cubic_index.len()];
                let quad_monos = quad_index.tuples();
                for (i, g) in grouped {
                    for (qi, gq) in g.iter().enumerate() {
                        if ring.is_zero(gq) {
                            continue;
                        }
                        let (a, b) = (quad_monos[qi][0], quad_monos[qi][1]);
                        for (c_idx, l) in lin[i].iter().enumerate() {
                            if ring.is_zero(l) {
                                continue;
                            }
                            let slot = cubic_index.index(&[a, b, c_idx]);
                            acc[slot] = ring.add(&acc[slot], &ring.mul(gq, l));
                        }
                    }
                }
                Form::from_accumulated(ring, k, 3, cubic_index.monomials(k).into_iter().zip(acc))
            }
            d => unreachable!("degree {d} forms are rejected at construction"),
        }
    }

    pub fn restrict_to_subspace<F: Field<Elem = E>>(
        &self,
        field: &F,
        basis: &SubspaceBasis<E>,
    ) -> Result<Self, FormError> {
        if basis.ambient_dim != self.n_vars {
            return Err(FormError::DimensionMismatch { expected: self.n_vars, got: basis.ambient_dim });
        }
        Ok(self.substitute_unchecked(field, &basis.vectors))
    }

    /// Polar tensor `6Φ`: entry for sorted `(i ≤ j ≤ k)` is `∂³F/∂x_i∂x_j∂x_k`.
    pub fn polar<R: Ring<Elem = E>>(&self, ring: &R) -> Result<TrilinearData<E>, FormError> {
        if self.degree != 3 {
            return Err(FormError::WrongDegree { expected: 3, got: self.degree });
        }
        let mut entries = BTreeMap::new();
        for (m, c) in &self.terms {
            let vs = m.variables();
            let mult = m.0.iter().filter(|&&e| e > 0).map(|&e| factorial(e)).product::<i64>();
            entries.insert([vs[0], vs[1], vs[2]], ring.scale_int(c, mult));
        }
        Ok(TrilinearData { n_vars: self.n_vars, entries })
    }
}

fn factorial(e: u8) -> i64 {
    (1..=e as i64).product()
}

fn linear_product<R: Ring>(ring: &R, a: &[R::Elem], b: &[R::Elem], idx: &SymIndex) -> Vec<R::Elem> {
    let mut out = vec![ring.zero(); idx.len()];
    for (i, ai) in a.iter().enumerate() {
        if ring.is_zero(ai) {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            if ring.is_zero(bj) {
                continue;
            }
            let slot = idx.index(&[i, j]);
            out[slot] = ring.add(&out[slot], &ring.mul(ai, bj));
        }
    }
    out
}

/// Dense index of sorted tuples of a fixed length over `k` variables.
struct SymIndex {
    table: BTreeMap<Vec<usize>, usize>,
    tuples: Vec<Vec<usize>>,
}

impl SymIndex {
    fn new(k: usize, len: usize) -> Self {
        let mut tuples = Vec::new();
        let mut cur = vec![0usize; len];
        fn rec(k: usize, pos: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if pos == cur.len() {
                out.push(cur.clone());
                return;
            }
            for v in start..k {
                cur[pos] = v;
                rec(k, pos + 1, v, cur, out);
            }
        }
        if k > 0 {
            rec(k, 0, 0, &mut cur, &mut tuples);
        }
        let table = tuples.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        SymIndex { table, tuples }
    }
    fn len(&self) -> usize {
        self.tuples.len()
    }
    fn index(&self, t: &[usize]) -> usize {
        let mut s = t.to_vec();
        s.sort_unstable();
        self.table[&s]
    }
    fn tuples(&self) -> &[Vec<usize>] {
        &self.tuples
    }
    fn monomials(&self, k: usize) -> Vec<Monomial> {
        self.tuples.iter().map(|t| Monomial::from_variables(k, t)).collect()
    }
}

/// The symmetric tensor `6Φ(e_i, e_j, e_k)`, stored on sorted index triples.
#[derive(Clone, Debug, PartialEq)]
pub struct TrilinearData<E> {
    n_vars: usize,
    entries: BTreeMap<[usize; 3], E>,
}

impl<E: Clone + fmt::Debug + PartialEq + Send + Sync> TrilinearData<E> {
    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    /// `6Φ(e_i, e_j, e_k)` for any index order.
    pub fn entry<R: Ring<Elem = E>>(&self, ring: &R, i: usize, j: usize, k: usize) -> E {
        let mut t = [i, j, k];
        t.sort_unstable();
        self.entries.get(&t).cloned().unwrap_or_else(|| ring.zero())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&[usize; 3], &E)> {
        self.entries.iter()
    }

    fn check(&self, v: &[E]) -> Result<(), FormError> {
        if v.len() != self.n_vars {
            return Err(FormError::DimensionMismatch { expected: self.n_vars, got: v.len() });
        }
        Ok(())
    }

    /// `6Φ(u, v, w)`, valid in every characteristic.
    pub fn eval6<R: Ring<Elem = E>>(&self, ring: &R, u: &[E], v: &[E], w: &[E]) -> Result<E, FormError> {
        self.check(u)?;
        self.check(v)?;
        self.check(w)?;
        let mut acc = ring.zero();
        for (&[a, b, c], t) in &self.entries {
            let perms = distinct_permutations([a, b, c]);
            let mut s = ring.zero();
            for [i, j, k] in perms {
                s = ring.add(&s, &ring.mul(&ring.mul(&u[i], &v[j]), &w[k]));
            }
            acc = ring.add(&acc, &ring.mul(t, &s));
        }
        Ok(acc)
    }

    /// `6·H_x`: the matrix with entries `6Φ(x, e_i, e_j)`, i.e. the Hessian of F at x.
    pub fn hessian6<R: Ring<Elem = E>>(&self, ring: &R, x: &[E]) -> Result<Vec<Vec<E>>, FormError> {
        self.check(x)?;
        let n = self.n_vars;
        let mut h = vec![vec![ring.zero(); n]; n];
        for (&[a, b, c], t) in &self.entries {
            for [i, j, k] in distinct_permutations([a, b, c]) {
                // contributes t · x_i to H[j][k]
                h[j][k] = ring.add(&h[j][k], &ring.mul(t, &x[i]));
            }
        }
        Ok(h)
    }
}

impl TrilinearData<BigRational> {
    /// `Φ(u, v, w)` over the rationals.
    pub fn polar_eval(&self, u: &[BigRational], v: &[BigRational], w: &[BigRational]) -> Result<BigRational, FormError> {
        Ok(self.eval6(&Rationals, u, v, w)? / BigRational::from_integer(BigInt::from(6)))
    }

    /// `H_x[i][j] = Φ(x, e_i, e_j)`.
    pub fn hessian_matrix(&self, x: &[BigRational]) -> Result<Vec<Vec<BigRational>>, FormError> {
        let six = BigRational::from_integer(BigInt::from(6));
        Ok(self
            .hessian6(&Rationals, x)?
            .into_iter()
            .map(|row| row.into_iter().map(|e| e / &six).collect())
            .collect())
    }

    pub fn is_integral(&self) -> bool {
        self.entries.values().all(|e| e.is_integer())
    }
}

impl TrilinearData<f64> {
    pub fn hessian_matrix_f64(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, FormError> {
        Ok(self
            .hessian6(&crate::ring::Reals, x)?
            .into_iter()
            .map(|row| row.into_iter().map(|e| e / 6.0).collect())
            .collect())
    }
}

fn distinct_permutations(t: [usize; 3]) -> Vec<[usize; 3]> {
    let [a, b, c] = t;
    let mut out = vec![[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]];
    out.sort_unstable();
    out.dedup();
    out
}

/// Linearly independent coordinate vectors spanning a subspace.
#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceBasis<E> {
    pub ambient_dim: usize,
    pub vectors: Vec<Vec<E>>,
}

impl<E: Clone + fmt::Debug + PartialEq + Send + Sync> SubspaceBasis<E> {
    pub fn new<F: Field<Elem = E>>(field: &F, ambient_dim: usize, vectors: Vec<Vec<E>>) -> Result<Self, FormError> {
        for v in &vectors {
            if v.len() != ambient_dim {
                return Err(FormError::DimensionMismatch { expected: ambient_dim, got: v.len() });
            }
        }
        if linalg::rank(field, &vectors) != vectors.len() {
            return Err(FormError::DependentBasis);
        }
        Ok(SubspaceBasis { ambient_dim, vectors })
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    /// The basis of the composed subspace: `self ∘ inner`.
    pub fn compose<F: Field<Elem = E>>(&self, field: &F, inner: &SubspaceBasis<E>) -> Result<Self, FormError> {
        if inner.ambient_dim != self.dim() {
            return Err(FormError::DimensionMismatch { expected: self.dim(), got: inner.ambient_dim });
        }
        let vectors = inner
            .vectors
            .iter()
            .map(|c| linalg::combine(field, c, &self.vectors, self.ambient_dim))
            .collect();
        SubspaceBasis::new(field, self.ambient_dim, vectors)
    }
}

// ---------------------------------------------------------------------------
// Integer / rational forms

pub type RatForm = Form<BigRational>;

pub fn int(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

pub fn int_vec(v: &[i64]) -> Vec<BigRational> {
    v.iter().map(|&x| int(x)).collect()
}

impl Form<BigRational> {
    pub fn from_int_terms(n_vars: usize, degree: u32, terms: &[(Vec<u8>, i64)]) -> Result<Self, FormError> {
        Form::new(&Rationals, n_vars, degree, terms.iter().map(|(e, c)| (e.clone(), int(*c))))
    }

    /// `Σ x_i³` in `n` variables.
    pub fn fermat(n: usize) -> Self {
        let terms = (0..n).map(|i| (Monomial::from_variables(n, &[i, i, i]), int(1)));
        Form::from_accumulated(&Rationals, n, 3, terms)
    }

    pub fn is_integral(&self) -> bool {
        self.terms.values().all(|c| c.is_integer())
    }

    /// Reduction modulo p; fails if a denominator is divisible by p.
    pub fn reduce_mod(&self, field: &PrimeField) -> Result<Form<u64>, FormError> {
        self.try_map_coeffs(field, |c| field.reduce_rational(c))
    }

    pub fn to_f64(&self) -> Form<f64> {
        self.map_coeffs(&crate::ring::Reals, crate::ring::rational_to_f64)
    }

    /// All primitive integer zeros with `max |x_i| ≤ bound`, one per sign pair
    /// (first nonzero coordinate positive).
    pub fn search_rational_points(&self, height_bound: u32) -> Vec<Vec<i64>> {
        let n = self.n_vars;
        let b = height_bound as i64;
        let den_lcm = self.terms.values().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let int_terms: Vec<(Vec<usize>, BigInt)> = self
            .terms
            .iter()
            .map(|(m, c)| (m.variables(), (c * BigRational::from_integer(den_lcm.clone())).to_integer()))
            .collect();
        let mut out = Vec::new();
        let mut x = vec![-b; n];
        loop {
            let first = x.iter().find(|&&v| v != 0);
            if first.map_or(false, |&f| f > 0) && x.iter().fold(0i64, |g, &v| g.gcd(&v)) == 1 {
                let mut acc = BigInt::zero();
                for (vars, c) in &int_terms {
                    let mut t = c.clone();
                    for &v in vars {
                        t *= x[v];
                    }
                    acc += t;
                }
                if acc.is_zero() {
                    out.push(x.clone());
                }
            }
            // odometer
            let mut i = n;
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                if x[i] < b {
                    x[i] += 1;
                    break;
                }
                x[i] = -b;
            }
        }
    }

    /// Parses text like `x1^3 + 2 x1 x2^2 - x3^3` or `x^3 + 1/2 x y z`.
    pub fn parse(text: &str, variables: &[&str]) -> Result<Self, FormError> {
        let n = variables.len();
        let cleaned = text.replace('*', " ").replace('−', "-");
        let mut terms: Vec<(Monomial, BigRational)> = Vec::new();
        let mut degree = None;
        let mut sign = 1i64;
        let mut current: Vec<String> = Vec::new();
        let mut flush = |tokens: &mut Vec<String>, sign: i64| -> Result<(), FormError> {
            if tokens.is_empty() {
                return Ok(());
            }
            let mut coef = BigRational::from_integer(BigInt::from(sign));
            let mut exp = vec![0u8; n];
            for tok in tokens.drain(..) {
                if let Ok(c) = tok.parse::<BigRational>() {
                    coef *= c;
                    continue;
                }
                let (name, power) = match tok.split_once('^') {
                    Some((a, b)) => (a.to_string(), b.parse::<u8>().map_err(|_| FormError::Parse(tok.clone()))?),
                    None => (tok.clone(), 1),
                };
                let idx = variables
                    .iter()
                    .position(|v| *v == name)
                    .ok_or_else(|| FormError::Parse(format!("unknown variable {name}")))?;
                exp[idx] += power;
            }
            let m = Monomial(exp);
            match degree {
                None => degree = Some(m.degree()),
                Some(d) if d != m.degree() => {
                    return Err(FormError::NotHomogeneous { exp: m.0, degree: d });
                }
                _ => {}
            }
            terms.push((m, coef));
            Ok(())
        };
        let spaced = cleaned.replace('+', " + ").replace('-', " - ");
        for tok in spaced.split_whitespace() {
            match tok {
                "+" | "-" => {
                    flush(&mut current, sign)?;
                    sign = if tok == "-" { -1 } else { 1 };
                }
                _ => current.push(tok.to_string()),
            }
        }
        flush(&mut current, sign)?;
        let degree = degree.ok_or_else(|| FormError::Parse("empty polynomial".into()))?;
        let mut seen = std::collections::BTreeSet::new();
        for (m, _) in &terms {
            if !seen.insert(m.clone()) {
                return Err(FormError::DuplicateMonomial(m.0.clone()));
            }
        }
        Form::new(&Rationals, n, degree, terms.into_iter().map(|(m, c)| (m.0, c)))
    }
}

impl fmt::Display for Form<BigRational> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (idx, (m, c)) in self.terms.iter().rev().enumerate() {
            let neg = c.is_negative();
            if idx == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            let a = c.abs();
            if !a.is_one() {
                write!(f, "{a} ")?;
            }
            let mut first = true;
            for (i, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                if !first {
                    write!(f, " ")?;
                }
                first = false;
                if e == 1 {
                    write!(f, "x{}", i + 1)?;
                } else {
                    write!(f, "x{}^{}", i + 1, e)?;
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// JSON

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonomialJson {
    pub exp: Vec<u8>,
    pub coef: String,
}

/// `{"n": 5, "degree": 3, "context": "int", "monomials": [{"exp": [...], "coef": "1"}]}`
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FormJson {
    pub n: usize,
    pub degree: u32,
    pub context: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<u64>,
    pub monomials: Vec<MonomialJson>,
}

impl FormJson {
    pub fn from_rational(form: &Form<BigRational>) -> Self {
        FormJson {
            n: form.n_vars,
            degree: form.degree,
            context: if form.is_integral() { "int".into() } else { "rat".into() },
            p: None,
            monomials: form
                .terms
                .iter()
                .map(|(m, c)| MonomialJson { exp: m.0.clone(), coef: c.to_string() })
                .collect(),
        }
    }

    pub fn from_mod_p(form: &Form<u64>, p: u64) -> Self {
        FormJson {
            n: form.n_vars,
            degree: form.degree,
            context: "modp".into(),
            p: Some(p),
            monomials: form
                .terms
                .iter()
                .map(|(m, c)| MonomialJson { exp: m.0.clone(), coef: c.to_string() })
                .collect(),
        }
    }

    /// Parses into a rational form; `modp` data is read through its integer
    /// representatives.
    pub fn to_rational(&self) -> Result<Form<BigRational>, FormError> {
        let mut terms = Vec::with_capacity(self.monomials.len());
        for m in &self.monomials {
            let c: BigRational = m
                .coef
                .trim()
                .parse()
                .map_err(|_| FormError::Parse(format!("bad coefficient {:?}", m.coef)))?;
            match self.context.as_str() {
                "int" | "modp" if !c.is_integer() => {
                    return Err(FormError::ContextMismatch(format!("non-integer coefficient {c} in {} form", self.context)))
                }
                "int" | "rat" | "modp" => {}
                other => return Err(FormError::Parse(format!("unknown context {other:?}"))),
            }
            terms.push((m.exp.clone(), c));
        }
        Form::new(&Rationals, self.n, self.degree, terms)
    }
}

pub fn form_to_json_string(form: &Form<BigRational>) -> String {
    serde_json::to_string_pretty(&FormJson::from_rational(form)).expect("form serializes")
}

pub fn form_from_json_str(s: &str) -> Result<Form<BigRational>, FormError> {
    let j: FormJson = serde_json::from_str(s).map_err(|e| FormError::Parse(e.to_string()))?;
    j.to_rational()
}

pub fn rational_to_i64(q: &BigRational) -> Option<i64> {
    if q.is_integer() {
        q.to_integer().to_i64()
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::Reals;

    fn x2y() -> RatForm {
        // x1^2 x2
        Form::from_int_terms(2, 3, &[(vec![2, 1], 1)]).unwrap()
    }

    #[test]
    fn evaluate_cube() {
        let f = Form::from_int_terms(1, 3, &[(vec![3], 1)]).unwrap();
        assert_eq!(f.evaluate(&Rationals, &int_vec(&[2])).unwrap(), int(8));
        assert_eq!(f.gradient(&Rationals, &int_vec(&[2])).unwrap(), int_vec(&[12]));
    }

    #[test]
    fn evaluate_rejects_wrong_length() {
        let f = RatForm::fermat(3);
        assert!(matches!(
            f.evaluate(&Rationals, &int_vec(&[1, 2])),
            Err(FormError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn construction_validates() {
        assert!(matches!(
            Form::from_int_terms(2, 3, &[(vec![2, 0], 1)]),
            Err(FormError::NotHomogeneous { .. })
        ));
        assert!(matches!(
            Form::from_int_terms(2, 3, &[(vec![3, 0], 0)]),
            Err(FormError::ZeroCoefficient(_))
        ));
        assert!(matches!(
            Form::from_int_terms(2, 3, &[(vec![3, 0], 1), (vec![3, 0], 2)]),
            Err(FormError::DuplicateMonomial(_))
        ));
        assert!(matches!(Form::from_int_terms(2, 4, &[(vec![4, 0], 1)]), Err(FormError::UnsupportedDegree(4))));
    }

    #[test]
    fn polar_of_cube_and_x2y() {
        let f = Form::from_int_terms(1, 3, &[(vec![3], 1)]).unwrap();
        let t = f.polar(&Rationals).unwrap();
        assert_eq!(t.entry(&Rationals, 0, 0, 0), int(6));
        let t = x2y().polar(&Rationals).unwrap();
        assert_eq!(t.entry(&Rationals, 0, 1, 0), int(2));
        let e1 = int_vec(&[1, 0]);
        let e2 = int_vec(&[0, 1]);
        assert_eq!(t.polar_eval(&e1, &e1, &e2).unwrap(), BigRational::new(1.into(), 3.into()));
        assert_eq!(
            t.polar_eval(&int_vec(&[1, 1]), &e1, &e1).unwrap(),
            BigRational::new(1.into(), 3.into())
        );
    }

    #[test]
    fn fermat_polar_is_diagonal() {
        let t = RatForm::fermat(3).polar(&Rationals).unwrap();
        let u = int_vec(&[1, 2, 3]);
        let v = int_vec(&[4, 5, 6]);
        let w = int_vec(&[7, 8, 9]);
        assert_eq!(t.polar_eval(&u, &v, &w).unwrap(), int(28 + 80 + 162));
        let h = t.hessian_matrix(&int_vec(&[2, 3, 5])).unwrap();
        assert_eq!(h[0][0], int(2));
        assert_eq!(h[1][1], int(3));
        assert_eq!(h[2][2], int(5));
        assert_eq!(h[0][1], int(0));
    }

    #[test]
    fn hessian_of_x2y() {
        let h = x2y().polar(&Rationals).unwrap().hessian_matrix(&int_vec(&[1, 1])).unwrap();
        let third = BigRational::new(1.into(), 3.into());
        assert_eq!(h, vec![vec![third.clone(), third.clone()], vec![third, int(0)]]);
    }

    #[test]
    fn binary_restriction_examples() {
        let xyz = Form::from_int_terms(3, 3, &[(vec![1, 1, 1], 1)]).unwrap();
        let c = xyz
            .binary_restriction_coeffs(&Rationals, &int_vec(&[1, 0, 0]), &int_vec(&[0, 1, 0]))
            .unwrap();
        assert_eq!(c, int_vec(&[0, 0, 0, 0]));
        let fermat = RatForm::fermat(3);
        let c = fermat
            .binary_restriction_coeffs(&Rationals, &int_vec(&[1, -1, 0]), &int_vec(&[0, 0, 1]))
            .unwrap();
        assert_eq!(c, int_vec(&[0, 0, 0, 1]));
    }

    #[test]
    fn restriction_examples() {
        let fermat = RatForm::fermat(3);
        let b = SubspaceBasis::new(&Rationals, 3, vec![int_vec(&[1, 0, 0]), int_vec(&[0, 1, 0])]).unwrap();
        assert_eq!(fermat.restrict_to_subspace(&Rationals, &b).unwrap(), RatForm::fermat(2));
        let b = SubspaceBasis::new(&Rationals, 3, vec![int_vec(&[1, -1, 0]), int_vec(&[0, 0, 1])]).unwrap();
        let r = fermat.restrict_to_subspace(&Rationals, &b).unwrap();
        assert_eq!(r, Form::from_int_terms(2, 3, &[(vec![0, 3], 1)]).unwrap());
        assert_eq!(
            SubspaceBasis::new(&Rationals, 3, vec![int_vec(&[1, 1, 0]), int_vec(&[2, 2, 0])]),
            Err(FormError::DependentBasis)
        );
    }

    #[test]
    fn rational_points() {
        let pts = RatForm::fermat(3).search_rational_points(1);
        assert!(pts.contains(&vec![1, -1, 0]));
        let f = Form::from_int_terms(3, 3, &[(vec![3, 0, 0], 1), (vec![0, 3, 0], 2), (vec![0, 0, 3], 4)]).unwrap();
        assert!(f.search_rational_points(10).is_empty());
    }

    #[test]
    fn parse_and_display() {
        let f = RatForm::parse("x1^3 + 2 x1 x2^2 - x3^3", &["x1", "x2", "x3"]).unwrap();
        assert_eq!(f.num_terms(), 3);
        assert_eq!(f.coefficient(&[1, 2, 0]), Some(&int(2)));
        assert_eq!(f.coefficient(&[0, 0, 3]), Some(&int(-1)));
        let g = RatForm::parse(&f.to_string(), &["x1", "x2", "x3"]).unwrap();
        assert_eq!(f, g);
        assert!(RatForm::parse("x1^3 + x2", &["x1", "x2"]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let f = RatForm::parse("x1^3 - 3 x1 x2 x3 + x2^2 x3", &["x1", "x2", "x3"]).unwrap();
        let s = form_to_json_string(&f);
        assert!(s.contains("\"context\": \"int\""));
        assert_eq!(form_from_json_str(&s).unwrap(), f);
        let bad = r#"{"n":2,"degree":3,"context":"int","monomials":[{"exp":[3,0],"coef":"1/2"}]}"#;
        assert!(matches!(form_from_json_str(bad), Err(FormError::ContextMismatch(_))));
    }

    #[test]
    fn reduction_mod_p_drops_multiples() {
        let f = RatForm::parse("3 x1^3 + x2^3", &["x1", "x2"]).unwrap();
        let g = f.reduce_mod(&PrimeField::new(3)).unwrap();
        assert_eq!(g.num_terms(), 1);
        let h = Form::new(&Rationals, 1, 3, vec![(vec![3], BigRational::new(1.into(), 3.into()))]).unwrap();
        assert!(h.reduce_mod(&PrimeField::new(3)).is_err());
    }

    #[test]
    fn float_hessian_matches_second_differences() {
        let f = RatForm::parse("x1^3 + 2 x1 x2 x3 - x2^2 x3 + 3 x3^3", &["x1", "x2", "x3"]).unwrap();
        let ff = f.to_f64();
        let t = f.to_f64().polar(&Reals).unwrap();
        let x = [0.3, -0.7, 1.1];
        let h = t.hessian_matrix_f64(&x).unwrap();
        let eps = 1e-4;
        for i in 0..3 {
            for j in 0..3 {
                let eval = |di: f64, dj: f64| {
                    let mut y = x;
                    y[i] += di;
                    y[j] += dj;
                    ff.evaluate(&Reals, &y).unwrap()
                };
                let fd = (eval(eps, eps) - eval(eps, -eps) - eval(-eps, eps) + eval(-eps, -eps)) / (4.0 * eps * eps);
                assert!((6.0 * h[i][j] - fd).abs() < 1e-6, "{i}{j}: {} vs {fd}", 6.0 * h[i][j]);
            }
        }
    }
}
