//! Exhaustive projective enumeration over F_p: points, lines, zeros,
//! singular points.
//!
//! Points and lines are index-addressable (`point_at`, `line_at`) so the
//! scans split into disjoint index ranges and run in parallel.

use serde::{Deserialize, Serialize};

use crate::forms::{Form, FormError};
use crate::linalg;
use crate::ring::{Field, PrimeField, Ring};

/// Largest prime accepted by the dense kernels.
pub const MAX_KERNEL_PRIME: u64 = 1 << 16;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProjPoint {
    pub p: u64,
    pub coords: Vec<u64>,
}

impl ProjPoint {
    /// Scales so the first nonzero coordinate is one; `None` for the zero vector.
    pub fn normalize(field: &PrimeField, v: &[u64]) -> Option<Self> {
        let lead = v.iter().copied().find(|&c| c % field.p() != 0)?;
        let inv = field.inv(&lead).expect("nonzero");
        Some(ProjPoint { p: field.p(), coords: v.iter().map(|c| field.mul(c, &inv)).collect() })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProjLine {
    pub p: u64,
    pub gens: [Vec<u64>; 2],
}

impl ProjLine {
    /// Canonical reduced-echelon representative; `None` if dependent.
    pub fn from_generators(field: &PrimeField, a: &[u64], b: &[u64]) -> Option<Self> {
        let mut rows = vec![a.iter().map(|x| x % field.p()).collect(), b.iter().map(|x| x % field.p()).collect()];
        if linalg::row_reduce(field, &mut rows).len() != 2 {
            return None;
        }
        let b = rows.pop().unwrap();
        let a = rows.pop().unwrap();
        Some(ProjLine { p: field.p(), gens: [a, b] })
    }

    /// The p+1 points of the line.
    pub fn points(&self) -> Vec<ProjPoint> {
        let f = PrimeField::new(self.p);
        let mut out = vec![ProjPoint { p: self.p, coords: self.gens[1].clone() }];
        for t in 0..self.p {
            let v: Vec<u64> = self.gens[0].iter().zip(&self.gens[1]).map(|(a, b)| f.add(a, &f.mul(&t, b))).collect();
            out.push(ProjPoint::normalize(&f, &v).expect("independent generators"));
        }
        out
    }
}

fn check_prime(p: u64) -> PrimeField {
    assert!(p < MAX_KERNEL_PRIME, "prime {p} too large for the enumeration kernels");
    PrimeField::new(p)
}

fn pow(p: u64, e: usize) -> u64 {
    p.checked_pow(e as u32).expect("enumeration size overflows u64")
}

pub fn point_count(p: u64, n: usize) -> u64 {
    (0..n).map(|k| pow(p, k)).sum()
}

/// Points are ordered by the position of their leading one, then by the
/// base-p value of the trailing coordinates.
pub fn point_at(p: u64, n: usize, mut index: u64) -> ProjPoint {
    for lead in 0..n {
        let block = pow(p, n - 1 - lead);
        if index < block {
            let mut coords = vec![0u64; n];
            coords[lead] = 1;
            for k in (lead + 1..n).rev() {
                coords[k] = index % p;
                index /= p;
            }
            return ProjPoint { p, coords };
        }
        index -= block;
    }
    panic!("point index out of range");
}

pub fn enumerate_points(p: u64, n: usize) -> impl Iterator<Item = ProjPoint> {
    assert!(n >= 1);
    check_prime(p);
    (0..point_count(p, n)).map(move |i| point_at(p, n, i))
}

/// Number of free entries in the echelon matrix with pivots `i < j`.
fn free_entries(n: usize, i: usize, j: usize) -> usize {
    (n - 1 - i - 1) + (n - 1 - j)
}

/// Gaussian binomial [n choose 2]_p.
pub fn line_count(p: u64, n: usize) -> u64 {
    let mut total = 0;
    for i in 0..n {
        for j in i + 1..n {
            total += pow(p, free_entries(n, i, j));
        }
    }
    total
}

pub fn line_at(p: u64, n: usize, mut index: u64) -> ProjLine {
    for i in 0..n {
        for j in i + 1..n {
            let block = pow(p, free_entries(n, i, j));
            if index < block {
                let mut a = vec![0u64; n];
                let mut b = vec![0u64; n];
                a[i] = 1;
                b[j] = 1;
                for k in (j + 1..n).rev() {
                    b[k] = index % p;
                    index /= p;
                }
                for k in (i + 1..n).rev() {
                    if k == j {
                        continue;
                    }
                    a[k] = index % p;
                    index /= p;
                }
                return ProjLine { p, gens: [a, b] };
            }
            index -= block;
        }
    }
    panic!("line index out of range");
}

pub fn enumerate_lines(p: u64, n: usize) -> impl Iterator<Item = ProjLine> {
    assert!(n >= 2);
    check_prime(p);
    (0..line_count(p, n)).map(move |i| line_at(p, n, i))
}

/// Flattened form for the hot loops: variable-index lists with reduced coefficients.
#[derive(Clone, Debug)]
pub struct DenseForm {
    pub p: u64,
    pub n_vars: usize,
    pub degree: u32,
    terms: Vec<(Vec<usize>, u64)>,
}

impl DenseForm {
    pub fn new(form: &Form<u64>, p: u64) -> Self {
        DenseForm {
            p,
            n_vars: form.n_vars(),
            degree: form.degree(),
            terms: form.terms().map(|(m, c)| (m.variables(), *c)).collect(),
        }
    }

    pub fn eval(&self, x: &[u64]) -> u64 {
        let p = self.p;
        self.terms
            .iter()
            .fold(0, |acc, (vars, c)| (acc + vars.iter().fold(*c, |t, &v| t * x[v] % p)) % p)
    }

    pub fn gradient(&self, x: &[u64]) -> Vec<u64> {
        let p = self.p;
        let mut g = vec![0u64; self.n_vars];
        for (vars, c) in &self.terms {
            for skip in 0..vars.len() {
                let t = vars
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != skip)
                    .fold(*c, |t, (_, &v)| t * x[v] % p);
                g[vars[skip]] = (g[vars[skip]] + t) % p;
            }
        }
        g
    }

    /// Coefficients of F(s·x + t·y) by substitution.
    pub fn binary(&self, x: &[u64], y: &[u64]) -> Vec<u64> {
        let p = self.p;
        let d = self.degree as usize;
        let mut out = vec![0u64; d + 1];
        let mut poly = Vec::with_capacity(d + 1);
        let mut next = Vec::with_capacity(d + 1);
        for (vars, c) in &self.terms {
            poly.clear();
            poly.push(*c);
            for &v in vars {
                next.clear();
                next.resize(poly.len() + 1, 0);
                for (k, a) in poly.iter().enumerate() {
                    next[k] = (next[k] + a * x[v]) % p;
                    next[k + 1] = (next[k + 1] + a * y[v]) % p;
                }
                std::mem::swap(&mut poly, &mut next);
            }
            for (o, a) in out.iter_mut().zip(&poly) {
                *o = (*o + a) % p;
            }
        }
        out
    }

    pub fn vanishes_on(&self, x: &[u64], y: &[u64]) -> bool {
        self.binary(x, y).iter().all(|&c| c == 0)
    }
}

fn check_form(form: &Form<u64>, field: &PrimeField) -> DenseForm {
    check_prime(field.p());
    DenseForm::new(form, field.p())
}

/// Indices in `0..count` satisfying `pred`, in increasing order.
pub(crate) fn scan_indices(count: u64, pred: impl Fn(u64) -> bool + Sync + Send) -> Vec<u64> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        const CHUNK: u64 = 1 << 12;
        let chunks = count.div_ceil(CHUNK);
        let mut parts: Vec<(u64, Vec<u64>)> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let lo = c * CHUNK;
                let hi = (lo + CHUNK).min(count);
                (c, (lo..hi).filter(|&i| pred(i)).collect())
            })
            .collect();
        parts.sort_by_key(|(c, _)| *c);
        parts.into_iter().flat_map(|(_, v)| v).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).filter(|&i| pred(i)).collect()
    }
}

pub fn vanishes_on_line(form: &Form<u64>, field: &PrimeField, line: &ProjLine) -> Result<bool, FormError> {
    for g in &line.gens {
        if g.len() != form.n_vars() {
            return Err(FormError::DimensionMismatch { expected: form.n_vars(), got: g.len() });
        }
    }
    Ok(check_form(form, field).vanishes_on(&line.gens[0], &line.gens[1]))
}

/// All lines of P^{n-1}(F_p) contained in the hypersurface.
pub fn find_lines_on_cubic(form: &Form<u64>, field: &PrimeField) -> Vec<ProjLine> {
    let dense = check_form(form, field);
    let (p, n) = (field.p(), form.n_vars());
    if n < 2 {
        return Vec::new();
    }
    scan_indices(line_count(p, n), |i| {
        let l = line_at(p, n, i);
        dense.vanishes_on(&l.gens[0], &l.gens[1])
    })
    .into_iter()
    .map(|i| line_at(p, n, i))
    .collect()
}

pub fn nontrivial_zeros(form: &Form<u64>, field: &PrimeField) -> Vec<ProjPoint> {
    let dense = check_form(form, field);
    let (p, n) = (field.p(), form.n_vars());
    scan_indices(point_count(p, n), |i| dense.eval(&point_at(p, n, i).coords) == 0)
        .into_iter()
        .map(|i| point_at(p, n, i))
        .collect()
}

/// Points where F and all partials vanish; F = 0 is tested on its own since
/// Euler's identity says nothing in characteristic 3.
pub fn singular_points_mod_p(form: &Form<u64>, field: &PrimeField) -> Vec<ProjPoint> {
    let dense = check_form(form, field);
    let (p, n) = (field.p(), form.n_vars());
    scan_indices(point_count(p, n), |i| {
        let x = point_at(p, n, i).coords;
        dense.eval(&x) == 0 && dense.gradient(&x).iter().all(|&g| g == 0)
    })
    .into_iter()
    .map(|i| point_at(p, n, i))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::RatForm;
    use std::collections::BTreeSet;

    fn gauss(p: u64, n: u32) -> u64 {
        (p.pow(n) - 1) * (p.pow(n - 1) - 1) / ((p * p - 1) * (p - 1))
    }

    #[test]
    fn counts_match_closed_forms() {
        for p in [2u64, 3, 5] {
            for n in 2..=6usize {
                assert_eq!(point_count(p, n), (p.pow(n as u32) - 1) / (p - 1));
                assert_eq!(line_count(p, n), gauss(p, n as u32));
            }
        }
        assert_eq!(line_count(2, 5), 155);
        assert_eq!(line_count(3, 5), 1210);
        assert_eq!(line_count(5, 5), 20306);
        assert_eq!(enumerate_points(5, 5).count(), 781);
    }

    #[test]
    fn enumerations_are_canonical_and_distinct() {
        let f = PrimeField::new(3);
        let lines: Vec<_> = enumerate_lines(3, 4).collect();
        let set: BTreeSet<_> = lines.iter().cloned().collect();
        assert_eq!(set.len(), lines.len());
        for l in &lines {
            let renorm = ProjLine::from_generators(&f, &l.gens[0], &l.gens[1]).unwrap();
            assert_eq!(&renorm, l);
            // a different generator pair for the same line
            let mixed: Vec<u64> = l.gens[0].iter().zip(&l.gens[1]).map(|(a, b)| (2 * a + b) % 3).collect();
            assert_eq!(&ProjLine::from_generators(&f, &mixed, &l.gens[1]).unwrap(), l);
        }
        let pts: BTreeSet<_> = enumerate_points(3, 4).collect();
        assert_eq!(pts.len(), 40);
    }

    #[test]
    fn fermat_line_over_f2() {
        let f = PrimeField::new(2);
        let fermat = RatForm::fermat(5).reduce_mod(&f).unwrap();
        let line = ProjLine::from_generators(&f, &[1, 1, 0, 0, 0], &[0, 0, 1, 1, 0]).unwrap();
        assert!(vanishes_on_line(&fermat, &f, &line).unwrap());
        assert!(find_lines_on_cubic(&fermat, &f).contains(&line));
    }

    #[test]
    fn zeros_and_singular_points() {
        let f = PrimeField::new(2);
        let fermat = RatForm::fermat(3).reduce_mod(&f).unwrap();
        assert!(nontrivial_zeros(&fermat, &f).iter().any(|p| p.coords == vec![1, 1, 0]));
        let cube = RatForm::parse("x1^3", &["x1", "x2"]).unwrap().reduce_mod(&f).unwrap();
        let sing = singular_points_mod_p(&cube, &f);
        assert_eq!(sing, vec![ProjPoint { p: 2, coords: vec![0, 1] }]);
    }
}
