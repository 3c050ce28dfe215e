//! Small dense linear algebra over any [`Field`] context.

use crate::ring::Field;

pub type Matrix<E> = Vec<Vec<E>>;

/// Row-reduces `rows` in place (reduced echelon form, pivots scaled to one)
/// and returns the pivot `(row, col)` pairs. Within each column the pivot is
/// the entry with the smallest [`Field::pivot_weight`].
pub fn row_reduce<F: Field>(field: &F, rows: &mut [Vec<F::Elem>]) -> Vec<(usize, usize)> {
    let n_rows = rows.len();
    if n_rows == 0 {
        return Vec::new();
    }
    let n_cols = rows[0].len();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..n_cols {
        if r == n_rows {
            break;
        }
        let best = (r..n_rows)
            .filter_map(|i| field.pivot_weight(&rows[i][c]).map(|w| (w, i)))
            .min();
        let Some((_, i)) = best else { continue };
        rows.swap(r, i);
        let inv = field.inv(&rows[r][c]).expect("pivot is nonzero");
        for x in rows[r].iter_mut() {
            *x = field.mul(x, &inv);
        }
        for i in 0..n_rows {
            if i == r || field.is_zero(&rows[i][c]) {
                continue;
            }
            let factor = rows[i][c].clone();
            for k in 0..n_cols {
                let t = field.mul(&factor, &rows[r][k]);
                rows[i][k] = field.sub(&rows[i][k], &t);
            }
        }
        pivots.push((r, c));
        r += 1;
    }
    pivots
}

pub fn rank<F: Field>(field: &F, rows: &[Vec<F::Elem>]) -> usize {
    let mut m = rows.to_vec();
    row_reduce(field, &mut m).len()
}

/// Basis of `{x : rows · x = 0}`, one vector per free column, with a one in
/// that column.
pub fn kernel<F: Field>(field: &F, rows: &[Vec<F::Elem>], n_cols: usize) -> Vec<Vec<F::Elem>> {
    let mut m = rows.to_vec();
    let pivots = row_reduce(field, &mut m);
    let pivot_cols: Vec<usize> = pivots.iter().map(|&(_, c)| c).collect();
    let mut basis = Vec::new();
    for free in (0..n_cols).filter(|c| !pivot_cols.contains(c)) {
        let mut v = vec![field.zero(); n_cols];
        v[free] = field.one();
        for &(r, c) in &pivots {
            v[c] = field.neg(&m[r][free]);
        }
        basis.push(v);
    }
    basis
}

/// Solves `a · x = b` for square invertible `a`.
pub fn solve<F: Field>(field: &F, a: &[Vec<F::Elem>], b: &[F::Elem]) -> Option<Vec<F::Elem>> {
    let n = a.len();
    let mut aug: Vec<Vec<F::Elem>> = a
        .iter()
        .zip(b)
        .map(|(row, bi)| {
            let mut r = row.clone();
            r.push(bi.clone());
            r
        })
        .collect();
    let pivots = row_reduce(field, &mut aug);
    if pivots.len() < n || pivots.iter().any(|&(_, c)| c >= n) {
        return None;
    }
    let mut x = vec![field.zero(); n];
    for &(r, c) in &pivots {
        x[c] = aug[r][n].clone();
    }
    Some(x)
}

pub fn mat_vec<F: Field>(field: &F, m: &[Vec<F::Elem>], v: &[F::Elem]) -> Vec<F::Elem> {
    m.iter().map(|row| field.dot(row, v)).collect()
}

pub fn transpose<E: Clone>(m: &[Vec<E>]) -> Matrix<E> {
    if m.is_empty() {
        return Vec::new();
    }
    (0..m[0].len())
        .map(|j| m.iter().map(|row| row[j].clone()).collect())
        .collect()
}

pub fn mat_mul<F: Field>(field: &F, a: &[Vec<F::Elem>], b: &[Vec<F::Elem>]) -> Matrix<F::Elem> {
    let bt = transpose(b);
    a.iter()
        .map(|row| bt.iter().map(|col| field.dot(row, col)).collect())
        .collect()
}

/// `u · m · v` for a square matrix `m`.
pub fn bilinear<F: Field>(field: &F, m: &[Vec<F::Elem>], u: &[F::Elem], v: &[F::Elem]) -> F::Elem {
    field.dot(u, &mat_vec(field, m, v))
}

pub fn identity<F: Field>(field: &F, n: usize) -> Matrix<F::Elem> {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { field.one() } else { field.zero() })
                .collect()
        })
        .collect()
}

/// Linear combination `Σ coeffs[i] · vectors[i]`.
pub fn combine<F: Field>(field: &F, coeffs: &[F::Elem], vectors: &[Vec<F::Elem>], dim: usize) -> Vec<F::Elem> {
    let mut out = vec![field.zero(); dim];
    for (c, v) in coeffs.iter().zip(vectors) {
        if field.is_zero(c) {
            continue;
        }
        for (o, x) in out.iter_mut().zip(v) {
            *o = field.add(o, &field.mul(c, x));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::{PrimeField, Rationals, Ring};
    use num_rational::BigRational;

    fn q(n: i64) -> BigRational {
        Rationals.from_i64(n)
    }

    #[test]
    fn kernel_of_rank_one() {
        let rows = vec![vec![q(1), q(2), q(3)]];
        let k = kernel(&Rationals, &rows, 3);
        assert_eq!(k.len(), 2);
        for v in &k {
            assert_eq!(Rationals.dot(&rows[0], v), q(0));
        }
    }

    #[test]
    fn solve_two_by_two_mod_p() {
        let f = PrimeField::new(5);
        let a = vec![vec![1, 2], vec![3, 4]];
        let x = solve(&f, &a, &[1, 1]).unwrap();
        assert_eq!(mat_vec(&f, &a, &x), vec![1, 1]);
    }

    #[test]
    fn singular_system_has_no_solution() {
        let a = vec![vec![q(1), q(2)], vec![q(2), q(4)]];
        assert!(solve(&Rationals, &a, &[q(1), q(0)]).is_none());
        assert_eq!(rank(&Rationals, &a), 1);
    }
}
