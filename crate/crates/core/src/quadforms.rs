//! Quadratic forms over local fields: diagonalization, invariants,
//! isotropic vectors, hyperbolic splitting and totally isotropic subspaces.
//!
//! Convention: `Q(x) = x·G·x` and `B(x, y) = x·G·y`, so the hyperbolic
//! plane `x1·x2` has Gram matrix `[[0, 1/2], [1/2, 0]]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::padic::{
    hensel_lift_univariate, ExtDescriptor, ExtKind, LiftError, LocalField, PAdic, PAdicError, PAdicJson, QpField,
    QuadElem, QuadExt, SquareClass,
};
use crate::ring::{Field, Ring};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("form is anisotropic")]
    Anisotropic,
    #[error("vector lies in the radical")]
    InRadical,
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("precision exhausted: {0}")]
    Precision(String),
    #[error("Gram matrix is not symmetric")]
    NotSymmetric,
    #[error(transparent)]
    PAdic(#[from] PAdicError),
    #[error(transparent)]
    Lift(#[from] LiftError),
}

pub type Gram<E> = Vec<Vec<E>>;

pub fn quad_value<F: Field>(k: &F, g: &[Vec<F::Elem>], x: &[F::Elem]) -> F::Elem {
    linalg::bilinear(k, g, x, x)
}

pub fn check_symmetric<F: Field>(k: &F, g: &[Vec<F::Elem>]) -> Result<(), QuadError> {
    let n = g.len();
    for row in g {
        if row.len() != n {
            return Err(QuadError::NotSymmetric);
        }
    }
    for i in 0..n {
        for j in 0..i {
            if !k.eq_approx(&g[i][j], &g[j][i]) {
                return Err(QuadError::NotSymmetric);
            }
        }
    }
    Ok(())
}

/// Gram matrix of the form restricted to `span(basis)` (basis as rows).
pub fn restrict_gram<F: Field>(k: &F, g: &[Vec<F::Elem>], basis: &[Vec<F::Elem>]) -> Gram<F::Elem> {
    let gb: Vec<Vec<F::Elem>> = basis.iter().map(|b| linalg::mat_vec(k, g, b)).collect();
    basis.iter().map(|a| gb.iter().map(|gbj| k.dot(a, gbj)).collect()).collect()
}

/// Result of diagonalization: `basis[i]` are the columns of `T`, so
/// `Q(Σ u_i basis[i]) = Σ diag[i] u_i²`.
#[derive(Clone, Debug)]
pub struct Diagonalization<E> {
    pub basis: Vec<Vec<E>>,
    pub diag: Vec<E>,
}

impl<E: Clone> Diagonalization<E> {
    /// The transform `T` as a matrix (columns are the new basis vectors).
    pub fn transform(&self) -> Vec<Vec<E>> {
        linalg::transpose(&self.basis)
    }
}

/// Symmetric Gaussian elimination with best-pivot choice; an off-diagonal
/// pivot is used (via `e_i + e_j`) when it beats every diagonal entry.
pub fn diagonalize<F: Field>(k: &F, g: &[Vec<F::Elem>]) -> Result<Diagonalization<F::Elem>, QuadError> {
    check_symmetric(k, g)?;
    let n = g.len();
    if k.characteristic() == 2 {
        return Err(QuadError::Precondition("characteristic 2".into()));
    }
    let mut m: Vec<Vec<F::Elem>> = g.to_vec();
    let mut basis = linalg::identity(k, n);
    let mut diag = Vec::with_capacity(n);
    for s in 0..n {
        let best_diag = (s..n).filter_map(|i| k.pivot_weight(&m[i][i]).map(|w| (w, i))).min();
        let best_off = (s..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .filter_map(|(i, j)| k.pivot_weight(&m[i][j]).map(|w| (w, i, j)))
            .min();
        // an off-diagonal pivot must beat every diagonal entry and yield a nonzero sum
        let use_off = match (best_diag, best_off) {
            (None, None) => {
                diag.extend((s..n).map(|_| k.zero()));
                break;
            }
            (Some((wd, _)), Some((wo, i, j))) if wo < wd => {
                let sum = k.add(&k.add(&m[i][i], &m[j][j]), &k.scale_int(&m[i][j], 2));
                (!k.is_zero(&sum)).then_some((i, j))
            }
            (None, Some((_, i, j))) => Some((i, j)),
            _ => None,
        };
        let pivot = match use_off {
            Some((i, j)) => {
                // replace e_i by e_i + e_j
                for c in 0..n {
                    let t = k.add(&m[i][c], &m[j][c]);
                    m[i][c] = t;
                }
                for r in 0..n {
                    let t = k.add(&m[r][i], &m[r][j]);
                    m[r][i] = t;
                }
                let bj = basis[j].clone();
                for (x, y) in basis[i].iter_mut().zip(&bj) {
                    *x = k.add(x, y);
                }
                i
            }
            None => best_diag.expect("diagonal pivot").1,
        };
        m.swap(s, pivot);
        for row in m.iter_mut() {
            row.swap(s, pivot);
        }
        basis.swap(s, pivot);
        let d = m[s][s].clone();
        let dinv = k.inv(&d).ok_or_else(|| QuadError::Precision("pivot vanished".into()))?;
        for i in s + 1..n {
            if k.is_zero(&m[i][s]) {
                continue;
            }
            let f = k.mul(&m[i][s], &dinv);
            let bs = basis[s].clone();
            for (x, y) in basis[i].iter_mut().zip(&bs) {
                *x = k.sub(x, &k.mul(&f, y));
            }
            let rs = m[s].clone();
            for c in 0..n {
                let t = k.sub(&m[i][c], &k.mul(&f, &rs[c]));
                m[i][c] = t;
            }
            for r in 0..n {
                let t = k.sub(&m[r][i], &k.mul(&f, &m[r][s]));
                m[r][i] = t;
            }
        }
        diag.push(d);
    }
    Ok(Diagonalization { basis, diag })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Invariants {
    pub rank: usize,
    /// Square class of the product of the nonzero diagonal entries.
    pub disc: SquareClass,
    /// `Π_{i<j} (d_i, d_j)` over the nonzero diagonal entries.
    pub hasse: i32,
}

pub fn invariants(k: &QpField, g: &[Vec<PAdic>]) -> Result<Invariants, QuadError> {
    if k.p() == 2 {
        return Err(QuadError::Precondition("p = 2 is not supported for quadratic forms".into()));
    }
    let dz = diagonalize(k, g)?;
    let d: Vec<&PAdic> = dz.diag.iter().filter(|x| !x.is_zero()).collect();
    let mut disc = SquareClass { p: k.p(), parity: 0, unit: 1 };
    let classes: Vec<SquareClass> = d.iter().map(|x| k.square_class(x)).collect::<Result<_, _>>()?;
    for c in &classes {
        disc = disc.mul(c);
    }
    let mut hasse = 1;
    for i in 0..classes.len() {
        for j in i + 1..classes.len() {
            hasse *= crate::padic::hilbert_classes(&classes[i], &classes[j]);
        }
    }
    Ok(Invariants { rank: d.len(), disc, hasse })
}

/// Isotropy over Q_p from (rank, discriminant, Hasse invariant).
pub fn is_isotropic(k: &QpField, g: &[Vec<PAdic>]) -> Result<bool, QuadError> {
    let inv = invariants(k, g)?;
    if g.len() > inv.rank {
        return Ok(true);
    }
    let minus_one = k.square_class(&k.from_i64(-1))?;
    let cls = |c: SquareClass| crate::padic::hilbert_classes(&minus_one, &c);
    Ok(match inv.rank {
        0 => false,
        1 => false,
        2 => minus_one.mul(&inv.disc).is_trivial(),
        3 => inv.hasse == cls(minus_one.mul(&inv.disc)),
        4 => !inv.disc.is_trivial() || inv.hasse == cls(minus_one),
        _ => true,
    })
}

/// Residue vectors ordered by support: the last nonzero coordinate is one
/// and earlier coordinates run lexicographically.
fn residue_points(q: u64, m: usize, budget: usize) -> impl Iterator<Item = Vec<u64>> {
    (0..m)
        .flat_map(move |last| {
            let count = q.checked_pow(last as u32).unwrap_or(u64::MAX);
            (0..count).map(move |mut idx| {
                let mut x = vec![0u64; m];
                x[last] = 1;
                for c in (0..last).rev() {
                    x[c] = idx % q;
                    idx /= q;
                }
                x
            })
        })
        .take(budget)
}

const RESIDUE_SCAN_BUDGET: usize = 4096;

fn scaled_primitive<K: LocalField>(k: &K, g: &[Vec<K::Elem>]) -> Option<Gram<K::Elem>> {
    let mut flat: Vec<K::Elem> = g.iter().flatten().cloned().collect();
    k.make_primitive(&mut flat)?;
    let n = g.len();
    Some(flat.chunks(n).map(|c| c.to_vec()).collect())
}

/// Lifts a smooth residue zero of `Q` along a coordinate with unit partial derivative.
fn lift_residue_zero<K: LocalField>(k: &K, g: &[Vec<K::Elem>], xbar: &[u64], j: usize) -> Result<Vec<K::Elem>, QuadError> {
    let mut x: Vec<K::Elem> = xbar.iter().map(|&r| k.lift(r)).collect();
    let gx = linalg::mat_vec(k, g, &x);
    let c0 = k.dot(&x, &gx);
    let c1 = k.scale_int(&gx[j], 2);
    let c2 = g[j][j].clone();
    let t = hensel_lift_univariate(k, &[c0, c1, c2], &k.zero())?;
    x[j] = k.add(&x[j], &t);
    Ok(x)
}

/// A nonzero primitive vector with `Q(v) = 0` to working precision.
///
/// Deterministic: radical vectors first, then a support-ordered residue
/// scan for a smooth zero, then a complete method on the diagonalized form.
pub fn find_isotropic_vector<K: LocalField>(k: &K, g: &[Vec<K::Elem>]) -> Result<Vec<K::Elem>, QuadError> {
    check_symmetric(k, g)?;
    let m = g.len();
    if m == 0 {
        return Err(QuadError::Precondition("empty form".into()));
    }
    let Some(gs) = scaled_primitive(k, g) else {
        // the zero form
        let mut v = vec![k.zero(); m];
        v[0] = k.one();
        return Ok(v);
    };
    let ker = linalg::kernel(k, &gs, m);
    if let Some(mut v) = ker.into_iter().next() {
        k.make_primitive(&mut v);
        return Ok(v);
    }
    let rf = k.residue_field();
    let gbar: Vec<Vec<u64>> = gs
        .iter()
        .map(|row| row.iter().map(|e| k.residue(e).expect("integral after scaling")).collect())
        .collect();
    for xbar in residue_points(rf.size(), m, RESIDUE_SCAN_BUDGET) {
        let gx = linalg::mat_vec(&rf, &gbar, &xbar);
        if rf.dot(&xbar, &gx) != 0 {
            continue;
        }
        if let Some(j) = gx.iter().position(|&c| c != 0) {
            let mut v = lift_residue_zero(k, &gs, &xbar, j)?;
            k.make_primitive(&mut v);
            return Ok(v);
        }
    }
    diagonal_isotropic_vector(k, &gs)
}

/// Complete search on the diagonal model `Σ u_i π^{v_i} y_i²`: a zero exists
/// iff the unit forms of the even- or odd-valuation group have a residue zero.
fn diagonal_isotropic_vector<K: LocalField>(k: &K, g: &[Vec<K::Elem>]) -> Result<Vec<K::Elem>, QuadError> {
    let dz = diagonalize(k, g)?;
    let m = g.len();
    let rf = k.residue_field();
    let mut groups: [Vec<(usize, i64, K::Elem)>; 2] = [Vec::new(), Vec::new()];
    for (i, d) in dz.diag.iter().enumerate() {
        let Some(v) = k.valuation(d) else {
            // degenerate direction: isotropic by itself
            let mut x = dz.basis[i].clone();
            k.make_primitive(&mut x);
            return Ok(x);
        };
        let u = k.mul(d, &k.uniformizer_pow(-v));
        groups[v.rem_euclid(2) as usize].push((i, v, u));
    }
    for grp in &groups {
        let used = &grp[..grp.len().min(3)];
        let ubar: Vec<u64> = used.iter().map(|(_, _, u)| k.residue(u).unwrap()).collect();
        let found = residue_points(rf.size(), used.len(), usize::MAX).find(|z| {
            let s = z.iter().zip(&ubar).fold(0, |acc, (zi, ui)| rf.add(&acc, &rf.mul(ui, &rf.mul(zi, zi))));
            s == 0
        });
        let Some(zbar) = found else { continue };
        let j = zbar.iter().rposition(|&c| c != 0).unwrap();
        let mut z: Vec<K::Elem> = zbar.iter().map(|&r| k.lift(r)).collect();
        let rest = used
            .iter()
            .zip(&z)
            .enumerate()
            .filter(|(idx, _)| *idx != j)
            .fold(k.zero(), |acc, (_, ((_, _, u), zi))| k.add(&acc, &k.mul(u, &k.mul(zi, zi))));
        let root = hensel_lift_univariate(k, &[rest, k.zero(), used[j].2.clone()], &z[j])?;
        z[j] = root;
        let mut x = vec![k.zero(); m];
        for ((i, v, _), zi) in used.iter().zip(&z) {
            let y = k.mul(zi, &k.uniformizer_pow(-v.div_euclid(2)));
            for (xc, bc) in x.iter_mut().zip(&dz.basis[*i]) {
                *xc = k.add(xc, &k.mul(&y, bc));
            }
        }
        k.make_primitive(&mut x);
        return Ok(x);
    }
    Err(QuadError::Anisotropic)
}

/// A hyperbolic pair `(v, w)` with `B(v, w) = 1`, `Q(w) = 0`, and a basis of
/// the orthogonal complement (all in the coordinates of the input space).
#[derive(Clone, Debug)]
pub struct HyperbolicSplit<E> {
    pub v: Vec<E>,
    pub w: Vec<E>,
    pub residual_basis: Vec<Vec<E>>,
    pub residual_gram: Gram<E>,
}

pub fn split_hyperbolic<K: LocalField>(k: &K, g: &[Vec<K::Elem>], v: &[K::Elem]) -> Result<HyperbolicSplit<K::Elem>, QuadError> {
    let m = g.len();
    let gv = linalg::mat_vec(k, g, v);
    let j = (0..m)
        .filter_map(|i| k.valuation(&gv[i]).map(|w| (w, i)))
        .min()
        .map(|(_, i)| i)
        .ok_or(QuadError::InRadical)?;
    let inv = k.inv(&gv[j]).unwrap();
    let mut w = vec![k.zero(); m];
    w[j] = inv.clone();
    let qw = k.mul(&g[j][j], &k.mul(&inv, &inv));
    let half_qw = k.div(&qw, &k.from_i64(2)).unwrap();
    for (wc, vc) in w.iter_mut().zip(v) {
        *wc = k.sub(wc, &k.mul(&half_qw, vc));
    }
    let gw = linalg::mat_vec(k, g, &w);
    let mut basis: Vec<Vec<K::Elem>> = Vec::with_capacity(m - 2);
    for i in 0..m {
        if basis.len() == m - 2 {
            break;
        }
        let mut c = vec![k.zero(); m];
        c[i] = k.one();
        for t in 0..m {
            c[t] = k.sub(&c[t], &k.add(&k.mul(&gw[i], &v[t]), &k.mul(&gv[i], &w[t])));
        }
        if k.make_primitive(&mut c).is_none() {
            continue;
        }
        basis.push(c);
        if linalg::rank(k, &basis) < basis.len() {
            basis.pop();
        }
    }
    if basis.len() != m - 2 {
        return Err(QuadError::Precision("complement of the hyperbolic plane lost rank".into()));
    }
    let residual_gram = restrict_gram(k, g, &basis);
    Ok(HyperbolicSplit { v: v.to_vec(), w, residual_basis: basis, residual_gram })
}

/// Basis of a complement of a radical vector `v`: drop the coordinate where
/// `v` has minimal valuation.
fn radical_complement<K: LocalField>(k: &K, v: &[K::Elem]) -> Vec<Vec<K::Elem>> {
    let m = v.len();
    let drop = (0..m).filter_map(|i| k.valuation(&v[i]).map(|w| (w, i))).min().map(|(_, i)| i).unwrap_or(0);
    (0..m)
        .filter(|&i| i != drop)
        .map(|i| {
            let mut e = vec![k.zero(); m];
            e[i] = k.one();
            e
        })
        .collect()
}

/// Result of repeated isotropic-vector steps.
#[derive(Clone, Debug)]
pub struct IsotropicFlag<E> {
    /// Mutually orthogonal isotropic vectors (ambient coordinates).
    pub vectors: Vec<Vec<E>>,
    /// Basis of the space the last vector was found in (ambient coordinates).
    pub residual_basis: Vec<Vec<E>>,
    pub residual_gram: Gram<E>,
    /// Number of steps that split a hyperbolic plane (the rest used radical vectors).
    pub splits: usize,
}

/// Performs `steps` steps; each finds an isotropic vector of the current
/// space and passes to the orthogonal complement of its hyperbolic pair
/// (or to a complement of it, when it lies in the radical). With
/// `descend_last = false` the last vector is found but not split off.
pub fn isotropic_flag<K: LocalField>(
    k: &K,
    g: &[Vec<K::Elem>],
    steps: usize,
    descend_last: bool,
) -> Result<IsotropicFlag<K::Elem>, QuadError> {
    let m = g.len();
    let mut basis: Vec<Vec<K::Elem>> = linalg::identity(k, m);
    let mut gram: Gram<K::Elem> = g.to_vec();
    let mut vectors = Vec::with_capacity(steps);
    let mut splits = 0;
    for step in 0..steps {
        if gram.is_empty() {
            return Err(QuadError::Precondition("space exhausted".into()));
        }
        let v = find_isotropic_vector(k, &gram)?;
        vectors.push(linalg::combine(k, &v, &basis, m));
        if step + 1 == steps && !descend_last {
            break;
        }
        let gv = linalg::mat_vec(k, &gram, &v);
        let (local_basis, local_gram) = if gv.iter().all(|x| k.is_zero(x)) {
            let c = radical_complement(k, &v);
            let lg = restrict_gram(k, &gram, &c);
            (c, lg)
        } else {
            let s = split_hyperbolic(k, &gram, &v)?;
            splits += 1;
            (s.residual_basis, s.residual_gram)
        };
        basis = local_basis.iter().map(|c| linalg::combine(k, c, &basis, m)).collect();
        gram = local_gram;
    }
    Ok(IsotropicFlag { vectors, residual_basis: basis, residual_gram: gram, splits })
}

/// A totally isotropic subspace over `L` (possibly `L = Q_p`), with basis
/// vectors in ambient coordinates.
#[derive(Clone, Debug)]
pub struct IsotropicWitness {
    pub field: QuadExt,
    pub basis: Vec<Vec<QuadElem>>,
    pub residual: Option<Gram<PAdic>>,
}

impl IsotropicWitness {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn descriptor(&self) -> ExtDescriptor {
        self.field.descriptor()
    }
}

fn embed_vec(l: &QuadExt, v: &[PAdic]) -> Vec<QuadElem> {
    v.iter().map(|x| l.embed(x)).collect()
}

pub fn embed_gram(l: &QuadExt, g: &[Vec<PAdic>]) -> Gram<QuadElem> {
    g.iter().map(|r| embed_vec(l, r)).collect()
}

/// k-dimensional totally isotropic subspace over Q_p for `dim ≥ 5 + 2(k−1)`.
pub fn totally_isotropic_subspace(k: &QpField, g: &[Vec<PAdic>], dim: usize) -> Result<IsotropicWitness, QuadError> {
    with_guard(k, g, |kk, gg| subspace_unguarded(kk, gg, dim))
}

fn subspace_unguarded(k: &QpField, g: &[Vec<PAdic>], dim: usize) -> Result<IsotropicWitness, QuadError> {
    if dim == 0 || g.len() < 5 + 2 * (dim - 1) {
        return Err(QuadError::Precondition(format!(
            "a {}-dimensional form is not guaranteed to contain a {dim}-dimensional isotropic subspace",
            g.len()
        )));
    }
    let flag = isotropic_flag(k, g, dim, false)?;
    let l = QuadExt::degenerate(k.clone());
    Ok(IsotropicWitness {
        basis: flag.vectors.iter().map(|v| embed_vec(&l, v)).collect(),
        field: l,
        residual: Some(flag.residual_gram),
    })
}

/// A square root of `x ∈ Q_p` in `L = Q_p(√x)`: returns `(L, s)` with `s² = x`.
pub fn sqrt_in_extension(k: &QpField, x: &PAdic) -> Result<(QuadExt, QuadElem), QuadError> {
    if x.is_zero() {
        let l = QuadExt::degenerate(k.clone());
        return Ok((l.clone(), l.zero()));
    }
    let l = QuadExt::adjoining_sqrt(k.clone(), x)?;
    if l.kind() == ExtKind::Degenerate {
        let s = k.sqrt(x)?;
        return Ok((l.clone(), l.embed(&s)));
    }
    // x = d · r² with r ∈ Q_p
    let d = k.from_int(&l.d());
    let r = k.sqrt(&k.div(x, &d).unwrap())?;
    Ok((l, QuadElem { a: PAdic::exact_zero(), b: r }))
}

/// A nonzero zero of `a u² + 2b uv + c v²` over `L = Q_p(√(b² − ac))`.
pub fn binary_zero(k: &QpField, a: &PAdic, b: &PAdic, c: &PAdic) -> Result<(QuadExt, [QuadElem; 2]), QuadError> {
    if a.is_zero() {
        let l = QuadExt::degenerate(k.clone());
        return Ok((l.clone(), [l.one(), l.zero()]));
    }
    let minus_disc = k.sub(&k.mul(b, b), &k.mul(a, c));
    let (l, s) = sqrt_in_extension(k, &minus_disc)?;
    let u = l.add(&l.neg(&l.embed(b)), &s);
    Ok((l.clone(), [u, l.embed(a)]))
}

/// A 2-dimensional totally isotropic subspace of a quaternary form over a
/// quadratic extension (or Q_p itself), by cases: singular, isotropic,
/// anisotropic.
pub fn isotropic_plane_dim4(k: &QpField, g: &[Vec<PAdic>]) -> Result<IsotropicWitness, QuadError> {
    with_guard(k, g, plane_dim4_unguarded)
}

fn plane_dim4_unguarded(k: &QpField, g: &[Vec<PAdic>]) -> Result<IsotropicWitness, QuadError> {
    if g.len() != 4 {
        return Err(QuadError::Precondition(format!("expected a 4-dimensional form, got {}", g.len())));
    }
    if k.p() == 2 {
        return Err(QuadError::Precondition("p = 2 is not supported for quadratic forms".into()));
    }
    check_symmetric(k, g)?;
    let ker = linalg::kernel(k, g, 4);
    if let Some(mut k0) = ker.into_iter().next() {
        // singular: kernel vector plus a zero of the form on two complement coordinates
        k.make_primitive(&mut k0);
        let comp = radical_complement(k, &k0);
        let t = restrict_gram(k, g, &comp);
        let (l, z) = binary_zero(k, &t[0][0], &t[0][1], &t[1][1])?;
        let zc = combine_ext(&l, &z, &[embed_vec(&l, &comp[0]), embed_vec(&l, &comp[1])]);
        return Ok(IsotropicWitness { basis: vec![embed_vec(&l, &k0), zc], field: l, residual: None });
    }
    if is_isotropic(k, g)? {
        let v = find_isotropic_vector(k, g)?;
        let s = split_hyperbolic(k, g, &v)?;
        let r = &s.residual_gram;
        let (l, z) = binary_zero(k, &r[0][0], &r[0][1], &r[1][1])?;
        let zc = combine_ext(&l, &z, &[embed_vec(&l, &s.residual_basis[0]), embed_vec(&l, &s.residual_basis[1])]);
        return Ok(IsotropicWitness { basis: vec![embed_vec(&l, &v), zc], field: l, residual: None });
    }
    // anisotropic: Q/d1 = y1² − a y2² − b y3² + ab (s y4)²
    let dz = diagonalize(k, g)?;
    let d1 = dz.diag[0].clone();
    let e: Vec<PAdic> = dz.diag.iter().map(|d| k.div(d, &d1).unwrap()).collect();
    let a = k.neg(&e[1]);
    let b = k.neg(&e[2]);
    let ratio = k.div(&e[3], &k.mul(&e[1], &e[2])).unwrap();
    let s = k.sqrt(&ratio).map_err(|err| match err {
        PAdicError::NotASquare | PAdicError::OddValuation(_) => {
            QuadError::Precision("normal-form scaling factor is not a square at this precision".into())
        }
        other => other.into(),
    })?;
    let (l, u) = sqrt_in_extension(k, &k.neg(&k.mul(&a, &b)))?;
    let s_inv = l.embed(&k.inv(&s).unwrap());
    let y1 = [u.clone(), l.zero(), l.zero(), s_inv];
    let y2 = [l.zero(), l.embed(&b), u, l.zero()];
    let cols: Vec<Vec<QuadElem>> = dz.basis.iter().map(|c| embed_vec(&l, c)).collect();
    let b1 = combine_ext(&l, &y1, &cols);
    let b2 = combine_ext(&l, &y2, &cols);
    Ok(IsotropicWitness { basis: vec![b1, b2], field: l, residual: None })
}

/// Digits a witness may lose relative to the working precision.
pub const WITNESS_SLACK: i64 = 5;

/// Internal guard digits, as multiples of the working precision.
const GUARD_FACTORS: [u32; 3] = [1, 2, 4];

/// Runs `build` on the input padded to higher precision (entries read as
/// their integer representatives, so a witness for the padded form is one
/// for the input to working precision), then saturates and truncates.
/// Near-radical splits cancel many digits; retries with a larger guard
/// until the witness holds to `N − WITNESS_SLACK`.
fn with_guard(
    k: &QpField,
    g: &[Vec<PAdic>],
    build: impl Fn(&QpField, &[Vec<PAdic>]) -> Result<IsotropicWitness, QuadError>,
) -> Result<IsotropicWitness, QuadError> {
    let n = k.precision();
    let mut last = QuadError::Precision("no guard attempted".into());
    for factor in GUARD_FACTORS {
        let hi = k.with_precision(n + factor * n);
        let gh: Gram<PAdic> = g.iter().map(|r| r.iter().map(|a| hi.from_rational(&k.to_rational(a))).collect()).collect();
        let attempt = build(&hi, &gh).and_then(|w| truncate_witness(k, &w));
        match attempt {
            Ok(w) => match witness_precision(&w, g) {
                Ok(Some(v)) if v < n as i64 - WITNESS_SLACK => {
                    last = QuadError::Precision(format!("witness holds only to {v} digits"));
                }
                Ok(_) => return Ok(w),
                Err(e @ QuadError::Precision(_)) => last = e,
                Err(e) => return Err(e),
            },
            Err(e @ QuadError::Precision(_)) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

fn truncate_witness(k: &QpField, w: &IsotropicWitness) -> Result<IsotropicWitness, QuadError> {
    let hi = w.field.base();
    let basis = saturate(&w.field, &w.basis)?;
    let l = QuadExt::new(k.clone(), w.field.class())?;
    let cut = |a: &PAdic| k.from_rational(&hi.to_rational(a));
    Ok(IsotropicWitness {
        basis: basis.iter().map(|v| v.iter().map(|x| QuadElem { a: cut(&x.a), b: cut(&x.b) }).collect()).collect(),
        field: l,
        residual: w.residual.as_ref().map(|r| r.iter().map(|row| row.iter().map(|a| cut(a)).collect()).collect()),
    })
}

fn combine_ext(l: &QuadExt, coeffs: &[QuadElem], vectors: &[Vec<QuadElem>]) -> Vec<QuadElem> {
    let dim = vectors[0].len();
    linalg::combine(l, coeffs, vectors, dim)
}

/// A 10-dimensional totally isotropic subspace over some `L` with
/// `[L : Q_p] ≤ 2` for a 20-variable form: eight isotropic steps over Q_p,
/// then a plane in four of the remaining directions.
pub fn isotropic_10space_20var(k: &QpField, g: &[Vec<PAdic>]) -> Result<IsotropicWitness, QuadError> {
    if g.len() != 20 {
        return Err(QuadError::Precondition(format!("expected a 20-dimensional form, got {}", g.len())));
    }
    isotropic_space_with_plane(k, g, 8)
}

/// `steps` isotropic steps followed by a plane in the first four residual directions.
pub fn isotropic_space_with_plane(k: &QpField, g: &[Vec<PAdic>], steps: usize) -> Result<IsotropicWitness, QuadError> {
    with_guard(k, g, |kk, gg| space_with_plane_unguarded(kk, gg, steps))
}

fn space_with_plane_unguarded(k: &QpField, g: &[Vec<PAdic>], steps: usize) -> Result<IsotropicWitness, QuadError> {
    let flag = isotropic_flag(k, g, steps, true)?;
    if flag.residual_basis.len() < 4 {
        return Err(QuadError::Precondition("fewer than four residual directions".into()));
    }
    let four: Vec<Vec<PAdic>> = flag.residual_basis[..4].to_vec();
    let g4 = restrict_gram(k, g, &four);
    let plane = plane_dim4_unguarded(k, &g4)?;
    let l = plane.field.clone();
    let four_l: Vec<Vec<QuadElem>> = four.iter().map(|v| embed_vec(&l, v)).collect();
    let mut basis: Vec<Vec<QuadElem>> = flag.vectors.iter().map(|v| embed_vec(&l, v)).collect();
    for pv in &plane.basis {
        basis.push(combine_ext(&l, pv, &four_l));
    }
    Ok(IsotropicWitness { basis, field: l, residual: Some(flag.residual_gram) })
}

/// Replaces `vectors` by a basis of the same span over `K` whose
/// reductions mod π are independent (a basis of the saturated lattice).
pub fn saturate<K: LocalField>(k: &K, vectors: &[Vec<K::Elem>]) -> Result<Vec<Vec<K::Elem>>, QuadError> {
    let mut vs: Vec<Vec<K::Elem>> = vectors.to_vec();
    let rf = k.residue_field();
    let budget = 64 * (vs.len() + 1) * (k.precision() as usize + 1);
    for _ in 0..budget {
        for v in vs.iter_mut() {
            if k.make_primitive(v).is_none() {
                return Err(QuadError::Precision("vector vanished during saturation".into()));
            }
        }
        let red: Vec<Vec<u64>> = vs
            .iter()
            .map(|v| v.iter().map(|x| k.residue(x).ok_or_else(|| QuadError::Precision("entry lost all precision".into()))).collect())
            .collect::<Result<_, _>>()?;
        // relation among the residues: kernel of the transpose
        let rel = linalg::kernel(&rf, &linalg::transpose(&red), vs.len());
        let Some(c) = rel.into_iter().next() else {
            return Ok(vs);
        };
        let i = c.iter().rposition(|&x| x != 0).unwrap();
        let dim = vs[0].len();
        let coeffs: Vec<K::Elem> = c.iter().map(|&r| k.lift(r)).collect();
        let comb = linalg::combine(k, &coeffs, &vs, dim);
        vs[i] = comb;
    }
    Err(QuadError::Precision("saturation did not terminate".into()))
}

/// Smallest valuation (in Q_p digits, rounded down) among the pairwise
/// values `B(b_i, b_j)` after scaling the Gram matrix and the basis to be
/// primitive. `None` if every value vanishes to working precision.
pub fn witness_precision(w: &IsotropicWitness, g: &[Vec<PAdic>]) -> Result<Option<i64>, QuadError> {
    let l = &w.field;
    let gl = embed_gram(l, g);
    let Some(gs) = scaled_primitive(l, &gl) else {
        return Ok(None);
    };
    let basis = saturate(l, &w.basis)?;
    let e = l.ramification() as i64;
    let mut worst: Option<i64> = None;
    for i in 0..basis.len() {
        for j in i..basis.len() {
            let val = linalg::bilinear(l, &gs, &basis[i], &basis[j]);
            let v = l.valuation(&val).unwrap_or_else(|| l.abs_precision(&val)).div_euclid(e);
            worst = Some(worst.map_or(v, |x| x.min(v)));
        }
    }
    Ok(worst)
}

/// `{"dim":4, "context":{"p":5,"N":30}, "gram":[[…]]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticSpaceJson {
    pub dim: usize,
    pub context: SpaceContext,
    pub gram: Vec<Vec<PAdicJson>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceContext {
    pub p: u64,
    #[serde(rename = "N")]
    pub n: u32,
}

impl QuadraticSpaceJson {
    pub fn from_gram(k: &QpField, g: &[Vec<PAdic>]) -> Self {
        QuadraticSpaceJson {
            dim: g.len(),
            context: SpaceContext { p: k.p(), n: k.precision() },
            gram: g.iter().map(|r| r.iter().map(|x| k.to_json(x)).collect()).collect(),
        }
    }

    pub fn to_gram(&self) -> Result<(QpField, Gram<PAdic>), QuadError> {
        let k = QpField::new(self.context.p, self.context.n);
        if self.gram.len() != self.dim || self.gram.iter().any(|r| r.len() != self.dim) {
            return Err(QuadError::NotSymmetric);
        }
        let g: Gram<PAdic> = self
            .gram
            .iter()
            .map(|r| r.iter().map(|x| k.from_json(x)).collect::<Result<Vec<_>, _>>())
            .collect::<Result<_, _>>()?;
        check_symmetric(&k, &g)?;
        Ok((k, g))
    }
}

/// Gram matrix of an integer diagonal form.
pub fn diagonal_gram(k: &QpField, d: &[i64]) -> Gram<PAdic> {
    let n = d.len();
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { k.from_i64(d[i]) } else { k.zero() }).collect())
        .collect()
}

/// Gram matrix from integer entries of `2G` (so odd cross terms are allowed).
pub fn gram_from_doubled(k: &QpField, twice: &[Vec<i64>]) -> Gram<PAdic> {
    let half = k.inv(&k.from_i64(2)).unwrap();
    twice.iter().map(|r| r.iter().map(|&x| k.mul(&k.from_i64(x), &half)).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::Rationals;
    use num_rational::BigRational;

    fn q5() -> QpField {
        QpField::new(5, 30)
    }

    fn hyperbolic(k: &QpField, planes: usize, extra: &[i64]) -> Gram<PAdic> {
        let n = 2 * planes + extra.len();
        let mut g = vec![vec![0i64; n]; n];
        for i in 0..planes {
            g[2 * i][2 * i + 1] = 1;
            g[2 * i + 1][2 * i] = 1;
        }
        for (t, &d) in extra.iter().enumerate() {
            g[2 * planes + t][2 * planes + t] = 2 * d;
        }
        gram_from_doubled(k, &g)
    }

    #[test]
    fn diagonalize_hyperbolic_plane_over_q() {
        let h = BigRational::new(1.into(), 2.into());
        let z = BigRational::from_integer(0.into());
        let g = vec![vec![z.clone(), h.clone()], vec![h, z]];
        let dz = diagonalize(&Rationals, &g).unwrap();
        let t = dz.transform();
        let c = linalg::mat_mul(&Rationals, &linalg::mat_mul(&Rationals, &linalg::transpose(&t), &g), &t);
        assert_eq!(c[0][1], BigRational::from_integer(0.into()));
        assert_eq!(c[0][0], dz.diag[0]);
        assert_eq!(c[1][1], dz.diag[1]);
        assert!(dz.diag[0].clone() * dz.diag[1].clone() < BigRational::from_integer(0.into()));
    }

    #[test]
    fn invariants_examples() {
        let k = q5();
        let inv = invariants(&k, &hyperbolic(&k, 1, &[])).unwrap();
        assert_eq!(inv.rank, 2);
        assert_eq!(inv.disc, k.square_class(&k.from_i64(-1)).unwrap());
        assert_eq!(inv.hasse, 1);
        let inv = invariants(&k, &diagonal_gram(&k, &[1, 1, 1, 1])).unwrap();
        assert!(inv.disc.is_trivial());
        assert_eq!(inv.hasse, 1);
    }

    #[test]
    fn isotropy_examples() {
        let k = q5();
        assert!(!is_isotropic(&k, &diagonal_gram(&k, &[1, -2, -5, 10])).unwrap());
        assert!(is_isotropic(&k, &diagonal_gram(&k, &[1, 1])).unwrap());
        assert!(is_isotropic(&k, &diagonal_gram(&k, &[1, 2, 5, 7, 3])).unwrap());
        assert_eq!(find_isotropic_vector(&k, &diagonal_gram(&k, &[1, -2, -5, 10])), Err(QuadError::Anisotropic));
        let v = find_isotropic_vector(&k, &hyperbolic(&k, 1, &[])).unwrap();
        assert_eq!(v, vec![k.one(), k.zero()]);
        let g = diagonal_gram(&k, &[1, 1]);
        let v = find_isotropic_vector(&k, &g).unwrap();
        assert!(quad_value(&k, &g, &v).is_zero());
    }

    #[test]
    fn split_examples() {
        let k = q5();
        // x1 x2 + x3²
        let g = hyperbolic(&k, 1, &[1]);
        let e1 = vec![k.one(), k.zero(), k.zero()];
        let s = split_hyperbolic(&k, &g, &e1).unwrap();
        assert_eq!(s.residual_basis.len(), 1);
        assert!(k.eq_approx(&s.residual_gram[0][0], &k.one()));
        assert!(k.eq_approx(&linalg::bilinear(&k, &g, &s.v, &s.w), &k.one()));
        assert!(quad_value(&k, &g, &s.w).is_zero());
        let radical = diagonal_gram(&k, &[1, 0]);
        assert_eq!(split_hyperbolic(&k, &radical, &[k.zero(), k.one()]).unwrap_err(), QuadError::InRadical);
    }

    #[test]
    fn subspace_of_hyperbolic_sum() {
        let k = q5();
        let g = hyperbolic(&k, 8, &[1, 1, 1, 1]);
        let w = totally_isotropic_subspace(&k, &g, 8).unwrap();
        for (i, v) in w.basis.iter().enumerate() {
            for (j, x) in v.iter().enumerate() {
                let expect = if j == 2 * i { 1 } else { 0 };
                assert!(w.field.eq_approx(x, &w.field.from_i64(expect)), "vector {i} coord {j}");
            }
        }
        assert!(totally_isotropic_subspace(&k, &diagonal_gram(&k, &[1, 1, 1, 1]), 2).is_err());
    }

    #[test]
    fn plane_cases() {
        let k = q5();
        // singular: x1 x2 in four variables
        let mut g = vec![vec![0i64; 4]; 4];
        g[0][1] = 1;
        g[1][0] = 1;
        let g = gram_from_doubled(&k, &g);
        let w = isotropic_plane_dim4(&k, &g).unwrap();
        assert_eq!(w.field.kind(), ExtKind::Degenerate);
        assert!(witness_precision(&w, &g).unwrap().map_or(true, |v| v >= 25));

        let k7 = QpField::new(7, 30);
        let g = hyperbolic(&k7, 1, &[1, 1]);
        let w = isotropic_plane_dim4(&k7, &g).unwrap();
        assert_eq!(w.field.kind(), ExtKind::Unramified);
        assert!(!k7.is_square(&k7.from_i64(-1)).unwrap());
        assert!(QuadExt::adjoining_sqrt(k7.clone(), &k7.from_i64(-1)).unwrap().class() == w.field.class());
        assert!(witness_precision(&w, &g).unwrap().map_or(true, |v| v >= 25));

        let g = diagonal_gram(&k, &[1, -2, -5, 10]);
        let w = isotropic_plane_dim4(&k, &g).unwrap();
        assert_eq!(w.field.kind(), ExtKind::Ramified);
        assert_eq!(w.field.class(), k.square_class(&k.from_i64(-10)).unwrap());
        assert!(witness_precision(&w, &g).unwrap().map_or(true, |v| v >= 25));
    }

    #[test]
    fn ten_space() {
        let k = q5();
        let g = hyperbolic(&k, 10, &[]);
        let w = isotropic_10space_20var(&k, &g).unwrap();
        assert_eq!(w.dim(), 10);
        assert_eq!(w.field.kind(), ExtKind::Degenerate);
        assert!(witness_precision(&w, &g).unwrap().map_or(true, |v| v >= 25));

        let mut g = vec![vec![0i64; 20]; 20];
        for i in 0..8 {
            g[2 * i][2 * i + 1] = 1;
            g[2 * i + 1][2 * i] = 1;
        }
        for (t, d) in [1, -2, -5, 10].iter().enumerate() {
            g[16 + t][16 + t] = 2 * d;
        }
        let g = gram_from_doubled(&k, &g);
        let w = isotropic_10space_20var(&k, &g).unwrap();
        assert_eq!(w.field.class(), k.square_class(&k.from_i64(-10)).unwrap());
        assert!(witness_precision(&w, &g).unwrap().map_or(true, |v| v >= 25));
    }

    #[test]
    fn json_round_trip() {
        let k = q5();
        let g = hyperbolic(&k, 1, &[3]);
        let j = QuadraticSpaceJson::from_gram(&k, &g);
        let s = serde_json::to_string(&j).unwrap();
        let (k2, g2) = serde_json::from_str::<QuadraticSpaceJson>(&s).unwrap().to_gram().unwrap();
        assert_eq!(k2, k);
        assert_eq!(g2, g);
    }
}
