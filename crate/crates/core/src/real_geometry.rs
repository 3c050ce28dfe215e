//! Real geometry of cubic hypersurfaces in floating point: Hessian
//! signatures, real points, base points with indefinite Hessians, root
//! tracking of `z ↦ F(ℓ(t), z)` along antipodally symmetric loops, and the
//! reduced cubic–quadric and three-form systems.

use nalgebra::{DMatrix, Matrix3, SymmetricEigen, Vector3};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr_free::standard_normal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forms::{Form, FormError, FormJson, Monomial, RatForm};
use crate::linalg;
use crate::ring::{rational_to_f64, Rationals, Reals};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RealError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("budget exhausted: {0}")]
    Budget(String),
    #[error("continuation ambiguous near t = {0}")]
    Ambiguous(f64),
    #[error(transparent)]
    Form(#[from] FormError),
}

/// Default eigenvalue tolerance, relative to the largest |eigenvalue|.
pub const EIGEN_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignatureReport {
    pub sigma_plus: usize,
    pub sigma_minus: usize,
    pub rank: usize,
    /// `min(sigma_plus, sigma_minus)`.
    pub sigma: usize,
    pub eigen_tolerance: f64,
    /// Smallest |eigenvalue| counted as nonzero (0 if none).
    pub min_abs_kept_eigenvalue: f64,
    /// Rank claims are conclusive only when the smallest kept eigenvalue
    /// exceeds ten times the absolute threshold.
    pub conclusive: bool,
}

/// Signature of a symmetric matrix; eigenvalues with `|λ| ≤ tol·max|λ|` count as zero.
pub fn hessian_signature(h: &[Vec<f64>], tol: f64) -> SignatureReport {
    let n = h.len();
    let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (h[i][j] + h[j][i]));
    let eig = if n == 0 { Vec::new() } else { SymmetricEigen::new(m).eigenvalues.iter().copied().collect::<Vec<f64>>() };
    let scale = eig.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    let threshold = tol * scale;
    let kept: Vec<f64> = eig.iter().copied().filter(|l| l.abs() > threshold && scale > 0.0).collect();
    let sigma_plus = kept.iter().filter(|&&l| l > 0.0).count();
    let sigma_minus = kept.len() - sigma_plus;
    let min_abs = kept.iter().fold(f64::INFINITY, |a, &l| a.min(l.abs()));
    let min_abs = if kept.is_empty() { 0.0 } else { min_abs };
    let zeroish = eig.iter().filter(|l| l.abs() <= threshold || scale == 0.0).fold(0.0f64, |a, &l| a.max(l.abs()));
    SignatureReport {
        sigma_plus,
        sigma_minus,
        rank: kept.len(),
        sigma: sigma_plus.min(sigma_minus),
        eigen_tolerance: tol,
        min_abs_kept_eigenvalue: min_abs,
        conclusive: kept.is_empty() || (min_abs > 10.0 * threshold && zeroish <= threshold),
    }
}

/// `H_x[i][j] = Φ(x, e_i, e_j)`.
pub fn hessian_at(f: &Form<f64>, x: &[f64]) -> Result<Vec<Vec<f64>>, RealError> {
    Ok(f.polar(&Reals)?.hessian_matrix_f64(x)?)
}

/// Minimal standard-normal sampler (Box–Muller) so that `rand` alone suffices.
mod rand_distr_free {
    use rand::Rng;

    pub fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
        let u: f64 = rng.gen_range(f64::EPSILON..1.0);
        let v: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
    }
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn normalize(x: &mut [f64]) {
    let s = norm(x);
    if s > 0.0 {
        x.iter_mut().for_each(|a| *a /= s);
    }
}

// ---------------------------------------------------------------------------
// cubic in the last variable

/// A cubic form written as `A z³ + B(y) z² + C(y) z + D(y)` in the last
/// variable `z` after a fixed linear change `x = T x'` (columns of `T`).
#[derive(Clone, Debug)]
pub struct FiberCubic {
    pub form: Form<f64>,
    pub transform: Vec<Vec<f64>>,
    n: usize,
}

impl FiberCubic {
    pub fn new(f: &Form<f64>) -> Result<Self, RealError> {
        if f.degree() != 3 {
            return Err(FormError::WrongDegree { expected: 3, got: f.degree() }.into());
        }
        let n = f.n_vars();
        if n < 2 {
            return Err(RealError::Precondition("need at least two variables".into()));
        }
        let scale = f.terms().fold(0.0f64, |a, (_, c)| a.max(c.abs()));
        if scale == 0.0 {
            return Err(RealError::Precondition("zero form".into()));
        }
        let id = linalg::identity(&Reals, n);
        let lead = |c: &[f64]| f.eval_unchecked(&Reals, c);
        if lead(&id[n - 1]).abs() > 1e-6 * scale {
            return Ok(FiberCubic { form: f.clone(), transform: id, n });
        }
        // x_i = x'_i + c_i x'_n with small integer c, first that makes F(c, 1) large
        for k in 1..64i64 {
            let mut c: Vec<f64> = (0..n - 1).map(|i| (((i as i64 + 1) * k) % 7 - 3) as f64).collect();
            c.push(1.0);
            if lead(&c).abs() > 1e-3 * scale {
                let mut t = id.clone();
                t[n - 1] = c;
                let form = f.substitute_unchecked(&Reals, &t);
                return Ok(FiberCubic { form, transform: t, n });
            }
        }
        Err(RealError::Precondition("no generic coordinate change found".into()))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Coefficients `[D, C, B, A]` of the fiber polynomial over `y`.
    pub fn fiber(&self, y: &[f64]) -> [f64; 4] {
        let mut x = y.to_vec();
        x.push(0.0);
        let mut e = vec![0.0; self.n];
        e[self.n - 1] = 1.0;
        let c = self.form.binary_unchecked(&Reals, &x, &e);
        [c[0], c[1], c[2], c[3]]
    }

    /// Back to original coordinates.
    pub fn point(&self, y: &[f64], z: f64) -> Vec<f64> {
        let mut xp = y.to_vec();
        xp.push(z);
        linalg::combine(&Reals, &xp, &self.transform, self.n)
    }

    pub fn residual(&self, y: &[f64], z: f64) -> f64 {
        let mut xp = y.to_vec();
        xp.push(z);
        self.form.eval_unchecked(&Reals, &xp)
    }
}

/// Real roots (ascending, double roots repeated) of `c0 + c1 z + c2 z² + c3 z³`, `c3 ≠ 0`.
pub fn real_cubic_roots(c: [f64; 4]) -> Vec<f64> {
    let [d, cc, b, a] = c;
    let (a2, a1, a0) = (b / a, cc / a, d / a);
    let shift = a2 / 3.0;
    let p = a1 - a2 * a2 / 3.0;
    let q = 2.0 * a2.powi(3) / 27.0 - a2 * a1 / 3.0 + a0;
    let disc = -(4.0 * p.powi(3) + 27.0 * q * q);
    let mut roots = if disc > 0.0 {
        let r = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q / (2.0 * p)) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let theta = arg.acos() / 3.0;
        (0..3).map(|k| r * (theta - std::f64::consts::TAU * k as f64 / 3.0).cos() - shift).collect::<Vec<_>>()
    } else if disc == 0.0 && p != 0.0 {
        let u = 3.0 * q / p;
        vec![u - shift, -u / 2.0 - shift, -u / 2.0 - shift]
    } else {
        let s = (q * q / 4.0 + p.powi(3) / 27.0).max(0.0).sqrt();
        vec![(-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt() - shift]
    };
    let eval = |z: f64| ((a * z + b) * z + cc) * z + d;
    let deriv = |z: f64| (3.0 * a * z + 2.0 * b) * z + cc;
    for z in roots.iter_mut() {
        for _ in 0..4 {
            let dv = deriv(*z);
            if dv == 0.0 {
                break;
            }
            let step = eval(*z) / dv;
            if !step.is_finite() {
                break;
            }
            *z -= step;
        }
    }
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    roots
}

/// A real zero of F: sample `y` and solve the real cubic fiber (which
/// always has a real root). The result has unit norm.
pub fn sample_real_point<R: Rng>(fc: &FiberCubic, rng: &mut R) -> Result<Vec<f64>, RealError> {
    for _ in 0..1000 {
        let y: Vec<f64> = (0..fc.n - 1).map(|_| standard_normal(rng)).collect();
        let roots = real_cubic_roots(fc.fiber(&y));
        let z = roots[rng.gen_range(0..roots.len())];
        let mut x = fc.point(&y, z);
        normalize(&mut x);
        if fc_residual_ok(&fc.form_original(), &x, 1e-10) {
            return Ok(x);
        }
    }
    Err(RealError::Budget("no well-conditioned real point in 1000 samples".into()))
}

impl FiberCubic {
    fn form_original(&self) -> OriginalForm<'_> {
        OriginalForm(self)
    }
}

/// Evaluates the original form by pulling back through the transform.
struct OriginalForm<'a>(&'a FiberCubic);

impl OriginalForm<'_> {
    fn eval(&self, x: &[f64]) -> f64 {
        let t = &self.0.transform;
        let n = self.0.n;
        // solve T x' = x (T is unipotent: only the last column is non-trivial)
        let z = x[n - 1] / t[n - 1][n - 1];
        let mut xp: Vec<f64> = (0..n - 1).map(|i| x[i] - t[n - 1][i] * z).collect();
        xp.push(z);
        self.0.form.eval_unchecked(&Reals, &xp)
    }
}

fn fc_residual_ok(f: &OriginalForm<'_>, x: &[f64], tol: f64) -> bool {
    f.eval(x).abs() < tol
}

// ---------------------------------------------------------------------------
// base points

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasePointReport {
    pub x: Vec<f64>,
    pub residual: f64,
    pub signature: SignatureReport,
    pub trials_used: usize,
    pub walked: bool,
    pub seed: u64,
    pub transform: Vec<Vec<f64>>,
}

/// Whether a signature satisfies `rank ≥ n − 1` and `σ ≥ ⌊(n−2)/2⌋`, conclusively.
pub fn base_point_ok(report: &SignatureReport, n: usize) -> bool {
    report.conclusive && report.rank + 1 >= n && report.sigma >= (n.saturating_sub(2)) / 2
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn first_success<T: Send>(count: usize, f: impl Fn(usize) -> Option<T> + Sync + Send) -> Option<T> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count).into_par_iter().find_map_first(f)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).find_map(f)
    }
}

/// A real point `x` on F = 0 whose Hessian has rank ≥ n−1 and σ ≥ ⌊(n−2)/2⌋.
/// Random restarts (the lowest successful trial index wins, independent of
/// thread count); after each block of lopsided candidates the best one is
/// walked towards its antipode along the fiber structure, re-testing.
pub fn find_base_point(f: &Form<f64>, trials: usize, tol: f64, seed: u64) -> Result<BasePointReport, RealError> {
    let fc = FiberCubic::new(f)?;
    let n = f.n_vars();
    let polar = f.polar(&Reals)?;
    let report_at = |x: &[f64]| -> Result<SignatureReport, RealError> { Ok(hessian_signature(&polar.hessian_matrix_f64(x)?, tol)) };
    let original = fc.form_original();
    let finish = |x: Vec<f64>, sig: SignatureReport, trials_used: usize, walked: bool| BasePointReport {
        residual: original.eval(&x).abs(),
        x,
        signature: sig,
        trials_used,
        walked,
        seed,
        transform: fc.transform.clone(),
    };
    const BLOCK: usize = 50;
    let mut done = 0;
    while done < trials {
        let block = BLOCK.min(trials - done);
        let found = first_success(block, |i| {
            let mut rng = trial_rng(seed, done + i);
            let x = sample_real_point(&fc, &mut rng).ok()?;
            let sig = report_at(&x).ok()?;
            base_point_ok(&sig, n).then_some((i, x, sig))
        });
        if let Some((i, x, sig)) = found {
            return Ok(finish(x, sig, done + i + 1, false));
        }
        // walk from the first candidate of the block towards its antipode
        let mut rng = trial_rng(seed, done);
        if let Ok(x) = sample_real_point(&fc, &mut rng) {
            if let Some((x, sig)) = walk_to_antipode(&fc, &x, &mut rng, 200, |p| report_at(p).ok().filter(|s| base_point_ok(s, n))) {
                return Ok(finish(x, sig, done + block, true));
            }
        }
        done += block;
    }
    Err(RealError::Budget(format!("no base point in {trials} trials")))
}

/// Follows a real root of the fiber while `y` rotates to `−y` through a
/// random orthogonal direction; returns the first point accepted by `accept`.
fn walk_to_antipode<T>(
    fc: &FiberCubic,
    x: &[f64],
    rng: &mut ChaCha8Rng,
    steps: usize,
    accept: impl Fn(&[f64]) -> Option<T>,
) -> Option<(Vec<f64>, T)> {
    let n = fc.n;
    // coordinates in the transformed frame
    let z = x[n - 1] / fc.transform[n - 1][n - 1];
    let y: Vec<f64> = (0..n - 1).map(|i| x[i] - fc.transform[n - 1][i] * z).collect();
    let ny = norm(&y);
    if ny == 0.0 || n < 3 {
        return None;
    }
    let mut w: Vec<f64> = (0..n - 1).map(|_| standard_normal(rng)).collect();
    let dot: f64 = w.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / (ny * ny);
    w.iter_mut().zip(&y).for_each(|(a, b)| *a -= dot * b);
    let nw = norm(&w);
    if nw == 0.0 {
        return None;
    }
    let mut zc = z;
    for k in 1..=steps {
        let th = std::f64::consts::PI * k as f64 / steps as f64;
        let yk: Vec<f64> = y.iter().zip(&w).map(|(a, b)| th.cos() * a + th.sin() * ny / nw * b).collect();
        let roots = real_cubic_roots(fc.fiber(&yk));
        zc = *roots.iter().min_by(|a, b| (*a - zc).abs().partial_cmp(&(*b - zc).abs()).unwrap())?;
        let mut p = fc.point(&yk, zc);
        normalize(&mut p);
        if let Some(t) = accept(&p) {
            return Some((p, t));
        }
    }
    None
}

// ---------------------------------------------------------------------------
// loops

/// A closed loop in the `y`-space (transformed coordinates, dimension n−1),
/// given on `[0, 1]` from `a` to `−a` and extended by `ℓ(t) = −ℓ(1+t)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LoopSpec {
    /// `ℓ(t) = cos(πt)·u + sin(πt)·v`.
    Circle { u: Vec<f64>, v: Vec<f64> },
    /// Piecewise linear from `points[0]` to `−points[0]` through the given points.
    Polyline { points: Vec<Vec<f64>> },
}

impl LoopSpec {
    pub fn unit_circle(dim: usize) -> Self {
        let mut u = vec![0.0; dim];
        let mut v = vec![0.0; dim];
        u[0] = 1.0;
        v[1.min(dim - 1)] = 1.0;
        LoopSpec::Circle { u, v }
    }

    pub fn dim(&self) -> usize {
        match self {
            LoopSpec::Circle { u, .. } => u.len(),
            LoopSpec::Polyline { points } => points.first().map_or(0, |p| p.len()),
        }
    }

    /// `ℓ(s)` for `s ∈ [0, 1]`.
    pub fn half(&self, s: f64) -> Vec<f64> {
        match self {
            LoopSpec::Circle { u, v } => {
                let (sn, cs) = (std::f64::consts::PI * s).sin_cos();
                u.iter().zip(v).map(|(a, b)| cs * a + sn * b).collect()
            }
            LoopSpec::Polyline { points } => {
                let mut pts = points.clone();
                let last: Vec<f64> = points[0].iter().map(|a| -a).collect();
                if pts.last() != Some(&last) {
                    pts.push(last);
                }
                let segs = (pts.len() - 1) as f64;
                let pos = (s * segs).min(segs - 1e-15).max(0.0);
                let i = pos.floor() as usize;
                let f = pos - i as f64;
                pts[i].iter().zip(&pts[i + 1]).map(|(a, b)| (1.0 - f) * a + f * b).collect()
            }
        }
    }

    /// `ℓ(t)` for `t ∈ [−1, 1]`.
    pub fn at(&self, t: f64) -> Vec<f64> {
        if t >= 0.0 {
            self.half(t)
        } else {
            self.half(1.0 + t).into_iter().map(|a| -a).collect()
        }
    }

    fn validate(&self) -> Result<(), RealError> {
        let ok = match self {
            LoopSpec::Circle { u, v } => u.len() == v.len() && !u.is_empty(),
            LoopSpec::Polyline { points } => !points.is_empty() && points.iter().all(|p| p.len() == points[0].len()),
        };
        if !ok {
            return Err(RealError::Precondition("malformed loop".into()));
        }
        let near_origin = (0..=256).any(|k| norm(&self.half(k as f64 / 256.0)) < 1e-9);
        if near_origin {
            return Err(RealError::Precondition("loop passes through the origin".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoopTrace {
    #[serde(rename = "loop")]
    pub loop_spec: LoopSpec,
    pub samples: usize,
    /// Closed root loops as `(t, x)` sequences.
    pub branches: Vec<Vec<(f64, f64)>>,
    pub winding: Vec<i64>,
    /// Path from `(ℓ(0), x)` to `(ℓ(1), −x) = (−ℓ(0), −x)`.
    pub antipodal_witness: Option<Vec<(f64, f64)>>,
    /// Parameters where the number of real roots changes (bracketed to 1e-12).
    pub multiplicity_changes: Vec<f64>,
    pub min_multiplicity: usize,
    pub max_multiplicity: usize,
    pub max_residual: f64,
    pub refinements: usize,
    pub transform: Vec<Vec<f64>>,
}

impl LoopTrace {
    pub fn total_multiplicity(&self) -> i64 {
        self.winding.iter().sum()
    }
}

struct Sample {
    t: f64,
    roots: Vec<f64>,
}

enum Link {
    Across(usize, usize),
    FoldLeft(usize, usize),
    FoldRight(usize, usize),
}

/// Matches the roots of two neighbouring samples: order-preserving when
/// the counts agree, otherwise the continuing root is the nearest one and
/// the remaining pair is joined by a fold.
fn link(a: &[f64], b: &[f64]) -> Option<Vec<Link>> {
    if a.len() == b.len() {
        return Some((0..a.len()).map(|i| Link::Across(i, i)).collect());
    }
    let (one, three, flip) = if a.len() == 1 { (a, b, false) } else { (b, a, true) };
    if three.len() != 3 || one.len() != 1 {
        return None;
    }
    let c = (0..3).min_by(|&i, &j| (three[i] - one[0]).abs().partial_cmp(&(three[j] - one[0]).abs()).unwrap())?;
    if c == 1 {
        return None;
    }
    let pair = if c == 0 { (1, 2) } else { (0, 1) };
    Some(if flip {
        vec![Link::Across(c, 0), Link::FoldLeft(pair.0, pair.1)]
    } else {
        vec![Link::Across(0, c), Link::FoldRight(pair.0, pair.1)]
    })
}

fn min_gap(r: &[f64]) -> f64 {
    r.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

/// Tracks the real roots of `z ↦ F(ℓ(t), z)` (in the transformed frame)
/// along the loop. The half `[0, 1]` is followed with adaptive steps
/// (at most `1/steps`); the other half is its antipodal image.
pub fn track_roots_along_loop(f: &Form<f64>, spec: &LoopSpec, steps: usize, tol: f64) -> Result<LoopTrace, RealError> {
    let fc = FiberCubic::new(f)?;
    spec.validate()?;
    if spec.dim() != fc.n - 1 {
        return Err(RealError::Precondition(format!("loop dimension {} != n − 1 = {}", spec.dim(), fc.n - 1)));
    }
    let steps = steps.max(8);
    let hmax = 1.0 / steps as f64;
    let hmin = 1e-9;
    let roots_at = |s: f64| real_cubic_roots(fc.fiber(&spec.half(s)));
    let mut half = vec![Sample { t: 0.0, roots: roots_at(0.0) }];
    let mut changes = Vec::new();
    let mut refinements = 0;
    let mut h = hmax;
    while half.last().unwrap().t < 1.0 {
        let cur = half.last().unwrap();
        let t1 = (cur.t + h).min(1.0);
        let next = roots_at(t1);
        if next.len() == cur.roots.len() {
            let gap = min_gap(&cur.roots).min(min_gap(&next));
            let scale = 1.0 + cur.roots.iter().fold(0.0f64, |a, r| a.max(r.abs()));
            let moved = cur.roots.iter().zip(&next).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            let limit = if gap.is_finite() { 0.3 * gap } else { 0.2 * scale };
            // with a constant root count, order matching is correct; large
            // moves only hint at a hidden count change inside the step
            if moved > limit && h > hmin {
                h /= 2.0;
                refinements += 1;
                continue;
            }
            half.push(Sample { t: t1, roots: next });
            h = (h * 1.5).min(hmax);
        } else {
            // bracket the change of root count
            let (mut lo, mut hi) = (cur.t, t1);
            let n_lo = cur.roots.len();
            while hi - lo > 1e-12 {
                let mid = 0.5 * (lo + hi);
                if roots_at(mid).len() == n_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
                refinements += 1;
            }
            changes.push(0.5 * (lo + hi));
            if lo > cur.t {
                half.push(Sample { t: lo, roots: roots_at(lo) });
            }
            let r_hi = roots_at(hi);
            half.push(Sample { t: hi, roots: r_hi });
            h = hmax / 8.0;
        }
    }
    // full loop: [0,1] then the antipodal image of (0,1) on (−1,0)
    let m = half.len() - 1;
    let mut ring: Vec<Sample> = half.iter().map(|s| Sample { t: s.t, roots: s.roots.clone() }).collect();
    for s in &half[1..m] {
        let mut r: Vec<f64> = s.roots.iter().map(|z| -z).collect();
        r.reverse();
        ring.push(Sample { t: s.t - 1.0, roots: r });
    }
    let k = ring.len();
    // node ids
    let offsets: Vec<usize> = ring
        .iter()
        .scan(0, |acc, s| {
            let o = *acc;
            *acc += s.roots.len();
            Some(o)
        })
        .collect();
    let total = offsets.last().unwrap() + ring.last().unwrap().roots.len();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); total];
    for i in 0..k {
        let j = (i + 1) % k;
        let links = link(&ring[i].roots, &ring[j].roots).ok_or(RealError::Ambiguous(ring[i].t))?;
        for l in links {
            let (u, v) = match l {
                Link::Across(a, b) => (offsets[i] + a, offsets[j] + b),
                Link::FoldLeft(a, b) => (offsets[i] + a, offsets[i] + b),
                Link::FoldRight(a, b) => (offsets[j] + a, offsets[j] + b),
            };
            adj[u].push(v);
            adj[v].push(u);
        }
    }
    if adj.iter().any(|a| a.len() != 2) {
        return Err(RealError::Ambiguous(0.0));
    }
    let node_sample: Vec<usize> = (0..k).flat_map(|i| std::iter::repeat(i).take(ring[i].roots.len())).collect();
    let node_value = |u: usize| {
        let i = node_sample[u];
        (ring[i].t, ring[i].roots[u - offsets[i]])
    };
    // cycles
    let mut seen = vec![false; total];
    let mut branches = Vec::new();
    let mut winding = Vec::new();
    let mut cycles: Vec<Vec<usize>> = Vec::new();
    for start in 0..total {
        if seen[start] {
            continue;
        }
        let mut cyc = vec![start];
        seen[start] = true;
        let (mut prev, mut cur) = (start, adj[start][0]);
        while cur != start {
            seen[cur] = true;
            cyc.push(cur);
            let next = if adj[cur][0] == prev { adj[cur][1] } else { adj[cur][0] };
            prev = cur;
            cur = next;
        }
        // signed parameter travel (mod 2)
        let mut travel = 0.0;
        for w in 0..cyc.len() {
            let (a, b) = (node_sample[cyc[w]], node_sample[cyc[(w + 1) % cyc.len()]]);
            let dt = (ring[b].t - ring[a].t + 3.0).rem_euclid(2.0) - 1.0;
            travel += dt;
        }
        let mut wnd = (travel / 2.0).round() as i64;
        if wnd < 0 {
            cyc.reverse();
            wnd = -wnd;
        }
        branches.push(cyc.iter().map(|&u| node_value(u)).collect());
        winding.push(wnd);
        cycles.push(cyc);
    }
    // antipodal witness: from (0, x) along a cycle to (1, −x)
    let mut witness = None;
    'outer: for cyc in &cycles {
        let len = cyc.len();
        for (pos, &u) in cyc.iter().enumerate() {
            if node_sample[u] != 0 {
                continue;
            }
            let x = node_value(u).1;
            for dir in [1isize, -1] {
                let mut path = vec![node_value(u)];
                for step in 1..len {
                    let v = cyc[((pos as isize + dir * step as isize).rem_euclid(len as isize)) as usize];
                    path.push(node_value(v));
                    if node_sample[v] == m && (node_value(v).1 + x).abs() <= 1e-7 * (1.0 + x.abs()) {
                        witness = Some(path);
                        break 'outer;
                    }
                }
            }
        }
    }
    let max_residual = ring
        .iter()
        .flat_map(|s| {
            let y = spec.at(s.t);
            s.roots.iter().map(move |&z| (y.clone(), z)).collect::<Vec<_>>()
        })
        .map(|(y, z)| fc.residual(&y, z).abs())
        .fold(0.0, f64::max);
    let mults: Vec<usize> = ring.iter().map(|s| s.roots.len()).collect();
    let _ = tol;
    Ok(LoopTrace {
        loop_spec: spec.clone(),
        samples: ring.len(),
        branches,
        winding,
        antipodal_witness: witness,
        multiplicity_changes: changes,
        min_multiplicity: *mults.iter().min().unwrap(),
        max_multiplicity: *mults.iter().max().unwrap(),
        max_residual,
        refinements,
        transform: fc.transform.clone(),
    })
}

// ---------------------------------------------------------------------------
// exact systems

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SystemAudit {
    /// Exact rank of the restricted quadratic form.
    pub rank: usize,
    pub rank_target: usize,
    pub signature: SignatureReport,
    pub sigma_at_least_2: bool,
    pub attempts: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedSystem {
    pub cubic: FormJson,
    pub quadric: FormJson,
    /// Coefficients of `Φ(x0, x0, y)`.
    pub linear_form: Vec<String>,
    /// The extra hyperplane `Z` (integer coefficients, `Z(x0) ≠ 0`).
    pub hyperplane: Vec<i64>,
    /// Basis of `{Φ(x0,x0,y) = 0, Z(y) = 0}`; the reduced forms are in these coordinates.
    pub basis: Vec<Vec<String>>,
    pub seed: u64,
    pub audit: SystemAudit,
}

fn rat(n: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn strings(v: &[BigRational]) -> Vec<String> {
    v.iter().map(|c| c.to_string()).collect()
}

/// Quadratic form `Σ_{i≤j} c_ij y_i y_j` from a symmetric matrix.
pub fn quadratic_form_from_matrix(m: &[Vec<BigRational>]) -> RatForm {
    let n = m.len();
    let terms = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).map(|(i, j)| {
        let c = if i == j { m[i][i].clone() } else { &m[i][j] * rat(2) };
        (Monomial::from_variables(n, &[i, j]), c)
    });
    Form::from_accumulated(&Rationals, n, 2, terms)
}

/// Restricts F and `Q_{x0}(y) = Φ(x0, y, y)` to `{Φ(x0,x0,y) = 0} ∩ {Z = 0}`
/// for a random integer hyperplane `Z` with `Z(x0) ≠ 0`, retrying `Z` while
/// the restricted quadric has rank below `n − 3`.
pub fn reduce_to_quadric_cubic_system(f: &RatForm, x0: &[BigRational], seed: u64) -> Result<ReducedSystem, RealError> {
    let n = f.n_vars();
    if f.degree() != 3 || n < 3 {
        return Err(RealError::Precondition("need a cubic form in at least 3 variables".into()));
    }
    if !f.evaluate(&Rationals, x0)?.is_zero() {
        return Err(RealError::Precondition("x0 is not on F = 0".into()));
    }
    let grad = f.gradient(&Rationals, x0)?;
    if grad.iter().all(|c| c.is_zero()) {
        return Err(RealError::Precondition("gradient vanishes at x0".into()));
    }
    let lin: Vec<BigRational> = grad.iter().map(|c| c / rat(3)).collect();
    let h = f.polar(&Rationals)?.hessian_matrix(x0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let budget = 32;
    let mut best: Option<ReducedSystem> = None;
    for attempt in 1..=budget {
        let z: Vec<i64> = (0..n).map(|_| rng.gen_range(-9..=9)).collect();
        let zq: Vec<BigRational> = z.iter().map(|&c| rat(c)).collect();
        let zx: BigRational = zq.iter().zip(x0).map(|(a, b)| a * b).sum();
        if zx.is_zero() {
            continue;
        }
        let ker = linalg::kernel(&Rationals, &[lin.clone(), zq], n);
        if ker.len() != n - 2 {
            continue;
        }
        let cubic = f.substitute(&Rationals, &ker)?;
        let gram = crate::quadforms::restrict_gram(&Rationals, &h, &ker);
        let rank = linalg::rank(&Rationals, &gram);
        let gf: Vec<Vec<f64>> = gram.iter().map(|r| r.iter().map(rational_to_f64).collect()).collect();
        let sig = hessian_signature(&gf, EIGEN_TOLERANCE);
        let sys = ReducedSystem {
            cubic: FormJson::from_rational(&cubic),
            quadric: FormJson::from_rational(&quadratic_form_from_matrix(&gram)),
            linear_form: strings(&lin),
            hyperplane: z,
            basis: ker.iter().map(|v| strings(v)).collect(),
            seed,
            audit: SystemAudit {
                rank,
                rank_target: n - 3,
                sigma_at_least_2: sig.sigma >= 2,
                signature: sig,
                attempts: attempt,
            },
        };
        if rank + 3 >= n {
            return Ok(sys);
        }
        if best.as_ref().map_or(true, |b| b.audit.rank < rank) {
            best = Some(sys);
        }
    }
    best.ok_or_else(|| RealError::Budget("no admissible hyperplane".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothPointReport {
    pub found: bool,
    pub x: Option<Vec<f64>>,
    pub best_residual: f64,
    /// Smallest singular value of the 3×n Jacobian at the reported point.
    pub min_singular_value: f64,
    pub samples: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MwSystem {
    pub cubic: FormJson,
    /// `Φ(x, x, z)`.
    pub quadric: FormJson,
    /// `Φ(x, y, y)`.
    pub linear: FormJson,
    pub report: SmoothPointReport,
}

/// `Φ(x, x, z) = (1/3) Σ_k z_k ∂_k F(x)`.
pub fn polar_quadratic(f: &RatForm, z: &[BigRational]) -> RatForm {
    let n = f.n_vars();
    let mut terms = Vec::new();
    for (m, c) in f.terms() {
        let v = m.variables();
        for skip in 0..3 {
            let rest: Vec<usize> = (0..3).filter(|&i| i != skip).map(|i| v[i]).collect();
            terms.push((Monomial::from_variables(n, &rest), c * &z[v[skip]] / rat(3)));
        }
    }
    Form::from_accumulated(&Rationals, n, 2, terms)
}

/// `Φ(x, y, y) = (1/6) Σ_{j,k} y_j y_k ∂_j ∂_k F(x)`.
pub fn polar_linear(f: &RatForm, y: &[BigRational]) -> RatForm {
    let n = f.n_vars();
    let mut terms = Vec::new();
    for (m, c) in f.terms() {
        let v = m.variables();
        for a in 0..3 {
            for b in 0..3 {
                if a == b {
                    continue;
                }
                let r = 3 - a - b;
                terms.push((Monomial::from_variables(n, &[v[r]]), c * &y[v[a]] * &y[v[b]] / rat(6)));
            }
        }
    }
    Form::from_accumulated(&Rationals, n, 1, terms)
}

/// The forms `F(x)`, `Φ(x,x,z)`, `Φ(x,y,y)` and a numeric search for a
/// common real zero with a full-rank Jacobian (Gauss–Newton on the unit
/// sphere from random starts).
pub fn mordell_weil_system(
    f: &RatForm,
    y: &[BigRational],
    z: &[BigRational],
    samples: usize,
    seed: u64,
) -> Result<MwSystem, RealError> {
    let n = f.n_vars();
    if y.len() != n || z.len() != n {
        return Err(FormError::DimensionMismatch { expected: n, got: y.len().min(z.len()) }.into());
    }
    if f.degree() != 3 {
        return Err(FormError::WrongDegree { expected: 3, got: f.degree() }.into());
    }
    let q = polar_quadratic(f, z);
    let l = polar_linear(f, y);
    let report = smooth_common_zero(&[f.to_f64(), q.to_f64(), l.to_f64()], samples, seed);
    Ok(MwSystem { cubic: FormJson::from_rational(f), quadric: FormJson::from_rational(&q), linear: FormJson::from_rational(&l), report })
}

fn smooth_common_zero(forms: &[Form<f64>; 3], samples: usize, seed: u64) -> SmoothPointReport {
    let n = forms[0].n_vars();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = SmoothPointReport { found: false, x: None, best_residual: f64::INFINITY, min_singular_value: 0.0, samples: 0, seed };
    for s in 1..=samples {
        let mut x: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        normalize(&mut x);
        for _ in 0..60 {
            let r = Vector3::from_iterator(forms.iter().map(|g| g.eval_unchecked(&Reals, &x)));
            let jac: Vec<Vec<f64>> = forms.iter().map(|g| g.gradient_unchecked(&Reals, &x)).collect();
            let j = DMatrix::from_fn(3, n, |a, b| jac[a][b]);
            let jjt: Matrix3<f64> = Matrix3::from_fn(|a, b| (0..n).map(|k| j[(a, k)] * j[(b, k)]).sum());
            let Some(inv) = jjt.try_inverse() else { break };
            let lam = inv * r;
            for k in 0..n {
                x[k] -= (0..3).map(|a| j[(a, k)] * lam[a]).sum::<f64>();
            }
            normalize(&mut x);
            if r.norm() < 1e-14 {
                break;
            }
        }
        let res = forms.iter().map(|g| g.eval_unchecked(&Reals, &x).abs()).fold(0.0, f64::max);
        let jac: Vec<Vec<f64>> = forms.iter().map(|g| g.gradient_unchecked(&Reals, &x)).collect();
        let jjt = Matrix3::from_fn(|a, b| (0..n).map(|k| jac[a][k] * jac[b][k]).sum::<f64>());
        let smin = SymmetricEigen::new(jjt).eigenvalues.iter().fold(f64::INFINITY, |a, &l| a.min(l)).max(0.0).sqrt();
        if res < best.best_residual {
            best.best_residual = res;
            best.x = Some(x.clone());
            best.min_singular_value = smin;
        }
        if res < 1e-10 && smin > 1e-6 {
            best = SmoothPointReport { found: true, x: Some(x), best_residual: res, min_singular_value: smin, samples: s, seed };
            return best;
        }
        best.samples = s;
    }
    best
}

/// Real rational approximations for JSON inputs.
pub fn f64_vec_to_rational(v: &[f64]) -> Vec<BigRational> {
    v.iter()
        .map(|&x| BigRational::from_float(x).unwrap_or_else(BigRational::zero))
        .collect()
}
