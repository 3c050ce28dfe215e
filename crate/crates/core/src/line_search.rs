//! Zeros and lines of cubic forms over p-adic fields.
//!
//! The line pipeline: a smooth zero `x0`, the section `{∇F(x0)·y = 0, y_i = 0}`,
//! a 10-dimensional totally isotropic subspace `W` of the Hessian form at
//! `x0` (over some quadratic extension `L`), a zero `y ∈ W` of `F`, and a
//! pull-back of the `L`-line `(x0, y)` to a line over Q_p. Every output is
//! re-verified in exact arithmetic on rational representatives.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::forms::{Form, FormError, Monomial, RatForm};
use crate::linalg;
use crate::padic::{
    hensel_lift_system, hensel_lift_univariate, ExtDescriptor, ExtKind, LiftError, LocalField, PAdic, Poly, QpField,
    QuadElem, QuadExt, RatQuad, ResidueField, DEFAULT_PRECISION, DEFAULT_SLACK,
};
use crate::quadforms::{self, QuadError};
use crate::ring::{rational_valuation, Field, Rationals, Ring};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LineError {
    #[error("precondition failed: {0}")]
    Precondition(String),
    #[error("no smooth residue zero found ({scanned} points scanned, {zeros} residue zeros, {singular} singular)")]
    NoSmoothZero { scanned: usize, zeros: usize, singular: usize },
    #[error("search budget exhausted after {0} samples")]
    BudgetExhausted(usize),
    #[error("pull-back failed: {0}")]
    PullBack(String),
    #[error("verification failed: precision {achieved} < required {required}")]
    Verification { achieved: i64, required: i64 },
    #[error("stage {stage}: {message}")]
    Stage { stage: String, message: String },
    #[error(transparent)]
    Form(#[from] FormError),
}

impl LineError {
    fn at(stage: &str, e: impl std::fmt::Display) -> Self {
        LineError::Stage { stage: stage.into(), message: e.to_string() }
    }
}

impl From<QuadError> for LineError {
    fn from(e: QuadError) -> Self {
        LineError::at("quadratic", e)
    }
}

impl From<LiftError> for LineError {
    fn from(e: LiftError) -> Self {
        LineError::at("lift", e)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineOptions {
    /// Target precision N (p-adic digits).
    pub precision: u32,
    /// Allowed loss c: lines must verify to N − c.
    pub slack: u32,
    /// Extra working digits carried through the pipeline.
    pub guard: u32,
    pub seed: u64,
    /// Residue points scanned deterministically before random sampling.
    pub scan_budget: usize,
    pub random_budget: usize,
    /// Samples for the cubic–quadric solver.
    pub system_budget: usize,
}

impl Default for LineOptions {
    fn default() -> Self {
        LineOptions {
            precision: DEFAULT_PRECISION,
            slack: DEFAULT_SLACK,
            guard: 15,
            seed: 0,
            scan_budget: 20_000,
            random_budget: 20_000,
            system_budget: 200_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageLog {
    pub stage: String,
    pub detail: serde_json::Value,
}

/// Rational representative of `a + b√d` (`b` omitted when zero).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactScalar {
    pub a: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<String>,
}

impl ExactScalar {
    fn from_pair(x: &(BigRational, BigRational)) -> Self {
        ExactScalar { a: x.0.to_string(), b: (!x.1.is_zero()).then(|| x.1.to_string()) }
    }

    pub fn to_pair(&self) -> Result<(BigRational, BigRational), LineError> {
        let parse = |s: &str| s.parse::<BigRational>().map_err(|_| LineError::Precondition(format!("bad scalar {s:?}")));
        Ok((parse(&self.a)?, self.b.as_deref().map(parse).transpose()?.unwrap_or_else(BigRational::zero)))
    }
}

/// A line spanned by `x0` and `y` over `Q_p` or a quadratic extension,
/// with generators stored as exact rational representatives.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalLine {
    pub p: u64,
    pub field: ExtDescriptor,
    pub x0: Vec<ExactScalar>,
    pub y: Vec<ExactScalar>,
    pub verified_precision: i64,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub stages: Vec<StageLog>,
}

impl LocalLine {
    pub fn generators(&self) -> Result<[Vec<(BigRational, BigRational)>; 2], LineError> {
        let conv = |v: &[ExactScalar]| v.iter().map(|s| s.to_pair()).collect::<Result<Vec<_>, _>>();
        Ok([conv(&self.x0)?, conv(&self.y)?])
    }

    fn kind(&self) -> ExtKind {
        self.field.kind
    }
}

// ---------------------------------------------------------------------------
// residue-field evaluation

/// A form reduced to the residue field, flattened for repeated evaluation.
struct ResidueForm {
    rf: ResidueField,
    n: usize,
    terms: Vec<(Vec<usize>, u64)>,
}

impl ResidueForm {
    fn new<K: LocalField>(k: &K, f: &Form<K::Elem>) -> Self {
        let rf = k.residue_field();
        let terms = f
            .terms()
            .filter_map(|(m, c)| {
                let r = k.residue(c).expect("integral coefficients");
                (r != 0).then(|| (m.variables(), r))
            })
            .collect();
        ResidueForm { rf, n: f.n_vars(), terms }
    }

    fn eval(&self, x: &[u64]) -> u64 {
        let rf = &self.rf;
        self.terms
            .iter()
            .fold(0, |acc, (vars, c)| rf.add(&acc, &vars.iter().fold(*c, |t, &v| rf.mul(&t, &x[v]))))
    }

    fn gradient(&self, x: &[u64]) -> Vec<u64> {
        let rf = &self.rf;
        let mut g = vec![0u64; self.n];
        for (vars, c) in &self.terms {
            for skip in 0..vars.len() {
                let t = vars
                    .iter()
                    .enumerate()
                    .filter(|&(idx, _)| idx != skip)
                    .fold(*c, |t, (_, &v)| rf.mul(&t, &x[v]));
                g[vars[skip]] = rf.add(&g[vars[skip]], &t);
            }
        }
        g
    }

    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Residue vectors ordered by support (last nonzero coordinate equal to one).
fn support_ordered(q: u64, m: usize) -> impl Iterator<Item = Vec<u64>> {
    (0..m).flat_map(move |last| {
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
}

fn primitive_form<K: LocalField>(k: &K, f: &Form<K::Elem>) -> Option<Form<K::Elem>> {
    let m = f.terms().filter_map(|(_, c)| k.valuation(c)).min()?;
    let s = k.uniformizer_pow(-m);
    Some(f.scale(k, &s))
}

fn unit_vector<K: Ring>(k: &K, n: usize, j: usize) -> Vec<K::Elem> {
    let mut e = vec![k.zero(); n];
    e[j] = k.one();
    e
}

/// Statistics of a residue-zero search.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ZeroStats {
    pub scanned: usize,
    pub residue_zeros: usize,
    pub singular: usize,
    pub deep_search: bool,
}

/// Newton along coordinate `j` from `x` if `v(F(x)) > 2·v(∂_j F(x))`.
fn lift_along<K: LocalField>(k: &K, f: &Form<K::Elem>, x: &[K::Elem], j: usize) -> Option<Vec<K::Elem>> {
    let e = unit_vector(k, x.len(), j);
    let c = f.binary_unchecked(k, x, &e);
    let t = hensel_lift_univariate(k, &c, &k.zero()).ok()?;
    let mut out = x.to_vec();
    out[j] = k.add(&out[j], &t);
    Some(out)
}

/// A primitive zero of a cubic form over a local field, lifted from a
/// smooth residue zero (support-ordered scan, then seeded random samples);
/// if every residue zero found is singular, perturbations `x̄ + π z`
/// satisfying the general Newton condition are tried.
pub fn find_cubic_zero_local<K: LocalField>(
    k: &K,
    f: &Form<K::Elem>,
    opts: &LineOptions,
) -> Result<(Vec<K::Elem>, ZeroStats), LineError> {
    if f.degree() != 3 {
        return Err(FormError::WrongDegree { expected: 3, got: f.degree() }.into());
    }
    let n = f.n_vars();
    let Some(fs) = primitive_form(k, f) else {
        return Ok((unit_vector(k, n, 0), ZeroStats::default()));
    };
    let red = ResidueForm::new(k, &fs);
    let rf = red.rf;
    let q = rf.size();
    let mut stats = ZeroStats::default();
    let mut singular: Vec<Vec<u64>> = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let random = (0..opts.random_budget).map(|_| {
        let mut x: Vec<u64> = (0..n).map(|_| rng.gen_range(0..q)).collect();
        if x.iter().all(|&c| c == 0) {
            x[0] = 1;
        }
        x
    });
    let mut candidates = support_ordered(q, n).take(opts.scan_budget).chain(random);
    let mut smooth = None;
    for xbar in candidates.by_ref() {
        stats.scanned += 1;
        if red.eval(&xbar) != 0 {
            continue;
        }
        stats.residue_zeros += 1;
        let grad = red.gradient(&xbar);
        match grad.iter().position(|&c| c != 0) {
            Some(j) => {
                smooth = Some((xbar, j));
                break;
            }
            None => {
                stats.singular += 1;
                if singular.len() < 32 {
                    singular.push(xbar);
                }
            }
        }
    }
    if let Some((xbar, j)) = smooth {
        let x: Vec<K::Elem> = xbar.iter().map(|&r| k.lift(r)).collect();
        let mut z = lift_along(k, &fs, &x, j).ok_or_else(|| LineError::at("zero", "Hensel lift from a smooth residue zero failed"))?;
        k.make_primitive(&mut z);
        return Ok((z, stats));
    }
    if !red.is_zero() && !singular.is_empty() {
        stats.deep_search = true;
        let pi = k.uniformizer_pow(1);
        for xbar in &singular {
            for _ in 0..256 {
                let x: Vec<K::Elem> = xbar
                    .iter()
                    .map(|&r| k.add(&k.lift(r), &k.mul(&pi, &k.lift(rng.gen_range(0..q)))))
                    .collect();
                let grad = fs.gradient_unchecked(k, &x);
                let Some((_, j)) = grad.iter().enumerate().filter_map(|(j, g)| k.valuation(g).map(|v| (v, j))).min() else {
                    continue;
                };
                if let Some(mut z) = lift_along(k, &fs, &x, j) {
                    k.make_primitive(&mut z);
                    return Ok((z, stats));
                }
            }
        }
    }
    Err(LineError::NoSmoothZero { scanned: stats.scanned, zeros: stats.residue_zeros, singular: stats.singular })
}

// ---------------------------------------------------------------------------
// exact verification

fn rational_vec_to_exact(v: &[(BigRational, BigRational)]) -> Vec<ExactScalar> {
    v.iter().map(ExactScalar::from_pair).collect()
}

/// Minimal valuation (Q_p digits, rounded down, capped) of the four
/// coefficients of `F(s·x + t·y)`, computed exactly in `Q(√d)`.
pub fn exact_line_precision(
    f: &RatForm,
    kind: ExtKind,
    d: &BigInt,
    p: u64,
    x: &[(BigRational, BigRational)],
    y: &[(BigRational, BigRational)],
    cap: i64,
) -> Result<i64, LineError> {
    let r = RatQuad::new(d.clone());
    let fr = f.map_coeffs(&r, |c| (c.clone(), BigRational::zero()));
    let coeffs = fr.binary_restriction_coeffs(&r, x, y)?;
    let e = kind.ramification() as i64;
    Ok(coeffs
        .iter()
        .map(|c| r.valuation(kind, p, c).map_or(cap, |v| v.div_euclid(e).min(cap)))
        .min()
        .unwrap_or(cap))
}

/// Re-verifies a line from its stored exact generators. Checks the four
/// coefficients and that the generators are integral and independent
/// modulo the maximal ideal.
pub fn verify_line(f: &RatForm, line: &LocalLine, cap: i64) -> Result<i64, LineError> {
    let [x, y] = line.generators()?;
    let d: BigInt = line.field.d.parse().map_err(|_| LineError::Precondition("bad field descriptor".into()))?;
    let l = field_from_descriptor(&line.field)?;
    let to_l = |v: &[(BigRational, BigRational)]| -> Vec<QuadElem> {
        v.iter()
            .map(|(a, b)| QuadElem { a: l.base().from_rational(a), b: l.base().from_rational(b) })
            .collect()
    };
    let gens = [to_l(&x), to_l(&y)];
    for g in &gens {
        if g.iter().any(|c| l.valuation(c).map_or(false, |v| v < 0)) {
            return Err(LineError::Precondition("generators are not integral".into()));
        }
    }
    let rf = l.residue_field();
    let red: Vec<Vec<u64>> = gens.iter().map(|g| g.iter().map(|c| l.residue(c).unwrap()).collect()).collect();
    if linalg::rank(&rf, &red) != 2 {
        return Err(LineError::Precondition("generators are dependent modulo the maximal ideal".into()));
    }
    exact_line_precision(f, line.kind(), &d, line.p, &x, &y, cap)
}

pub fn field_from_descriptor(desc: &ExtDescriptor) -> Result<QuadExt, LineError> {
    let base = QpField::new(desc.p, desc.precision.max(1));
    let d: BigInt = desc.d.parse().map_err(|_| LineError::Precondition("bad field descriptor".into()))?;
    let class = base.square_class(&base.from_int(&d)).map_err(|e| LineError::Precondition(e.to_string()))?;
    QuadExt::new(base, class).map_err(|e| LineError::Precondition(e.to_string()))
}

/// Saturates an L-pair and records exact representatives.
fn exact_pair(l: &QuadExt, x: &[QuadElem], y: &[QuadElem]) -> Result<[Vec<(BigRational, BigRational)>; 2], LineError> {
    let sat = quadforms::saturate(l, &[x.to_vec(), y.to_vec()])?;
    let conv = |v: &[QuadElem]| v.iter().map(|c| l.to_exact(c)).collect::<Vec<_>>();
    Ok([conv(&sat[0]), conv(&sat[1])])
}

fn make_line(
    f: &RatForm,
    l: &QuadExt,
    x: &[QuadElem],
    y: &[QuadElem],
    cap: i64,
    stages: Vec<StageLog>,
    warnings: Vec<String>,
) -> Result<LocalLine, LineError> {
    let [ex, ey] = exact_pair(l, x, y)?;
    let verified = exact_line_precision(f, l.kind(), &l.d(), l.base().p(), &ex, &ey, cap)?;
    Ok(LocalLine {
        p: l.base().p(),
        field: l.descriptor(),
        x0: rational_vec_to_exact(&ex),
        y: rational_vec_to_exact(&ey),
        verified_precision: verified,
        warnings,
        stages,
    })
}

// ---------------------------------------------------------------------------
// pull-back

/// Pulls an L-line `(x0, y)` with `x0` over Q_p back to a Q_p-line: with
/// `y = a + b√d` the L-line lies in `W = span{x0, a, b}`; when `dim W = 3`
/// the restriction `g` of F to W is divisible by `u3² − d·u2²`, and the
/// kernel of the linear cofactor is a Q_p-plane on which F vanishes.
/// Returns the two generators over Q_p.
pub fn pull_back_line(
    f: &RatForm,
    l: &QuadExt,
    x0: &[PAdic],
    y: &[QuadElem],
    tolerance: i64,
) -> Result<[Vec<PAdic>; 2], LineError> {
    let k = l.base();
    let a: Vec<PAdic> = y.iter().map(|c| c.a.clone()).collect();
    let b: Vec<PAdic> = y.iter().map(|c| c.b.clone()).collect();
    if l.kind() == ExtKind::Degenerate || b.iter().all(|c| c.is_zero()) {
        return Ok([x0.to_vec(), a]);
    }
    let mut vecs = vec![x0.to_vec(), a.clone(), b.clone()];
    for v in vecs.iter_mut() {
        k.make_primitive(v);
    }
    let rank = linalg::rank(k, &vecs);
    if rank < 2 {
        return Err(LineError::PullBack("span of x0, a, b has dimension < 2".into()));
    }
    if rank == 2 {
        let other = if linalg::rank(k, &vecs[..2]) == 2 { 1 } else { 2 };
        return Ok([vecs[0].clone(), vecs[other].clone()]);
    }
    // u-coordinates relative to (x0, a, b) as given (not rescaled), so that y = a + √d b.
    let basis = [x0.to_vec(), a, b];
    let fk = f.map_coeffs(k, |c| k.from_rational(c));
    let g = fk.substitute_unchecked(k, &basis);
    let d = k.from_int(&l.d());
    let (mu, remainder) = divide_by_norm_form(k, &g, &d);
    let gmin = g.terms().filter_map(|(_, c)| c.valuation()).min().unwrap_or(0);
    for (_, c) in remainder.terms() {
        if let Some(v) = c.valuation() {
            if v < gmin + tolerance {
                return Err(LineError::PullBack(format!("division remainder has valuation {v} (scale {gmin})")));
            }
        }
    }
    let row: Vec<PAdic> = (0..3)
        .map(|i| mu.coefficient(&Monomial::from_variables(3, &[i]).0).cloned().unwrap_or_else(|| k.zero()))
        .collect();
    if row.iter().all(|c| c.is_zero()) {
        return Err(LineError::PullBack("linear cofactor vanishes".into()));
    }
    let ker = linalg::kernel(k, &[row], 3);
    let out: Vec<Vec<PAdic>> = ker.iter().map(|u| linalg::combine(k, u, &basis, x0.len())).collect();
    Ok([out[0].clone(), out[1].clone()])
}

/// Divides a ternary cubic by `u3² − d·u2²` (monic in `u3`): returns
/// `(quotient, remainder)`, the remainder having `u3`-degree ≤ 1.
pub fn divide_by_norm_form<K: Field>(k: &K, g: &Form<K::Elem>, d: &K::Elem) -> (Form<K::Elem>, Form<K::Elem>) {
    let mut rem: std::collections::BTreeMap<Vec<u8>, K::Elem> = g.terms().map(|(m, c)| (m.0.clone(), c.clone())).collect();
    let mut quot: Vec<(Monomial, K::Elem)> = Vec::new();
    loop {
        let lead = rem
            .iter()
            .filter(|(e, c)| e[2] >= 2 && !k.is_zero(c))
            .max_by_key(|(e, _)| e[2])
            .map(|(e, c)| (e.clone(), c.clone()));
        let Some((e, c)) = lead else { break };
        rem.remove(&e);
        let qe = vec![e[0], e[1], e[2] - 2];
        quot.push((Monomial(qe.clone()), c.clone()));
        // subtract c·x^qe·(u3² − d u2²): adds c·d·u1^e0 u2^(e1+2) u3^(e2−2)
        let te = vec![e[0], e[1] + 2, e[2] - 2];
        let add = k.mul(&c, d);
        let entry = rem.entry(te).or_insert_with(|| k.zero());
        *entry = k.add(entry, &add);
    }
    let quotient = Form::from_accumulated(k, 3, 1, quot);
    let remainder = Form::from_accumulated(k, 3, 3, rem.into_iter().map(|(e, c)| (Monomial(e), c)));
    (quotient, remainder)
}

// ---------------------------------------------------------------------------
// the pipelines

struct Section {
    x0: Vec<BigInt>,
    hyperplane: usize,
    pivot: usize,
    basis: Vec<Vec<BigInt>>,
    hessian: Vec<Vec<BigInt>>,
}

fn to_int(q: &BigRational) -> BigInt {
    debug_assert!(q.is_integer());
    q.to_integer()
}

/// Integral smooth zero `x0` of F, the hyperplane `y_i = 0` with `x0_i` a
/// unit, and an integral basis of `{∇F(x0)·y = 0, y_i = 0}`.
fn section(f: &RatForm, k: &QpField, opts: &LineOptions, stages: &mut Vec<StageLog>) -> Result<Section, LineError> {
    let fk = f.map_coeffs(k, |c| k.from_rational(c));
    let (x, stats) = find_cubic_zero_local(k, &fk, opts).map_err(|e| LineError::at("zero", e))?;
    let x0: Vec<BigInt> = x.iter().map(|c| k.balanced_integer(c).expect("integral zero")).collect();
    let xq: Vec<BigRational> = x0.iter().map(|c| BigRational::from_integer(c.clone())).collect();
    let fx0 = f.evaluate(&Rationals, &xq)?;
    stages.push(StageLog {
        stage: "zero".into(),
        detail: json!({
            "x0": x0.iter().map(|c| c.to_string()).collect::<Vec<_>>(),
            "valuation_F_x0": rational_valuation(&fx0, k.p()),
            "scanned": stats.scanned,
            "residue_zeros": stats.residue_zeros,
            "singular": stats.singular,
        }),
    });
    let p = BigInt::from(k.p());
    let unit = |c: &BigInt| !(c % &p).is_zero();
    let i = x0.iter().position(unit).ok_or_else(|| LineError::at("hyperplane", "zero is not primitive"))?;
    let grad: Vec<BigInt> = f.gradient(&Rationals, &xq)?.iter().map(to_int).collect();
    let j = (0..grad.len())
        .find(|&j| j != i && unit(&grad[j]))
        .ok_or_else(|| LineError::at("section", "no unit partial derivative off the hyperplane coordinate"))?;
    let n = f.n_vars();
    let basis: Vec<Vec<BigInt>> = (0..n)
        .filter(|&t| t != i && t != j)
        .map(|t| {
            let mut v = vec![BigInt::zero(); n];
            v[t] = grad[j].clone();
            v[j] = -grad[t].clone();
            v
        })
        .collect();
    let hessian: Vec<Vec<BigInt>> = f
        .polar(&Rationals)?
        .hessian6(&Rationals, &xq)?
        .iter()
        .map(|r| r.iter().map(to_int).collect())
        .collect();
    stages.push(StageLog {
        stage: "section".into(),
        detail: json!({"hyperplane": format!("y{} = 0", i + 1), "pivot": j + 1, "dimension": basis.len()}),
    });
    Ok(Section { x0, hyperplane: i, pivot: j, basis, hessian })
}

fn int_mat_vec(m: &[Vec<BigInt>], v: &[BigInt]) -> Vec<BigInt> {
    m.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn int_dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gram matrix (integer) of the Hessian form on the given vectors.
fn section_gram(s: &Section, vectors: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let hv: Vec<Vec<BigInt>> = vectors.iter().map(|v| int_mat_vec(&s.hessian, v)).collect();
    vectors.iter().map(|a| hv.iter().map(|h| int_dot(a, h)).collect()).collect()
}

fn int_vec_to_l(l: &QuadExt, v: &[BigInt]) -> Vec<QuadElem> {
    v.iter().map(|c| l.from_int(c)).collect()
}

/// A line over Q_p on a cubic form in at least 22 variables (odd p).
pub fn find_line_qp(f: &RatForm, p: u64, opts: &LineOptions) -> Result<LocalLine, LineError> {
    check_line_input(f, p, 22)?;
    match find_line_qp_once(f, p, opts) {
        Ok(line) => Ok(line),
        Err(first) => {
            let mut retry = opts.clone();
            retry.guard += opts.precision + opts.guard;
            retry.seed = opts.seed.wrapping_add(1);
            let mut line = find_line_qp_once(f, p, &retry).map_err(|_| first)?;
            line.warnings.push("succeeded after a precision-doubling retry".into());
            Ok(line)
        }
    }
}

fn check_line_input(f: &RatForm, p: u64, min_vars: usize) -> Result<(), LineError> {
    if f.degree() != 3 {
        return Err(FormError::WrongDegree { expected: 3, got: f.degree() }.into());
    }
    if f.n_vars() < min_vars {
        return Err(LineError::Precondition(format!("need at least {min_vars} variables, got {}", f.n_vars())));
    }
    if !f.is_integral() {
        return Err(LineError::Precondition("form must have integer coefficients".into()));
    }
    if p == 2 || !crate::ring::is_prime(p) {
        return Err(LineError::Precondition(format!("p = {p}: an odd prime is required")));
    }
    Ok(())
}

fn find_line_qp_once(f: &RatForm, p: u64, opts: &LineOptions) -> Result<LocalLine, LineError> {
    let work = opts.precision + opts.guard;
    let k = QpField::new(p, work);
    let mut stages = Vec::new();
    let s = section(f, &k, opts, &mut stages)?;
    let first20: Vec<Vec<BigInt>> = s.basis[..20].to_vec();
    let gram_int = section_gram(&s, &first20);
    let gram: Vec<Vec<PAdic>> = gram_int.iter().map(|r| r.iter().map(|c| k.from_int(c)).collect()).collect();
    let witness = quadforms::isotropic_10space_20var(&k, &gram).map_err(|e| LineError::at("isotropic", e))?;
    let l = witness.field.clone();
    let wprec = quadforms::witness_precision(&witness, &gram).map_err(|e| LineError::at("isotropic", e))?;
    stages.push(StageLog {
        stage: "isotropic".into(),
        detail: json!({"field": l.descriptor(), "dimension": witness.dim(), "gram_precision": wprec}),
    });
    let b_l: Vec<Vec<QuadElem>> = first20.iter().map(|v| int_vec_to_l(&l, v)).collect();
    let n = f.n_vars();
    let w_amb: Vec<Vec<QuadElem>> = witness.basis.iter().map(|c| linalg::combine(&l, c, &b_l, n)).collect();
    let w_amb = quadforms::saturate(&l, &w_amb).map_err(|e| LineError::at("isotropic", e))?;
    let fl = f.map_coeffs(&l, |c| l.embed(&l.base().from_rational(c)));
    let g = fl.substitute_unchecked(&l, &w_amb);
    let (ycoords, stats) = find_cubic_zero_local(&l, &g, opts).map_err(|e| LineError::at("restricted zero", e))?;
    let y = linalg::combine(&l, &ycoords, &w_amb, n);
    let x0_l = int_vec_to_l(&l, &s.x0);
    let cap = opts.precision as i64;
    let l_line = make_line(f, &l, &x0_l, &y, cap, Vec::new(), Vec::new())?;
    stages.push(StageLog {
        stage: "line over L".into(),
        detail: json!({"scanned": stats.scanned, "verified_precision": l_line.verified_precision}),
    });
    let x0_k: Vec<PAdic> = s.x0.iter().map(|c| k.from_int(c)).collect();
    let tolerance = opts.precision as i64 - opts.slack as i64;
    let [g1, g2] = pull_back_line(f, &l, &x0_k, &y, tolerance).map_err(|e| LineError::at("pull-back", e))?;
    let q = QuadExt::degenerate(k.clone());
    let emb = |v: &[PAdic]| v.iter().map(|c| q.embed(c)).collect::<Vec<_>>();
    stages.push(StageLog { stage: "pull-back".into(), detail: json!({"from": l.descriptor().class}) });
    let mut line = make_line(f, &q, &emb(&g1), &emb(&g2), cap, stages, Vec::new())?;
    line.field.precision = opts.precision;
    if line.verified_precision < tolerance {
        return Err(LineError::Verification { achieved: line.verified_precision, required: tolerance });
    }
    let _ = (s.hyperplane, s.pivot);
    Ok(line)
}

/// Gram matrix of a quadratic form: `G_ii = c(x_i²)`, `G_ij = c(x_i x_j)/2`.
pub fn gram_of_quadratic<K: Field>(k: &K, q: &Form<K::Elem>) -> Result<Vec<Vec<K::Elem>>, LineError> {
    if q.degree() != 2 {
        return Err(FormError::WrongDegree { expected: 2, got: q.degree() }.into());
    }
    let n = q.n_vars();
    let half = k.inv(&k.from_i64(2)).ok_or_else(|| LineError::Precondition("characteristic 2".into()))?;
    let mut g = vec![vec![k.zero(); n]; n];
    for (m, c) in q.terms() {
        let v = m.variables();
        if v[0] == v[1] {
            g[v[0]][v[0]] = c.clone();
        } else {
            let h = k.mul(c, &half);
            g[v[0]][v[1]] = h.clone();
            g[v[1]][v[0]] = h;
        }
    }
    Ok(g)
}

/// Joint nontrivial zero of a cubic `f` and a quadratic `q` by sampling
/// residue points on `q̄ = 0` through an isotropic direction `v` of `q`,
/// filtering by `f̄ = 0` and lifting where the Jacobian has rank two.
/// Exhausting the budget is a failure of the method, not a proof that no
/// zero exists.
pub fn solve_cubic_quadric_local<K: LocalField>(
    k: &K,
    f: &Form<K::Elem>,
    q: &Form<K::Elem>,
    budget: usize,
    seed: u64,
) -> Result<Vec<K::Elem>, LineError> {
    if f.n_vars() != q.n_vars() {
        return Err(FormError::DimensionMismatch { expected: f.n_vars(), got: q.n_vars() }.into());
    }
    if budget == 0 {
        return Err(LineError::BudgetExhausted(0));
    }
    let n = f.n_vars();
    let fs = primitive_form(k, f).ok_or_else(|| LineError::Precondition("cubic is zero".into()))?;
    let Some(qs) = primitive_form(k, q) else {
        // every point lies on the zero quadric
        let opts = LineOptions { seed, random_budget: budget, ..LineOptions::default() };
        return find_cubic_zero_local(k, &fs, &opts).map(|(x, _)| x);
    };
    let gram = gram_of_quadratic(k, &qs)?;
    let v = quadforms::find_isotropic_vector(k, &gram)?;
    // immediate success: f vanishes at the isotropic vector
    if k.is_zero(&fs.eval_unchecked(k, &v)) {
        return Ok(v);
    }
    let rf = k.residue_field();
    let fr = ResidueForm::new(k, &fs);
    let qr = ResidueForm::new(k, &qs);
    let vbar: Vec<u64> = v.iter().map(|c| k.residue(c).unwrap()).collect();
    let polys = [Poly::from_form(&fs), Poly::from_form(&qs)];
    let try_point = |zbar: &[u64]| -> Option<Vec<K::Elem>> {
        if fr.eval(zbar) != 0 || qr.eval(zbar) != 0 || zbar.iter().all(|&c| c == 0) {
            return None;
        }
        let jac = vec![fr.gradient(zbar), qr.gradient(zbar)];
        if linalg::rank(&rf, &jac) < 2 {
            return None;
        }
        let z: Vec<K::Elem> = zbar.iter().map(|&r| k.lift(r)).collect();
        let mut x = hensel_lift_system(k, &polys, &z).ok()?;
        k.make_primitive(&mut x);
        Some(x)
    };
    if let Some(x) = try_point(&vbar) {
        return Ok(x);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = rf.size();
    for _ in 0..budget {
        let r: Vec<u64> = (0..n).map(|_| rng.gen_range(0..size)).collect();
        // q̄(r + s v̄) = q̄(r) + s·∇q̄(r)·v̄ since q̄(v̄) = 0
        let grad = qr.gradient(&r);
        let lin = rf.dot(&grad, &vbar);
        if lin == 0 {
            continue;
        }
        let s = rf.neg(&rf.div(&qr.eval(&r), &lin).unwrap());
        let z: Vec<u64> = r.iter().zip(&vbar).map(|(a, b)| rf.add(a, &rf.mul(&s, b))).collect();
        if let Some(x) = try_point(&z) {
            return Ok(x);
        }
    }
    Err(LineError::BudgetExhausted(budget))
}

/// A line over Q_p on a cubic form in at least 16 variables, via a joint
/// zero of the restricted cubic and Hessian quadric over the unramified
/// quadratic extension. Primes below 19 are attempted with a warning.
pub fn find_line_qp_16(f: &RatForm, p: u64, opts: &LineOptions) -> Result<LocalLine, LineError> {
    check_line_input(f, p, 16)?;
    match find_line_qp_16_once(f, p, opts) {
        Ok(line) => Ok(line),
        Err(first) => {
            let mut retry = opts.clone();
            retry.guard += opts.precision + opts.guard;
            retry.seed = opts.seed.wrapping_add(1);
            let mut line = find_line_qp_16_once(f, p, &retry).map_err(|_| first)?;
            line.warnings.push("succeeded after a precision-doubling retry".into());
            Ok(line)
        }
    }
}

fn find_line_qp_16_once(f: &RatForm, p: u64, opts: &LineOptions) -> Result<LocalLine, LineError> {
    let mut warnings = Vec::new();
    if p < 19 {
        warnings.push(format!("p = {p} < 19: the residue-field size condition p² > 293 fails, existence is not guaranteed"));
    }
    let work = opts.precision + opts.guard;
    let k = QpField::new(p, work);
    let mut stages = Vec::new();
    let s = section(f, &k, opts, &mut stages)?;
    let l = QuadExt::unramified(k.clone()).map_err(|e| LineError::at("field", e))?;
    let n = f.n_vars();
    let m = s.basis.len();
    let b_l: Vec<Vec<QuadElem>> = s.basis.iter().map(|v| int_vec_to_l(&l, v)).collect();
    let fl = f.map_coeffs(&l, |c| l.embed(&l.base().from_rational(c)));
    let cubic = fl.substitute_unchecked(&l, &b_l);
    let gram_int = section_gram(&s, &s.basis);
    let qterms = (0..m).flat_map(|i| (i..m).map(move |j| (i, j))).map(|(i, j)| {
        let c = if i == j { gram_int[i][i].clone() } else { &gram_int[i][j] * 2 };
        (Monomial::from_variables(m, &[i, j]), l.from_int(&c))
    });
    let quadric = Form::from_accumulated(&l, m, 2, qterms);
    let ycoords = solve_cubic_quadric_local(&l, &cubic, &quadric, opts.system_budget, opts.seed)
        .map_err(|e| LineError::at("cubic-quadric system", e))?;
    let y = linalg::combine(&l, &ycoords, &b_l, n);
    let x0_l = int_vec_to_l(&l, &s.x0);
    let cap = opts.precision as i64;
    let l_line = make_line(f, &l, &x0_l, &y, cap, Vec::new(), Vec::new())?;
    stages.push(StageLog {
        stage: "line over L".into(),
        detail: json!({"field": l.descriptor(), "verified_precision": l_line.verified_precision}),
    });
    let x0_k: Vec<PAdic> = s.x0.iter().map(|c| k.from_int(c)).collect();
    let tolerance = opts.precision as i64 - opts.slack as i64;
    let [g1, g2] = pull_back_line(f, &l, &x0_k, &y, tolerance).map_err(|e| LineError::at("pull-back", e))?;
    let q = QuadExt::degenerate(k.clone());
    let emb = |v: &[PAdic]| v.iter().map(|c| q.embed(c)).collect::<Vec<_>>();
    stages.push(StageLog { stage: "pull-back".into(), detail: json!({"from": l.descriptor().class}) });
    let mut line = make_line(f, &q, &emb(&g1), &emb(&g2), cap, stages, warnings)?;
    line.field.precision = opts.precision;
    if line.verified_precision < tolerance {
        return Err(LineError::Verification { achieved: line.verified_precision, required: tolerance });
    }
    Ok(line)
}

/// Largest `k ≤ cap` such that all four coefficients of `F(s·x + t·y)`
/// vanish mod `p^k` (integer inputs).
pub fn max_line_precision(f: &RatForm, x: &[BigInt], y: &[BigInt], p: u64, cap: u32) -> Result<u32, LineError> {
    let xq: Vec<BigRational> = x.iter().map(|c| BigRational::from_integer(c.clone())).collect();
    let yq: Vec<BigRational> = y.iter().map(|c| BigRational::from_integer(c.clone())).collect();
    let coeffs = f.binary_restriction_coeffs(&Rationals, &xq, &yq)?;
    Ok(coeffs
        .iter()
        .map(|c| rational_valuation(c, p).map_or(cap, |v| v.clamp(0, cap as i64) as u32))
        .min()
        .unwrap_or(cap))
}

/// A cubic form reduced mod `p^cap` for repeated line-precision queries on
/// small integer vectors; agrees with [`max_line_precision`].
pub struct LinePrecisionKernel {
    p: i128,
    cap: u32,
    modulus: i128,
    terms: Vec<(Vec<usize>, i128)>,
}

impl LinePrecisionKernel {
    /// `None` if `p^cap` is too large for word arithmetic or F is not integral.
    pub fn new(f: &RatForm, p: u64, cap: u32) -> Option<Self> {
        let modulus = (p as i128).checked_pow(cap).filter(|m| *m < 1 << 40)?;
        let mut terms = Vec::new();
        for (m, c) in f.terms() {
            if !c.is_integer() {
                return None;
            }
            let r = (c.to_integer() % BigInt::from(modulus)).to_string().parse::<i128>().ok()?;
            terms.push((m.variables(), r.rem_euclid(modulus)));
        }
        Some(LinePrecisionKernel { p: p as i128, cap, modulus, terms })
    }

    pub fn precision(&self, x: &[i64], y: &[i64]) -> u32 {
        let m = self.modulus;
        let mut out = [0i128; 4];
        for (vars, c) in &self.terms {
            let mut poly = [0i128; 4];
            poly[0] = *c;
            for (deg, &v) in vars.iter().enumerate() {
                let (a, b) = ((x[v] as i128).rem_euclid(m), (y[v] as i128).rem_euclid(m));
                for k in (0..=deg + 1).rev() {
                    let keep = if k <= deg { poly[k] * a % m } else { 0 };
                    let shift = if k > 0 { poly[k - 1] * b % m } else { 0 };
                    poly[k] = (keep + shift) % m;
                }
            }
            for k in 0..4 {
                out[k] = (out[k] + poly[k]) % m;
            }
        }
        out.iter()
            .map(|&c| {
                let mut c = c;
                let mut v = 0;
                while c != 0 && c % self.p == 0 && v < self.cap {
                    c /= self.p;
                    v += 1;
                }
                if c == 0 { self.cap } else { v }
            })
            .min()
            .unwrap_or(self.cap)
    }
}

/// A Q_p line given by integer generators, packaged and verified.
pub fn integer_line(f: &RatForm, p: u64, x: &[BigInt], y: &[BigInt], cap: i64) -> Result<LocalLine, LineError> {
    let k = QpField::new(p, cap.max(1) as u32);
    let q = QuadExt::degenerate(k.clone());
    let emb = |v: &[BigInt]| v.iter().map(|c| q.from_int(c)).collect::<Vec<_>>();
    make_line(f, &q, &emb(x), &emb(y), cap, Vec::new(), Vec::new())
}
