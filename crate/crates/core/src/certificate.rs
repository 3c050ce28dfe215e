//! Certificates that the 11-variable forms `F_p = H_p(x1..x5) + p·G_p(x6..x8)
//! + p²·G_p(x9..x11)` (p = 2, 3, 5) contain no line over Q_p.
//!
//! The argument: a Q_p-line reduces to an F_p-line on `H_p` unless its
//! generators are dependent mod p on the first block; `H_p` has no F_p-lines,
//! and `G_p` has no nontrivial F_p-zeros, so descending through the p-adic
//! blocks forces a generator to vanish mod p. The certificate records each
//! premise as a sub-check.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::finite_field::{
    enumerate_points, find_lines_on_cubic, line_count, nontrivial_zeros, singular_points_mod_p, ProjPoint,
};
use crate::forms::{FormError, FormJson, RatForm};
use crate::line_search::{max_line_precision, LinePrecisionKernel};
use crate::ring::{next_prime, PrimeField, Rationals};

const FORMS_JSON: &str = include_str!("../data/counterexample_forms.json");
const PRINTED: &str = include_str!("../data/printed_forms.txt");

/// SHA-256 of the canonical (compact) serialization of the embedded forms.
pub const FORMS_SHA256: &str = "fac5a5f7a5eb45dcfaa1a425eee80b3215ae902472442adccfd1cce472f9720c";

pub const SUPPORTED_PRIMES: [u64; 3] = [2, 3, 5];
pub const CLAIM: &str = "F_p has no line over Q_p";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CertError {
    #[error("unsupported prime {0} (expected 2, 3 or 5)")]
    UnsupportedPrime(u64),
    #[error("embedded data: {0}")]
    Data(String),
    #[error(transparent)]
    Form(#[from] FormError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct FormsFile {
    #[serde(rename = "H")]
    h: BTreeMap<String, FormJson>,
    #[serde(rename = "G")]
    g: BTreeMap<String, FormJson>,
}

fn forms_file() -> Result<FormsFile, CertError> {
    serde_json::from_str(FORMS_JSON).map_err(|e| CertError::Data(e.to_string()))
}

pub fn forms_digest() -> Result<String, CertError> {
    let canonical = serde_json::to_string(&forms_file()?).map_err(|e| CertError::Data(e.to_string()))?;
    Ok(hex(&Sha256::digest(canonical.as_bytes())))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn check_prime(p: u64) -> Result<(), CertError> {
    if SUPPORTED_PRIMES.contains(&p) {
        Ok(())
    } else {
        Err(CertError::UnsupportedPrime(p))
    }
}

/// The quinary form `H_p` from the embedded data.
pub fn quinary_form(p: u64) -> Result<RatForm, CertError> {
    check_prime(p)?;
    let f = forms_file()?;
    Ok(f.h.get(&p.to_string()).ok_or_else(|| CertError::Data(format!("missing H_{p}")))?.to_rational()?)
}

/// The ternary form `G_p` from the embedded data.
pub fn ternary_form(p: u64) -> Result<RatForm, CertError> {
    check_prime(p)?;
    let f = forms_file()?;
    Ok(f.g.get(&p.to_string()).ok_or_else(|| CertError::Data(format!("missing G_{p}")))?.to_rational()?)
}

/// The printed coefficient lists, parsed independently of the JSON data.
pub fn printed_forms() -> Result<BTreeMap<String, RatForm>, CertError> {
    let mut out = BTreeMap::new();
    for line in PRINTED.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (name, expr) = line.split_once('=').ok_or_else(|| CertError::Data(format!("bad line {line:?}")))?;
        let name = name.trim();
        let vars: &[&str] = if name.starts_with('H') { &["x1", "x2", "x3", "x4", "x5"] } else { &["x", "y", "z"] };
        out.insert(name.to_string(), RatForm::parse(expr, vars)?);
    }
    Ok(out)
}

/// `F_p = H(x1..x5) + p·G(x6..x8) + p²·G(x9..x11)`.
pub fn assemble(h: &RatForm, g: &RatForm, p: u64) -> Result<RatForm, CertError> {
    let pq = BigRational::from_integer(BigInt::from(p));
    let h11 = h.embed(&Rationals, 11, 0);
    let g1 = g.embed(&Rationals, 11, 5).scale(&Rationals, &pq);
    let g2 = g.embed(&Rationals, 11, 8).scale(&Rationals, &(&pq * &pq));
    Ok(h11.add_form(&Rationals, &g1)?.add_form(&Rationals, &g2)?)
}

pub fn build_counterexample_form(p: u64) -> Result<RatForm, CertError> {
    assemble(&quinary_form(p)?, &ternary_form(p)?, p)
}

// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubCheck {
    pub name: String,
    pub outcome: Outcome,
    pub details: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertInputs {
    pub p: u64,
    #[serde(rename = "H")]
    pub h: FormJson,
    #[serde(rename = "G")]
    pub g: FormJson,
    #[serde(rename = "F")]
    pub f: FormJson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertParams {
    /// Cap for the descent diagnostic's line precision.
    pub precision_cap: u32,
    /// Number of auxiliary primes tried when `H_p` or `G_p` is singular mod p.
    pub auxiliary_primes: usize,
    pub seed: u64,
}

impl Default for CertParams {
    fn default() -> Self {
        CertParams { precision_cap: 10, auxiliary_primes: 3, seed: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub claim: String,
    pub inputs: CertInputs,
    pub parameters: CertParams,
    pub sub_checks: Vec<SubCheck>,
    pub verdict: Outcome,
    pub tool_version: String,
    pub timestamp_unix: u64,
}

impl Certificate {
    pub fn failed_checks(&self) -> Vec<&str> {
        self.sub_checks.iter().filter(|c| c.outcome != Outcome::Pass).map(|c| c.name.as_str()).collect()
    }
}

fn point_json(pt: &ProjPoint) -> serde_json::Value {
    serde_json::json!(pt.coords)
}

fn outcome(ok: bool) -> Outcome {
    if ok {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

/// Certificate for the shipped data.
pub fn verify_counterexample(p: u64, params: &CertParams) -> Result<Certificate, CertError> {
    check_prime(p)?;
    let h = quinary_form(p)?;
    let g = ternary_form(p)?;
    let mut cert = verify_forms(p, &h, &g, params)?;
    let integrity = data_integrity_check(p)?;
    cert.sub_checks.insert(0, integrity);
    cert.verdict = verdict(&cert.sub_checks);
    Ok(cert)
}

fn data_integrity_check(p: u64) -> Result<SubCheck, CertError> {
    let digest = forms_digest()?;
    let printed = printed_forms()?;
    let h_ok = printed.get(&format!("H{p}")) == Some(&quinary_form(p)?);
    let g_ok = printed.get(&format!("G{p}")) == Some(&ternary_form(p)?);
    Ok(SubCheck {
        name: "data_integrity".into(),
        outcome: outcome(digest == FORMS_SHA256 && h_ok && g_ok),
        details: serde_json::json!({
            "sha256": digest,
            "expected_sha256": FORMS_SHA256,
            "H_matches_printed": h_ok,
            "G_matches_printed": g_ok,
        }),
    })
}

fn verdict(checks: &[SubCheck]) -> Outcome {
    if checks.iter().all(|c| c.outcome == Outcome::Pass) {
        Outcome::Pass
    } else if checks.iter().any(|c| c.outcome == Outcome::Fail) {
        Outcome::Fail
    } else {
        Outcome::Inconclusive
    }
}

/// Smoothness mod p, falling back to auxiliary primes: a smooth reduction
/// mod any prime certifies smoothness over an algebraic closure of Q.
fn smoothness_check(name: &str, form: &RatForm, p: u64, auxiliary: usize) -> Result<SubCheck, CertError> {
    let fp = PrimeField::new(p);
    let sing = singular_points_mod_p(&form.reduce_mod(&fp)?, &fp);
    if sing.is_empty() {
        return Ok(SubCheck {
            name: name.into(),
            outcome: Outcome::Pass,
            details: serde_json::json!({"prime": p, "singular_points": 0}),
        });
    }
    let mut tried = Vec::new();
    let mut q = p;
    for _ in 0..auxiliary {
        q = next_prime(q + 1);
        let fq = PrimeField::new(q);
        let s = singular_points_mod_p(&form.reduce_mod(&fq)?, &fq);
        tried.push(serde_json::json!({"prime": q, "singular_points": s.len()}));
        if s.is_empty() {
            return Ok(SubCheck {
                name: name.into(),
                outcome: Outcome::Pass,
                details: serde_json::json!({
                    "prime": p,
                    "singular_points": sing.len(),
                    "witness": point_json(&sing[0]),
                    "smooth_over_closure_via": q,
                    "auxiliary": tried,
                }),
            });
        }
    }
    Ok(SubCheck {
        name: name.into(),
        outcome: Outcome::Inconclusive,
        details: serde_json::json!({
            "prime": p,
            "singular_points": sing.len(),
            "witness": point_json(&sing[0]),
            "auxiliary": tried,
        }),
    })
}

/// Runs every sub-check on given `H`, `G` (used for the shipped data and
/// for mutated inputs).
pub fn verify_forms(p: u64, h: &RatForm, g: &RatForm, params: &CertParams) -> Result<Certificate, CertError> {
    check_prime(p)?;
    if h.n_vars() != 5 || g.n_vars() != 3 || h.degree() != 3 || g.degree() != 3 {
        return Err(CertError::Data("expected a quinary and a ternary cubic".into()));
    }
    let fp = PrimeField::new(p);
    let hbar = h.reduce_mod(&fp)?;
    let gbar = g.reduce_mod(&fp)?;
    let mut checks = Vec::new();

    let zeros = nontrivial_zeros(&gbar, &fp);
    checks.push(SubCheck {
        name: "ternary_no_nontrivial_zeros".into(),
        outcome: outcome(zeros.is_empty()),
        details: serde_json::json!({
            "vectors_scanned": p.pow(3),
            "zeros": zeros.iter().map(point_json).collect::<Vec<_>>(),
        }),
    });
    checks.push(smoothness_check("ternary_smooth", g, p, params.auxiliary_primes)?);

    let lines = find_lines_on_cubic(&hbar, &fp);
    checks.push(SubCheck {
        name: "quinary_no_lines".into(),
        outcome: outcome(lines.is_empty()),
        details: serde_json::json!({
            "lines_scanned": line_count(p, 5),
            "lines_found": lines.len(),
            "examples": lines.iter().take(5).map(|l| serde_json::json!(l.gens)).collect::<Vec<_>>(),
        }),
    });
    checks.push(smoothness_check("quinary_smooth", h, p, params.auxiliary_primes)?);

    let f = assemble(h, g, p)?;
    checks.push(assembly_check(&f, h, g, p));
    checks.push(descent_check(&f, p, params.precision_cap)?);

    let verdict = verdict(&checks);
    Ok(Certificate {
        claim: format!("{CLAIM} (p = {p})"),
        inputs: CertInputs { p, h: FormJson::from_rational(h), g: FormJson::from_rational(g), f: FormJson::from_rational(&f) },
        parameters: params.clone(),
        sub_checks: checks,
        verdict,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        timestamp_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    })
}

/// Monomial-by-monomial comparison of the assembled form with the blocks.
fn assembly_check(f: &RatForm, h: &RatForm, g: &RatForm, p: u64) -> SubCheck {
    let mut expected: BTreeMap<Vec<u8>, BigRational> = BTreeMap::new();
    for (m, c) in h.terms() {
        let mut e = m.0.clone();
        e.resize(11, 0);
        expected.insert(e, c.clone());
    }
    for (offset, scale) in [(5usize, p), (8, p * p)] {
        for (m, c) in g.terms() {
            let mut e = vec![0u8; 11];
            e[offset..offset + 3].copy_from_slice(&m.0);
            expected.insert(e, c * BigRational::from_integer(BigInt::from(scale)));
        }
    }
    let mismatches: Vec<Vec<u8>> = expected
        .iter()
        .filter(|(e, c)| f.coefficient(e) != Some(*c))
        .map(|(e, _)| e.clone())
        .collect();
    let ok = mismatches.is_empty() && f.num_terms() == expected.len();
    SubCheck {
        name: "assembly".into(),
        outcome: outcome(ok),
        details: serde_json::json!({"monomials": f.num_terms(), "expected": expected.len(), "mismatches": mismatches}),
    }
}

/// Maximal line precision over generator pairs `(z, e_j)` with `z` a
/// normalized residue vector supported on the p-adic blocks. Pairs that
/// survive to high precision would contradict the descent; the recorded
/// maximum must stay below the cap.
fn descent_check(f: &RatForm, p: u64, cap: u32) -> Result<SubCheck, CertError> {
    let kernel = LinePrecisionKernel::new(f, p, cap);
    let mut best = (0u32, Vec::new(), 0usize);
    let mut pairs = 0u64;
    for pt in enumerate_points(p, 6) {
        let mut z = vec![0i64; 5];
        z.extend(pt.coords.iter().map(|&c| c as i64));
        for j in 0..11 {
            // independent mod p unless e_j is a multiple of z
            let dependent = j >= 5 && pt.coords.iter().enumerate().all(|(i, &c)| (c != 0) == (i + 5 == j));
            if dependent {
                continue;
            }
            let mut y = vec![0i64; 11];
            y[j] = 1;
            pairs += 1;
            let k = match &kernel {
                Some(kern) => kern.precision(&z, &y),
                None => {
                    let big = |v: &[i64]| v.iter().map(|&c| BigInt::from(c)).collect::<Vec<_>>();
                    max_line_precision(f, &big(&z), &big(&y), p, cap).map_err(|e| CertError::Data(e.to_string()))?
                }
            };
            if k > best.0 {
                best = (k, pt.coords.clone(), j);
            }
        }
    }
    Ok(SubCheck {
        name: "descent_diagnostic".into(),
        outcome: outcome(best.0 < cap),
        details: serde_json::json!({
            "pairs": pairs,
            "max_line_precision": best.0,
            "cap": cap,
            "argmax": {"z_tail": best.1, "y": format!("e{}", best.2 + 1)},
        }),
    })
}

/// Recomputes the sub-checks from a certificate's own inputs and parameters.
pub fn replay(cert: &Certificate) -> Result<bool, CertError> {
    let h = cert.inputs.h.to_rational()?;
    let g = cert.inputs.g.to_rational()?;
    let mut again = verify_forms(cert.inputs.p, &h, &g, &cert.parameters)?;
    if cert.sub_checks.first().map(|c| c.name.as_str()) == Some("data_integrity") {
        again.sub_checks.insert(0, data_integrity_check(cert.inputs.p)?);
    }
    let f_ok = cert.inputs.f.to_rational()? == assemble(&h, &g, cert.inputs.p)?;
    Ok(f_ok && again.sub_checks == cert.sub_checks && verdict(&again.sub_checks) == cert.verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;

    #[test]
    fn assembled_values_at_unit_vectors() {
        let f = build_counterexample_form(2).unwrap();
        let unit = |i: usize| {
            let mut v = vec![BigRational::zero(); 11];
            v[i] = BigRational::from_integer(1.into());
            v
        };
        let val = |i| f.evaluate(&Rationals, &unit(i)).unwrap();
        assert_eq!(val(0), BigRational::from_integer(1.into()));
        assert_eq!(val(5), BigRational::from_integer(2.into()));
        assert_eq!(val(8), BigRational::from_integer(4.into()));
        assert!(matches!(build_counterexample_form(7), Err(CertError::UnsupportedPrime(7))));
    }

    #[test]
    fn printed_and_json_agree() {
        let printed = printed_forms().unwrap();
        for p in SUPPORTED_PRIMES {
            assert_eq!(printed[&format!("H{p}")], quinary_form(p).unwrap());
            assert_eq!(printed[&format!("G{p}")], ternary_form(p).unwrap());
        }
    }
}
