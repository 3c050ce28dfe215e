//! Browser demo: Hilbert symbol tables, F_p line censuses and real root
//! tracking, each returning JSON for the page to render.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use cubiclines::certificate;
use cubiclines::finite_field::{find_lines_on_cubic, line_count};
use cubiclines::forms::RatForm;
use cubiclines::padic::{hilbert_classes, SquareClass};
use cubiclines::real_geometry::{track_roots_along_loop, LoopSpec};
use cubiclines::ring::{is_prime, PrimeField};

const MAX_LINES_SHOWN: usize = 20;
const MAX_CENSUS_LINES: u64 = 2_000_000;

fn check_prime(p: u32) -> Result<u64, String> {
    let p = p as u64;
    if p < 2 || !is_prime(p) {
        return Err(format!("{p} is not a prime"));
    }
    Ok(p)
}

/// Hilbert symbols `(a, b)_p` over all square classes of Q_p.
pub fn hilbert_table_json(p: u32) -> Result<Value, String> {
    let p = check_prime(p)?;
    let classes = SquareClass::all(p);
    let labels: Vec<String> = classes.iter().map(|c| c.label()).collect();
    let rows: Vec<Vec<i32>> = classes.iter().map(|a| classes.iter().map(|b| hilbert_classes(a, b)).collect()).collect();
    Ok(json!({ "p": p, "labels": labels, "table": rows }))
}

/// Variable names `x1 … xn`.
fn variables(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{i}")).collect()
}

/// Parses a cubic in `x1 … xn` (or `preset:H` for the shipped quinary form
/// at this prime) and enumerates its F_p-lines.
pub fn line_census_json(p: u32, n: u32, text: &str) -> Result<Value, String> {
    let p = check_prime(p)?;
    let f = if text.trim() == "preset:H" {
        certificate::quinary_form(p).map_err(|e| e.to_string())?
    } else {
        let names = variables(n as usize);
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        RatForm::parse(text, &refs).map_err(|e| e.to_string())?
    };
    if f.degree() != 3 {
        return Err("expected a cubic form".into());
    }
    let n = f.n_vars();
    let scanned = line_count(p, n);
    if scanned > MAX_CENSUS_LINES {
        return Err(format!("{scanned} lines is too many for the browser"));
    }
    let field = PrimeField::new(p);
    let reduced = f.reduce_mod(&field).map_err(|e| e.to_string())?;
    let lines = find_lines_on_cubic(&reduced, &field);
    Ok(json!({
        "p": p,
        "n": n,
        "lines_scanned": scanned,
        "lines_found": lines.len(),
        "lines": lines.iter().take(MAX_LINES_SHOWN).map(|l| &l.gens).collect::<Vec<_>>(),
    }))
}

/// Tracks the real roots `z` of `F(x, y, z)` over the unit circle in `(x, y)`.
pub fn track_loop_json(text: &str, steps: u32) -> Result<Value, String> {
    let f = RatForm::parse(text, &["x", "y", "z"]).map_err(|e| e.to_string())?;
    if f.degree() != 3 {
        return Err("expected a cubic form".into());
    }
    let trace = track_roots_along_loop(&f.to_f64(), &LoopSpec::unit_circle(2), steps.max(50) as usize, 1e-9)
        .map_err(|e| e.to_string())?;
    Ok(json!({
        "winding": trace.winding,
        "total_multiplicity": trace.total_multiplicity(),
        "min_multiplicity": trace.min_multiplicity,
        "max_multiplicity": trace.max_multiplicity,
        "max_residual": trace.max_residual,
        "multiplicity_changes": trace.multiplicity_changes,
        "branches": trace.branches,
        "antipodal_witness": trace.antipodal_witness,
    }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn hilbert_table(p: u32) -> Result<String, JsValue> {
    to_js(hilbert_table_json(p))
}

#[wasm_bindgen]
pub fn line_census(p: u32, n: u32, form: &str) -> Result<String, JsValue> {
    to_js(line_census_json(p, n, form))
}

#[wasm_bindgen]
pub fn track_loop(form: &str, steps: u32) -> Result<String, JsValue> {
    to_js(track_loop_json(form, steps))
}
