use cubiclines::forms::{Monomial, RatForm};
use cubiclines::line_search::{find_line_qp, find_line_qp_16, verify_line, LineOptions};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cubic(n: usize, seed: u64) -> RatForm {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = Vec::new();
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                let c: i64 = rng.gen_range(-5..=5);
                if c != 0 {
                    terms.push((Monomial::from_variables(n, &[i, j, k]).0, BigRational::from_integer(BigInt::from(c))));
                }
            }
        }
    }
    RatForm::new(&cubiclines::ring::Rationals, n, 3, terms).unwrap()
}

#[test]
fn fermat_22_has_a_line_over_q5() {
    let f = RatForm::fermat(22);
    let line = find_line_qp(&f, 5, &LineOptions::default()).unwrap();
    assert!(line.verified_precision >= 25, "{line:?}");
    assert!(verify_line(&f, &line, 30).unwrap() >= 25);
}

#[test]
fn random_cubics_have_lines() {
    for (seed, p) in [(1u64, 3u64), (2, 5)] {
        let f = random_cubic(22, seed);
        let line = find_line_qp(&f, p, &LineOptions::default()).unwrap_or_else(|e| panic!("p={p}: {e}"));
        assert!(verify_line(&f, &line, 30).unwrap() >= 25);
    }
}

#[test]
fn fermat_16_over_q23() {
    let f = RatForm::fermat(16);
    let line = find_line_qp_16(&f, 23, &LineOptions::default()).unwrap();
    assert!(line.verified_precision >= 25);
    assert!(line.warnings.is_empty());
    let line = find_line_qp_16(&random_cubic(16, 9), 17, &LineOptions::default()).unwrap();
    assert!(!line.warnings.is_empty());
}

#[test]
fn fermat_14_meets_hyperbolic_quadric_over_q23() {
    use cubiclines::forms::Form;
    use cubiclines::line_search::solve_cubic_quadric_local;
    use cubiclines::padic::QpField;
    use cubiclines::ring::Ring;
    let k = QpField::new(23, 20);
    let f = RatForm::fermat(14).map_coeffs(&k, |c| k.from_rational(c));
    // ⊕7 hyperbolic planes: x1 x2 + x3 x4 + …
    let q = Form::from_accumulated(&k, 14, 2, (0..7).map(|i| (Monomial::from_variables(14, &[2 * i, 2 * i + 1]), k.one())));
    let z = solve_cubic_quadric_local(&k, &f, &q, 100_000, 3).unwrap();
    assert!(f.evaluate(&k, &z).unwrap().valuation_or_precision() >= 19);
    assert!(q.evaluate(&k, &z).unwrap().valuation_or_precision() >= 19);
    assert!(z.iter().any(|c| c.valuation() == Some(0)));
}

#[test]
#[ignore = "slow sweep; run with --ignored"]
fn random_sweep() {
    let mut failures = Vec::new();
    for seed in 0..20u64 {
        let p = if seed % 2 == 0 { 3 } else { 5 };
        let f = random_cubic(22, 100 + seed);
        match find_line_qp(&f, p, &LineOptions { seed, ..LineOptions::default() }) {
            Ok(line) => assert!(verify_line(&f, &line, 30).unwrap() >= 25),
            Err(e) => failures.push(format!("seed {seed}, p {p}: {e}")),
        }
        let f16 = random_cubic(16, 200 + seed);
        if let Err(e) = find_line_qp_16(&f16, 23, &LineOptions { seed, ..LineOptions::default() }) {
            failures.push(format!("16 vars seed {seed}: {e}"));
        }
    }
    assert!(failures.is_empty(), "{failures:#?}");
}
