use cubiclines::forms::{form_from_json_str, int, int_vec, FormJson, Monomial, RatForm};
use cubiclines::ring::Rationals;
use num_rational::BigRational;
use proptest::prelude::*;

fn cubic_from(n: usize, coeffs: &[i64]) -> RatForm {
    let mut terms = vec![];
    let mut c = coeffs.iter().cycle();
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                let v = *c.next().unwrap();
                if v != 0 {
                    terms.push((Monomial::from_variables(n, &[i, j, k]).0, int(v)));
                }
            }
        }
    }
    RatForm::new(&Rationals, n, 3, terms).unwrap()
}

proptest! {
    #[test]
    fn polar_form_restricts_to_the_cubic(coeffs in prop::collection::vec(-5i64..=5, 10..30), x in prop::collection::vec(-7i64..=7, 4)) {
        let f = cubic_from(4, &coeffs);
        let x = int_vec(&x);
        let polar = f.polar(&Rationals).unwrap();
        let fx = f.evaluate(&Rationals, &x).unwrap();
        prop_assert_eq!(polar.polar_eval(&x, &x, &x).unwrap(), fx.clone());
        // Euler: Σ x_i ∂_i F = 3F; and xᵀ H_x x = Φ(x, x, x)
        let grad = f.gradient(&Rationals, &x).unwrap();
        let euler: BigRational = grad.iter().zip(&x).map(|(g, xi)| g * xi).sum();
        prop_assert_eq!(euler, &fx * int(3));
        let h = polar.hessian_matrix(&x).unwrap();
        let xhx: BigRational = (0..4).map(|i| (0..4).map(|j| &x[i] * &h[i][j] * &x[j]).sum::<BigRational>()).sum();
        prop_assert_eq!(xhx, fx);
    }

    #[test]
    fn binary_restriction_matches_evaluation(coeffs in prop::collection::vec(-5i64..=5, 10..30),
                                             a in prop::collection::vec(-4i64..=4, 4),
                                             b in prop::collection::vec(-4i64..=4, 4),
                                             s in -5i64..5, t in -5i64..5) {
        let f = cubic_from(4, &coeffs);
        let (a, b) = (int_vec(&a), int_vec(&b));
        let c = f.binary_restriction_coeffs(&Rationals, &a, &b).unwrap();
        let v: Vec<BigRational> = a.iter().zip(&b).map(|(x, y)| x * int(s) + y * int(t)).collect();
        let (s, t) = (int(s), int(t));
        let poly = &c[0] * &s * &s * &s + &c[1] * &s * &s * &t + &c[2] * &s * &t * &t + &c[3] * &t * &t * &t;
        prop_assert_eq!(poly, f.evaluate(&Rationals, &v).unwrap());
    }

    #[test]
    fn json_round_trip(coeffs in prop::collection::vec(-5i64..=5, 10..30)) {
        let f = cubic_from(4, &coeffs);
        let text = serde_json::to_string(&FormJson::from_rational(&f)).unwrap();
        prop_assert_eq!(form_from_json_str(&text).unwrap(), f);
    }
}

#[test]
fn parser_agrees_with_explicit_terms() {
    let f = RatForm::parse("x^3 - 2 x y^2 + 1/2 z^3", &["x", "y", "z"]).unwrap();
    let g = RatForm::from_int_terms(3, 3, &[(vec![3, 0, 0], 2), (vec![1, 2, 0], -4), (vec![0, 0, 3], 1)]).unwrap();
    let two = BigRational::from_integer(2.into());
    assert_eq!(f.scale(&Rationals, &two), g);
    assert!(RatForm::parse("x^3 + w", &["x"]).is_err());
}
