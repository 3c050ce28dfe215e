use cubiclines::padic::{hensel_lift_univariate, QpField, SquareClass};
use cubiclines::ring::{Field, Ring};
use num_bigint::BigInt;
use num_rational::BigRational;
use proptest::prelude::*;

fn val_int(mut n: i64, p: i64) -> i64 {
    let mut v = 0;
    while n % p == 0 {
        n /= p;
        v += 1;
    }
    v
}

fn primes_dividing(n: i64) -> Vec<u64> {
    let mut n = n.unsigned_abs();
    let mut out = vec![];
    let mut q = 2;
    while q * q <= n {
        if n % q == 0 {
            out.push(q);
            while n % q == 0 {
                n /= q;
            }
        }
        q += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

proptest! {
    #[test]
    fn valuation_is_additive(a in -100_000i64..100_000, b in -100_000i64..100_000, p in prop::sample::select(vec![2u64, 3, 5, 7, 11])) {
        prop_assume!(a != 0 && b != 0);
        let k = QpField::new(p, 25);
        let prod = k.mul(&k.from_i64(a), &k.from_i64(b));
        prop_assert_eq!(prod.valuation(), Some(val_int(a, p as i64) + val_int(b, p as i64)));
    }

    #[test]
    fn rational_round_trip_mod_p_n(num in -10_000i64..10_000, den in 1i64..10_000, p in prop::sample::select(vec![3u64, 5, 7])) {
        prop_assume!(num != 0);
        let k = QpField::new(p, 20);
        let q = BigRational::new(BigInt::from(num), BigInt::from(den));
        let x = k.from_rational(&q);
        let back = k.to_rational(&x);
        let diff = k.from_rational(&(back - &q));
        // the representative agrees with q to the absolute precision of x
        prop_assert!(diff.valuation_or_precision() >= x.abs_precision());
    }

    #[test]
    fn precision_bookkeeping(a in 1i64..1_000_000, b in 1i64..1_000_000, n in 5u32..30) {
        let k = QpField::new(5, n);
        let (x, y) = (k.from_i64(a), k.from_i64(b));
        let s = k.add(&x, &y);
        prop_assert!(s.abs_precision() >= x.abs_precision().min(y.abs_precision()));
        let m = k.mul(&x, &y);
        prop_assert!(m.rel_precision() <= n);
        let inv = k.inv(&x).unwrap();
        prop_assert!(k.eq_approx(&k.mul(&x, &inv), &k.one()));
    }

    #[test]
    fn square_roots_square_back(a in 1i64..100_000, p in prop::sample::select(vec![3u64, 5, 7, 13])) {
        let k = QpField::new(p, 20);
        let sq = k.mul(&k.from_i64(a), &k.from_i64(a));
        let r = k.sqrt(&sq).unwrap();
        prop_assert!(k.eq_approx(&k.mul(&r, &r), &sq));
        prop_assert!(k.is_square(&sq).unwrap());
    }

    /// ∏ over all places of (a, b)_v is 1.
    #[test]
    fn hilbert_product_formula(a in -500i64..500, b in -500i64..500) {
        prop_assume!(a != 0 && b != 0);
        let mut places: Vec<u64> = primes_dividing(2 * a * b);
        places.sort();
        places.dedup();
        let mut prod = if a < 0 && b < 0 { -1 } else { 1 };
        for p in places {
            let k = QpField::new(p, 20);
            prod *= k.hilbert_symbol(&k.from_i64(a), &k.from_i64(b)).unwrap();
        }
        prop_assert_eq!(prod, 1);
    }
}

#[test]
fn two_adic_squares_are_one_mod_eight() {
    let k = QpField::new(2, 30);
    for u in (1..200i64).step_by(2) {
        let expected = u.rem_euclid(8) == 1;
        assert_eq!(k.is_square(&k.from_i64(u)).unwrap(), expected, "{u}");
    }
    assert!(!k.is_square(&k.from_i64(-1)).unwrap());
    assert_eq!(SquareClass::all(2).len(), 8);
    assert_eq!(SquareClass::all(7).len(), 4);
}

#[test]
fn hensel_lifts_cube_root_of_two_mod_five_powers() {
    // x³ − 2 over Q_5: 3³ = 27 ≡ 2 mod 5 and 3·3² is a unit
    let k = QpField::new(5, 30);
    let root = hensel_lift_univariate(&k, &[k.from_i64(-2), k.zero(), k.zero(), k.one()], &k.from_i64(3)).unwrap();
    let cube = k.mul(&root, &k.mul(&root, &root));
    assert!(k.sub(&cube, &k.from_i64(2)).valuation_or_precision() >= 30);
    let _ = k.div(&root, &k.from_i64(5)).unwrap();
}
