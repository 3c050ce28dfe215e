use std::collections::BTreeSet;

use cubiclines::linalg;
use cubiclines::padic::{PAdic, QpField};
use cubiclines::quadforms::{diagonalize, find_isotropic_vector, invariants, is_isotropic, quad_value, QuadError};
use cubiclines::ring::{Rationals, Ring};
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn q(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

#[test]
fn diagonalization_is_a_congruence_over_q() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 1..7 {
        for _ in 0..10 {
            let mut g = vec![vec![q(0); n]; n];
            for i in 0..n {
                for j in i..n {
                    let c = q(rng.gen_range(-9..=9));
                    g[i][j] = c.clone();
                    g[j][i] = c;
                }
            }
            let dz = diagonalize(&Rationals, &g).unwrap();
            // Tᵀ G T = diag
            for i in 0..n {
                for j in 0..n {
                    let b = linalg::bilinear(&Rationals, &g, &dz.basis[i], &dz.basis[j]);
                    let expected = if i == j { dz.diag[i].clone() } else { q(0) };
                    assert_eq!(b, expected);
                }
            }
            // T is invertible
            assert_eq!(linalg::rank(&Rationals, &dz.basis), n);
        }
    }
}

/// Primitive zero of a x² + b y² + c z² mod p³ (p odd, coefficients of
/// valuation ≤ 1); such zeros lift to Q_p.
fn ternary_isotropic_brute_force(a: i64, b: i64, c: i64, p: i64) -> bool {
    let m = p.pow(3);
    let sq: Vec<i64> = (0..m).map(|x| x * x % m).collect();
    for x in 0..m {
        for y in 0..m {
            for z in 0..m {
                if x % p == 0 && y % p == 0 && z % p == 0 {
                    continue;
                }
                if (a * sq[x as usize] + b * sq[y as usize] + c * sq[z as usize]).rem_euclid(m) == 0 {
                    return true;
                }
            }
        }
    }
    false
}

#[test]
fn isotropy_matches_brute_force_on_ternary_diagonal_forms() {
    let p = 3i64;
    let k = QpField::new(p as u64, 20);
    let values = [1i64, 2, 3, 6, -1, -3];
    let mut seen = BTreeSet::new();
    for &a in &values {
        for &b in &values {
            for &c in &values {
                let g: Vec<Vec<PAdic>> = (0..3)
                    .map(|i| (0..3).map(|j| if i == j { k.from_i64([a, b, c][i]) } else { k.zero() }).collect())
                    .collect();
                let oracle = ternary_isotropic_brute_force(a, b, c, p);
                seen.insert(oracle);
                assert_eq!(is_isotropic(&k, &g).unwrap(), oracle, "({a},{b},{c})");
                match find_isotropic_vector(&k, &g) {
                    Ok(v) => {
                        assert!(oracle);
                        assert!(quad_value(&k, &g, &v).valuation_or_precision() >= 15);
                        assert!(v.iter().any(|x| x.valuation() == Some(0)));
                    }
                    Err(QuadError::Anisotropic) => assert!(!oracle),
                    Err(e) => panic!("{e}"),
                }
            }
        }
    }
    assert_eq!(seen.len(), 2);
}

#[test]
fn invariants_of_hyperbolic_plane() {
    let k = QpField::new(5, 20);
    let g = vec![vec![k.zero(), k.one()], vec![k.one(), k.zero()]];
    let inv = invariants(&k, &g).unwrap();
    assert_eq!(inv.rank, 2);
    assert!(is_isotropic(&k, &g).unwrap());
    // x² − 2y² is anisotropic over Q_5 (2 is a non-residue)
    let h = vec![vec![k.one(), k.zero()], vec![k.zero(), k.from_i64(-2)]];
    assert!(!is_isotropic(&k, &h).unwrap());
}
