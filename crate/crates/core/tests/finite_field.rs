use std::collections::BTreeSet;

use cubiclines::finite_field::{
    enumerate_lines, enumerate_points, find_lines_on_cubic, line_count, nontrivial_zeros, point_count, singular_points_mod_p,
};
use cubiclines::forms::{Form, Monomial};
use cubiclines::ring::PrimeField;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_cubic(p: u64, n: usize, seed: u64) -> Form<u64> {
    let field = PrimeField::new(p);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut terms = vec![];
    for i in 0..n {
        for j in i..n {
            for k in j..n {
                terms.push((Monomial::from_variables(n, &[i, j, k]), rng.gen_range(0..p)));
            }
        }
    }
    Form::from_accumulated(&field, n, 3, terms)
}

fn all_vectors(p: u64, n: usize) -> Vec<Vec<u64>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out.into_iter().flat_map(|v| (0..p).map(move |c| [v.clone(), vec![c]].concat())).collect();
    }
    out
}

#[test]
fn counts_match_closed_forms() {
    for (p, n) in [(2u64, 3usize), (3, 4), (5, 3), (2, 6)] {
        let pts: BTreeSet<_> = enumerate_points(p, n).map(|x| x.coords).collect();
        assert_eq!(pts.len() as u64, point_count(p, n));
        assert_eq!(point_count(p, n), (p.pow(n as u32) - 1) / (p - 1));
        let lines: BTreeSet<_> = enumerate_lines(p, n).collect();
        assert_eq!(lines.len() as u64, line_count(p, n));
        // every pair of distinct points lies on exactly one line
        assert_eq!(line_count(p, n) * (p + 1) * p, point_count(p, n) * (point_count(p, n) - 1));
    }
}

#[test]
fn zeros_and_lines_match_brute_force() {
    for seed in 0..6 {
        let p = [2u64, 3][seed as usize % 2];
        let field = PrimeField::new(p);
        let f = random_cubic(p, 4, seed);
        let zero_set: BTreeSet<Vec<u64>> = nontrivial_zeros(&f, &field).into_iter().map(|z| z.coords).collect();
        let brute: usize = all_vectors(p, 4).iter().filter(|v| v.iter().any(|&c| c != 0) && f.evaluate(&field, v).unwrap() == 0).count();
        assert_eq!(zero_set.len() * (p as usize - 1), brute);
        // for p ≥ 3 a binary cubic vanishing at p + 1 ≥ 4 points is zero, so a
        // line lies on the cubic iff all of its points do; over F_2 only one
        // direction holds (s t (s + t) vanishes on all three points)
        let on: BTreeSet<_> = find_lines_on_cubic(&f, &field).into_iter().collect();
        for l in enumerate_lines(p, 4) {
            let all_on = l.points().iter().all(|x| zero_set.contains(&x.coords));
            if p >= 3 {
                assert_eq!(on.contains(&l), all_on);
            } else if on.contains(&l) {
                assert!(all_on);
            }
        }
        for s in singular_points_mod_p(&f, &field) {
            assert!(f.gradient(&field, &s.coords).unwrap().iter().all(|&g| g == 0));
            assert!(zero_set.contains(&s.coords));
        }
    }
}
