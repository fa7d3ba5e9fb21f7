mod common;

use common::{compressed_path, full_path, rel_gap};
use proptest::prelude::*;
use ssf_core::linalg::{fro_norm, matrix_power, CMatrix};
use ssf_core::paths::{compositions, gateaux_monomial, lemma_terms, taylor_oracle, weak_compositions};
use ssf_core::random::InstanceRng;
use ssf_core::MultiplicativePath;

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, j| acc * (n - j) / (j + 1))
}

fn random_path(seed: u64, d: usize, compressed: bool) -> MultiplicativePath {
    let mut rng = InstanceRng::new(seed);
    let norm = rng.uniform_in(0.2, 1.5);
    if compressed {
        let extra = rng.int_in(1, 3);
        compressed_path(&mut rng, d, extra, norm)
    } else {
        full_path(&mut rng, d, norm)
    }
}

fn power_at(p: &MultiplicativePath, s: f64, q: i64) -> CMatrix {
    let v = p.value(s);
    if q >= 0 {
        matrix_power(&v, q as usize)
    } else {
        matrix_power(&v.adjoint(), q.unsigned_abs() as usize)
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn combinatorial_matches_series(
        seed in any::<u64>(),
        d in 1usize..=5,
        q in prop_oneof![-8i64..=-1, 1i64..=8],
        k in 1usize..=4,
        compressed in any::<bool>(),
    ) {
        let p = random_path(seed, d, compressed);
        let a = gateaux_monomial(&p, q, k).unwrap();
        let b = taylor_oracle(&p, q, k).unwrap();
        prop_assert!(rel_gap(&a, &b) <= 1e-9);
    }

    #[test]
    fn negative_index_is_adjoint(seed in any::<u64>(), d in 1usize..=5, q in 1i64..=8, k in 1usize..=4) {
        let p = random_path(seed, d, seed % 2 == 0);
        let plus = gateaux_monomial(&p, q, k).unwrap();
        let minus = gateaux_monomial(&p, -q, k).unwrap();
        prop_assert_eq!(minus, plus.adjoint());
    }

    #[test]
    fn first_derivative_by_differences(seed in any::<u64>(), d in 1usize..=4, q in prop_oneof![-5i64..=-1, 1i64..=5]) {
        let p = random_path(seed, d, seed % 2 == 1);
        let exact = gateaux_monomial(&p, q, 1).unwrap();
        let central = |h: f64| (power_at(&p, h, q) - power_at(&p, -h, q)) / nalgebra::Complex::new(2.0 * h, 0.0);
        let h = 1e-3;
        let d1 = central(h);
        prop_assert!(fro_norm(&(&d1 - &exact)) <= 1e-5 * (1.0 + fro_norm(&exact)));
        // Richardson removes the h^2 term.
        let rich = (central(h / 2.0) * nalgebra::Complex::new(4.0, 0.0) - d1) / nalgebra::Complex::new(3.0, 0.0);
        prop_assert!(fro_norm(&(rich - &exact)) <= 1e-8 * (1.0 + fro_norm(&exact)));
    }
}

#[test]
fn term_count_matches_closed_form() {
    for q in 1..=10usize {
        for k in 1..=6usize {
            let expected: usize = (1..=k.min(q)).map(|r| binomial(k - 1, r - 1) * binomial(q, r)).sum();
            assert_eq!(lemma_terms(q, k).len(), expected, "q = {q}, k = {k}");
        }
    }
}

#[test]
fn enumerators_are_exhaustive_and_ordered() {
    for k in 1..=7usize {
        for r in 1..=k {
            let c = compositions(k, r);
            assert_eq!(c.len(), binomial(k - 1, r - 1));
            assert!(c.iter().all(|v| v.len() == r && v.iter().all(|&x| x >= 1) && v.iter().sum::<usize>() == k));
            assert!(c.windows(2).all(|w| w[0] < w[1]));
        }
    }
    for total in 0..=6usize {
        for parts in 1..=4usize {
            let w = weak_compositions(total, parts);
            assert_eq!(w.len(), binomial(total + parts - 1, parts - 1));
            assert!(w.iter().all(|v| v.len() == parts && v.iter().sum::<usize>() == total));
            assert!(w.windows(2).all(|x| x[0] < x[1]));
        }
    }
}

#[test]
fn weights_sum_to_multinomial_count() {
    // With every factor replaced by 1 the derivative of s -> (1 + s + s^2/2 + ...)^q
    // (that is e^{qs}) at 0 is q^k; each term contributes its weight.
    for q in 1..=6usize {
        for k in 1..=5usize {
            let total: f64 = lemma_terms(q, k).iter().map(|t| t.weight).sum();
            assert!((total - (q as f64).powi(k as i32)).abs() < 1e-9, "q = {q}, k = {k}");
        }
    }
}
