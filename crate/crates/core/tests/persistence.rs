mod support;

use grassfire::persistence::{components_at, rips_barcode, rips_h0, rips_h1};
use grassfire::DistanceMatrix;
use proptest::prelude::*;
use support::*;

#[test]
fn matches_brute_force_on_random_matrices() {
    let mut rng = rng(0xbeef);
    for trial in 0..60 {
        let m = 2 + trial % 10;
        let ties = trial % 3 == 0;
        let d = random_distance_matrix(&mut rng, m, ties);
        let cap = d.max_entry();
        let ours = bars_of(&rips_barcode(&d, cap).unwrap());
        let oracle = brute_force_barcode(&d, cap);
        assert!(
            bars_match(&ours, &oracle, 1e-12),
            "trial {trial}\n{ours:?}\n{oracle:?}"
        );
    }
}

#[test]
fn matches_brute_force_with_low_caps() {
    let mut rng = rng(7);
    for trial in 0..40 {
        let m = 4 + trial % 8;
        let d = random_distance_matrix(&mut rng, m, trial % 2 == 0);
        let cap = d.max_entry() * (0.3 + 0.1 * (trial % 5) as f64);
        let ours: Vec<Bar> = bars_of(&rips_h1(&d, cap).unwrap());
        let oracle: Vec<Bar> = brute_force_barcode(&d, cap)
            .into_iter()
            .filter(|b| b.0 == 1)
            .collect();
        assert!(
            bars_match(&ours, &oracle, 1e-12),
            "trial {trial}\n{ours:?}\n{oracle:?}"
        );
    }
}

#[test]
fn duplicate_points_merge_instantly() {
    // points 0 and 1 coincide, 2 and 3 coincide
    let d = DistanceMatrix::from_fn(4, |i, j| if i / 2 == j / 2 { 0.0 } else { 1.0 }).unwrap();
    let b = rips_h0(&d);
    assert_eq!(b.diagnostics().zero_persistence_h0, 2);
    assert_eq!(b.dim(0).count(), 2);
    assert_eq!(components_at(&d, 0.0).count(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scale_equivariance(seed in any::<u64>(), m in 3usize..10, c in 0.01f64..100.0) {
        let d = random_distance_matrix(&mut rng(seed), m, false);
        let base = bars_of(&rips_barcode(&d, d.max_entry()).unwrap());
        let scaled_d = d.scaled(c).unwrap();
        let scaled = bars_of(&rips_barcode(&scaled_d, scaled_d.max_entry()).unwrap());
        prop_assert_eq!(base.len(), scaled.len());
        for (a, b) in base.iter().zip(&scaled) {
            prop_assert_eq!(a.0, b.0);
            prop_assert!((a.1 * c - b.1).abs() <= 1e-12 * c.max(1.0));
            prop_assert!(a.2.is_infinite() && b.2.is_infinite() || (a.2 * c - b.2).abs() <= 1e-12 * c.max(1.0));
        }
    }

    #[test]
    fn betti0_non_increasing(seed in any::<u64>(), m in 2usize..15) {
        let d = random_distance_matrix(&mut rng(seed), m, seed % 2 == 0);
        let b = rips_h0(&d);
        let mut eps: Vec<f64> = d.entries().to_vec();
        eps.sort_by(f64::total_cmp);
        let counts: Vec<usize> = eps.iter().map(|&e| b.betti_at(e, 0)).collect();
        prop_assert!(counts.windows(2).all(|w| w[0] >= w[1]));
        for &e in eps.iter().step_by(3) {
            prop_assert_eq!(components_at(&d, e).count(), b.betti_at(e, 0));
        }
    }

    #[test]
    fn relabeling_points(seed in any::<u64>(), m in 3usize..11) {
        let mut r = rng(seed);
        let d = random_distance_matrix(&mut r, m, false);
        let mut perm: Vec<usize> = (0..m).collect();
        perm.reverse();
        perm.rotate_left((seed % m as u64) as usize);
        let p = d.permuted(&perm).unwrap();
        prop_assert_eq!(
            bars_of(&rips_barcode(&d, d.max_entry()).unwrap()),
            bars_of(&rips_barcode(&p, p.max_entry()).unwrap())
        );
        let eps = d.max_entry() * 0.4;
        let original = components_at(&d, eps);
        let relabeled = components_at(&p, eps);
        for i in 0..m {
            for j in 0..m {
                prop_assert_eq!(
                    relabeled.labels[i] == relabeled.labels[j],
                    original.labels[perm[i]] == original.labels[perm[j]]
                );
            }
        }
    }

    #[test]
    fn stability_under_perturbation(seed in any::<u64>(), m in 3usize..9, delta in 1e-4f64..0.05) {
        let mut r = rng(seed);
        let d = random_distance_matrix(&mut r, m, false);
        let noisy = DistanceMatrix::from_fn(m, |i, j| {
            use rand::Rng;
            (d.get(i, j) + r.random_range(-delta..=delta)).max(0.0)
        }).unwrap();
        let cap = d.max_entry().max(noisy.max_entry()) + 1.0;
        let a = bars_of(&rips_barcode(&d, cap).unwrap());
        let b = bars_of(&rips_barcode(&noisy, cap).unwrap());
        prop_assert!(delta_matched(&a, &b, delta), "{:?}\n{:?}", a, b);
    }
}
