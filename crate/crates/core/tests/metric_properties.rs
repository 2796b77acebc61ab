mod common;

use kgsynth::fidelity::jsd_probabilities;
use kgsynth::privacy::DEFAULT_QI;
use kgsynth::*;
use proptest::prelude::*;

fn pmf_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..8).prop_flat_map(|k| {
        (
            prop::collection::vec(0u32..20, k),
            prop::collection::vec(0u32..20, k),
        )
            .prop_filter("non-zero mass", |(a, b)| a.iter().sum::<u32>() > 0 && b.iter().sum::<u32>() > 0)
            .prop_map(|(a, b)| {
                let norm = |v: Vec<u32>| {
                    let s: u32 = v.iter().sum();
                    v.into_iter().map(|x| x as f64 / s as f64).collect::<Vec<_>>()
                };
                (norm(a), norm(b))
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn jsd_is_symmetric_bounded_and_zero_on_equal((p, q) in pmf_pair()) {
        let (a, b) = (jsd_probabilities(&p, &q), jsd_probabilities(&q, &p));
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(jsd_probabilities(&p, &p).abs() < 1e-12);
        if a < 1e-12 {
            for (x, y) in p.iter().zip(&q) {
                prop_assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn cramers_v_symmetric_and_relabel_invariant(
        pairs in prop::collection::vec((0u8..4, 0u8..3), 2..60),
        perm_seed in any::<u64>(),
    ) {
        let a: Vec<u8> = pairs.iter().map(|p| p.0).collect();
        let b: Vec<u8> = pairs.iter().map(|p| p.1).collect();
        let v = cramers_v_bias_corrected(&a, &b).unwrap();
        prop_assert!((v - cramers_v_bias_corrected(&b, &a).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&v));
        let shift = (perm_seed % 4) as u8;
        let relabeled: Vec<String> = a.iter().map(|x| format!("L{}", (x + shift) % 4)).collect();
        prop_assert!((v - cramers_v_bias_corrected(&relabeled, &b).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn table_metrics_match_oracles(seed in any::<u64>()) {
        let c = common::random_instance(seed);
        prop_assert!((mean_jsd(&c.real, &c.syn).unwrap() - common::mean_jsd(&c.real_rows, &c.syn_rows)).abs() < 1e-9);
        prop_assert!((mae_v(&c.real, &c.syn).unwrap().error - common::mae_v(&c.real_rows, &c.syn_rows)).abs() < 1e-9);
        prop_assert!((energy_distance_sq(&c.real, &c.syn).unwrap() - common::ed2(&c.real_rows, &c.syn_rows)).abs() < 1e-9);
    }

    #[test]
    fn fidelity_metrics_are_symmetric(seed in any::<u64>()) {
        let c = common::random_instance(seed);
        let m1 = mae_v(&c.real, &c.syn).unwrap().error;
        prop_assert!((m1 - mae_v(&c.syn, &c.real).unwrap().error).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&m1));
        let e = energy_distance_sq(&c.real, &c.syn).unwrap();
        prop_assert!((e - energy_distance_sq(&c.syn, &c.real).unwrap()).abs() < 1e-12);
        prop_assert!(e >= -1e-12);
    }

    #[test]
    fn ed2_ignores_row_order(seed in any::<u64>()) {
        let c = common::random_instance(seed);
        let reversed: Vec<usize> = (0..c.real.n_rows()).rev().collect();
        let shuffled = c.real.select_rows(&reversed);
        prop_assert!(energy_distance_sq(&c.real, &shuffled).unwrap().abs() < 1e-12);
    }

    #[test]
    fn privacy_report_invariants(seed in any::<u64>()) {
        let c = common::random_instance(seed);
        let r = privacy_report(&c.syn, &c.real, &DEFAULT_QI).unwrap();
        prop_assert!(r.exact_overlap <= r.near_match_share_le1);
        prop_assert_eq!(r.nn_q05_normalized, r.nn_q05_hamming / c.schema.n_columns() as f64);
        prop_assert!((0.0..=1.0).contains(&r.k_map_risk_avg));
        prop_assert_eq!(near_match_share(&c.syn, &c.real, 0).unwrap(), r.exact_overlap);
    }

    #[test]
    fn nn_search_matches_brute_force(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let schema = common::small_schema(rng.random_range(1..=8), 2);
        let (n, m) = (rng.random_range(1..=50), rng.random_range(1..=50));
        let real = common::random_rows(&mut rng, &schema, n);
        let syn = common::random_rows(&mut rng, &schema, m);
        let got: Vec<usize> = nn_distances(&common::to_table(&schema, &syn), &common::to_table(&schema, &real))
            .unwrap()
            .iter()
            .map(|d| d.hamming)
            .collect();
        prop_assert_eq!(got, common::nn_hamming(&syn, &real));
    }

    #[test]
    fn quantile_matches_reference(values in prop::collection::vec(0.0f64..10.0, 1..40), q in 0.0f64..=1.0) {
        prop_assert!((quantile(&values, q).unwrap() - common::quantile(&values, q)).abs() < 1e-12);
    }
}

#[test]
fn bootstrap_delta_is_antisymmetric() {
    use rand::SeedableRng;
    for seed in 0..5 {
        let c = common::random_instance(seed);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed + 1000);
        let other = common::to_table(&c.schema, &common::random_rows(&mut rng, &c.schema, c.syn.n_rows()));
        for metric in FidelityMetric::ALL {
            let d1 = bootstrap_delta(&c.real, &c.syn, &other, metric, 200, 9).unwrap();
            let d2 = bootstrap_delta(&c.real, &other, &c.syn, metric, 200, 9).unwrap();
            assert!((d1.point + d2.point).abs() < 1e-12, "{metric:?}");
            assert!((d1.ci_low + d2.ci_high).abs() < 1e-12, "{metric:?}");
        }
    }
}
