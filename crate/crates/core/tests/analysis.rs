use covlda::analysis::{
    align_clusters, pearson, posterior_summary, predict_abundance, probabilistic_coherence, relevant_categories,
    CoherenceScope,
};
use covlda::model::{CountData, CovariateMatrix};
use covlda::{ChainRng, Exec};
use itertools::Itertools;
use ndarray::Array2;
use proptest::prelude::*;

fn simplex_rows(k: usize, s: usize, rng: &mut ChainRng) -> Array2<f64> {
    let mut phi = Array2::from_shape_fn((k, s), |_| rng.uniform() + 1e-3);
    for mut row in phi.rows_mut() {
        let t = row.sum();
        row.mapv_inplace(|v| v / t);
    }
    phi
}

fn random_x(l: usize, d: usize, rng: &mut ChainRng) -> CovariateMatrix {
    let names = (0..d).map(|j| format!("v{j}")).collect();
    CovariateMatrix::new(Array2::from_shape_fn((l, d), |_| rng.uniform() * 2.0 - 1.0), names).unwrap()
}

#[test]
fn prediction_matches_triple_loop() {
    let mut rng = ChainRng::seed_from_u64(4);
    for _ in 0..20 {
        let (k_n, s_n, d, l_n) = (3, 4, 2, 5);
        let beta = Array2::from_shape_fn((k_n, d), |_| rng.uniform() * 2.0 - 1.0);
        let phi = simplex_rows(k_n, s_n, &mut rng);
        let x = random_x(l_n, d, &mut rng);
        let got = predict_abundance(&beta, &phi, &x, Exec::Sequential).unwrap();
        for l in 0..l_n {
            for s in 0..s_n {
                let mut want = 0.0;
                for k in 0..k_n {
                    let mut eta = 0.0;
                    for j in 0..d {
                        eta += x.design[[l, j]] * beta[[k, j]];
                    }
                    want += eta.exp() * phi[[k, s]];
                }
                assert!((got[[l, s]] - want).abs() < 1e-12, "({l}, {s}): {} vs {want}", got[[l, s]]);
            }
        }
        assert_eq!(got, predict_abundance(&beta, &phi, &x, Exec::Parallel).unwrap());
    }
}

#[test]
fn alignment_matches_exhaustive_search() {
    let mut rng = ChainRng::seed_from_u64(8);
    for _ in 0..50 {
        let truth = simplex_rows(4, 9, &mut rng);
        let est = simplex_rows(4, 9, &mut rng);
        let score = |perm: &[usize]| -> f64 {
            perm.iter().enumerate().map(|(t, &e)| pearson(&est.row(e).to_vec(), &truth.row(t).to_vec())).sum()
        };
        let best = (0..4).permutations(4).map(|p| score(&p)).fold(f64::NEG_INFINITY, f64::max);
        let sigma = align_clusters(&est, &truth);
        assert!((score(&sigma) - best).abs() < 1e-12);
    }
}

#[test]
fn independent_categories_score_near_zero() {
    // One cluster, categories present independently at fixed rates.
    let mut rng = ChainRng::seed_from_u64(15);
    let rates = [0.6, 0.5, 0.4, 0.35, 0.3, 0.2];
    let l_n = 20_000;
    let counts = Array2::from_shape_fn((l_n, rates.len()), |(_, s)| u32::from(rng.uniform() < rates[s]));
    let data = CountData::from_counts(counts).unwrap();
    let phi = Array2::from_shape_vec((1, 6), rates.iter().map(|r| r / 2.35).collect()).unwrap();
    let theta = Array2::ones((l_n, 1));
    for scope in [CoherenceScope::AssignedInstances, CoherenceScope::WholeCorpus] {
        let rep = probabilistic_coherence(&phi, &data, &theta, 5, scope, Exec::Sequential).unwrap();
        assert!(rep.total.abs() < 0.05, "{scope:?}: {}", rep.total);
    }
}

#[test]
fn hand_counted_pair_score() {
    // Instances {A,B}, {A}, {C}, {A,B}; top categories A then B.
    let data = CountData::from_counts(ndarray::array![[1u32, 1, 0], [1, 0, 0], [0, 0, 1], [1, 1, 0]]).unwrap();
    let phi = ndarray::array![[0.6, 0.3, 0.1]];
    let rep =
        probabilistic_coherence(&phi, &data, &Array2::ones((4, 1)), 2, CoherenceScope::WholeCorpus, Exec::Sequential)
            .unwrap();
    assert!((rep.total - 0.25).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prediction_ignores_cluster_order(seed in any::<u64>()) {
        let mut rng = ChainRng::seed_from_u64(seed);
        let (k_n, s_n, d) = (4, 6, 3);
        let beta = Array2::from_shape_fn((k_n, d), |_| rng.uniform() * 2.0 - 1.0);
        let phi = simplex_rows(k_n, s_n, &mut rng);
        let x = random_x(7, d, &mut rng);
        let perm = [2, 0, 3, 1];
        let beta_p = Array2::from_shape_fn((k_n, d), |(k, j)| beta[[perm[k], j]]);
        let phi_p = Array2::from_shape_fn((k_n, s_n), |(k, s)| phi[[perm[k], s]]);
        let a = predict_abundance(&beta, &phi, &x, Exec::Sequential).unwrap();
        let b = predict_abundance(&beta_p, &phi_p, &x, Exec::Sequential).unwrap();
        prop_assert!(a.iter().zip(b.iter()).all(|(u, v)| (u - v).abs() <= 1e-12 * u.abs().max(1.0)));
    }

    #[test]
    fn each_category_is_relevant_to_at_most_one_cluster(seed in any::<u64>(), k_n in 1usize..6, ratio in 2.0f64..4.0) {
        let mut rng = ChainRng::seed_from_u64(seed);
        let phi = simplex_rows(k_n, 12, &mut rng);
        let rel = relevant_categories(&phi, ratio);
        let mut owners = [0usize; 12];
        for (k, cats) in rel.iter().enumerate() {
            for &s in cats {
                owners[s] += 1;
                prop_assert!(phi[[k, s]] >= ratio * (0..k_n).filter(|&j| j != k).map(|j| phi[[j, s]]).fold(0.0, f64::max));
            }
            prop_assert!(cats.windows(2).all(|w| phi[[k, w[0]]] >= phi[[k, w[1]]]));
        }
        prop_assert!(owners.iter().all(|&c| c <= 1));
    }

    #[test]
    fn coherence_ignores_instance_order(seed in any::<u64>()) {
        let mut rng = ChainRng::seed_from_u64(seed);
        let (l_n, s_n, k_n) = (30, 8, 3);
        let counts = Array2::from_shape_fn((l_n, s_n), |_| u32::from(rng.uniform() < 0.4) * (1 + rng.index(3) as u32));
        let Ok(data) = CountData::from_counts(counts.clone()) else { return Ok(()) };
        let phi = simplex_rows(k_n, s_n, &mut rng);
        let theta = simplex_rows(l_n, k_n, &mut rng);
        let order: Vec<usize> = (0..l_n).rev().collect();
        let counts_r = Array2::from_shape_fn((l_n, s_n), |(l, s)| counts[[order[l], s]]);
        let theta_r = Array2::from_shape_fn((l_n, k_n), |(l, k)| theta[[order[l], k]]);
        let data_r = CountData::from_counts(counts_r).unwrap();
        for scope in [CoherenceScope::AssignedInstances, CoherenceScope::WholeCorpus] {
            let a = probabilistic_coherence(&phi, &data, &theta, 4, scope, Exec::Sequential).unwrap();
            let b = probabilistic_coherence(&phi, &data_r, &theta_r, 4, scope, Exec::Parallel).unwrap();
            prop_assert!((a.total - b.total).abs() < 1e-12);
            prop_assert!((a.total - a.per_cluster.iter().sum::<f64>()).abs() < 1e-12);
        }
    }

    #[test]
    fn significance_flag_matches_interval(seed in any::<u64>(), shift in -3.0f64..3.0, level in 0.5f64..0.995) {
        let mut rng = ChainRng::seed_from_u64(seed);
        let draws: Vec<Array2<f64>> =
            (0..40).map(|_| Array2::from_shape_fn((2, 3), |_| shift + rng.uniform() * 2.0 - 1.0)).collect();
        let names: Vec<String> = ["a", "b", "c"].map(String::from).to_vec();
        let table = posterior_summary(&draws, &names, level).unwrap();
        prop_assert_eq!(table.rows.len(), 6);
        for r in &table.rows {
            let s = &r.summary;
            prop_assert!(s.lower <= s.upper);
            prop_assert_eq!(s.significant, s.lower > 0.0 || s.upper < 0.0);
        }
    }
}
