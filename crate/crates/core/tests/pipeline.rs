use std::fs::File;
use std::path::Path;

use proptest::prelude::*;

use ras_core::choice::PreferenceDistribution;
use ras_core::estimator::estimate_from_rules;
use ras_core::generators::{
    gen_mm, gen_topn, satisficing_exact_rule, GammaSchedule, SatisficingModel, SearchDistribution,
    ThresholdDist,
};
use ras_core::homogeneous::{survivor_search, SurvivalOptions};
use ras_core::io;
use ras_core::lattice::SetIndex;
use ras_core::lottery_experiment;
use ras_core::matrix::{build_choice_transform, predict_choices};
use ras_core::menu::{Menu, OrderingSet, PreferenceOrdering};
use ras_core::qp::QpOptions;
use ras_core::sampler::{sample_attention_rule, SamplerConfig};

fn plain_survivors(pi: &ras_core::choice::ChoiceDataset) -> Vec<PreferenceOrdering> {
    let opts = SurvivalOptions {
        never_chosen_rule: false,
        ..SurvivalOptions::default()
    };
    survivor_search(pi, &opts).unwrap().survivors
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn top_n_data_keeps_the_true_ordering(
        (pref, search) in (2usize..=5).prop_flat_map(|n| (permutation(n), permutation(n))),
        d_t in 2usize..=6,
    ) {
        let sets = SetIndex::full(pref.len()).unwrap();
        let truth = PreferenceOrdering::new(pref).unwrap();
        let rule = gen_topn(&sets, d_t, &search).unwrap();
        let transform = build_choice_transform(&sets, &OrderingSet::single(truth.clone())).unwrap();
        let pi = predict_choices(&rule, &transform, &PreferenceDistribution::uniform(1)).unwrap();
        prop_assert!(plain_survivors(&pi).contains(&truth));
    }

    #[test]
    fn mm_data_keeps_the_true_ordering(
        pref in permutation(4),
        base in proptest::collection::vec(0.05f64..0.9, 3),
        growth in proptest::collection::vec(0.0f64..0.5, 3),
    ) {
        let menu = Menu::new(["a", "b", "c", "o"]).unwrap().with_outside(3).unwrap();
        let sets = SetIndex::new(&menu, true).unwrap();
        let mut rank: Vec<usize> = pref.into_iter().filter(|&i| i != 3).collect();
        rank.push(3);
        let truth = PreferenceOrdering::new(rank).unwrap();
        let gamma: Vec<Vec<f64>> = (0..4)
            .map(|t| {
                let mut row: Vec<f64> = base
                    .iter()
                    .zip(&growth)
                    .map(|(b, g)| 1.0 - (1.0 - b) * (1.0 - g).powi(t))
                    .collect();
                row.push(1.0);
                row
            })
            .collect();
        let rule = gen_mm(&sets, &GammaSchedule::homogeneous(gamma).unwrap()).unwrap();
        let transform = build_choice_transform(&sets, &OrderingSet::single(truth.clone())).unwrap();
        let pi = predict_choices(&rule, &transform, &PreferenceDistribution::uniform(1)).unwrap();
        prop_assert!(plain_survivors(&pi).contains(&truth));
    }
}

#[test]
fn satisficing_data_keeps_the_utility_ordering() {
    let model = SatisficingModel::new(
        vec![0.5, 3.0, 1.5],
        vec![
            ThresholdDist::Normal { mean: 0.0, sd: 1.0 },
            ThresholdDist::Normal { mean: 1.0, sd: 1.0 },
            ThresholdDist::Normal { mean: 2.0, sd: 1.0 },
        ],
        SearchDistribution::uniform(3).unwrap(),
    )
    .unwrap();
    let sets = SetIndex::full(3).unwrap();
    let rule = satisficing_exact_rule(&sets, &model).unwrap();
    let truth = model.preference();
    assert_eq!(truth.rank(), &[1, 2, 0]);
    let transform = build_choice_transform(&sets, &OrderingSet::single(truth.clone())).unwrap();
    let pi = predict_choices(&rule, &transform, &PreferenceDistribution::uniform(1)).unwrap();
    assert!(plain_survivors(&pi).contains(&truth));
}

#[test]
fn true_rule_in_the_pool_recovers_the_preference_shares() {
    let menu = Menu::new(["a", "b", "c", "o"])
        .unwrap()
        .with_outside(3)
        .unwrap();
    let sets = SetIndex::new(&menu, true).unwrap();
    let ords = OrderingSet::new(vec![
        PreferenceOrdering::new(vec![0, 1, 2, 3]).unwrap(),
        PreferenceOrdering::new(vec![2, 1, 0, 3]).unwrap(),
        PreferenceOrdering::new(vec![1, 0, 2, 3]).unwrap(),
    ])
    .unwrap();
    let transform = build_choice_transform(&sets, &ords).unwrap();
    let p = PreferenceDistribution::new(vec![0.5, 0.3, 0.2]).unwrap();
    let truth = sample_attention_rule(&sets, 3, &SamplerConfig::new(5, 77))
        .unwrap()
        .rule;
    let pi = predict_choices(&truth, &transform, &p).unwrap();
    let mut pool: Vec<_> = (0..50)
        .map(|k| {
            sample_attention_rule(&sets, 3, &SamplerConfig::new(5, k))
                .unwrap()
                .rule
        })
        .collect();
    pool.push(truth);
    let fit = estimate_from_rules(&pi, &transform, &pool, &QpOptions::default()).unwrap();
    assert_eq!(fit.best_index, 50);
    assert!(fit.best_distance < 1e-12);
    for (a, b) in fit.best_p.as_slice().iter().zip(p.as_slice()) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}

#[test]
fn bundled_lottery_files_match_the_built_in_counts() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data");
    let (items, pi) = io::read_pi_csv(File::open(root.join("lottery_pi.csv")).unwrap()).unwrap();
    assert_eq!(items, lottery_experiment::LABELS);
    let built_in = lottery_experiment::choice_data();
    for (a, b) in pi
        .rows()
        .iter()
        .flatten()
        .zip(built_in.rows().iter().flatten())
    {
        assert!((a - b).abs() < 1e-12);
    }
    let counts = io::read_counts_csv(File::open(root.join("lottery_counts.csv")).unwrap()).unwrap();
    let n: Vec<u64> = counts.iter().map(|c| c.1).collect();
    assert_eq!(n, built_in.period_counts().unwrap());
}
