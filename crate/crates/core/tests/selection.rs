use std::collections::BTreeMap;

use proptest::prelude::*;
use stablemil::base::BagClassifier;
use stablemil::bench::{biased_split, generate_population, ShiftConfig};
use stablemil::mil::oracle_label;
use stablemil::select::{
    brute_force_effect, candidate_pool, learn_stable_instances, learn_stable_instances_with, null_scores, quantile,
    score_instance, select_threshold, split_negatives, SelectionOptions, StablePool, ThresholdRule,
};
use stablemil::{Bag, Instance, InstanceRole, MilDataset};

const PALETTE: [InstanceRole; 3] = [InstanceRole::Causal, InstanceRole::Noisy, InstanceRole::Negative];

fn palette_point(i: usize) -> Instance {
    Instance::with_truth(vec![i as f64, (i * i) as f64], PALETTE[i % 3])
}

/// Population of up to 12 bags built from 6 palette points with fixed roles.
fn population() -> impl Strategy<Value = Vec<Bag>> {
    prop::collection::vec(prop::collection::vec(0usize..6, 1..5), 1..=12).prop_map(|bags| {
        bags.into_iter()
            .enumerate()
            .map(|(b, members)| {
                let instances: Vec<Instance> = members.into_iter().map(palette_point).collect();
                let label = stablemil::mil::oracle_label_of(instances.iter().map(|i| i.truth)).unwrap();
                Bag::new(format!("b{b}"), instances, label).unwrap()
            })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn effect_matches_enumeration_and_decomposition(pop in population(), which in 0usize..6) {
        let x = palette_point(which);
        let eff = brute_force_effect(&x, &pop).unwrap();
        let n = pop.len() as f64;
        let (mut treated, mut control) = (0.0, 0.0);
        let (mut neg, mut pos, mut neg_treated, mut pos_only_x) = (0.0, 0.0, 0.0, 0.0);
        for bag in &pop {
            let y = oracle_label(bag).unwrap() as f64;
            let t = oracle_label(&bag.appended("t", x.clone()).unwrap()).unwrap() as f64;
            let kept: Vec<Instance> = bag.instances().iter().filter(|i| i.features != x.features).cloned().collect();
            let c = if kept.is_empty() { 0.0 } else { oracle_label(&Bag::new("c", kept, 0).unwrap()).unwrap() as f64 };
            treated += t;
            control += c;
            if y == 0.0 {
                neg += 1.0;
                neg_treated += t;
            } else {
                pos += 1.0;
                if c == 0.0 {
                    pos_only_x += 1.0;
                }
            }
        }
        let tau = treated / n - control / n;
        prop_assert!((eff.tau - tau).abs() <= 1e-12);
        let e_treated = if neg > 0.0 { neg_treated / neg } else { 0.0 };
        let p = if pos > 0.0 { pos_only_x / pos } else { 0.0 };
        let rhs = (neg / n) * e_treated + p * (pos / n);
        prop_assert!((tau - rhs).abs() <= 1e-12, "tau {} rhs {}", tau, rhs);
        prop_assert!(eff.identity_gap() <= 1e-12);
        if x.truth != InstanceRole::Causal {
            prop_assert_eq!(eff.tau, 0.0);
        }
    }

    #[test]
    fn quantile_matches_reference(values in prop::collection::vec(0u32..40, 1..30), q in 0.0..=1.0f64) {
        let v: Vec<f64> = values.iter().map(|&x| x as f64 / 40.0).collect();
        let mut s = v.clone();
        s.sort_by(f64::total_cmp);
        let h = (s.len() - 1) as f64 * q;
        let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
        let expected = s[lo] + (h - lo as f64) * (s[hi] - s[lo]);
        prop_assert!((quantile(&v, q).unwrap() - expected).abs() < 1e-15);
    }
}

fn small_split(seed: u64) -> (MilDataset, MilDataset) {
    let cfg = ShiftConfig { bags_total: 60, instances_per_bag: 6, seed, ..ShiftConfig::setting1() };
    let split = biased_split(&generate_population(&cfg).unwrap(), 0.8, seed).unwrap();
    (split.train, split.test)
}

#[test]
fn oracle_scores_are_exactly_zero_or_one() {
    let (train, _) = small_split(3);
    let negatives: Vec<Bag> = train.negatives().cloned().collect();
    for bag in train.positives() {
        for x in bag.instances() {
            let s = score_instance(x, &negatives, &BagClassifier::Oracle).unwrap();
            assert_eq!(s, if x.truth == InstanceRole::Causal { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn stub_classifier_score_is_hit_fraction() {
    let negatives: Vec<Bag> =
        (0..8).map(|i| Bag::new(format!("n{i}"), vec![Instance::new(vec![i as f64])], 0).unwrap()).collect();
    let table: BTreeMap<String, u8> = (0..8).map(|i| (format!("n{i}+x"), u8::from(i < 3))).collect();
    let s = score_instance(&Instance::new(vec![0.5]), &negatives, &BagClassifier::Stub { table }).unwrap();
    assert_eq!(s, 0.375);
}

#[test]
fn threshold_split_partitions_negatives() {
    let negatives: Vec<Bag> =
        (0..7).map(|i| Bag::new(format!("n{i}"), vec![Instance::new(vec![i as f64])], 0).unwrap()).collect();
    let (a, b) = split_negatives(&negatives, 11);
    assert_eq!((a.len(), b.len()), (3, 4));
    let mut ids: Vec<&str> = a.iter().chain(&b).map(|bag| bag.id()).collect();
    ids.sort_unstable();
    assert_eq!(ids, vec!["n0", "n1", "n2", "n3", "n4", "n5", "n6"]);
    let (a2, _) = split_negatives(&negatives, 11);
    assert_eq!(a.iter().map(|b| b.id()).collect::<Vec<_>>(), a2.iter().map(|b| b.id()).collect::<Vec<_>>());
}

#[test]
fn oracle_threshold_on_purely_negative_concepts_is_zero() {
    let (train, _) = small_split(5);
    let negatives: Vec<Bag> = train.negatives().cloned().collect();
    assert!(null_scores(&negatives, &BagClassifier::Oracle, 2).unwrap().iter().all(|s| *s == 0.0));
    assert_eq!(select_threshold(&negatives, &BagClassifier::Oracle, 2).unwrap(), 0.0);
}

fn check_pool(pool: &StablePool, train: &MilDataset, tau: f64, rule: ThresholdRule) {
    assert_eq!(pool.all_scores.len(), candidate_pool(train).len());
    if !pool.fallback {
        let expected: Vec<_> = pool.all_scores.iter().filter(|c| rule.admits(c.score, tau)).collect();
        assert_eq!(pool.members.iter().collect::<Vec<_>>(), expected);
    }
}

#[test]
fn pool_membership_follows_rule() {
    let (train, _) = small_split(8);
    let oracle = BagClassifier::Oracle;
    let at_half = learn_stable_instances(&train, &oracle, 0.5).unwrap();
    check_pool(&at_half, &train, 0.5, ThresholdRule::AtLeast);
    assert!(at_half.members.iter().all(|m| m.instance.truth == InstanceRole::Causal));
    let causal = candidate_pool(&train).iter().filter(|c| c.0.truth == InstanceRole::Causal).count();
    assert_eq!(at_half.len(), causal);

    let inclusive = learn_stable_instances(&train, &oracle, 0.0).unwrap();
    assert_eq!(inclusive.len(), inclusive.all_scores.len());
    let strict = learn_stable_instances_with(
        &train,
        &oracle,
        0.0,
        &SelectionOptions { rule: ThresholdRule::Above, ..SelectionOptions::default() },
    )
    .unwrap();
    check_pool(&strict, &train, 0.0, ThresholdRule::Above);
    assert_eq!(strict.len(), causal);

    let fallback = learn_stable_instances(&train, &oracle, 1.5).unwrap();
    assert!(fallback.fallback);
    assert_eq!(fallback.len(), (0.05 * fallback.all_scores.len() as f64).ceil() as usize);
}

#[test]
fn full_subsample_equals_default_and_json_round_trips() {
    let (train, _) = small_split(9);
    let oracle = BagClassifier::Oracle;
    let plain = learn_stable_instances(&train, &oracle, 0.5).unwrap();
    let opts = SelectionOptions { subsample_negatives: Some(train.num_negative()), ..SelectionOptions::default() };
    assert_eq!(learn_stable_instances_with(&train, &oracle, 0.5, &opts).unwrap(), plain);
    assert_eq!(StablePool::from_json(&plain.to_json()).unwrap(), plain);
    assert_eq!(learn_stable_instances(&train, &oracle, 0.5).unwrap().to_json(), plain.to_json());
}
