//! Training contracts: what each stage may and may not modify, and
//! reproducibility under a fixed seed.

mod common;

use scbg_core::courtesy::RewardSpec;
use scbg_core::predictor::{mean_marginal_nll, train_predictor};
use scbg_core::range::{coverage, train_range, RangeConfig};
use scbg_core::scbg::{group_labels, train_scbg, ScbgTrainConfig};
use scbg_core::synth::synth_scenarios;

fn scbg_config() -> ScbgTrainConfig {
    ScbgTrainConfig { hidden: 16, batch_size: 8, steps: 120, log_every: 0, seed: 4, ..ScbgTrainConfig::default() }
}

#[test]
fn predictor_training_reduces_validation_nll_and_is_deterministic() {
    let synth = common::small_synth();
    let train = synth_scenarios(&synth, 21, 60).unwrap();
    let val = synth_scenarios(&synth, 22, 20).unwrap();
    let cfg = common::tiny_predictor_config(21);
    let a = train_predictor(&train, &val, &cfg).unwrap();
    assert!(a.final_validation_nll < a.initial_validation_nll, "{} -> {}", a.initial_validation_nll, a.final_validation_nll);
    assert_eq!(a.final_validation_nll, mean_marginal_nll(&a.model, &val).unwrap());
    let b = train_predictor(&train, &val, &cfg).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.log, b.log);
}

#[test]
fn generator_training_leaves_the_predictor_untouched() {
    let w = common::world(31, 40, 4);
    let groups = group_labels(&w.scenarios, &w.labels).unwrap();
    let (train, val) = groups.split_at(30);
    let before = w.predictor.clone();
    let cfg = scbg_config();
    let a = train_scbg(train, val, &w.predictor, &cfg).unwrap();
    assert_eq!(w.predictor, before);
    assert_eq!(a.model.encoder, before.scene_encoder);
    assert!(a.final_validation_loss < a.initial_validation_loss);
    assert!(a.log.iter().all(|r| r.court.is_some()));

    let b = train_scbg(train, val, &w.predictor, &cfg).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.log, b.log);

    let plain = train_scbg(train, val, &w.predictor, &ScbgTrainConfig { beta: 0.0, ..cfg }).unwrap();
    assert!(plain.log.iter().all(|r| r.court.is_none() && r.total == r.traj));
}

#[test]
fn range_training_keeps_the_encoder_frozen() {
    let w = common::world(41, 40, 6);
    let groups = group_labels(&w.scenarios, &w.labels).unwrap();
    let cfg = RangeConfig { steps: 400, lr: 3e-3, log_every: 0, ..RangeConfig::default() };
    let t = train_range(&groups, w.predictor.layout, &w.predictor.scene_encoder, &cfg).unwrap();
    assert_eq!(t.model.encoder, w.predictor.scene_encoder);
    assert!(t.final_loss < t.initial_loss);
    let c = coverage(&t.model, &groups).unwrap();
    assert_eq!(c.count, w.labels.len());
    assert!(c.below_lo <= c.below_hi);
    let again = train_range(&groups, w.predictor.layout, &w.predictor.scene_encoder, &cfg).unwrap();
    assert_eq!(t.model, again.model);
}

#[test]
fn labeling_is_reproducible_and_independent_of_batching() {
    use scbg_core::courtesy::{label_dataset, label_scenario};
    use scbg_core::rng;
    let w = common::world(51, 10, 3);
    let again = label_dataset(&w.predictor, &w.scenarios, RewardSpec::AverageSpeed, 3, 51).unwrap();
    assert_eq!(w.labels, again);
    let single = label_scenario(&w.predictor, &w.scenarios[7], RewardSpec::AverageSpeed, 3, rng::derive(51, 7)).unwrap();
    assert_eq!(&w.labels[7 * 4..8 * 4], single.as_slice());
}
