#![allow(dead_code)]

use scbg_core::courtesy::{label_dataset, LabeledSample, RewardSpec};
use scbg_core::predictor::{train_predictor, PredictorConfig, PredictorModel};
use scbg_core::synth::{synth_scenarios, SynthConfig};
use scbg_core::Scenario;

/// Short horizons keep every test fast.
pub fn small_synth() -> SynthConfig {
    SynthConfig { history_len: 6, future_len: 8, ..SynthConfig::default() }
}

pub fn tiny_predictor_config(seed: u64) -> PredictorConfig {
    PredictorConfig {
        components: 2,
        hidden: 16,
        embedding: 8,
        future_embedding: 4,
        steps: 150,
        batch_size: 8,
        seed,
        log_every: 0,
        ..PredictorConfig::default()
    }
}

pub struct World {
    pub scenarios: Vec<Scenario>,
    pub predictor: PredictorModel,
    pub labels: Vec<LabeledSample>,
}

/// Scenarios, a briefly trained predictor and `m` augmented labels each.
pub fn world(seed: u64, n: usize, m: usize) -> World {
    let scenarios = synth_scenarios(&small_synth(), seed, n).unwrap();
    let predictor = train_predictor(&scenarios, &[], &tiny_predictor_config(seed)).unwrap().model;
    let labels = label_dataset(&predictor, &scenarios, RewardSpec::AverageSpeed, m, seed).unwrap();
    World { scenarios, predictor, labels }
}
