//! Invariants of the data generator, predictor, courtesy operator, losses and
//! samplers, checked on generated inputs.

mod common;

use proptest::prelude::*;
use scbg_core::courtesy::{courtesy_value, courtesy_values, expected_reward, ExpectationMode, RewardSpec};
use scbg_core::features::FeatureLayout;
use scbg_core::nn::{self, Graph};
use scbg_core::predictor::{PredictorConfig, PredictorModel, VARIANCE_FLOOR};
use scbg_core::range::{quantile_to_courtesy, CourtesyRange};
use scbg_core::rng;
use scbg_core::scbg::{huber, total_loss, traj_loss, StratifiedSampler};
use scbg_core::synth::{synth_scenarios, SynthConfig};
use scbg_core::types::distance;
use scbg_core::{Agent, Scenario, Trajectory};

fn untrained(seed: u64, components: usize) -> PredictorModel {
    let cfg = PredictorConfig { components, ..common::tiny_predictor_config(seed) };
    let synth = common::small_synth();
    let layout = FeatureLayout::new(synth.history_len, synth.future_len);
    PredictorModel::new(layout, synth.dt, &cfg, &mut rng::seeded(seed))
}

fn scene(seed: u64) -> Scenario {
    synth_scenarios(&common::small_synth(), seed, 2).unwrap().remove((seed % 2) as usize)
}

fn jitter(t: &Trajectory, seed: u64, scale: f64) -> Trajectory {
    let mut r = rng::seeded(seed);
    let flat: Vec<f64> = t.to_flat().iter().map(|v| v + scale * rng::normal(&mut r)).collect();
    Trajectory::from_flat(&flat, t.dt()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn synthesis_is_deterministic(seed in any::<u64>(), n in 1usize..5) {
        let cfg = common::small_synth();
        prop_assert_eq!(synth_scenarios(&cfg, seed, n).unwrap(), synth_scenarios(&cfg, seed, n).unwrap());
    }

    #[test]
    fn trajectories_are_contiguous(seed in any::<u64>(), n in 1usize..5) {
        let cfg = SynthConfig::default();
        for s in synth_scenarios(&cfg, seed, n).unwrap() {
            for agent in [Agent::A, Agent::B] {
                let pts: Vec<_> = s.observation.history(agent).points().iter().chain(s.future(agent).points()).copied().collect();
                for (k, w) in pts.windows(2).enumerate() {
                    let step = distance(w[0], w[1]);
                    prop_assert!(step <= cfg.v_max * cfg.dt, "{} agent {:?} step {}: {}", s.id, agent, k, step);
                }
            }
        }
    }

    #[test]
    fn mixtures_are_valid(seed in any::<u64>(), k in 1usize..4) {
        let model = untrained(seed, k);
        let s = scene(seed);
        for d in [
            model.predict_marginal(&s.observation, Agent::A).unwrap(),
            model.predict_marginal(&s.observation, Agent::B).unwrap(),
            model.predict_conditional(&s.observation, &s.future_b).unwrap(),
        ] {
            let total: f64 = d.weights().iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            prop_assert!(d.weights().iter().all(|&w| w >= 0.0));
            for c in 0..k {
                prop_assert!(d.variance(c).iter().all(|&v| v >= VARIANCE_FLOOR && v.is_finite()));
                prop_assert!(d.mean(c).iter().all(|m| m.is_finite()));
            }
        }
    }

    #[test]
    fn ablated_future_encoder_gives_marginal_and_zero_courtesy(seed in any::<u64>(), noise in 0.0f64..5.0) {
        let mut model = untrained(seed, 2);
        model.ablate_future_encoder();
        let s = scene(seed);
        let y_b = jitter(&s.future_b, seed, noise);
        let cond = model.predict_conditional(&s.observation, &y_b).unwrap();
        let marg = model.predict_marginal(&s.observation, Agent::A).unwrap();
        prop_assert_eq!(&cond, &marg);
        prop_assert_eq!(courtesy_value(&model, &s.observation, &y_b, RewardSpec::AverageSpeed).unwrap(), 0.0);
    }

    #[test]
    fn courtesy_is_the_difference_of_expectations(seed in any::<u64>(), noise in 0.0f64..3.0) {
        let model = untrained(seed, 3);
        let s = scene(seed);
        let y_b = jitter(&s.future_b, seed ^ 1, noise);
        let reward = RewardSpec::AverageSpeed;
        let cond = expected_reward(&model.predict_conditional(&s.observation, &y_b).unwrap(), reward, ExpectationMode::Means).unwrap();
        let marg = expected_reward(&model.predict_marginal(&s.observation, Agent::A).unwrap(), reward, ExpectationMode::Means).unwrap();
        let psi = courtesy_value(&model, &s.observation, &y_b, reward).unwrap();
        prop_assert!((psi - (cond - marg)).abs() <= 1e-12 * (1.0 + cond.abs()));
        // Swapping the two distributions negates the value.
        prop_assert!((psi + (marg - cond)).abs() <= 1e-12 * (1.0 + cond.abs()));
        // Batched evaluation agrees with the single query.
        let batched = courtesy_values(&model, &s.observation, &[s.future_b.clone(), y_b], reward).unwrap();
        prop_assert!((batched[1] - psi).abs() <= 1e-12 * (1.0 + psi.abs()));
    }

    #[test]
    fn huber_is_nonnegative_and_symmetric(e in -50.0f64..50.0, delta in 0.01f64..5.0) {
        let h = nn::huber(e, delta);
        prop_assert!(h >= 0.0);
        prop_assert_eq!(h, nn::huber(-e, delta));
        if e.abs() <= delta {
            prop_assert!((h - 0.5 * e * e).abs() <= 1e-12);
        } else {
            prop_assert!((h - delta * (e.abs() - 0.5 * delta)).abs() <= 1e-9);
        }
    }

    #[test]
    fn pinball_is_nonnegative(e in -50.0f64..50.0, tau in 0.001f64..0.999) {
        let p = nn::pinball(e, tau);
        prop_assert!(p >= 0.0);
        prop_assert_eq!(p == 0.0, e == 0.0);
    }

    #[test]
    fn quantile_map_is_monotone(a in -10.0f64..10.0, b in -10.0f64..10.0, q1 in 0.0f64..=1.0, q2 in 0.0f64..=1.0) {
        let r = CourtesyRange::from_outputs(a, b);
        prop_assert!(r.psi_lo <= r.psi_hi);
        let (lo, hi) = if q1 <= q2 { (q1, q2) } else { (q2, q1) };
        prop_assert!(quantile_to_courtesy(&r, lo).unwrap() <= quantile_to_courtesy(&r, hi).unwrap());
        prop_assert!((quantile_to_courtesy(&r, 0.1).unwrap() - r.psi_lo).abs() <= 1e-12);
        prop_assert!((quantile_to_courtesy(&r, 0.9).unwrap() - r.psi_hi).abs() <= 1e-12 * (1.0 + r.psi_hi.abs()));
    }

    #[test]
    fn sampler_draws_half_from_each_stratum(
        psi0 in prop::collection::vec(-6.0f64..6.0, 2..40),
        threshold in 0.5f64..4.0,
        size in 1usize..33,
        seed in any::<u64>(),
    ) {
        let sampler = StratifiedSampler::new(&psi0, threshold);
        prop_assume!(sampler.is_stratified());
        let mut r = rng::seeded(seed);
        for _ in 0..100 {
            let batch = sampler.batch(&mut r, size);
            prop_assert_eq!(batch.len(), size);
            let high = batch.iter().filter(|&&i| psi0[i].abs() >= threshold).count();
            prop_assert_eq!(high, size.div_ceil(2));
        }
    }
}

mod losses {
    use super::*;
    use scbg_core::courtesy::{LabeledSample, SampleSource};

    fn sample(t: Trajectory, m: usize, psi: f64) -> LabeledSample {
        let source = if m == 0 { SampleSource::GroundTruth } else { SampleSource::Augmented };
        LabeledSample { scenario_id: "p".into(), m, source, psi, trajectory: t }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn loss_decomposition(
            seed in any::<u64>(),
            alpha in 0.0f64..2.0,
            beta in 0.0f64..5.0,
            court in 0.0f64..10.0,
            m in 0usize..4,
        ) {
            let s = scene(seed);
            let samples: Vec<_> = (0..=m).map(|i| sample(jitter(&s.future_b, seed + i as u64, 1.0), i, 0.0)).collect();
            let preds: Vec<_> = (0..=m).map(|i| jitter(&s.future_b, seed ^ 0xff ^ i as u64, 2.0).to_flat()).collect();

            let mut g = Graph::new();
            let pv: Vec<_> = preds.iter().map(|p| g.constant(p.clone())).collect();
            let lt = traj_loss(&mut g, &samples, &pv, alpha, 1.0).unwrap();
            let c = g.scalar_constant(court);
            let total = total_loss(&mut g, lt, c, beta).unwrap();
            let zero = total_loss(&mut g, lt, c, 0.0).unwrap();
            prop_assert_eq!(g.scalar(zero), g.scalar(lt));
            prop_assert!((g.scalar(total) - (g.scalar(lt) + beta * court)).abs() <= 1e-12 * (1.0 + g.scalar(total)));

            // With alpha = 0 only the ground-truth term is left.
            let l0 = traj_loss(&mut g, &samples, &pv, 0.0, 1.0).unwrap();
            let y0 = g.constant(samples[0].trajectory.to_flat());
            let h0 = huber(&mut g, pv[0], y0, 1.0).unwrap();
            prop_assert_eq!(g.scalar(l0), g.scalar(h0));

            // Independent sum of the per-trajectory Huber means.
            let mean_huber = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| nn::huber(x - y, 1.0)).sum::<f64>() / a.len() as f64;
            let expect: f64 = samples
                .iter()
                .zip(&preds)
                .enumerate()
                .map(|(i, (s, p))| (if i == 0 { 1.0 } else { alpha }) * mean_huber(p, &s.trajectory.to_flat()))
                .sum();
            prop_assert!((g.scalar(lt) - expect).abs() <= 1e-12 * (1.0 + expect));
        }
    }
}
