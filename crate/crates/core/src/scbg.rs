//! The courtesy-conditioned generator `g_theta(x, psi)` and its training.
//!
//! The generator reuses the predictor's scene encoder (frozen) on B's
//! features and decodes a single trajectory from the embedding plus the
//! commanded courtesy. Training matches labeled trajectories (Huber) and,
//! optionally, the courtesy of the generated trajectory as judged by the
//! frozen predictor.

use alloc::vec;
use alloc::vec::Vec;
use core::borrow::Borrow;

use rand::Rng as _;

use crate::courtesy::{CourtesyOperator, LabeledSample, RewardSpec};
use crate::error::{bail, Result};
use crate::features::{scene_features, FeatureLayout, Frame};
use crate::nn::{Activation, Adam, BoundMlp, Graph, Mlp, Var};
use crate::predictor::{cosine_lr, PredictorModel, MEAN_SCALE};
use crate::rng::{self, Rng};
use crate::types::{Agent, Observation, Scenario, Trajectory};

/// Courtesy values are divided by this before entering the decoder (m/s).
pub const PSI_SCALE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ScbgTrainConfig {
    /// Weight of the augmented-trajectory terms.
    pub alpha: f64,
    /// Weight of the courtesy loss.
    pub beta: f64,
    /// Huber threshold (m).
    pub huber_delta: f64,
    /// Augmented futures used per scenario.
    pub augmentations: usize,
    /// `|psi_0|` splitting the high- and low-courtesy strata (m/s).
    pub split_threshold: f64,
    pub hidden: usize,
    pub batch_size: usize,
    pub steps: usize,
    pub lr: f64,
    pub min_lr_fraction: f64,
    pub seed: u64,
    pub reward: RewardSpec,
    pub log_every: usize,
}

impl Default for ScbgTrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.1,
            huber_delta: 1.0,
            augmentations: 4,
            split_threshold: 2.0,
            hidden: 128,
            batch_size: 16,
            steps: 3000,
            lr: 1e-3,
            min_lr_fraction: 0.1,
            seed: 0,
            reward: RewardSpec::AverageSpeed,
            log_every: 100,
        }
    }
}

impl ScbgTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) || !(self.beta >= 0.0) {
            bail!(Validation, "alpha and beta must be non-negative");
        }
        if !(self.huber_delta > 0.0) {
            bail!(Validation, "huber_delta must be positive");
        }
        if !(self.split_threshold >= 0.0) {
            bail!(Validation, "split_threshold must be non-negative");
        }
        if self.hidden == 0 || self.batch_size == 0 {
            bail!(Validation, "hidden width and batch_size must be positive");
        }
        if !(self.lr > 0.0) {
            bail!(Validation, "lr must be positive");
        }
        if !(0.0..=1.0).contains(&self.min_lr_fraction) {
            bail!(Validation, "min_lr_fraction must lie in [0, 1]");
        }
        Ok(())
    }
}

/// `g_theta(x, psi)`: one trajectory of B per commanded courtesy.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorModel {
    pub layout: FeatureLayout,
    pub dt: f64,
    /// Scene encoder copied from the predictor; never updated.
    pub encoder: Mlp,
    /// `[embedding, psi] -> 2T` offsets from constant velocity.
    pub decoder: Mlp,
}

impl GeneratorModel {
    pub fn from_predictor(predictor: &PredictorModel, hidden: usize, rng: &mut Rng) -> Self {
        let e = predictor.embedding_dim();
        let t2 = predictor.layout.future_dim();
        Self {
            layout: predictor.layout,
            dt: predictor.dt,
            encoder: predictor.scene_encoder.clone(),
            decoder: Mlp::new(&[e + 1, hidden, hidden, t2], Activation::Identity, rng),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder.input_dim() != self.layout.scene_dim() {
            bail!(Shape, "generator encoder expects {} features, layout has {}", self.encoder.input_dim(), self.layout.scene_dim());
        }
        if self.decoder.input_dim() != self.encoder.output_dim() + 1 {
            bail!(
                Shape,
                "generator decoder expects {} inputs, encoder emits {} plus psi",
                self.decoder.input_dim(),
                self.encoder.output_dim()
            );
        }
        if self.decoder.output_dim() != self.layout.future_dim() {
            bail!(Shape, "generator decoder emits {} values, horizon needs {}", self.decoder.output_dim(), self.layout.future_dim());
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.layout.future_len
    }

    /// Frozen embedding of B's scene features and B's frame.
    pub fn embed(&self, x: &Observation) -> Result<(Vec<f64>, Frame)> {
        let f = scene_features(&self.layout, x, Agent::B)?;
        Ok((self.encoder.eval(&f.values)?, f.frame))
    }

    /// Flattened generated trajectory as a node.
    pub fn decode(&self, g: &mut Graph, decoder: &BoundMlp, embedding: Var, frame: &Frame, psi: f64) -> Result<Var> {
        let p = g.scalar_constant(psi / PSI_SCALE);
        let input = g.concat(&[embedding, p]);
        let out = decoder.forward(g, input)?;
        let off = g.scale(out, MEAN_SCALE);
        let baseline = g.constant(frame.constant_velocity(self.horizon(), self.dt));
        g.add(baseline, off)
    }

    pub fn generate(&self, x: &Observation, psi: f64) -> Result<Trajectory> {
        Ok(self.generate_many(x, &[psi])?.remove(0))
    }

    /// One trajectory per entry of `psis`, sharing a single encoder pass.
    pub fn generate_many(&self, x: &Observation, psis: &[f64]) -> Result<Vec<Trajectory>> {
        let (emb, frame) = self.embed(x)?;
        let mut g = Graph::new();
        let decoder = self.decoder.bind(&mut g, false);
        let emb = g.constant(emb);
        psis.iter()
            .map(|&psi| {
                let y = self.decode(&mut g, &decoder, emb, &frame, psi)?;
                Trajectory::from_flat(g.value(y), self.dt)
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.decoder.param_count()
    }
}

/// Mean Huber penalty between two flattened trajectories.
pub fn huber(g: &mut Graph, a: Var, b: Var, delta: f64) -> Result<Var> {
    if g.size(a) != g.size(b) {
        bail!(Shape, "Huber operands have {} and {} values", g.size(a), g.size(b));
    }
    let r = g.sub(a, b)?;
    let h = g.huber(r, delta);
    Ok(g.mean(h))
}

/// `l(y_0, yhat_0) + alpha * sum_m l(y_m, yhat_m)`, where `samples[0]` is the
/// ground truth and `preds[i]` was generated for `samples[i]`.
pub fn traj_loss<S: Borrow<LabeledSample>>(g: &mut Graph, samples: &[S], preds: &[Var], alpha: f64, delta: f64) -> Result<Var> {
    if samples.is_empty() || samples.len() != preds.len() {
        bail!(Contract, "{} labeled samples but {} generated trajectories", samples.len(), preds.len());
    }
    let mut terms = Vec::with_capacity(samples.len());
    for (i, (s, &p)) in samples.iter().zip(preds).enumerate() {
        let y = g.constant(s.borrow().trajectory.to_flat());
        let l = huber(g, p, y, delta)?;
        terms.push(if i == 0 { l } else { g.scale(l, alpha) });
    }
    let stacked = g.concat(&terms);
    Ok(g.sum(stacked))
}

/// Per-scene quantities of the courtesy operator that do not depend on the
/// candidate future: A's scene embedding, A's frame and the marginal term.
#[derive(Debug, Clone, Copy)]
pub struct CourtesyContext {
    pub scene: Var,
    pub frame: Frame,
    pub marginal: Var,
}

impl CourtesyContext {
    pub fn new(g: &mut Graph, op: &CourtesyOperator<'_>, x: &Observation) -> Result<Self> {
        let (scene, frame) = op.model.embed(g, &op.bound, x, Agent::A)?;
        let marginal = op.marginal_term(g, x)?;
        Ok(Self { scene, frame, marginal })
    }

    /// From values computed outside the graph.
    pub fn from_values(g: &mut Graph, scene: Vec<f64>, frame: Frame, marginal: f64) -> Self {
        Self { scene: g.constant(scene), frame, marginal: g.scalar_constant(marginal) }
    }
}

/// `sum_m (psi_m - J(x, yhat_m))^2`; the labels are constants and gradients
/// reach the generated trajectories through the frozen predictor.
pub fn courtesy_loss<S: Borrow<LabeledSample>>(
    g: &mut Graph,
    op: &CourtesyOperator<'_>,
    ctx: &CourtesyContext,
    samples: &[S],
    preds: &[Var],
) -> Result<Var> {
    if samples.len() != preds.len() {
        bail!(Contract, "{} labeled samples but {} generated trajectories", samples.len(), preds.len());
    }
    let mut terms = Vec::with_capacity(samples.len());
    for (s, &p) in samples.iter().zip(preds) {
        let cond = op.conditional_term_from(g, ctx.scene, &ctx.frame, p)?;
        let j = g.sub(cond, ctx.marginal)?;
        let err = g.affine(j, -1.0, s.borrow().psi);
        terms.push(g.square(err));
    }
    if terms.is_empty() {
        return Ok(g.scalar_constant(0.0));
    }
    let stacked = g.concat(&terms);
    Ok(g.sum(stacked))
}

/// `L = L_traj + beta * L_court`.
pub fn total_loss(g: &mut Graph, traj: Var, court: Var, beta: f64) -> Result<Var> {
    let weighted = g.scale(court, beta);
    g.add(traj, weighted)
}

/// A scenario with its labeled futures of B, ordered by index.
#[derive(Debug, Clone)]
pub struct LabeledScenario<'a> {
    pub scenario: &'a Scenario,
    pub samples: Vec<&'a LabeledSample>,
}

impl LabeledScenario<'_> {
    /// Courtesy of B's ground-truth future.
    pub fn psi0(&self) -> f64 {
        self.samples[0].psi
    }

    /// The ground-truth sample followed by at most `m` augmented ones.
    pub fn first(&self, m: usize) -> &[&LabeledSample] {
        &self.samples[..self.samples.len().min(m + 1)]
    }
}

/// Pairs labels with scenarios by id. Every scenario needs a contiguous set
/// of indices `0..=M`; labels of unknown scenarios are rejected.
pub fn group_labels<'a>(scenarios: &'a [Scenario], labels: &'a [LabeledSample]) -> Result<Vec<LabeledScenario<'a>>> {
    let mut index: Vec<(&str, usize)> = scenarios.iter().enumerate().map(|(i, s)| (s.id.as_str(), i)).collect();
    index.sort_unstable();
    if let Some(w) = index.windows(2).find(|w| w[0].0 == w[1].0) {
        bail!(Validation, "duplicate scenario id {}", w[0].0);
    }
    let mut groups: Vec<Vec<&LabeledSample>> = vec![Vec::new(); scenarios.len()];
    for l in labels {
        match index.binary_search_by(|(id, _)| (*id).cmp(l.scenario_id.as_str())) {
            Ok(k) => groups[index[k].1].push(l),
            Err(_) => bail!(Validation, "label refers to unknown scenario {}", l.scenario_id),
        }
    }
    scenarios
        .iter()
        .zip(groups)
        .map(|(s, mut samples)| {
            samples.sort_by_key(|l| l.m);
            if samples.is_empty() {
                bail!(Validation, "scenario {} has no labels", s.id);
            }
            for (i, l) in samples.iter().enumerate() {
                if l.m != i {
                    bail!(Validation, "scenario {}: label indices are not 0..={}", s.id, samples.len() - 1);
                }
                l.validate(s.horizon())?;
            }
            Ok(LabeledScenario { scenario: s, samples })
        })
        .collect()
}

/// Draws balanced minibatches from the high- and low-courtesy strata.
#[derive(Debug, Clone, PartialEq)]
pub struct StratifiedSampler {
    pub high: Vec<usize>,
    pub low: Vec<usize>,
}

impl StratifiedSampler {
    /// Splits indices by `|psi_0| >= threshold`.
    pub fn new(psi0: &[f64], threshold: f64) -> Self {
        let (high, low) = (0..psi0.len()).partition(|&i| psi0[i].abs() >= threshold);
        Self { high, low }
    }

    pub fn is_stratified(&self) -> bool {
        !self.high.is_empty() && !self.low.is_empty()
    }

    /// `ceil(size/2)` draws from the high stratum then `floor(size/2)` from the
    /// low one, with replacement. Uniform over everything when a stratum is
    /// empty.
    pub fn batch(&self, rng: &mut Rng, size: usize) -> Vec<usize> {
        if !self.is_stratified() {
            let all = if self.high.is_empty() { &self.low } else { &self.high };
            if all.is_empty() {
                return Vec::new();
            }
            return (0..size).map(|_| all[rng.random_range(0..all.len())]).collect();
        }
        let hi = size.div_ceil(2);
        let mut out = Vec::with_capacity(size);
        out.extend((0..hi).map(|_| self.high[rng.random_range(0..self.high.len())]));
        out.extend((hi..size).map(|_| self.low[rng.random_range(0..self.low.len())]));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScbgLogRow {
    pub step: usize,
    pub traj: f64,
    /// `None` when the courtesy loss is switched off.
    pub court: Option<f64>,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct ScbgTraining {
    pub model: GeneratorModel,
    pub log: Vec<ScbgLogRow>,
    pub stratified: bool,
    pub initial_validation_loss: f64,
    pub final_validation_loss: f64,
}

/// Scene data that stays fixed while the decoder trains.
struct Prepared {
    embedding: Vec<f64>,
    frame: Frame,
    scene_a: Vec<f64>,
    frame_a: Frame,
    marginal: f64,
}

fn prepare(model: &GeneratorModel, predictor: &PredictorModel, reward: RewardSpec, x: &Observation) -> Result<Prepared> {
    let (embedding, frame) = model.embed(x)?;
    let mut g = Graph::new();
    let op = CourtesyOperator::new(&mut g, predictor, reward);
    let (scene, frame_a) = predictor.embed(&mut g, &op.bound, x, Agent::A)?;
    let marginal = op.marginal_term(&mut g, x)?;
    Ok(Prepared { embedding, frame, scene_a: g.value(scene).to_vec(), frame_a, marginal: g.scalar(marginal) })
}

struct StepLoss {
    total: Var,
    traj: f64,
    court: Option<f64>,
}

/// Mean loss over `items` on one graph.
fn batch_loss(
    g: &mut Graph,
    model: &GeneratorModel,
    decoder: &BoundMlp,
    op: Option<&CourtesyOperator<'_>>,
    items: &[(&LabeledScenario<'_>, &Prepared)],
    config: &ScbgTrainConfig,
) -> Result<StepLoss> {
    let mut totals = Vec::with_capacity(items.len());
    let (mut traj_sum, mut court_sum) = (0.0, 0.0);
    for (group, prep) in items {
        let samples = group.first(config.augmentations);
        let emb = g.constant(prep.embedding.clone());
        let preds: Vec<Var> = samples.iter().map(|s| model.decode(g, decoder, emb, &prep.frame, s.psi)).collect::<Result<_>>()?;
        let lt = traj_loss(g, samples, &preds, config.alpha, config.huber_delta)?;
        traj_sum += g.scalar(lt);
        let total = match op {
            Some(op) => {
                let ctx = CourtesyContext::from_values(g, prep.scene_a.clone(), prep.frame_a, prep.marginal);
                let lc = courtesy_loss(g, op, &ctx, samples, &preds)?;
                court_sum += g.scalar(lc);
                total_loss(g, lt, lc, config.beta)?
            }
            None => lt,
        };
        totals.push(total);
    }
    let n = items.len() as f64;
    let stacked = g.concat(&totals);
    let sum = g.sum(stacked);
    Ok(StepLoss { total: g.scale(sum, 1.0 / n), traj: traj_sum / n, court: op.map(|_| court_sum / n) })
}

fn mean_loss(
    model: &GeneratorModel,
    predictor: &PredictorModel,
    groups: &[LabeledScenario<'_>],
    prepared: &[Prepared],
    config: &ScbgTrainConfig,
) -> Result<f64> {
    let mut g = Graph::new();
    let decoder = model.decoder.bind(&mut g, false);
    let op = (config.beta > 0.0).then(|| CourtesyOperator::new(&mut g, predictor, config.reward));
    let items: Vec<_> = groups.iter().zip(prepared).collect();
    let loss = batch_loss(&mut g, model, &decoder, op.as_ref(), &items, config)?;
    Ok(g.scalar(loss.total))
}

/// Trains the decoder of a generator whose encoder is copied from
/// `predictor` and frozen. The predictor is only read.
pub fn train_scbg(
    train: &[LabeledScenario<'_>],
    validation: &[LabeledScenario<'_>],
    predictor: &PredictorModel,
    config: &ScbgTrainConfig,
) -> Result<ScbgTraining> {
    config.validate()?;
    predictor.validate()?;
    if train.is_empty() {
        bail!(Validation, "generator training set is empty");
    }
    let mut rng = rng::seeded(config.seed);
    let mut model = GeneratorModel::from_predictor(predictor, config.hidden, &mut rng);
    let prep = |groups: &[LabeledScenario<'_>]| -> Result<Vec<Prepared>> {
        groups.iter().map(|gr| prepare(&model, predictor, config.reward, &gr.scenario.observation)).collect()
    };
    let train_prep = prep(train)?;
    let (val_groups, val_prep) = if validation.is_empty() { (train, None) } else { (validation, Some(prep(validation)?)) };
    let val_prep = val_prep.as_ref().unwrap_or(&train_prep);

    let psi0: Vec<f64> = train.iter().map(|gr| gr.psi0()).collect();
    let sampler = StratifiedSampler::new(&psi0, config.split_threshold);
    let stratified = sampler.is_stratified();
    if !stratified {
        log::warn!(
            "courtesy strata are unbalanced ({} high, {} low at threshold {}); sampling uniformly",
            sampler.high.len(),
            sampler.low.len(),
            config.split_threshold
        );
    }

    let initial_validation_loss = mean_loss(&model, predictor, val_groups, val_prep, config)?;
    let mut opt = Adam::new(config.lr);
    let mut log = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        opt.lr = cosine_lr(config.lr, config.min_lr_fraction, step, config.steps);
        let batch = sampler.batch(&mut rng, config.batch_size);
        let items: Vec<_> = batch.iter().map(|&i| (&train[i], &train_prep[i])).collect();
        let mut g = Graph::new();
        let decoder = model.decoder.bind(&mut g, true);
        let op = (config.beta > 0.0).then(|| CourtesyOperator::new(&mut g, predictor, config.reward));
        let loss = batch_loss(&mut g, &model, &decoder, op.as_ref(), &items, config)?;
        let total = g.scalar(loss.total);
        if !total.is_finite() {
            bail!(Training, "generator loss became {total} at step {step}");
        }
        let grads = g.backward(loss.total)?;
        let grads = decoder.grads(&g, &grads);
        opt.step(model.decoder.tensors_mut("decoder"), &grads).map_err(|e| match e {
            crate::Error::Training(m) => crate::Error::Training(alloc::format!("generator step {step}: {m}")),
            other => other,
        })?;
        log.push(ScbgLogRow { step, traj: loss.traj, court: loss.court, total });
        if config.log_every > 0 && step % config.log_every == 0 {
            log::debug!("generator step {step}: traj {:.4} total {total:.4}", loss.traj);
        }
    }
    let final_validation_loss = mean_loss(&model, predictor, val_groups, val_prep, config)?;
    log::info!("generator validation loss {initial_validation_loss:.4} -> {final_validation_loss:.4}");
    Ok(ScbgTraining { model, log, stratified, initial_validation_loss, final_validation_loss })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::courtesy::SampleSource;
    use crate::predictor::PredictorConfig;
    use crate::synth::{synth_scenarios, SynthConfig};

    fn sample(points: Vec<[f64; 2]>, m: usize, psi: f64) -> LabeledSample {
        LabeledSample {
            scenario_id: "s".into(),
            m,
            source: if m == 0 { SampleSource::GroundTruth } else { SampleSource::Augmented },
            psi,
            trajectory: Trajectory::new(points, 0.5).unwrap(),
        }
    }

    #[test]
    fn huber_branches() {
        let mut g = Graph::new();
        let a = g.constant(vec![0.5, 0.5]);
        let b = g.constant(vec![0.0, 0.0]);
        let h = huber(&mut g, a, b, 1.0).unwrap();
        assert!((g.scalar(h) - 0.125).abs() < 1e-15);
        let c = g.constant(vec![2.0, -2.0]);
        let h = huber(&mut g, c, b, 1.0).unwrap();
        assert!((g.scalar(h) - 1.5).abs() < 1e-15);
        let d = g.constant(vec![0.0]);
        assert!(huber(&mut g, a, d, 1.0).is_err());
    }

    #[test]
    fn traj_loss_weights_augmented_terms() {
        let s = [sample(vec![[0.0, 0.0]; 2], 0, 0.0), sample(vec![[0.0, 0.0]; 2], 1, 0.0)];
        let mut g = Graph::new();
        let p0 = g.constant(vec![0.5, 0.5, 0.5, 0.5]);
        let p1 = g.constant(vec![2.0, 2.0, 2.0, 2.0]);
        let l = traj_loss(&mut g, &s, &[p0, p1], 0.5, 1.0).unwrap();
        assert!((g.scalar(l) - (0.125 + 0.5 * 1.5)).abs() < 1e-15);
        let l = traj_loss(&mut g, &s, &[p0, p1], 0.0, 1.0).unwrap();
        assert!((g.scalar(l) - 0.125).abs() < 1e-15);
        assert!(traj_loss(&mut g, &s, &[p0], 0.5, 1.0).is_err());
    }

    #[test]
    fn total_loss_arithmetic() {
        let mut g = Graph::new();
        let a = g.scalar_constant(1.0);
        let b = g.scalar_constant(2.0);
        let l = total_loss(&mut g, a, b, 0.5).unwrap();
        assert_eq!(g.scalar(l), 2.0);
        let l = total_loss(&mut g, a, b, 0.0).unwrap();
        assert_eq!(g.scalar(l), 1.0);
    }

    #[test]
    fn sampler_halves() {
        let psi = [3.0, -2.5, 0.1, 0.2, -0.3, 1.9];
        let s = StratifiedSampler::new(&psi, 2.0);
        assert_eq!(s.high, vec![0, 1]);
        let mut r = rng::seeded(1);
        for size in [1, 5, 8] {
            let b = s.batch(&mut r, size);
            let hi = b.iter().filter(|&&i| psi[i].abs() >= 2.0).count();
            assert_eq!(hi, size.div_ceil(2));
            assert_eq!(b.len() - hi, size / 2);
        }
        let flat = StratifiedSampler::new(&[0.0, 0.1], 2.0);
        assert!(!flat.is_stratified());
        assert_eq!(flat.batch(&mut r, 4).len(), 4);
    }

    #[test]
    fn ablated_predictor_gives_squared_labels() {
        let cfg = SynthConfig::default();
        let scenes = synth_scenarios(&cfg, 3, 1).unwrap();
        let layout = FeatureLayout::new(scenes[0].observation.history_len(), scenes[0].horizon());
        let pc = PredictorConfig { hidden: 8, embedding: 8, future_embedding: 4, ..Default::default() };
        let mut predictor = PredictorModel::new(layout, 0.5, &pc, &mut rng::seeded(0));
        predictor.ablate_future_encoder();
        let s = &scenes[0];
        let samples = [sample(s.future_b.points().to_vec(), 0, 1.0), sample(s.future_b.points().to_vec(), 1, -1.0)];
        let mut g = Graph::new();
        let op = CourtesyOperator::new(&mut g, &predictor, RewardSpec::AverageSpeed);
        let ctx = CourtesyContext::new(&mut g, &op, &s.observation).unwrap();
        let preds: Vec<Var> = samples.iter().map(|l| g.constant(l.trajectory.to_flat())).collect();
        let l = courtesy_loss(&mut g, &op, &ctx, &samples, &preds).unwrap();
        assert_eq!(g.scalar(l), 2.0);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig::default();
        let scenes = synth_scenarios(&cfg, 4, 1).unwrap();
        let layout = FeatureLayout::new(scenes[0].observation.history_len(), scenes[0].horizon());
        let pc = PredictorConfig { hidden: 8, embedding: 8, future_embedding: 4, ..Default::default() };
        let predictor = PredictorModel::new(layout, 0.5, &pc, &mut rng::seeded(0));
        let gen = GeneratorModel::from_predictor(&predictor, 8, &mut rng::seeded(1));
        gen.validate().unwrap();
        let x = &scenes[0].observation;
        let a = gen.generate(x, 0.7).unwrap();
        assert_eq!(a, gen.generate(x, 0.7).unwrap());
        assert_eq!(a.len(), layout.future_len);
        assert_eq!(gen.generate_many(x, &[0.7, -1.0]).unwrap()[0], a);
    }
}
