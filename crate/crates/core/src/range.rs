//! Quantile regression of the feasible courtesy interval of a scene, and the
//! map from a user-facing quantile to the courtesy fed to the generator.

use alloc::vec::Vec;

use rand::Rng as _;

use crate::error::{bail, Result};
use crate::features::{scene_features, FeatureLayout};
use crate::nn::{Activation, Adam, Graph, Mlp, Var};
use crate::predictor::cosine_lr;
use crate::rng;
use crate::scbg::{LabeledScenario, PSI_SCALE};
use crate::types::{Agent, Observation};

pub const TAU_LO: f64 = 0.1;
pub const TAU_HI: f64 = 0.9;

/// Predicted 0.1 and 0.9 quantiles of courtesy (m/s), `psi_lo <= psi_hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CourtesyRange {
    pub psi_lo: f64,
    pub psi_hi: f64,
}

impl CourtesyRange {
    /// Orders two head outputs into a valid interval.
    pub fn from_outputs(a: f64, b: f64) -> Self {
        Self { psi_lo: a.min(b), psi_hi: a.max(b) }
    }

    pub fn width(&self) -> f64 {
        self.psi_hi - self.psi_lo
    }

    pub fn contains(&self, psi: f64) -> bool {
        self.psi_lo <= psi && psi <= self.psi_hi
    }
}

/// Affine map with `0.1 -> psi_lo` and `0.9 -> psi_hi`, extended linearly
/// over `[0, 1]`.
pub fn quantile_to_courtesy(range: &CourtesyRange, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        bail!(Validation, "quantile {q} outside [0, 1]");
    }
    Ok(range.psi_lo + (q - TAU_LO) / (TAU_HI - TAU_LO) * range.width())
}

/// Pinball loss of `psi_hat` as the `tau`-quantile of `psi`.
pub fn pinball_loss(g: &mut Graph, psi: Var, psi_hat: Var, tau: f64) -> Result<Var> {
    if !(tau > 0.0 && tau < 1.0) {
        bail!(Validation, "quantile level {tau} outside (0, 1)");
    }
    let r = g.sub(psi, psi_hat)?;
    let p = g.pinball(r, tau);
    Ok(g.sum(p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RangeConfig {
    pub hidden: usize,
    pub batch_size: usize,
    pub steps: usize,
    pub lr: f64,
    pub min_lr_fraction: f64,
    pub seed: u64,
    pub log_every: usize,
}

impl Default for RangeConfig {
    fn default() -> Self {
        Self { hidden: 32, batch_size: 32, steps: 3000, lr: 1e-3, min_lr_fraction: 0.1, seed: 0, log_every: 100 }
    }
}

impl RangeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.batch_size == 0 {
            bail!(Validation, "range hidden width and batch_size must be positive");
        }
        if !(self.lr > 0.0) {
            bail!(Validation, "range lr must be positive");
        }
        if !(0.0..=1.0).contains(&self.min_lr_fraction) {
            bail!(Validation, "min_lr_fraction must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Frozen scene encoder (of B's features) plus a two-output quantile head.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeModel {
    pub layout: FeatureLayout,
    pub encoder: Mlp,
    /// Raw `(q_0.1, q_0.9)` in units of [`PSI_SCALE`].
    pub head: Mlp,
}

impl RangeModel {
    pub fn new(layout: FeatureLayout, encoder: Mlp, hidden: usize, rng: &mut rng::Rng) -> Self {
        let e = encoder.output_dim();
        Self { layout, encoder, head: Mlp::new(&[e, hidden, 2], Activation::Identity, rng) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.encoder.input_dim() != self.layout.scene_dim() {
            bail!(Shape, "range encoder expects {} features, layout has {}", self.encoder.input_dim(), self.layout.scene_dim());
        }
        if self.head.input_dim() != self.encoder.output_dim() || self.head.output_dim() != 2 {
            bail!(Shape, "range head must map the {}-dim embedding to 2 values", self.encoder.output_dim());
        }
        Ok(())
    }

    pub fn embed(&self, x: &Observation) -> Result<Vec<f64>> {
        let f = scene_features(&self.layout, x, Agent::B)?;
        self.encoder.eval(&f.values)
    }

    /// Unordered quantile outputs (m/s) for an embedding.
    pub fn raw_outputs(&self, embedding: &[f64]) -> Result<[f64; 2]> {
        let out = self.head.eval(embedding)?;
        Ok([out[0] * PSI_SCALE, out[1] * PSI_SCALE])
    }

    pub fn predict_range(&self, x: &Observation) -> Result<CourtesyRange> {
        let [a, b] = self.raw_outputs(&self.embed(x)?)?;
        Ok(CourtesyRange::from_outputs(a, b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RangeLogRow {
    pub step: usize,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct RangeTraining {
    pub model: RangeModel,
    pub log: Vec<RangeLogRow>,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Mean over a scene's labels of the two pinball terms.
fn scene_loss(g: &mut Graph, head: &crate::nn::BoundMlp, embedding: &[f64], psis: &[f64]) -> Result<Var> {
    let x = g.constant(embedding.to_vec());
    let out = head.forward(g, x)?;
    let out = g.scale(out, PSI_SCALE);
    let lo = g.slice(out, 0, 1)?;
    let hi = g.slice(out, 1, 1)?;
    let n = psis.len();
    let lo = g.broadcast(lo, n)?;
    let hi = g.broadcast(hi, n)?;
    let target = g.constant(psis.to_vec());
    let a = pinball_loss(g, target, lo, TAU_LO)?;
    let b = pinball_loss(g, target, hi, TAU_HI)?;
    let s = g.add(a, b)?;
    Ok(g.scale(s, 1.0 / n as f64))
}

fn mean_loss(model: &RangeModel, embeddings: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64> {
    let mut g = Graph::new();
    let head = model.head.bind(&mut g, false);
    let mut total = 0.0;
    for (e, t) in embeddings.iter().zip(targets) {
        let l = scene_loss(&mut g, &head, e, t)?;
        total += g.scalar(l);
    }
    Ok(total / embeddings.len() as f64)
}

/// Fits the quantile head on every label (ground truth and augmented) of
/// each scene. `encoder` is copied and never updated.
pub fn train_range(groups: &[LabeledScenario<'_>], layout: FeatureLayout, encoder: &Mlp, config: &RangeConfig) -> Result<RangeTraining> {
    config.validate()?;
    if groups.is_empty() {
        bail!(Validation, "range training set is empty");
    }
    if groups.iter().all(|gr| gr.samples.len() < 2) {
        log::warn!("every scene has a single courtesy label; quantiles will be degenerate");
    }
    let mut rng = rng::seeded(config.seed);
    let mut model = RangeModel::new(layout, encoder.clone(), config.hidden, &mut rng);
    model.validate()?;
    let embeddings: Vec<Vec<f64>> = groups.iter().map(|gr| model.embed(&gr.scenario.observation)).collect::<Result<_>>()?;
    let targets: Vec<Vec<f64>> = groups.iter().map(|gr| gr.samples.iter().map(|s| s.psi).collect()).collect();
    let initial_loss = mean_loss(&model, &embeddings, &targets)?;
    let mut opt = Adam::new(config.lr);
    let mut log = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        opt.lr = cosine_lr(config.lr, config.min_lr_fraction, step, config.steps);
        let mut g = Graph::new();
        let head = model.head.bind(&mut g, true);
        let mut losses = Vec::with_capacity(config.batch_size);
        for _ in 0..config.batch_size {
            let i = rng.random_range(0..groups.len());
            losses.push(scene_loss(&mut g, &head, &embeddings[i], &targets[i])?);
        }
        let stacked = g.concat(&losses);
        let loss = g.mean(stacked);
        let value = g.scalar(loss);
        if !value.is_finite() {
            bail!(Training, "range loss became {value} at step {step}");
        }
        let grads = g.backward(loss)?;
        let grads = head.grads(&g, &grads);
        opt.step(model.head.tensors_mut("head"), &grads)?;
        log.push(RangeLogRow { step, loss: value });
        if config.log_every > 0 && step % config.log_every == 0 {
            log::debug!("range step {step}: loss {value:.4}");
        }
    }
    let final_loss = mean_loss(&model, &embeddings, &targets)?;
    log::info!("range pinball loss {initial_loss:.4} -> {final_loss:.4}");
    Ok(RangeTraining { model, log, initial_loss, final_loss })
}

/// Fractions of labels at or below each predicted quantile.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Coverage {
    pub below_lo: f64,
    pub below_hi: f64,
    pub inside: f64,
    pub count: usize,
}

pub fn coverage(model: &RangeModel, groups: &[LabeledScenario<'_>]) -> Result<Coverage> {
    let (mut lo, mut hi, mut inside, mut n) = (0usize, 0usize, 0usize, 0usize);
    for gr in groups {
        let r = model.predict_range(&gr.scenario.observation)?;
        for s in &gr.samples {
            lo += (s.psi <= r.psi_lo) as usize;
            hi += (s.psi <= r.psi_hi) as usize;
            inside += r.contains(s.psi) as usize;
            n += 1;
        }
    }
    if n == 0 {
        bail!(Validation, "no labels to measure coverage on");
    }
    let f = |c: usize| c as f64 / n as f64;
    Ok(Coverage { below_lo: f(lo), below_hi: f(hi), inside: f(inside), count: n })
}
