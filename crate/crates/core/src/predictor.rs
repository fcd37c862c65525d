//! Dual-mode Gaussian-mixture trajectory predictor.
//!
//! One network serves two queries. In marginal mode the future encoder is
//! switched off and a zero embedding takes its place; in conditional mode the
//! encoded future of agent B is concatenated with the scene embedding before
//! the mixture head. Conditional outputs stay differentiable with respect to
//! B's future, which is what the courtesy operator needs.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // std, when linked, provides these methods inherently
use num_traits::Float;
use rand::Rng as _;

use crate::error::{bail, Result};
use crate::features::{scene_features, FeatureLayout, Frame, POSITION_SCALE};
use crate::nn::{log_sum_exp, Activation, Adam, BoundMlp, Graph, Mlp, Var};
use crate::rng::{self, Rng};
use crate::types::{average_displacement, distance, Agent, Observation, Scenario, Trajectory};

/// Meters per unit of the head's mean offsets.
pub(crate) const MEAN_SCALE: f64 = 10.0;
/// Smallest variance the head can emit (m^2).
pub const VARIANCE_FLOOR: f64 = 1e-3;

/// Mixture of `K` diagonal Gaussians over flattened `T x 2` trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmTrajectoryDistribution {
    weights: Vec<f64>,
    /// Flattened `[x0, y0, x1, y1, ...]` mean of each component.
    means: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
    dt: f64,
}

impl GmmTrajectoryDistribution {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, variances: Vec<Vec<f64>>, dt: f64) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            bail!(Validation, "mixture needs at least one component");
        }
        if means.len() != k || variances.len() != k {
            bail!(Shape, "{k} weights but {} means and {} variances", means.len(), variances.len());
        }
        let n = means[0].len();
        if n < 4 || !n.is_multiple_of(2) {
            bail!(Shape, "component mean has {n} values, expected 2T with T >= 2");
        }
        if means.iter().chain(&variances).any(|v| v.len() != n) {
            bail!(Shape, "components disagree on trajectory length");
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            bail!(Validation, "mixture weights must be finite and nonnegative");
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            bail!(Validation, "mixture weights sum to {total}");
        }
        if means.iter().flatten().any(|m| !m.is_finite()) {
            bail!(Validation, "non-finite component mean");
        }
        if variances.iter().flatten().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            bail!(Validation, "component variances must be nonnegative and finite");
        }
        if !(dt > 0.0) {
            bail!(Validation, "dt must be positive");
        }
        Ok(Self { weights, means, variances, dt })
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn horizon(&self) -> usize {
        self.means[0].len() / 2
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mean(&self, k: usize) -> &[f64] {
        &self.means[k]
    }

    pub fn variance(&self, k: usize) -> &[f64] {
        &self.variances[k]
    }

    pub fn mean_trajectory(&self, k: usize) -> Trajectory {
        Trajectory::from_flat(&self.means[k], self.dt).expect("validated component mean")
    }

    /// Index of the highest-weight component (first on ties).
    pub fn top_component(&self) -> usize {
        let mut best = 0;
        for (k, w) in self.weights.iter().enumerate() {
            if *w > self.weights[best] {
                best = k;
            }
        }
        best
    }

    /// Negative log-likelihood of `traj`, log-sum-exp stabilized.
    pub fn nll(&self, traj: &Trajectory) -> Result<f64> {
        let y = traj.to_flat();
        if y.len() != self.means[0].len() {
            bail!(Shape, "trajectory has {} points, mixture horizon is {}", traj.len(), self.horizon());
        }
        if self.variances.iter().flatten().any(|&v| v == 0.0) {
            bail!(Validation, "a point-mass component has no density");
        }
        let terms: Vec<f64> =
            (0..self.components()).map(|k| self.weights[k].ln() + diag_log_density(&y, &self.means[k], &self.variances[k])).collect();
        Ok(-log_sum_exp(&terms))
    }

    /// Draws `m` trajectories: a component by weight, then independent
    /// Gaussian noise on every coordinate.
    pub fn sample(&self, m: usize, seed: u64) -> Result<Vec<Trajectory>> {
        if m == 0 {
            bail!(Validation, "sample count must be >= 1");
        }
        let mut rng = rng::seeded(seed);
        (0..m).map(|_| self.sample_one(&mut rng)).collect()
    }

    pub(crate) fn sample_one(&self, rng: &mut Rng) -> Result<Trajectory> {
        let u: f64 = rng.random();
        let mut k = self.components() - 1;
        let mut acc = 0.0;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                k = i;
                break;
            }
        }
        let flat: Vec<f64> = self.means[k].iter().zip(&self.variances[k]).map(|(mu, var)| mu + var.sqrt() * rng::normal(rng)).collect();
        Trajectory::from_flat(&flat, self.dt)
    }

    /// Places the mixture on `g` as constants.
    pub fn to_nodes(&self, g: &mut Graph) -> GmmNodes {
        let log_w: Vec<f64> = self.weights.iter().map(|w| w.ln()).collect();
        GmmNodes {
            log_weights: g.constant(log_w),
            weights: g.constant(self.weights.clone()),
            means: self.means.iter().map(|m| g.constant(m.clone())).collect(),
            variances: self.variances.iter().map(|v| g.constant(v.clone())).collect(),
        }
    }
}

/// `sum_i log N(y_i; mu_i, var_i)`.
pub(crate) fn diag_log_density(y: &[f64], mean: &[f64], var: &[f64]) -> f64 {
    const LN_2PI: f64 = 1.837_877_066_409_345_5;
    y.iter().zip(mean).zip(var).map(|((y, m), v)| -0.5 * ((y - m) * (y - m) / v + v.ln() + LN_2PI)).sum()
}

/// A mixture living on a [`Graph`], so its parameters can carry gradients.
#[derive(Debug, Clone)]
pub struct GmmNodes {
    pub log_weights: Var,
    pub weights: Var,
    pub means: Vec<Var>,
    pub variances: Vec<Var>,
}

impl GmmNodes {
    pub fn to_distribution(&self, g: &Graph, dt: f64) -> Result<GmmTrajectoryDistribution> {
        GmmTrajectoryDistribution::new(
            g.value(self.weights).to_vec(),
            self.means.iter().map(|&m| g.value(m).to_vec()).collect(),
            self.variances.iter().map(|&v| g.value(v).to_vec()).collect(),
            dt,
        )
    }
}

/// Mixture negative log-likelihood of a flattened trajectory node.
pub fn gmm_nll(g: &mut Graph, gmm: &GmmNodes, traj: Var) -> Result<Var> {
    let n = g.size(gmm.means[0]);
    if g.size(traj) != n {
        bail!(Shape, "trajectory has {} values, mixture expects {n}", g.size(traj));
    }
    let mut terms = Vec::with_capacity(gmm.means.len());
    for (k, (&mean, &var)) in gmm.means.iter().zip(&gmm.variances).enumerate() {
        let ll = g.gaussian_log_density(traj, mean, var)?;
        let lw = g.gather(gmm.log_weights, vec![k])?;
        terms.push(g.add(ll, lw)?);
    }
    let stacked = g.concat(&terms);
    let lse = g.log_sum_exp(stacked);
    Ok(g.scale(lse, -1.0))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PredictorConfig {
    pub components: usize,
    pub hidden: usize,
    pub embedding: usize,
    pub future_embedding: usize,
    pub steps: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Cosine decay floor, as a fraction of `lr`.
    pub min_lr_fraction: f64,
    /// Fraction of minibatches trained in conditional mode.
    pub conditional_ratio: f64,
    pub seed: u64,
    /// Log every this many steps (0 disables).
    pub log_every: usize,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            components: 4,
            hidden: 128,
            embedding: 64,
            future_embedding: 32,
            steps: 6000,
            batch_size: 32,
            lr: 1e-3,
            min_lr_fraction: 0.1,
            conditional_ratio: 0.5,
            seed: 0,
            log_every: 100,
        }
    }
}

impl PredictorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.components == 0 || self.hidden == 0 || self.embedding == 0 || self.future_embedding == 0 {
            bail!(Validation, "predictor widths and component count must be positive");
        }
        if self.batch_size == 0 {
            bail!(Validation, "predictor batch_size must be positive");
        }
        if !(self.lr > 0.0) {
            bail!(Validation, "predictor lr must be positive");
        }
        if !(0.0..=1.0).contains(&self.min_lr_fraction) {
            bail!(Validation, "min_lr_fraction must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.conditional_ratio) {
            bail!(Validation, "conditional_ratio must lie in [0, 1]");
        }
        Ok(())
    }
}

/// Marginal and conditional trajectory predictor (parameters `phi`).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorModel {
    pub layout: FeatureLayout,
    pub components: usize,
    pub dt: f64,
    pub scene_encoder: Mlp,
    pub future_encoder: Mlp,
    /// Mixture head; outputs `K * (1 + 2T + 2T)` values.
    pub decoder: Mlp,
}

/// Predictor parameters placed on a graph.
#[derive(Debug, Clone)]
pub struct BoundPredictor {
    pub scene_encoder: BoundMlp,
    pub future_encoder: BoundMlp,
    pub decoder: BoundMlp,
}

/// Which distribution a query asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionMode {
    Marginal(Agent),
    /// Agent A given B's ground-truth future.
    Conditional,
}

impl PredictorModel {
    pub fn new(layout: FeatureLayout, dt: f64, config: &PredictorConfig, rng: &mut Rng) -> Self {
        let t2 = layout.future_dim();
        let (h, e, ef, k) = (config.hidden, config.embedding, config.future_embedding, config.components);
        Self {
            layout,
            components: k,
            dt,
            scene_encoder: Mlp::new(&[layout.scene_dim(), h, e], Activation::Tanh, rng),
            future_encoder: Mlp::new(&[t2, h, ef], Activation::Identity, rng),
            decoder: Mlp::new(&[e + ef, 2 * h, k * (1 + 2 * t2)], Activation::Identity, rng),
        }
    }

    /// Checks that the three networks fit together and with the layout.
    pub fn validate(&self) -> Result<()> {
        let t2 = self.layout.future_dim();
        if self.scene_encoder.input_dim() != self.layout.scene_dim() {
            bail!(Shape, "scene encoder expects {} features, layout has {}", self.scene_encoder.input_dim(), self.layout.scene_dim());
        }
        if self.future_encoder.input_dim() != t2 {
            bail!(Shape, "future encoder expects {} inputs, horizon needs {t2}", self.future_encoder.input_dim());
        }
        let fused = self.scene_encoder.output_dim() + self.future_encoder.output_dim();
        if self.decoder.input_dim() != fused {
            bail!(Shape, "decoder expects {} inputs, encoders emit {fused}", self.decoder.input_dim());
        }
        if self.components == 0 || self.decoder.output_dim() != self.components * (1 + 2 * t2) {
            bail!(
                Shape,
                "decoder emits {} values, {} components need {}",
                self.decoder.output_dim(),
                self.components,
                self.components * (1 + 2 * t2)
            );
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.layout.future_len
    }

    pub fn embedding_dim(&self) -> usize {
        self.scene_encoder.output_dim()
    }

    pub fn bind(&self, g: &mut Graph, trainable: bool) -> BoundPredictor {
        BoundPredictor {
            scene_encoder: self.scene_encoder.bind(g, trainable),
            future_encoder: self.future_encoder.bind(g, trainable),
            decoder: self.decoder.bind(g, trainable),
        }
    }

    /// Scene embedding of `target` plus its reference frame.
    pub fn embed(&self, g: &mut Graph, bound: &BoundPredictor, x: &Observation, target: Agent) -> Result<(Var, Frame)> {
        let f = scene_features(&self.layout, x, target)?;
        let input = g.constant(f.values);
        Ok((bound.scene_encoder.forward(g, input)?, f.frame))
    }

    /// Encodes B's flattened future (meters, world frame) relative to `origin`.
    pub fn encode_future(&self, g: &mut Graph, bound: &BoundPredictor, y_b: Var, frame: &Frame) -> Result<Var> {
        let t2 = self.layout.future_dim();
        if g.size(y_b) != t2 {
            bail!(Shape, "conditioning future has {} values, expected {t2}", g.size(y_b));
        }
        let origin = g.constant(frame.tiled_origin(self.horizon()));
        let rel = g.sub(y_b, origin)?;
        let scaled = g.scale(rel, 1.0 / POSITION_SCALE);
        bound.future_encoder.forward(g, scaled)
    }

    /// Mixture head on a scene embedding; `future` is `None` in marginal mode.
    pub fn head(&self, g: &mut Graph, bound: &BoundPredictor, scene: Var, future: Option<Var>, frame: &Frame) -> Result<GmmNodes> {
        let future = match future {
            Some(f) => f,
            None => g.constant(vec![0.0; self.future_encoder.output_dim()]),
        };
        let fused = g.concat(&[scene, future]);
        let out = bound.decoder.forward(g, fused)?;
        let (k, t2) = (self.components, self.layout.future_dim());
        let logits = g.slice(out, 0, k)?;
        let log_weights = g.log_softmax(logits);
        let weights = g.softmax(logits);
        let baseline = g.constant(frame.constant_velocity(self.horizon(), self.dt));
        let mut means = Vec::with_capacity(k);
        let mut variances = Vec::with_capacity(k);
        for c in 0..k {
            let off = g.slice(out, k + c * t2, t2)?;
            let off = g.scale(off, MEAN_SCALE);
            means.push(g.add(baseline, off)?);
            let raw = g.slice(out, k + k * t2 + c * t2, t2)?;
            let sp = g.softplus(raw);
            variances.push(g.affine(sp, 1.0, VARIANCE_FLOOR));
        }
        Ok(GmmNodes { log_weights, weights, means, variances })
    }

    /// Conditional mixture over A's future given B's flattened future node.
    pub fn conditional_nodes(&self, g: &mut Graph, bound: &BoundPredictor, x: &Observation, y_b: Var) -> Result<GmmNodes> {
        let (scene, frame) = self.embed(g, bound, x, Agent::A)?;
        let fut = self.encode_future(g, bound, y_b, &frame)?;
        self.head(g, bound, scene, Some(fut), &frame)
    }

    pub fn marginal_nodes(&self, g: &mut Graph, bound: &BoundPredictor, x: &Observation, target: Agent) -> Result<GmmNodes> {
        let (scene, frame) = self.embed(g, bound, x, target)?;
        self.head(g, bound, scene, None, &frame)
    }

    pub fn predict_marginal(&self, x: &Observation, target: Agent) -> Result<GmmTrajectoryDistribution> {
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let nodes = self.marginal_nodes(&mut g, &bound, x, target)?;
        nodes.to_distribution(&g, self.dt)
    }

    pub fn predict_conditional(&self, x: &Observation, y_b: &Trajectory) -> Result<GmmTrajectoryDistribution> {
        if y_b.len() != self.horizon() {
            bail!(Shape, "conditioning future has {} points, expected {}", y_b.len(), self.horizon());
        }
        let mut g = Graph::new();
        let bound = self.bind(&mut g, false);
        let y = g.constant(y_b.to_flat());
        let nodes = self.conditional_nodes(&mut g, &bound, x, y)?;
        nodes.to_distribution(&g, self.dt)
    }

    pub fn predict(&self, scenario: &Scenario, mode: PredictionMode) -> Result<GmmTrajectoryDistribution> {
        match mode {
            PredictionMode::Marginal(agent) => self.predict_marginal(&scenario.observation, agent),
            PredictionMode::Conditional => self.predict_conditional(&scenario.observation, &scenario.future_b),
        }
    }

    /// Output layer of the future encoder set to zero, which makes every
    /// conditional query return the marginal distribution.
    pub fn ablate_future_encoder(&mut self) {
        if let Some(last) = self.future_encoder.layers_mut().last_mut() {
            last.weight.iter_mut().for_each(|w| *w = 0.0);
            last.bias.iter_mut().for_each(|b| *b = 0.0);
        }
    }

    pub fn param_count(&self) -> usize {
        self.scene_encoder.param_count() + self.future_encoder.param_count() + self.decoder.param_count()
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = self.scene_encoder.tensors_mut("scene_encoder");
        out.extend(self.future_encoder.tensors_mut("future_encoder"));
        out.extend(self.decoder.tensors_mut("decoder"));
        out
    }
}

impl BoundPredictor {
    fn grads(&self, g: &Graph, grads: &crate::nn::Gradients) -> Vec<Vec<f64>> {
        let mut out = self.scene_encoder.grads(g, grads);
        out.extend(self.future_encoder.grads(g, grads));
        out.extend(self.decoder.grads(g, grads));
        out
    }
}

/// One row of a training log.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PredictorLogRow {
    pub step: usize,
    pub conditional: bool,
    /// Mean NLL per scenario of the minibatch.
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct PredictorTraining {
    pub model: PredictorModel,
    pub log: Vec<PredictorLogRow>,
    /// Marginal NLL of A on the validation scenarios before and after training.
    pub initial_validation_nll: f64,
    pub final_validation_nll: f64,
}

/// Mean marginal NLL of agent A's ground-truth future.
pub fn mean_marginal_nll(model: &PredictorModel, scenarios: &[Scenario]) -> Result<f64> {
    if scenarios.is_empty() {
        bail!(Validation, "no scenarios to score");
    }
    let mut total = 0.0;
    for s in scenarios {
        total += model.predict_marginal(&s.observation, Agent::A)?.nll(&s.future_a)?;
    }
    Ok(total / scenarios.len() as f64)
}

/// Cosine decay from `lr` to `lr * floor` over `total` steps.
pub fn cosine_lr(lr: f64, floor: f64, step: usize, total: usize) -> f64 {
    if total <= 1 {
        return lr;
    }
    let progress = step as f64 / (total - 1) as f64;
    let cos = 0.5 * (1.0 + (core::f64::consts::PI * progress).cos());
    lr * (floor + (1.0 - floor) * cos)
}

/// Whether step `step` of a run trains conditional mode, spreading a fraction
/// `ratio` of steps evenly.
fn is_conditional_step(step: usize, ratio: f64) -> bool {
    ((step + 1) as f64 * ratio).floor() > (step as f64 * ratio).floor()
}

/// Trains both inference modes, alternating them at minibatch granularity.
/// Marginal minibatches fit A's and B's futures; conditional minibatches fit
/// A's future given B's ground truth.
pub fn train_predictor(train: &[Scenario], validation: &[Scenario], config: &PredictorConfig) -> Result<PredictorTraining> {
    config.validate()?;
    let Some(first) = train.first() else {
        bail!(Validation, "predictor training set is empty");
    };
    let layout = FeatureLayout::new(first.observation.history_len(), first.horizon());
    for s in train.iter().chain(validation) {
        s.validate()?;
        if s.observation.history_len() != layout.history_len || s.horizon() != layout.future_len {
            bail!(Validation, "scenario {}: history/future lengths differ from the rest of the set", s.id);
        }
    }
    let dt = first.observation.dt();
    let mut rng = rng::seeded(config.seed);
    let mut model = PredictorModel::new(layout, dt, config, &mut rng);
    let score_set = if validation.is_empty() { train } else { validation };
    let initial_validation_nll = mean_marginal_nll(&model, score_set)?;
    let mut opt = Adam::new(config.lr);
    let mut log = Vec::new();
    for step in 0..config.steps {
        let conditional = is_conditional_step(step, config.conditional_ratio);
        opt.lr = cosine_lr(config.lr, config.min_lr_fraction, step, config.steps);
        let mut g = Graph::new();
        let bound = model.bind(&mut g, true);
        let mut losses = Vec::with_capacity(config.batch_size * 2);
        for _ in 0..config.batch_size {
            let s = &train[rng.random_range(0..train.len())];
            let x = &s.observation;
            if conditional {
                let y_b = g.constant(s.future_b.to_flat());
                let gmm = model.conditional_nodes(&mut g, &bound, x, y_b)?;
                let y = g.constant(s.future_a.to_flat());
                losses.push(gmm_nll(&mut g, &gmm, y)?);
            } else {
                for agent in [Agent::A, Agent::B] {
                    let gmm = model.marginal_nodes(&mut g, &bound, x, agent)?;
                    let y = g.constant(s.future(agent).to_flat());
                    losses.push(gmm_nll(&mut g, &gmm, y)?);
                }
            }
        }
        let stacked = g.concat(&losses);
        let total = g.sum(stacked);
        let loss = g.scale(total, 1.0 / config.batch_size as f64);
        let value = g.scalar(loss);
        if !value.is_finite() {
            bail!(Training, "predictor loss became {value} at step {step} ({} mode)", if conditional { "conditional" } else { "marginal" });
        }
        let grads = g.backward(loss)?;
        let grads = bound.grads(&g, &grads);
        opt.step(model.tensors_mut(), &grads).map_err(|e| match e {
            crate::Error::Training(m) => crate::Error::Training(format!("predictor step {step}: {m}")),
            other => other,
        })?;
        log.push(PredictorLogRow { step, conditional, loss: value });
        if config.log_every > 0 && step % config.log_every == 0 {
            log::debug!("predictor step {step}: loss {value:.4} conditional={conditional}");
        }
    }
    let final_validation_nll = mean_marginal_nll(&model, score_set)?;
    log::info!("predictor validation NLL {initial_validation_nll:.3} -> {final_validation_nll:.3}");
    Ok(PredictorTraining { model, log, initial_validation_nll, final_validation_nll })
}

/// Displacement metrics of a mixture against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PredictionMetrics {
    /// ADE of the highest-weight component mean.
    pub ade: f64,
    /// Best ADE over component means.
    pub min_ade: f64,
    /// Best final displacement over component means.
    pub min_fde: f64,
}

impl PredictionMetrics {
    pub fn of(dist: &GmmTrajectoryDistribution, truth: &Trajectory) -> Result<Self> {
        if truth.len() != dist.horizon() {
            bail!(Shape, "ground truth has {} points, prediction {}", truth.len(), dist.horizon());
        }
        let gt = truth.points();
        let comps: Vec<Trajectory> = (0..dist.components()).map(|k| dist.mean_trajectory(k)).collect();
        let ades: Vec<f64> = comps.iter().map(|c| average_displacement(c.points(), gt)).collect();
        let fdes = comps.iter().map(|c| distance(c.last(), truth.last()));
        Ok(Self {
            ade: ades[dist.top_component()],
            min_ade: ades.iter().copied().fold(f64::INFINITY, f64::min),
            min_fde: fdes.fold(f64::INFINITY, f64::min),
        })
    }
}

/// Scenario-averaged [`PredictionMetrics`].
pub fn prediction_metrics(model: &PredictorModel, scenarios: &[Scenario], mode: PredictionMode) -> Result<PredictionMetrics> {
    if scenarios.is_empty() {
        bail!(Validation, "no scenarios to score");
    }
    let target = match mode {
        PredictionMode::Marginal(agent) => agent,
        PredictionMode::Conditional => Agent::A,
    };
    let mut acc = PredictionMetrics::default();
    for s in scenarios {
        let m = PredictionMetrics::of(&model.predict(s, mode)?, s.future(target))?;
        acc.ade += m.ade;
        acc.min_ade += m.min_ade;
        acc.min_fde += m.min_fde;
    }
    let n = scenarios.len() as f64;
    Ok(PredictionMetrics { ade: acc.ade / n, min_ade: acc.min_ade / n, min_fde: acc.min_fde / n })
}

/// ADE of constant-velocity extrapolation from the last history step.
pub fn constant_velocity_ade(scenarios: &[Scenario], target: Agent) -> Result<f64> {
    if scenarios.is_empty() {
        bail!(Validation, "no scenarios to score");
    }
    let total: f64 = scenarios
        .iter()
        .map(|s| {
            let h = s.observation.history(target);
            let frame = Frame { origin: h.last(), velocity: h.final_velocity() };
            let cv = frame.constant_velocity(s.horizon(), h.dt());
            let pts: Vec<[f64; 2]> = cv.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
            average_displacement(&pts, s.future(target).points())
        })
        .sum();
    Ok(total / scenarios.len() as f64)
}
