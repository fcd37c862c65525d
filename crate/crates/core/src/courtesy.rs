//! Courtesy: how much B's chosen future changes A's expected reward.
//!
//! `psi = E[r(Y_A) | x, y_B] - E[r(Y_A) | x]`, with both expectations taken
//! under the predictor's mixtures. Positive values mean B helps A.

use alloc::string::String;
use alloc::vec::Vec;

#[allow(unused_imports)] // std, when linked, provides these methods inherently
use num_traits::Float;

use crate::error::{bail, Result};
use crate::features::Frame;
use crate::nn::{Graph, Var};
use crate::predictor::{BoundPredictor, GmmNodes, GmmTrajectoryDistribution, PredictorModel};
use crate::rng;
use crate::types::{Agent, Observation, Scenario, Trajectory};

/// Squared-length smoothing of each step (m^2).
pub const SPEED_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum RewardSpec {
    /// Path length over elapsed time.
    #[default]
    AverageSpeed,
}

impl RewardSpec {
    pub fn as_str(self) -> &'static str {
        match self {
            RewardSpec::AverageSpeed => "AVERAGE_SPEED",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "AVERAGE_SPEED" => Some(RewardSpec::AverageSpeed),
            _ => None,
        }
    }

    /// Reward of a flattened trajectory.
    pub fn value(self, flat: &[f64], dt: f64) -> f64 {
        match self {
            RewardSpec::AverageSpeed => average_speed_flat(flat, dt),
        }
    }

    /// Reward of a flattened trajectory node.
    pub fn node(self, g: &mut Graph, flat: Var, dt: f64) -> Result<Var> {
        match self {
            RewardSpec::AverageSpeed => average_speed_node(g, flat, dt),
        }
    }
}

fn average_speed_flat(flat: &[f64], dt: f64) -> f64 {
    let steps = flat.len() / 2 - 1;
    let path: f64 = flat
        .chunks_exact(2)
        .zip(flat.chunks_exact(2).skip(1))
        .map(|(p, q)| {
            let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
            (dx * dx + dy * dy + SPEED_EPS).sqrt()
        })
        .sum();
    path / (steps as f64 * dt)
}

fn average_speed_node(g: &mut Graph, flat: Var, dt: f64) -> Result<Var> {
    let n = g.size(flat);
    if n < 4 || !n.is_multiple_of(2) {
        bail!(Shape, "average speed needs a flattened trajectory of >= 2 points, got {n} values");
    }
    let head = g.slice(flat, 0, n - 2)?;
    let tail = g.slice(flat, 2, n - 2)?;
    let step = g.sub(tail, head)?;
    let sq = g.square(step);
    let len2 = g.segment_sum(sq, 2)?;
    let smoothed = g.affine(len2, 1.0, SPEED_EPS);
    let len = g.sqrt(smoothed);
    let path = g.sum(len);
    Ok(g.scale(path, 1.0 / ((n / 2 - 1) as f64 * dt)))
}

/// Average speed of a trajectory (m/s).
pub fn reward_average_speed(traj: &Trajectory) -> f64 {
    average_speed_flat(&traj.to_flat(), traj.dt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpectationMode {
    /// `sum_k w_k r(mu_k)`; differentiable.
    Means,
    /// Sample mean of the reward over `samples` draws.
    MonteCarlo { samples: usize, seed: u64 },
}

/// Expected reward of a mixture.
pub fn expected_reward(dist: &GmmTrajectoryDistribution, reward: RewardSpec, mode: ExpectationMode) -> Result<f64> {
    match mode {
        ExpectationMode::Means => Ok((0..dist.components()).map(|k| dist.weights()[k] * reward.value(dist.mean(k), dist.dt())).sum()),
        ExpectationMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                bail!(Validation, "Monte-Carlo expectation needs at least one sample");
            }
            let mut r = rng::seeded(seed);
            let mut total = 0.0;
            for _ in 0..samples {
                let t = dist.sample_one(&mut r)?;
                total += reward.value(&t.to_flat(), dist.dt());
            }
            Ok(total / samples as f64)
        }
    }
}

/// Mixture-of-means expected reward of a mixture on the graph.
pub fn expected_reward_node(g: &mut Graph, gmm: &GmmNodes, reward: RewardSpec, dt: f64) -> Result<Var> {
    let rewards: Vec<Var> = gmm.means.iter().map(|&m| reward.node(g, m, dt)).collect::<Result<_>>()?;
    let stacked = g.concat(&rewards);
    g.dot(gmm.weights, stacked)
}

/// The courtesy operator with the predictor's parameters held fixed.
///
/// Binding is done once; the marginal term of a scene can be computed once
/// and reused across every candidate `y_B`.
pub struct CourtesyOperator<'a> {
    pub model: &'a PredictorModel,
    pub reward: RewardSpec,
    pub bound: BoundPredictor,
}

impl<'a> CourtesyOperator<'a> {
    /// Binds the predictor onto `g` as constants.
    pub fn new(g: &mut Graph, model: &'a PredictorModel, reward: RewardSpec) -> Self {
        Self { model, reward, bound: model.bind(g, false) }
    }

    /// `E[r(Y_A) | x]`.
    pub fn marginal_term(&self, g: &mut Graph, x: &Observation) -> Result<Var> {
        let gmm = self.model.marginal_nodes(g, &self.bound, x, Agent::A)?;
        expected_reward_node(g, &gmm, self.reward, self.model.dt)
    }

    /// `E[r(Y_A) | x, y_B]` for a flattened future node of B.
    pub fn conditional_term(&self, g: &mut Graph, x: &Observation, y_b: Var) -> Result<Var> {
        let gmm = self.model.conditional_nodes(g, &self.bound, x, y_b)?;
        expected_reward_node(g, &gmm, self.reward, self.model.dt)
    }

    /// Conditional term from a precomputed scene embedding of A, which lets
    /// many candidate futures share one encoder pass.
    pub fn conditional_term_from(&self, g: &mut Graph, scene: Var, frame: &Frame, y_b: Var) -> Result<Var> {
        let fut = self.model.encode_future(g, &self.bound, y_b, frame)?;
        let gmm = self.model.head(g, &self.bound, scene, Some(fut), frame)?;
        expected_reward_node(g, &gmm, self.reward, self.model.dt)
    }

    /// `psi` as a node, differentiable with respect to `y_b`.
    pub fn label(&self, g: &mut Graph, x: &Observation, y_b: Var) -> Result<Var> {
        let cond = self.conditional_term(g, x, y_b)?;
        let marg = self.marginal_term(g, x)?;
        g.sub(cond, marg)
    }
}

/// `psi = J(x, y_B)` on the graph; `y_b` is a flattened future node of B.
pub fn courtesy_label(g: &mut Graph, model: &PredictorModel, x: &Observation, y_b: Var, reward: RewardSpec) -> Result<Var> {
    CourtesyOperator::new(g, model, reward).label(g, x, y_b)
}

/// Value of `J(x, y_B)`.
pub fn courtesy_value(model: &PredictorModel, x: &Observation, y_b: &Trajectory, reward: RewardSpec) -> Result<f64> {
    if y_b.len() != model.horizon() {
        bail!(Shape, "future of B has {} points, predictor horizon is {}", y_b.len(), model.horizon());
    }
    let mut g = Graph::new();
    let y = g.constant(y_b.to_flat());
    let psi = courtesy_label(&mut g, model, x, y, reward)?;
    Ok(g.scalar(psi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum SampleSource {
    GroundTruth,
    Augmented,
}

impl SampleSource {
    pub fn as_str(self) -> &'static str {
        match self {
            SampleSource::GroundTruth => "GROUND_TRUTH",
            SampleSource::Augmented => "AUGMENTED",
        }
    }
}

/// A future of B together with its courtesy label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub scenario_id: String,
    /// 0 for the ground truth, 1.. for augmented draws.
    pub m: usize,
    pub source: SampleSource,
    pub psi: f64,
    pub trajectory: Trajectory,
}

impl LabeledSample {
    pub fn validate(&self, horizon: usize) -> Result<()> {
        if self.trajectory.len() != horizon {
            bail!(Validation, "label {}#{}: trajectory has {} points, expected {horizon}", self.scenario_id, self.m, self.trajectory.len());
        }
        if !self.psi.is_finite() {
            bail!(Validation, "label {}#{}: psi is not finite", self.scenario_id, self.m);
        }
        let expect = if self.m == 0 { SampleSource::GroundTruth } else { SampleSource::Augmented };
        if self.source != expect {
            bail!(Validation, "label {}#{}: source {} does not match index", self.scenario_id, self.m, self.source.as_str());
        }
        Ok(())
    }
}

/// Labels each scenario's ground-truth future of B plus `m` draws from B's
/// marginal prediction. Draws for a scenario use a stream derived from
/// `seed` and the scenario's position, so results do not depend on batching.
pub fn label_dataset(
    model: &PredictorModel,
    scenarios: &[Scenario],
    reward: RewardSpec,
    m: usize,
    seed: u64,
) -> Result<Vec<LabeledSample>> {
    let mut out = Vec::with_capacity(scenarios.len() * (m + 1));
    for (i, s) in scenarios.iter().enumerate() {
        out.extend(label_scenario(model, s, reward, m, rng::derive(seed, i as u64))?);
    }
    Ok(out)
}

pub fn label_scenario(model: &PredictorModel, scenario: &Scenario, reward: RewardSpec, m: usize, seed: u64) -> Result<Vec<LabeledSample>> {
    let x = &scenario.observation;
    let mut futures = Vec::with_capacity(m + 1);
    futures.push(scenario.future_b.clone());
    if m > 0 {
        futures.extend(model.predict_marginal(x, Agent::B)?.sample(m, seed)?);
    }
    let psis = courtesy_values(model, x, &futures, reward)?;
    futures
        .into_iter()
        .zip(psis)
        .enumerate()
        .map(|(i, (trajectory, psi))| {
            if !psi.is_finite() {
                bail!(Training, "scenario {}: courtesy label {i} is not finite", scenario.id);
            }
            let source = if i == 0 { SampleSource::GroundTruth } else { SampleSource::Augmented };
            Ok(LabeledSample { scenario_id: scenario.id.clone(), m: i, source, psi, trajectory })
        })
        .collect()
}

/// `J(x, y)` for several futures of B in one scene, sharing the marginal
/// term. Labeling and evaluation both go through here, so a replayed label
/// reproduces its value bit for bit.
pub fn courtesy_values(model: &PredictorModel, x: &Observation, futures: &[Trajectory], reward: RewardSpec) -> Result<Vec<f64>> {
    let mut g = Graph::new();
    let op = CourtesyOperator::new(&mut g, model, reward);
    let marg = op.marginal_term(&mut g, x)?;
    let marg = g.scalar(marg);
    futures
        .iter()
        .map(|y| {
            if y.len() != model.horizon() {
                bail!(Shape, "future of B has {} points, predictor horizon is {}", y.len(), model.horizon());
            }
            let y = g.constant(y.to_flat());
            let cond = op.conditional_term(&mut g, x, y)?;
            Ok(g.scalar(cond) - marg)
        })
        .collect()
}

/// Fixed-width histogram over `[min, max]` of the inputs.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Histogram {
    pub min: f64,
    pub max: f64,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn bin_width(&self) -> f64 {
        (self.max - self.min) / self.counts.len() as f64
    }

    /// `[lo, hi)` of bin `i` (the last bin is closed).
    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let w = self.bin_width();
        (self.min + i as f64 * w, if i + 1 == self.counts.len() { self.max } else { self.min + (i + 1) as f64 * w })
    }

    /// Most populated bin (first on ties).
    pub fn mode_bin(&self) -> usize {
        let mut best = 0;
        for (i, c) in self.counts.iter().enumerate() {
            if *c > self.counts[best] {
                best = i;
            }
        }
        best
    }

    pub fn bin_of(&self, v: f64) -> Option<usize> {
        if !(v >= self.min && v <= self.max) {
            return None;
        }
        if self.max == self.min {
            return Some(0);
        }
        let i = ((v - self.min) / self.bin_width()) as usize;
        Some(i.min(self.counts.len() - 1))
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

pub fn histogram(values: &[f64], bins: usize) -> Result<Histogram> {
    if values.is_empty() {
        bail!(Validation, "histogram of an empty set");
    }
    if bins == 0 {
        bail!(Validation, "histogram needs at least one bin");
    }
    if values.iter().any(|v| !v.is_finite()) {
        bail!(Validation, "histogram input contains a non-finite value");
    }
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut h = Histogram { min, max, counts: alloc::vec![0; bins] };
    for &v in values {
        let i = h.bin_of(v).expect("value lies within its own range");
        h.counts[i] += 1;
    }
    Ok(h)
}

pub fn courtesy_histogram(samples: &[LabeledSample], bins: usize) -> Result<Histogram> {
    let psi: Vec<f64> = samples.iter().map(|s| s.psi).collect();
    histogram(&psi, bins)
}
