//! Controllability and realism metrics, the courtesy input strategies, the
//! quantile-sweep correlation and the ablation harness.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // std, when linked, provides these methods inherently
use num_traits::Float;

use crate::courtesy::{courtesy_values, histogram, Histogram, LabeledSample, RewardSpec};
use crate::error::{bail, Error, Result};
use crate::predictor::PredictorModel;
use crate::range::{quantile_to_courtesy, RangeModel, TAU_HI, TAU_LO};
use crate::scbg::{train_scbg, GeneratorModel, LabeledScenario, ScbgTrainConfig};
use crate::stats::{pearson, MeanStd};
use crate::types::{average_displacement, Point, Scenario, Trajectory};

/// How the commanded courtesy values of a scene are chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "tag", rename_all = "SCREAMING_SNAKE_CASE"))]
pub enum PsiStrategy {
    /// The labels of the scene's ground-truth and augmented futures.
    Data,
    /// Predicted-range values at quantiles `0.1, 0.1 + step, ..., 0.9`.
    Range { step: f64 },
    /// `psi_min, psi_min + step, ..., psi_max` over the whole label set.
    Arbitrary { step: f64 },
}

impl PsiStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            PsiStrategy::Data => "DATA",
            PsiStrategy::Range { .. } => "RANGE",
            PsiStrategy::Arbitrary { .. } => "ARBITRARY",
        }
    }

    /// Arbitrary grid of `points` values spanning `stats`.
    pub fn arbitrary(stats: &DatasetStats, points: usize) -> Result<Self> {
        if points < 2 {
            bail!(Validation, "an arbitrary grid needs at least two points");
        }
        let step = (stats.psi_max - stats.psi_min) / (points - 1) as f64;
        Self::Arbitrary { step }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        match self {
            PsiStrategy::Range { step } if !(step > 0.0 && step <= TAU_HI - TAU_LO) => {
                bail!(Validation, "range step {step} outside (0, 0.8]")
            }
            PsiStrategy::Arbitrary { step } if !(step > 0.0) => bail!(Validation, "arbitrary step {step} must be positive"),
            s => Ok(s),
        }
    }
}

/// Extremes of courtesy over a label set.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetStats {
    pub psi_min: f64,
    pub psi_max: f64,
}

impl DatasetStats {
    /// Over ground-truth and augmented labels alike.
    pub fn of(labels: &[LabeledSample]) -> Result<Self> {
        if labels.is_empty() {
            bail!(Validation, "no labels to take courtesy extremes from");
        }
        let psi_min = labels.iter().map(|l| l.psi).fold(f64::INFINITY, f64::min);
        let psi_max = labels.iter().map(|l| l.psi).fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { psi_min, psi_max })
    }
}

/// `start, start + step, ...` up to `end` (inclusive up to rounding).
fn grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step + 1e-9).floor().max(0.0) as usize;
    (0..=n).map(|k| start + k as f64 * step).collect()
}

/// Commanded courtesy values of one scene.
pub fn build_psi_set(
    strategy: &PsiStrategy,
    group: &LabeledScenario<'_>,
    range: Option<&RangeModel>,
    stats: Option<&DatasetStats>,
) -> Result<Vec<f64>> {
    match strategy.validated()? {
        PsiStrategy::Data => Ok(group.samples.iter().map(|s| s.psi).collect()),
        PsiStrategy::Range { step } => {
            let Some(model) = range else {
                bail!(Contract, "RANGE strategy needs a range model");
            };
            let r = model.predict_range(&group.scenario.observation)?;
            grid(TAU_LO, TAU_HI, step).into_iter().map(|q| quantile_to_courtesy(&r, q)).collect()
        }
        PsiStrategy::Arbitrary { step } => {
            let Some(stats) = stats else {
                bail!(Contract, "ARBITRARY strategy needs dataset courtesy extremes");
            };
            Ok(grid(stats.psi_min, stats.psi_max, step))
        }
    }
}

/// Anything that produces one future of B per commanded courtesy.
pub trait Generator {
    fn generate(&self, scenario: &Scenario, psis: &[f64]) -> Result<Vec<Trajectory>>;
}

impl Generator for GeneratorModel {
    fn generate(&self, scenario: &Scenario, psis: &[f64]) -> Result<Vec<Trajectory>> {
        self.generate_many(&scenario.observation, psis)
    }
}

/// Returns, for each commanded value, the labeled future of the scene whose
/// label is nearest (first on ties).
#[derive(Debug, Clone)]
pub struct ReplayGenerator<'a> {
    groups: Vec<(&'a str, &'a [&'a LabeledSample])>,
}

impl<'a> ReplayGenerator<'a> {
    pub fn new(groups: &'a [LabeledScenario<'a>]) -> Self {
        let mut groups: Vec<_> = groups.iter().map(|g| (g.scenario.id.as_str(), g.samples.as_slice())).collect();
        groups.sort_by(|a, b| a.0.cmp(b.0));
        Self { groups }
    }
}

impl Generator for ReplayGenerator<'_> {
    fn generate(&self, scenario: &Scenario, psis: &[f64]) -> Result<Vec<Trajectory>> {
        let Ok(k) = self.groups.binary_search_by(|g| g.0.cmp(scenario.id.as_str())) else {
            bail!(Contract, "no labels for scenario {}", scenario.id);
        };
        let samples = self.groups[k].1;
        Ok(psis
            .iter()
            .map(|&psi| {
                let mut best = samples[0];
                for s in &samples[1..] {
                    if (s.psi - psi).abs() < (best.psi - psi).abs() {
                        best = s;
                    }
                }
                best.trajectory.clone()
            })
            .collect())
    }
}

/// Translates every output of another generator.
#[derive(Debug, Clone)]
pub struct OffsetGenerator<G> {
    pub inner: G,
    pub offset: Point,
}

impl<G: Generator> Generator for OffsetGenerator<G> {
    fn generate(&self, scenario: &Scenario, psis: &[f64]) -> Result<Vec<Trajectory>> {
        Ok(self.inner.generate(scenario, psis)?.into_iter().map(|t| t.translated(self.offset)).collect())
    }
}

/// Ignores the commanded courtesy: always generates for a fixed value.
#[derive(Debug, Clone)]
pub struct FixedPsiGenerator<G> {
    pub inner: G,
    pub psi: f64,
}

impl<G: Generator> Generator for FixedPsiGenerator<G> {
    fn generate(&self, scenario: &Scenario, psis: &[f64]) -> Result<Vec<Trajectory>> {
        let one = self.inner.generate(scenario, &[self.psi])?;
        Ok(vec![one[0].clone(); psis.len()])
    }
}

/// Scene-averaged metric with its per-scene values (in input order).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Metric {
    pub summary: MeanStd,
    pub per_scenario: Vec<f64>,
}

impl Metric {
    fn from_values(per_scenario: Vec<f64>) -> Result<Self> {
        if per_scenario.is_empty() {
            bail!(Validation, "no scenarios to evaluate");
        }
        if let Some(i) = per_scenario.iter().position(|v| !v.is_finite()) {
            bail!(Training, "metric is not finite for scenario #{i}");
        }
        Ok(Self { summary: MeanStd::of(&per_scenario), per_scenario })
    }

    pub fn mean(&self) -> f64 {
        self.summary.mean
    }
}

/// Inputs shared by the courtesy metrics.
#[derive(Clone, Copy)]
pub struct EvalContext<'a> {
    pub predictor: &'a PredictorModel,
    pub range: Option<&'a RangeModel>,
    pub stats: Option<&'a DatasetStats>,
    pub reward: RewardSpec,
}

/// Per scene, the mean of `(psi - J(x, g(x, psi)))^2` over the strategy's
/// values; then mean and spread over scenes.
pub fn courtesy_mse<G: Generator + ?Sized>(
    generator: &G,
    ctx: &EvalContext<'_>,
    groups: &[LabeledScenario<'_>],
    strategy: &PsiStrategy,
) -> Result<Metric> {
    if groups.is_empty() {
        bail!(Validation, "no scenarios to evaluate");
    }
    let per = groups
        .iter()
        .map(|gr| {
            let psis = build_psi_set(strategy, gr, ctx.range, ctx.stats)?;
            let trajs = generator.generate(gr.scenario, &psis)?;
            let realized = courtesy_values(ctx.predictor, &gr.scenario.observation, &trajs, ctx.reward)?;
            let se: f64 = psis.iter().zip(&realized).map(|(p, j)| (p - j) * (p - j)).sum();
            Ok(se / psis.len() as f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Metric::from_values(per)
}

/// ADE between `g(x, psi_0)` and B's ground truth, where `psi_0` is the
/// ground-truth label of the scene.
pub fn traj_ade<G: Generator + ?Sized>(generator: &G, groups: &[LabeledScenario<'_>]) -> Result<Metric> {
    let per = groups
        .iter()
        .map(|gr| {
            let gt = &gr.samples[0].trajectory;
            let y = generator.generate(gr.scenario, &[gr.psi0()])?;
            if y[0].len() != gt.len() {
                bail!(Shape, "generated {} points, ground truth has {}", y[0].len(), gt.len());
            }
            Ok(average_displacement(y[0].points(), gt.points()))
        })
        .collect::<Result<Vec<f64>>>()?;
    Metric::from_values(per)
}

/// Pooled correlation of commanded quantile and realized courtesy.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorrelationReport {
    pub overall: f64,
    /// Over scenes with `|psi_0| >= threshold`; `None` when fewer than two
    /// scenes qualify or the pool has no variance.
    pub high: Option<f64>,
    pub threshold: f64,
    pub scenes: usize,
    pub high_scenes: usize,
    /// `(scene index, q, realized psi)`.
    pub pairs: Vec<(usize, f64, f64)>,
}

pub fn default_quantile_grid() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

pub fn quantile_sweep_correlation<G: Generator + ?Sized>(
    generator: &G,
    predictor: &PredictorModel,
    range: &RangeModel,
    groups: &[LabeledScenario<'_>],
    grid: &[f64],
    threshold: f64,
    reward: RewardSpec,
) -> Result<CorrelationReport> {
    if groups.is_empty() {
        bail!(Validation, "no scenarios to evaluate");
    }
    if grid.iter().any(|q| !(0.0..=1.0).contains(q)) {
        bail!(Validation, "quantile grid must lie in [0, 1]");
    }
    let mut pairs = Vec::with_capacity(groups.len() * grid.len());
    for (i, gr) in groups.iter().enumerate() {
        let r = range.predict_range(&gr.scenario.observation)?;
        let psis: Vec<f64> = grid.iter().map(|&q| quantile_to_courtesy(&r, q)).collect::<Result<_>>()?;
        let trajs = generator.generate(gr.scenario, &psis)?;
        let realized = courtesy_values(predictor, &gr.scenario.observation, &trajs, reward)?;
        pairs.extend(grid.iter().zip(realized).map(|(&q, j)| (i, q, j)));
    }
    let corr = |keep: &dyn Fn(usize) -> bool| -> Result<f64> {
        let (q, j): (Vec<f64>, Vec<f64>) = pairs.iter().filter(|p| keep(p.0)).map(|p| (p.1, p.2)).unzip();
        pearson(&q, &j)
    };
    let overall = corr(&|_| true)?;
    let is_high = |i: usize| groups[i].psi0().abs() >= threshold;
    let high_scenes = (0..groups.len()).filter(|&i| is_high(i)).count();
    let high = match corr(&is_high) {
        Ok(r) if high_scenes >= 2 => Some(r),
        Ok(_) | Err(Error::UndefinedCorrelation(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(CorrelationReport { overall, high, threshold, scenes: groups.len(), high_scenes, pairs })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EvalConfig {
    /// Quantile spacing of the RANGE strategy.
    pub range_step: f64,
    /// Number of values in the ARBITRARY grid.
    pub arbitrary_points: usize,
    pub quantile_grid: Vec<f64>,
    /// `|psi_0|` defining the high-courtesy subset (m/s).
    pub high_threshold: f64,
    pub histogram_bins: usize,
    pub reward: RewardSpec,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            range_step: 0.2,
            arbitrary_points: 9,
            quantile_grid: default_quantile_grid(),
            high_threshold: 2.0,
            histogram_bins: 20,
            reward: RewardSpec::AverageSpeed,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StrategyResult {
    pub strategy: PsiStrategy,
    pub name: String,
    pub mse: Metric,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenarioRow {
    pub scenario_id: String,
    pub psi0: f64,
    pub traj_ade: f64,
    /// Courtesy MSE per strategy, in [`EvalReport::courtesy_mse`] order.
    pub courtesy_mse: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub courtesy_mse: Vec<StrategyResult>,
    pub traj_ade: MeanStd,
    pub correlation: CorrelationReport,
    /// Of the evaluation set's labels.
    pub histogram: Histogram,
    pub rows: Vec<ScenarioRow>,
}

impl EvalReport {
    pub fn mse(&self, name: &str) -> Option<f64> {
        self.courtesy_mse.iter().find(|s| s.name == name).map(|s| s.mse.mean())
    }
}

/// The three strategies with the configured spacings.
pub fn strategies(config: &EvalConfig, stats: &DatasetStats) -> Result<Vec<PsiStrategy>> {
    Ok(vec![
        PsiStrategy::Data,
        PsiStrategy::Range { step: config.range_step }.validated()?,
        PsiStrategy::arbitrary(stats, config.arbitrary_points)?,
    ])
}

/// All metrics of one generator on one labeled set.
pub fn evaluate<G: Generator + ?Sized>(
    generator: &G,
    predictor: &PredictorModel,
    range: &RangeModel,
    stats: &DatasetStats,
    groups: &[LabeledScenario<'_>],
    config: &EvalConfig,
) -> Result<EvalReport> {
    if groups.is_empty() {
        bail!(Validation, "evaluation set is empty");
    }
    let ctx = EvalContext { predictor, range: Some(range), stats: Some(stats), reward: config.reward };
    let courtesy_mse = strategies(config, stats)?
        .into_iter()
        .map(|s| Ok(StrategyResult { strategy: s, name: s.name().to_string(), mse: courtesy_mse(generator, &ctx, groups, &s)? }))
        .collect::<Result<Vec<_>>>()?;
    let ade = traj_ade(generator, groups)?;
    let correlation =
        quantile_sweep_correlation(generator, predictor, range, groups, &config.quantile_grid, config.high_threshold, config.reward)?;
    let psis: Vec<f64> = groups.iter().flat_map(|g| g.samples.iter().map(|s| s.psi)).collect();
    let histogram = histogram(&psis, config.histogram_bins)?;
    let rows = groups
        .iter()
        .enumerate()
        .map(|(i, g)| ScenarioRow {
            scenario_id: g.scenario.id.clone(),
            psi0: g.psi0(),
            traj_ade: ade.per_scenario[i],
            courtesy_mse: courtesy_mse.iter().map(|s| s.mse.per_scenario[i]).collect(),
        })
        .collect();
    Ok(EvalReport { courtesy_mse, traj_ade: ade.summary, correlation, histogram, rows })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AblationVariant {
    pub name: String,
    pub config: ScbgTrainConfig,
}

/// Baseline (no augmentation, no courtesy loss), plus augmentation, plus
/// courtesy loss; everything else taken from `full`.
pub fn ablation_variants(full: &ScbgTrainConfig) -> Vec<AblationVariant> {
    let baseline = ScbgTrainConfig { alpha: 0.0, beta: 0.0, augmentations: 0, ..*full };
    let augmented = ScbgTrainConfig { beta: 0.0, ..*full };
    vec![
        AblationVariant { name: "baseline".to_string(), config: baseline },
        AblationVariant { name: "+augmentation".to_string(), config: augmented },
        AblationVariant { name: "+courtesy_loss".to_string(), config: *full },
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: AblationVariant,
    pub report: Result<EvalReport>,
}

/// Trains each variant on the same data and seed and evaluates it; a
/// failing cell is reported without stopping the others.
pub fn ablation_harness(
    train: &[LabeledScenario<'_>],
    validation: &[LabeledScenario<'_>],
    predictor: &PredictorModel,
    range: &RangeModel,
    stats: &DatasetStats,
    variants: &[AblationVariant],
    config: &EvalConfig,
) -> Vec<AblationRow> {
    variants
        .iter()
        .map(|v| {
            let report = train_scbg(train, validation, predictor, &v.config)
                .and_then(|t| evaluate(&t.model, predictor, range, stats, validation, config));
            if let Err(e) = &report {
                log::warn!("ablation variant {} failed: {e}", v.name);
            }
            AblationRow { variant: v.clone(), report }
        })
        .collect()
}
