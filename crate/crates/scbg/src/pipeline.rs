//! Pipeline stages. Each reads its upstream artifacts from the resolved
//! paths, writes its own, and returns a short summary for the terminal.

use std::fmt::Write as _;

use log::{info, warn};
use scbg_core::courtesy::{courtesy_histogram, label_dataset, LabeledSample};
use scbg_core::eval::{ablation_harness, ablation_variants, evaluate, DatasetStats};
use scbg_core::predictor::{prediction_metrics, train_predictor, PredictionMode, PredictorModel};
use scbg_core::range::{coverage, train_range};
use scbg_core::scbg::{group_labels, train_scbg, LabeledScenario};
use scbg_core::synth::synth_scenarios;
use scbg_core::{Agent, DatasetSplit, Scenario};

use crate::checkpoint;
use crate::config::{Artifacts, PipelineConfig, Stage};
use crate::dataset;
use crate::error::{Error, Result};
use crate::fsio::{self, Provenance};
use crate::labels;
use crate::logs;
use crate::render::render_scenario;
use crate::report::{self, AblationFile, ReportFile, REPORT_VERSION};

/// Quantiles drawn by `render` when none are given.
pub const DEFAULT_RENDER_QUANTILES: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
/// Scenes drawn by `pipeline`.
pub const PIPELINE_RENDER_SCENES: usize = 3;

struct Run {
    config: PipelineConfig,
    paths: Artifacts,
    provenance: Provenance,
}

impl Run {
    fn new(config: &PipelineConfig) -> Result<Self> {
        config.validate()?;
        let config = config.seeded();
        Ok(Self { paths: config.artifacts(), provenance: config.provenance(), config })
    }

    fn dataset(&self) -> Result<DatasetSplit> {
        dataset::load_dataset(&self.paths.dataset)
    }

    fn predictor(&self) -> Result<PredictorModel> {
        let (model, p) = checkpoint::load_predictor(&self.paths.predictor)?;
        self.check_provenance("predictor", &p);
        Ok(model)
    }

    fn labels(&self, split: &DatasetSplit) -> Result<(Vec<LabeledSample>, Vec<LabeledSample>)> {
        let dt = dataset_dt(split);
        Ok((labels::load_labels(&self.paths.train_labels, dt)?, labels::load_labels(&self.paths.validation_labels, dt)?))
    }

    fn check_provenance(&self, what: &str, p: &Provenance) {
        if *p != self.provenance {
            warn!("{what} was produced under a different configuration (seed {}, config {})", p.seed, p.config_hash);
        }
    }
}

fn dataset_dt(split: &DatasetSplit) -> f64 {
    split.train.first().or(split.validation.first()).map_or(0.5, |s| s.observation.dt())
}

fn grouped<'a>(scenarios: &'a [Scenario], labels: &'a [LabeledSample]) -> Result<Vec<LabeledScenario<'a>>> {
    Ok(group_labels(scenarios, labels)?)
}

pub fn gen_data(config: &PipelineConfig) -> Result<String> {
    let run = Run::new(config)?;
    let c = &run.config;
    let synth = |n: usize, stage: Stage| -> Result<Vec<Scenario>> {
        if n == 0 {
            return Ok(Vec::new());
        }
        Ok(synth_scenarios(&c.data.synth, c.stage_seed(stage), n)?)
    };
    let split =
        DatasetSplit { train: synth(c.data.train, Stage::TrainData)?, validation: synth(c.data.validation, Stage::ValidationData)? };
    dataset::save_dataset(&split, &run.paths.dataset, Some(&run.provenance))?;
    Ok(format!("wrote {} train and {} validation scenarios to {}", split.train.len(), split.validation.len(), run.paths.dataset.display()))
}

pub fn train_predictor_stage(config: &PipelineConfig) -> Result<String> {
    let run = Run::new(config)?;
    let split = run.dataset()?;
    let t = train_predictor(&split.train, &split.validation, &run.config.predictor)?;
    checkpoint::save_predictor(&run.paths.predictor, &t.model, &run.provenance)?;
    logs::write_predictor_log(&run.paths.predictor_log, &t.log)?;
    fsio::write_sidecar(&run.paths.predictor_log, &run.provenance)?;
    Ok(format!(
        "predictor: {} parameters, validation NLL {:.3} -> {:.3}; checkpoint {}",
        t.model.param_count(),
        t.initial_validation_nll,
        t.final_validation_nll,
        run.paths.predictor.display()
    ))
}

pub fn label(config: &PipelineConfig) -> Result<String> {
    let run = Run::new(config)?;
    let split = run.dataset()?;
    let predictor = run.predictor()?;
    let lc = run.config.labels;
    let train = label_dataset(&predictor, &split.train, lc.reward, lc.m, run.config.stage_seed(Stage::TrainLabels))?;
    let validation = label_dataset(&predictor, &split.validation, lc.reward, lc.m, run.config.stage_seed(Stage::ValidationLabels))?;
    for (path, samples) in [(&run.paths.train_labels, &train), (&run.paths.validation_labels, &validation)] {
        labels::save_labels(path, samples)?;
        fsio::write_sidecar(path, &run.provenance)?;
    }
    let mut s = format!("labeled {} train and {} validation futures (M = {})\n", train.len(), validation.len(), lc.m);
    let all: Vec<LabeledSample> = train.iter().chain(&validation).cloned().collect();
    let h = courtesy_histogram(&all, run.config.eval.histogram_bins)?;
    let mode = h.mode_bin();
    let peak = h.counts[mode].max(1);
    for (i, &n) in h.counts.iter().enumerate() {
        let (lo, hi) = h.bin_edges(i);
        let mark = if i == mode { " <- mode" } else { "" };
        let _ = writeln!(s, "{lo:>8.2} .. {hi:>6.2} {n:>6} {}{mark}", "#".repeat(n * 40 / peak));
    }
    Ok(s)
}

pub fn train_scbg_stage(config: &PipelineConfig) -> Result<String> {
    let run = Run::new(config)?;
    let split = run.dataset()?;
    let (lt, lv) = run.labels(&split)?;
    let predictor = run.predictor()?;
    let gt = grouped(&split.train, &lt)?;
    let gv = grouped(&split.validation, &lv)?;
    let t = train_scbg(&gt, &gv, &predictor, &run.config.scbg)?;
    checkpoint::save_generator(&run.paths.generator, &t.model, &run.provenance)?;
    logs::write_scbg_log(&run.paths.scbg_log, &t.log)?;
    fsio::write_sidecar(&run.paths.scbg_log, &run.provenance)?;
    Ok(format!(
        "generator: {} parameters, validation loss {:.4} -> {:.4}{}; checkpoint {}",
        t.model.param_count(),
        t.initial_validation_loss,
        t.final_validation_loss,
        if t.stratified { "" } else { " (unstratified batches)" },
        run.paths.generator.display()
    ))
}

pub fn train_range_stage(config: &PipelineConfig) -> Result<String> {
    let run = Run::new(config)?;
    let split = run.dataset()?;
    let (lt, lv) = run.labels(&split)?;
    let predictor = run.predictor()?;
    let gt = grouped(&split.train, &lt)?;
    let gv = grouped(&split.validation, &lv)?;
    let t = train_range(&gt, predictor.layout, &predictor.scene_encoder, &run.config.range)?;
    checkpoint::save_range(&run.paths.range, &t.model, &run.provenance)?;
    logs::write_range_log(&run.paths.range_log, &t.log)?;
    fsio::write_sidecar(&run.paths.range_log, &run.provenance)?;
    let mut s = format!("range: pinball loss {:.4} -> {:.4}; checkpoint {}", t.initial_loss, t.final_loss, run.paths.range.display());
    if !gv.is_empty() {
        report::write_range_eval(&run.paths.range_eval, &t.model, &gv)?;
        fsio::write_sidecar(&run.paths.range_eval, &run.provenance)?;
        let c = coverage(&t.model, &gv)?;
        let _ = write!(s, "\nvalidation coverage: below q0.1 {:.3}, below q0.9 {:.3}", c.below_lo, c.below_hi);
    }
    Ok(s)
}

pub fn eval(config: &PipelineConfig, ablation: bool) -> Result<String> {
    let run = Run::new(config)?;
    let split = run.dataset()?;
    let (lt, lv) = run.labels(&split)?;
    let predictor = run.predictor()?;
    let (generator, gp) = checkpoint::load_generator(&run.paths.generator)?;
    run.check_provenance("generator", &gp);
    let (range, rp) = checkpoint::load_range(&run.paths.range)?;
    run.check_provenance("range model", &rp);
    let gv = grouped(&split.validation, &lv)?;
    if gv.is_empty() {
        return Err(Error::Core(scbg_core::Error::Validation("evaluation needs a non-empty validation split".into())));
    }
    let all: Vec<LabeledSample> = lt.iter().chain(&lv).cloned().collect();
    let stats = DatasetStats::of(&all)?;
    let ec = &run.config.eval;
    let rep = evaluate(&generator, &predictor, &range, &stats, &gv, ec)?;
    let file = ReportFile {
        version: REPORT_VERSION,
        provenance: run.provenance.clone(),
        stats,
        coverage: coverage(&range, &gv)?,
        marginal_top1_ade: prediction_metrics(&predictor, &split.validation, PredictionMode::Marginal(Agent::B))?.ade,
        report: rep,
    };
    report::save_report(&run.paths.report_json, &run.paths.report_txt, &run.paths.report_csv, &file)?;
    let mut s = report::text_table(&file);
    if ablation {
        info!("training ablation variants");
        let gt = grouped(&split.train, &lt)?;
        let rows = ablation_harness(&gt, &gv, &predictor, &range, &stats, &ablation_variants(&run.config.scbg), ec);
        let af = AblationFile::new(run.provenance.clone(), &rows);
        fsio::write_json(&run.paths.ablation_json, &af)?;
        let table = report::ablation_table(&af);
        let txt = run.paths.ablation_json.with_extension("txt");
        fsio::write(&txt, &table)?;
        fsio::write_sidecar(&txt, &run.provenance)?;
        let _ = write!(s, "\n{table}");
    }
    Ok(s)
}

/// Renders the named scenarios, or the first few validation scenes when
/// `ids` is empty.
pub fn render(config: &PipelineConfig, ids: &[String], quantiles: &[f64]) -> Result<String> {
    let run = Run::new(config)?;
    if let Some(q) = quantiles.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(Error::Invalid(format!("quantile {q} lies outside [0, 1]")));
    }
    let split = run.dataset()?;
    let predictor = run.predictor()?;
    let (generator, _) = checkpoint::load_generator(&run.paths.generator)?;
    let (range, _) = checkpoint::load_range(&run.paths.range)?;
    let pool: Vec<&Scenario> = split.validation.iter().chain(&split.train).collect();
    let scenes: Vec<&Scenario> = if ids.is_empty() {
        pool.iter().copied().take(PIPELINE_RENDER_SCENES).collect()
    } else {
        ids.iter()
            .map(|id| {
                pool.iter().copied().find(|s| &s.id == id).ok_or_else(|| {
                    Error::Core(scbg_core::Error::Validation(format!("scenario {id} is not in {}", run.paths.dataset.display())))
                })
            })
            .collect::<Result<_>>()?
    };
    let quantiles = if quantiles.is_empty() { &DEFAULT_RENDER_QUANTILES[..] } else { quantiles };
    let mut s = String::new();
    for scene in scenes {
        let r = render_scenario(scene, &generator, &range, &predictor, run.config.eval.reward, quantiles)?;
        let path = run.paths.render_dir.join(format!("{}.svg", scene.id));
        fsio::write(&path, &r.svg)?;
        fsio::write_sidecar(&path, &run.provenance)?;
        let realized: Vec<String> = r.quantiles.iter().map(|q| format!("{:+.3}", q.realized)).collect();
        let _ = writeln!(s, "{}: realized courtesy [{}]", path.display(), realized.join(", "));
    }
    Ok(s)
}

/// Every stage in order, then the default renders; `emit` receives each
/// stage's summary as it finishes.
pub fn pipeline(config: &PipelineConfig, ablation: bool, mut emit: impl FnMut(&str)) -> Result<()> {
    Run::new(config)?;
    config.save_effective()?;
    emit(&gen_data(config)?);
    emit(&train_predictor_stage(config)?);
    emit(&label(config)?);
    emit(&train_scbg_stage(config)?);
    emit(&train_range_stage(config)?);
    emit(&eval(config, ablation)?);
    emit(&render(config, &[], &[])?);
    Ok(())
}
