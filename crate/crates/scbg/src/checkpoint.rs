//! JSON checkpoints: a versioned header plus every network's layer shapes and
//! flat parameter arrays. Floats use shortest round-trip decimal encoding, so
//! saving and loading is exact.

use std::path::Path;

use scbg_core::features::FeatureLayout;
use scbg_core::nn::{Layer, LayerSpec, Mlp};
use scbg_core::predictor::PredictorModel;
use scbg_core::range::{RangeModel, TAU_HI, TAU_LO};
use scbg_core::scbg::{GeneratorModel, PSI_SCALE};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio::{self, Provenance};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkRecord {
    pub name: String,
    pub arch: Vec<LayerSpec>,
    /// `weight_0, bias_0, weight_1, ...`; weights row-major.
    pub params: Vec<Vec<f64>>,
}

impl NetworkRecord {
    pub fn from_mlp(name: &str, mlp: &Mlp) -> Self {
        Self { name: name.to_string(), arch: mlp.arch(), params: mlp.tensors().into_iter().map(<[f64]>::to_vec).collect() }
    }

    pub fn to_mlp(&self) -> scbg_core::Result<Mlp> {
        if self.params.len() != 2 * self.arch.len() {
            return Err(scbg_core::Error::Shape(format!(
                "network {}: {} layers need {} parameter arrays, found {}",
                self.name,
                self.arch.len(),
                2 * self.arch.len(),
                self.params.len()
            )));
        }
        let layers = self
            .arch
            .iter()
            .zip(self.params.chunks_exact(2))
            .map(|(&spec, p)| Layer { spec, weight: p[0].clone(), bias: p[1].clone() })
            .collect();
        Mlp::from_layers(layers)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint<H> {
    pub version: u32,
    pub kind: String,
    pub header: H,
    pub provenance: Provenance,
    pub networks: Vec<NetworkRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictorHeader {
    pub components: usize,
    pub history_len: usize,
    pub horizon: usize,
    pub dt: f64,
    pub layout_version: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorHeader {
    pub history_len: usize,
    pub horizon: usize,
    pub dt: f64,
    pub layout_version: u32,
    pub psi_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeHeader {
    pub history_len: usize,
    pub horizon: usize,
    pub layout_version: u32,
    pub psi_scale: f64,
    pub tau_lo: f64,
    pub tau_hi: f64,
}

fn corrupt(path: &Path, message: impl Into<String>) -> Error {
    Error::Corrupt { path: path.to_path_buf(), message: message.into() }
}

/// Fields checked before the kind-specific header is decoded.
#[derive(Deserialize)]
struct Envelope {
    version: u32,
    kind: String,
}

fn load<H: for<'de> Deserialize<'de>>(path: &Path, kind: &str, what: &'static str, step: &'static str) -> Result<Checkpoint<H>> {
    let text = fsio::read_artifact(path, what, step)?;
    let env: Envelope = fsio::parse_json(path, &text)?;
    if env.version != CHECKPOINT_VERSION {
        return Err(corrupt(path, format!("checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})", env.version)));
    }
    if env.kind != kind {
        return Err(corrupt(path, format!("expected a {kind} checkpoint, found {}", env.kind)));
    }
    fsio::parse_json(path, &text)
}

fn network(path: &Path, networks: &[NetworkRecord], name: &str) -> Result<Mlp> {
    let rec = networks.iter().find(|n| n.name == name).ok_or_else(|| corrupt(path, format!("network {name} is missing")))?;
    rec.to_mlp().map_err(|e| corrupt(path, e.to_string()))
}

fn check_layout(path: &Path, version: u32) -> Result<()> {
    if version != FeatureLayout::VERSION {
        return Err(corrupt(path, format!("feature layout version {version}, this build uses {}", FeatureLayout::VERSION)));
    }
    Ok(())
}

pub fn save_predictor(path: &Path, model: &PredictorModel, provenance: &Provenance) -> Result<()> {
    let ck = Checkpoint {
        version: CHECKPOINT_VERSION,
        kind: "predictor".into(),
        header: PredictorHeader {
            components: model.components,
            history_len: model.layout.history_len,
            horizon: model.layout.future_len,
            dt: model.dt,
            layout_version: FeatureLayout::VERSION,
        },
        provenance: provenance.clone(),
        networks: vec![
            NetworkRecord::from_mlp("scene_encoder", &model.scene_encoder),
            NetworkRecord::from_mlp("future_encoder", &model.future_encoder),
            NetworkRecord::from_mlp("decoder", &model.decoder),
        ],
    };
    fsio::write_json(path, &ck)
}

pub fn load_predictor(path: &Path) -> Result<(PredictorModel, Provenance)> {
    let ck: Checkpoint<PredictorHeader> = load(path, "predictor", "predictor checkpoint", "train-predictor")?;
    let h = ck.header;
    check_layout(path, h.layout_version)?;
    let model = PredictorModel {
        layout: FeatureLayout::new(h.history_len, h.horizon),
        components: h.components,
        dt: h.dt,
        scene_encoder: network(path, &ck.networks, "scene_encoder")?,
        future_encoder: network(path, &ck.networks, "future_encoder")?,
        decoder: network(path, &ck.networks, "decoder")?,
    };
    model.validate().map_err(|e| corrupt(path, e.to_string()))?;
    Ok((model, ck.provenance))
}

pub fn save_generator(path: &Path, model: &GeneratorModel, provenance: &Provenance) -> Result<()> {
    let ck = Checkpoint {
        version: CHECKPOINT_VERSION,
        kind: "generator".into(),
        header: GeneratorHeader {
            history_len: model.layout.history_len,
            horizon: model.layout.future_len,
            dt: model.dt,
            layout_version: FeatureLayout::VERSION,
            psi_scale: PSI_SCALE,
        },
        provenance: provenance.clone(),
        networks: vec![NetworkRecord::from_mlp("encoder", &model.encoder), NetworkRecord::from_mlp("decoder", &model.decoder)],
    };
    fsio::write_json(path, &ck)
}

pub fn load_generator(path: &Path) -> Result<(GeneratorModel, Provenance)> {
    let ck: Checkpoint<GeneratorHeader> = load(path, "generator", "generator checkpoint", "train-scbg")?;
    let h = ck.header;
    check_layout(path, h.layout_version)?;
    if h.psi_scale != PSI_SCALE {
        return Err(corrupt(path, format!("courtesy input scale {} differs from {PSI_SCALE}", h.psi_scale)));
    }
    let model = GeneratorModel {
        layout: FeatureLayout::new(h.history_len, h.horizon),
        dt: h.dt,
        encoder: network(path, &ck.networks, "encoder")?,
        decoder: network(path, &ck.networks, "decoder")?,
    };
    model.validate().map_err(|e| corrupt(path, e.to_string()))?;
    Ok((model, ck.provenance))
}

pub fn save_range(path: &Path, model: &RangeModel, provenance: &Provenance) -> Result<()> {
    let ck = Checkpoint {
        version: CHECKPOINT_VERSION,
        kind: "range".into(),
        header: RangeHeader {
            history_len: model.layout.history_len,
            horizon: model.layout.future_len,
            layout_version: FeatureLayout::VERSION,
            psi_scale: PSI_SCALE,
            tau_lo: TAU_LO,
            tau_hi: TAU_HI,
        },
        provenance: provenance.clone(),
        networks: vec![NetworkRecord::from_mlp("encoder", &model.encoder), NetworkRecord::from_mlp("head", &model.head)],
    };
    fsio::write_json(path, &ck)
}

pub fn load_range(path: &Path) -> Result<(RangeModel, Provenance)> {
    let ck: Checkpoint<RangeHeader> = load(path, "range", "range checkpoint", "train-range")?;
    let h = ck.header;
    check_layout(path, h.layout_version)?;
    if h.psi_scale != PSI_SCALE || h.tau_lo != TAU_LO || h.tau_hi != TAU_HI {
        return Err(corrupt(path, "quantile levels or courtesy scale differ from this build"));
    }
    let model = RangeModel {
        layout: FeatureLayout::new(h.history_len, h.horizon),
        encoder: network(path, &ck.networks, "encoder")?,
        head: network(path, &ck.networks, "head")?,
    };
    model.validate().map_err(|e| corrupt(path, e.to_string()))?;
    Ok((model, ck.provenance))
}
