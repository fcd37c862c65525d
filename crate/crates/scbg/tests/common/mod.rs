#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use scbg::config::PipelineConfig;

/// A configuration small enough to run the whole pipeline in seconds.
pub fn small_config(out: &Path) -> PipelineConfig {
    let mut c = PipelineConfig { seed: 3, ..PipelineConfig::default() };
    c.paths.out_dir = out.to_path_buf();
    c.data.train = 40;
    c.data.validation = 12;
    c.data.synth.history_len = 6;
    c.data.synth.future_len = 8;
    c.predictor.components = 2;
    c.predictor.hidden = 16;
    c.predictor.embedding = 8;
    c.predictor.future_embedding = 4;
    c.predictor.steps = 120;
    c.predictor.batch_size = 8;
    c.labels.m = 4;
    c.scbg.hidden = 16;
    c.scbg.batch_size = 8;
    c.scbg.steps = 60;
    c.range.steps = 100;
    c
}

pub fn write_config(dir: &Path, config: &PipelineConfig) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, config.to_toml()).unwrap();
    path
}

pub fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scbg")).args(args).output().unwrap()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}
