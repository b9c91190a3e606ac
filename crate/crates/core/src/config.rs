//! Flat `key = value` run configuration.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::score::InferenceConfig;
use crate::stream::SplitRatios;
use crate::train::{Negatives, TrainConfig};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "SLADE_SEED";

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub split: SplitRatios,
    pub inference: InferenceConfig,
    pub seed: u64,
    pub data: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            split: SplitRatios::default(),
            inference: InferenceConfig::default(),
            seed: 0,
            data: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

/// Every recognized key, in the order written by [`RunConfig::to_pairs`].
pub const KEYS: &[&str] = &[
    "memory_dim",
    "message_dim",
    "time_dim",
    "neighbors",
    "heads",
    "dropout",
    "time_alpha",
    "time_beta",
    "updater",
    "generator",
    "batch_size",
    "lr",
    "weight_decay",
    "epochs",
    "negatives",
    "w_cs",
    "w_cd",
    "w_gs",
    "w_gd",
    "exclude_self",
    "seed",
    "split_train",
    "split_valid",
    "split_test",
    "infer_batch_size",
    "score_destinations",
    "data",
    "output_dir",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: Display,
{
    value
        .parse()
        .map_err(|e| Error::Config(format!("{key} = '{value}': {e}")))
}

impl RunConfig {
    /// Sets one key; unknown keys are rejected.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let m = &mut self.model;
        let t = &mut self.train;
        match key {
            "memory_dim" => m.memory_dim = parse(key, v)?,
            "message_dim" => m.message_dim = parse(key, v)?,
            "time_dim" => m.time_dim = parse(key, v)?,
            "neighbors" => m.neighbors = parse(key, v)?,
            "heads" => m.heads = parse(key, v)?,
            "dropout" => m.dropout = parse(key, v)?,
            "time_alpha" => m.time_alpha = parse(key, v)?,
            "time_beta" => m.time_beta = parse(key, v)?,
            "updater" => m.updater = parse(key, v)?,
            "generator" => m.generator = parse(key, v)?,
            "batch_size" => t.batch_size = parse(key, v)?,
            "lr" => t.lr = parse(key, v)?,
            "weight_decay" => t.weight_decay = parse(key, v)?,
            "epochs" => t.epochs = parse(key, v)?,
            "negatives" => {
                t.negatives = if v.eq_ignore_ascii_case("full") {
                    Negatives::Full
                } else {
                    Negatives::Sample(parse(key, v)?)
                }
            }
            "w_cs" => t.weights.contrast_source = parse(key, v)?,
            "w_cd" => t.weights.contrast_destination = parse(key, v)?,
            "w_gs" => t.weights.generation_source = parse(key, v)?,
            "w_gd" => t.weights.generation_destination = parse(key, v)?,
            "exclude_self" => t.exclude_self = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "split_train" => self.split.train = parse(key, v)?,
            "split_valid" => self.split.valid = parse(key, v)?,
            "split_test" => self.split.test = parse(key, v)?,
            "infer_batch_size" => self.inference.batch_size = parse(key, v)?,
            "score_destinations" => self.inference.score_destinations = parse(key, v)?,
            "data" => self.data = if v.is_empty() { None } else { Some(PathBuf::from(v)) },
            "output_dir" => self.output_dir = PathBuf::from(v),
            _ => return Err(Error::Config(format!("unknown configuration key '{key}'"))),
        }
        self.train.seed = self.seed;
        Ok(())
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let m = &self.model;
        let t = &self.train;
        let negatives = match t.negatives {
            Negatives::Full => "full".to_string(),
            Negatives::Sample(n) => n.to_string(),
        };
        let values: Vec<String> = vec![
            m.memory_dim.to_string(),
            m.message_dim.to_string(),
            m.time_dim.to_string(),
            m.neighbors.to_string(),
            m.heads.to_string(),
            m.dropout.to_string(),
            m.time_alpha.to_string(),
            m.time_beta.to_string(),
            m.updater.to_string(),
            m.generator.to_string(),
            t.batch_size.to_string(),
            t.lr.to_string(),
            t.weight_decay.to_string(),
            t.epochs.to_string(),
            negatives,
            t.weights.contrast_source.to_string(),
            t.weights.contrast_destination.to_string(),
            t.weights.generation_source.to_string(),
            t.weights.generation_destination.to_string(),
            t.exclude_self.to_string(),
            self.seed.to_string(),
            self.split.train.to_string(),
            self.split.valid.to_string(),
            self.split.test.to_string(),
            self.inference.batch_size.to_string(),
            self.inference.score_destinations.to_string(),
            self.data.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
            self.output_dir.display().to_string(),
        ];
        KEYS.iter().map(|k| k.to_string()).zip(values).collect()
    }

    /// Applies pairs on top of the defaults.
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let mut cfg = RunConfig::default();
        for (k, v) in pairs {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Applies the lines of a config file; errors name the offending line.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |message: String| Error::Parse { line: i + 1, message };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected 'key = value', found '{line}'")))?;
            self.set(k.trim(), v).map_err(|e| at(e.to_string()))?;
        }
        Ok(())
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::parse_text(&text)
    }

    pub fn to_text(&self) -> String {
        self.to_pairs()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    /// Overrides the seed from an environment value such as `SLADE_SEED`.
    pub fn apply_seed_override(&mut self, value: Option<&str>) -> Result<()> {
        match value {
            Some(v) if !v.trim().is_empty() => self.set("seed", v),
            _ => Ok(()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        self.split.validate()?;
        if self.inference.batch_size == 0 {
            return Err(Error::Config("infer_batch_size must be at least 1".into()));
        }
        Ok(())
    }
}
