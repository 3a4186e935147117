//! Flat `key = value` run configuration with `#` comments.
//!
//! Keys: `root`, `index`, `arch`, `out_dir`, `init`, `policy`, `split_seed`,
//! every model field (`num_classes`, `width_multiplier`, `input_size`,
//! `se_reduction`, `dropout_rate`) and every training field (`lr0`,
//! `momentum`, `lr_step`, `lr_gamma`, `patience`, `batch_size`,
//! `max_epochs`, `seed`). Unset keys keep their defaults.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lungnet::models::{Arch, ModelConfig, TrainablePolicy};
use lungnet::training::TrainConfig;
use lungnet::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Class-per-directory dataset; scanned and split when `index` is unset.
    pub root: Option<PathBuf>,
    /// Split-index CSV written by `lungnet split`.
    pub index: Option<PathBuf>,
    /// Seed of the split made from `root` when no index is given.
    pub split_seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub out_dir: PathBuf,
    /// Checkpoint whose matching tensors initialise the model.
    pub init: Option<PathBuf>,
    pub policy: TrainablePolicy,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            root: None,
            index: None,
            split_seed: 0,
            model: ModelConfig::for_arch(Arch::MobileNetLung),
            train: TrainConfig::default(),
            out_dir: PathBuf::from("runs"),
            init: None,
            policy: TrainablePolicy::All,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

impl RunConfig {
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got {raw:?}", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_str(&text)
    }

    /// Sets one key; the value is parsed with the key's type.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let m = &mut self.model;
        let t = &mut self.train;
        match key {
            "root" => self.root = Some(PathBuf::from(value)),
            "index" => self.index = Some(PathBuf::from(value)),
            "split_seed" => self.split_seed = parse(key, value)?,
            "arch" => m.se_after_stem = value.parse::<Arch>()? == Arch::MobileNetLung,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "init" => self.init = Some(PathBuf::from(value)),
            "policy" => self.policy = value.parse()?,
            "num_classes" => m.num_classes = parse(key, value)?,
            "width_multiplier" => m.width_multiplier = parse(key, value)?,
            "input_size" => m.input_size = parse(key, value)?,
            "se_reduction" => m.se_reduction = parse(key, value)?,
            "dropout_rate" => m.dropout_rate = parse(key, value)?,
            "lr0" => t.lr0 = parse(key, value)?,
            "momentum" => t.momentum = parse(key, value)?,
            "lr_step" => t.lr_step = parse(key, value)?,
            "lr_gamma" => t.lr_gamma = parse(key, value)?,
            "patience" => t.patience = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "max_epochs" => t.max_epochs = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn arch(&self) -> Arch {
        self.model.arch()
    }

    /// Checks value ranges and that every referenced input path exists.
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if self.root.is_none() && self.index.is_none() {
            return Err(Error::Config("either `root` or `index` must be set".into()));
        }
        for (key, path) in [("root", &self.root), ("index", &self.index), ("init", &self.init)] {
            if let Some(p) = path {
                if !p.exists() {
                    return Err(Error::Config(format!("{key} path {} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }

    /// Renders every key, so `parse_str(to_text())` round-trips.
    pub fn to_text(&self) -> String {
        let m = &self.model;
        let t = &self.train;
        let mut out = String::new();
        let mut put = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        if let Some(p) = &self.root {
            put("root", p.display().to_string());
        }
        if let Some(p) = &self.index {
            put("index", p.display().to_string());
        }
        put("split_seed", self.split_seed.to_string());
        put("arch", self.arch().to_string());
        put("out_dir", self.out_dir.display().to_string());
        if let Some(p) = &self.init {
            put("init", p.display().to_string());
        }
        put("policy", self.policy.to_string());
        put("num_classes", m.num_classes.to_string());
        put("width_multiplier", m.width_multiplier.to_string());
        put("input_size", m.input_size.to_string());
        put("se_reduction", m.se_reduction.to_string());
        put("dropout_rate", m.dropout_rate.to_string());
        put("lr0", t.lr0.to_string());
        put("momentum", t.momentum.to_string());
        put("lr_step", t.lr_step.to_string());
        put("lr_gamma", t.lr_gamma.to_string());
        put("patience", t.patience.to_string());
        put("batch_size", t.batch_size.to_string());
        put("max_epochs", t.max_epochs.to_string());
        put("seed", t.seed.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let cfg = RunConfig::parse_str("# run\narch = mobilenet_v2  # plain\n\nlr0=0.05\nmax_epochs = 3\n").unwrap();
        assert_eq!(cfg.arch(), Arch::MobileNetV2);
        assert_eq!(cfg.train.lr0, 0.05);
        assert_eq!(cfg.train.max_epochs, 3);
        assert_eq!(cfg.train.momentum, 0.9);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_values() {
        for text in ["colour = red", "lr0 = fast", "arch = resnet", "policy = some", "just text"] {
            assert!(matches!(RunConfig::parse_str(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn text_round_trips() {
        let mut cfg = RunConfig {
            root: Some("data".into()),
            init: Some("w.nncp".into()),
            policy: TrainablePolicy::HeadOnly,
            ..RunConfig::default()
        };
        cfg.model.width_multiplier = 0.25;
        cfg.train.seed = 9;
        assert_eq!(RunConfig::parse_str(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn validation_requires_existing_paths() {
        let mut cfg = RunConfig::default();
        assert!(cfg.validate().is_err());
        cfg.root = Some("/definitely/not/here".into());
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        cfg.root = Some(std::env::temp_dir());
        cfg.validate().unwrap();
        cfg.train.batch_size = 0;
        assert!(cfg.validate().is_err());
    }
}
