//! Harness settings. Every field can be set from a `key=value` file; the CLI
//! flags cover the common ones.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use roadcast::datahub::{CongestionConfig, Profile};
use roadcast::eopf::MlpParams;
use roadcast::gbtree::BoostParams;
use serde::Serialize;

use crate::HarnessError;

/// Which forecaster feeds the navigation stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictorKind {
    /// Per-road boosted trees.
    Gbt,
    /// Realised future speeds.
    Oracle,
    /// Realised speeds inflated by a multiple of the window spread.
    PlantedBias,
}

impl PredictorKind {
    pub fn name(self) -> &'static str {
        match self {
            PredictorKind::Gbt => "gbt",
            PredictorKind::Oracle => "oracle",
            PredictorKind::PlantedBias => "planted-bias",
        }
    }
}

impl FromStr for PredictorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "gbt" => Ok(PredictorKind::Gbt),
            "oracle" => Ok(PredictorKind::Oracle),
            "planted-bias" => Ok(PredictorKind::PlantedBias),
            _ => Err(format!(
                "unknown predictor {s:?} (expected gbt, oracle or planted-bias)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarnessConfig {
    pub seed: u64,
    #[serde(skip)]
    pub data: Option<PathBuf>,
    #[serde(skip)]
    pub graph: Option<PathBuf>,
    #[serde(skip)]
    pub out: PathBuf,
    pub horizon_min: u32,
    pub k_paths: usize,
    pub window_h: usize,
    pub train_ratio: f64,
    pub congestion_p: f64,

    pub gbt_rounds: usize,
    pub gbt_max_depth: usize,
    pub gbt_lambda: f64,
    pub gbt_gamma: f64,
    pub gbt_eta: f64,
    pub gbt_min_samples_leaf: usize,

    pub knn_k: usize,
    /// Most recent training windows kept as KNN neighbours.
    pub knn_max_train: usize,
    pub mlp_hidden1: usize,
    pub mlp_hidden2: usize,
    pub mlp_epochs: usize,
    pub mlp_lr: f64,
    /// Most recent training windows used by the MLP baseline.
    pub mlp_max_train: usize,

    pub eopf_hidden1: usize,
    pub eopf_hidden2: usize,
    pub eopf_epochs: usize,
    pub eopf_lr: f64,
    /// Training records kept (seeded subsample) when history yields more.
    pub eopf_max_records: usize,

    pub predictor: PredictorKind,
    pub planted_c: f64,
    pub requests_per_interval: usize,
    /// Evenly spaced test-range window origins used for navigation.
    pub nav_intervals: usize,
    /// Leading share of the navigation intervals that serves as EOPF history.
    pub eopf_history_frac: f64,

    pub synth_roads: usize,
    pub synth_steps: usize,
    pub synth_profile: String,

    pub horizons: Vec<u32>,
    pub epoch_rounds: usize,
    pub usability_k: Vec<usize>,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            seed: 42,
            data: None,
            graph: None,
            out: PathBuf::from("out"),
            horizon_min: 5,
            k_paths: 5,
            window_h: 11,
            train_ratio: 0.8,
            congestion_p: 10.0,
            gbt_rounds: 50,
            gbt_max_depth: 4,
            gbt_lambda: 1.0,
            gbt_gamma: 0.0,
            gbt_eta: 0.3,
            gbt_min_samples_leaf: 1,
            knn_k: 5,
            knn_max_train: 2000,
            mlp_hidden1: 32,
            mlp_hidden2: 16,
            mlp_epochs: 300,
            mlp_lr: 0.1,
            mlp_max_train: 2000,
            eopf_hidden1: 32,
            eopf_hidden2: 16,
            eopf_epochs: 2000,
            eopf_lr: 0.1,
            eopf_max_records: 3000,
            predictor: PredictorKind::Gbt,
            planted_c: 1.5,
            requests_per_interval: 100,
            nav_intervals: 40,
            eopf_history_frac: 0.5,
            synth_roads: 40,
            synth_steps: 2016,
            synth_profile: "rush-hour".into(),
            horizons: vec![5, 10, 15, 20, 25, 30],
            epoch_rounds: 100,
            usability_k: vec![3, 5, 10],
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, HarnessError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| HarnessError::Usage(format!("{key}={value}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, HarnessError>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

impl HarnessConfig {
    /// Sets one field by its key name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        match key {
            "seed" => self.seed = parse(key, value)?,
            "data" => self.data = Some(PathBuf::from(value)),
            "graph" => self.graph = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "horizon_min" => self.horizon_min = parse(key, value)?,
            "k_paths" => self.k_paths = parse(key, value)?,
            "window_h" => self.window_h = parse(key, value)?,
            "train_ratio" => self.train_ratio = parse(key, value)?,
            "congestion_p" => self.congestion_p = parse(key, value)?,
            "gbt_rounds" => self.gbt_rounds = parse(key, value)?,
            "gbt_max_depth" => self.gbt_max_depth = parse(key, value)?,
            "gbt_lambda" => self.gbt_lambda = parse(key, value)?,
            "gbt_gamma" => self.gbt_gamma = parse(key, value)?,
            "gbt_eta" => self.gbt_eta = parse(key, value)?,
            "gbt_min_samples_leaf" => self.gbt_min_samples_leaf = parse(key, value)?,
            "knn_k" => self.knn_k = parse(key, value)?,
            "knn_max_train" => self.knn_max_train = parse(key, value)?,
            "mlp_hidden1" => self.mlp_hidden1 = parse(key, value)?,
            "mlp_hidden2" => self.mlp_hidden2 = parse(key, value)?,
            "mlp_epochs" => self.mlp_epochs = parse(key, value)?,
            "mlp_lr" => self.mlp_lr = parse(key, value)?,
            "mlp_max_train" => self.mlp_max_train = parse(key, value)?,
            "eopf_hidden1" => self.eopf_hidden1 = parse(key, value)?,
            "eopf_hidden2" => self.eopf_hidden2 = parse(key, value)?,
            "eopf_epochs" => self.eopf_epochs = parse(key, value)?,
            "eopf_lr" => self.eopf_lr = parse(key, value)?,
            "eopf_max_records" => self.eopf_max_records = parse(key, value)?,
            "predictor" => self.predictor = parse(key, value)?,
            "planted_c" => self.planted_c = parse(key, value)?,
            "requests_per_interval" => self.requests_per_interval = parse(key, value)?,
            "nav_intervals" => self.nav_intervals = parse(key, value)?,
            "eopf_history_frac" => self.eopf_history_frac = parse(key, value)?,
            "synth_roads" => self.synth_roads = parse(key, value)?,
            "synth_steps" => self.synth_steps = parse(key, value)?,
            "synth_profile" => {
                Profile::from_str(value).map_err(|e| HarnessError::Usage(e.to_string()))?;
                self.synth_profile = value.to_string();
            }
            "horizons" => self.horizons = parse_list(key, value)?,
            "epoch_rounds" => self.epoch_rounds = parse(key, value)?,
            "usability_k" => self.usability_k = parse_list(key, value)?,
            _ => return Err(HarnessError::Usage(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies a `key=value` file. Blank lines and `#` comments are ignored.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::Usage(format!("{}:{}: expected key=value", path.display(), i + 1))
            })?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: &str| Err(HarnessError::Usage(msg.to_string()));
        if self.k_paths == 0 {
            return bad("k_paths must be at least 1");
        }
        if self.window_h == 0 {
            return bad("window_h must be at least 1");
        }
        if !(self.train_ratio > 0.0 && self.train_ratio < 1.0) {
            return bad("train_ratio must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.eopf_history_frac) {
            return bad("eopf_history_frac must lie in [0, 1]");
        }
        if self.requests_per_interval == 0 || self.nav_intervals == 0 {
            return bad("requests_per_interval and nav_intervals must be positive");
        }
        if self.horizons.is_empty() || self.usability_k.is_empty() {
            return bad("horizons and usability_k need at least one entry");
        }
        self.boost_params()
            .validate()
            .map_err(|e| HarnessError::Usage(e.to_string()))?;
        self.mlp_params()
            .validate()
            .map_err(|e| HarnessError::Usage(e.to_string()))?;
        self.eopf_params()
            .validate()
            .map_err(|e| HarnessError::Usage(e.to_string()))?;
        Ok(())
    }

    pub fn boost_params(&self) -> BoostParams {
        BoostParams {
            rounds: self.gbt_rounds,
            max_depth: self.gbt_max_depth,
            lambda: self.gbt_lambda,
            gamma: self.gbt_gamma,
            eta: self.gbt_eta,
            min_samples_leaf: self.gbt_min_samples_leaf,
        }
    }

    pub fn mlp_params(&self) -> MlpParams {
        MlpParams {
            hidden: [self.mlp_hidden1, self.mlp_hidden2],
            epochs: self.mlp_epochs,
            learning_rate: self.mlp_lr,
            seed: self.seed,
        }
    }

    pub fn eopf_params(&self) -> MlpParams {
        MlpParams {
            hidden: [self.eopf_hidden1, self.eopf_hidden2],
            epochs: self.eopf_epochs,
            learning_rate: self.eopf_lr,
            seed: self.seed,
        }
    }

    pub fn congestion(&self) -> CongestionConfig {
        CongestionConfig {
            p: self.congestion_p,
        }
    }

    pub fn profile(&self) -> Result<Profile, HarnessError> {
        Profile::from_str(&self.synth_profile).map_err(|e| HarnessError::Usage(e.to_string()))
    }

    pub fn data_path(&self) -> PathBuf {
        self.data
            .clone()
            .unwrap_or_else(|| self.out.join("speeds.csv"))
    }

    pub fn graph_path(&self) -> PathBuf {
        self.graph
            .clone()
            .unwrap_or_else(|| self.out.join("graph.csv"))
    }

    pub fn models_dir(&self) -> PathBuf {
        self.out.join("models")
    }

    pub fn results_dir(&self) -> PathBuf {
        self.out.join("results")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_overrides_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        std::fs::write(
            &path,
            "# comment\nseed = 7\n\nhorizons=5,15\npredictor=oracle\n",
        )
        .unwrap();
        let mut cfg = HarnessConfig::default();
        cfg.apply_file(&path).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.horizons, vec![5, 15]);
        assert_eq!(cfg.predictor, PredictorKind::Oracle);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let mut cfg = HarnessConfig::default();
        assert!(matches!(cfg.set("nope", "1"), Err(HarnessError::Usage(_))));
        assert!(cfg.set("seed", "x").is_err());
        assert!(cfg.set("synth_profile", "bumpy").is_err());
        cfg.k_paths = 0;
        assert!(cfg.validate().is_err());
        assert!(HarnessConfig::default().validate().is_ok());
    }
}
