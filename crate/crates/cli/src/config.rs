use std::path::Path;

use mpg::study::{QSource, StudyConfig};
use mpg::trainer::TrainConfig;
use mpg::EstimatorKind;
use serde::{Deserialize, Serialize};

/// Variance protocol: a freshly initialized model or a checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Init,
    Trained,
}

/// Everything a run can be configured with, as one flat table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub workers: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub episodes: usize,
    pub seed: u64,
    pub rollout_len: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub step_size: f64,
    pub goal_radius: f64,
    pub max_steps: usize,
    pub runs: usize,
    pub estimators: Vec<EstimatorKind>,
    pub mode: Mode,
    pub n_states: usize,
    pub stride: usize,
    pub n_per_state: usize,
    pub bootstrap: usize,
    pub q: QSource,
    pub rollout_steps: usize,
}

impl Default for FileConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let s = StudyConfig::default();
        Self {
            workers: t.workers,
            lr_actor: t.lr_actor,
            lr_critic: t.lr_critic,
            gamma: t.gamma,
            sigma: t.sigma,
            episodes: t.episodes,
            seed: t.seed,
            rollout_len: t.rollout_len,
            hidden_width: t.hidden_width,
            hidden_layers: t.hidden_layers,
            step_size: t.step_size,
            goal_radius: t.goal_radius,
            max_steps: t.max_steps,
            runs: 1,
            estimators: vec![
                EstimatorKind::Angular,
                EstimatorKind::Standard,
                EstimatorKind::WrappedAngle,
            ],
            mode: Mode::Init,
            n_states: s.n_states,
            stride: s.stride,
            n_per_state: s.n_per_state,
            bootstrap: s.bootstrap,
            q: s.q,
            rollout_steps: s.rollout_steps,
        }
    }
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, String> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn train(&self, estimator: EstimatorKind, seed: u64) -> TrainConfig {
        TrainConfig {
            workers: self.workers,
            lr_actor: self.lr_actor,
            lr_critic: self.lr_critic,
            gamma: self.gamma,
            sigma: self.sigma,
            estimator,
            episodes: self.episodes,
            seed,
            rollout_len: self.rollout_len,
            hidden_width: self.hidden_width,
            hidden_layers: self.hidden_layers,
            step_size: self.step_size,
            goal_radius: self.goal_radius,
            max_steps: self.max_steps,
        }
    }

    pub fn study(&self) -> StudyConfig {
        StudyConfig {
            n_states: self.n_states,
            stride: self.stride,
            n_per_state: self.n_per_state,
            bootstrap: self.bootstrap,
            q: self.q,
            rollout_steps: self.rollout_steps,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.runs == 0 {
            return Err("runs: must be at least 1".into());
        }
        if self.estimators.is_empty() {
            return Err("estimators: list is empty".into());
        }
        for &k in &self.estimators {
            self.train(k, self.seed).validate().map_err(|e| e.to_string())?;
        }
        if self.stride == 0 {
            return Err("stride: must be at least 1".into());
        }
        Ok(())
    }
}
