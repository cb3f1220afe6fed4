//! Estimator variance on Platform2D at states visited by an agent.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::distributions::UnitVector;
use crate::envs::{Platform2D, PlatformConfig};
use crate::error::{invalid, Result};
use crate::estimators::{measure_variance, VarianceOptions, VarianceReport};
use crate::scalar::Real;
use crate::trainer::{visited_states, Agent};

/// Stand-in for the action value that scales both scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QSource {
    /// One-step advantage `r + gamma v(s') - v(s)`.
    Critic,
    /// n-step advantage: execute the direction, follow the stochastic
    /// policy for up to `rollout_steps - 1` more steps, bootstrap with the
    /// critic, subtract `v(s)`. This is the advantage the trainer uses.
    Rollout,
}

impl QSource {
    pub fn name(self) -> &'static str {
        match self {
            QSource::Critic => "critic",
            QSource::Rollout => "rollout",
        }
    }
}

impl std::str::FromStr for QSource {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "critic" => Ok(QSource::Critic),
            "rollout" => Ok(QSource::Rollout),
            other => Err(invalid("q", format!("unknown `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub n_states: usize,
    /// Keep one visited state every `stride` steps.
    pub stride: usize,
    pub n_per_state: usize,
    pub bootstrap: usize,
    pub q: QSource,
    pub rollout_steps: usize,
    pub seed: u64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            n_states: 64,
            stride: 5,
            n_per_state: 1000,
            bootstrap: 1000,
            q: QSource::Rollout,
            rollout_steps: 20,
            seed: 0,
        }
    }
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for the continuation after executing `dir` at `state`.
fn draw_seed<T: Real>(seed: u64, state: &[T], dir: &[T]) -> u64 {
    state
        .iter()
        .chain(dir)
        .fold(splitmix(seed), |h, v| splitmix(h ^ v.to_f64().unwrap_or(f64::NAN).to_bits()))
}

/// Standard versus angular trace variance of the agent's direction policy.
pub fn platform_variance<T: Real>(
    agent: &Agent<T>,
    platform: PlatformConfig,
    gamma: f64,
    cfg: &StudyConfig,
) -> Result<VarianceReport> {
    if cfg.rollout_steps == 0 {
        return Err(invalid("rollout_steps", "must be at least 1"));
    }
    let env = Platform2D::<T>::new(platform)?;
    let gamma = T::lit(gamma);
    let states = visited_states(agent, platform, cfg.n_states, cfg.stride, cfg.seed)?;
    let bootstrap_value = |outcome: crate::envs::Outcome, next: &[T]| -> Result<T> {
        if outcome.is_terminal() {
            Ok(T::zero())
        } else {
            agent.value(next)
        }
    };
    let q = |s: &[T], b: &UnitVector<T>| -> Result<T> {
        let mut step = env.transition(s, b.as_slice(), 0)?;
        let mut ret = step.reward;
        let mut disc = gamma;
        if cfg.q == QSource::Rollout {
            let mut rng = ChaCha8Rng::seed_from_u64(draw_seed(cfg.seed, s, b.as_slice()));
            for t in 1..cfg.rollout_steps {
                if step.terminal.ends_episode() {
                    break;
                }
                let draw = agent.actor.sample(&step.next_state, &mut rng)?;
                step = env.transition(&step.next_state, draw.direction.as_slice(), t)?;
                ret = ret + disc * step.reward;
                disc = disc * gamma;
            }
        }
        Ok(ret + disc * bootstrap_value(step.terminal, &step.next_state)? - agent.value(s)?)
    };
    let mut report = measure_variance(
        &agent.actor,
        &states,
        q,
        VarianceOptions {
            n_per_state: cfg.n_per_state,
            bootstrap_resamples: cfg.bootstrap,
            seed: cfg.seed,
        },
    )?;
    report.q = cfg.q.name().to_string();
    Ok(report)
}
