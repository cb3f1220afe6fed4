//! Synchronous advantage actor-critic on direction-valued actions.
//!
//! Each iteration every worker collects `rollout_len` steps with the shared
//! parameters, computes n-step returns and its gradient contribution; the
//! contributions are summed in worker-index order and applied once. Results
//! depend only on the config, not on thread scheduling.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::UnitVector;
use crate::envs::{Environment, Outcome, Platform2D, PlatformConfig};
use crate::error::{invalid, Error, Result};
use crate::estimators::EstimatorKind;
use crate::nn::{expect_field, parse_num, sgd_step, Mlp, MlpSpec};
use crate::policy::{DirectionalDraw, DirectionalPolicy, GaussianHead, MeanModel};
use crate::scalar::Real;

/// Training hyperparameters. Defaults are the published Platform2D settings
/// plus the environment geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub workers: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub gamma: f64,
    pub sigma: f64,
    pub estimator: EstimatorKind,
    pub episodes: usize,
    pub seed: u64,
    pub rollout_len: usize,
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub step_size: f64,
    pub goal_radius: f64,
    pub max_steps: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let env = PlatformConfig::default();
        Self {
            workers: 4,
            lr_actor: 0.01,
            lr_critic: 0.01,
            gamma: 0.99,
            sigma: 0.1,
            estimator: EstimatorKind::Angular,
            episodes: 20_000,
            seed: 0,
            rollout_len: 20,
            hidden_width: 32,
            hidden_layers: 2,
            step_size: env.step_size,
            goal_radius: env.goal_radius,
            max_steps: env.max_steps,
        }
    }
}

impl TrainConfig {
    pub fn platform(&self) -> PlatformConfig {
        PlatformConfig {
            step_size: self.step_size,
            goal_radius: self.goal_radius,
            max_steps: self.max_steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(invalid("workers", "must be at least 1"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid("gamma", "must lie in (0, 1)"));
        }
        for (name, v) in [("lr_actor", self.lr_actor), ("lr_critic", self.lr_critic)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, "must be positive"));
            }
        }
        crate::distributions::check_sigma(self.sigma)?;
        if self.rollout_len == 0 {
            return Err(invalid("rollout_len", "must be at least 1"));
        }
        if self.hidden_width == 0 {
            return Err(invalid("hidden_width", "must be at least 1"));
        }
        if !matches!(
            self.estimator,
            EstimatorKind::Standard | EstimatorKind::Angular | EstimatorKind::WrappedAngle
        ) {
            return Err(invalid(
                "estimator",
                format!("{} cannot drive direction actions", self.estimator),
            ));
        }
        self.platform().validate()
    }

    /// Output width of the mean network for the configured estimator.
    pub fn action_outputs(&self) -> usize {
        if self.estimator == EstimatorKind::WrappedAngle {
            1
        } else {
            2
        }
    }
}

/// One finished episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub seed: u64,
    pub steps: usize,
    pub discounted_return: f64,
    pub outcome: Outcome,
}

/// How the value after a transition is formed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepEnd<T> {
    /// Continue into the next transition of the segment.
    Continue,
    /// True terminal state: value zero.
    Terminal,
    /// Time limit reached: bootstrap with this critic value.
    Truncated(T),
}

/// n-step returns `R_t = r_t + gamma * next`, where `next` is 0 after a
/// terminal, the critic value after a truncation, `R_{t+1}` otherwise, and
/// `bootstrap` after the last transition of the segment.
pub fn compute_returns<T: Real>(rewards: &[T], ends: &[StepEnd<T>], gamma: T, bootstrap: T) -> Result<Vec<T>> {
    if rewards.len() != ends.len() {
        return Err(Error::DimensionMismatch {
            expected: rewards.len(),
            got: ends.len(),
        });
    }
    let mut out = vec![T::zero(); rewards.len()];
    let mut next = bootstrap;
    for t in (0..rewards.len()).rev() {
        let tail = match ends[t] {
            StepEnd::Continue => next,
            StepEnd::Terminal => T::zero(),
            StepEnd::Truncated(v) => v,
        };
        out[t] = rewards[t] + gamma * tail;
        next = out[t];
    }
    Ok(out)
}

/// Actor and critic.
#[derive(Debug, Clone, PartialEq)]
pub struct Agent<T> {
    pub actor: DirectionalPolicy<T, Mlp<T>>,
    pub critic: Mlp<T>,
}

/// Seeds for the actor and critic initializations.
fn init_seeds(seed: u64) -> (u64, u64) {
    (seed.wrapping_mul(2).wrapping_add(1), seed.wrapping_mul(2).wrapping_add(2))
}

impl<T: Real> Agent<T> {
    pub fn new(cfg: &TrainConfig) -> Result<Self> {
        let (actor_seed, critic_seed) = init_seeds(cfg.seed);
        let actor = Mlp::new(MlpSpec::tanh(
            2,
            cfg.hidden_width,
            cfg.hidden_layers,
            cfg.action_outputs(),
            actor_seed,
        )?);
        let critic = Mlp::new(MlpSpec::tanh(2, cfg.hidden_width, cfg.hidden_layers, 1, critic_seed)?);
        let head = GaussianHead::new(actor, T::lit(cfg.sigma), false)?;
        Ok(Self {
            actor: DirectionalPolicy::new(head, cfg.estimator)?,
            critic,
        })
    }

    pub fn value(&self, state: &[T]) -> Result<T> {
        Ok(self.critic.forward(state)?[0])
    }

    pub fn estimator(&self) -> EstimatorKind {
        self.actor.kind
    }

    /// Plain-text checkpoint: estimator, sigma, then both networks.
    pub fn save<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "mpg-checkpoint 1")?;
        writeln!(w, "estimator {}", self.actor.kind)?;
        writeln!(w, "sigma {:e}", self.actor.head.sigma.to_f64().unwrap_or(f64::NAN))?;
        self.actor.head.model.write_text("actor", w)?;
        self.critic.write_text("critic", w)?;
        Ok(())
    }

    pub fn load<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let version = expect_field(&mut lines, "mpg-checkpoint")?;
        if version != "1" {
            return Err(Error::Checkpoint(format!("unsupported version {version}")));
        }
        let kind: EstimatorKind = expect_field(&mut lines, "estimator")?.parse()?;
        let sigma = parse_num::<f64>(&expect_field(&mut lines, "sigma")?)?;
        let (a_name, actor) = Mlp::read_text(&mut lines)?;
        let (c_name, critic) = Mlp::read_text(&mut lines)?;
        if a_name != "actor" || c_name != "critic" {
            return Err(Error::Checkpoint(format!("unexpected networks `{a_name}`, `{c_name}`")));
        }
        if critic.spec().output_dim() != 1 {
            return Err(Error::Checkpoint("critic must have one output".into()));
        }
        let head = GaussianHead::new(actor, T::lit(sigma), false)?;
        Ok(Self {
            actor: DirectionalPolicy::new(head, kind)?,
            critic,
        })
    }

    pub fn save_file(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.save(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_file(path: &Path) -> Result<Self> {
        Self::load(BufReader::new(File::open(path)?))
    }
}

/// Steps, discounted return and outcome of an episode that ended.
pub type FinishedEpisode<T> = (usize, T, Outcome);

/// One environment step inside a rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T> {
    pub state: Vec<T>,
    pub draw: DirectionalDraw<T>,
    pub reward: T,
    pub next_state: Vec<T>,
    pub outcome: Outcome,
}

/// A worker's environment, random stream and in-progress episode.
#[derive(Debug, Clone)]
pub struct Worker<T, E> {
    pub env: E,
    rng: ChaCha8Rng,
    state: Vec<T>,
    steps: usize,
    ret: T,
    discount: T,
    episodes_started: u64,
    seed: u64,
}

/// Random stream for worker `index` of a run seeded with `seed`.
pub fn worker_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

impl<T: Real, E: Environment<T, Action = UnitVector<T>>> Worker<T, E> {
    pub fn new(mut env: E, seed: u64, index: usize) -> Self {
        let state = env.reset(seed);
        Self {
            env,
            rng: worker_rng(seed, index),
            state,
            steps: 0,
            ret: T::zero(),
            discount: T::one(),
            episodes_started: 1,
            seed,
        }
    }

    /// Runs `rollout_len` steps, resetting the environment after each
    /// finished episode. Returns the transitions and the
    /// `(steps, discounted return, outcome)` of episodes finished on the way.
    pub fn collect_rollout<M: MeanModel<T>>(
        &mut self,
        actor: &DirectionalPolicy<T, M>,
        rollout_len: usize,
        gamma: T,
    ) -> Result<(Vec<Transition<T>>, Vec<FinishedEpisode<T>>)> {
        let mut batch = Vec::with_capacity(rollout_len);
        let mut finished = Vec::new();
        for _ in 0..rollout_len {
            let draw = actor.sample(&self.state, &mut self.rng)?;
            let step = self.env.step(&draw.direction)?;
            self.ret = self.ret + self.discount * step.reward;
            self.discount = self.discount * gamma;
            self.steps += 1;
            batch.push(Transition {
                state: std::mem::replace(&mut self.state, step.next_state.clone()),
                draw,
                reward: step.reward,
                next_state: step.next_state,
                outcome: step.terminal,
            });
            if step.terminal.ends_episode() {
                finished.push((self.steps, self.ret, step.terminal));
                self.state = self.env.reset(self.seed.wrapping_add(self.episodes_started));
                self.episodes_started += 1;
                self.steps = 0;
                self.ret = T::zero();
                self.discount = T::one();
            }
        }
        Ok((batch, finished))
    }
}

/// Summed (not averaged) gradient contributions of one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchGradient<T> {
    pub actor: Vec<T>,
    pub critic: Vec<T>,
    pub n: usize,
    pub critic_sq_error: T,
}

/// Advantage-weighted score and critic regression gradients for one
/// worker's segment. `actor` ascends `A * log pi`; `critic` is the negated
/// gradient of `(v - R)^2 / 2`, so both are applied as ascent steps.
pub fn batch_gradient<T: Real>(agent: &Agent<T>, batch: &[Transition<T>], gamma: T) -> Result<BatchGradient<T>> {
    let values = batch
        .iter()
        .map(|tr| agent.value(&tr.state))
        .collect::<Result<Vec<T>>>()?;
    let mut ends = Vec::with_capacity(batch.len());
    for tr in batch {
        ends.push(match tr.outcome {
            Outcome::None => StepEnd::Continue,
            Outcome::Goal | Outcome::FellOff => StepEnd::Terminal,
            Outcome::Truncated => StepEnd::Truncated(agent.value(&tr.next_state)?),
        });
    }
    let bootstrap = match batch.last() {
        Some(tr) if tr.outcome == Outcome::None => agent.value(&tr.next_state)?,
        _ => T::zero(),
    };
    let rewards: Vec<T> = batch.iter().map(|tr| tr.reward).collect();
    let returns = compute_returns(&rewards, &ends, gamma, bootstrap)?;

    let mut out = BatchGradient {
        actor: vec![T::zero(); agent.actor.head.n_params()],
        critic: vec![T::zero(); agent.critic.n_params()],
        n: batch.len(),
        critic_sq_error: T::zero(),
    };
    for ((tr, &v), &ret) in batch.iter().zip(&values).zip(&returns) {
        let adv = ret - v;
        if adv != T::zero() {
            agent.actor.accumulate_gradient(&tr.state, &tr.draw, adv, &mut out.actor)?;
        }
        agent.critic.backward_into(&tr.state, &[T::one()], adv, &mut out.critic)?;
        out.critic_sq_error = out.critic_sq_error + adv * adv;
    }
    Ok(out)
}

/// Per-update diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateStats<T> {
    pub transitions: usize,
    pub critic_loss: T,
}

/// Sums the batch gradients in the given order, averages over all
/// transitions, and applies one SGD step to actor and critic.
pub fn a2c_update<T: Real>(agent: &mut Agent<T>, grads: &[BatchGradient<T>], cfg: &TrainConfig) -> Result<UpdateStats<T>> {
    let n: usize = grads.iter().map(|g| g.n).sum();
    if n == 0 {
        return Err(invalid("batch", "empty"));
    }
    let mut actor = vec![T::zero(); agent.actor.head.n_params()];
    let mut critic = vec![T::zero(); agent.critic.n_params()];
    let mut sq = T::zero();
    for g in grads {
        for (a, &b) in actor.iter_mut().zip(&g.actor) {
            *a = *a + b;
        }
        for (a, &b) in critic.iter_mut().zip(&g.critic) {
            *a = *a + b;
        }
        sq = sq + g.critic_sq_error;
    }
    let inv = T::one() / T::from_usize_lossy(n);
    actor.iter_mut().for_each(|v| *v = *v * inv);
    critic.iter_mut().for_each(|v| *v = *v * inv);
    agent.actor.head.apply_update(&actor, T::lit(cfg.lr_actor));
    sgd_step(agent.critic.params_mut(), &critic, T::lit(cfg.lr_critic));
    Ok(UpdateStats {
        transitions: n,
        critic_loss: sq * inv / T::lit(2.0),
    })
}

/// Records plus the final parameters.
#[derive(Debug, Clone)]
pub struct TrainResult<T> {
    pub records: Vec<EpisodeRecord>,
    pub agent: Agent<T>,
}

/// Trains on Platform2D with the configured geometry.
pub fn train<T: Real>(cfg: &TrainConfig) -> Result<TrainResult<T>> {
    let platform = cfg.platform();
    train_with(cfg, Agent::new(cfg)?, |_| Platform2D::new(platform))
}

/// Trains `agent` with one environment per worker from `make_env`, until
/// `cfg.episodes` episodes have finished.
pub fn train_with<T, E, F>(cfg: &TrainConfig, mut agent: Agent<T>, make_env: F) -> Result<TrainResult<T>>
where
    T: Real,
    E: Environment<T, Action = UnitVector<T>> + Send,
    F: Fn(usize) -> Result<E>,
{
    cfg.validate()?;
    let gamma = T::lit(cfg.gamma);
    let mut workers = (0..cfg.workers)
        .map(|i| Ok(Worker::new(make_env(i)?, cfg.seed, i)))
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::with_capacity(cfg.episodes);
    while records.len() < cfg.episodes {
        let shared = &agent;
        let results: Vec<Result<(BatchGradient<T>, Vec<FinishedEpisode<T>>)>> = workers
            .par_iter_mut()
            .map(|w| {
                let (batch, finished) = w.collect_rollout(&shared.actor, cfg.rollout_len, gamma)?;
                Ok((batch_gradient(shared, &batch, gamma)?, finished))
            })
            .collect();
        let mut grads = Vec::with_capacity(results.len());
        for r in results {
            let (g, finished) = r?;
            for (steps, ret, outcome) in finished {
                records.push(EpisodeRecord {
                    episode: records.len(),
                    seed: cfg.seed,
                    steps,
                    discounted_return: ret.to_f64().unwrap_or(f64::NAN),
                    outcome,
                });
            }
            grads.push(g);
        }
        a2c_update(&mut agent, &grads, cfg)?;
    }
    records.truncate(cfg.episodes);
    Ok(TrainResult { records, agent })
}

/// Writes the per-episode CSV (header `run_id,seed,episode,steps,discounted_return,outcome`).
pub fn write_episodes_csv<W: Write>(w: W, run_id: &str, records: &[EpisodeRecord]) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        run_id: &'a str,
        seed: u64,
        episode: usize,
        steps: usize,
        discounted_return: f64,
        outcome: Outcome,
    }
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(Row {
            run_id,
            seed: r.seed,
            episode: r.episode,
            steps: r.steps,
            discounted_return: r.discounted_return,
            outcome: r.outcome,
        })?;
    }
    out.flush()?;
    Ok(())
}

/// Mean discounted return over the last `window` episodes.
pub fn final_mean(records: &[EpisodeRecord], window: usize) -> Option<f64> {
    if records.is_empty() || window == 0 {
        return None;
    }
    let tail = &records[records.len().saturating_sub(window)..];
    Some(tail.iter().map(|r| r.discounted_return).sum::<f64>() / tail.len() as f64)
}

/// Number of episodes after which the trailing `window`-episode mean first
/// reaches `threshold`.
pub fn episodes_to_reach(records: &[EpisodeRecord], threshold: f64, window: usize) -> Option<usize> {
    if window == 0 || records.len() < window {
        return None;
    }
    let mut sum: f64 = records[..window].iter().map(|r| r.discounted_return).sum();
    if sum / window as f64 >= threshold {
        return Some(window);
    }
    for i in window..records.len() {
        sum += records[i].discounted_return - records[i - window].discounted_return;
        if sum / window as f64 >= threshold {
            return Some(i + 1);
        }
    }
    None
}

/// States visited by the agent's stochastic policy on Platform2D, one
/// every `stride` steps, starting from the fixed start state.
pub fn visited_states<T: Real>(
    agent: &Agent<T>,
    platform: PlatformConfig,
    count: usize,
    stride: usize,
    seed: u64,
) -> Result<Vec<Vec<T>>> {
    let mut env = Platform2D::<T>::new(platform)?;
    let mut rng = worker_rng(seed, 0);
    let mut state = env.reset(seed);
    let mut out = Vec::with_capacity(count);
    let mut t = 0usize;
    while out.len() < count {
        if t.is_multiple_of(stride.max(1)) {
            out.push(state.clone());
        }
        let draw = agent.actor.sample(&state, &mut rng)?;
        let step = env.step(&draw.direction)?;
        state = if step.terminal.ends_episode() {
            env.reset(seed)
        } else {
            step.next_state
        };
        t += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn returns_examples() {
        let r = compute_returns(&[0.0, 0.0, 0.0], &[StepEnd::Continue; 3], 0.5, 8.0).unwrap();
        assert_eq!(r, vec![1.0, 2.0, 4.0]);
        let r = compute_returns(&[0.1], &[StepEnd::Terminal], 0.99, 5.0).unwrap();
        assert_eq!(r, vec![0.1]);
        let r: Vec<f64> = compute_returns(
            &[0.1, 0.1, 0.1],
            &[StepEnd::Continue, StepEnd::Continue, StepEnd::Terminal],
            0.99,
            0.0,
        )
        .unwrap();
        for (a, b) in r.iter().zip([0.29701, 0.199, 0.1]) {
            assert!((a - b).abs() < 1e-12);
        }
        let r = compute_returns(&[1.0, 1.0], &[StepEnd::Truncated(10.0), StepEnd::Continue], 0.5, 2.0).unwrap();
        assert_eq!(r, vec![6.0, 2.0]);
        assert!(compute_returns(&[1.0], &[], 0.5, 0.0).is_err());
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig {
            episodes: 5,
            workers: 2,
            hidden_width: 8,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { workers: 0, ..Default::default() },
            TrainConfig { gamma: 1.0, ..Default::default() },
            TrainConfig { sigma: 0.0, ..Default::default() },
            TrainConfig { estimator: EstimatorKind::Clipped, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn zero_episodes_is_empty() {
        let cfg = TrainConfig { episodes: 0, ..small_cfg() };
        assert!(train::<f64>(&cfg).unwrap().records.is_empty());
    }

    #[test]
    fn rollout_is_reproducible_and_bounded() {
        let cfg = small_cfg();
        let agent = Agent::<f64>::new(&cfg).unwrap();
        let run = || {
            let mut w = Worker::new(Platform2D::new(cfg.platform()).unwrap(), 3, 0);
            w.collect_rollout(&agent.actor, 50, 0.99).unwrap()
        };
        let (a, _) = run();
        let (b, _) = run();
        assert_eq!(a, b);
        assert!(a.iter().all(|t| t.reward.abs() <= 0.1 + 1e-12));
        let mut w = Worker::new(Platform2D::new(cfg.platform()).unwrap(), 3, 0);
        assert_eq!(w.collect_rollout(&agent.actor, 1, 0.99).unwrap().0.len(), 1);
    }

    #[test]
    fn zero_advantage_leaves_actor_unchanged() {
        let cfg = small_cfg();
        let mut agent = Agent::<f64>::new(&cfg).unwrap();
        let before = agent.actor.head.flat_params();
        let g = BatchGradient {
            actor: vec![0.0; before.len()],
            critic: vec![0.0; agent.critic.n_params()],
            n: 4,
            critic_sq_error: 0.0,
        };
        a2c_update(&mut agent, &[g], &cfg).unwrap();
        assert_eq!(agent.actor.head.flat_params(), before);
    }

    #[test]
    fn critic_step_reduces_batch_error() {
        let cfg = TrainConfig { lr_critic: 1e-3, ..small_cfg() };
        let mut agent = Agent::<f64>::new(&cfg).unwrap();
        let mut w = Worker::new(Platform2D::new(cfg.platform()).unwrap(), 0, 0);
        let (batch, _) = w.collect_rollout(&agent.actor, 20, 0.99).unwrap();
        let before = batch_gradient(&agent, &batch, 0.99).unwrap();
        let mut g = before.clone();
        g.actor.iter_mut().for_each(|v| *v = 0.0);
        a2c_update(&mut agent, &[g], &cfg).unwrap();
        let after = batch_gradient(&agent, &batch, 0.99).unwrap();
        assert!(after.critic_sq_error < before.critic_sq_error);
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = TrainConfig { episodes: 12, ..small_cfg() };
        let a = train::<f64>(&cfg).unwrap();
        let b = train::<f64>(&cfg).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.records.len(), 12);
        assert!(a.records.iter().enumerate().all(|(i, r)| r.episode == i));
        assert_eq!(a.agent, b.agent);
    }

    #[test]
    fn checkpoint_round_trip() {
        let agent = Agent::<f64>::new(&small_cfg()).unwrap();
        let mut buf = Vec::new();
        agent.save(&mut buf).unwrap();
        let back = Agent::<f64>::load(buf.as_slice()).unwrap();
        assert_eq!(back, agent);
        assert!(Agent::<f64>::load("mpg-checkpoint 2\n".as_bytes()).is_err());
    }

    #[test]
    fn csv_layout() {
        let recs = vec![EpisodeRecord {
            episode: 0,
            seed: 7,
            steps: 28,
            discounted_return: 2.5,
            outcome: Outcome::Goal,
        }];
        let mut buf = Vec::new();
        write_episodes_csv(&mut buf, "r0", &recs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "run_id,seed,episode,steps,discounted_return,outcome\nr0,7,0,28,2.5,goal\n");
    }

    #[test]
    fn reach_and_final_mean() {
        let recs: Vec<EpisodeRecord> = (0..10)
            .map(|i| EpisodeRecord {
                episode: i,
                seed: 0,
                steps: 1,
                discounted_return: i as f64,
                outcome: Outcome::Goal,
            })
            .collect();
        assert_eq!(final_mean(&recs, 2), Some(8.5));
        assert_eq!(episodes_to_reach(&recs, 4.5, 2), Some(6));
        assert_eq!(episodes_to_reach(&recs, 100.0, 2), None);
    }
}
