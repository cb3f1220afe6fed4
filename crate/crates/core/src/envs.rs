//! Platform navigation with unit-direction actions, and a small
//! parametrized-action environment.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::distributions::UnitVector;
use crate::error::{invalid, Error, Result};
use crate::policy::{ParamAction, ParamValue};
use crate::scalar::Real;

/// How a step ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Goal,
    FellOff,
    Truncated,
    None,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Goal => "goal",
            Outcome::FellOff => "fell_off",
            Outcome::Truncated => "truncated",
            Outcome::None => "none",
        }
    }

    /// True for outcomes that end the episode.
    pub fn ends_episode(self) -> bool {
        self != Outcome::None
    }

    /// True when the value of the next state is zero by definition.
    pub fn is_terminal(self) -> bool {
        matches!(self, Outcome::Goal | Outcome::FellOff)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult<T> {
    pub next_state: Vec<T>,
    pub reward: T,
    pub terminal: Outcome,
}

/// Episodic environment with a fixed observation size.
pub trait Environment<T: Real> {
    type Action;

    fn observation_dim(&self) -> usize;
    fn action_dim(&self) -> usize;
    /// Starts a new episode. The environments here have deterministic
    /// starts, so `seed` only exists for the interface.
    fn reset(&mut self, seed: u64) -> Vec<T>;
    fn step(&mut self, action: &Self::Action) -> Result<StepResult<T>>;
}

/// Geometry of the navigation task.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlatformConfig {
    pub step_size: f64,
    pub goal_radius: f64,
    pub max_steps: usize,
}

impl Default for PlatformConfig {
    fn default() -> Self {
        Self {
            step_size: 0.1,
            goal_radius: 0.1,
            max_steps: 200,
        }
    }
}

impl PlatformConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(invalid("step_size", "must be positive"));
        }
        if !(self.goal_radius > 0.0 && self.goal_radius.is_finite()) {
            return Err(invalid("goal_radius", "must be positive"));
        }
        if self.max_steps == 0 {
            return Err(invalid("max_steps", "must be at least 1"));
        }
        Ok(())
    }

    /// Steps the straight-line policy needs to enter the goal disc.
    pub fn optimal_steps(&self) -> usize {
        let dist = Platform2D::<f64>::START
            .iter()
            .zip(Platform2D::<f64>::GOAL)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        ((dist - self.goal_radius) / self.step_size - 1e-12).ceil().max(1.0) as usize
    }

    /// Discounted return of the straight-line policy: every step earns the
    /// full step size.
    pub fn optimal_return(&self, gamma: f64) -> f64 {
        (0..self.optimal_steps())
            .map(|t| gamma.powi(t as i32) * self.step_size)
            .sum()
    }
}

/// Point on the square platform `[-1.5, 1.5]^2` moving by `step_size` along
/// the commanded unit direction. Reward is the decrease in distance to the
/// goal `(1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Platform2D<T> {
    config: PlatformConfig,
    pos: [T; 2],
    t: usize,
}

impl<T: Real> Platform2D<T> {
    pub const START: [f64; 2] = [-1.0, -1.0];
    pub const GOAL: [f64; 2] = [1.0, 1.0];
    pub const HALF_WIDTH: f64 = 1.5;
    pub const DIRECTION_TOLERANCE: f64 = 1e-9;

    pub fn new(config: PlatformConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            pos: Self::START.map(T::lit),
            t: 0,
        })
    }

    pub fn config(&self) -> &PlatformConfig {
        &self.config
    }

    pub fn position(&self) -> [T; 2] {
        self.pos
    }

    pub fn steps_taken(&self) -> usize {
        self.t
    }

    /// Distance to the goal.
    pub fn potential(s: &[T]) -> T {
        let dx = s[0] - T::lit(Self::GOAL[0]);
        let dy = s[1] - T::lit(Self::GOAL[1]);
        (dx * dx + dy * dy).sqrt()
    }

    /// Outcome of moving from `state` along `direction` when `t` steps have
    /// already been taken; does not touch `self`.
    pub fn transition(&self, state: &[T], direction: &[T], t: usize) -> Result<StepResult<T>> {
        if direction.len() != 2 || state.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: direction.len().max(state.len()),
            });
        }
        let norm = (direction[0] * direction[0] + direction[1] * direction[1]).sqrt();
        if (norm - T::one()).abs() > T::lit(Self::DIRECTION_TOLERANCE) || !norm.is_finite() {
            return Err(Error::InvalidAction(format!("direction has norm {norm}")));
        }
        let delta = T::lit(self.config.step_size);
        let next = vec![state[0] + delta * direction[0], state[1] + delta * direction[1]];
        let reward = Self::potential(state) - Self::potential(&next);
        let half = T::lit(Self::HALF_WIDTH);
        let terminal = if Self::potential(&next) <= T::lit(self.config.goal_radius) {
            Outcome::Goal
        } else if next.iter().any(|v| v.abs() > half) {
            Outcome::FellOff
        } else if t + 1 >= self.config.max_steps {
            Outcome::Truncated
        } else {
            Outcome::None
        };
        Ok(StepResult {
            next_state: next,
            reward,
            terminal,
        })
    }
}

impl<T: Real> Environment<T> for Platform2D<T> {
    type Action = UnitVector<T>;

    fn observation_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn reset(&mut self, _seed: u64) -> Vec<T> {
        self.pos = Self::START.map(T::lit);
        self.t = 0;
        self.pos.to_vec()
    }

    fn step(&mut self, action: &UnitVector<T>) -> Result<StepResult<T>> {
        let r = self.transition(&self.pos, action.as_slice(), self.t)?;
        self.pos = [r.next_state[0], r.next_state[1]];
        self.t += 1;
        Ok(r)
    }
}

/// Two discrete actions on the plane, each with a continuous parameter:
///
/// - `k = 0` ("move"): displacement `step_size * omega`, `omega` a unit 2-vector;
/// - `k = 1` ("thrust"): displacement `(step_size * omega, 0)`, `omega` in `[-1, 1]`.
///
/// Starts at `(-1, 0)`; reward is the decrease in distance to `(1, 0.5)`.
/// Episodes always last `horizon` steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyParamEnv<T> {
    pub step_size: T,
    pub horizon: usize,
    pos: [T; 2],
    t: usize,
}

impl<T: Real> ToyParamEnv<T> {
    pub const START: [f64; 2] = [-1.0, 0.0];
    pub const GOAL: [f64; 2] = [1.0, 0.5];
    pub const THRUST_RANGE: (f64, f64) = (-1.0, 1.0);

    pub fn new() -> Self {
        Self {
            step_size: T::lit(0.1),
            horizon: 50,
            pos: Self::START.map(T::lit),
            t: 0,
        }
    }

    pub fn potential(s: &[T]) -> T {
        let dx = s[0] - T::lit(Self::GOAL[0]);
        let dy = s[1] - T::lit(Self::GOAL[1]);
        (dx * dx + dy * dy).sqrt()
    }

    /// Pure transition from `state`; `t` is the number of steps already taken.
    pub fn transition(&self, state: &[T], action: &ParamAction<T>, t: usize) -> Result<StepResult<T>> {
        let d = self.step_size;
        let disp = match (action.k, &action.omega) {
            (0, ParamValue::Direction(u)) if u.dim() == 2 => [d * u.as_slice()[0], d * u.as_slice()[1]],
            (1, ParamValue::Scalar(w)) => {
                let (lo, hi) = Self::THRUST_RANGE;
                if *w < T::lit(lo) || *w > T::lit(hi) || w.is_nan() {
                    return Err(Error::InvalidAction(format!("thrust {w} outside [{lo}, {hi}]")));
                }
                [d * *w, T::zero()]
            }
            (k, _) if k > 1 => return Err(Error::InvalidAction(format!("no action {k}"))),
            (k, _) => {
                return Err(Error::InvalidAction(format!(
                    "action {k} got the wrong kind of parameter"
                )))
            }
        };
        let next = vec![state[0] + disp[0], state[1] + disp[1]];
        Ok(StepResult {
            reward: Self::potential(state) - Self::potential(&next),
            next_state: next,
            terminal: if t + 1 >= self.horizon {
                Outcome::Truncated
            } else {
                Outcome::None
            },
        })
    }
}

impl<T: Real> Default for ToyParamEnv<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Environment<T> for ToyParamEnv<T> {
    type Action = ParamAction<T>;

    fn observation_dim(&self) -> usize {
        2
    }

    fn action_dim(&self) -> usize {
        2
    }

    fn reset(&mut self, _seed: u64) -> Vec<T> {
        self.pos = Self::START.map(T::lit);
        self.t = 0;
        self.pos.to_vec()
    }

    fn step(&mut self, action: &ParamAction<T>) -> Result<StepResult<T>> {
        let r = self.transition(&self.pos, action, self.t)?;
        self.pos = [r.next_state[0], r.next_state[1]];
        self.t += 1;
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn platform() -> Platform2D<f64> {
        Platform2D::new(PlatformConfig::default()).unwrap()
    }

    #[test]
    fn reset_is_fixed() {
        let mut env = platform();
        assert_eq!(env.reset(1), vec![-1.0, -1.0]);
        assert_eq!(env.reset(99), vec![-1.0, -1.0]);
        let phi = Platform2D::<f64>::potential(&[-1.0, -1.0]);
        assert!((phi - 2.828_427_1).abs() < 1e-7);
    }

    #[test]
    fn step_examples() {
        let mut env = platform();
        env.reset(0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let r = env.step(&UnitVector::new(vec![h, h]).unwrap()).unwrap();
        assert!((r.reward - 0.1).abs() < 1e-15);
        assert_eq!(r.terminal, Outcome::None);

        env.reset(0);
        let r = env.step(&UnitVector::new(vec![-h, -h]).unwrap()).unwrap();
        assert!((r.reward + 0.1).abs() < 1e-15);
        assert_eq!(r.terminal, Outcome::None);
        assert!((r.next_state[0] + 1.070_710_7).abs() < 1e-7);

        let r = env.transition(&[-1.45, 0.0], &[-1.0, 0.0], 0).unwrap();
        assert_eq!(r.terminal, Outcome::FellOff);
        assert!((r.next_state[0] + 1.55).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_unit_direction() {
        let env = platform();
        assert!(env.transition(&[0.0, 0.0], &[1.0, 1e-4], 0).is_err());
        assert!(env.transition(&[0.0, 0.0], &[1.0 + 1e-10, 0.0], 0).is_ok());
    }

    #[test]
    fn straight_line_reaches_goal_in_28_steps() {
        let mut env = platform();
        env.reset(0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let dir = UnitVector::new(vec![h, h]).unwrap();
        let mut steps = 0;
        loop {
            steps += 1;
            if env.step(&dir).unwrap().terminal == Outcome::Goal {
                break;
            }
        }
        assert_eq!(steps, 28);
        let cfg = PlatformConfig::default();
        assert_eq!(cfg.optimal_steps(), 28);
        assert!((cfg.optimal_return(0.99) - 2.4528).abs() < 1e-4);
    }

    #[test]
    fn truncates_at_max_steps() {
        let mut env = Platform2D::<f64>::new(PlatformConfig {
            max_steps: 3,
            ..Default::default()
        })
        .unwrap();
        env.reset(0);
        let up = UnitVector::new(vec![0.0, 1.0]).unwrap();
        let down = UnitVector::new(vec![0.0, -1.0]).unwrap();
        assert_eq!(env.step(&up).unwrap().terminal, Outcome::None);
        assert_eq!(env.step(&down).unwrap().terminal, Outcome::None);
        assert_eq!(env.step(&up).unwrap().terminal, Outcome::Truncated);
    }

    #[test]
    fn toy_examples() {
        let mut env = ToyParamEnv::<f64>::new();
        let s = env.reset(0);
        let toward = UnitVector::normalize(&[2.0, 0.5]).unwrap();
        let r = env
            .transition(&s, &ParamAction { k: 0, omega: ParamValue::Direction(toward) }, 0)
            .unwrap();
        assert!(r.reward > 0.0);
        let r = env
            .transition(&s, &ParamAction { k: 1, omega: ParamValue::Scalar(0.0) }, 0)
            .unwrap();
        assert_eq!(r.reward, 0.0);
        assert_eq!(r.next_state, s);
        assert!(env
            .transition(&s, &ParamAction { k: 2, omega: ParamValue::None }, 0)
            .is_err());
        assert!(env
            .transition(&s, &ParamAction { k: 1, omega: ParamValue::Scalar(1.5) }, 0)
            .is_err());
        for t in 0..50 {
            let r = env.step(&ParamAction { k: 1, omega: ParamValue::Scalar(0.5) }).unwrap();
            assert_eq!(r.terminal == Outcome::Truncated, t == 49);
        }
    }
}
