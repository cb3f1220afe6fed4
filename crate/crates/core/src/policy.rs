//! Policies: a mean model composed with a sampling family and a transform.
//!
//! Every policy here exposes its scores in distribution coordinates
//! `(mean, [sigma])` and chains them to its own parameters through the mean
//! model's Jacobian. With a learnable scale, `sigma` is the last policy
//! parameter.

use rand::Rng;

use crate::distributions::{
    AngularGaussian, ClipInterval, ClippedGaussian, DiagGaussian, Score, UnitVector, WrappedAngle,
};
use crate::error::{invalid, Error, Result};
use crate::estimators::{CoupledDraw, CoupledPolicy, EstimatorKind};
use crate::nn::Mlp;
use crate::scalar::Real;

/// Differentiable map from state to distribution mean.
pub trait MeanModel<T: Real> {
    fn output_dim(&self) -> usize;
    fn n_params(&self) -> usize;
    fn mean(&self, state: &[T]) -> Result<Vec<T>>;
    /// Accumulates `scale * d(upstream . mean(state)) / dtheta` into `grad`.
    fn vjp_into(&self, state: &[T], upstream: &[T], scale: T, grad: &mut [T]) -> Result<()>;
    fn params(&self) -> &[T];
    fn params_mut(&mut self) -> &mut [T];
}

impl<T: Real> MeanModel<T> for Mlp<T> {
    fn output_dim(&self) -> usize {
        self.spec().output_dim()
    }

    fn n_params(&self) -> usize {
        Mlp::n_params(self)
    }

    fn mean(&self, state: &[T]) -> Result<Vec<T>> {
        self.forward(state)
    }

    fn vjp_into(&self, state: &[T], upstream: &[T], scale: T, grad: &mut [T]) -> Result<()> {
        self.backward_into(state, upstream, scale, grad)
    }

    fn params(&self) -> &[T] {
        Mlp::params(self)
    }

    fn params_mut(&mut self) -> &mut [T] {
        Mlp::params_mut(self)
    }
}

/// State-independent mean whose parameters are the mean itself.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedMean<T>(pub Vec<T>);

impl<T: Real> MeanModel<T> for FixedMean<T> {
    fn output_dim(&self) -> usize {
        self.0.len()
    }

    fn n_params(&self) -> usize {
        self.0.len()
    }

    fn mean(&self, _state: &[T]) -> Result<Vec<T>> {
        Ok(self.0.clone())
    }

    fn vjp_into(&self, _state: &[T], upstream: &[T], scale: T, grad: &mut [T]) -> Result<()> {
        if upstream.len() != self.0.len() {
            return Err(Error::DimensionMismatch {
                expected: self.0.len(),
                got: upstream.len(),
            });
        }
        for (g, &u) in grad.iter_mut().zip(upstream) {
            *g = *g + scale * u;
        }
        Ok(())
    }

    fn params(&self) -> &[T] {
        &self.0
    }

    fn params_mut(&mut self) -> &mut [T] {
        &mut self.0
    }
}

/// Jacobian rows of a mean model (one per output), via unit upstreams.
pub fn model_jacobian<T: Real, M: MeanModel<T>>(model: &M, state: &[T]) -> Result<Vec<Vec<T>>> {
    let out = model.output_dim();
    (0..out)
        .map(|i| {
            let mut e = vec![T::zero(); out];
            e[i] = T::one();
            let mut row = vec![T::zero(); model.n_params()];
            model.vjp_into(state, &e, T::one(), &mut row)?;
            Ok(row)
        })
        .collect()
}

/// Mean model plus a shared scale, optionally learned.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianHead<T, M> {
    pub model: M,
    pub sigma: T,
    pub learn_sigma: bool,
}

impl<T: Real, M: MeanModel<T>> GaussianHead<T, M> {
    pub fn new(model: M, sigma: T, learn_sigma: bool) -> Result<Self> {
        crate::distributions::check_sigma(sigma)?;
        Ok(Self {
            model,
            sigma,
            learn_sigma,
        })
    }

    /// Length of the flattened policy-parameter gradient.
    pub fn n_params(&self) -> usize {
        self.model.n_params() + usize::from(self.learn_sigma)
    }

    /// Length of a score in distribution coordinates.
    pub fn score_dim(&self) -> usize {
        self.model.output_dim() + usize::from(self.learn_sigma)
    }

    pub fn gaussian(&self, state: &[T]) -> Result<DiagGaussian<T>> {
        DiagGaussian::new(self.model.mean(state)?, self.sigma)
    }

    /// Score restricted to the coordinates this head differentiates.
    pub fn reduce(&self, score: &Score<T>) -> Vec<T> {
        let mut v = score.d_mean.clone();
        if self.learn_sigma {
            v.push(score.d_sigma);
        }
        v
    }

    /// Accumulates `q * dlog f / dtheta` into `grad` (length [`n_params`](Self::n_params)).
    pub fn chain_into(&self, state: &[T], score: &Score<T>, q: T, grad: &mut [T]) -> Result<()> {
        if grad.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: grad.len(),
            });
        }
        let n = self.model.n_params();
        self.model.vjp_into(state, &score.d_mean, q, &mut grad[..n])?;
        if self.learn_sigma {
            grad[n] = grad[n] + q * score.d_sigma;
        }
        Ok(())
    }

    pub fn chain(&self, state: &[T], score: &Score<T>, q: T) -> Result<Vec<T>> {
        let mut g = vec![T::zero(); self.n_params()];
        self.chain_into(state, score, q, &mut g)?;
        Ok(g)
    }

    /// Jacobian of the reduced distribution coordinates in the policy parameters.
    pub fn jacobian(&self, state: &[T]) -> Result<Vec<Vec<T>>> {
        let mut rows = model_jacobian(&self.model, state)?;
        if self.learn_sigma {
            for r in &mut rows {
                r.push(T::zero());
            }
            let mut last = vec![T::zero(); self.n_params()];
            last[self.model.n_params()] = T::one();
            rows.push(last);
        }
        Ok(rows)
    }

    /// `theta += lr * grad`, then re-imposes the scale floor.
    pub fn apply_update(&mut self, grad: &[T], lr: T) {
        let n = self.model.n_params();
        crate::nn::sgd_step(self.model.params_mut(), &grad[..n], lr);
        if self.learn_sigma {
            self.sigma = (self.sigma + lr * grad[n]).max(T::lit(crate::distributions::SIGMA_FLOOR));
        }
    }

    /// Flat view of all policy parameters (model then sigma if learned).
    pub fn flat_params(&self) -> Vec<T> {
        let mut v = self.model.params().to_vec();
        if self.learn_sigma {
            v.push(self.sigma);
        }
        v
    }

    pub fn set_flat_params(&mut self, theta: &[T]) {
        let n = self.model.n_params();
        self.model.params_mut().copy_from_slice(&theta[..n]);
        if self.learn_sigma {
            self.sigma = theta[n].max(T::lit(crate::distributions::SIGMA_FLOOR));
        }
    }
}

/// One directional action: the sampled raw value (a vector, or an angle for
/// the wrapped baseline) and the executed unit direction.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalDraw<T> {
    pub raw: Vec<T>,
    pub direction: UnitVector<T>,
}

/// Policy over directions. `kind` selects the sampling family and which
/// score drives the update:
///
/// - `Standard`: `a ~ N(m, sigma^2 I)`, executes `a / ||a||`, Gaussian score.
/// - `Angular`: same draws, angular-Gaussian score of the direction.
/// - `WrappedAngle`: scalar angle `~ N(m, sigma^2)`, executes `(cos, sin)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalPolicy<T, M> {
    pub head: GaussianHead<T, M>,
    pub kind: EstimatorKind,
}

impl<T: Real, M: MeanModel<T>> DirectionalPolicy<T, M> {
    pub fn new(head: GaussianHead<T, M>, kind: EstimatorKind) -> Result<Self> {
        let out = head.model.output_dim();
        match kind {
            EstimatorKind::Standard | EstimatorKind::Angular if out >= 2 => {}
            EstimatorKind::WrappedAngle if out == 1 => {}
            EstimatorKind::Standard | EstimatorKind::Angular | EstimatorKind::WrappedAngle => {
                return Err(invalid(
                    "mean model",
                    format!("output dimension {out} does not fit estimator {kind}"),
                ))
            }
            other => {
                return Err(invalid(
                    "estimator",
                    format!("{other} does not act on directions"),
                ))
            }
        }
        Ok(Self { head, kind })
    }

    pub fn sample<R: Rng + ?Sized>(&self, state: &[T], rng: &mut R) -> Result<DirectionalDraw<T>> {
        let mean = self.head.model.mean(state)?;
        self.sample_at(mean, rng)
    }

    fn sample_at<R: Rng + ?Sized>(&self, mean: Vec<T>, rng: &mut R) -> Result<DirectionalDraw<T>> {
        match self.kind {
            EstimatorKind::WrappedAngle => {
                let w = WrappedAngle::new(mean[0], self.head.sigma)?;
                let (angle, direction) = w.sample(rng);
                Ok(DirectionalDraw {
                    raw: vec![angle],
                    direction,
                })
            }
            _ => {
                let ag = AngularGaussian::new(DiagGaussian::new(mean, self.head.sigma)?)?;
                let (raw, direction) = ag.sample_with_raw(rng);
                Ok(DirectionalDraw { raw, direction })
            }
        }
    }

    /// Deterministic action: the direction of the mean.
    pub fn mode(&self, state: &[T]) -> Result<UnitVector<T>> {
        let mean = self.head.model.mean(state)?;
        match self.kind {
            EstimatorKind::WrappedAngle => Ok(UnitVector::from_angle(mean[0])),
            _ => UnitVector::normalize(&mean).ok_or_else(|| invalid("mean", "zero mean has no direction")),
        }
    }

    /// Score of `draw` under the configured estimator.
    pub fn score(&self, state: &[T], draw: &DirectionalDraw<T>) -> Result<Score<T>> {
        let g = self.head.gaussian(state)?;
        match self.kind {
            EstimatorKind::Standard | EstimatorKind::WrappedAngle => g.score(&draw.raw),
            _ => AngularGaussian::new(g)?.score(&draw.direction),
        }
    }

    pub fn log_prob(&self, state: &[T], draw: &DirectionalDraw<T>) -> Result<T> {
        let g = self.head.gaussian(state)?;
        match self.kind {
            EstimatorKind::Standard | EstimatorKind::WrappedAngle => g.log_density(&draw.raw),
            _ => AngularGaussian::new(g)?.log_density(&draw.direction),
        }
    }

    /// `q * dlog f / dtheta` accumulated into `grad`.
    pub fn accumulate_gradient(
        &self,
        state: &[T],
        draw: &DirectionalDraw<T>,
        q: T,
        grad: &mut [T],
    ) -> Result<()> {
        let s = self.score(state, draw)?;
        self.head.chain_into(state, &s, q, grad)
    }
}

impl<T: Real, M: MeanModel<T>> CoupledPolicy<T> for DirectionalPolicy<T, M> {
    type Action = UnitVector<T>;

    fn label(&self) -> &'static str {
        "angular"
    }

    fn score_dim(&self) -> usize {
        self.head.score_dim()
    }

    fn n_params(&self) -> usize {
        self.head.n_params()
    }

    fn jacobian(&self, state: &[T]) -> Result<Option<Vec<Vec<T>>>> {
        self.head.jacobian(state).map(Some)
    }

    /// Gaussian score of the raw draw versus angular score of its direction.
    fn coupled_draws<R: Rng + ?Sized>(
        &self,
        state: &[T],
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<CoupledDraw<T, UnitVector<T>>>> {
        if self.kind == EstimatorKind::WrappedAngle {
            return Err(invalid("estimator", "wrapped_angle has no marginal counterpart"));
        }
        let g = self.head.gaussian(state)?;
        let ag = AngularGaussian::new(g.clone())?;
        (0..n)
            .map(|_| {
                let (raw, direction) = ag.sample_with_raw(rng);
                Ok(CoupledDraw {
                    standard: self.head.reduce(&g.score(&raw)?),
                    marginal: self.head.reduce(&ag.score(&direction)?),
                    action: direction,
                })
            })
            .collect()
    }
}

/// Scalar action clipped to an interval before execution.
#[derive(Debug, Clone, PartialEq)]
pub struct ClippedPolicy<T, M> {
    pub head: GaussianHead<T, M>,
    pub interval: ClipInterval<T>,
}

impl<T: Real, M: MeanModel<T>> ClippedPolicy<T, M> {
    pub fn new(head: GaussianHead<T, M>, interval: ClipInterval<T>) -> Result<Self> {
        if head.model.output_dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: head.model.output_dim(),
            });
        }
        Ok(Self { head, interval })
    }

    pub fn distribution(&self, state: &[T]) -> Result<ClippedGaussian<T>> {
        ClippedGaussian::new(self.head.gaussian(state)?, self.interval)
    }
}

impl<T: Real, M: MeanModel<T>> CoupledPolicy<T> for ClippedPolicy<T, M> {
    type Action = T;

    fn label(&self) -> &'static str {
        "clipped"
    }

    fn score_dim(&self) -> usize {
        self.head.score_dim()
    }

    fn n_params(&self) -> usize {
        self.head.n_params()
    }

    fn jacobian(&self, state: &[T]) -> Result<Option<Vec<Vec<T>>>> {
        self.head.jacobian(state).map(Some)
    }

    /// Gaussian score of the raw draw versus clipped score of `clip(a)`.
    fn coupled_draws<R: Rng + ?Sized>(
        &self,
        state: &[T],
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<CoupledDraw<T, T>>> {
        let cg = self.distribution(state)?;
        (0..n)
            .map(|_| {
                let (a, b) = cg.sample_with_raw(rng);
                Ok(CoupledDraw {
                    standard: self.head.reduce(&cg.base().score(&[a])?),
                    marginal: self.head.reduce(&cg.score(b)?),
                    action: b,
                })
            })
            .collect()
    }
}

/// Parameter family attached to one discrete action.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamFamily<T> {
    /// No continuous parameter.
    Unparametrized,
    /// Gaussian in `R^d` executed as its direction.
    Direction(DiagGaussian<T>),
    /// Scalar Gaussian executed after clipping.
    Clipped(ClippedGaussian<T>),
}

impl<T: Real> ParamFamily<T> {
    /// Length of this action's block: `dim + 1` for `(mean, sigma)`, or 0.
    pub fn block_len(&self) -> usize {
        match self {
            ParamFamily::Unparametrized => 0,
            ParamFamily::Direction(g) => g.dim() + 1,
            ParamFamily::Clipped(c) => c.base().dim() + 1,
        }
    }

    fn flat(&self) -> Vec<T> {
        match self {
            ParamFamily::Unparametrized => Vec::new(),
            ParamFamily::Direction(g) => g.to_flat(),
            ParamFamily::Clipped(c) => c.base().to_flat(),
        }
    }
}

/// Executed parameter of a parametrized action.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue<T> {
    None,
    Direction(UnitVector<T>),
    Scalar(T),
}

/// `(k, omega)`: discrete action with its executed parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamAction<T> {
    pub k: usize,
    pub omega: ParamValue<T>,
}

/// Policy over a parametrized action space with direct parameters
/// `theta = (logits, (mean_1, sigma_1), ..., (mean_K, sigma_K))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametrizedPolicy<T> {
    pub logits: Vec<T>,
    pub families: Vec<ParamFamily<T>>,
}

/// Raw draw before any transform, with the action it executes.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamDraw<T> {
    pub k: usize,
    pub raw: Vec<T>,
    pub action: ParamAction<T>,
}

impl<T: Real> ParametrizedPolicy<T> {
    pub fn new(logits: Vec<T>, families: Vec<ParamFamily<T>>) -> Result<Self> {
        if logits.is_empty() || logits.len() != families.len() {
            return Err(Error::DimensionMismatch {
                expected: families.len(),
                got: logits.len(),
            });
        }
        Ok(Self { logits, families })
    }

    pub fn block_lens(&self) -> Vec<usize> {
        self.families.iter().map(ParamFamily::block_len).collect()
    }

    /// Total length of the flattened parameter vector.
    pub fn n_params(&self) -> usize {
        self.logits.len() + self.block_lens().iter().sum::<usize>()
    }

    pub fn flat_params(&self) -> Vec<T> {
        let mut v = self.logits.clone();
        for f in &self.families {
            v.extend(f.flat());
        }
        v
    }

    /// Same structure with parameters replaced by `theta`.
    pub fn with_flat_params(&self, theta: &[T]) -> Result<Self> {
        if theta.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: theta.len(),
            });
        }
        let k = self.logits.len();
        let mut at = k;
        let mut families = Vec::with_capacity(k);
        for f in &self.families {
            let len = f.block_len();
            let block = &theta[at..at + len];
            at += len;
            families.push(match f {
                ParamFamily::Unparametrized => ParamFamily::Unparametrized,
                ParamFamily::Direction(_) => ParamFamily::Direction(DiagGaussian::from_flat(block)?),
                ParamFamily::Clipped(c) => {
                    ParamFamily::Clipped(ClippedGaussian::new(DiagGaussian::from_flat(block)?, c.interval())?)
                }
            });
        }
        Self::new(theta[..k].to_vec(), families)
    }

    pub fn probabilities(&self) -> Vec<T> {
        softmax(&self.logits)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamDraw<T> {
        let p = self.probabilities();
        let u = T::sample_unit(rng);
        let mut acc = T::zero();
        let mut k = p.len() - 1;
        for (i, &pi) in p.iter().enumerate() {
            acc = acc + pi;
            if u < acc {
                k = i;
                break;
            }
        }
        let (raw, omega) = match &self.families[k] {
            ParamFamily::Unparametrized => (Vec::new(), ParamValue::None),
            ParamFamily::Direction(g) => loop {
                let a = g.sample(rng);
                if let Some(u) = UnitVector::normalize(&a) {
                    break (a, ParamValue::Direction(u));
                }
            },
            ParamFamily::Clipped(c) => {
                let (a, b) = c.sample_with_raw(rng);
                (vec![a], ParamValue::Scalar(b))
            }
        };
        ParamDraw {
            k,
            raw,
            action: ParamAction { k, omega },
        }
    }

    /// Log-density of the raw draw under the sampling policy.
    pub fn log_density_raw(&self, draw: &ParamDraw<T>) -> Result<T> {
        let lp = log_softmax(&self.logits)[draw.k];
        Ok(lp + match &self.families[draw.k] {
            ParamFamily::Unparametrized => T::zero(),
            ParamFamily::Direction(g) => g.log_density(&draw.raw)?,
            ParamFamily::Clipped(c) => c.base().log_density(&draw.raw)?,
        })
    }

    /// Log-density of the executed action under the push-forward policy.
    pub fn log_density_effective(&self, action: &ParamAction<T>) -> Result<T> {
        let lp = log_softmax(&self.logits)[action.k];
        Ok(lp + match (&self.families[action.k], &action.omega) {
            (ParamFamily::Unparametrized, ParamValue::None) => T::zero(),
            (ParamFamily::Direction(g), ParamValue::Direction(u)) => {
                AngularGaussian::new(g.clone())?.log_density(u)?
            }
            (ParamFamily::Clipped(c), ParamValue::Scalar(b)) => c.log_density(*b)?,
            _ => return Err(Error::InvalidAction("parameter kind does not match action".into())),
        })
    }

    /// Full score of a draw; `marginal` selects the push-forward score for
    /// the parameter block of the chosen action.
    pub fn score(&self, draw: &ParamDraw<T>, marginal: bool) -> Result<Vec<T>> {
        let block = match (&self.families[draw.k], &draw.action.omega) {
            (ParamFamily::Unparametrized, _) => None,
            (ParamFamily::Direction(g), ParamValue::Direction(u)) => Some(if marginal {
                AngularGaussian::new(g.clone())?.score(u)?
            } else {
                g.score(&draw.raw)?
            }),
            (ParamFamily::Clipped(c), ParamValue::Scalar(b)) => Some(if marginal {
                c.score(*b)?
            } else {
                c.base().score(&draw.raw)?
            }),
            _ => return Err(Error::InvalidAction("parameter kind does not match action".into())),
        };
        crate::estimators::parametrized_score(&self.logits, &self.block_lens(), draw.k, block.as_ref())
    }
}

impl<T: Real> CoupledPolicy<T> for ParametrizedPolicy<T> {
    type Action = ParamAction<T>;

    fn label(&self) -> &'static str {
        "parametrized"
    }

    fn score_dim(&self) -> usize {
        self.n_params()
    }

    fn n_params(&self) -> usize {
        ParametrizedPolicy::n_params(self)
    }

    fn jacobian(&self, _state: &[T]) -> Result<Option<Vec<Vec<T>>>> {
        Ok(None)
    }

    fn coupled_draws<R: Rng + ?Sized>(
        &self,
        _state: &[T],
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<CoupledDraw<T, ParamAction<T>>>> {
        (0..n)
            .map(|_| {
                let draw = self.sample(rng);
                Ok(CoupledDraw {
                    standard: self.score(&draw, false)?,
                    marginal: self.score(&draw, true)?,
                    action: draw.action,
                })
            })
            .collect()
    }
}

pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn log_softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<T>().ln();
    logits.iter().map(|&l| l - lse).collect()
}
