//! Policy-gradient estimators and the coupled variance harness.
//!
//! The standard estimator scales the score of the sampling distribution;
//! the marginal estimator scales the score of the distribution of the
//! executed (transformed) action. Both are unbiased for the same gradient.
//! The harness draws one raw action, evaluates both scores on it, and
//! compares trace variances.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::scalar::{dot, Real};

/// Which score the actor update uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    /// Score of the sampling distribution.
    Standard,
    /// Angular-Gaussian score of the normalized action.
    Angular,
    /// Clipped score of the interval-clipped action.
    Clipped,
    /// One-dimensional Gaussian over the angle.
    WrappedAngle,
    /// Parametrized action space; `marginal` selects the push-forward score
    /// for the parameter block.
    Parametrized { marginal: bool },
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Standard => "standard",
            EstimatorKind::Angular => "angular",
            EstimatorKind::Clipped => "clipped",
            EstimatorKind::WrappedAngle => "wrapped_angle",
            EstimatorKind::Parametrized { marginal: false } => "parametrized",
            EstimatorKind::Parametrized { marginal: true } => "parametrized_marginal",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "standard" => EstimatorKind::Standard,
            "angular" => EstimatorKind::Angular,
            "clipped" => EstimatorKind::Clipped,
            "wrapped_angle" => EstimatorKind::WrappedAngle,
            "parametrized" => EstimatorKind::Parametrized { marginal: false },
            "parametrized_marginal" => EstimatorKind::Parametrized { marginal: true },
            other => return Err(invalid("estimator", format!("unknown `{other}`"))),
        })
    }
}

/// One gradient sample `q * score` in policy-parameter coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct GradSample<T> {
    pub grad: Vec<T>,
    pub weight: T,
}

/// `q * score`, where `score` is already chained to the policy parameters.
pub fn pg_estimate<T: Real>(chained_score: &[T], q: T) -> Result<GradSample<T>> {
    if !q.is_finite() || chained_score.iter().any(|v| !v.is_finite()) {
        return Err(invalid("score", "non-finite input"));
    }
    Ok(GradSample {
        grad: chained_score.iter().map(|&s| q * s).collect(),
        weight: q,
    })
}

/// Score of a parametrized action `(k, omega)`: the softmax log-probability
/// gradient for `k` followed by one block per discrete action, where only
/// block `k` is non-zero and holds `param_score` (standard or marginal,
/// as chosen by the caller).
pub fn parametrized_score<T: Real>(
    logits: &[T],
    block_lens: &[usize],
    k: usize,
    param_score: Option<&crate::distributions::Score<T>>,
) -> Result<Vec<T>> {
    if logits.len() != block_lens.len() {
        return Err(Error::DimensionMismatch {
            expected: block_lens.len(),
            got: logits.len(),
        });
    }
    if k >= logits.len() {
        return Err(Error::InvalidAction(format!(
            "action {k} out of range 0..{}",
            logits.len()
        )));
    }
    let probs = crate::policy::softmax(logits);
    let mut out: Vec<T> = probs.iter().map(|&p| -p).collect();
    out[k] = out[k] + T::one();
    for (j, &len) in block_lens.iter().enumerate() {
        if j == k {
            match param_score {
                Some(s) => {
                    let flat = s.to_flat();
                    if flat.len() != len {
                        return Err(Error::DimensionMismatch {
                            expected: len,
                            got: flat.len(),
                        });
                    }
                    out.extend(flat);
                }
                None if len == 0 => {}
                None => {
                    return Err(Error::DimensionMismatch {
                        expected: len,
                        got: 0,
                    })
                }
            }
        } else {
            out.extend(std::iter::repeat_n(T::zero(), len));
        }
    }
    Ok(out)
}

/// Worst relative error between `score` and central differences of
/// `log_density` around `theta`. Errors are relative to the largest
/// analytic component (or 1, whichever is larger), so near-zero
/// components do not dominate.
pub fn finite_diff_check<T: Real, F: Fn(&[T]) -> T>(
    log_density: F,
    score: &[T],
    theta: &[T],
    h: T,
) -> Result<T> {
    if !(h > T::lit(1e-8) && h < T::lit(1e-2)) {
        return Err(invalid("h", format!("{h} not in (1e-8, 1e-2)")));
    }
    if score.len() != theta.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            got: score.len(),
        });
    }
    let scale = score.iter().fold(T::one(), |m, v| m.max(v.abs()));
    let mut worst = T::zero();
    let mut probe = theta.to_vec();
    for i in 0..theta.len() {
        probe[i] = theta[i] + h;
        let up = log_density(&probe);
        probe[i] = theta[i] - h;
        let down = log_density(&probe);
        probe[i] = theta[i];
        let fd = (up - down) / (T::lit(2.0) * h);
        worst = worst.max((fd - score[i]).abs() / scale);
    }
    Ok(worst)
}

/// Streaming componentwise comparison of two estimators' means.
#[derive(Debug, Clone)]
pub struct MeanAgreement {
    n: usize,
    sum1: Vec<f64>,
    sum2: Vec<f64>,
    sq1: Vec<f64>,
    sq2: Vec<f64>,
    sqd: Vec<f64>,
}

/// Summary of [`MeanAgreement`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanComparison {
    pub n: usize,
    /// `max_i |mean1_i - mean2_i| / sqrt(se1_i^2 + se2_i^2)`
    pub max_z_pooled: f64,
    /// Same, with the standard error of the paired difference.
    pub max_z_paired: f64,
    pub max_abs_diff: f64,
}

impl MeanAgreement {
    pub fn new(dim: usize) -> Self {
        Self {
            n: 0,
            sum1: vec![0.0; dim],
            sum2: vec![0.0; dim],
            sq1: vec![0.0; dim],
            sq2: vec![0.0; dim],
            sqd: vec![0.0; dim],
        }
    }

    pub fn push<T: Real>(&mut self, g1: &[T], g2: &[T]) {
        self.n += 1;
        for i in 0..self.sum1.len() {
            let a = g1[i].to_f64().unwrap_or(f64::NAN);
            let b = g2[i].to_f64().unwrap_or(f64::NAN);
            self.sum1[i] += a;
            self.sum2[i] += b;
            self.sq1[i] += a * a;
            self.sq2[i] += b * b;
            self.sqd[i] += (a - b) * (a - b);
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.n += other.n;
        for i in 0..self.sum1.len() {
            self.sum1[i] += other.sum1[i];
            self.sum2[i] += other.sum2[i];
            self.sq1[i] += other.sq1[i];
            self.sq2[i] += other.sq2[i];
            self.sqd[i] += other.sqd[i];
        }
    }

    pub fn summary(&self) -> MeanComparison {
        let n = self.n as f64;
        let var = |s: f64, sq: f64| ((sq - s * s / n) / (n - 1.0)).max(0.0);
        let mut out = MeanComparison {
            n: self.n,
            max_z_pooled: 0.0,
            max_z_paired: 0.0,
            max_abs_diff: 0.0,
        };
        for i in 0..self.sum1.len() {
            let diff = (self.sum1[i] - self.sum2[i]) / n;
            let se_pooled = ((var(self.sum1[i], self.sq1[i]) + var(self.sum2[i], self.sq2[i])) / n).sqrt();
            let se_paired = (var(self.sum1[i] - self.sum2[i], self.sqd[i]) / n).sqrt();
            let z = |se: f64| if se > 0.0 { diff.abs() / se } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
            out.max_z_pooled = out.max_z_pooled.max(z(se_pooled));
            out.max_z_paired = out.max_z_paired.max(z(se_paired));
            out.max_abs_diff = out.max_abs_diff.max(diff.abs());
        }
        out
    }
}

/// One raw draw evaluated under both estimators, in the policy's
/// distribution coordinates (before `q` scaling and chaining).
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledDraw<T, A> {
    pub standard: Vec<T>,
    pub marginal: Vec<T>,
    pub action: A,
}

/// A policy whose sampling and push-forward scores can be evaluated on the
/// same draw.
pub trait CoupledPolicy<T: Real> {
    /// The executed (transformed) action.
    type Action;

    fn label(&self) -> &'static str;
    /// Length of the scores returned by [`coupled_draws`](Self::coupled_draws).
    fn score_dim(&self) -> usize;
    /// Length of the chained gradient.
    fn n_params(&self) -> usize;
    /// Rows `d coord_i / d theta`; `None` when the scores are already in
    /// policy-parameter coordinates.
    fn jacobian(&self, state: &[T]) -> Result<Option<Vec<Vec<T>>>>;
    fn coupled_draws<R: Rng + ?Sized>(
        &self,
        state: &[T],
        n: usize,
        rng: &mut R,
    ) -> Result<Vec<CoupledDraw<T, Self::Action>>>;
}

/// Trace variances of the two estimators and their gap, with bootstrap
/// standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub var_standard: f64,
    pub var_marginal: f64,
    /// `var_standard - var_marginal`
    pub gap: f64,
    #[serde(rename = "stderr")]
    pub mc_stderr_gap: f64,
    #[serde(rename = "n")]
    pub n_samples: usize,
    pub estimator: String,
    pub seed: u64,
    /// `E[||q (score_standard - score_marginal)||^2]` on the same draws: the
    /// expected total scaled Fisher information of the conditional law of
    /// the raw action given the executed one.
    pub conditional_fisher: f64,
    pub conditional_fisher_stderr: f64,
    /// Bootstrap standard error of `gap - conditional_fisher`.
    pub identity_stderr: f64,
    pub n_states: usize,
    /// Which action-value stand-in scaled the scores.
    #[serde(default)]
    pub q: String,
}

impl VarianceReport {
    pub fn ratio(&self) -> f64 {
        self.var_marginal / self.var_standard
    }
}

/// Options for [`measure_variance`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceOptions {
    /// Draws per state.
    pub n_per_state: usize,
    pub bootstrap_resamples: usize,
    pub seed: u64,
}

impl Default for VarianceOptions {
    fn default() -> Self {
        Self {
            n_per_state: 1000,
            bootstrap_resamples: 1000,
            seed: 0,
        }
    }
}

/// Smallest total number of draws accepted by [`measure_variance`].
pub const MIN_VARIANCE_SAMPLES: usize = 1000;

struct StateBlock {
    /// `K_s = J_s J_s'`, row-major `p x p`
    gram: Vec<f64>,
    u1: Vec<Vec<f64>>,
    u2: Vec<Vec<f64>>,
    sq1: Vec<f64>,
    sq2: Vec<f64>,
    sqr: Vec<f64>,
}

fn quad_form(k: &[f64], x: &[f64], y: &[f64]) -> f64 {
    let p = x.len();
    let mut acc = 0.0;
    for i in 0..p {
        let row = &k[i * p..(i + 1) * p];
        acc += x[i] * row.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    }
    acc
}

fn gram(a: Option<&Vec<Vec<f64>>>, b: Option<&Vec<Vec<f64>>>, p: usize) -> Vec<f64> {
    let mut g = vec![0.0; p * p];
    match (a, b) {
        (Some(a), Some(b)) => {
            for i in 0..p {
                for j in 0..p {
                    g[i * p + j] = a[i].iter().zip(&b[j]).map(|(x, y)| x * y).sum();
                }
            }
        }
        _ => {
            for i in 0..p {
                g[i * p + i] = 1.0;
            }
        }
    }
    g
}

/// Draws `n_per_state` coupled actions at each state, scales both scores by
/// `q(state, executed action)`, and reports the pooled trace variance of
/// each chained estimator, their gap, and `E[q^2 ||psi - psi~||^2]`.
///
/// Norms are evaluated through the Gram blocks `J_s J_t'` of the policy
/// Jacobian, so the per-draw cost does not grow with the parameter count.
/// Standard errors come from a bootstrap that resamples draws within each
/// state.
pub fn measure_variance<T, P, Q>(
    policy: &P,
    states: &[Vec<T>],
    q: Q,
    opts: VarianceOptions,
) -> Result<VarianceReport>
where
    T: Real,
    P: CoupledPolicy<T>,
    Q: Fn(&[T], &P::Action) -> Result<T>,
{
    let n = opts.n_per_state;
    if states.is_empty() || n * states.len() < MIN_VARIANCE_SAMPLES {
        return Err(invalid(
            "n",
            format!(
                "{} draws is below the minimum of {MIN_VARIANCE_SAMPLES}",
                n * states.len()
            ),
        ));
    }
    if opts.bootstrap_resamples < 2 {
        return Err(invalid("bootstrap_resamples", "need at least 2"));
    }
    let p = policy.score_dim();
    let to64 = |v: &[T]| -> Vec<f64> { v.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect() };

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut jacobians = Vec::with_capacity(states.len());
    let mut blocks = Vec::with_capacity(states.len());
    for s in states {
        let jac = policy
            .jacobian(s)?
            .map(|rows| rows.iter().map(|r| to64(r)).collect::<Vec<_>>());
        let k = gram(jac.as_ref(), jac.as_ref(), p);
        let draws = policy.coupled_draws(s, n, &mut rng)?;
        let mut block = StateBlock {
            gram: k,
            u1: Vec::with_capacity(n),
            u2: Vec::with_capacity(n),
            sq1: Vec::with_capacity(n),
            sq2: Vec::with_capacity(n),
            sqr: Vec::with_capacity(n),
        };
        for d in draws {
            let qv = q(s, &d.action)?.to_f64().unwrap_or(f64::NAN);
            let u1: Vec<f64> = to64(&d.standard).into_iter().map(|v| v * qv).collect();
            let u2: Vec<f64> = to64(&d.marginal).into_iter().map(|v| v * qv).collect();
            let r: Vec<f64> = u1.iter().zip(&u2).map(|(a, b)| a - b).collect();
            block.sq1.push(quad_form(&block.gram, &u1, &u1));
            block.sq2.push(quad_form(&block.gram, &u2, &u2));
            block.sqr.push(quad_form(&block.gram, &r, &r));
            block.u1.push(u1);
            block.u2.push(u2);
        }
        if block.sq1.iter().chain(&block.sq2).any(|v| !v.is_finite()) {
            return Err(invalid("scores", "non-finite estimator value"));
        }
        jacobians.push(jac);
        blocks.push(block);
    }

    let n_states = states.len();
    let mut cross = vec![vec![Vec::new(); n_states]; n_states];
    for a in 0..n_states {
        for b in a..n_states {
            let g = gram(jacobians[a].as_ref(), jacobians[b].as_ref(), p);
            if a != b {
                let mut gt = vec![0.0; p * p];
                for i in 0..p {
                    for j in 0..p {
                        gt[j * p + i] = g[i * p + j];
                    }
                }
                cross[b][a] = gt;
            }
            cross[a][b] = g;
        }
    }

    let total = (n * n_states) as f64;
    // Statistics for one set of per-state index lists (None = identity).
    let stats = |picks: Option<&[Vec<usize>]>| -> (f64, f64, f64) {
        let mut e1 = 0.0;
        let mut e2 = 0.0;
        let mut er = 0.0;
        let mut sums1 = Vec::with_capacity(n_states);
        let mut sums2 = Vec::with_capacity(n_states);
        for (si, b) in blocks.iter().enumerate() {
            let mut s1 = vec![0.0; p];
            let mut s2 = vec![0.0; p];
            let mut add = |i: usize| {
                e1 += b.sq1[i];
                e2 += b.sq2[i];
                er += b.sqr[i];
                for c in 0..p {
                    s1[c] += b.u1[i][c];
                    s2[c] += b.u2[i][c];
                }
            };
            match picks {
                Some(p) => p[si].iter().for_each(|&i| add(i)),
                None => (0..n).for_each(&mut add),
            }
            sums1.push(s1);
            sums2.push(s2);
        }
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for a in 0..n_states {
            for b in 0..n_states {
                m1 += quad_form(&cross[a][b], &sums1[a], &sums1[b]);
                m2 += quad_form(&cross[a][b], &sums2[a], &sums2[b]);
            }
        }
        let v1 = e1 / total - m1 / (total * total);
        let v2 = e2 / total - m2 / (total * total);
        (v1, v2, er / total)
    };

    let (var_standard, var_marginal, conditional_fisher) = stats(None);

    let replicates: Vec<(f64, f64)> = (0..opts.bootstrap_resamples)
        .into_par_iter()
        .map(|rep| {
            let mut brng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x9e37_79b9_7f4a_7c15);
            brng.set_stream(rep as u64 + 1);
            let picks: Vec<Vec<usize>> = (0..n_states)
                .map(|_| (0..n).map(|_| brng.random_range(0..n)).collect())
                .collect();
            let (v1, v2, f) = stats(Some(&picks));
            (v1 - v2, f)
        })
        .collect();
    let sd = |xs: &mut dyn Iterator<Item = f64>| -> f64 {
        let v: Vec<f64> = xs.collect();
        let m = v.iter().sum::<f64>() / v.len() as f64;
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
    };

    Ok(VarianceReport {
        var_standard,
        var_marginal,
        gap: var_standard - var_marginal,
        mc_stderr_gap: sd(&mut replicates.iter().map(|r| r.0)),
        n_samples: n * n_states,
        estimator: policy.label().to_string(),
        seed: opts.seed,
        conditional_fisher,
        conditional_fisher_stderr: sd(&mut replicates.iter().map(|r| r.1)),
        identity_stderr: sd(&mut replicates.iter().map(|r| r.0 - r.1)),
        n_states,
        q: String::from("custom"),
    })
}

/// Componentwise agreement of the chained standard and marginal estimators
/// at fixed parameters, over `n` coupled draws at each state.
pub fn compare_estimator_means<T, P, Q>(
    policy: &P,
    states: &[Vec<T>],
    q: Q,
    n: usize,
    seed: u64,
) -> Result<MeanComparison>
where
    T: Real,
    P: CoupledPolicy<T> + Sync,
    Q: Fn(&[T], &P::Action) -> Result<T> + Sync,
    T: Send,
{
    const CHUNK: usize = 50_000;
    let dim = policy.n_params();
    let mut acc = MeanAgreement::new(dim);
    for (si, s) in states.iter().enumerate() {
        let jac = policy.jacobian(s)?;
        let chunks = n.div_ceil(CHUNK);
        let parts: Vec<Result<MeanAgreement>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream((si * chunks + c) as u64);
                let m = CHUNK.min(n - c * CHUNK);
                let mut local = MeanAgreement::new(dim);
                for d in policy.coupled_draws(s, m, &mut rng)? {
                    let qv = q(s, &d.action)?;
                    let (g1, g2) = match &jac {
                        None => (
                            d.standard.iter().map(|&v| v * qv).collect::<Vec<T>>(),
                            d.marginal.iter().map(|&v| v * qv).collect::<Vec<T>>(),
                        ),
                        Some(rows) => (chain_rows(rows, &d.standard, qv), chain_rows(rows, &d.marginal, qv)),
                    };
                    local.push(&g1, &g2);
                }
                Ok(local)
            })
            .collect();
        for part in parts {
            acc.merge(&part?);
        }
    }
    Ok(acc.summary())
}

fn chain_rows<T: Real>(rows: &[Vec<T>], coords: &[T], q: T) -> Vec<T> {
    let mut g = vec![T::zero(); rows.first().map_or(0, Vec::len)];
    for (row, &c) in rows.iter().zip(coords) {
        let w = c * q;
        for (gi, &r) in g.iter_mut().zip(row) {
            *gi = *gi + w * r;
        }
    }
    g
}

/// Trace of the sample covariance, `mean ||y - mean y||^2`.
pub fn trace_variance<T: Real>(samples: &[Vec<T>]) -> T {
    let n = T::from_usize_lossy(samples.len());
    let dim = samples.first().map_or(0, Vec::len);
    let mut mean = vec![T::zero(); dim];
    for s in samples {
        for (m, &v) in mean.iter_mut().zip(s) {
            *m = *m + v;
        }
    }
    for m in &mut mean {
        *m = *m / n;
    }
    samples
        .iter()
        .map(|s| {
            let d: Vec<T> = s.iter().zip(&mean).map(|(&a, &b)| a - b).collect();
            dot(&d, &d)
        })
        .sum::<T>()
        / n
}
