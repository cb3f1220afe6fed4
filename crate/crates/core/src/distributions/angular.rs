use rand::Rng;

use super::{check_dim, DiagGaussian, Score, UnitVector};
use crate::error::{invalid, Result};
use crate::scalar::{dot, norm_sq, Real};
use crate::special::{log_m_function, m_ratio};

/// Law of `a / ||a||` for `a ~ N(mean, sigma^2 I)`, with density taken
/// against the surface measure of `S^{d-1}`.
///
/// With isotropic covariance and `||x|| = 1` the density reduces to
///
/// ```text
/// log f(x) = -(d-1)/2 log(2 pi) + (alpha^2 - ||m||^2 / sigma^2) / 2 + log M_{d-1}(alpha),
/// alpha = x . m / sigma
/// ```
///
/// because `-log|Sigma| / 2` and `-d/2 log(x' Sigma^-1 x)` cancel.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularGaussian<T> {
    base: DiagGaussian<T>,
}

impl<T: Real> AngularGaussian<T> {
    pub fn new(base: DiagGaussian<T>) -> Result<Self> {
        if base.dim() < 2 {
            return Err(invalid("mean", "angular Gaussian needs dimension >= 2"));
        }
        Ok(Self { base })
    }

    pub fn base(&self) -> &DiagGaussian<T> {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    fn alpha(&self, x: &[T]) -> T {
        dot(x, self.base.mean()) / self.base.sigma()
    }

    /// Draws `a` from the underlying Gaussian and returns `(a, a / ||a||)`.
    /// The measure-zero event `||a|| ~ 0` is resampled.
    pub fn sample_with_raw<R: Rng + ?Sized>(&self, rng: &mut R) -> (Vec<T>, UnitVector<T>) {
        loop {
            let a = self.base.sample(rng);
            if let Some(u) = UnitVector::normalize(&a) {
                return (a, u);
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> UnitVector<T> {
        self.sample_with_raw(rng).1
    }

    pub fn log_density(&self, x: &UnitVector<T>) -> Result<T> {
        check_dim(self.dim(), x.dim())?;
        let d = self.dim();
        let sigma = self.base.sigma();
        let alpha = self.alpha(x.as_slice());
        let mm = norm_sq(self.base.mean()) / (sigma * sigma);
        Ok(-T::from_usize_lossy(d - 1) / T::lit(2.0) * T::TAU().ln()
            + (alpha * alpha - mm) / T::lit(2.0)
            + log_m_function(d - 1, alpha))
    }

    /// Score in `(mean, sigma)`:
    ///
    /// `d_mean = (alpha + c) x / sigma - m / sigma^2`,
    /// `d_sigma = -alpha (alpha + c) / sigma + ||m||^2 / sigma^3`,
    /// with `c = M'_{d-1}(alpha) / M_{d-1}(alpha)` held at its current value.
    pub fn score(&self, x: &UnitVector<T>) -> Result<Score<T>> {
        check_dim(self.dim(), x.dim())?;
        let sigma = self.base.sigma();
        let s2 = sigma * sigma;
        let alpha = self.alpha(x.as_slice());
        let c = m_ratio(self.dim(), alpha)?;
        let k = (alpha + c) / sigma;
        let d_mean = x
            .as_slice()
            .iter()
            .zip(self.base.mean())
            .map(|(&xi, &mi)| k * xi - mi / s2)
            .collect();
        let d_sigma = -alpha * k + norm_sq(self.base.mean()) / (s2 * sigma);
        Ok(Score { d_mean, d_sigma })
    }

    /// Score of the radial conditional `r | b` at `a = r b`: the part of the
    /// Gaussian score that the direction does not carry.
    pub fn radial_score(&self, a: &[T]) -> Result<Score<T>> {
        let b = UnitVector::normalize(a).ok_or_else(|| invalid("a", "zero vector"))?;
        Ok(self.base.score(a)?.sub(&self.score(&b)?))
    }
}
