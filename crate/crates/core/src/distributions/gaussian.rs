use rand::Rng;

use super::{check_dim, check_sigma, Score};
use crate::error::Result;
use crate::scalar::Real;

/// Isotropic Gaussian `N(mean, sigma^2 I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagGaussian<T> {
    mean: Vec<T>,
    sigma: T,
}

impl<T: Real> DiagGaussian<T> {
    /// Fails on an empty or non-finite mean, or `sigma` below
    /// [`SIGMA_FLOOR`](super::SIGMA_FLOOR).
    pub fn new(mean: Vec<T>, sigma: T) -> Result<Self> {
        check_sigma(sigma)?;
        if mean.is_empty() || mean.iter().any(|m| !m.is_finite()) {
            return Err(crate::error::invalid("mean", "empty or not finite"));
        }
        Ok(Self { mean, sigma })
    }

    /// Inverse of [`to_flat`](Self::to_flat).
    pub fn from_flat(theta: &[T]) -> Result<Self> {
        let (sigma, mean) = theta
            .split_last()
            .ok_or_else(|| crate::error::invalid("theta", "empty"))?;
        Self::new(mean.to_vec(), *sigma)
    }

    /// `[mean..., sigma]`, the coordinate order used by [`Score::to_flat`].
    pub fn to_flat(&self) -> Vec<T> {
        let mut v = self.mean.clone();
        v.push(self.sigma);
        v
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    /// `mean + sigma * z` with `z ~ N(0, I)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        self.mean
            .iter()
            .map(|&m| m + self.sigma * T::sample_standard_normal(rng))
            .collect()
    }

    pub fn log_density(&self, a: &[T]) -> Result<T> {
        check_dim(self.dim(), a.len())?;
        let d = T::from_usize_lossy(self.dim());
        let sq: T = a
            .iter()
            .zip(&self.mean)
            .map(|(&x, &m)| (x - m) * (x - m))
            .sum();
        Ok(-d / T::lit(2.0) * T::TAU().ln() - d * self.sigma.ln()
            - sq / (T::lit(2.0) * self.sigma * self.sigma))
    }

    /// `d_mean = (a - m) / sigma^2`, `d_sigma = ||a - m||^2 / sigma^3 - d / sigma`.
    pub fn score(&self, a: &[T]) -> Result<Score<T>> {
        check_dim(self.dim(), a.len())?;
        let s2 = self.sigma * self.sigma;
        let diff: Vec<T> = a.iter().zip(&self.mean).map(|(&x, &m)| x - m).collect();
        let sq: T = diff.iter().map(|&v| v * v).sum();
        Ok(Score {
            d_mean: diff.iter().map(|&v| v / s2).collect(),
            d_sigma: sq / (s2 * self.sigma) - T::from_usize_lossy(self.dim()) / self.sigma,
        })
    }
}
