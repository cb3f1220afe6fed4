//! Sampling distributions and their push-forwards.
//!
//! Every family here is parametrized by a mean vector and one shared scale
//! `sigma` (covariance `sigma^2 I`). Scores are gradients of the log-density
//! with respect to `(mean, sigma)`; policies chain them through their own
//! parameters.

mod angular;
mod clipped;
mod gaussian;
mod wrapped;

pub use angular::AngularGaussian;
pub use clipped::{ClipInterval, ClipSide, ClippedGaussian};
pub use gaussian::DiagGaussian;
pub use wrapped::WrappedAngle;

use crate::error::{invalid, Result};
use crate::scalar::{norm_sq, Real};

/// Smallest admissible scale. Keeps every family differentiable in its
/// parameters with bounded score.
pub const SIGMA_FLOOR: f64 = 1e-4;

/// Tolerance on `| ||x|| - 1 |` accepted by [`UnitVector::new`].
pub const UNIT_TOLERANCE: f64 = 1e-12;

/// Gradient of a log-density with respect to `(mean, sigma)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Score<T> {
    pub d_mean: Vec<T>,
    pub d_sigma: T,
}

impl<T: Real> Score<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            d_mean: vec![T::zero(); dim],
            d_sigma: T::zero(),
        }
    }

    /// `[d_mean..., d_sigma]`
    pub fn to_flat(&self) -> Vec<T> {
        let mut v = self.d_mean.clone();
        v.push(self.d_sigma);
        v
    }

    pub fn is_finite(&self) -> bool {
        self.d_sigma.is_finite() && self.d_mean.iter().all(|x| x.is_finite())
    }

    pub fn scaled(&self, q: T) -> Self {
        Self {
            d_mean: self.d_mean.iter().map(|&x| x * q).collect(),
            d_sigma: self.d_sigma * q,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            d_mean: self
                .d_mean
                .iter()
                .zip(&other.d_mean)
                .map(|(&a, &b)| a - b)
                .collect(),
            d_sigma: self.d_sigma - other.d_sigma,
        }
    }
}

/// A point on the unit sphere `S^{d-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector<T>(Vec<T>);

impl<T: Real> UnitVector<T> {
    /// Accepts `x` if its norm is within [`UNIT_TOLERANCE`] of one.
    pub fn new(x: Vec<T>) -> Result<Self> {
        Self::with_tolerance(x, T::lit(UNIT_TOLERANCE))
    }

    pub fn with_tolerance(x: Vec<T>, tol: T) -> Result<Self> {
        let n = norm_sq(&x).sqrt();
        if x.is_empty() || !((n - T::one()).abs() <= tol) {
            return Err(invalid("direction", format!("norm {n} is not 1")));
        }
        Ok(Self(x))
    }

    /// `a / ||a||`, or `None` when `||a||` is too small to normalize.
    pub fn normalize(a: &[T]) -> Option<Self> {
        let n = norm_sq(a).sqrt();
        if !(n > T::lit(1e-300).max(T::min_positive_value())) || !n.is_finite() {
            return None;
        }
        Some(Self(a.iter().map(|&v| v / n).collect()))
    }

    /// Direction at `angle` radians in the plane.
    pub fn from_angle(angle: T) -> Self {
        Self(vec![angle.cos(), angle.sin()])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

impl<T> AsRef<[T]> for UnitVector<T> {
    fn as_ref(&self) -> &[T] {
        &self.0
    }
}

pub(crate) fn check_sigma<T: Real>(sigma: T) -> Result<()> {
    if !(sigma >= T::lit(SIGMA_FLOOR)) || !sigma.is_finite() {
        return Err(invalid(
            "sigma",
            format!("{sigma} below floor {SIGMA_FLOOR:e} or not finite"),
        ));
    }
    Ok(())
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(crate::error::Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_vector_validation() {
        assert!(UnitVector::new(vec![0.6, 0.8]).is_ok());
        assert!(UnitVector::new(vec![0.6, 0.81]).is_err());
        assert!(UnitVector::<f64>::new(vec![]).is_err());
        assert!(UnitVector::normalize(&[0.0, 0.0]).is_none());
        let u = UnitVector::normalize(&[3.0, 4.0]).unwrap();
        assert_eq!(u.as_slice(), &[0.6, 0.8]);
    }

    #[test]
    fn score_flattening() {
        let s = Score {
            d_mean: vec![1.0, 2.0],
            d_sigma: 3.0,
        };
        assert_eq!(s.to_flat(), vec![1.0, 2.0, 3.0]);
        assert_eq!(s.scaled(2.0).to_flat(), vec![2.0, 4.0, 6.0]);
        assert_eq!(s.sub(&s), Score::zeros(2));
    }
}
