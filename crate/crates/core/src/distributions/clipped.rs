use rand::Rng;

use super::{DiagGaussian, Score};
use crate::error::{invalid, Error, Result};
use crate::scalar::Real;
use crate::special::{inv_mills, log_std_normal_cdf};

/// Closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipInterval<T> {
    lo: T,
    hi: T,
}

impl<T: Real> ClipInterval<T> {
    pub fn new(lo: T, hi: T) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(invalid("interval", format!("[{lo}, {hi}] is empty")));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> T {
        self.lo
    }

    pub fn hi(&self) -> T {
        self.hi
    }

    pub fn clip(&self, a: T) -> T {
        a.max(self.lo).min(self.hi)
    }

    /// Which part of the support `b` falls in.
    pub fn side(&self, b: T) -> Result<ClipSide> {
        if b < self.lo || b > self.hi || b.is_nan() {
            return Err(Error::OutOfSupport {
                value: b.to_f64().unwrap_or(f64::NAN),
                lo: self.lo.to_f64().unwrap_or(f64::NAN),
                hi: self.hi.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(if b == self.lo {
            ClipSide::Lower
        } else if b == self.hi {
            ClipSide::Upper
        } else {
            ClipSide::Interior
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClipSide {
    Lower,
    Interior,
    Upper,
}

/// Law of `clip(a, lo, hi)` for scalar `a ~ N(m, sigma^2)`: point masses at
/// both endpoints plus the Gaussian density in between.
#[derive(Debug, Clone, PartialEq)]
pub struct ClippedGaussian<T> {
    base: DiagGaussian<T>,
    interval: ClipInterval<T>,
}

impl<T: Real> ClippedGaussian<T> {
    pub fn new(base: DiagGaussian<T>, interval: ClipInterval<T>) -> Result<Self> {
        if base.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: base.dim(),
            });
        }
        Ok(Self { base, interval })
    }

    pub fn base(&self) -> &DiagGaussian<T> {
        &self.base
    }

    pub fn interval(&self) -> ClipInterval<T> {
        self.interval
    }

    fn z(&self, edge: T) -> T {
        (edge - self.base.mean()[0]) / self.base.sigma()
    }

    /// Returns the raw draw and its clipped value.
    pub fn sample_with_raw<R: Rng + ?Sized>(&self, rng: &mut R) -> (T, T) {
        let a = self.base.sample(rng)[0];
        (a, self.interval.clip(a))
    }

    /// Log of the mass at an endpoint, or of the density in the interior.
    pub fn log_density(&self, b: T) -> Result<T> {
        Ok(match self.interval.side(b)? {
            ClipSide::Lower => log_std_normal_cdf(self.z(self.interval.lo)),
            ClipSide::Upper => log_std_normal_cdf(-self.z(self.interval.hi)),
            ClipSide::Interior => self.base.log_density(&[b])?,
        })
    }

    /// Clipped score: gradient of the log tail mass at an endpoint, the
    /// Gaussian score in the interior. Tail ratios go through
    /// [`inv_mills`] so extreme endpoints stay finite.
    pub fn score(&self, b: T) -> Result<Score<T>> {
        let sigma = self.base.sigma();
        match self.interval.side(b)? {
            ClipSide::Lower => {
                // d/dtheta log Phi(z), z = (lo - m) / sigma
                let z = self.z(self.interval.lo);
                let h = inv_mills(z);
                Ok(Score {
                    d_mean: vec![-h / sigma],
                    d_sigma: -z * h / sigma,
                })
            }
            ClipSide::Upper => {
                // d/dtheta log Phi(-z), z = (hi - m) / sigma
                let z = self.z(self.interval.hi);
                let h = inv_mills(-z);
                Ok(Score {
                    d_mean: vec![h / sigma],
                    d_sigma: z * h / sigma,
                })
            }
            ClipSide::Interior => self.base.score(&[b]),
        }
    }
}
