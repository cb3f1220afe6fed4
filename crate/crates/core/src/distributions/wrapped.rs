use rand::Rng;

use super::{DiagGaussian, Score, UnitVector};
use crate::error::Result;
use crate::scalar::Real;

/// One-dimensional Gaussian over an angle, executed as the planar direction
/// `(cos a, sin a)`. The score ignores the `2 pi` periodicity of the
/// executed action and is taken in the unwrapped sample.
#[derive(Debug, Clone, PartialEq)]
pub struct WrappedAngle<T> {
    base: DiagGaussian<T>,
}

impl<T: Real> WrappedAngle<T> {
    pub fn new(mean_angle: T, sigma: T) -> Result<Self> {
        Ok(Self {
            base: DiagGaussian::new(vec![mean_angle], sigma)?,
        })
    }

    pub fn base(&self) -> &DiagGaussian<T> {
        &self.base
    }

    /// Returns the sampled angle and the direction it executes.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (T, UnitVector<T>) {
        let a = self.base.sample(rng)[0];
        (a, UnitVector::from_angle(a))
    }

    pub fn log_density(&self, angle: T) -> Result<T> {
        self.base.log_density(&[angle])
    }

    pub fn score(&self, angle: T) -> Result<Score<T>> {
        self.base.score(&[angle])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_examples() {
        let w = WrappedAngle::<f64>::new(0.0, 0.1).unwrap();
        assert_eq!(w.score(0.0).unwrap().d_mean, vec![0.0]);
        assert!((w.score(0.1).unwrap().d_mean[0] - 10.0).abs() < 1e-12);
        assert!(WrappedAngle::new(0.0, 0.0).is_err());
    }

    #[test]
    fn executed_direction_is_unit() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
        let w = WrappedAngle::<f64>::new(7.0, 2.0).unwrap();
        for _ in 0..100 {
            let (a, u) = w.sample(&mut rng);
            assert!((u.as_slice()[0] - a.cos()).abs() < 1e-15);
        }
    }
}
