//! Policy gradients with push-forward (marginal) scores for transformed
//! actions: special functions, action distributions, estimators, small
//! networks, environments and an A2C trainer.

pub mod distributions;
pub mod envs;
pub mod checks;
pub mod error;
pub mod estimators;
pub mod nn;
pub mod policy;
pub mod quadrature;
pub mod scalar;
pub mod special;
pub mod study;
pub mod trainer;

pub use error::{Error, Result};
pub use estimators::EstimatorKind;
pub use scalar::Real;

pub type Mlp64 = nn::Mlp<f64>;
pub type Mlp32 = nn::Mlp<f32>;
pub type DiagGaussian64 = distributions::DiagGaussian<f64>;
pub type AngularGaussian64 = distributions::AngularGaussian<f64>;
pub type ClippedGaussian64 = distributions::ClippedGaussian<f64>;
pub type AngularGaussian32 = distributions::AngularGaussian<f32>;
pub type ClippedGaussian32 = distributions::ClippedGaussian<f32>;
