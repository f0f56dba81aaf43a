//! Bayesian optimization of expensive multi-attribute functions for a
//! decision-maker whose utility function is uncertain and learned from
//! pairwise comparisons.
//!
//! The numerical core ([`gp`], [`utility`], [`acquisition`], [`problems`])
//! is generic over a [`Scalar`] (`f32` or `f64`). Orchestration
//! ([`experiment`], [`bench`]) and the serialized formats work in `f64`; the
//! aliases at the crate root name the `f64` instantiations.

pub mod acquisition;
pub mod bench;
pub mod domain;
mod error;
pub mod experiment;
pub mod gp;
pub mod linalg;
pub mod optim;
pub mod preference;
pub mod problems;
mod scalar;
pub mod stats;
pub mod utility;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type DesignBox = domain::DesignBox<f64>;
pub type GpModel = gp::GpModel<f64>;
pub type KernelHyperparams = gp::KernelHyperparams<f64>;
pub type ThetaPrior = utility::ThetaPrior<f64>;
pub type ThetaPosterior = preference::ThetaPosterior<f64>;
pub type PreferenceRecord = preference::PreferenceRecord<f64>;
pub type AcquisitionContext<'a> = acquisition::AcquisitionContext<'a, f64>;
pub type SamplePath = gp::SamplePath<f64>;
