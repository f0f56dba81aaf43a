use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::stats::rng_from_seed;
use crate::{Error, Result};

/// Prior distribution over utility parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThetaPrior<T> {
    /// Independent uniforms on `[lower_i, upper_i]`.
    UniformBox { lower: Vec<T>, upper: Vec<T> },
    /// Equal mass on each listed parameter vector.
    FiniteUniform { points: Vec<Vec<T>> },
    /// Uniform on `{θ : θ₁ ≥ … ≥ θ_k ≥ 0, Σθ = 1}`.
    OrderedSimplex { dim: usize },
}

impl<T: Scalar> ThetaPrior<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            ThetaPrior::UniformBox { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::Config("uniform prior bounds must be non-empty and of equal length".into()));
                }
                if lower.iter().zip(upper).any(|(&l, &u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
                    return Err(Error::Config("uniform prior needs finite lower ≤ upper".into()));
                }
            }
            ThetaPrior::FiniteUniform { points } => {
                if points.is_empty() || points.iter().any(|p| p.len() != points[0].len() || p.is_empty()) {
                    return Err(Error::Config("finite prior needs at least one point, all of equal length".into()));
                }
            }
            ThetaPrior::OrderedSimplex { dim } => {
                if *dim == 0 {
                    return Err(Error::Config("ordered simplex prior needs dim ≥ 1".into()));
                }
            }
        }
        Ok(())
    }

    /// Length of a parameter vector drawn from this prior.
    pub fn dim(&self) -> usize {
        match self {
            ThetaPrior::UniformBox { lower, .. } => lower.len(),
            ThetaPrior::FiniteUniform { points } => points[0].len(),
            ThetaPrior::OrderedSimplex { dim } => *dim,
        }
    }

    /// Support points when the prior is a finite set.
    pub fn atoms(&self) -> Option<&[Vec<T>]> {
        match self {
            ThetaPrior::FiniteUniform { points } => Some(points),
            _ => None,
        }
    }

    /// Whether `theta` lies in the support (within `tol` for the simplex sum).
    pub fn contains(&self, theta: &[T], tol: T) -> bool {
        if theta.len() != self.dim() {
            return false;
        }
        match self {
            ThetaPrior::UniformBox { lower, upper } => theta
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(&t, (&l, &u))| t >= l && t <= u),
            ThetaPrior::FiniteUniform { points } => points.iter().any(|p| p.as_slice() == theta),
            ThetaPrior::OrderedSimplex { .. } => {
                let sum = theta.iter().fold(T::zero(), |a, &b| a + b);
                theta.windows(2).all(|w| w[0] >= w[1])
                    && theta.iter().all(|&t| t >= T::zero())
                    && (sum - T::one()).abs() <= tol
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        match self {
            ThetaPrior::UniformBox { lower, upper } => lower
                .iter()
                .zip(upper)
                .map(|(&l, &u)| l + (u - l) * T::of(rng.random::<f64>()))
                .collect(),
            ThetaPrior::FiniteUniform { points } => points[rng.random_range(0..points.len())].clone(),
            ThetaPrior::OrderedSimplex { dim } => {
                // Normalized exponentials are uniform on the simplex; sorting
                // maps them onto the ordered region, itself uniformly.
                let e: Vec<f64> = (0..*dim)
                    .map(|_| -(1.0 - rng.random::<f64>()).ln())
                    .collect();
                let total: f64 = e.iter().sum();
                let mut w: Vec<f64> = e.iter().map(|v| v / total).collect();
                w.sort_by(|a, b| b.total_cmp(a));
                w.into_iter().map(T::of).collect()
            }
        }
    }
}

/// Draws one θ from `prior` with a fresh generator seeded by `seed`.
pub fn prior_sample<T: Scalar>(prior: &ThetaPrior<T>, seed: u64) -> Vec<T> {
    prior.sample(&mut rng_from_seed(seed))
}
