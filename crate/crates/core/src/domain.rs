//! Box-constrained design space.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::Error;

/// Axis-aligned box `[lower, upper]` in `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignBox<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> DesignBox<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self, Error> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    pub fn unit(dim: usize) -> Self {
        Self {
            lower: vec![T::zero(); dim],
            upper: vec![T::one(); dim],
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(Error::Contract(format!(
                "box bounds must be non-empty and of equal length (got {} and {})",
                self.lower.len(),
                self.upper.len()
            )));
        }
        for (i, (&l, &u)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(l < u) || !l.is_finite() || !u.is_finite() {
                return Err(Error::Contract(format!(
                    "box dimension {i}: lower bound {l} must be finite and below upper bound {u}"
                )));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, i: usize) -> T {
        self.upper[i] - self.lower[i]
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&v, (&l, &u))| v >= l && v <= u)
    }

    pub fn clamp(&self, x: &mut [T]) {
        for (v, (&l, &u)) in x.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.max(l).min(u);
        }
    }

    /// Maps a point of the unit cube into the box.
    pub fn from_unit(&self, u: &[f64]) -> Vec<T> {
        u.iter()
            .enumerate()
            .map(|(i, &t)| self.lower[i] + self.width(i) * T::of(t))
            .collect()
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let u: Vec<f64> = (0..self.dim()).map(|_| rng.random::<f64>()).collect();
        self.from_unit(&u)
    }
}
