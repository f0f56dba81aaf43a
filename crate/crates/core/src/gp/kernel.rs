//! ARD Matérn 5/2 covariance.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::{Error, Result};

/// Hyperparameters of one single-output GP: ARD lengthscales, signal
/// variance, constant prior mean and diagonal jitter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelHyperparams<T> {
    pub lengthscales: Vec<T>,
    pub signal_variance: T,
    pub constant_mean: T,
    pub jitter: T,
}

impl<T: Scalar> KernelHyperparams<T> {
    /// Hyperparameters with the default relative jitter of `1e-8 · σ²`.
    pub fn new(lengthscales: Vec<T>, signal_variance: T, constant_mean: T) -> Self {
        Self {
            jitter: signal_variance * T::of(DEFAULT_RELATIVE_JITTER),
            lengthscales,
            signal_variance,
            constant_mean,
        }
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.iter().any(|&l| !(l > T::zero()) || !l.is_finite()) {
            return Err(Error::Contract("lengthscales must be positive and finite".into()));
        }
        if !(self.signal_variance > T::zero()) || !self.signal_variance.is_finite() {
            return Err(Error::Contract("signal variance must be positive and finite".into()));
        }
        if !(self.jitter >= T::zero()) {
            return Err(Error::Contract("jitter must be nonnegative".into()));
        }
        if !self.constant_mean.is_finite() {
            return Err(Error::Contract("constant mean must be finite".into()));
        }
        Ok(())
    }
}

pub(crate) const DEFAULT_RELATIVE_JITTER: f64 = 1e-8;

/// `σ² (1 + √5 r + 5r²/3) exp(−√5 r)` with `r` the lengthscale-scaled distance.
pub fn matern52<T: Scalar>(x: &[T], y: &[T], h: &KernelHyperparams<T>) -> Result<T> {
    if x.len() != y.len() || x.len() != h.dim() {
        return Err(Error::Contract(format!(
            "dimension mismatch: x has {}, x' has {}, hyperparameters have {}",
            x.len(),
            y.len(),
            h.dim()
        )));
    }
    h.validate()?;
    Ok(matern52_unchecked(x, y, h))
}

#[inline]
pub(crate) fn scaled_distance<T: Scalar>(x: &[T], y: &[T], ls: &[T]) -> T {
    x.iter()
        .zip(y)
        .zip(ls)
        .map(|((&a, &b), &l)| {
            let t = (a - b) / l;
            t * t
        })
        .fold(T::zero(), |acc, t| acc + t)
        .sqrt()
}

#[inline]
pub(crate) fn matern52_of_r<T: Scalar>(r: T, variance: T) -> T {
    let s5 = T::of(5.0).sqrt();
    let sr = s5 * r;
    variance * (T::one() + sr + sr * sr / T::of(3.0)) * (-sr).exp()
}

#[inline]
pub(crate) fn matern52_unchecked<T: Scalar>(x: &[T], y: &[T], h: &KernelHyperparams<T>) -> T {
    matern52_of_r(scaled_distance(x, y, &h.lengthscales), h.signal_variance)
}

/// Writes `∂k(x, y)/∂x` into `out` and returns `k(x, y)`.
///
/// `∂k/∂x_i = −(5/3) σ² (1 + √5 r) exp(−√5 r) (x_i − y_i) / ℓ_i²`, smooth at `r = 0`.
#[inline]
pub(crate) fn matern52_with_grad<T: Scalar>(
    x: &[T],
    y: &[T],
    h: &KernelHyperparams<T>,
    out: &mut [T],
) -> T {
    let r = scaled_distance(x, y, &h.lengthscales);
    let sr = T::of(5.0).sqrt() * r;
    let e = (-sr).exp();
    let value = h.signal_variance * (T::one() + sr + sr * sr / T::of(3.0)) * e;
    let factor = -T::of(5.0 / 3.0) * h.signal_variance * (T::one() + sr) * e;
    for ((o, (&a, &b)), &l) in out.iter_mut().zip(x.iter().zip(y)).zip(&h.lengthscales) {
        *o = factor * (a - b) / (l * l);
    }
    value
}
