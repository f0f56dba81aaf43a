//! Parametric utility families `U(y; θ)` over attribute vectors and priors
//! over their parameters.
//!
//! Parameter shapes:
//!
//! | family                 | θ                                            |
//! |------------------------|----------------------------------------------|
//! | `Linear`               | `k` weights, or `k − 1` weights completed to sum to one |
//! | `Quadratic`            | target vector of length `k`                  |
//! | `ExponentialCara`      | scalar risk aversion `> 0`                   |
//! | `ThresholdConstrained` | scalar lower bound on `y₂` (`k ≥ 2`)         |
//! | `SoftmaxLinear`        | `k` weights over the softmax of `y`          |
//!
//! `ThresholdConstrained` returns `−∞` for infeasible `y`; this value sorts
//! below every feasible utility.

mod prior;

pub use prior::{prior_sample, ThetaPrior};

use serde::{Deserialize, Serialize};

use crate::scalar::{dot, Scalar};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityFamily {
    /// `θᵀy`
    Linear,
    /// `−‖y − θ‖²`
    Quadratic,
    /// `(1/k) Σ_j (1 − exp(−θ y_j)) / θ`
    ExponentialCara,
    /// `y₁` if `θ ≤ y₂`, otherwise infeasible (`−∞`).
    ThresholdConstrained,
    /// `Σ_j θ_j exp(y_j) / Σ_i exp(y_i)`
    SoftmaxLinear,
}

impl UtilityFamily {
    /// Checks that `θ` has the shape this family expects for `k` attributes.
    pub fn check_theta<T: Scalar>(self, theta: &[T], k: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Contract(msg));
        if theta.iter().any(|t| !t.is_finite()) {
            return bad("θ must be finite".into());
        }
        match self {
            UtilityFamily::Linear => {
                if theta.len() != k && theta.len() + 1 != k {
                    return bad(format!("linear utility over {k} attributes takes {k} or {} weights, got {}", k - 1, theta.len()));
                }
            }
            UtilityFamily::Quadratic | UtilityFamily::SoftmaxLinear => {
                if theta.len() != k {
                    return bad(format!("{self:?} utility over {k} attributes takes {k} parameters, got {}", theta.len()));
                }
            }
            UtilityFamily::ExponentialCara => {
                if theta.len() != 1 || !(theta[0] > T::zero()) {
                    return bad("exponential utility takes one positive risk-aversion parameter".into());
                }
            }
            UtilityFamily::ThresholdConstrained => {
                if theta.len() != 1 || k < 2 {
                    return bad("threshold utility takes one parameter and at least two attributes".into());
                }
            }
        }
        Ok(())
    }

    /// Whether the closed-form linear acquisition applies.
    pub fn is_linear(self) -> bool {
        matches!(self, UtilityFamily::Linear)
    }
}

/// Effective weight vector of a linear utility over `k` attributes.
pub fn linear_weights<T: Scalar>(theta: &[T], k: usize) -> Result<Vec<T>> {
    UtilityFamily::Linear.check_theta(theta, k)?;
    Ok(linear_weights_unchecked(theta, k))
}

pub(crate) fn linear_weights_unchecked<T: Scalar>(theta: &[T], k: usize) -> Vec<T> {
    if theta.len() == k {
        theta.to_vec()
    } else {
        let mut w = theta.to_vec();
        let rest = T::one() - theta.iter().fold(T::zero(), |a, &b| a + b);
        w.push(rest);
        w
    }
}

/// `U(y; θ)`.
pub fn utility_value<T: Scalar>(y: &[T], theta: &[T], family: UtilityFamily) -> Result<T> {
    if y.is_empty() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("attribute vector must be non-empty and finite".into()));
    }
    family.check_theta(theta, y.len())?;
    Ok(value_unchecked(y, theta, family))
}

pub(crate) fn value_unchecked<T: Scalar>(y: &[T], theta: &[T], family: UtilityFamily) -> T {
    let k = y.len();
    match family {
        UtilityFamily::Linear => {
            if theta.len() == k {
                dot(theta, y)
            } else {
                let head = dot(theta, &y[..k - 1]);
                let rest = T::one() - theta.iter().fold(T::zero(), |a, &b| a + b);
                head + rest * y[k - 1]
            }
        }
        UtilityFamily::Quadratic => -y
            .iter()
            .zip(theta)
            .map(|(&a, &b)| (a - b) * (a - b))
            .fold(T::zero(), |a, b| a + b),
        UtilityFamily::ExponentialCara => {
            let t = theta[0];
            let s = y.iter().map(|&v| -(-t * v).exp_m1()).fold(T::zero(), |a, b| a + b);
            s / (t * T::of(k as f64))
        }
        UtilityFamily::ThresholdConstrained => {
            if theta[0] <= y[1] {
                y[0]
            } else {
                T::neg_infinity()
            }
        }
        UtilityFamily::SoftmaxLinear => {
            let m = y.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            let mut num = T::zero();
            let mut den = T::zero();
            for (&v, &w) in y.iter().zip(theta) {
                let e = (v - m).exp();
                num = num + w * e;
                den = den + e;
            }
            num / den
        }
    }
}

/// `∂U/∂y`.
///
/// For `ThresholdConstrained` the gradient is `(1, 0, …)` on the feasible
/// side and zero on the infeasible side; at `y₂ = θ` it is undefined.
pub fn utility_grad_y<T: Scalar>(y: &[T], theta: &[T], family: UtilityFamily) -> Result<Vec<T>> {
    if y.is_empty() || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("attribute vector must be non-empty and finite".into()));
    }
    family.check_theta(theta, y.len())?;
    if family == UtilityFamily::ThresholdConstrained && y[1] == theta[0] {
        return Err(Error::Boundary(format!(
            "threshold utility is not differentiable at y₂ = θ = {}",
            theta[0]
        )));
    }
    let mut g = vec![T::zero(); y.len()];
    grad_unchecked(y, theta, family, &mut g);
    Ok(g)
}

pub(crate) fn grad_unchecked<T: Scalar>(y: &[T], theta: &[T], family: UtilityFamily, out: &mut [T]) {
    let k = y.len();
    match family {
        UtilityFamily::Linear => {
            out[..theta.len()].copy_from_slice(theta);
            if theta.len() < k {
                out[k - 1] = T::one() - theta.iter().fold(T::zero(), |a, &b| a + b);
            }
        }
        UtilityFamily::Quadratic => {
            for ((o, &a), &b) in out.iter_mut().zip(y).zip(theta) {
                *o = -T::of(2.0) * (a - b);
            }
        }
        UtilityFamily::ExponentialCara => {
            let t = theta[0];
            let inv_k = T::one() / T::of(k as f64);
            for (o, &v) in out.iter_mut().zip(y) {
                *o = inv_k * (-t * v).exp();
            }
        }
        UtilityFamily::ThresholdConstrained => {
            out.iter_mut().for_each(|o| *o = T::zero());
            if theta[0] < y[1] {
                out[0] = T::one();
            }
        }
        UtilityFamily::SoftmaxLinear => {
            let m = y.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
            let e: Vec<T> = y.iter().map(|&v| (v - m).exp()).collect();
            let den = e.iter().fold(T::zero(), |a, &b| a + b);
            let u = e.iter().zip(theta).fold(T::zero(), |a, (&p, &w)| a + w * p) / den;
            for ((o, &p), &w) in out.iter_mut().zip(&e).zip(theta) {
                *o = p / den * (w - u);
            }
        }
    }
}
