//! Synthetic multi-attribute test functions (maximization convention) with
//! their default utility families and priors.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::domain::DesignBox;
use crate::optim::{nelder_mead_max, Limits};
use crate::scalar::Scalar;
use crate::stats::halton;
use crate::utility::{linear_weights, utility_value, value_unchecked, ThetaPrior, UtilityFamily};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProblemId {
    #[serde(rename = "dtlz1a")]
    Dtlz1a,
    /// DTLZ2 with the standard squared distance function `g`.
    #[serde(rename = "dtlz2")]
    Dtlz2,
    /// DTLZ2 with `g(x) = Σ_{i=4,5} (x_i − 0.5)` (no square).
    #[serde(rename = "dtlz2-printed")]
    Dtlz2Printed,
    #[serde(rename = "vlmop3")]
    Vlmop3,
}

impl ProblemId {
    pub const ALL: [ProblemId; 4] = [ProblemId::Dtlz1a, ProblemId::Dtlz2, ProblemId::Dtlz2Printed, ProblemId::Vlmop3];

    pub fn name(self) -> &'static str {
        match self {
            ProblemId::Dtlz1a => "dtlz1a",
            ProblemId::Dtlz2 => "dtlz2",
            ProblemId::Dtlz2Printed => "dtlz2-printed",
            ProblemId::Vlmop3 => "vlmop3",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            ProblemId::Dtlz1a => 6,
            ProblemId::Dtlz2 | ProblemId::Dtlz2Printed => 5,
            ProblemId::Vlmop3 => 2,
        }
    }

    pub fn attributes(self) -> usize {
        match self {
            ProblemId::Dtlz1a => 2,
            ProblemId::Dtlz2 | ProblemId::Dtlz2Printed => 4,
            ProblemId::Vlmop3 => 3,
        }
    }

    pub fn design_box<T: Scalar>(self) -> DesignBox<T> {
        match self {
            ProblemId::Vlmop3 => DesignBox {
                lower: vec![T::of(-3.0); 2],
                upper: vec![T::of(3.0); 2],
            },
            other => DesignBox::unit(other.dim()),
        }
    }

    pub fn default_family(self) -> UtilityFamily {
        match self {
            ProblemId::Dtlz1a => UtilityFamily::Linear,
            ProblemId::Dtlz2 | ProblemId::Dtlz2Printed => UtilityFamily::Quadratic,
            ProblemId::Vlmop3 => UtilityFamily::ExponentialCara,
        }
    }

    /// DTLZ1a: `θ ~ U[0, 1]` with weights `(θ, 1 − θ)`; DTLZ2: uniform over
    /// the eight front anchors; VLMOP3: `θ ~ U[0.1, 0.5]`.
    pub fn default_prior<T: Scalar>(self) -> ThetaPrior<T> {
        match self {
            ProblemId::Dtlz1a => ThetaPrior::UniformBox {
                lower: vec![T::zero()],
                upper: vec![T::one()],
            },
            ProblemId::Dtlz2 | ProblemId::Dtlz2Printed => ThetaPrior::FiniteUniform {
                points: dtlz2_anchors(self),
            },
            ProblemId::Vlmop3 => ThetaPrior::UniformBox {
                lower: vec![T::of(0.1)],
                upper: vec![T::of(0.5)],
            },
        }
    }

    pub fn evaluate<T: Scalar>(self, x: &[T]) -> Result<Vec<T>> {
        let b = self.design_box::<T>();
        if !b.contains(x) {
            return Err(Error::Contract(format!(
                "{} expects a point in its {}-dimensional box, got {:?}",
                self.name(),
                self.dim(),
                x
            )));
        }
        Ok(self.evaluate_unchecked(x))
    }

    pub(crate) fn evaluate_unchecked<T: Scalar>(self, x: &[T]) -> Vec<T> {
        let half = T::of(0.5);
        match self {
            ProblemId::Dtlz1a => {
                let two_pi = T::of(2.0 * PI);
                let s = x[1..]
                    .iter()
                    .map(|&v| (v - half) * (v - half) - (two_pi * (v - half)).cos())
                    .fold(T::zero(), |a, b| a + b);
                let g = T::of(100.0) * (T::of(5.0) + s);
                let scale = -half * (T::one() + g);
                vec![scale * x[0], scale * (T::one() - x[0])]
            }
            ProblemId::Dtlz2 | ProblemId::Dtlz2Printed => {
                let g = x[3..]
                    .iter()
                    .map(|&v| {
                        if self == ProblemId::Dtlz2 {
                            (v - half) * (v - half)
                        } else {
                            v - half
                        }
                    })
                    .fold(T::zero(), |a, b| a + b);
                let r = -(T::one() + g);
                let a = T::FRAC_PI_2();
                let (c1, s1) = ((a * x[0]).cos(), (a * x[0]).sin());
                let (c2, s2) = ((a * x[1]).cos(), (a * x[1]).sin());
                let (c3, s3) = ((a * x[2]).cos(), (a * x[2]).sin());
                vec![r * c1 * c2 * c3, r * c1 * c2 * s3, r * c1 * s2, r * s1]
            }
            ProblemId::Vlmop3 => {
                let (x1, x2) = (x[0], x[1]);
                let q = x1 * x1 + x2 * x2;
                let f1 = -half * q - q.sin();
                let a = T::of(3.0) * x1 - T::of(2.0) * x2 + T::of(4.0);
                let b = x1 - x2 + T::one();
                let f2 = -(a * a) / T::of(8.0) - (b * b) / T::of(27.0) - T::of(15.0);
                let f3 = -T::one() / (q + T::one()) + T::of(1.1) * (-q).exp();
                vec![f1, f2, f3]
            }
        }
    }
}

/// Quasi-random points behind the numeric optimum estimate.
pub const OPTIMUM_SEARCH_POINTS: usize = 1_000_000;

const POLISH_EVALS: usize = 2_000;

static SEARCH_GRIDS: [OnceLock<Vec<f64>>; 4] = [const { OnceLock::new() }; 4];

impl ProblemId {
    fn index(self) -> usize {
        ProblemId::ALL.iter().position(|&p| p == self).unwrap_or(0)
    }

    /// Attribute vectors at the first [`OPTIMUM_SEARCH_POINTS`] Halton
    /// points of the box, flattened. Computed once per process.
    fn search_grid(self) -> &'static [f64] {
        SEARCH_GRIDS[self.index()].get_or_init(|| {
            let b = self.design_box::<f64>();
            let mut out = Vec::with_capacity(OPTIMUM_SEARCH_POINTS * self.attributes());
            for i in 0..OPTIMUM_SEARCH_POINTS {
                out.extend(self.evaluate_unchecked(&b.from_unit(&halton(i as u64, self.dim()))));
            }
            out
        })
    }

    /// Best achievable utility `U* = max_x U(f(x); θ)` over the box.
    ///
    /// Exact for DTLZ1a with non-negative linear weights (`−0.5 min(w)`) and
    /// for DTLZ2 with a quadratic utility centred on an attainable anchor
    /// (`0`). Otherwise the best of the cached quasi-random search, polished
    /// by Nelder–Mead.
    pub fn optimal_utility(self, theta: &[f64], family: UtilityFamily) -> Result<f64> {
        family.check_theta(theta, self.attributes())?;
        match (self, family) {
            (ProblemId::Dtlz1a, UtilityFamily::Linear) => {
                let w = linear_weights(theta, 2)?;
                if w.iter().all(|&v| v >= 0.0) {
                    return Ok(-0.5 * w[0].min(w[1]));
                }
            }
            (ProblemId::Dtlz2 | ProblemId::Dtlz2Printed, UtilityFamily::Quadratic)
                if dtlz2_anchors::<f64>(self).iter().any(|a| a.as_slice() == theta) =>
            {
                return Ok(0.0);
            }
            _ => {}
        }
        Ok(self.search_optimum(theta, family))
    }

    fn search_optimum(self, theta: &[f64], family: UtilityFamily) -> f64 {
        let k = self.attributes();
        let d = self.dim();
        let grid = self.search_grid();
        let (mut best_i, mut best) = (0, f64::NEG_INFINITY);
        for (i, y) in grid.chunks_exact(k).enumerate() {
            let v = value_unchecked(y, theta, family);
            if v > best {
                best = v;
                best_i = i;
            }
        }
        let b = self.design_box::<f64>();
        let start = b.from_unit(&halton(best_i as u64, d));
        let limits = Limits {
            lower: b.lower.clone(),
            upper: b.upper.clone(),
        };
        let step: Vec<f64> = (0..d).map(|i| 0.01 * b.width(i)).collect();
        let polished = nelder_mead_max(
            |x| value_unchecked(&self.evaluate_unchecked(x), theta, family),
            &start,
            &step,
            &limits,
            POLISH_EVALS,
            1e-14,
        );
        best.max(polished.value)
    }

    /// `U(f(x); θ)` for a design in the box.
    pub fn true_utility(self, x: &[f64], theta: &[f64], family: UtilityFamily) -> Result<f64> {
        utility_value(&self.evaluate(x)?, theta, family)
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemId::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown problem '{s}'")))
    }
}

/// The eight DTLZ2 front points `f(x)` with `x_i ∈ {(i−1)/3, i/3}` for
/// `i ≤ 3` and `x₄ = x₅ = 0.5`.
pub fn dtlz2_anchors<T: Scalar>(variant: ProblemId) -> Vec<Vec<T>> {
    let mut out = Vec::with_capacity(8);
    for mask in 0..8u32 {
        let x: Vec<T> = (0..3)
            .map(|i| {
                let lo = i as f64 / 3.0;
                T::of(if mask & (1 << i) != 0 { lo + 1.0 / 3.0 } else { lo })
            })
            .chain([T::of(0.5), T::of(0.5)])
            .collect();
        out.push(variant.evaluate_unchecked(&x));
    }
    out
}
