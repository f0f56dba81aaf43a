//! Acquisition functions under utility uncertainty.
//!
//! EI-UU is the expected improvement of `U(f(x); θ)` over the per-θ
//! incumbent, averaged over posterior samples of θ and over the GP
//! hyperparameter ensemble. It is estimated by Monte Carlo for any family
//! and in closed form for linear and threshold utilities. TS-UU maximizes a
//! single joint draw of `(θ, f)`.

mod closed_form;
mod maximize;
mod mc;
mod thompson;

pub use closed_form::{ei_uu_linear, ei_uu_linear_grad, ei_uu_threshold, linear_ei_from_moments};
pub use maximize::{maximize_acquisition, AcquisitionOutcome, SgaConfig};
pub use mc::{ei_uu_grad_estimate, ei_uu_mc};
pub use thompson::{ts_uu_select, ThompsonConfig, ThompsonOutcome};

use crate::domain::DesignBox;
use crate::gp::GpModel;
use crate::scalar::Scalar;
use crate::utility::{value_unchecked, UtilityFamily};
use crate::{Error, Result};

/// Everything an acquisition evaluation needs about the current state.
#[derive(Debug, Clone)]
pub struct AcquisitionContext<'a, T> {
    gp: &'a GpModel<T>,
    design_box: &'a DesignBox<T>,
    family: UtilityFamily,
    thetas: Vec<Vec<T>>,
    /// `max_i U(f(x_i); θ_s)`; `−∞` for a threshold θ no design satisfies.
    incumbents: Vec<T>,
    /// Incumbent used inside the improvement: equal to `incumbents` except
    /// for infeasible threshold θ, which use the smallest observed `y₁`.
    baselines: Vec<T>,
    best_design: usize,
}

impl<'a, T: Scalar> AcquisitionContext<'a, T> {
    pub fn new(gp: &'a GpModel<T>, thetas: &[Vec<T>], family: UtilityFamily, design_box: &'a DesignBox<T>) -> Result<Self> {
        if thetas.is_empty() {
            return Err(Error::Contract("acquisition needs at least one θ sample".into()));
        }
        if design_box.dim() != gp.dim() {
            return Err(Error::Contract("design box and GP differ in dimension".into()));
        }
        let k = gp.num_outputs();
        for t in thetas {
            family.check_theta(t, k)?;
        }
        let n = gp.inputs().len();
        let attrs: Vec<Vec<T>> = (0..n).map(|i| (0..k).map(|j| gp.targets(j)[i]).collect()).collect();
        let min_first = attrs.iter().map(|y| y[0]).fold(T::infinity(), |a, b| a.min(b));

        let mut incumbents = Vec::with_capacity(thetas.len());
        let mut baselines = Vec::with_capacity(thetas.len());
        let mut wins = vec![0usize; n];
        for t in thetas {
            let mut best = T::neg_infinity();
            let mut arg = 0;
            for (i, y) in attrs.iter().enumerate() {
                let u = value_unchecked(y, t, family);
                if u > best {
                    best = u;
                    arg = i;
                }
            }
            wins[arg] += 1;
            incumbents.push(best);
            baselines.push(if best == T::neg_infinity() { min_first } else { best });
        }
        let best_design = (0..n).max_by_key(|&i| (wins[i], std::cmp::Reverse(i))).unwrap_or(0);
        Ok(Self {
            gp,
            design_box,
            family,
            thetas: thetas.to_vec(),
            incumbents,
            baselines,
            best_design,
        })
    }

    pub fn gp(&self) -> &GpModel<T> {
        self.gp
    }

    pub fn design_box(&self) -> &DesignBox<T> {
        self.design_box
    }

    pub fn family(&self) -> UtilityFamily {
        self.family
    }

    pub fn thetas(&self) -> &[Vec<T>] {
        &self.thetas
    }

    /// `U_n*(f; θ_s)` for every θ sample.
    pub fn incumbents(&self) -> &[T] {
        &self.incumbents
    }

    /// Evaluated design that is the incumbent for the most θ samples.
    pub fn best_design(&self) -> usize {
        self.best_design
    }

    /// Whether an exact (non-Monte Carlo) value is available.
    pub fn has_closed_form(&self) -> bool {
        match self.family {
            UtilityFamily::Linear => true,
            UtilityFamily::ThresholdConstrained => self.gp.num_outputs() == 2,
            _ => false,
        }
    }

    /// Closed-form EI-UU where available.
    pub fn closed_form(&self, x: &[T]) -> Option<Result<T>> {
        match self.family {
            UtilityFamily::Linear => Some(ei_uu_linear(x, self)),
            UtilityFamily::ThresholdConstrained if self.gp.num_outputs() == 2 => Some(ei_uu_threshold(x, self)),
            _ => None,
        }
    }

    fn check_point(&self, x: &[T]) -> Result<()> {
        if x.len() != self.gp.dim() {
            return Err(Error::Contract(format!(
                "point has dimension {}, design space has {}",
                x.len(),
                self.gp.dim()
            )));
        }
        Ok(())
    }
}
