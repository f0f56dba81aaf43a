//! Lazily sampled posterior paths for Thompson sampling.
//!
//! A path draws `f(x)` one point at a time. Each draw conditions on the real
//! training data and on every value already drawn on the same path, so the
//! collection of draws is a sample from the joint posterior. The training
//! factor is extended one row per new point.

use super::kernel::matern52_unchecked;
use super::GpModel;
use crate::linalg::Cholesky;
use crate::scalar::{dot, Scalar};
use crate::stats::{rng_from_seed, standard_normal, SeededRng};

/// Below this fraction of the signal variance a draw is treated as
/// determined and not appended to the factor.
const APPEND_RELATIVE_VARIANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
struct PathOutput<T> {
    chol: Cholesky<T>,
    /// `L⁻¹ (values − c)` over real and fantasy points.
    whitened: Vec<T>,
}

/// Mutable record of one posterior path (single writer).
#[derive(Debug, Clone)]
pub struct SamplePath<T> {
    member: usize,
    rng: SeededRng,
    /// Real training inputs followed by appended fantasy inputs.
    points: Vec<Vec<T>>,
    /// Per output; `points` beyond the real data are shared by all outputs,
    /// so a fantasy point is appended only when every output accepts it.
    outputs: Vec<PathOutput<T>>,
    /// Every `(x, f(x))` returned so far, including ones not appended.
    drawn: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Scalar> SamplePath<T> {
    pub(super) fn new(model: &GpModel<T>, member: usize, seed: u64) -> Self {
        let outputs = model
            .outputs
            .iter()
            .map(|o| {
                let m = &o.members[member];
                PathOutput {
                    chol: m.chol.clone(),
                    whitened: m.whitened.clone(),
                }
            })
            .collect();
        Self {
            member,
            rng: rng_from_seed(seed),
            points: model.inputs.clone(),
            outputs,
            drawn: Vec::new(),
        }
    }

    pub fn member(&self) -> usize {
        self.member
    }

    /// Points drawn on this path so far, in order.
    pub fn history(&self) -> &[(Vec<T>, Vec<T>)] {
        &self.drawn
    }

    /// Number of fantasy points the path is currently conditioned on.
    pub fn fantasy_count(&self, model: &GpModel<T>) -> usize {
        self.points.len() - model.inputs.len()
    }

    /// Fantasy inputs and the values drawn there.
    pub fn fantasies(&self, model: &GpModel<T>) -> Vec<(Vec<T>, Vec<T>)> {
        let n = model.inputs.len();
        self.points[n..]
            .iter()
            .map(|x| {
                let v = self
                    .drawn
                    .iter()
                    .find(|(p, _)| p == x)
                    .map(|(_, v)| v.clone())
                    .expect("appended points are recorded");
                (x.clone(), v)
            })
            .collect()
    }

    /// Conditional mean and variance at `x` given real data and fantasies,
    /// one `(mean, variance)` pair per output.
    pub fn predict(&self, model: &GpModel<T>, x: &[T]) -> Vec<(T, T)> {
        model
            .outputs
            .iter()
            .zip(&self.outputs)
            .map(|(o, po)| {
                let h = &o.members[self.member].hyper;
                let kx: Vec<T> = self.points.iter().map(|p| matern52_unchecked(x, p, h)).collect();
                let v = po.chol.solve_lower(&kx);
                let mean = h.constant_mean + dot(&v, &po.whitened);
                (mean, (h.signal_variance - dot(&v, &v)).max(T::zero()))
            })
            .collect()
    }

    pub(super) fn sample(&mut self, model: &GpModel<T>, x: &[T]) -> Vec<T> {
        if let Some(i) = model.inputs.iter().position(|p| p.as_slice() == x) {
            let value: Vec<T> = model.outputs.iter().map(|o| o.targets[i]).collect();
            self.drawn.push((x.to_vec(), value.clone()));
            return value;
        }
        if let Some((_, v)) = self.drawn.iter().find(|(p, _)| p.as_slice() == x) {
            return v.clone();
        }

        let mut value = Vec::with_capacity(self.outputs.len());
        let mut rows = Vec::with_capacity(self.outputs.len());
        let mut append = true;
        for (o, po) in model.outputs.iter().zip(&self.outputs) {
            let h = &o.members[self.member].hyper;
            let kx: Vec<T> = self.points.iter().map(|p| matern52_unchecked(x, p, h)).collect();
            let v = po.chol.solve_lower(&kx);
            let mean = h.constant_mean + dot(&v, &po.whitened);
            let raw = h.signal_variance - dot(&v, &v);
            let var = raw.max(T::zero());
            let z: T = standard_normal(&mut self.rng);
            let y = mean + var.sqrt() * z;
            if var <= h.signal_variance * T::of(APPEND_RELATIVE_VARIANCE) {
                append = false;
            }
            value.push(y);
            rows.push((v, raw + h.jitter, y - mean));
        }

        if append && rows.iter().all(|(_, pivot_sq, _)| *pivot_sq > T::zero()) {
            for (po, (v, pivot_sq, resid)) in self.outputs.iter_mut().zip(rows) {
                po.chol
                    .push_solved_row(v, pivot_sq)
                    .expect("pivot checked positive");
                po.whitened.push(resid / pivot_sq.sqrt());
            }
            self.points.push(x.to_vec());
        }
        self.drawn.push((x.to_vec(), value.clone()));
        value
    }
}
