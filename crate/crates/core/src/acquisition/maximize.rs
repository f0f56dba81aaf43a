use serde::{Deserialize, Serialize};

use super::closed_form::linear_value_grad;
use super::mc::{ei_uu_grad_estimate, ei_uu_mc};
use super::AcquisitionContext;
use crate::scalar::Scalar;
use crate::stats::{derive_seed, latin_hypercube, rng_from_seed, standard_normal};
use crate::utility::UtilityFamily;
use crate::{Error, Result};

/// Multi-start projected stochastic gradient ascent settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SgaConfig {
    /// Number of ascents; one starts next to the best evaluated design.
    pub restarts: usize,
    pub steps: usize,
    /// `a` in the step size `a / (b + t)`, as a fraction of each box width.
    pub step_scale: f64,
    /// `b` in the step size `a / (b + t)`.
    pub step_offset: f64,
    /// Monte Carlo draws per gradient estimate.
    pub grad_samples: usize,
    /// Monte Carlo draws per candidate when ranking without a closed form.
    pub rank_samples: usize,
}

impl Default for SgaConfig {
    fn default() -> Self {
        Self {
            restarts: 10,
            steps: 120,
            step_scale: 0.6,
            step_offset: 10.0,
            grad_samples: 32,
            rank_samples: 2048,
        }
    }
}

impl SgaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.steps == 0 || self.grad_samples == 0 || self.rank_samples == 0 {
            return Err(Error::Config("SGA counts must all be at least 1".into()));
        }
        if !(self.step_scale > 0.0) || !(self.step_offset >= 0.0) {
            return Err(Error::Config("SGA step schedule needs a > 0 and b ≥ 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionOutcome<T> {
    pub x: Vec<T>,
    /// Ranking value of `x` (closed form where available).
    pub value: f64,
    /// Every candidate had zero acquisition; `x` is a uniform random point.
    pub flat: bool,
    pub candidates: usize,
    /// Ranking value at each ascent's starting point.
    pub start_values: Vec<f64>,
}

const STREAM_STARTS: u64 = 0;
const STREAM_GRAD: u64 = 1;
const STREAM_RANK: u64 = 2;
const STREAM_FLAT: u64 = 3;

fn rank_value<T: Scalar>(x: &[T], ctx: &AcquisitionContext<'_, T>, cfg: &SgaConfig, seed: u64) -> Result<f64> {
    match ctx.closed_form(x) {
        Some(v) => v.map(|v| v.as_f64()),
        None => ei_uu_mc(x, ctx, cfg.rank_samples, seed).map(|(v, _)| v.as_f64()),
    }
}

/// Returns the next design: the best of every ascent's start, final iterate
/// and tail average, ranked with one shared seed. Ascents move along the
/// width-scaled, normalized gradient with step `a / (b + t)`.
pub fn maximize_acquisition<T: Scalar>(ctx: &AcquisitionContext<'_, T>, cfg: &SgaConfig, seed: u64) -> Result<AcquisitionOutcome<T>> {
    cfg.validate()?;
    let bx = ctx.design_box();
    let d = bx.dim();
    let widths: Vec<T> = (0..d).map(|i| bx.width(i)).collect();

    let mut rng = rng_from_seed(derive_seed(seed, &[STREAM_STARTS]));
    let mut starts: Vec<Vec<T>> = latin_hypercube(cfg.restarts.saturating_sub(1), d, &mut rng)
        .iter()
        .map(|u| bx.from_unit(u))
        .collect();
    let mut near_best = ctx.gp().inputs()[ctx.best_design()].clone();
    for (v, &w) in near_best.iter_mut().zip(&widths) {
        *v = *v + T::of(0.01) * w * standard_normal::<T, _>(&mut rng);
    }
    bx.clamp(&mut near_best);
    starts.push(near_best);

    let linear = ctx.family() == UtilityFamily::Linear;
    let tail_from = cfg.steps / 2;
    let mut candidates = Vec::with_capacity(3 * starts.len());
    let mut start_slots = Vec::with_capacity(starts.len());
    for (r, start) in starts.into_iter().enumerate() {
        let mut x = start.clone();
        let mut tail = vec![T::zero(); d];
        let mut tail_count = 0usize;
        for t in 0..cfg.steps {
            let g = if linear {
                linear_value_grad(&x, ctx, true)?.1
            } else {
                ei_uu_grad_estimate(&x, ctx, cfg.grad_samples, derive_seed(seed, &[STREAM_GRAD, r as u64, t as u64]))?
            };
            let norm = g
                .iter()
                .zip(&widths)
                .fold(T::zero(), |a, (&gi, &w)| a + (gi * w) * (gi * w))
                .sqrt();
            if !(norm > T::zero()) || !norm.is_finite() {
                break;
            }
            let step = T::of(cfg.step_scale / (cfg.step_offset + t as f64));
            for ((xi, &gi), &w) in x.iter_mut().zip(&g).zip(&widths) {
                *xi = *xi + step * w * (gi * w) / norm;
            }
            bx.clamp(&mut x);
            if t >= tail_from {
                for (a, &v) in tail.iter_mut().zip(&x) {
                    *a = *a + v;
                }
                tail_count += 1;
            }
        }
        start_slots.push(candidates.len());
        candidates.push(start);
        if tail_count > 0 {
            let avg: Vec<T> = tail.iter().map(|&v| v / T::of(tail_count as f64)).collect();
            candidates.push(avg);
        }
        candidates.push(x);
    }

    let rank_seed = derive_seed(seed, &[STREAM_RANK]);
    let values = candidates
        .iter()
        .map(|c| rank_value(c, ctx, cfg, rank_seed))
        .collect::<Result<Vec<f64>>>()?;
    let mut i = 0;
    for (j, &v) in values.iter().enumerate() {
        if v > values[i] {
            i = j;
        }
    }
    let start_values = start_slots.iter().map(|&s| values[s]).collect();
    let count = candidates.len();
    if values[i] > 0.0 {
        return Ok(AcquisitionOutcome {
            x: candidates.swap_remove(i),
            value: values[i],
            flat: false,
            candidates: count,
            start_values,
        });
    }
    let x = bx.sample_uniform(&mut rng_from_seed(derive_seed(seed, &[STREAM_FLAT])));
    Ok(AcquisitionOutcome {
        x,
        value: 0.0,
        flat: true,
        candidates: count,
        start_values,
    })
}
