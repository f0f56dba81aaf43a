use super::AcquisitionContext;
use crate::scalar::Scalar;
use crate::stats::{derive_seed, rng_from_seed, standard_normal};
use crate::utility::{grad_unchecked, value_unchecked};
use crate::{Error, Result};

pub(super) struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub grad: Option<Vec<f64>>,
}

/// Sample `i` uses θ sample `i mod S` and its own standard normal vector;
/// each hyperparameter member has an independent normal stream derived
/// from `seed`, so a fixed seed gives common random numbers across `x`.
pub(super) fn estimate<T: Scalar>(
    x: &[T],
    ctx: &AcquisitionContext<'_, T>,
    samples: usize,
    seed: u64,
    want_grad: bool,
) -> Result<McEstimate> {
    ctx.check_point(x)?;
    if samples == 0 {
        return Err(Error::Contract("Monte Carlo sample count must be at least 1".into()));
    }
    let gp = ctx.gp;
    let k = gp.num_outputs();
    let d = gp.dim();
    let s_count = ctx.thetas.len();
    let members = gp.num_members();

    let mut total = 0.0;
    let mut se_sq = 0.0;
    let mut grad = vec![0.0; if want_grad { d } else { 0 }];
    let mut y = vec![T::zero(); k];
    let mut z = vec![T::zero(); k];
    let mut gy = vec![T::zero(); k];
    let mut sums = vec![0.0; s_count];
    let mut sq = vec![0.0; s_count];
    let mut counts = vec![0usize; s_count];

    for member in 0..members {
        let (post, grads) = if want_grad {
            let (p, g) = gp.posterior_with_gradients(x, member)?;
            (p, Some(g))
        } else {
            (gp.posterior(x, member)?, None)
        };
        let sd = post.chol();
        // ∇√v = ∇v / (2√v), zero where the variance is zero
        let dsd: Vec<Vec<T>> = match &grads {
            Some(g) => (0..k)
                .map(|j| {
                    if sd[j] > T::zero() {
                        g.variance[j].iter().map(|&v| v / (T::of(2.0) * sd[j])).collect()
                    } else {
                        vec![T::zero(); d]
                    }
                })
                .collect(),
            None => Vec::new(),
        };

        sums.iter_mut().for_each(|v| *v = 0.0);
        sq.iter_mut().for_each(|v| *v = 0.0);
        counts.iter_mut().for_each(|v| *v = 0);
        let mut member_grad = vec![0.0; grad.len()];
        let mut rng = rng_from_seed(derive_seed(seed, &[member as u64]));
        for i in 0..samples {
            let s = i % s_count;
            for j in 0..k {
                z[j] = standard_normal(&mut rng);
                y[j] = post.mean[j] + sd[j] * z[j];
            }
            let theta = &ctx.thetas[s];
            let imp = (value_unchecked(&y, theta, ctx.family) - ctx.baselines[s]).as_f64();
            counts[s] += 1;
            if imp > 0.0 {
                sums[s] += imp;
                sq[s] += imp * imp;
                if let Some(g) = &grads {
                    grad_unchecked(&y, theta, ctx.family, &mut gy);
                    for j in 0..k {
                        if gy[j] == T::zero() {
                            continue;
                        }
                        for (acc, (&gm, &gs)) in member_grad.iter_mut().zip(g.mean[j].iter().zip(&dsd[j])) {
                            *acc += (gy[j] * (gm + z[j] * gs)).as_f64();
                        }
                    }
                }
            }
        }

        let n = samples as f64;
        let value: f64 = sums.iter().sum::<f64>() / n;
        // stratified variance when every θ block has two or more samples
        let var = if counts.iter().all(|&c| c >= 2) {
            (0..s_count)
                .map(|s| {
                    let c = counts[s] as f64;
                    let m = sums[s] / c;
                    let v = ((sq[s] - c * m * m) / (c - 1.0)).max(0.0);
                    (c / n).powi(2) * v / c
                })
                .sum::<f64>()
        } else if samples >= 2 {
            let ss: f64 = sq.iter().sum();
            ((ss - n * value * value) / (n - 1.0)).max(0.0) / n
        } else {
            0.0
        };
        total += value;
        se_sq += var;
        for (g, m) in grad.iter_mut().zip(&member_grad) {
            *g += m / n;
        }
    }

    let h = members as f64;
    Ok(McEstimate {
        value: total / h,
        std_error: se_sq.sqrt() / h,
        grad: want_grad.then(|| grad.iter().map(|g| g / h).collect()),
    })
}

/// Monte Carlo EI-UU at `x` with `samples` draws per hyperparameter member.
/// Returns `(estimate, standard error)`.
pub fn ei_uu_mc<T: Scalar>(x: &[T], ctx: &AcquisitionContext<'_, T>, samples: usize, seed: u64) -> Result<(T, T)> {
    let e = estimate(x, ctx, samples, seed, false)?;
    Ok((T::of(e.value), T::of(e.std_error)))
}

/// Unbiased estimate of `∇EI-UU(x)`: the pathwise derivative of the
/// improvement, averaged over the same draws [`ei_uu_mc`] uses for `seed`.
pub fn ei_uu_grad_estimate<T: Scalar>(
    x: &[T],
    ctx: &AcquisitionContext<'_, T>,
    samples: usize,
    seed: u64,
) -> Result<Vec<T>> {
    let e = estimate(x, ctx, samples, seed, true)?;
    Ok(e.grad.unwrap_or_default().into_iter().map(T::of).collect())
}
