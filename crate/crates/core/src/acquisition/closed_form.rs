use super::AcquisitionContext;
use crate::scalar::{dot, Scalar};
use crate::stats::{expected_improvement, normal_cdf, normal_pdf};
use crate::utility::{linear_weights_unchecked, UtilityFamily};
use crate::{Error, Result};

/// Linear EI-UU from posterior moments: the average over θ samples of
/// `Δ Φ(Δ/σ) + σ φ(Δ/σ)` with `Δ = wᵀμ − incumbent` and `σ² = wᵀ Σ w`.
///
/// `covariance` is a full `k × k` matrix; `thetas` use the same shapes as
/// [`UtilityFamily::Linear`].
pub fn linear_ei_from_moments<T: Scalar>(mean: &[T], covariance: &[Vec<T>], thetas: &[Vec<T>], incumbents: &[T]) -> Result<T> {
    let k = mean.len();
    if covariance.len() != k || covariance.iter().any(|r| r.len() != k) {
        return Err(Error::Contract("covariance must be k × k".into()));
    }
    if thetas.is_empty() || thetas.len() != incumbents.len() {
        return Err(Error::Contract("need one incumbent per θ sample".into()));
    }
    let mut total = T::zero();
    for (t, &inc) in thetas.iter().zip(incumbents) {
        UtilityFamily::Linear.check_theta(t, k)?;
        let w = linear_weights_unchecked(t, k);
        let cw: Vec<T> = covariance.iter().map(|row| dot(row, &w)).collect();
        let var = dot(&w, &cw).max(T::zero());
        total = total + expected_improvement(dot(&w, mean) - inc, var.sqrt(), T::zero());
    }
    Ok(total / T::of(thetas.len() as f64))
}

fn require(ctx: &AcquisitionContext<'_, impl Scalar>, family: UtilityFamily) -> Result<()> {
    if ctx.family != family {
        return Err(Error::Contract(format!(
            "closed form for {family:?} utilities requested with a {:?} context",
            ctx.family
        )));
    }
    Ok(())
}

/// Exact EI-UU for linear utilities.
pub fn ei_uu_linear<T: Scalar>(x: &[T], ctx: &AcquisitionContext<'_, T>) -> Result<T> {
    require(ctx, UtilityFamily::Linear)?;
    ctx.check_point(x)?;
    let k = ctx.gp.num_outputs();
    let members = ctx.gp.num_members();
    let mut total = T::zero();
    for member in 0..members {
        let post = ctx.gp.posterior(x, member)?;
        for (t, &inc) in ctx.thetas.iter().zip(&ctx.incumbents) {
            let w = linear_weights_unchecked(t, k);
            let var = w
                .iter()
                .zip(&post.variance)
                .fold(T::zero(), |a, (&wi, &v)| a + wi * wi * v);
            total = total + expected_improvement(dot(&w, &post.mean) - inc, var.sqrt(), T::zero());
        }
    }
    Ok(total / T::of((members * ctx.thetas.len()) as f64))
}

/// Value and gradient of the linear closed form. With `lenient`, a θ whose
/// predictive spread is zero contributes `1{Δ > 0} wᵀ∇μ` instead of
/// failing.
pub(super) fn linear_value_grad<T: Scalar>(x: &[T], ctx: &AcquisitionContext<'_, T>, lenient: bool) -> Result<(T, Vec<T>)> {
    require(ctx, UtilityFamily::Linear)?;
    ctx.check_point(x)?;
    let k = ctx.gp.num_outputs();
    let d = ctx.gp.dim();
    let members = ctx.gp.num_members();
    let mut value = T::zero();
    let mut grad = vec![T::zero(); d];
    for member in 0..members {
        let (post, g) = ctx.gp.posterior_with_gradients(x, member)?;
        for (t, &inc) in ctx.thetas.iter().zip(&ctx.incumbents) {
            let w = linear_weights_unchecked(t, k);
            let var = w
                .iter()
                .zip(&post.variance)
                .fold(T::zero(), |a, (&wi, &v)| a + wi * wi * v);
            let delta = dot(&w, &post.mean) - inc;
            let sigma = var.sqrt();
            if sigma <= T::zero() {
                if !lenient {
                    return Err(Error::Boundary(format!(
                        "linear EI-UU gradient undefined where the predictive spread is zero (x = {x:?})"
                    )));
                }
                if delta > T::zero() {
                    value = value + delta;
                    for (i, gi) in grad.iter_mut().enumerate() {
                        *gi = *gi + (0..k).fold(T::zero(), |a, j| a + w[j] * g.mean[j][i]);
                    }
                }
                continue;
            }
            let z = delta / sigma;
            let (cdf, pdf) = (normal_cdf(z), normal_pdf(z));
            value = value + delta * cdf + sigma * pdf;
            let half = pdf / (T::of(2.0) * sigma);
            for (i, gi) in grad.iter_mut().enumerate() {
                let mut dmu = T::zero();
                let mut dvar = T::zero();
                for j in 0..k {
                    dmu = dmu + w[j] * g.mean[j][i];
                    dvar = dvar + w[j] * w[j] * g.variance[j][i];
                }
                *gi = *gi + dmu * cdf + half * dvar;
            }
        }
    }
    let scale = T::of((members * ctx.thetas.len()) as f64);
    Ok((value / scale, grad.into_iter().map(|g| g / scale).collect()))
}

/// Exact gradient of [`ei_uu_linear`]; a boundary error where any θ has
/// zero predictive spread.
pub fn ei_uu_linear_grad<T: Scalar>(x: &[T], ctx: &AcquisitionContext<'_, T>) -> Result<Vec<T>> {
    linear_value_grad(x, ctx, false).map(|(_, g)| g)
}

/// Exact EI-UU for the two-attribute threshold family: per θ,
/// `EI₁(x; incumbent) × P(f₂(x) ≥ θ)`. When no evaluated design satisfies
/// `y₂ ≥ θ` the incumbent is replaced by the smallest observed `y₁`.
pub fn ei_uu_threshold<T: Scalar>(x: &[T], ctx: &AcquisitionContext<'_, T>) -> Result<T> {
    require(ctx, UtilityFamily::ThresholdConstrained)?;
    if ctx.gp.num_outputs() != 2 {
        return Err(Error::Contract("threshold closed form needs exactly two attributes".into()));
    }
    ctx.check_point(x)?;
    let members = ctx.gp.num_members();
    let mut total = T::zero();
    for member in 0..members {
        let post = ctx.gp.posterior(x, member)?;
        let sd = post.chol();
        for (t, &base) in ctx.thetas.iter().zip(&ctx.baselines) {
            let ei = expected_improvement(post.mean[0], sd[0], base);
            let feasible = if sd[1] > T::zero() {
                normal_cdf((post.mean[1] - t[0]) / sd[1])
            } else if post.mean[1] >= t[0] {
                T::one()
            } else {
                T::zero()
            };
            total = total + ei * feasible;
        }
    }
    Ok(total / T::of((members * ctx.thetas.len()) as f64))
}
