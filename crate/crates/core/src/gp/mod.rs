//! Multi-output Gaussian process model of the attribute function.
//!
//! Each of the `k` attributes gets an independent single-output GP with a
//! constant mean and an ARD Matérn 5/2 kernel, conditioned on noise-free
//! observations. Every output carries an ensemble of `H` hyperparameter
//! settings ("members"); posterior queries take a member index, and
//! acquisition functions average over members.
//!
//! Because outputs are independent, the posterior covariance `K_n(x)` is
//! diagonal and its Cholesky factor is the elementwise square root.

mod fit;
mod kernel;
mod path;

pub use fit::{fit_hyperparameters, FitDiagnostics, FitOptions, HyperFit, HyperPrior};
pub use kernel::{matern52, KernelHyperparams};
pub use path::SamplePath;

use serde::{Deserialize, Serialize};

use crate::domain::DesignBox;
use crate::linalg::Cholesky;
use crate::scalar::{dot, Scalar};
use crate::{Error, Result};

use kernel::{matern52_unchecked, matern52_with_grad};

/// Maximum number of jitter doublings before a factorization is abandoned.
pub const MAX_JITTER_DOUBLINGS: u32 = 6;

/// Posterior marginal of `f(x)` under one hyperparameter member.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior<T> {
    /// `μ_n(x)`, one entry per output.
    pub mean: Vec<T>,
    /// Diagonal of `K_n(x)`, clamped at zero.
    pub variance: Vec<T>,
}

impl<T: Scalar> Posterior<T> {
    /// Diagonal of the Cholesky factor `C_n(x)`.
    pub fn chol(&self) -> Vec<T> {
        self.variance.iter().map(|v| v.sqrt()).collect()
    }
}

/// Gradients of the posterior with respect to the design point.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGradients<T> {
    /// `∇μ_n(x)`: `k` rows of length `d`.
    pub mean: Vec<Vec<T>>,
    /// Gradients of the diagonal entries of `K_n(x)`: `k` rows of length `d`.
    pub variance: Vec<Vec<T>>,
}

#[derive(Debug, Clone)]
pub(crate) struct Member<T> {
    pub(crate) hyper: KernelHyperparams<T>,
    pub(crate) chol: Cholesky<T>,
    /// `K⁻¹ (y − c)`
    pub(crate) alpha: Vec<T>,
    /// `L⁻¹ (y − c)`
    pub(crate) whitened: Vec<T>,
}

impl<T: Scalar> Member<T> {
    fn condition(inputs: &[Vec<T>], targets: &[T], mut hyper: KernelHyperparams<T>) -> Result<Self> {
        hyper.validate()?;
        let n = inputs.len();
        let mut gram = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..=i {
                let k = matern52_unchecked(&inputs[i], &inputs[j], &hyper);
                gram[i * n + j] = k;
                gram[j * n + i] = k;
            }
        }
        let mut doublings = 0;
        let chol = loop {
            let mut jittered = gram.clone();
            for i in 0..n {
                jittered[i * n + i] = jittered[i * n + i] + hyper.jitter;
            }
            match Cholesky::factor(&jittered, n) {
                Ok(c) => break c,
                Err(_) if doublings < MAX_JITTER_DOUBLINGS => {
                    doublings += 1;
                    hyper.jitter = if hyper.jitter > T::zero() {
                        hyper.jitter * T::of(2.0)
                    } else {
                        hyper.signal_variance * T::of(kernel::DEFAULT_RELATIVE_JITTER)
                    };
                }
                Err(e) => {
                    return Err(Error::Numerical(format!(
                        "training kernel matrix not positive definite at pivot {} after {} jitter doublings",
                        e.pivot, MAX_JITTER_DOUBLINGS
                    )))
                }
            }
        };
        let centered: Vec<T> = targets.iter().map(|&y| y - hyper.constant_mean).collect();
        let whitened = chol.solve_lower(&centered);
        let alpha = chol.solve_upper(&whitened);
        Ok(Self {
            hyper,
            chol,
            alpha,
            whitened,
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct OutputModel<T> {
    pub(crate) targets: Vec<T>,
    pub(crate) map: KernelHyperparams<T>,
    pub(crate) members: Vec<Member<T>>,
    pub(crate) diagnostics: FitDiagnostics,
}

/// The jitter acts as a nugget on identical inputs: a query that coincides
/// with training input `i` sees `k(x, x_i) + jitter` and prior variance
/// `σ² + jitter`, so it reproduces the target with zero variance.
fn nugget<T: Scalar>(kx: &mut [T], hit: Option<usize>, h: &KernelHyperparams<T>) -> T {
    match hit {
        Some(i) => {
            kx[i] = kx[i] + h.jitter;
            h.signal_variance + h.jitter
        }
        None => h.signal_variance,
    }
}

/// Fitted multi-output GP. Immutable once built; refits produce a new value.
#[derive(Debug, Clone)]
pub struct GpModel<T> {
    pub(crate) inputs: Vec<Vec<T>>,
    pub(crate) outputs: Vec<OutputModel<T>>,
}

fn check_data<T: Scalar>(inputs: &[Vec<T>], targets: &[Vec<T>]) -> Result<(usize, usize)> {
    if inputs.is_empty() {
        return Err(Error::NotReady("GP needs at least one training point".into()));
    }
    if inputs.len() != targets.len() {
        return Err(Error::Contract(format!(
            "{} inputs but {} target vectors",
            inputs.len(),
            targets.len()
        )));
    }
    let d = inputs[0].len();
    let k = targets[0].len();
    if inputs.iter().any(|x| x.len() != d) || targets.iter().any(|y| y.len() != k) || k == 0 {
        return Err(Error::Contract("ragged training data".into()));
    }
    if targets.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Contract("training targets must be finite".into()));
    }
    Ok((d, k))
}

fn column<T: Scalar>(targets: &[Vec<T>], j: usize) -> Vec<T> {
    targets.iter().map(|y| y[j]).collect()
}

impl<T: Scalar> GpModel<T> {
    /// Conditions on `inputs`/`targets` (one attribute vector per input) with
    /// explicit hyperparameter ensembles, one list per output.
    pub fn with_hyperparams(
        inputs: Vec<Vec<T>>,
        targets: &[Vec<T>],
        ensembles: Vec<Vec<KernelHyperparams<T>>>,
    ) -> Result<Self> {
        let (d, k) = check_data(&inputs, targets)?;
        if ensembles.len() != k {
            return Err(Error::Contract(format!("{} ensembles for {k} outputs", ensembles.len())));
        }
        let h = ensembles[0].len();
        if h == 0 || ensembles.iter().any(|e| e.len() != h) {
            return Err(Error::Contract("every output needs the same non-zero ensemble size".into()));
        }
        let mut outputs = Vec::with_capacity(k);
        for (j, ensemble) in ensembles.into_iter().enumerate() {
            let ys = column(targets, j);
            let members = ensemble
                .into_iter()
                .map(|hp| {
                    if hp.dim() != d {
                        return Err(Error::Contract("hyperparameter dimension mismatch".into()));
                    }
                    Member::condition(&inputs, &ys, hp)
                })
                .collect::<Result<Vec<_>>>()?;
            outputs.push(OutputModel {
                targets: ys,
                map: members[0].hyper.clone(),
                members,
                diagnostics: FitDiagnostics::default(),
            });
        }
        Ok(Self { inputs, outputs })
    }

    /// Infers hyperparameters for every output (see [`fit_hyperparameters`])
    /// and conditions on the data.
    ///
    /// `warm_start`, when given, supplies the previous fit's MAP setting per
    /// output as an extra local-search start.
    pub fn fit(
        inputs: Vec<Vec<T>>,
        targets: &[Vec<T>],
        design_box: &DesignBox<T>,
        options: &FitOptions,
        warm_start: Option<&[KernelHyperparams<T>]>,
        seed: u64,
    ) -> Result<Self> {
        let (d, k) = check_data(&inputs, targets)?;
        if design_box.dim() != d {
            return Err(Error::Contract("design box dimension differs from inputs".into()));
        }
        let mut outputs = Vec::with_capacity(k);
        for j in 0..k {
            let ys = column(targets, j);
            let prior = HyperPrior::default_for(design_box, &ys);
            let mut opts = options.clone();
            opts.warm_start = warm_start.and_then(|w| w.get(j).cloned()).map(|h| h.into_f64());
            let fit = fit_hyperparameters(
                &inputs,
                &ys,
                &prior,
                &opts,
                crate::stats::derive_seed(seed, &[j as u64]),
            )?;
            let members = fit
                .ensemble
                .into_iter()
                .map(|hp| Member::condition(&inputs, &ys, hp))
                .collect::<Result<Vec<_>>>()?;
            outputs.push(OutputModel {
                targets: ys,
                map: fit.map,
                members,
                diagnostics: fit.diagnostics,
            });
        }
        Ok(Self { inputs, outputs })
    }

    pub fn num_outputs(&self) -> usize {
        self.outputs.len()
    }

    pub fn num_members(&self) -> usize {
        self.outputs[0].members.len()
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn inputs(&self) -> &[Vec<T>] {
        &self.inputs
    }

    /// Training targets of output `j`.
    pub fn targets(&self, j: usize) -> &[T] {
        &self.outputs[j].targets
    }

    /// Hyperparameters of `member` for output `j`, including any jitter
    /// increase applied during factorization.
    pub fn hyperparams(&self, j: usize, member: usize) -> &KernelHyperparams<T> {
        &self.outputs[j].members[member].hyper
    }

    /// MAP hyperparameters of each output (the first member for models built
    /// from explicit hyperparameters).
    pub fn map_hyperparams(&self) -> Vec<KernelHyperparams<T>> {
        self.outputs.iter().map(|o| o.map.clone()).collect()
    }

    pub fn diagnostics(&self, j: usize) -> &FitDiagnostics {
        &self.outputs[j].diagnostics
    }

    /// Lower Cholesky factor of the jittered training kernel matrix for
    /// output `j` and `member`.
    pub fn training_factor(&self, j: usize, member: usize) -> &Cholesky<T> {
        &self.outputs[j].members[member].chol
    }

    fn training_index(&self, x: &[T]) -> Option<usize> {
        self.inputs.iter().position(|p| p.as_slice() == x)
    }

    fn check_query(&self, x: &[T], member: usize) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Contract(format!(
                "query has dimension {}, model has {}",
                x.len(),
                self.dim()
            )));
        }
        if member >= self.num_members() {
            return Err(Error::Contract(format!(
                "member {member} out of range ({} members)",
                self.num_members()
            )));
        }
        Ok(())
    }

    /// Posterior mean and (diagonal) covariance of `f(x)` under `member`.
    pub fn posterior(&self, x: &[T], member: usize) -> Result<Posterior<T>> {
        self.check_query(x, member)?;
        let hit = self.training_index(x);
        let mut mean = Vec::with_capacity(self.num_outputs());
        let mut variance = Vec::with_capacity(self.num_outputs());
        for out in &self.outputs {
            let m = &out.members[member];
            let mut kx: Vec<T> = self.inputs.iter().map(|xi| matern52_unchecked(x, xi, &m.hyper)).collect();
            let prior_var = nugget(&mut kx, hit, &m.hyper);
            mean.push(m.hyper.constant_mean + dot(&kx, &m.alpha));
            let v = m.chol.solve_lower(&kx);
            variance.push((prior_var - dot(&v, &v)).max(T::zero()));
        }
        Ok(Posterior { mean, variance })
    }

    /// Posterior together with its gradients in `x`.
    ///
    /// The variance gradient is defined as zero at training inputs and
    /// wherever the variance has reached the zero floor.
    pub fn posterior_with_gradients(&self, x: &[T], member: usize) -> Result<(Posterior<T>, PosteriorGradients<T>)> {
        self.check_query(x, member)?;
        let d = self.dim();
        let n = self.inputs.len();
        let k = self.num_outputs();
        let mut post = Posterior {
            mean: Vec::with_capacity(k),
            variance: Vec::with_capacity(k),
        };
        let mut grads = PosteriorGradients {
            mean: Vec::with_capacity(k),
            variance: Vec::with_capacity(k),
        };
        let hit = self.training_index(x);
        let mut dk = vec![T::zero(); n * d];
        for out in &self.outputs {
            let m = &out.members[member];
            let mut kx = Vec::with_capacity(n);
            for (i, xi) in self.inputs.iter().enumerate() {
                kx.push(matern52_with_grad(x, xi, &m.hyper, &mut dk[i * d..(i + 1) * d]));
            }
            let prior_var = nugget(&mut kx, hit, &m.hyper);
            post.mean.push(m.hyper.constant_mean + dot(&kx, &m.alpha));
            let v = m.chol.solve_lower(&kx);
            let raw = prior_var - dot(&v, &v);
            let mut gmean = vec![T::zero(); d];
            for i in 0..n {
                for (g, &dki) in gmean.iter_mut().zip(&dk[i * d..(i + 1) * d]) {
                    *g = *g + m.alpha[i] * dki;
                }
            }
            let mut gvar = vec![T::zero(); d];
            if raw > T::zero() && hit.is_none() {
                let beta = m.chol.solve_upper(&v);
                let two = T::of(2.0);
                for i in 0..n {
                    for (g, &dki) in gvar.iter_mut().zip(&dk[i * d..(i + 1) * d]) {
                        *g = *g - two * beta[i] * dki;
                    }
                }
            }
            post.variance.push(raw.max(T::zero()));
            grads.mean.push(gmean);
            grads.variance.push(gvar);
        }
        Ok((post, grads))
    }

    pub fn posterior_gradients(&self, x: &[T], member: usize) -> Result<PosteriorGradients<T>> {
        self.posterior_with_gradients(x, member).map(|(_, g)| g)
    }

    /// Starts an empty lazily-sampled posterior path under `member`.
    pub fn new_path(&self, member: usize, seed: u64) -> Result<SamplePath<T>> {
        if member >= self.num_members() {
            return Err(Error::Contract(format!("member {member} out of range")));
        }
        Ok(SamplePath::new(self, member, seed))
    }

    /// Draws `f(x)` on `path`, conditioning on the real data and every value
    /// previously drawn on the same path.
    pub fn lazy_sample(&self, x: &[T], path: &mut SamplePath<T>) -> Result<Vec<T>> {
        self.check_query(x, path.member())?;
        Ok(path.sample(self, x))
    }
}

impl<T: Scalar> KernelHyperparams<T> {
    fn into_f64(self) -> KernelHyperparams<f64> {
        KernelHyperparams {
            lengthscales: self.lengthscales.iter().map(|v| v.as_f64()).collect(),
            signal_variance: self.signal_variance.as_f64(),
            constant_mean: self.constant_mean.as_f64(),
            jitter: self.jitter.as_f64(),
        }
    }
}

/// Serializable summary of one output's hyperparameter ensemble.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EnsembleSummary {
    pub output: usize,
    pub members: Vec<KernelHyperparams<f64>>,
    pub degenerate: bool,
}

impl<T: Scalar> GpModel<T> {
    pub fn ensemble_summaries(&self) -> Vec<EnsembleSummary> {
        self.outputs
            .iter()
            .enumerate()
            .map(|(j, o)| EnsembleSummary {
                output: j,
                members: o.members.iter().map(|m| m.hyper.clone().into_f64()).collect(),
                degenerate: o.diagnostics.degenerate,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests;
