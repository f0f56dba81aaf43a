//! Hyperparameter inference: MAP by multi-start Nelder–Mead over
//! log-parameters, then slice sampling around the MAP for ensembles.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kernel::{matern52_unchecked, KernelHyperparams};
use super::MAX_JITTER_DOUBLINGS;
use crate::domain::DesignBox;
use crate::linalg::Cholesky;
use crate::optim::{nelder_mead_max, slice_sweep, Limits};
use crate::scalar::{dot, Scalar};
use crate::stats::{rng_from_seed, standard_normal};
use crate::{Error, Result};

/// Prior over one output's hyperparameters.
///
/// Lengthscales and signal variance are log-normal, the constant mean is
/// normal. All values are on the original (not log) scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperPrior {
    pub lengthscale_median: Vec<f64>,
    pub lengthscale_log_sd: f64,
    pub variance_median: f64,
    pub variance_log_sd: f64,
    pub mean_center: f64,
    pub mean_sd: f64,
    /// Smallest signal variance the search may return.
    pub variance_floor: f64,
    /// Box widths; they bound the lengthscale search to `[0.01, 100]` widths.
    pub widths: Vec<f64>,
}

const DEGENERATE_RELATIVE_VARIANCE: f64 = 1e-12;

impl HyperPrior {
    /// Lengthscale median `0.25 ×` box width, signal-variance median equal to
    /// the target variance, mean centred on the target mean; log-sd 1.
    pub fn default_for<T: Scalar>(design_box: &DesignBox<T>, targets: &[T]) -> Self {
        let ys: Vec<f64> = targets.iter().map(|v| v.as_f64()).collect();
        let n = ys.len() as f64;
        let mean = ys.iter().sum::<f64>() / n;
        let var = ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n;
        let tiny = DEGENERATE_RELATIVE_VARIANCE * mean.powi(2).max(1.0);
        let var_med = var.max(tiny);
        let widths: Vec<f64> = (0..design_box.dim()).map(|i| design_box.width(i).as_f64()).collect();
        Self {
            lengthscale_median: widths.iter().map(|w| 0.25 * w).collect(),
            lengthscale_log_sd: 1.0,
            variance_median: var_med,
            variance_log_sd: 1.0,
            mean_center: mean,
            mean_sd: var_med.sqrt(),
            variance_floor: (var_med * 1e-6).max(tiny),
            widths,
        }
    }

    fn is_degenerate(&self) -> bool {
        self.variance_median <= DEGENERATE_RELATIVE_VARIANCE * self.mean_center.powi(2).max(1.0)
    }

    fn dim(&self) -> usize {
        self.lengthscale_median.len()
    }

    fn limits(&self) -> Limits {
        let d = self.dim();
        let mut lower = Vec::with_capacity(d + 2);
        let mut upper = Vec::with_capacity(d + 2);
        for w in &self.widths {
            lower.push((0.01 * w).ln());
            upper.push((100.0 * w).ln());
        }
        lower.push(self.variance_floor.ln());
        upper.push((self.variance_median * 1e4).ln());
        lower.push(self.mean_center - 10.0 * self.mean_sd);
        upper.push(self.mean_center + 10.0 * self.mean_sd);
        Limits { lower, upper }
    }

    fn median_point(&self) -> Vec<f64> {
        let mut p: Vec<f64> = self.lengthscale_median.iter().map(|l| l.ln()).collect();
        p.push(self.variance_median.ln());
        p.push(self.mean_center);
        p
    }

    fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut p: Vec<f64> = self
            .lengthscale_median
            .iter()
            .map(|l| l.ln() + self.lengthscale_log_sd * standard_normal::<f64, _>(rng))
            .collect();
        p.push(self.variance_median.ln() + self.variance_log_sd * standard_normal::<f64, _>(rng));
        p.push(self.mean_center + self.mean_sd * standard_normal::<f64, _>(rng));
        p
    }

    fn log_density(&self, p: &[f64]) -> f64 {
        let d = self.dim();
        let norm = |v: f64, c: f64, s: f64| -0.5 * ((v - c) / s).powi(2);
        let mut lp = 0.0;
        for i in 0..d {
            lp += norm(p[i], self.lengthscale_median[i].ln(), self.lengthscale_log_sd);
        }
        lp += norm(p[d], self.variance_median.ln(), self.variance_log_sd);
        lp += norm(p[d + 1], self.mean_center, self.mean_sd);
        lp
    }
}

/// Search and sampling budgets for [`fit_hyperparameters`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitOptions {
    /// Ensemble size `H`; `1` returns the MAP setting alone.
    pub ensemble_size: usize,
    /// Local-search starts when no warm start is supplied.
    pub restarts: usize,
    /// Random starts added next to a warm start.
    pub warm_restarts: usize,
    /// Objective evaluations per start before the best start is polished.
    pub restart_evals: usize,
    pub polish_evals: usize,
    /// Slice-sampling sweeps discarded before the first ensemble draw.
    pub burn_in: usize,
    /// Sweeps between successive ensemble draws.
    pub thin: usize,
    #[serde(skip)]
    pub warm_start: Option<KernelHyperparams<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            ensemble_size: 10,
            restarts: 16,
            warm_restarts: 2,
            restart_evals: 150,
            polish_evals: 600,
            burn_in: 5,
            thin: 2,
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// All targets (numerically) equal; the signal variance was clamped to
    /// the floor and no search was run.
    pub degenerate: bool,
    pub map_log_posterior: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct HyperFit<T> {
    pub map: KernelHyperparams<T>,
    pub ensemble: Vec<KernelHyperparams<T>>,
    pub diagnostics: FitDiagnostics,
}

fn to_hyper<T: Scalar>(p: &[f64]) -> KernelHyperparams<T> {
    let d = p.len() - 2;
    KernelHyperparams::new(
        p[..d].iter().map(|v| T::of(v.exp())).collect(),
        T::of(p[d].exp()),
        T::of(p[d + 1]),
    )
}

fn from_hyper(h: &KernelHyperparams<f64>) -> Vec<f64> {
    let mut p: Vec<f64> = h.lengthscales.iter().map(|l| l.ln()).collect();
    p.push(h.signal_variance.ln());
    p.push(h.constant_mean);
    p
}

/// Log marginal likelihood of noise-free data under `h` (with jitter
/// doubling on factorization failure). `None` if the factorization fails.
pub(crate) fn log_marginal_likelihood<T: Scalar>(inputs: &[Vec<T>], targets: &[T], h: &KernelHyperparams<T>) -> Option<f64> {
    let n = inputs.len();
    let mut gram = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            gram[i * n + j] = matern52_unchecked(&inputs[i], &inputs[j], h);
        }
    }
    let mut jitter = h.jitter;
    for _ in 0..=MAX_JITTER_DOUBLINGS {
        let mut m = gram.clone();
        for i in 0..n {
            m[i * n + i] = m[i * n + i] + jitter;
        }
        if let Ok(chol) = Cholesky::factor(&m, n) {
            let centered: Vec<T> = targets.iter().map(|&y| y - h.constant_mean).collect();
            let w = chol.solve_lower(&centered);
            let quad = dot(&w, &w).as_f64();
            let ll = -0.5 * quad - 0.5 * chol.log_det().as_f64() - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
            return ll.is_finite().then_some(ll);
        }
        jitter = jitter * T::of(2.0);
    }
    None
}

/// Infers `H` hyperparameter settings for a single output.
///
/// With `H = 1` the MAP setting is returned; with `H > 1` the ensemble holds
/// `H` slice-sampling draws started at the MAP. Deterministic given `seed`.
pub fn fit_hyperparameters<T: Scalar>(
    inputs: &[Vec<T>],
    targets: &[T],
    prior: &HyperPrior,
    options: &FitOptions,
    seed: u64,
) -> Result<HyperFit<T>> {
    if inputs.len() < 2 || inputs.len() != targets.len() {
        return Err(Error::Contract(format!(
            "hyperparameter fit needs at least 2 points with matching targets (got {} inputs, {} targets)",
            inputs.len(),
            targets.len()
        )));
    }
    if options.ensemble_size == 0 {
        return Err(Error::Contract("ensemble size must be at least 1".into()));
    }
    if inputs.iter().any(|x| x.len() != prior.dim()) {
        return Err(Error::Contract("prior dimension differs from inputs".into()));
    }
    if prior.is_degenerate() {
        let mut map = prior.median_point();
        map[prior.dim()] = prior.variance_median.max(prior.variance_floor).ln();
        let h = to_hyper::<T>(&map);
        return Ok(HyperFit {
            ensemble: vec![h.clone(); options.ensemble_size],
            map: h,
            diagnostics: FitDiagnostics {
                degenerate: true,
                map_log_posterior: f64::NAN,
                evaluations: 0,
            },
        });
    }

    let limits = prior.limits();
    let mut evaluations = 0usize;
    let mut log_post = |p: &[f64]| -> f64 {
        evaluations += 1;
        match log_marginal_likelihood(inputs, targets, &to_hyper::<T>(p)) {
            Some(ll) => ll + prior.log_density(p),
            None => f64::NEG_INFINITY,
        }
    };

    let mut rng = rng_from_seed(seed);
    let mut starts = Vec::new();
    let random_starts = match &options.warm_start {
        Some(w) if w.lengthscales.len() == prior.dim() => {
            let mut p = from_hyper(w);
            limits.clamp(&mut p);
            starts.push(p);
            options.warm_restarts
        }
        _ => options.restarts.saturating_sub(1),
    };
    starts.push(prior.median_point());
    for _ in 0..random_starts {
        let mut p = prior.sample_point(&mut rng);
        limits.clamp(&mut p);
        starts.push(p);
    }

    let d = prior.dim();
    let mut steps = vec![1.0; d + 1];
    steps.push(prior.mean_sd);
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in &starts {
        let r = nelder_mead_max(&mut log_post, s, &steps, &limits, options.restart_evals, 1e-9);
        if best.as_ref().is_none_or(|b| r.value > b.1) {
            best = Some((r.point, r.value));
        }
    }
    let (start, _) = best.expect("at least one start");
    let half: Vec<f64> = steps.iter().map(|s| s * 0.25).collect();
    let polished = nelder_mead_max(&mut log_post, &start, &half, &limits, options.polish_evals, 1e-12);
    if !polished.value.is_finite() {
        return Err(Error::Numerical(
            "no hyperparameter setting yields a positive definite kernel matrix".into(),
        ));
    }
    let map_point = polished.point;
    let map_value = polished.value;

    let ensemble = if options.ensemble_size == 1 {
        vec![to_hyper::<T>(&map_point)]
    } else {
        let mut widths = vec![1.0; d + 1];
        widths.push(prior.mean_sd);
        let mut x = map_point.clone();
        let mut cur = map_value;
        for _ in 0..options.burn_in {
            cur = slice_sweep(&mut log_post, &mut x, cur, &widths, &limits, &mut rng);
        }
        let mut draws = Vec::with_capacity(options.ensemble_size);
        while draws.len() < options.ensemble_size {
            for _ in 0..options.thin.max(1) {
                cur = slice_sweep(&mut log_post, &mut x, cur, &widths, &limits, &mut rng);
            }
            draws.push(to_hyper::<T>(&x));
        }
        draws
    };

    Ok(HyperFit {
        map: to_hyper(&map_point),
        ensemble,
        diagnostics: FitDiagnostics {
            degenerate: false,
            map_log_posterior: map_value,
            evaluations,
        },
    })
}
