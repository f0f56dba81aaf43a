//! Pairwise preference responses, likelihood models and sample-based
//! posterior inference over utility parameters.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::stats::{normal_cdf, quantile, rng_from_seed};
use crate::utility::{utility_value, value_unchecked, ThetaPrior, UtilityFamily};
use crate::{Error, Result};

/// Default posterior ensemble size.
pub const DEFAULT_SAMPLES: usize = 64;
/// Prior draws available to the rejection sampler.
pub const REJECTION_BUDGET: usize = 1_000_000;
/// Below this acceptance rate the sampler switches to the logit fallback.
pub const MIN_ACCEPTANCE_RATE: f64 = 1e-4;
/// Utility differences at most this large count as exact ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

const IMPORTANCE_PROPOSALS: usize = 8192;
const FALLBACK_SCALE_PROBES: usize = 256;

/// The DM's answer to "is `y` preferred to `y'`?".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "i8", into = "i8")]
pub enum Response {
    PreferSecond,
    Indifferent,
    PreferFirst,
}

impl Response {
    pub fn value(self) -> i8 {
        match self {
            Response::PreferSecond => -1,
            Response::Indifferent => 0,
            Response::PreferFirst => 1,
        }
    }

    fn from_difference(delta: f64) -> Self {
        if delta.is_nan() || delta.abs() <= TIE_TOLERANCE {
            Response::Indifferent
        } else if delta > 0.0 {
            Response::PreferFirst
        } else {
            Response::PreferSecond
        }
    }
}

impl TryFrom<i8> for Response {
    type Error = Error;

    fn try_from(a: i8) -> Result<Self> {
        match a {
            -1 => Ok(Response::PreferSecond),
            0 => Ok(Response::Indifferent),
            1 => Ok(Response::PreferFirst),
            other => Err(Error::Contract(format!("response must be -1, 0 or 1, got {other}"))),
        }
    }
}

impl TryFrom<i64> for Response {
    type Error = Error;

    fn try_from(a: i64) -> Result<Self> {
        i8::try_from(a)
            .map_err(|_| Error::Contract(format!("response must be -1, 0 or 1, got {a}")))
            .and_then(Response::try_from)
    }
}

impl From<Response> for i8 {
    fn from(r: Response) -> i8 {
        r.value()
    }
}

/// Where a response came from. Human indifference carries no likelihood.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    #[default]
    Simulated,
    Human,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceRecord<T> {
    /// 1-based interaction index.
    pub m: usize,
    pub first: Vec<T>,
    pub second: Vec<T>,
    pub response: Response,
    #[serde(default)]
    pub channel: Channel,
    /// Indices of the compared designs among the evaluations, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub designs: Option<(usize, usize)>,
}

impl<T: Scalar> PreferenceRecord<T> {
    fn is_informative(&self) -> bool {
        !(self.channel == Channel::Human && self.response == Response::Indifferent)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Likelihood {
    /// `L(a; Δ) = 1{a = sign Δ}`.
    #[default]
    Exact,
    /// `P(a = 1) = Φ(Δ / scale)`.
    Probit { scale: f64 },
    /// `P(a = 1) = 1 / (1 + exp(−Δ / scale))`.
    Logit { scale: f64 },
}

impl Likelihood {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Likelihood::Exact => Ok(()),
            Likelihood::Probit { scale } | Likelihood::Logit { scale } => {
                if scale > 0.0 && scale.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config(format!("likelihood scale must be positive, got {scale}")))
                }
            }
        }
    }

    /// Probability of `a = 1` given a utility difference.
    fn prob_first(&self, delta: f64) -> f64 {
        let delta = if delta.is_nan() { 0.0 } else { delta };
        match *self {
            Likelihood::Exact => match Response::from_difference(delta) {
                Response::PreferFirst => 1.0,
                Response::PreferSecond => 0.0,
                Response::Indifferent => 0.5,
            },
            Likelihood::Probit { scale } => normal_cdf(delta / scale),
            Likelihood::Logit { scale } => 1.0 / (1.0 + (-delta / scale).exp()),
        }
    }

    /// `log L(a; Δ)` for the smooth models; `a = 0` contributes nothing.
    fn log_factor(&self, response: Response, delta: f64) -> f64 {
        let delta = if delta.is_nan() { 0.0 } else { delta };
        match (*self, response) {
            (_, Response::Indifferent) => 0.0,
            (Likelihood::Exact, r) => {
                if Response::from_difference(delta) == r {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            (Likelihood::Probit { scale }, r) => {
                let z = f64::from(r.value()) * delta / scale;
                normal_cdf(z).ln()
            }
            (Likelihood::Logit { scale }, r) => {
                let z = f64::from(r.value()) * delta / scale;
                // log σ(z) = −log(1 + e^{−z}), evaluated stably
                if z > 0.0 {
                    -(-z).exp().ln_1p()
                } else {
                    z - z.exp().ln_1p()
                }
            }
        }
    }
}

/// `U(y; θ) − U(y'; θ)` in `f64`, with two infeasible values compared as a tie.
fn difference<T: Scalar>(first: &[T], second: &[T], theta: &[T], family: UtilityFamily) -> f64 {
    let a = value_unchecked(first, theta, family).as_f64();
    let b = value_unchecked(second, theta, family).as_f64();
    if a == b {
        0.0
    } else {
        a - b
    }
}

/// Simulated DM response for the pair `(y, y')` under `θ_true`.
pub fn respond<T: Scalar>(
    first: &[T],
    second: &[T],
    theta_true: &[T],
    family: UtilityFamily,
    likelihood: &Likelihood,
    seed: u64,
) -> Result<Response> {
    if first.len() != second.len() {
        return Err(Error::Contract("compared attribute vectors differ in length".into()));
    }
    utility_value(first, theta_true, family)?;
    utility_value(second, theta_true, family)?;
    likelihood.validate()?;
    let delta = difference(first, second, theta_true, family);
    Ok(match likelihood {
        Likelihood::Exact => Response::from_difference(delta),
        smooth => {
            let p = smooth.prob_first(delta);
            if rng_from_seed(seed).random::<f64>() < p {
                Response::PreferFirst
            } else {
                Response::PreferSecond
            }
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PosteriorSource {
    Prior,
    Conditioned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDiagnostics {
    /// Likelihood actually used (differs from the request after a fallback).
    pub likelihood: Likelihood,
    /// Accepted / proposed prior draws for rejection sampling; surviving /
    /// listed atoms for finite priors; `1` otherwise.
    pub acceptance_rate: f64,
    pub proposals: usize,
    /// The exact likelihood could not be satisfied and a logit model was used.
    pub fallback: bool,
    /// Effective sample size of the importance weights, when used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub effective_sample_size: Option<f64>,
}

/// Sample-based posterior over θ.
///
/// For a finite prior under the exact likelihood the samples are the
/// surviving atoms themselves, each with equal mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaPosterior<T> {
    pub samples: Vec<Vec<T>>,
    pub source: PosteriorSource,
    pub diagnostics: PosteriorDiagnostics,
}

/// Per-coordinate summary of posterior samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateSummary {
    pub mean: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub count: usize,
    pub source: PosteriorSource,
    pub fallback: bool,
    pub coordinates: Vec<CoordinateSummary>,
}

impl<T: Scalar> ThetaPosterior<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn summary(&self) -> PosteriorSummary {
        let dim = self.samples.first().map_or(0, Vec::len);
        let coordinates = (0..dim)
            .map(|i| {
                let v: Vec<f64> = self.samples.iter().map(|s| s[i].as_f64()).collect();
                CoordinateSummary {
                    mean: v.iter().sum::<f64>() / v.len() as f64,
                    q05: quantile(&v, 0.05),
                    q25: quantile(&v, 0.25),
                    median: quantile(&v, 0.5),
                    q75: quantile(&v, 0.75),
                    q95: quantile(&v, 0.95),
                }
            })
            .collect();
        PosteriorSummary {
            count: self.samples.len(),
            source: self.source,
            fallback: self.diagnostics.fallback,
            coordinates,
        }
    }
}

/// Draws `count` samples from `p(θ | records)`. Deterministic given `seed`.
pub fn posterior_sample<T: Scalar>(
    prior: &ThetaPrior<T>,
    records: &[PreferenceRecord<T>],
    family: UtilityFamily,
    likelihood: &Likelihood,
    count: usize,
    seed: u64,
) -> Result<ThetaPosterior<T>> {
    prior.validate()?;
    likelihood.validate()?;
    if count == 0 {
        return Err(Error::Contract("posterior sample count must be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let probe = prior.sample(&mut rng);
    for r in records {
        if r.first.len() != r.second.len() {
            return Err(Error::Contract(format!("record {} compares vectors of different length", r.m)));
        }
        utility_value(&r.first, &probe, family)?;
        utility_value(&r.second, &probe, family)?;
    }

    let informative: Vec<&PreferenceRecord<T>> = records.iter().filter(|r| r.is_informative()).collect();
    if informative.is_empty() {
        let samples = match prior.atoms() {
            Some(atoms) => atoms.to_vec(),
            None => (0..count).map(|_| prior.sample(&mut rng)).collect(),
        };
        return Ok(ThetaPosterior {
            samples,
            source: PosteriorSource::Prior,
            diagnostics: PosteriorDiagnostics {
                likelihood: *likelihood,
                acceptance_rate: 1.0,
                proposals: count,
                fallback: false,
                effective_sample_size: None,
            },
        });
    }

    let result = match likelihood {
        Likelihood::Exact => match prior.atoms() {
            Some(atoms) => filter_atoms(atoms, &informative, family),
            None => rejection(prior, &informative, family, count, &mut rng),
        },
        smooth => Some(importance(prior, &informative, family, smooth, count, &mut rng)),
    };
    match result {
        Some(p) => Ok(p),
        None => {
            let scale = fallback_scale(prior, &informative, family, &mut rng);
            let mut p = importance(prior, &informative, family, &Likelihood::Logit { scale }, count, &mut rng);
            p.diagnostics.fallback = true;
            Ok(p)
        }
    }
}

fn consistent<T: Scalar>(theta: &[T], records: &[&PreferenceRecord<T>], family: UtilityFamily) -> bool {
    records
        .iter()
        .all(|r| Response::from_difference(difference(&r.first, &r.second, theta, family)) == r.response)
}

fn filter_atoms<T: Scalar>(
    atoms: &[Vec<T>],
    records: &[&PreferenceRecord<T>],
    family: UtilityFamily,
) -> Option<ThetaPosterior<T>> {
    let kept: Vec<Vec<T>> = atoms.iter().filter(|t| consistent(t, records, family)).cloned().collect();
    if kept.is_empty() {
        return None;
    }
    Some(ThetaPosterior {
        diagnostics: PosteriorDiagnostics {
            likelihood: Likelihood::Exact,
            acceptance_rate: kept.len() as f64 / atoms.len() as f64,
            proposals: atoms.len(),
            fallback: false,
            effective_sample_size: None,
        },
        samples: kept,
        source: PosteriorSource::Conditioned,
    })
}

fn rejection<T: Scalar, R: Rng>(
    prior: &ThetaPrior<T>,
    records: &[&PreferenceRecord<T>],
    family: UtilityFamily,
    count: usize,
    rng: &mut R,
) -> Option<ThetaPosterior<T>> {
    let mut kept = Vec::with_capacity(count);
    let mut proposals = 0usize;
    while kept.len() < count && proposals < REJECTION_BUDGET {
        let t = prior.sample(rng);
        proposals += 1;
        if consistent(&t, records, family) {
            kept.push(t);
        }
    }
    let rate = kept.len() as f64 / proposals as f64;
    if kept.is_empty() || (kept.len() < count && rate < MIN_ACCEPTANCE_RATE) {
        return None;
    }
    // budget exhausted at an acceptable rate: cycle the accepted draws
    let accepted = kept.len();
    let mut i = 0;
    while kept.len() < count {
        kept.push(kept[i % accepted].clone());
        i += 1;
    }
    Some(ThetaPosterior {
        samples: kept,
        source: PosteriorSource::Conditioned,
        diagnostics: PosteriorDiagnostics {
            likelihood: Likelihood::Exact,
            acceptance_rate: rate,
            proposals,
            fallback: false,
            effective_sample_size: None,
        },
    })
}

fn log_weight<T: Scalar>(theta: &[T], records: &[&PreferenceRecord<T>], family: UtilityFamily, lik: &Likelihood) -> f64 {
    records
        .iter()
        .map(|r| lik.log_factor(r.response, difference(&r.first, &r.second, theta, family)))
        .sum()
}

/// Self-normalized importance sampling from the prior followed by
/// systematic resampling to `count` equally weighted draws.
fn importance<T: Scalar, R: Rng>(
    prior: &ThetaPrior<T>,
    records: &[&PreferenceRecord<T>],
    family: UtilityFamily,
    lik: &Likelihood,
    count: usize,
    rng: &mut R,
) -> ThetaPosterior<T> {
    let proposals: Vec<Vec<T>> = match prior.atoms() {
        Some(atoms) => atoms.to_vec(),
        None => (0..IMPORTANCE_PROPOSALS.max(4 * count)).map(|_| prior.sample(rng)).collect(),
    };
    let logw: Vec<f64> = proposals.iter().map(|t| log_weight(t, records, family, lik)).collect();
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = if max.is_finite() {
        logw.iter().map(|l| (l - max).exp()).collect()
    } else {
        vec![1.0; logw.len()]
    };
    let total: f64 = w.iter().sum();
    let ess = total * total / w.iter().map(|v| v * v).sum::<f64>();

    let step = total / count as f64;
    let mut u = rng.random::<f64>() * step;
    let mut samples = Vec::with_capacity(count);
    let mut cum = 0.0;
    let mut i = 0;
    for _ in 0..count {
        while i + 1 < w.len() && cum + w[i] < u {
            cum += w[i];
            i += 1;
        }
        samples.push(proposals[i].clone());
        u += step;
    }
    ThetaPosterior {
        samples,
        source: PosteriorSource::Conditioned,
        diagnostics: PosteriorDiagnostics {
            likelihood: *lik,
            acceptance_rate: 1.0,
            proposals: proposals.len(),
            fallback: false,
            effective_sample_size: Some(ess),
        },
    }
}

/// `0.1 ×` the median `|Δ|` over the records under prior draws.
fn fallback_scale<T: Scalar, R: Rng>(
    prior: &ThetaPrior<T>,
    records: &[&PreferenceRecord<T>],
    family: UtilityFamily,
    rng: &mut R,
) -> f64 {
    let mut deltas = Vec::new();
    for _ in 0..FALLBACK_SCALE_PROBES {
        let t = prior.sample(rng);
        for r in records {
            let d = difference(&r.first, &r.second, &t, family).abs();
            if d.is_finite() {
                deltas.push(d);
            }
        }
    }
    let med = if deltas.is_empty() { 0.0 } else { quantile(&deltas, 0.5) };
    if med > 0.0 {
        0.1 * med
    } else {
        1.0
    }
}

/// Uniformly random unordered pair of distinct indices into `evaluated`,
/// returned in increasing order.
pub fn select_query_pair<T>(evaluated: &[Vec<T>], seed: u64) -> Result<(usize, usize)> {
    let n = evaluated.len();
    if n < 2 {
        return Err(Error::NotReady(format!("a query pair needs at least 2 evaluated designs, have {n}")));
    }
    let mut rng = rng_from_seed(seed);
    let i = rng.random_range(0..n);
    let mut j = rng.random_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    Ok((i.min(j), i.max(j)))
}

#[cfg(test)]
mod tests;
