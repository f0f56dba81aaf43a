use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Policy, Resolved};
use crate::acquisition::{maximize_acquisition, ts_uu_select, AcquisitionContext};
use crate::domain::DesignBox;
use crate::gp::{GpModel, KernelHyperparams};
use crate::preference::{posterior_sample, select_query_pair, Channel, PreferenceRecord, Response, ThetaPosterior};
use crate::stats::{derive_seed, rng_from_seed};
use crate::utility::{ThetaPrior, UtilityFamily};
use crate::{Error, Result};

const STREAM_INIT: u64 = 0;
const STREAM_QUERY: u64 = 1;
const STREAM_POSTERIOR: u64 = 2;
const STREAM_FIT: u64 = 3;
const STREAM_ACQUIRE: u64 = 4;
const STREAM_RANDOM: u64 = 5;

/// Hyperparameters behind a proposal, enough to continue a run without
/// repeating earlier fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSnapshot {
    /// Number of evaluations the hyperparameters were inferred from.
    pub fitted_at: usize,
    /// MAP setting per output.
    pub map: Vec<KernelHyperparams<f64>>,
    /// Ensemble per output.
    pub ensembles: Vec<Vec<KernelHyperparams<f64>>>,
}

/// The next design chosen by the policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub x: Vec<f64>,
    /// EI-UU ranking value, or the sampled utility for TS-UU.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acquisition_value: Option<f64>,
    /// The acquisition was zero everywhere it was evaluated.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub flat: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSnapshot>,
}

/// Steppable form of the optimization loop. The caller alternates
/// [`query_pair`](Self::query_pair) → [`record_preference`](Self::record_preference)
/// → [`propose`](Self::propose) → [`record_evaluation`](Self::record_evaluation)
/// after the initial designs are recorded.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    resolved: Resolved,
    inputs: Vec<Vec<f64>>,
    outputs: Vec<Vec<f64>>,
    records: Vec<PreferenceRecord<f64>>,
    posterior: ThetaPosterior<f64>,
    model: Option<ModelSnapshot>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let resolved = config.resolve()?;
        let posterior = Self::draw_posterior(&config, &resolved, &[])?;
        Ok(Self {
            config,
            resolved,
            inputs: Vec::new(),
            outputs: Vec::new(),
            records: Vec::new(),
            posterior,
            model: None,
        })
    }

    /// Rebuilds a run from its history. The θ posterior is recomputed from
    /// `records`; `model` seeds the next hyperparameter fit.
    pub fn restore(
        config: ExperimentConfig,
        evaluations: Vec<(Vec<f64>, Vec<f64>)>,
        records: Vec<PreferenceRecord<f64>>,
        model: Option<ModelSnapshot>,
    ) -> Result<Self> {
        let mut exp = Self::new(config)?;
        for (x, y) in evaluations {
            exp.check_evaluation(&x, &y)?;
            exp.inputs.push(x);
            exp.outputs.push(y);
        }
        if !records.is_empty() {
            exp.records = records;
            exp.posterior = Self::draw_posterior(&exp.config, &exp.resolved, &exp.records)?;
        }
        exp.model = model;
        Ok(exp)
    }

    fn draw_posterior(config: &ExperimentConfig, r: &Resolved, records: &[PreferenceRecord<f64>]) -> Result<ThetaPosterior<f64>> {
        let m = if config.policy.learns_preferences() { records.len() } else { 0 };
        let used = if m == 0 { &[][..] } else { records };
        posterior_sample(
            &r.prior,
            used,
            r.family,
            &config.likelihood,
            config.settings.theta_samples,
            derive_seed(config.seeds.policy, &[STREAM_POSTERIOR, m as u64]),
        )
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn design_box(&self) -> &DesignBox<f64> {
        &self.resolved.design_box
    }

    pub fn attributes(&self) -> usize {
        self.resolved.attributes
    }

    pub fn family(&self) -> UtilityFamily {
        self.resolved.family
    }

    pub fn prior(&self) -> &ThetaPrior<f64> {
        &self.resolved.prior
    }

    pub fn init_count(&self) -> usize {
        self.resolved.init_count
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[Vec<f64>] {
        &self.outputs
    }

    pub fn records(&self) -> &[PreferenceRecord<f64>] {
        &self.records
    }

    pub fn posterior(&self) -> &ThetaPosterior<f64> {
        &self.posterior
    }

    pub fn model(&self) -> Option<&ModelSnapshot> {
        self.model.as_ref()
    }

    /// Evaluations recorded so far.
    pub fn evaluated(&self) -> usize {
        self.inputs.len()
    }

    /// Post-initialization evaluations still to come.
    pub fn remaining(&self) -> usize {
        (self.resolved.init_count + self.config.evaluations).saturating_sub(self.inputs.len())
    }

    pub fn is_initialized(&self) -> bool {
        self.inputs.len() >= self.resolved.init_count
    }

    pub fn is_complete(&self) -> bool {
        self.is_initialized() && self.remaining() == 0
    }

    /// The `2(d + 1)` (or configured) uniform initial designs.
    pub fn initial_designs(&self) -> Vec<Vec<f64>> {
        let mut rng = rng_from_seed(derive_seed(self.config.seeds.evaluation, &[STREAM_INIT]));
        (0..self.resolved.init_count)
            .map(|_| self.resolved.design_box.sample_uniform(&mut rng))
            .collect()
    }

    fn check_evaluation(&self, x: &[f64], y: &[f64]) -> Result<()> {
        if !self.resolved.design_box.contains(x) {
            return Err(Error::Contract(format!("design {x:?} lies outside the box")));
        }
        if y.len() != self.resolved.attributes || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!(
                "expected {} finite attributes, got {y:?}",
                self.resolved.attributes
            )));
        }
        Ok(())
    }

    pub fn record_evaluation(&mut self, x: Vec<f64>, y: Vec<f64>) -> Result<()> {
        self.check_evaluation(&x, &y)?;
        if self.is_complete() {
            return Err(Error::Contract("all evaluations are already recorded".into()));
        }
        if self.is_initialized() && self.records.len() + self.resolved.init_count <= self.inputs.len() {
            return Err(Error::Contract("each evaluation after the initial design needs a preference first".into()));
        }
        self.inputs.push(x);
        self.outputs.push(y);
        Ok(())
    }

    /// The pair to show the DM for interaction `m + 1`, as design indices.
    pub fn query_pair(&self) -> Result<(usize, usize)> {
        if !self.is_initialized() {
            return Err(Error::NotReady("initial designs are not all evaluated".into()));
        }
        let m = self.records.len() as u64 + 1;
        select_query_pair(&self.outputs, derive_seed(self.config.seeds.policy, &[STREAM_QUERY, m]))
    }

    /// Appends the response to `pair` and refreshes the θ posterior
    /// (held at the prior for npl policies).
    pub fn record_preference(&mut self, pair: (usize, usize), response: Response, channel: Channel) -> Result<&ThetaPosterior<f64>> {
        if !self.is_initialized() || self.is_complete() {
            return Err(Error::Contract("no preference is expected at this point".into()));
        }
        if self.records.len() + self.resolved.init_count != self.inputs.len() {
            return Err(Error::Contract("a preference was already recorded for this iteration".into()));
        }
        let n = self.outputs.len();
        if pair.0 >= n || pair.1 >= n || pair.0 == pair.1 {
            return Err(Error::Contract(format!("pair {pair:?} does not name two evaluated designs")));
        }
        let record = PreferenceRecord {
            m: self.records.len() + 1,
            first: self.outputs[pair.0].clone(),
            second: self.outputs[pair.1].clone(),
            response,
            channel,
            designs: Some(pair),
        };
        self.records.push(record);
        if self.config.policy.learns_preferences() {
            self.posterior = Self::draw_posterior(&self.config, &self.resolved, &self.records)?;
        }
        Ok(&self.posterior)
    }

    /// Fits the GP (unless the policy is Random) and chooses the next design.
    pub fn propose(&mut self) -> Result<Proposal> {
        if self.records.len() + self.resolved.init_count != self.inputs.len() + 1 {
            return Err(Error::Contract("the next design is chosen after this iteration's preference".into()));
        }
        let n = self.inputs.len() as u64;
        let seeds = self.config.seeds;
        if !self.config.policy.uses_model() {
            let x = self
                .resolved
                .design_box
                .sample_uniform(&mut rng_from_seed(derive_seed(seeds.policy, &[STREAM_RANDOM, n])));
            return Ok(Proposal {
                x,
                acquisition_value: None,
                flat: false,
                model: None,
            });
        }

        let gp = self.fit_model()?;
        let thetas = &self.posterior.samples;
        let ctx = AcquisitionContext::new(&gp, thetas, self.resolved.family, &self.resolved.design_box)?;
        let seed = derive_seed(seeds.policy, &[STREAM_ACQUIRE, n]);
        let (x, value, flat) = match self.config.policy {
            Policy::TsUu | Policy::TsUuNpl => {
                let out = ts_uu_select(&ctx, &self.config.settings.thompson, seed)?;
                (out.x, out.value, false)
            }
            _ => {
                let out = maximize_acquisition(&ctx, &self.config.settings.sga, seed)?;
                (out.x, out.value, out.flat)
            }
        };
        Ok(Proposal {
            x,
            acquisition_value: Some(value),
            flat,
            model: self.model.clone(),
        })
    }

    fn fit_model(&mut self) -> Result<GpModel<f64>> {
        let n = self.inputs.len();
        let k = self.resolved.attributes;
        let period = self.config.settings.refit_period;
        if let Some(m) = &self.model {
            if n < m.fitted_at + period && m.fitted_at <= n {
                return GpModel::with_hyperparams(self.inputs.clone(), &self.outputs, m.ensembles.clone());
            }
        }
        let warm = self.model.as_ref().map(|m| m.map.clone());
        let gp = GpModel::fit(
            self.inputs.clone(),
            &self.outputs,
            &self.resolved.design_box,
            &self.config.settings.gp,
            warm.as_deref(),
            derive_seed(self.config.seeds.policy, &[STREAM_FIT, n as u64]),
        )?;
        self.model = Some(ModelSnapshot {
            fitted_at: n,
            map: gp.map_hyperparams(),
            ensembles: (0..k)
                .map(|j| (0..gp.num_members()).map(|h| gp.hyperparams(j, h).clone()).collect())
                .collect(),
        });
        Ok(gp)
    }
}
