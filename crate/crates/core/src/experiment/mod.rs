//! The optimization loop: initial design, then per iteration one pairwise
//! query, a θ posterior refresh, a GP refit and one policy-chosen
//! evaluation.

mod config;
mod record;
mod state;

use std::time::Instant;

pub use config::{ExperimentConfig, Policy, Resolved, Seeds, Settings};
pub use record::{pareto_front, performance, performance_trace, write_runs_csv, EvaluationRecord, Performance, RunRecord, REGRET_FLOOR};
pub use state::{Experiment, ModelSnapshot, Proposal};

use crate::preference::{respond, Channel, Likelihood, Response};
use crate::problems::ProblemId;
use crate::stats::derive_seed;
use crate::utility::{prior_sample, UtilityFamily};
use crate::{Error, Result};

/// Source of attribute vectors `f(x)`.
pub trait Evaluator {
    fn evaluate(&mut self, x: &[f64]) -> Result<Vec<f64>>;
}

impl Evaluator for ProblemId {
    fn evaluate(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        ProblemId::evaluate(*self, x)
    }
}

impl<F> Evaluator for F
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    fn evaluate(&mut self, x: &[f64]) -> Result<Vec<f64>> {
        self(x)
    }
}

/// Source of pairwise responses.
pub trait DecisionMaker {
    /// Compares `first` and `second` for interaction `m` (1-based).
    fn respond(&mut self, first: &[f64], second: &[f64], m: usize) -> Result<Response>;

    fn channel(&self) -> Channel {
        Channel::Simulated
    }

    /// Ground truth, when the DM is simulated.
    fn theta_true(&self) -> Option<&[f64]> {
        None
    }
}

/// DM answering from a fixed θ under a likelihood model.
#[derive(Debug, Clone)]
pub struct SimulatedDm {
    pub theta: Vec<f64>,
    pub family: UtilityFamily,
    pub likelihood: Likelihood,
    pub seed: u64,
}

impl SimulatedDm {
    /// The DM implied by a config: its `theta_true`, or a prior draw under
    /// the DM seed.
    pub fn from_config(config: &ExperimentConfig) -> Result<Self> {
        let r = config.resolve()?;
        let theta = match &config.theta_true {
            Some(t) => t.clone(),
            None => prior_sample(&r.prior, derive_seed(config.seeds.dm, &[0])),
        };
        Ok(Self {
            theta,
            family: r.family,
            likelihood: config.likelihood,
            seed: config.seeds.dm,
        })
    }
}

impl DecisionMaker for SimulatedDm {
    fn respond(&mut self, first: &[f64], second: &[f64], m: usize) -> Result<Response> {
        respond(first, second, &self.theta, self.family, &self.likelihood, derive_seed(self.seed, &[1, m as u64]))
    }

    fn theta_true(&self) -> Option<&[f64]> {
        Some(&self.theta)
    }
}

fn evaluate_checked(f: &mut dyn Evaluator, x: &[f64], n: usize) -> Result<Vec<f64>> {
    f.evaluate(x).map_err(|e| match e {
        Error::Evaluation(msg) => Error::Evaluation(format!("evaluation {n}: {msg}")),
        other => Error::Evaluation(format!("evaluation {n}: {other}")),
    })
}

/// Runs the whole loop. Deterministic given the seeds and a deterministic
/// `f`.
pub fn run(config: &ExperimentConfig, dm: &mut dyn DecisionMaker, f: &mut dyn Evaluator) -> Result<RunRecord> {
    let mut exp = Experiment::new(config.clone())?;
    let theta_true = dm.theta_true().map(<[f64]>::to_vec);
    let optimum = match (config.optimum, config.problem, &theta_true) {
        (Some(u), _, _) => Some(u),
        (None, Some(p), Some(t)) if config.design_box.is_none() => Some(p.optimal_utility(t, exp.family())?),
        _ => None,
    };
    let mut evaluations = Vec::with_capacity(exp.init_count() + config.evaluations);
    for x in exp.initial_designs() {
        let start = Instant::now();
        let n = exp.evaluated() + 1;
        let y = evaluate_checked(f, &x, n)?;
        exp.record_evaluation(x.clone(), y.clone())?;
        evaluations.push(EvaluationRecord {
            n,
            x,
            y,
            acquisition_value: None,
            flat: false,
            wall_time: start.elapsed(),
            true_utility: None,
            log_regret: None,
        });
    }
    let mut summaries = vec![exp.posterior().summary()];
    while !exp.is_complete() {
        let start = Instant::now();
        let pair = exp.query_pair()?;
        let m = exp.records().len() + 1;
        let response = dm.respond(&exp.outputs()[pair.0], &exp.outputs()[pair.1], m)?;
        summaries.push(exp.record_preference(pair, response, dm.channel())?.summary());
        let proposal = exp.propose()?;
        let n = exp.evaluated() + 1;
        let y = evaluate_checked(f, &proposal.x, n)?;
        exp.record_evaluation(proposal.x.clone(), y.clone())?;
        evaluations.push(EvaluationRecord {
            n,
            x: proposal.x,
            y,
            acquisition_value: proposal.acquisition_value,
            flat: proposal.flat,
            wall_time: start.elapsed(),
            true_utility: None,
            log_regret: None,
        });
    }
    let mut record = RunRecord {
        problem: config.problem,
        policy: config.policy,
        family: exp.family(),
        seeds: config.seeds,
        init_count: exp.init_count(),
        theta_true,
        optimum,
        menu: pareto_front(exp.outputs()),
        evaluations,
        preferences: exp.records().to_vec(),
        posterior_summaries: summaries,
    };
    record.annotate()?;
    Ok(record)
}

/// Runs a built-in problem against the simulated DM implied by the config.
pub fn run_simulated(config: &ExperimentConfig) -> Result<RunRecord> {
    let problem = config
        .problem
        .ok_or_else(|| Error::Config("a simulated run needs a built-in problem".into()))?;
    let mut dm = SimulatedDm::from_config(config)?;
    let mut f = problem;
    run(config, &mut dm, &mut f)
}

#[cfg(test)]
mod tests;
