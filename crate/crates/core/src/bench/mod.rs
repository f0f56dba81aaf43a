//! Benchmark suites: every (problem, policy, replication) combination run
//! against a simulated DM, with per-iteration summaries across
//! replications.

mod aggregate;

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use aggregate::{
    aggregate, plot_data, read_aggregate, read_runs_csv, sign_test_greater, write_aggregate, AggregateRow, Curve, RunRow, SignTest,
};

use crate::experiment::{run, Evaluator, ExperimentConfig, Policy, RunRecord, Seeds, Settings, SimulatedDm};
use crate::preference::Likelihood;
use crate::problems::ProblemId;
use crate::stats::derive_seed;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub problems: Vec<ProblemId>,
    pub policies: Vec<Policy>,
    pub replications: usize,
    /// Evaluations after the initial design (`N`).
    pub evaluations: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init_count: Option<usize>,
    #[serde(default)]
    pub likelihood: Likelihood,
    #[serde(default)]
    pub settings: Settings,
}

impl SuiteConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.problems.is_empty() || self.policies.is_empty() || self.replications == 0 {
            return Err(Error::Config("a suite needs at least one problem, one policy and one replication".into()));
        }
        for &p in &self.problems {
            self.experiment(p, Policy::Random, 0).resolve()?;
        }
        Ok(())
    }

    /// Seeds of a replication; shared by every policy so they see the same
    /// initial design and the same DM.
    pub fn replication_seeds(&self, replication: usize) -> Seeds {
        Seeds::from_base(derive_seed(self.seed, &[replication as u64]))
    }

    /// Config of one run. `θ_true` is the replication's prior draw.
    pub fn experiment(&self, problem: ProblemId, policy: Policy, replication: usize) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::for_problem(problem, policy, self.evaluations, self.replication_seeds(replication));
        cfg.init_count = self.init_count;
        cfg.likelihood = self.likelihood;
        cfg.settings = self.settings.clone();
        if let Ok(dm) = SimulatedDm::from_config(&cfg) {
            cfg.theta_true = Some(dm.theta);
        }
        cfg
    }
}

/// Result of one run; failures keep their message and the suite goes on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub problem: ProblemId,
    pub policy: Policy,
    pub replication: usize,
    pub seed: u64,
    pub result: std::result::Result<RunRecord, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub config: SuiteConfig,
    pub runs: Vec<RunOutcome>,
}

impl SuiteResult {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.result.is_err()).count()
    }

    /// Successful runs as flat rows.
    pub fn rows(&self) -> Vec<RunRow> {
        self.runs
            .iter()
            .filter_map(|o| o.result.as_ref().ok().map(|r| (o, r)))
            .flat_map(|(o, r)| {
                r.evaluations.iter().map(move |e| RunRow {
                    problem: o.problem.name().to_string(),
                    policy: o.policy.name().to_string(),
                    replication: o.replication,
                    n: e.n,
                    true_utility: e.true_utility,
                    log_regret: e.log_regret,
                })
            })
            .collect()
    }

    /// Writes `<problem>.runs.csv`, `<problem>.runs.jsonl`, `results.csv`
    /// and `failures.json` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        for &problem in &self.config.problems {
            let ok: Vec<_> = self
                .runs
                .iter()
                .filter(|o| o.problem == problem)
                .filter_map(|o| o.result.as_ref().ok().map(|r| (o.replication, o.seed, r)))
                .collect();
            let mut csv = Vec::new();
            crate::experiment::write_runs_csv(&mut csv, ok.iter().map(|&(rep, seed, r)| (rep, seed, r)))?;
            fs::write(dir.join(format!("{problem}.runs.csv")), csv)?;
            let mut lines = String::new();
            for (_, _, r) in &ok {
                lines.push_str(&serde_json::to_string(r)?);
                lines.push('\n');
            }
            fs::write(dir.join(format!("{problem}.runs.jsonl")), lines)?;
        }
        write_aggregate(&dir.join("results.csv"), &aggregate(&self.rows()))?;
        let failures: Vec<_> = self
            .runs
            .iter()
            .filter_map(|o| {
                o.result.as_ref().err().map(|e| {
                    serde_json::json!({
                        "problem": o.problem,
                        "policy": o.policy,
                        "replication": o.replication,
                        "error": e,
                    })
                })
            })
            .collect();
        fs::write(dir.join("failures.json"), serde_json::to_string_pretty(&failures)?)?;
        Ok(())
    }
}

/// Runs the suite on built-in problems with `workers` threads (`0` picks
/// the available parallelism). Output order and content do not depend on
/// `workers`.
pub fn run_suite(config: &SuiteConfig, workers: usize) -> Result<SuiteResult> {
    run_suite_with(config, workers, |p, _| Box::new(p))
}

/// [`run_suite`] with a caller-supplied evaluator per (problem, replication).
pub fn run_suite_with<F>(config: &SuiteConfig, workers: usize, evaluator: F) -> Result<SuiteResult>
where
    F: Fn(ProblemId, usize) -> Box<dyn Evaluator + Send> + Sync,
{
    config.validate()?;
    let mut jobs = Vec::new();
    for &problem in &config.problems {
        for replication in 0..config.replications {
            for &policy in &config.policies {
                jobs.push((problem, policy, replication));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let runs = pool.install(|| {
        jobs.par_iter()
            .map(|&(problem, policy, replication)| {
                let cfg = config.experiment(problem, policy, replication);
                let result = SimulatedDm::from_config(&cfg)
                    .and_then(|mut dm| run(&cfg, &mut dm, evaluator(problem, replication).as_mut()))
                    .map_err(|e| e.to_string());
                RunOutcome {
                    problem,
                    policy,
                    replication,
                    seed: derive_seed(config.seed, &[replication as u64]),
                    result,
                }
            })
            .collect()
    });
    Ok(SuiteResult {
        config: config.clone(),
        runs,
    })
}

#[cfg(test)]
mod tests;
