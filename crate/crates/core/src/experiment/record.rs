use std::io::Write;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::config::{Policy, Seeds};
use crate::preference::{PosteriorSummary, PreferenceRecord};
use crate::problems::ProblemId;
use crate::utility::{utility_value, UtilityFamily};
use crate::{Error, Result};

/// Regret values below this are reported at this floor, so the logarithm
/// stays finite when a run attains `U*` to rounding.
pub const REGRET_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    /// 1-based evaluation index.
    pub n: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acquisition_value: Option<f64>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub flat: bool,
    /// Time spent choosing and evaluating this design. Not serialized, so
    /// repeated runs serialize identically.
    #[serde(skip)]
    pub wall_time: Duration,
    /// `max_{i ≤ n} U(f(x_i); θ_true)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_utility: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_regret: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemId>,
    pub policy: Policy,
    pub family: UtilityFamily,
    pub seeds: Seeds,
    pub init_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_true: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimum: Option<f64>,
    pub evaluations: Vec<EvaluationRecord>,
    pub preferences: Vec<PreferenceRecord<f64>>,
    /// θ posterior after the initial design and after every response.
    pub posterior_summaries: Vec<PosteriorSummary>,
    /// Indices into `evaluations` of the non-dominated attribute vectors.
    pub menu: Vec<usize>,
}

/// True-utility trace of a run with a known θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Performance {
    /// `trace[n − 1] = max_{i ≤ n} U(f(x_i); θ_true)`.
    pub trace: Vec<f64>,
    /// `log₁₀(U* − trace)`, when `U*` is known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_regret: Option<Vec<f64>>,
}

/// Indices of the vectors not dominated by any other (maximization), in
/// input order. Equal vectors do not dominate each other.
pub fn pareto_front(ys: &[Vec<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ys.len()).collect();
    // A dominating vector is lexicographically larger, so scanning in
    // decreasing lexicographic order only needs the front found so far.
    order.sort_by(|&a, &b| {
        ys[b]
            .iter()
            .zip(&ys[a])
            .map(|(u, v)| u.total_cmp(v))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let dominates = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(u, v)| u >= v) && a.iter().zip(b).any(|(u, v)| u > v);
    let mut front: Vec<usize> = Vec::new();
    for i in order {
        if !front.iter().any(|&j| dominates(&ys[j], &ys[i])) {
            front.push(i);
        }
    }
    front.sort_unstable();
    front
}

/// Running maximum of the true utility, with log-regret against `optimum`.
pub fn performance_trace(ys: &[Vec<f64>], theta: &[f64], family: UtilityFamily, optimum: Option<f64>) -> Result<Performance> {
    let mut trace = Vec::with_capacity(ys.len());
    let mut best = f64::NEG_INFINITY;
    for y in ys {
        best = best.max(utility_value(y, theta, family)?);
        trace.push(best);
    }
    let log_regret = optimum.map(|u| trace.iter().map(|&t| (u - t).max(REGRET_FLOOR).log10()).collect());
    Ok(Performance { trace, log_regret })
}

/// Performance of a recorded run; unavailable without a ground-truth θ.
pub fn performance(record: &RunRecord) -> Result<Performance> {
    let theta = record
        .theta_true
        .as_deref()
        .ok_or_else(|| Error::Unavailable("run has no ground-truth θ (human DM)".into()))?;
    let ys: Vec<Vec<f64>> = record.evaluations.iter().map(|e| e.y.clone()).collect();
    performance_trace(&ys, theta, record.family, record.optimum)
}

impl RunRecord {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fills `true_utility` and `log_regret` of every evaluation.
    pub(crate) fn annotate(&mut self) -> Result<()> {
        if self.theta_true.is_none() {
            return Ok(());
        }
        let perf = performance(self)?;
        for (i, e) in self.evaluations.iter_mut().enumerate() {
            e.true_utility = Some(perf.trace[i]);
            e.log_regret = perf.log_regret.as_ref().map(|r| r[i]);
        }
        Ok(())
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes runs as flat CSV: one row per evaluation with columns
/// `replication, n, x1…xd, f1…fk, true_utility, log_regret, policy, seed`.
/// All runs must share `d` and `k`.
pub fn write_runs_csv<'a, W, I>(out: W, runs: I) -> Result<()>
where
    W: Write,
    I: IntoIterator<Item = (usize, u64, &'a RunRecord)>,
{
    let mut w = csv::Writer::from_writer(out);
    let mut shape: Option<(usize, usize)> = None;
    for (replication, seed, run) in runs {
        let Some(first) = run.evaluations.first() else { continue };
        let (d, k) = (first.x.len(), first.y.len());
        match shape {
            None => {
                let mut header = vec!["replication".to_string(), "n".to_string()];
                header.extend((1..=d).map(|i| format!("x{i}")));
                header.extend((1..=k).map(|j| format!("f{j}")));
                header.extend(["true_utility", "log_regret", "policy", "seed"].map(String::from));
                w.write_record(&header)?;
                shape = Some((d, k));
            }
            Some(s) if s != (d, k) => {
                return Err(Error::Contract("runs in one CSV must share dimensions".into()));
            }
            _ => {}
        }
        for e in &run.evaluations {
            let mut row = vec![replication.to_string(), e.n.to_string()];
            row.extend(e.x.iter().map(f64::to_string));
            row.extend(e.y.iter().map(f64::to_string));
            row.push(fmt_opt(e.true_utility));
            row.push(fmt_opt(e.log_regret));
            row.push(run.policy.name().to_string());
            row.push(seed.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
