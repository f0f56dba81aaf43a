use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::stats::quantile;
use crate::{Error, Result};

/// One evaluation of one run, as stored in `<problem>.runs.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub problem: String,
    pub policy: String,
    pub replication: usize,
    pub n: usize,
    pub true_utility: Option<f64>,
    pub log_regret: Option<f64>,
}

/// Cross-replication statistics at one evaluation index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub problem: String,
    pub policy: String,
    pub n: usize,
    pub runs: usize,
    pub utility_mean: Option<f64>,
    pub utility_median: Option<f64>,
    pub utility_q25: Option<f64>,
    pub utility_q75: Option<f64>,
    pub log_regret_mean: Option<f64>,
    pub log_regret_median: Option<f64>,
    pub log_regret_q25: Option<f64>,
    pub log_regret_q75: Option<f64>,
}

/// Reads every `*.runs.csv` under `dir`; the problem name is the file stem.
pub fn read_runs_csv(dir: &Path) -> Result<Vec<RunRow>> {
    let mut paths: Vec<_> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.ends_with(".runs.csv")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Config(format!("no *.runs.csv files in {}", dir.display())));
    }
    let mut rows = Vec::new();
    for path in paths {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
        let problem = name.trim_end_matches(".runs.csv").to_string();
        let mut reader = csv::Reader::from_path(&path)?;
        let headers = reader.headers()?.clone();
        let col = |h: &str| {
            headers
                .iter()
                .position(|c| c == h)
                .ok_or_else(|| Error::Config(format!("{}: missing column '{h}'", path.display())))
        };
        let (rep, n, util, regret, policy) = (col("replication")?, col("n")?, col("true_utility")?, col("log_regret")?, col("policy")?);
        let opt = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| Error::Config(format!("bad number '{s}'")))
            }
        };
        for rec in reader.records() {
            let rec = rec?;
            let int = |i: usize| rec[i].parse::<usize>().map_err(|_| Error::Config(format!("bad integer '{}'", &rec[i])));
            rows.push(RunRow {
                problem: problem.clone(),
                policy: rec[policy].to_string(),
                replication: int(rep)?,
                n: int(n)?,
                true_utility: opt(&rec[util])?,
                log_regret: opt(&rec[regret])?,
            });
        }
    }
    Ok(rows)
}

fn stats(values: &[f64]) -> [Option<f64>; 4] {
    if values.is_empty() {
        return [None; 4];
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    [
        Some(mean),
        Some(quantile(values, 0.5)),
        Some(quantile(values, 0.25)),
        Some(quantile(values, 0.75)),
    ]
}

/// Per (problem, policy, n) statistics, sorted by those keys.
pub fn aggregate(rows: &[RunRow]) -> Vec<AggregateRow> {
    // (problem, policy, n) -> (runs, utilities, log regrets)
    type Group = (usize, Vec<f64>, Vec<f64>);
    let mut groups: BTreeMap<(&str, &str, usize), Group> = BTreeMap::new();
    for r in rows {
        let g = groups.entry((&r.problem, &r.policy, r.n)).or_default();
        g.0 += 1;
        g.1.extend(r.true_utility);
        g.2.extend(r.log_regret);
    }
    groups
        .into_iter()
        .map(|((problem, policy, n), (runs, u, l))| {
            let [utility_mean, utility_median, utility_q25, utility_q75] = stats(&u);
            let [log_regret_mean, log_regret_median, log_regret_q25, log_regret_q75] = stats(&l);
            AggregateRow {
                problem: problem.to_string(),
                policy: policy.to_string(),
                n,
                runs,
                utility_mean,
                utility_median,
                utility_q25,
                utility_q75,
                log_regret_mean,
                log_regret_median,
                log_regret_q25,
                log_regret_q75,
            }
        })
        .collect()
}

pub fn write_aggregate(path: &Path, rows: &[AggregateRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a table written by [`aggregate`] (`results.csv`).
pub fn read_aggregate(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<AggregateRow>, _>>()?)
}

/// Median and interquartile traces of one (problem, policy).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub problem: String,
    pub policy: String,
    pub n: Vec<usize>,
    pub utility_median: Vec<Option<f64>>,
    pub utility_q25: Vec<Option<f64>>,
    pub utility_q75: Vec<Option<f64>>,
    /// log₁₀ regret.
    pub log_regret_median: Vec<Option<f64>>,
    pub log_regret_q25: Vec<Option<f64>>,
    pub log_regret_q75: Vec<Option<f64>>,
}

/// Curves from an aggregate table (as written to `results.csv`).
pub fn plot_data(rows: &[AggregateRow]) -> Vec<Curve> {
    let mut curves: BTreeMap<(String, String), Curve> = BTreeMap::new();
    for r in rows {
        let c = curves.entry((r.problem.clone(), r.policy.clone())).or_insert_with(|| Curve {
            problem: r.problem.clone(),
            policy: r.policy.clone(),
            n: Vec::new(),
            utility_median: Vec::new(),
            utility_q25: Vec::new(),
            utility_q75: Vec::new(),
            log_regret_median: Vec::new(),
            log_regret_q25: Vec::new(),
            log_regret_q75: Vec::new(),
        });
        c.n.push(r.n);
        c.utility_median.push(r.utility_median);
        c.utility_q25.push(r.utility_q25);
        c.utility_q75.push(r.utility_q75);
        c.log_regret_median.push(r.log_regret_median);
        c.log_regret_q25.push(r.log_regret_q25);
        c.log_regret_q75.push(r.log_regret_q75);
    }
    curves.into_values().collect()
}

/// Paired one-sided sign test of `a > b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignTest {
    pub wins: usize,
    pub losses: usize,
    pub ties: usize,
    /// `P(Binomial(wins + losses, ½) ≥ wins)`; ties are dropped.
    pub p_value: f64,
}

pub fn sign_test_greater(a: &[f64], b: &[f64]) -> SignTest {
    let (mut wins, mut losses, mut ties) = (0, 0, 0);
    for (x, y) in a.iter().zip(b) {
        if x > y {
            wins += 1;
        } else if x < y {
            losses += 1;
        } else {
            ties += 1;
        }
    }
    let n = wins + losses;
    let ln_choose = |k: usize| libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0);
    let p_value = (wins..=n)
        .map(|k| (ln_choose(k) - n as f64 * std::f64::consts::LN_2).exp())
        .sum::<f64>()
        .min(1.0);
    SignTest {
        wins,
        losses,
        ties,
        p_value,
    }
}
