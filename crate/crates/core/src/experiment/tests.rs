use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::domain::DesignBox;
use crate::stats::rng_from_seed;
use crate::utility::ThetaPrior;

fn quick(mut cfg: ExperimentConfig) -> ExperimentConfig {
    cfg.settings.gp.ensemble_size = 2;
    cfg.settings.gp.restarts = 4;
    cfg.settings.sga.restarts = 3;
    cfg.settings.sga.steps = 20;
    cfg.settings.sga.rank_samples = 256;
    cfg.settings.thompson.probes = 64;
    cfg
}

fn one_dim(policy: Policy, n: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        problem: None,
        design_box: Some(DesignBox::unit(1)),
        attributes: Some(1),
        family: Some(UtilityFamily::Linear),
        prior: Some(ThetaPrior::FiniteUniform { points: vec![vec![1.0]] }),
        policy,
        evaluations: n,
        init_count: None,
        likelihood: Likelihood::Exact,
        seeds: Seeds::from_base(seed),
        theta_true: Some(vec![1.0]),
        optimum: Some(0.0),
        settings: Settings::default(),
    }
}

fn parabola(x: &[f64]) -> Result<Vec<f64>> {
    Ok(vec![-(x[0] - 0.3).powi(2)])
}

fn brute_front(ys: &[Vec<f64>]) -> Vec<usize> {
    (0..ys.len())
        .filter(|&i| {
            !(0..ys.len()).any(|j| {
                let ge = ys[j].iter().zip(&ys[i]).all(|(a, b)| a >= b);
                let gt = ys[j].iter().zip(&ys[i]).any(|(a, b)| a > b);
                ge && gt
            })
        })
        .collect()
}

#[test]
fn pareto_examples() {
    assert_eq!(pareto_front(&[vec![1.0, 1.0], vec![0.0, 0.0]]), vec![0]);
    assert_eq!(pareto_front(&[vec![1.0, 0.0], vec![0.0, 1.0]]), vec![0, 1]);
    assert!(pareto_front(&[]).is_empty());
    // duplicates do not dominate each other
    assert_eq!(pareto_front(&[vec![1.0, 1.0], vec![1.0, 1.0], vec![0.5, 2.0]]), vec![0, 1, 2]);
}

#[test]
fn pareto_matches_pairwise_oracle() {
    let mut rng = rng_from_seed(3);
    let ys: Vec<Vec<f64>> = (0..200).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
    assert_eq!(pareto_front(&ys), brute_front(&ys));
}

proptest! {
    #[test]
    fn pareto_agrees_on_coarse_grids(raw in prop::collection::vec(prop::collection::vec(0u8..4, 2), 0..40)) {
        let ys: Vec<Vec<f64>> = raw.iter().map(|v| v.iter().map(|&a| f64::from(a)).collect()).collect();
        prop_assert_eq!(pareto_front(&ys), brute_front(&ys));
    }

    #[test]
    fn performance_is_a_running_maximum(raw in prop::collection::vec(-5.0f64..5.0, 1..30)) {
        let ys: Vec<Vec<f64>> = raw.iter().map(|&v| vec![v]).collect();
        let p = performance_trace(&ys, &[1.0], UtilityFamily::Linear, Some(6.0)).unwrap();
        prop_assert_eq!(p.trace[0], raw[0]);
        for w in p.trace.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        let best = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(*p.trace.last().unwrap(), best);
        for (r, t) in p.log_regret.unwrap().iter().zip(&p.trace) {
            prop_assert!((r - (6.0 - t).log10()).abs() < 1e-12);
        }
    }
}

#[test]
fn empty_loop_keeps_initial_design_only() {
    let cfg = ExperimentConfig::for_problem(ProblemId::Dtlz1a, Policy::EiUu, 0, Seeds::from_base(1));
    let rec = run_simulated(&cfg).unwrap();
    assert_eq!(rec.evaluations.len(), 14);
    assert!(rec.preferences.is_empty());
    assert_eq!(rec.posterior_summaries.len(), 1);
}

#[test]
fn random_runs_are_reproducible() {
    let cfg = ExperimentConfig::for_problem(ProblemId::Vlmop3, Policy::Random, 6, Seeds::from_base(9));
    let a = run_simulated(&cfg).unwrap();
    let b = run_simulated(&cfg).unwrap();
    assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    let mut ca = Vec::new();
    let mut cb = Vec::new();
    write_runs_csv(&mut ca, [(0, 9, &a)]).unwrap();
    write_runs_csv(&mut cb, [(0, 9, &b)]).unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn model_based_runs_are_reproducible() {
    for policy in [Policy::EiUu, Policy::TsUu] {
        let cfg = quick(ExperimentConfig::for_problem(ProblemId::Vlmop3, policy, 2, Seeds::from_base(4)));
        let a = run_simulated(&cfg).unwrap();
        assert_eq!(a.to_json().unwrap(), run_simulated(&cfg).unwrap().to_json().unwrap());
    }
}

#[test]
fn run_invariants() {
    for policy in Policy::ALL {
        let cfg = quick(ExperimentConfig::for_problem(ProblemId::Dtlz1a, policy, 3, Seeds::from_base(5)));
        let rec = run_simulated(&cfg).unwrap();
        let bx = ProblemId::Dtlz1a.design_box::<f64>();
        assert_eq!(rec.evaluations.len(), 14 + 3);
        // one preference per post-initialization evaluation
        assert_eq!(rec.preferences.len(), 3);
        for (i, p) in rec.preferences.iter().enumerate() {
            assert_eq!(p.m, i + 1);
            let (a, b) = p.designs.unwrap();
            assert!(a < b && b < 14 + i);
        }
        assert!(rec.evaluations.iter().all(|e| bx.contains(&e.x)));
        let ys: Vec<Vec<f64>> = rec.evaluations.iter().map(|e| e.y.clone()).collect();
        assert_eq!(rec.menu, pareto_front(&ys));
        let trace: Vec<f64> = rec.evaluations.iter().map(|e| e.true_utility.unwrap()).collect();
        assert!(trace.windows(2).all(|w| w[1] >= w[0]));
        let theta = rec.theta_true.as_ref().unwrap();
        let u_star = -0.5 * theta[0].min(1.0 - theta[0]);
        assert_eq!(rec.optimum, Some(u_star));
        assert!(trace.iter().all(|&t| t <= u_star + 1e-12));
        if !policy.learns_preferences() {
            assert!(rec.posterior_summaries.windows(2).all(|w| w[0] == w[1]));
        }
    }
}

#[test]
fn npl_posterior_stays_at_prior_draws() {
    let cfg = quick(ExperimentConfig::for_problem(ProblemId::Dtlz1a, Policy::EiUuNpl, 2, Seeds::from_base(6)));
    let mut exp = Experiment::new(cfg.clone()).unwrap();
    let before = exp.posterior().samples.clone();
    for x in exp.initial_designs() {
        let y = ProblemId::Dtlz1a.evaluate(&x).unwrap();
        exp.record_evaluation(x, y).unwrap();
    }
    let pair = exp.query_pair().unwrap();
    let after = exp.record_preference(pair, Response::PreferFirst, Channel::Simulated).unwrap();
    assert_eq!(after.samples, before);
    assert_eq!(after.source, crate::preference::PosteriorSource::Prior);
}

#[test]
fn known_utility_smoke_test() {
    let mut hits = 0;
    for rep in 0..20 {
        let cfg = one_dim(Policy::EiUu, 15, 100 + rep);
        let mut dm = SimulatedDm::from_config(&cfg).unwrap();
        let mut f = parabola;
        let rec = run(&cfg, &mut dm, &mut f).unwrap();
        let best = rec
            .evaluations
            .iter()
            .max_by(|a, b| a.y[0].total_cmp(&b.y[0]))
            .unwrap();
        if (best.x[0] - 0.3).abs() <= 0.05 {
            hits += 1;
        }
    }
    assert!(hits >= 18, "{hits}/20");
}

#[test]
fn performance_needs_ground_truth() {
    let cfg = ExperimentConfig::for_problem(ProblemId::Dtlz1a, Policy::Random, 1, Seeds::from_base(2));
    let mut rec = run_simulated(&cfg).unwrap();
    let p = performance(&rec).unwrap();
    assert_eq!(p.trace.len(), 15);
    rec.theta_true = None;
    assert!(matches!(performance(&rec), Err(Error::Unavailable(_))));
}

#[test]
fn singleton_performance_is_its_utility() {
    let p = performance_trace(&[vec![-0.2, -0.3]], &[0.25], UtilityFamily::Linear, None).unwrap();
    assert!((p.trace[0] - (0.25 * -0.2 + 0.75 * -0.3)).abs() < 1e-15);
    assert!(p.log_regret.is_none());
}

#[test]
fn csv_layout() {
    let cfg = ExperimentConfig::for_problem(ProblemId::Vlmop3, Policy::Random, 2, Seeds::from_base(3));
    let rec = run_simulated(&cfg).unwrap();
    let mut out = Vec::new();
    write_runs_csv(&mut out, [(4, 77, &rec)]).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "replication,n,x1,x2,f1,f2,f3,true_utility,log_regret,policy,seed");
    assert_eq!(lines.len(), 1 + 6 + 2);
    assert!(lines[1].starts_with("4,1,"));
    assert!(lines[8].ends_with(",Random,77"));
}

#[test]
fn evaluation_failure_aborts() {
    let cfg = one_dim(Policy::Random, 3, 1);
    let mut dm = SimulatedDm::from_config(&cfg).unwrap();
    let mut calls = 0;
    let mut f = |x: &[f64]| {
        calls += 1;
        if calls > 5 {
            Err(Error::Evaluation("simulator crashed".into()))
        } else {
            parabola(x)
        }
    };
    let err = run(&cfg, &mut dm, &mut f).unwrap_err();
    assert!(matches!(err, Error::Evaluation(ref m) if m.contains("evaluation 6")), "{err}");
}

#[test]
fn config_validation() {
    let good = ExperimentConfig::for_problem(ProblemId::Dtlz1a, Policy::EiUu, 5, Seeds::default());
    assert_eq!(good.resolve().unwrap().init_count, 14);

    let mut c = good.clone();
    c.init_count = Some(1);
    assert!(matches!(c.resolve(), Err(Error::InvalidField { ref field, .. }) if field == "init_count"));

    let mut c = one_dim(Policy::EiUu, 3, 0);
    c.design_box = Some(DesignBox { lower: vec![1.0], upper: vec![0.5] });
    assert!(matches!(c.resolve(), Err(Error::InvalidField { ref field, .. }) if field == "design_box"));

    let mut c = one_dim(Policy::EiUu, 3, 0);
    c.family = None;
    assert!(c.resolve().is_err());

    let mut c = good.clone();
    c.theta_true = Some(vec![0.1, 0.2, 0.3]);
    assert!(matches!(c.resolve(), Err(Error::InvalidField { ref field, .. }) if field == "theta_true"));

    let mut c = good.clone();
    c.family = Some(UtilityFamily::Quadratic);
    assert!(c.resolve().is_err());

    let json = r#"{"problem": "vlmop3", "policy": "TS-UU-npl", "evaluations": 4}"#;
    let c = ExperimentConfig::from_json(json).unwrap();
    assert_eq!(c.policy, Policy::TsUuNpl);
    assert_eq!(c.settings, Settings::default());
    assert!(ExperimentConfig::from_json(r#"{"problem": "vlmop3", "policy": "EI-UU", "evaluations": 4, "bogus": 1}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"problem": "vlmop3", "policy": "greedy", "evaluations": 4}"#).is_err());
}

#[test]
fn policies_round_trip() {
    for p in Policy::ALL {
        assert_eq!(p.name().parse::<Policy>().unwrap(), p);
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, format!("\"{}\"", p.name()));
    }
}

#[test]
fn stepping_out_of_order_is_rejected() {
    let cfg = quick(one_dim(Policy::EiUu, 2, 8));
    let mut exp = Experiment::new(cfg).unwrap();
    assert!(exp.query_pair().is_err());
    assert!(exp.propose().is_err());
    for x in exp.initial_designs() {
        let y = parabola(&x).unwrap();
        exp.record_evaluation(x, y).unwrap();
    }
    assert!(exp.record_evaluation(vec![0.5], vec![0.0]).is_err());
    assert!(exp.propose().is_err());
    let pair = exp.query_pair().unwrap();
    assert_eq!(pair, exp.query_pair().unwrap());
    exp.record_preference(pair, Response::Indifferent, Channel::Human).unwrap();
    assert!(exp.record_preference(pair, Response::PreferFirst, Channel::Human).is_err());
    assert!(exp.record_evaluation(vec![2.0], vec![0.0]).is_err());
}

#[test]
fn restored_experiment_continues_identically() {
    let cfg = quick(ExperimentConfig::for_problem(ProblemId::Vlmop3, Policy::EiUu, 3, Seeds::from_base(12)));
    let mut live = Experiment::new(cfg.clone()).unwrap();
    for x in live.initial_designs() {
        let y = ProblemId::Vlmop3.evaluate(&x).unwrap();
        live.record_evaluation(x, y).unwrap();
    }
    let mut dm = SimulatedDm::from_config(&cfg).unwrap();
    let mut last_model = None;
    for _ in 0..2 {
        let pair = live.query_pair().unwrap();
        let m = live.records().len() + 1;
        let a = dm.respond(&live.outputs()[pair.0], &live.outputs()[pair.1], m).unwrap();
        live.record_preference(pair, a, Channel::Simulated).unwrap();
        let p = live.propose().unwrap();
        last_model = p.model.clone();
        let y = ProblemId::Vlmop3.evaluate(&p.x).unwrap();
        live.record_evaluation(p.x, y).unwrap();
    }
    let history: Vec<(Vec<f64>, Vec<f64>)> = live.inputs().iter().cloned().zip(live.outputs().iter().cloned()).collect();
    let mut restored = Experiment::restore(cfg, history, live.records().to_vec(), last_model).unwrap();
    assert_eq!(restored.posterior(), live.posterior());
    let pair = live.query_pair().unwrap();
    assert_eq!(pair, restored.query_pair().unwrap());
    live.record_preference(pair, Response::PreferSecond, Channel::Simulated).unwrap();
    restored.record_preference(pair, Response::PreferSecond, Channel::Simulated).unwrap();
    assert_eq!(live.propose().unwrap(), restored.propose().unwrap());
}

#[test]
fn refit_period_reuses_hyperparameters() {
    let mut cfg = quick(ExperimentConfig::for_problem(ProblemId::Vlmop3, Policy::TsUu, 3, Seeds::from_base(13)));
    cfg.settings.refit_period = 3;
    let rec = run_simulated(&cfg).unwrap();
    assert_eq!(rec.evaluations.len(), 9);
    let mut exp = Experiment::new(cfg).unwrap();
    for x in exp.initial_designs() {
        let y = ProblemId::Vlmop3.evaluate(&x).unwrap();
        exp.record_evaluation(x, y).unwrap();
    }
    let mut fitted = Vec::new();
    for _ in 0..3 {
        let pair = exp.query_pair().unwrap();
        exp.record_preference(pair, Response::PreferFirst, Channel::Simulated).unwrap();
        let p = exp.propose().unwrap();
        fitted.push(p.model.unwrap().fitted_at);
        let y = ProblemId::Vlmop3.evaluate(&p.x).unwrap();
        exp.record_evaluation(p.x, y).unwrap();
    }
    assert_eq!(fitted, vec![6, 6, 6]);
}
