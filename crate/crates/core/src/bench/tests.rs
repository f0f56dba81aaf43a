use super::*;

fn small(policies: Vec<Policy>, n: usize) -> SuiteConfig {
    let mut settings = Settings::default();
    settings.gp.ensemble_size = 2;
    settings.gp.restarts = 4;
    settings.sga.restarts = 2;
    settings.sga.steps = 10;
    settings.sga.rank_samples = 128;
    settings.thompson.probes = 32;
    SuiteConfig {
        problems: vec![ProblemId::Vlmop3],
        policies,
        replications: 2,
        evaluations: n,
        seed: 11,
        init_count: None,
        likelihood: Likelihood::Exact,
        settings,
    }
}

#[test]
fn row_accounting() {
    let mut cfg = small(vec![Policy::Random], 2);
    cfg.problems = vec![ProblemId::Dtlz1a, ProblemId::Vlmop3];
    cfg.replications = 1;
    let res = run_suite(&cfg, 1).unwrap();
    assert_eq!(res.failures(), 0);
    for o in &res.runs {
        let r = o.result.as_ref().unwrap();
        assert_eq!(r.evaluations.len(), 2 * (o.problem.dim() + 1) + 2);
    }
    let dir = tempfile::tempdir().unwrap();
    res.write(dir.path()).unwrap();
    let text = std::fs::read_to_string(dir.path().join("dtlz1a.runs.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 14 + 2);
    let rows = read_runs_csv(dir.path()).unwrap();
    assert_eq!(rows.len(), 16 + 8);
    // the CSV round trip keeps full precision
    assert_eq!(rows, res.rows());
}

#[test]
fn same_seed_gives_identical_files() {
    let cfg = small(vec![Policy::EiUu, Policy::Random], 1);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_suite(&cfg, 1).unwrap().write(a.path()).unwrap();
    run_suite(&cfg, 2).unwrap().write(b.path()).unwrap();
    for f in ["vlmop3.runs.csv", "vlmop3.runs.jsonl", "results.csv", "failures.json"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
}

#[test]
fn replications_share_truth_across_policies() {
    let cfg = small(vec![Policy::EiUuNpl, Policy::Random], 1);
    let res = run_suite(&cfg, 1).unwrap();
    let by_rep = |rep: usize| -> Vec<&RunRecord> {
        res.runs
            .iter()
            .filter(|o| o.replication == rep)
            .map(|o| o.result.as_ref().unwrap())
            .collect()
    };
    let (r0, r1) = (by_rep(0), by_rep(1));
    assert_eq!(r0[0].theta_true, r0[1].theta_true);
    assert_eq!(r0[0].evaluations[0].x, r0[1].evaluations[0].x);
    assert_ne!(r0[0].theta_true, r1[0].theta_true);
    let t = r0[0].theta_true.as_ref().unwrap()[0];
    assert!((0.1..=0.5).contains(&t));
}

#[test]
fn failed_runs_are_recorded() {
    let cfg = small(vec![Policy::Random], 1);
    let res = run_suite_with(&cfg, 1, |p, rep| {
        if rep == 1 {
            Box::new(|_: &[f64]| -> crate::Result<Vec<f64>> { Err(Error::Evaluation("offline".into())) })
        } else {
            Box::new(p)
        }
    })
    .unwrap();
    assert_eq!(res.failures(), 1);
    assert!(res.runs[1].result.as_ref().unwrap_err().contains("offline"));
    let dir = tempfile::tempdir().unwrap();
    res.write(dir.path()).unwrap();
    let failures: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("failures.json")).unwrap()).unwrap();
    assert_eq!(failures.as_array().unwrap().len(), 1);
}

#[test]
fn aggregate_statistics() {
    let row = |policy: &str, rep: usize, n: usize, u: f64| RunRow {
        problem: "p".into(),
        policy: policy.into(),
        replication: rep,
        n,
        true_utility: Some(u),
        log_regret: Some(-u),
    };
    let rows = vec![
        row("A", 0, 1, 1.0),
        row("A", 1, 1, 2.0),
        row("A", 2, 1, 4.0),
        row("A", 0, 2, 5.0),
        row("B", 0, 1, -1.0),
    ];
    let agg = aggregate(&rows);
    assert_eq!(agg.len(), 3);
    let a1 = &agg[0];
    assert_eq!((a1.policy.as_str(), a1.n, a1.runs), ("A", 1, 3));
    assert_eq!(a1.utility_median, Some(2.0));
    assert!((a1.utility_mean.unwrap() - 7.0 / 3.0).abs() < 1e-15);
    assert_eq!(a1.utility_q25, Some(1.5));
    assert_eq!(a1.utility_q75, Some(3.0));
    assert_eq!(a1.log_regret_median, Some(-2.0));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.csv");
    write_aggregate(&path, &agg).unwrap();
    assert_eq!(read_aggregate(&path).unwrap(), agg);

    let curves = plot_data(&agg);
    assert_eq!(curves.len(), 2);
    assert_eq!(curves[0].n, vec![1, 2]);
    assert_eq!(curves[0].utility_median, vec![Some(2.0), Some(5.0)]);
    assert_eq!(curves[1].policy, "B");
}

#[test]
fn sign_test_values() {
    // 10 wins of 10: p = 2^-10
    let t = sign_test_greater(&[1.0; 10], &[0.0; 10]);
    assert_eq!((t.wins, t.losses, t.ties), (10, 0, 0));
    assert!((t.p_value - 1.0 / 1024.0).abs() < 1e-15);
    // 7 of 10: p = (120 + 45 + 10 + 1) / 1024
    let a = [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 5.0];
    let b = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 5.0];
    let t = sign_test_greater(&a, &b);
    assert_eq!(t.ties, 1);
    assert!((t.p_value - 176.0 / 1024.0).abs() < 1e-12);
    assert_eq!(sign_test_greater(&[], &[]).p_value, 1.0);
}

#[test]
fn suite_config_validation() {
    let mut cfg = small(vec![Policy::Random], 1);
    cfg.replications = 0;
    assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    let json = r#"{"problems": ["dtlz1a", "vlmop3"], "policies": ["EI-UU", "Random"], "replications": 3, "evaluations": 5}"#;
    let cfg = SuiteConfig::from_json(json).unwrap();
    assert_eq!(cfg.problems.len(), 2);
    assert!(SuiteConfig::from_json(r#"{"problems": ["nope"], "policies": ["Random"], "replications": 1, "evaluations": 1}"#).is_err());
    assert!(SuiteConfig::from_json(r#"{"problems": ["dtlz1a"], "policies": ["Random"], "replications": 1, "evaluations": 1, "init_count": 1}"#).is_err());
}
