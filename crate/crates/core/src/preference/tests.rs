use rand::Rng;

use super::*;
use crate::stats::rng_from_seed;

fn record(m: usize, first: Vec<f64>, second: Vec<f64>, response: Response) -> PreferenceRecord<f64> {
    PreferenceRecord {
        m,
        first,
        second,
        response,
        channel: Channel::Simulated,
        designs: None,
    }
}

fn unit_prior() -> ThetaPrior<f64> {
    ThetaPrior::UniformBox { lower: vec![0.0], upper: vec![1.0] }
}

#[test]
fn exact_ties_and_signs() {
    let lin = UtilityFamily::Linear;
    let y = [0.3, 0.8];
    assert_eq!(respond(&y, &y, &[0.4], lin, &Likelihood::Exact, 0).unwrap(), Response::Indifferent);
    assert_eq!(
        respond(&[1.0, 0.0], &[0.0, 1.0], &[0.7], lin, &Likelihood::Exact, 0).unwrap(),
        Response::PreferFirst
    );
    assert_eq!(
        respond(&[1.0, 0.0], &[0.0, 1.0], &[0.2], lin, &Likelihood::Exact, 0).unwrap(),
        Response::PreferSecond
    );
}

#[test]
fn infeasible_pairs_tie() {
    let f = UtilityFamily::ThresholdConstrained;
    let r = respond(&[1.0, 0.0], &[2.0, -1.0], &[0.5], f, &Likelihood::Exact, 0).unwrap();
    assert_eq!(r, Response::Indifferent);
    let r = respond(&[1.0, 0.6], &[2.0, -1.0], &[0.5], f, &Likelihood::Exact, 0).unwrap();
    assert_eq!(r, Response::PreferFirst);
}

#[test]
fn sharp_probit_reproduces_exact() {
    let mut rng = rng_from_seed(5);
    let sharp = Likelihood::Probit { scale: 1e-300 };
    let mut checked = 0;
    while checked < 1000 {
        let y: Vec<f64> = (0..2).map(|_| rng.random()).collect();
        let z: Vec<f64> = (0..2).map(|_| rng.random()).collect();
        let t = [rng.random::<f64>()];
        let exact = respond(&y, &z, &t, UtilityFamily::Linear, &Likelihood::Exact, 0).unwrap();
        if exact == Response::Indifferent {
            continue;
        }
        let noisy = respond(&y, &z, &t, UtilityFamily::Linear, &sharp, checked as u64).unwrap();
        assert_eq!(noisy, exact);
        checked += 1;
    }
}

#[test]
fn probit_frequency_matches_model() {
    let lik = Likelihood::Probit { scale: 0.5 };
    let hits = (0..4000)
        .filter(|&s| respond(&[0.6, 0.0], &[0.0, 0.0], &[1.0, 0.0], UtilityFamily::Linear, &lik, s).unwrap() == Response::PreferFirst)
        .count();
    let p = crate::stats::normal_cdf(0.6 / 0.5);
    let f = hits as f64 / 4000.0;
    assert!((f - p).abs() < 4.0 * (p * (1.0 - p) / 4000.0).sqrt());
}

fn kolmogorov_p(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for k in 1..100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
    }
    p.clamp(0.0, 1.0)
}

#[test]
fn no_records_gives_prior() {
    let prior = ThetaPrior::UniformBox { lower: vec![0.0, 0.1], upper: vec![1.0, 0.5] };
    let post = posterior_sample(&prior, &[], UtilityFamily::Linear, &Likelihood::Exact, 10_000, 3).unwrap();
    assert_eq!(post.source, PosteriorSource::Prior);
    assert_eq!(post.len(), 10_000);
    for (c, (lo, hi)) in [(0.0, 1.0), (0.1, 0.5)].into_iter().enumerate() {
        let mut v: Vec<f64> = post.samples.iter().map(|s| (s[c] - lo) / (hi - lo)).collect();
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        let d = v
            .iter()
            .enumerate()
            .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
            .fold(0.0, f64::max);
        assert!(kolmogorov_p(d, v.len()) > 0.01, "coordinate {c}: D = {d}");
    }
}

#[test]
fn single_record_truncates_linear_prior() {
    let recs = vec![record(1, vec![1.0, 0.0], vec![0.0, 1.0], Response::PreferFirst)];
    let post = posterior_sample(&unit_prior(), &recs, UtilityFamily::Linear, &Likelihood::Exact, 10_000, 11).unwrap();
    assert_eq!(post.source, PosteriorSource::Conditioned);
    assert!(post.samples.iter().all(|t| t[0] > 0.5));
    let mean = post.samples.iter().map(|t| t[0]).sum::<f64>() / 10_000.0;
    assert!((0.73..=0.77).contains(&mean), "mean {mean}");
    assert!(!post.diagnostics.fallback);
    assert!((post.diagnostics.acceptance_rate - 0.5).abs() < 0.02);
    assert!(post.summary().coordinates[0].q05 >= 0.5);
}

#[test]
fn finite_prior_filtering_is_exact() {
    let prior = ThetaPrior::FiniteUniform { points: vec![vec![0.2], vec![0.6], vec![0.7], vec![0.9]] };
    let recs = vec![record(1, vec![1.0, 0.0], vec![0.0, 1.0], Response::PreferFirst)];
    let post = posterior_sample(&prior, &recs, UtilityFamily::Linear, &Likelihood::Exact, 64, 0).unwrap();
    assert_eq!(post.samples, vec![vec![0.6], vec![0.7], vec![0.9]]);
    assert_eq!(post.diagnostics.acceptance_rate, 0.75);
}

#[test]
fn contradictions_trigger_fallback() {
    let recs = vec![
        record(1, vec![1.0, 0.0], vec![0.0, 1.0], Response::PreferFirst),
        record(2, vec![1.0, 0.0], vec![0.0, 1.0], Response::PreferSecond),
    ];
    let post = posterior_sample(&unit_prior(), &recs, UtilityFamily::Linear, &Likelihood::Exact, 64, 1).unwrap();
    assert!(post.diagnostics.fallback);
    assert!(matches!(post.diagnostics.likelihood, Likelihood::Logit { scale } if scale > 0.0));
    assert_eq!(post.len(), 64);

    let prior = ThetaPrior::FiniteUniform { points: vec![vec![0.2], vec![0.3]] };
    let post = posterior_sample(&prior, &recs[..1], UtilityFamily::Linear, &Likelihood::Exact, 16, 1).unwrap();
    assert!(post.diagnostics.fallback);
    assert_eq!(post.len(), 16);
}

#[test]
fn human_indifference_is_uninformative() {
    let mut r = record(1, vec![1.0, 0.0], vec![0.0, 1.0], Response::Indifferent);
    r.channel = Channel::Human;
    let post = posterior_sample(&unit_prior(), &[r.clone()], UtilityFamily::Linear, &Likelihood::Exact, 32, 4).unwrap();
    let prior_only = posterior_sample(&unit_prior(), &[], UtilityFamily::Linear, &Likelihood::Exact, 32, 4).unwrap();
    assert_eq!(post.samples, prior_only.samples);

    // a simulated tie pins θ to the indifference set; here θ = 0.5 has zero
    // prior mass, so the exact sampler falls back
    r.channel = Channel::Simulated;
    let post = posterior_sample(&unit_prior(), &[r], UtilityFamily::Linear, &Likelihood::Exact, 32, 4).unwrap();
    assert!(post.diagnostics.fallback);
}

#[test]
fn smooth_likelihoods_shift_mass() {
    let recs: Vec<_> = (1..=5).map(|m| record(m, vec![1.0, 0.0], vec![0.0, 1.0], Response::PreferFirst)).collect();
    for lik in [Likelihood::Probit { scale: 0.1 }, Likelihood::Logit { scale: 0.1 }] {
        let post = posterior_sample(&unit_prior(), &recs, UtilityFamily::Linear, &lik, 2000, 9).unwrap();
        let mean = post.samples.iter().map(|t| t[0]).sum::<f64>() / 2000.0;
        assert!(mean > 0.65, "{lik:?}: {mean}");
        assert!(post.diagnostics.effective_sample_size.unwrap() > 100.0);
    }
}

#[test]
fn posterior_is_deterministic() {
    let recs = vec![record(1, vec![0.3, 0.9], vec![0.8, 0.1], Response::PreferSecond)];
    let a = posterior_sample(&unit_prior(), &recs, UtilityFamily::Linear, &Likelihood::Exact, 64, 42).unwrap();
    let b = posterior_sample(&unit_prior(), &recs, UtilityFamily::Linear, &Likelihood::Exact, 64, 42).unwrap();
    assert_eq!(a, b);
}

#[test]
fn support_only_shrinks() {
    let mut rng = rng_from_seed(8);
    let truth = [0.37];
    let mut recs = Vec::new();
    for m in 1..=8 {
        let y: Vec<f64> = (0..2).map(|_| rng.random()).collect();
        let z: Vec<f64> = (0..2).map(|_| rng.random()).collect();
        let a = respond(&y, &z, &truth, UtilityFamily::Linear, &Likelihood::Exact, 0).unwrap();
        recs.push(record(m, y, z, a));
        let post = posterior_sample(&unit_prior(), &recs, UtilityFamily::Linear, &Likelihood::Exact, 128, m as u64).unwrap();
        let refs: Vec<&PreferenceRecord<f64>> = recs.iter().collect();
        for t in &post.samples {
            assert!(consistent(t, &refs, UtilityFamily::Linear));
        }
    }
}

#[test]
fn spread_shrinks_with_more_records() {
    let checkpoints = [0usize, 2, 5, 10, 20];
    let mut avg_sd = vec![0.0; checkpoints.len()];
    for rep in 0..20u64 {
        let mut rng = rng_from_seed(1000 + rep);
        let truth = [rng.random::<f64>()];
        let mut recs = Vec::new();
        for (c, &m) in checkpoints.iter().enumerate() {
            while recs.len() < m {
                let y: Vec<f64> = (0..2).map(|_| rng.random()).collect();
                let z: Vec<f64> = (0..2).map(|_| rng.random()).collect();
                let a = respond(&y, &z, &truth, UtilityFamily::Linear, &Likelihood::Exact, 0).unwrap();
                recs.push(record(recs.len() + 1, y, z, a));
            }
            let post = posterior_sample(&unit_prior(), &recs, UtilityFamily::Linear, &Likelihood::Exact, 256, rep).unwrap();
            let v: Vec<f64> = post.samples.iter().map(|t| t[0]).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
            avg_sd[c] += sd / 20.0;
        }
    }
    for w in avg_sd.windows(2) {
        assert!(w[1] <= w[0], "{avg_sd:?}");
    }
}

#[test]
fn pair_selection() {
    let two = vec![vec![0.0], vec![1.0]];
    for s in 0..20 {
        assert_eq!(select_query_pair(&two, s).unwrap(), (0, 1));
    }
    assert!(matches!(select_query_pair(&two[..1], 0), Err(Error::NotReady(_))));

    let four = vec![vec![0.0]; 4];
    let mut counts = std::collections::BTreeMap::new();
    for s in 0..12_000 {
        let (i, j) = select_query_pair(&four, s).unwrap();
        assert!(i < j);
        *counts.entry((i, j)).or_insert(0usize) += 1;
    }
    assert_eq!(counts.len(), 6);
    for c in counts.values() {
        let f = *c as f64 / 12_000.0;
        assert!((0.14..=0.19).contains(&f), "{f}");
    }
    assert_eq!(select_query_pair(&four, 77).unwrap(), select_query_pair(&four, 77).unwrap());
}

#[test]
fn response_serde() {
    assert_eq!(serde_json::to_string(&Response::PreferSecond).unwrap(), "-1");
    assert_eq!(serde_json::from_str::<Response>("1").unwrap(), Response::PreferFirst);
    assert!(serde_json::from_str::<Response>("2").is_err());
    assert!(Response::try_from(2i64).is_err());
    let r = record(3, vec![1.0], vec![2.0], Response::Indifferent);
    let back: PreferenceRecord<f64> = serde_json::from_str(&serde_json::to_string(&r).unwrap()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn rejects_bad_inputs() {
    assert!(posterior_sample(&unit_prior(), &[], UtilityFamily::Linear, &Likelihood::Exact, 0, 0).is_err());
    assert!(Likelihood::Probit { scale: 0.0 }.validate().is_err());
    let recs = vec![record(1, vec![1.0, 0.0, 3.0], vec![0.0, 1.0, 3.0], Response::PreferFirst)];
    assert!(posterior_sample(&unit_prior(), &recs, UtilityFamily::Linear, &Likelihood::Exact, 8, 0).is_err());
}
