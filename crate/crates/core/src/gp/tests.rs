use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;

use super::*;
use crate::stats::rng_from_seed;

fn random_points(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = rng_from_seed(seed);
    (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect()
}

fn random_model(n: usize, d: usize, k: usize, seed: u64) -> GpModel<f64> {
    let mut rng = rng_from_seed(seed ^ 0xabc);
    let inputs = random_points(n, d, seed);
    let targets: Vec<Vec<f64>> = inputs
        .iter()
        .map(|x| (0..k).map(|j| (x.iter().sum::<f64>() * (j + 1) as f64).sin() + 0.1 * j as f64).collect())
        .collect();
    let ensembles = (0..k)
        .map(|_| {
            vec![KernelHyperparams::new(
                (0..d).map(|_| rng.random_range(0.2..0.8)).collect(),
                rng.random_range(0.5..2.0),
                rng.random_range(-0.5..0.5),
            )]
        })
        .collect();
    GpModel::with_hyperparams(inputs, &targets, ensembles).unwrap()
}

#[test]
fn interpolates_training_data() {
    let model = random_model(10, 3, 2, 1);
    for (i, x) in model.inputs().to_vec().iter().enumerate() {
        let p = model.posterior(x, 0).unwrap();
        for j in 0..2 {
            assert!((p.mean[j] - model.targets(j)[i]).abs() <= 1e-6);
            assert!(p.variance[j] <= 1e-8);
        }
    }
}

#[test]
fn reverts_to_prior_far_away() {
    let model = random_model(6, 2, 1, 2);
    let h = model.hyperparams(0, 0).clone();
    let far: Vec<f64> = h.lengthscales.iter().map(|l| 1.0 + 20.0 * l).collect();
    let p = model.posterior(&far, 0).unwrap();
    assert!((p.mean[0] - h.constant_mean).abs() <= 1e-4);
    assert!((p.variance[0] - h.signal_variance).abs() <= 1e-4);
}

#[test]
fn matches_dense_inverse() {
    for seed in 0..5 {
        let model = random_model(5, 2, 1, 10 + seed);
        let h = model.hyperparams(0, 0).clone();
        let xs = model.inputs();
        let n = xs.len();
        let k = DMatrix::from_fn(n, n, |i, j| {
            matern52(&xs[i], &xs[j], &h).unwrap() + if i == j { h.jitter } else { 0.0 }
        });
        let kinv = k.try_inverse().unwrap();
        let y = DVector::from_iterator(n, model.targets(0).iter().map(|v| v - h.constant_mean));
        let q = random_points(1, 2, 99 + seed).remove(0);
        let kx = DVector::from_iterator(n, xs.iter().map(|xi| matern52(&q, xi, &h).unwrap()));
        let mean = h.constant_mean + (kx.transpose() * &kinv * &y)[0];
        let var = h.signal_variance - (kx.transpose() * &kinv * &kx)[0];
        let p = model.posterior(&q, 0).unwrap();
        assert!((p.mean[0] - mean).abs() <= 1e-8, "{} vs {}", p.mean[0], mean);
        assert!((p.variance[0] - var.max(0.0)).abs() <= 1e-8);
        assert_eq!(p.chol()[0], p.variance[0].sqrt());
    }
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

#[test]
fn gradients_match_finite_differences() {
    let model = random_model(8, 3, 2, 3);
    let mut rng = rng_from_seed(4);
    let step = 1e-5;
    for _ in 0..20 {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(0.05..0.95)).collect();
        let (_, g) = model.posterior_with_gradients(&x, 0).unwrap();
        for i in 0..3 {
            let mut up = x.clone();
            let mut dn = x.clone();
            up[i] += step;
            dn[i] -= step;
            let pu = model.posterior(&up, 0).unwrap();
            let pd = model.posterior(&dn, 0).unwrap();
            for j in 0..2 {
                let fm = (pu.mean[j] - pd.mean[j]) / (2.0 * step);
                let fv = (pu.variance[j] - pd.variance[j]) / (2.0 * step);
                assert!(rel_err(g.mean[j][i], fm) <= 1e-4, "mean grad {} vs {}", g.mean[j][i], fm);
                assert!(rel_err(g.variance[j][i], fv) <= 1e-4, "var grad {} vs {}", g.variance[j][i], fv);
            }
        }
    }
}

#[test]
fn symmetric_mean_gradient_vanishes() {
    let h = KernelHyperparams::new(vec![0.3f64], 1.0, 0.0);
    let model = GpModel::with_hyperparams(vec![vec![0.2], vec![0.8]], &[vec![1.0], vec![1.0]], vec![vec![h]]).unwrap();
    let g = model.posterior_gradients(&[0.5], 0).unwrap();
    assert!(g.mean[0][0].abs() < 1e-12);
    assert!(g.variance[0][0].abs() < 1e-12);
}

#[test]
fn constant_targets_give_flat_mean() {
    let inputs = random_points(6, 2, 5);
    let targets = vec![vec![2.5]; 6];
    let h = KernelHyperparams::new(vec![0.4, 0.4], 1.0, 2.5);
    let model = GpModel::with_hyperparams(inputs, &targets, vec![vec![h]]).unwrap();
    for x in random_points(20, 2, 6) {
        let g = model.posterior_gradients(&x, 0).unwrap();
        assert!(g.mean[0].iter().all(|v| v.abs() < 1e-10));
    }
}

#[test]
fn variance_gradient_zero_at_training_input() {
    let model = random_model(5, 2, 1, 7);
    let x = model.inputs()[2].clone();
    let g = model.posterior_gradients(&x, 0).unwrap();
    assert!(g.variance[0].iter().all(|v| *v == 0.0));
}

#[test]
fn factor_reconstructs_kernel() {
    let model = random_model(12, 3, 1, 8);
    let h = model.hyperparams(0, 0);
    let l = model.training_factor(0, 0).reconstruct();
    let xs = model.inputs();
    let n = xs.len();
    for i in 0..n {
        for j in 0..n {
            let k = matern52(&xs[i], &xs[j], h).unwrap() + if i == j { h.jitter } else { 0.0 };
            assert!((l[i * n + j] - k).abs() <= 1e-8);
        }
    }
}

#[test]
fn gram_is_positive_semidefinite() {
    let mut rng = rng_from_seed(9);
    for trial in 0..20 {
        let pts = random_points(15, 2, 100 + trial);
        let h = KernelHyperparams::new(vec![rng.random_range(0.05..2.0), rng.random_range(0.05..2.0)], 1.3, 0.0);
        let g = DMatrix::from_fn(15, 15, |i, j| matern52(&pts[i], &pts[j], &h).unwrap());
        let min = SymmetricEigen::new(g).eigenvalues.min();
        assert!(min >= -1e-8, "min eigenvalue {min}");
    }
}

#[test]
fn near_duplicate_inputs_factor() {
    let h = KernelHyperparams::new(vec![0.3f64], 1.0, 0.0);
    let model = GpModel::with_hyperparams(vec![vec![0.5], vec![0.5 + 1e-9]], &[vec![1.0], vec![1.0]], vec![vec![h]]).unwrap();
    let p = model.posterior(&[0.5], 0).unwrap();
    assert!((p.mean[0] - 1.0).abs() < 1e-6);
}

#[test]
fn rejects_bad_queries() {
    let model = random_model(4, 2, 1, 11);
    assert!(matches!(model.posterior(&[0.1], 0), Err(Error::Contract(_))));
    assert!(matches!(model.posterior(&[0.1, 0.2], 3), Err(Error::Contract(_))));
    let h = KernelHyperparams::new(vec![0.3], 1.0, 0.0);
    assert!(GpModel::with_hyperparams(vec![vec![0.1, 0.2]], &[vec![0.0]], vec![vec![h]]).is_err());
}

#[test]
fn lazy_path_repeat_and_training_lookup() {
    let model = random_model(6, 2, 2, 12);
    let mut path = model.new_path(0, 1).unwrap();
    let x = vec![0.33, 0.77];
    let a = model.lazy_sample(&x, &mut path).unwrap();
    let b = model.lazy_sample(&x, &mut path).unwrap();
    assert_eq!(a, b);
    let t = model.inputs()[3].clone();
    let v = model.lazy_sample(&t, &mut path).unwrap();
    assert_eq!(v, vec![model.targets(0)[3], model.targets(1)[3]]);
}

#[test]
fn lazy_path_single_point_matches_posterior() {
    let model = random_model(6, 2, 1, 13);
    let x = vec![0.41, 0.58];
    let p = model.posterior(&x, 0).unwrap();
    let m = 10_000;
    let draws: Vec<f64> = (0..m)
        .map(|s| {
            let mut path = model.new_path(0, s).unwrap();
            model.lazy_sample(&x, &mut path).unwrap()[0]
        })
        .collect();
    let mean = draws.iter().sum::<f64>() / m as f64;
    let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    let se = (var / m as f64).sqrt();
    assert!((mean - p.mean[0]).abs() <= 3.0 * se, "{mean} vs {}", p.mean[0]);
    assert!((var / p.variance[0] - 1.0).abs() < 0.1);
}

#[test]
fn lazy_path_agrees_with_joint_conditioning() {
    let model = random_model(6, 2, 2, 14);
    let mut path = model.new_path(0, 7).unwrap();
    for x in random_points(5, 2, 15) {
        model.lazy_sample(&x, &mut path).unwrap();
    }
    let fantasies = path.fantasies(&model);
    assert_eq!(fantasies.len(), 5);
    assert_eq!(path.fantasy_count(&model), 5);

    let mut inputs = model.inputs().to_vec();
    let mut targets: Vec<Vec<f64>> = (0..inputs.len())
        .map(|i| (0..2).map(|j| model.targets(j)[i]).collect())
        .collect();
    for (x, v) in fantasies {
        inputs.push(x);
        targets.push(v);
    }
    let ensembles = (0..2).map(|j| vec![model.hyperparams(j, 0).clone()]).collect();
    let joint = GpModel::with_hyperparams(inputs, &targets, ensembles).unwrap();
    let held = vec![0.62, 0.13];
    let jp = joint.posterior(&held, 0).unwrap();
    for (j, (m, v)) in path.predict(&model, &held).into_iter().enumerate() {
        assert!((m - jp.mean[j]).abs() <= 1e-8);
        assert!((v - jp.variance[j]).abs() <= 1e-8);
    }
}

#[test]
fn lazy_path_is_deterministic_per_seed() {
    let model = random_model(5, 2, 1, 16);
    let pts = random_points(10, 2, 17);
    let run = |seed| {
        let mut path = model.new_path(0, seed).unwrap();
        pts.iter().map(|x| model.lazy_sample(x, &mut path).unwrap()[0]).collect::<Vec<_>>()
    };
    assert_eq!(run(3), run(3));
    assert_ne!(run(3), run(4));
}

fn fast_options(h: usize) -> FitOptions {
    FitOptions {
        ensemble_size: h,
        restarts: 4,
        restart_evals: 100,
        polish_evals: 200,
        ..FitOptions::default()
    }
}

#[test]
fn fit_two_points_stays_in_support() {
    let inputs = vec![vec![0.1, 0.2], vec![0.7, 0.9]];
    let targets = [1.0, -0.5];
    let prior = HyperPrior::default_for(&DesignBox::unit(2), &targets);
    let fit = fit_hyperparameters(&inputs, &targets, &prior, &fast_options(1), 5).unwrap();
    assert_eq!(fit.ensemble.len(), 1);
    assert_eq!(fit.ensemble[0], fit.map);
    for &l in &fit.map.lengthscales {
        assert!(l > 0.0 && (0.01..=100.0).contains(&l));
    }
    assert!(fit.map.signal_variance > 0.0);
    assert!(!fit.diagnostics.degenerate);
}

#[test]
fn fit_is_deterministic() {
    let inputs = random_points(8, 2, 18);
    let targets: Vec<f64> = inputs.iter().map(|x| (3.0 * x[0]).sin() + x[1]).collect();
    let prior = HyperPrior::default_for(&DesignBox::unit(2), &targets);
    let a = fit_hyperparameters(&inputs, &targets, &prior, &fast_options(4), 21).unwrap();
    let b = fit_hyperparameters(&inputs, &targets, &prior, &fast_options(4), 21).unwrap();
    assert_eq!(a.ensemble, b.ensemble);
    assert_eq!(a.ensemble.len(), 4);
}

#[test]
fn degenerate_targets_are_flagged() {
    let inputs = random_points(5, 1, 19);
    let targets = [3.0; 5];
    let prior = HyperPrior::default_for(&DesignBox::unit(1), &targets);
    let fit = fit_hyperparameters(&inputs, &targets, &prior, &fast_options(3), 1).unwrap();
    assert!(fit.diagnostics.degenerate);
    assert_eq!(fit.ensemble.len(), 3);
    assert!(fit.map.signal_variance > 0.0);
    assert_eq!(fit.map.constant_mean, 3.0);

    let ys: Vec<Vec<f64>> = targets.iter().map(|&v| vec![v]).collect();
    let model = GpModel::fit(inputs, &ys, &DesignBox::unit(1), &fast_options(3), None, 1).unwrap();
    assert!(model.diagnostics(0).degenerate);
    assert!(model.ensemble_summaries()[0].degenerate);
}

#[test]
fn fit_rejects_too_little_data() {
    let prior = HyperPrior::default_for(&DesignBox::unit(1), &[1.0]);
    assert!(fit_hyperparameters(&[vec![0.5]], &[1.0], &prior, &fast_options(1), 0).is_err());
    let prior = HyperPrior::default_for(&DesignBox::unit(1), &[1.0, 2.0]);
    assert!(fit_hyperparameters(&[vec![0.5], vec![0.6]], &[1.0, 2.0], &prior, &fast_options(0), 0).is_err());
}

/// Profile log-likelihood over the lengthscale, maximizing out the constant
/// mean (GLS) and signal variance in closed form.
fn profile_loglik(xs: &[f64], ys: &[f64], ell: f64) -> f64 {
    let n = xs.len();
    let r = DMatrix::from_fn(n, n, |i, j| {
        let h = KernelHyperparams::new(vec![ell], 1.0, 0.0);
        matern52(&[xs[i]], &[xs[j]], &h).unwrap() + if i == j { 1e-8 } else { 0.0 }
    });
    let chol = r.cholesky().unwrap();
    let ones = DVector::from_element(n, 1.0);
    let y = DVector::from_column_slice(ys);
    let ri1 = chol.solve(&ones);
    let c = ri1.dot(&y) / ri1.dot(&ones);
    let e = &y - &ones * c;
    let s2 = e.dot(&chol.solve(&e)) / n as f64;
    let logdet: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
    -0.5 * n as f64 * s2.ln() - 0.5 * logdet
}

#[test]
fn recovers_generating_lengthscale() {
    let n = 40;
    let mut rng = rng_from_seed(2024);
    let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let truth = KernelHyperparams::new(vec![0.3], 1.0, 0.0);
    let k = DMatrix::from_fn(n, n, |i, j| {
        matern52(&[xs[i]], &[xs[j]], &truth).unwrap() + if i == j { 1e-10 } else { 0.0 }
    });
    let l = k.cholesky().unwrap().l();
    let z = DVector::from_fn(n, |_, _| crate::stats::standard_normal::<f64, _>(&mut rng));
    let ys: Vec<f64> = (l * z).iter().copied().collect();

    let grid: Vec<f64> = (0..200).map(|i| (0.02f64.ln() + i as f64 * (3.0f64.ln() - 0.02f64.ln()) / 199.0).exp()).collect();
    let best_grid = grid
        .iter()
        .copied()
        .max_by(|a, b| profile_loglik(&xs, &ys, *a).total_cmp(&profile_loglik(&xs, &ys, *b)))
        .unwrap();
    assert!((0.15..=0.6).contains(&best_grid), "grid argmax {best_grid}");

    let inputs: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    let prior = HyperPrior::default_for(&DesignBox::unit(1), &ys);
    let fit = fit_hyperparameters(&inputs, &ys, &prior, &FitOptions { ensemble_size: 1, ..FitOptions::default() }, 3).unwrap();
    let ell = fit.map.lengthscales[0];
    assert!((0.15..=0.6).contains(&ell), "MAP lengthscale {ell}");
    assert!((ell / best_grid).ln().abs() < 2f64.ln(), "MAP {ell} vs grid {best_grid}");
}

#[test]
fn ensemble_members_are_valid_and_map_is_separate() {
    let inputs = random_points(10, 2, 30);
    let targets: Vec<Vec<f64>> = inputs.iter().map(|x| vec![x[0] * x[1], (4.0 * x[0]).cos()]).collect();
    let model = GpModel::fit(inputs.clone(), &targets, &DesignBox::unit(2), &fast_options(5), None, 8).unwrap();
    assert_eq!(model.num_members(), 5);
    assert_eq!(model.map_hyperparams().len(), 2);
    for j in 0..2 {
        for m in 0..5 {
            model.hyperparams(j, m).validate().unwrap();
            let p = model.posterior(&inputs[0], m).unwrap();
            assert!((p.mean[j] - targets[0][j]).abs() < 1e-6);
        }
    }
    let warm = model.map_hyperparams();
    let again = GpModel::fit(inputs, &targets, &DesignBox::unit(2), &fast_options(5), Some(&warm), 8).unwrap();
    assert_eq!(again.num_members(), 5);
}

#[test]
fn single_precision_model() {
    let inputs: Vec<Vec<f32>> = vec![vec![0.1], vec![0.5], vec![0.9]];
    let targets: Vec<Vec<f32>> = vec![vec![1.0], vec![0.0], vec![-1.0]];
    let h = KernelHyperparams::new(vec![0.3f32], 1.0, 0.0);
    let model = GpModel::with_hyperparams(inputs, &targets, vec![vec![h]]).unwrap();
    let p = model.posterior(&[0.5f32], 0).unwrap();
    assert!(p.mean[0].abs() < 1e-3);
    assert!(p.variance[0] < 1e-3);
}
