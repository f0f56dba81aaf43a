//! Derivative-free local search and univariate slice sampling over `f64`
//! parameter vectors.

use rand::Rng;

/// Box limits used to keep searches inside a valid parameter region.
#[derive(Debug, Clone)]
pub struct Limits {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Limits {
    pub fn clamp(&self, x: &mut [f64]) {
        for ((v, &l), &u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(l, u);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&v, (&l, &u))| v >= l && v <= u)
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult {
    pub point: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

/// Maximizes `objective` with the Nelder–Mead simplex method, projecting
/// trial points onto `limits`. Non-finite objective values count as `−∞`.
pub fn nelder_mead_max<F>(
    mut objective: F,
    start: &[f64],
    initial_step: &[f64],
    limits: &Limits,
    max_evals: usize,
    tolerance: f64,
) -> NelderMeadResult
where
    F: FnMut(&[f64]) -> f64,
{
    let dim = start.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = objective(x);
        if v.is_finite() {
            -v
        } else {
            f64::INFINITY
        }
    };

    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    let mut x0 = start.to_vec();
    limits.clamp(&mut x0);
    let f0 = eval(&x0, &mut evals);
    simplex.push((x0.clone(), f0));
    for i in 0..dim {
        let mut x = x0.clone();
        x[i] += initial_step[i];
        if x[i] > limits.upper[i] {
            x[i] = x0[i] - initial_step[i];
        }
        limits.clamp(&mut x);
        let f = eval(&x, &mut evals);
        simplex.push((x, f));
    }

    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let best = simplex[0].1;
        let worst = simplex[dim].1;
        if worst.is_finite() && (worst - best).abs() <= tolerance * (1.0 + best.abs()) {
            break;
        }
        let mut centroid = vec![0.0; dim];
        for (x, _) in &simplex[..dim] {
            for (c, &v) in centroid.iter_mut().zip(x) {
                *c += v / dim as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[dim].0)
                .map(|(&c, &w)| c + t * (w - c))
                .collect();
            limits.clamp(&mut p);
            p
        };
        let xr = along(-1.0);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe, &mut evals);
            simplex[dim] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[dim - 1].1 {
            simplex[dim] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[dim].1 {
                let xc = along(-0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < simplex[dim].1.min(fr) {
                simplex[dim] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let mut p: Vec<f64> = x_best
                        .iter()
                        .zip(&entry.0)
                        .map(|(&b, &v)| b + 0.5 * (v - b))
                        .collect();
                    limits.clamp(&mut p);
                    let f = eval(&p, &mut evals);
                    *entry = (p, f);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (point, v) = simplex.swap_remove(0);
    NelderMeadResult {
        point,
        value: -v,
        evaluations: evals,
    }
}

/// One sweep of coordinate-wise slice sampling with stepping out.
///
/// `log_density` must return `−∞` outside its support; `current_lp` is the
/// log density at `x` and the updated value is returned.
pub fn slice_sweep<F, R>(
    log_density: &mut F,
    x: &mut [f64],
    mut current_lp: f64,
    widths: &[f64],
    limits: &Limits,
    rng: &mut R,
) -> f64
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    const MAX_STEPS: usize = 20;
    const MAX_SHRINKS: usize = 60;
    for i in 0..x.len() {
        let level = current_lp + rng.random::<f64>().max(1e-300).ln();
        let x0 = x[i];
        let w = widths[i];
        let mut left = x0 - w * rng.random::<f64>();
        let mut right = left + w;
        let probe = |x: &mut [f64], v: f64, f: &mut F| {
            let saved = x[i];
            x[i] = v;
            let lp = if limits.contains(x) { f(x) } else { f64::NEG_INFINITY };
            x[i] = saved;
            lp
        };
        let mut steps = 0;
        while steps < MAX_STEPS && left > limits.lower[i] && probe(x, left, log_density) > level {
            left -= w;
            steps += 1;
        }
        steps = 0;
        while steps < MAX_STEPS && right < limits.upper[i] && probe(x, right, log_density) > level {
            right += w;
            steps += 1;
        }
        left = left.max(limits.lower[i]);
        right = right.min(limits.upper[i]);
        let mut accepted = false;
        for _ in 0..MAX_SHRINKS {
            let cand = left + (right - left) * rng.random::<f64>();
            let lp = probe(x, cand, log_density);
            if lp > level {
                x[i] = cand;
                current_lp = lp;
                accepted = true;
                break;
            }
            if cand < x0 {
                left = cand;
            } else {
                right = cand;
            }
        }
        if !accepted {
            x[i] = x0;
        }
    }
    current_lp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::rng_from_seed;

    #[test]
    fn nelder_mead_finds_quadratic_peak() {
        let limits = Limits {
            lower: vec![-10.0; 3],
            upper: vec![10.0; 3],
        };
        let target = [1.0, -2.0, 0.5];
        let res = nelder_mead_max(
            |x| -x.iter().zip(&target).map(|(a, b)| (a - b).powi(2) * 3.0).sum::<f64>(),
            &[0.0; 3],
            &[1.0; 3],
            &limits,
            2000,
            1e-14,
        );
        for (a, b) in res.point.iter().zip(&target) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn nelder_mead_respects_limits() {
        let limits = Limits {
            lower: vec![0.0],
            upper: vec![1.0],
        };
        let res = nelder_mead_max(|x| x[0], &[0.5], &[0.2], &limits, 500, 1e-12);
        assert!((res.point[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn slice_sampler_recovers_normal_moments() {
        let limits = Limits {
            lower: vec![-50.0],
            upper: vec![50.0],
        };
        let mut rng = rng_from_seed(5);
        let mut lp = |x: &[f64]| -0.5 * ((x[0] - 2.0) / 1.5).powi(2);
        let mut x = vec![2.0];
        let mut cur = lp(&x);
        let mut draws = Vec::new();
        for _ in 0..20_000 {
            cur = slice_sweep(&mut lp, &mut x, cur, &[1.0], &limits, &mut rng);
            draws.push(x[0]);
        }
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / draws.len() as f64;
        assert!((mean - 2.0).abs() < 0.06, "{mean}");
        assert!((var.sqrt() - 1.5).abs() < 0.06, "{var}");
    }
}
