use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AcquisitionContext;
use crate::scalar::Scalar;
use crate::stats::{derive_seed, halton, rng_from_seed};
use crate::utility::value_unchecked;
use crate::{Error, Result};

/// Inner optimizer budget for TS-UU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThompsonConfig {
    /// Quasi-random probes of the sampled path.
    pub probes: usize,
    /// Pattern-search iterations after the probes.
    pub pattern_iterations: usize,
    /// First pattern-search step as a fraction of each box width.
    pub initial_step: f64,
}

impl Default for ThompsonConfig {
    fn default() -> Self {
        Self {
            probes: 512,
            pattern_iterations: 20,
            initial_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThompsonOutcome<T> {
    pub x: Vec<T>,
    /// `U(f̂(x); θ)` on the sampled path.
    pub value: f64,
    /// Index of the θ sample used.
    pub theta_index: usize,
    /// Hyperparameter member the path was drawn under.
    pub member: usize,
}

/// Draws one θ and one hyperparameter member, then maximizes `U(f̂(x); θ)`
/// over a lazily sampled posterior path `f̂`: Halton probes (randomly
/// shifted) followed by compass pattern search from the best probe.
pub fn ts_uu_select<T: Scalar>(ctx: &AcquisitionContext<'_, T>, cfg: &ThompsonConfig, seed: u64) -> Result<ThompsonOutcome<T>> {
    if cfg.probes == 0 || !(cfg.initial_step > 0.0) {
        return Err(Error::Config("Thompson sampling needs at least one probe and a positive step".into()));
    }
    let gp = ctx.gp();
    let bx = ctx.design_box();
    let d = bx.dim();
    let mut rng = rng_from_seed(derive_seed(seed, &[0]));
    let theta_index = rng.random_range(0..ctx.thetas().len());
    let member = rng.random_range(0..gp.num_members());
    let theta = &ctx.thetas()[theta_index];
    let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    let mut path = gp.new_path(member, derive_seed(seed, &[1]))?;

    let mut utility = |x: &[T]| -> Result<T> {
        let y = gp.lazy_sample(x, &mut path)?;
        Ok(value_unchecked(&y, theta, ctx.family()))
    };

    let mut best_x = Vec::new();
    let mut best_u = T::neg_infinity();
    for i in 0..cfg.probes {
        let u: Vec<f64> = halton(i as u64, d).iter().zip(&shift).map(|(h, s)| (h + s).fract()).collect();
        let x = bx.from_unit(&u);
        let v = utility(&x)?;
        if best_x.is_empty() || v > best_u {
            best_x = x;
            best_u = v;
        }
    }

    let mut step: Vec<T> = (0..d).map(|i| bx.width(i) * T::of(cfg.initial_step)).collect();
    for _ in 0..cfg.pattern_iterations {
        let mut moved = false;
        for i in 0..d {
            for sign in [T::one(), -T::one()] {
                let mut x = best_x.clone();
                x[i] = x[i] + sign * step[i];
                bx.clamp(&mut x);
                if x == best_x {
                    continue;
                }
                let v = utility(&x)?;
                if v > best_u {
                    best_x = x;
                    best_u = v;
                    moved = true;
                }
            }
        }
        if !moved {
            step.iter_mut().for_each(|s| *s = *s / T::of(2.0));
        }
    }

    Ok(ThompsonOutcome {
        x: best_x,
        value: best_u.as_f64(),
        theta_index,
        member,
    })
}
