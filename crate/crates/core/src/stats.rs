//! Normal distribution helpers, scalar expected improvement, seed
//! derivation and low-discrepancy point sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::scalar::Scalar;

/// Deterministic generator used everywhere a seed is accepted.
pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mixes a base seed with stream labels into an independent child seed.
pub fn derive_seed(base: u64, labels: &[u64]) -> u64 {
    let mut h = splitmix(base ^ 0x5851_f42d_4c95_7f2d);
    for &l in labels {
        h = splitmix(h ^ splitmix(l.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
pub fn normal_pdf<T: Scalar>(z: T) -> T {
    let inv_sqrt_2pi = T::of(0.398_942_280_401_432_7);
    inv_sqrt_2pi * (-(z * z) / T::of(2.0)).exp()
}

#[inline]
pub fn normal_cdf<T: Scalar>(z: T) -> T {
    T::of(0.5) * (-z / T::SQRT_2()).erfc()
}

/// Standard normal draw.
#[inline]
pub fn standard_normal<T: Scalar, R: Rng + ?Sized>(rng: &mut R) -> T {
    T::of(rng.sample::<f64, _>(rand_distr::StandardNormal))
}

/// `E[(Y - best)⁺]` for `Y ~ N(mean, sd²)`; `sd = 0` gives `(mean - best)⁺`.
pub fn expected_improvement<T: Scalar>(mean: T, sd: T, best: T) -> T {
    let delta = mean - best;
    if sd <= T::zero() {
        return delta.max(T::zero());
    }
    let z = delta / sd;
    (delta * normal_cdf(z) + sd * normal_pdf(z)).max(T::zero())
}

/// Linear-interpolated empirical quantile of an unsorted sample.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty());
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    v[lo] + (v[hi] - v[lo]) * frac
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

const PRIMES: [u32; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Halton point `index` (1-based internally to skip the origin) in `[0, 1)^dim`.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    assert!(dim <= PRIMES.len(), "Halton sequence supports up to {} dimensions", PRIMES.len());
    PRIMES[..dim]
        .iter()
        .map(|&b| radical_inverse(index + 1, b as u64))
        .collect()
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Latin hypercube sample of `count` points in `[0, 1)^dim`.
pub fn latin_hypercube<R: Rng + ?Sized>(count: usize, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; dim]; count];
    let mut perm: Vec<usize> = (0..count).collect();
    for j in 0..dim {
        for i in (1..count).rev() {
            let k = rng.random_range(0..=i);
            perm.swap(i, k);
        }
        for (i, p) in pts.iter_mut().enumerate() {
            p[j] = (perm[i] as f64 + rng.random::<f64>()) / count as f64;
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cdf_reference_values() {
        assert!((normal_cdf(0.0_f64) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959_963_984_540_054_f64) - 0.975).abs() < 1e-12);
        assert!((normal_cdf(-3.0_f64) - 0.001_349_898_031_630_094_6).abs() < 1e-15);
        assert!((normal_pdf(0.0_f64) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((normal_cdf(0.5_f32) - 0.691_462_5).abs() < 1e-6);
    }

    #[test]
    fn ei_limits() {
        assert_eq!(expected_improvement(0.2_f64, 0.0, 0.0), 0.2);
        assert_eq!(expected_improvement(-0.3_f64, 0.0, 0.0), 0.0);
        assert!((expected_improvement(0.0_f64, 1.0, 0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn derived_seeds_differ_by_label() {
        let a = derive_seed(7, &[1, 2]);
        assert_eq!(a, derive_seed(7, &[1, 2]));
        assert_ne!(a, derive_seed(7, &[2, 1]));
        assert_ne!(a, derive_seed(8, &[1, 2]));
    }

    #[test]
    fn lhs_strata_are_filled() {
        let mut rng = rng_from_seed(3);
        let pts = latin_hypercube(10, 3, &mut rng);
        for j in 0..3 {
            let mut cells: Vec<usize> = pts.iter().map(|p| (p[j] * 10.0) as usize).collect();
            cells.sort();
            assert_eq!(cells, (0..10).collect::<Vec<_>>());
        }
    }

    #[test]
    fn quantiles() {
        let v = [3.0, 1.0, 2.0, 4.0];
        assert_eq!(median(&v), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
    }
}
