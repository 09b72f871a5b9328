#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use ewa_mcmc::{normalize_columns, rng, ChainConfig, ProblemInstance, Subset};

/// Gaussian design, signal of size `magnitude` on `support`, T-hat as given.
#[allow(clippy::too_many_arguments)]
pub fn instance(
    seed: u64,
    n: usize,
    p: usize,
    s_star: usize,
    support: &[usize],
    magnitude: f64,
    t_hat: &[usize],
    d: f64,
) -> (ProblemInstance, ChainConfig) {
    let mut r = rng::stream(seed, rng::STREAM_DESIGN);
    let x = normalize_columns(&DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut r))).unwrap();
    let mut r = rng::stream(seed, rng::STREAM_THETA);
    let mut theta = DVector::zeros(p);
    for &j in support {
        theta[j] = if r.random_bool(0.5) { magnitude } else { -magnitude };
    }
    let mut r = rng::stream(seed, rng::STREAM_NOISE);
    let eps = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut r));
    let inst = ProblemInstance::new(x, theta, eps, s_star).unwrap();
    let cfg = ChainConfig::new(Subset::from_indices(p, t_hat).unwrap(), 2.0, 1.0, 1.0, 0.5, seed)
        .unwrap()
        .with_d(d);
    (inst, cfg)
}

pub fn bits_to_indices(p: usize, bits: u64) -> Vec<usize> {
    (0..p).filter(|j| bits >> j & 1 == 1).collect()
}
