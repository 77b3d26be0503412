#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rydchain_core::spectral::{level_spacing_ratio, symmetric_eigen, Parallelism};

/// Mean ⟨r⟩ of a Poisson spectrum built from `gaps` exponential spacings.
pub fn poisson_mean_r(gaps: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut e = Vec::with_capacity(gaps + 1);
    let mut x = 0.0;
    e.push(x);
    for _ in 0..gaps {
        let g: f64 = Exp1.sample(&mut rng);
        x += g;
        e.push(x);
    }
    level_spacing_ratio(&e, 0.0, 20).unwrap().mean_r
}

/// (A + Aᵀ)/2 with standard normal A, row-major.
pub fn goe_matrix(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let a: Vec<f64> = (0..n * n).map(|_| StandardNormal.sample(rng)).collect();
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] = 0.5 * (a[i * n + j] + a[j * n + i]);
        }
    }
    h
}

/// ⟨r⟩ over `count` GOE matrices of size `n`, central 80% of each spectrum.
pub fn goe_mean_r(n: usize, count: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = 0.0;
    for _ in 0..count {
        let h = goe_matrix(n, &mut rng);
        let (vals, _) = symmetric_eigen(n, &h, Parallelism::Sequential).unwrap();
        acc += level_spacing_ratio(&vals, 0.1, 20).unwrap().mean_r;
    }
    acc / count as f64
}
