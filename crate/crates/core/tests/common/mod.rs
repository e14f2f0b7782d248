#![allow(dead_code)]

use acpd_core::{AnalyticMap, PointSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cube_points(rng: &mut ChaCha8Rng, d: usize, n: usize) -> PointSet {
    PointSet::new(d, (0..d * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

/// Block `r` drawn from `U[-scale / r!, scale / r!]`.
pub fn random_map(rng: &mut ChaCha8Rng, d: usize, order: usize, scale: f64) -> AnalyticMap {
    let mut map = AnalyticMap::zero(d, order, vec![0.0; d]).unwrap();
    let mut fact = 1.0;
    for (r, block) in map.blocks_mut().iter_mut().enumerate() {
        if r > 0 {
            fact *= r as f64;
        }
        let s = scale / fact;
        block.iter_mut().for_each(|v| *v = rng.random_range(-s..s));
    }
    map
}
