//! Deterministic built-in model shapes. Each is elongated along the first
//! axis so min-x / max-x blend centers span the shape.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::geometry::PointSet;

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;

pub const BUILTIN_SHAPES: &[&str] = &["disk2d", "fish2d", "clusters2d", "ellipsoid3d", "torus3d", "clusters3d"];

const CLUSTERS_2D: &[([f64; 2], f64)] = &[
    ([-0.7, -0.2], 0.12),
    ([0.1, 0.4], 0.2),
    ([0.6, -0.3], 0.1),
    ([-0.2, -0.5], 0.08),
    ([0.9, 0.3], 0.15),
];

const CLUSTERS_3D: &[([f64; 3], f64)] = &[
    ([-0.7, -0.2, 0.1], 0.12),
    ([0.1, 0.3, -0.2], 0.2),
    ([0.6, -0.3, 0.2], 0.1),
    ([-0.2, -0.4, -0.3], 0.08),
    ([0.9, 0.2, 0.0], 0.15),
    ([0.0, 0.0, 0.4], 0.1),
];

/// Isotropic Gaussian blobs of unequal spread; point `i` belongs to cluster
/// `i mod k`. Drawn from a fixed stream, so the set depends only on `n`.
fn gaussian_clusters<const D: usize>(clusters: &[([f64; D], f64)], n: usize) -> PointSet {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut c = Vec::with_capacity(D * n);
    for i in 0..n {
        let (center, spread) = &clusters[i % clusters.len()];
        for m in center {
            let z: f64 = StandardNormal.sample(&mut rng);
            c.push(m + spread * z);
        }
    }
    PointSet::from_raw(D, c)
}

pub fn clusters2d(n: usize) -> PointSet {
    gaussian_clusters(CLUSTERS_2D, n)
}

pub fn clusters3d(n: usize) -> PointSet {
    gaussian_clusters(CLUSTERS_3D, n)
}

/// Sunflower-spiral sampling of an ellipse with semi-axes 1 and 0.6.
pub fn disk2d(n: usize) -> PointSet {
    let mut c = Vec::with_capacity(2 * n);
    for i in 0..n {
        let r = ((i as f64 + 0.5) / n as f64).sqrt();
        let a = i as f64 * GOLDEN_ANGLE;
        c.push(r * a.cos());
        c.push(0.6 * r * a.sin());
    }
    PointSet::from_raw(2, c)
}

/// Points along the closed fish curve `(cos t - sin^2 t / sqrt 2, cos t sin t)`.
pub fn fish2d(n: usize) -> PointSet {
    let mut c = Vec::with_capacity(2 * n);
    for i in 0..n {
        let t = 2.0 * PI * i as f64 / n as f64;
        let (s, co) = t.sin_cos();
        c.push(co - s * s / 2f64.sqrt());
        c.push(co * s);
    }
    PointSet::from_raw(2, c)
}

/// Fibonacci-lattice samples of an ellipsoid surface with semi-axes (1, 0.6, 0.4).
pub fn ellipsoid3d(n: usize) -> PointSet {
    let mut c = Vec::with_capacity(3 * n);
    for i in 0..n {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
        let r = (1.0 - z * z).sqrt();
        let a = i as f64 * GOLDEN_ANGLE;
        c.push(z);
        c.push(0.6 * r * a.cos());
        c.push(0.4 * r * a.sin());
    }
    PointSet::from_raw(3, c)
}

/// Torus in the xy-plane, tube radius 0.3 around an ellipse with semi-axes 1 and 0.7.
pub fn torus3d(n: usize) -> PointSet {
    let mut c = Vec::with_capacity(3 * n);
    for i in 0..n {
        let u = 2.0 * PI * (i as f64 + 0.5) / n as f64;
        let v = i as f64 * GOLDEN_ANGLE;
        let ring = 1.0 + 0.3 * v.cos();
        c.push(ring * u.cos());
        c.push(0.7 * ring * u.sin());
        c.push(0.3 * v.sin());
    }
    PointSet::from_raw(3, c)
}

pub fn builtin_shape(name: &str, n: usize) -> Result<PointSet> {
    if n == 0 {
        return Err(Error::EmptyPointSet);
    }
    match name {
        "disk2d" => Ok(disk2d(n)),
        "fish2d" => Ok(fish2d(n)),
        "clusters2d" => Ok(clusters2d(n)),
        "clusters3d" => Ok(clusters3d(n)),
        "ellipsoid3d" => Ok(ellipsoid3d(n)),
        "torus3d" => Ok(torus3d(n)),
        other => Err(Error::InvalidArgument(format!(
            "unknown shape '{other}', expected one of {}",
            BUILTIN_SHAPES.join(", ")
        ))),
    }
}
