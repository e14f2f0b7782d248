//! Gaussian-mixture E-step with a uniform outlier component, plus the
//! condensation of each posterior row into a weighted barycentric target.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::PointSet;

/// Default threshold below which a moving point's posterior mass is ignored.
pub const DEFAULT_EPS_RHO: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct PosteriorStats {
    /// `M x N`, `p[(m, n)] = P(m | x_n)`.
    pub p: DMatrix<f64>,
    /// Row sums `P 1`.
    pub rho: Vec<f64>,
    /// Column sums `P^T 1`.
    pub eta: Vec<f64>,
    /// `P X`, `M x d`.
    pub sx: DMatrix<f64>,
    /// Total mass assigned to the Gaussian components.
    pub np: f64,
    /// Rows with `rho > eps_rho`, ascending.
    pub active: Vec<usize>,
}

impl PosteriorStats {
    pub fn moving_len(&self) -> usize {
        self.p.nrows()
    }

    pub fn fixed_len(&self) -> usize {
        self.p.ncols()
    }
}

/// `c = (2 pi sigma^2)^{d/2} (w / (1 - w)) (M / N)`
pub fn outlier_constant(sigma2: f64, w: f64, m: usize, n: usize, d: usize) -> Result<f64> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma2 must be positive, got {sigma2}")));
    }
    if !(0.0..1.0).contains(&w) {
        return Err(Error::InvalidArgument(format!(
            "outlier weight must lie in [0, 1), got {w}"
        )));
    }
    Ok((2.0 * std::f64::consts::PI * sigma2).powf(d as f64 / 2.0) * (w / (1.0 - w)) * (m as f64 / n as f64))
}

/// Computes the posterior matrix and its condensed statistics.
///
/// Columns (fixed points) are filled independently on the current rayon pool;
/// every reduction runs in a fixed order, so the result does not depend on the
/// number of threads.
pub fn compute_posterior(x: &PointSet, y: &PointSet, sigma2: f64, w: f64, eps_rho: f64) -> Result<PosteriorStats> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: y.dim(),
        });
    }
    let (m, n, d) = (y.len(), x.len(), x.dim());
    let c = outlier_constant(sigma2, w, m, n, d)?;
    let inv = 1.0 / (2.0 * sigma2);

    let mut p = DMatrix::<f64>::zeros(m, n);
    let mut eta = vec![0.0; n];
    p.as_mut_slice()
        .par_chunks_mut(m)
        .zip(eta.par_iter_mut())
        .enumerate()
        .for_each(|(col, (column, eta_n))| {
            let xn = x.point(col);
            let mut denom = c;
            for (slot, ym) in column.iter_mut().zip(y.iter()) {
                let dist2: f64 = xn.iter().zip(ym).map(|(a, b)| (a - b) * (a - b)).sum();
                *slot = (-dist2 * inv).exp();
                denom += *slot;
            }
            if denom > 0.0 {
                let scale = 1.0 / denom;
                column.iter_mut().for_each(|v| *v *= scale);
                *eta_n = column.iter().sum();
            } else {
                // w = 0 and every affinity underflowed: the point is unexplained.
                column.iter_mut().for_each(|v| *v = 0.0);
                *eta_n = 0.0;
            }
        });

    let mut rho = vec![0.0; m];
    for column in p.as_slice().chunks_exact(m) {
        for (r, v) in rho.iter_mut().zip(column) {
            *r += v;
        }
    }
    let sx = &p * x.to_matrix();
    let np = rho.iter().sum();
    let active = (0..m).filter(|&i| rho[i] > eps_rho).collect();
    Ok(PosteriorStats {
        p,
        rho,
        eta,
        sx,
        np,
        active,
    })
}

/// Posterior barycenters of the fixed set for the active moving points.
#[derive(Debug, Clone)]
pub struct SoftTargets {
    pub targets: PointSet,
    pub weights: Vec<f64>,
    /// Index into the moving set for each target.
    pub sources: Vec<usize>,
}

pub fn soft_targets(stats: &PosteriorStats, x: &PointSet) -> Result<SoftTargets> {
    if x.len() != stats.fixed_len() {
        return Err(Error::CardinalityMismatch {
            left: stats.fixed_len(),
            right: x.len(),
        });
    }
    if x.dim() != stats.sx.ncols() {
        return Err(Error::DimensionMismatch {
            expected: stats.sx.ncols(),
            got: x.dim(),
        });
    }
    if stats.active.is_empty() {
        return Err(Error::EmptyActiveSet);
    }
    let d = x.dim();
    let mut coords = Vec::with_capacity(stats.active.len() * d);
    let mut weights = Vec::with_capacity(stats.active.len());
    for &m in &stats.active {
        let r = stats.rho[m];
        coords.extend((0..d).map(|l| stats.sx[(m, l)] / r));
        weights.push(r);
    }
    Ok(SoftTargets {
        targets: PointSet::from_raw(d, coords),
        weights,
        sources: stats.active.clone(),
    })
}

/// `sum_{m,n} P_mn ||x_n - u_m||^2` for a candidate configuration `u`.
pub fn pairwise_objective(stats: &PosteriorStats, x: &PointSet, u: &PointSet) -> f64 {
    let mut total = 0.0;
    for (n, xn) in x.iter().enumerate() {
        for (m, um) in u.iter().enumerate() {
            let pmn = stats.p[(m, n)];
            if pmn != 0.0 {
                total += pmn * xn.iter().zip(um).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            }
        }
    }
    total
}

/// `sum_{m active} rho_m ||z_m - u_m||^2`, with `u` indexed over the full moving set.
pub fn condensed_objective(targets: &SoftTargets, u: &PointSet) -> f64 {
    targets
        .sources
        .iter()
        .zip(targets.targets.iter())
        .zip(&targets.weights)
        .map(|((&m, z), r)| r * z.iter().zip(u.point(m)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum()
}
