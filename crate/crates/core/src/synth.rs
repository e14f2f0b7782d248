//! Seeded deformation generators: random analytic maps (model-matched) and a
//! two-center blend of quadratic fields with compactly supported weights
//! (model-mismatch).
//!
//! Every coefficient block draws from its own ChaCha8 stream of the seed, so
//! changing one range never shifts the draws of another block.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointSet;
use crate::multiindex::{factorial, BasisLayout};
use crate::sam::{identity_map, AnalyticMap};

const STREAM_TRANSLATION: u64 = 0;
const STREAM_LINEAR: u64 = 1;
const STREAM_QUADRATIC: u64 = 2;
const STREAM_DELTA1: u64 = 3;
const STREAM_DELTA2: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub gamma0: f64,
    pub gamma_q: f64,
    pub seed: u64,
    /// Order of the model-matched generator.
    pub analytic_order: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            gamma0: 0.4,
            gamma_q: 0.2,
            seed: 0,
            analytic_order: 2,
        }
    }
}

impl SynthParams {
    fn validate(&self) -> Result<()> {
        if !(self.gamma0 >= 0.0 && self.gamma0.is_finite() && self.gamma_q >= 0.0 && self.gamma_q.is_finite()) {
            return Err(Error::InvalidArgument(
                "gamma0 and gamma_q must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    fn stream(&self, id: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id);
        rng
    }
}

fn uniform(rng: &mut ChaCha8Rng, half_width: f64) -> f64 {
    if half_width == 0.0 {
        // Still consume the draw so streams stay aligned across ranges.
        let _: f64 = rng.random();
        0.0
    } else {
        rng.random_range(-half_width..=half_width)
    }
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, half_width: f64) -> DMatrix<f64> {
    // Row-major draw order.
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = uniform(rng, half_width);
        }
    }
    m
}

/// `exp(-1 / (1 - (r/sigma)^2))` inside the support, 0 outside.
pub fn bump(r: f64, sigma: f64) -> f64 {
    let s = r / sigma;
    if s < 1.0 {
        (-1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn weights_at(y: &[f64], c1: &[f64], c2: &[f64], sigma: f64) -> Option<(f64, f64)> {
    let b1 = bump(distance(y, c1), sigma);
    let b2 = bump(distance(y, c2), sigma);
    let total = b1 + b2;
    (total > 0.0).then(|| (b1 / total, b2 / total))
}

/// Normalized blend weights; errors if `y` lies outside both supports.
pub fn blend_weights(y: &[f64], c1: &[f64], c2: &[f64], sigma: f64) -> Result<(f64, f64)> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidArgument("bump radius must be positive".into()));
    }
    weights_at(y, c1, c2, sigma).ok_or(Error::Uncovered { index: 0 })
}

/// `tau(y) = A y + t + (w1 Q1 + w2 Q2) phi2(y - center)`, where the columns of
/// `Q` multiply the degree-2 Taylor terms `u1^2/2, u1 u2, u1 u3, u2^2/2, u2 u3, u3^2/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpBlendField {
    pub linear: DMatrix<f64>,
    pub translation: DVector<f64>,
    pub center: Vec<f64>,
    pub q1: DMatrix<f64>,
    pub q2: DMatrix<f64>,
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
    pub sigma_bump: f64,
}

impl BumpBlendField {
    /// The quadratic map obtained by freezing both weights to `(w1, w2)`.
    pub fn frozen(&self, w1: f64, w2: f64) -> Result<AnalyticMap> {
        let a0 = &self.linear * DVector::from_column_slice(&self.center) + &self.translation;
        AnalyticMap::new(
            self.center.clone(),
            vec![
                DMatrix::from_column_slice(3, 1, a0.as_slice()),
                self.linear.clone(),
                &self.q1 * w1 + &self.q2 * w2,
            ],
        )
    }
}

/// Draws a field in the frame of `model` (expected to be normalized). Blend
/// centers are the points of minimum and maximum first coordinate; the bump
/// radius is their distance.
pub fn make_bump_blend_field(model: &PointSet, params: &SynthParams) -> Result<BumpBlendField> {
    params.validate()?;
    if model.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: model.dim(),
        });
    }
    if model.len() < 2 {
        return Err(Error::InvalidArgument(
            "bump-blend field needs at least 2 model points".into(),
        ));
    }
    let by_x = |a: &&[f64], b: &&[f64]| a[0].total_cmp(&b[0]);
    let c1 = model.iter().min_by(by_x).expect("non-empty").to_vec();
    let c2 = model.iter().max_by(by_x).expect("non-empty").to_vec();
    let sigma_bump = distance(&c1, &c2);
    if !(sigma_bump > 0.0) {
        return Err(Error::InvalidArgument("blend centers coincide".into()));
    }

    let g0 = params.gamma0;
    let translation = DVector::from_iterator(
        3,
        (0..3).map({
            let mut rng = params.stream(STREAM_TRANSLATION);
            move |_| uniform(&mut rng, g0)
        }),
    );
    let mut linear = uniform_matrix(&mut params.stream(STREAM_LINEAR), 3, 3, g0);
    linear.fill_diagonal(1.0);
    let q_bar = uniform_matrix(&mut params.stream(STREAM_QUADRATIC), 3, 6, g0);
    let q1 = &q_bar + uniform_matrix(&mut params.stream(STREAM_DELTA1), 3, 6, params.gamma_q);
    let q2 = &q_bar + uniform_matrix(&mut params.stream(STREAM_DELTA2), 3, 6, params.gamma_q);

    Ok(BumpBlendField {
        linear,
        translation,
        center: vec![0.0; 3],
        q1,
        q2,
        c1,
        c2,
        sigma_bump,
    })
}

pub fn apply_bump_blend(field: &BumpBlendField, pts: &PointSet) -> Result<PointSet> {
    if pts.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: pts.dim(),
        });
    }
    let layout = BasisLayout::new(3, 2)?;
    let quad = layout.group(2);
    let mut phi = vec![0.0; layout.len()];
    let mut coords = Vec::with_capacity(pts.coords().len());
    for (index, y) in pts.iter().enumerate() {
        let (w1, w2) = weights_at(y, &field.c1, &field.c2, field.sigma_bump).ok_or(Error::Uncovered { index })?;
        layout.eval_into(y, &field.center, &mut phi);
        let phi2 = &phi[quad.clone()];
        for i in 0..3 {
            let mut v = field.translation[i];
            for j in 0..3 {
                v += field.linear[(i, j)] * y[j];
            }
            for (k, p) in phi2.iter().enumerate() {
                v += (w1 * field.q1[(i, k)] + w2 * field.q2[(i, k)]) * p;
            }
            coords.push(v);
        }
    }
    PointSet::new(3, coords)
}

/// Identity plus, for each order `r`, coefficients uniform on
/// `[-gamma0 / r!, gamma0 / r!]`, expanded about the origin.
pub fn random_analytic_deformation(d: usize, order: usize, params: &SynthParams) -> Result<AnalyticMap> {
    params.validate()?;
    if order == 0 {
        return Err(Error::InvalidArgument("deformation order must be at least 1".into()));
    }
    let mut map = identity_map(d, order, vec![0.0; d])?;
    for (r, block) in map.blocks_mut().iter_mut().enumerate() {
        let mut rng = params.stream(r as u64);
        let width = params.gamma0 / factorial(r);
        let draw = uniform_matrix(&mut rng, block.nrows(), block.ncols(), width);
        *block += draw;
    }
    Ok(map)
}
