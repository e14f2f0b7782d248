//! Structured analytic maps: vector-valued truncated Taylor expansions
//! `y -> sum_a a_a (y - c)^a / a!` about a fixed center.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{weighted_fit, FitOptions, WeightedFitProblem};
use crate::geometry::PointSet;
use crate::multiindex::{basis_size, BasisLayout};

/// Coefficients are stored per order: `blocks[r]` is `d x C(d, r)`, one column
/// per degree-`r` multi-index in [`BasisLayout`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "MapRecord", try_from = "MapRecord")]
pub struct AnalyticMap {
    center: Vec<f64>,
    blocks: Vec<DMatrix<f64>>,
    layout: BasisLayout,
}

/// Export shape: `blocks[r][j]` is the output vector of the `j`-th degree-`r` term.
#[derive(Serialize, Deserialize)]
struct MapRecord {
    dim: usize,
    order: usize,
    center: Vec<f64>,
    blocks: Vec<Vec<Vec<f64>>>,
}

impl From<AnalyticMap> for MapRecord {
    fn from(m: AnalyticMap) -> Self {
        MapRecord {
            dim: m.dim(),
            order: m.order(),
            blocks: m
                .blocks
                .iter()
                .map(|b| b.column_iter().map(|c| c.iter().copied().collect()).collect())
                .collect(),
            center: m.center,
        }
    }
}

impl TryFrom<MapRecord> for AnalyticMap {
    type Error = Error;

    fn try_from(r: MapRecord) -> Result<Self> {
        if r.blocks.len() != r.order + 1 {
            return Err(Error::InvalidArgument(format!(
                "order {} needs {} blocks, found {}",
                r.order,
                r.order + 1,
                r.blocks.len()
            )));
        }
        let mut blocks = Vec::with_capacity(r.blocks.len());
        for cols in &r.blocks {
            if cols.iter().any(|c| c.len() != r.dim) {
                return Err(Error::InvalidArgument("coefficient vector length".into()));
            }
            let flat: Vec<f64> = cols.iter().flatten().copied().collect();
            blocks.push(DMatrix::from_column_slice(r.dim, cols.len(), &flat));
        }
        AnalyticMap::new(r.center, blocks)
    }
}

impl AnalyticMap {
    pub fn new(center: Vec<f64>, blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        let dim = center.len();
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("at least the constant block is required".into()));
        }
        let layout = BasisLayout::new(dim, blocks.len() - 1)?;
        for (r, b) in blocks.iter().enumerate() {
            let cols = layout.group(r).len();
            if b.shape() != (dim, cols) {
                return Err(Error::InvalidArgument(format!(
                    "block {r} has shape {:?}, expected ({dim}, {cols})",
                    b.shape()
                )));
            }
        }
        Ok(Self { center, blocks, layout })
    }

    pub fn zero(dim: usize, order: usize, center: Vec<f64>) -> Result<Self> {
        if center.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: center.len(),
            });
        }
        let layout = BasisLayout::new(dim, order)?;
        let blocks = (0..=order)
            .map(|r| DMatrix::zeros(dim, layout.group(r).len()))
            .collect();
        Self::new(center, blocks)
    }

    /// Builds a map from the flattened `d x S` coefficient matrix.
    pub fn from_flat(order: usize, center: Vec<f64>, flat: &DMatrix<f64>) -> Result<Self> {
        let dim = center.len();
        let layout = BasisLayout::new(dim, order)?;
        if flat.shape() != (dim, layout.len()) {
            return Err(Error::InvalidArgument(format!(
                "flat coefficients have shape {:?}, expected ({dim}, {})",
                flat.shape(),
                layout.len()
            )));
        }
        let blocks = (0..=order)
            .map(|r| {
                let g = layout.group(r);
                flat.columns(g.start, g.len()).into_owned()
            })
            .collect();
        Ok(Self { center, blocks, layout })
    }

    /// Affine map `y -> B y + b` written about `center`.
    pub fn from_affine(linear: &DMatrix<f64>, offset: &DVector<f64>, center: Vec<f64>) -> Result<Self> {
        let dim = center.len();
        if linear.shape() != (dim, dim) || offset.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: offset.len(),
            });
        }
        let c = DVector::from_column_slice(&center);
        let constant = linear * &c + offset;
        let blocks = vec![DMatrix::from_column_slice(dim, 1, constant.as_slice()), linear.clone()];
        Self::new(center, blocks)
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn order(&self) -> usize {
        self.blocks.len() - 1
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [DMatrix<f64>] {
        &mut self.blocks
    }

    pub fn layout(&self) -> &BasisLayout {
        &self.layout
    }

    /// Number of scalar coefficients, `d * S_{d,q}`.
    pub fn coefficient_count(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }

    /// Concatenated `d x S` coefficient matrix in layout order.
    pub fn flat(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim(), self.layout.len());
        for (r, b) in self.blocks.iter().enumerate() {
            let g = self.layout.group(r);
            out.columns_mut(g.start, g.len()).copy_from(b);
        }
        out
    }

    fn eval_with(&self, flat: &DMatrix<f64>, y: &[f64], phi: &mut [f64], out: &mut [f64]) {
        self.layout.eval_into(y, &self.center, phi);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, &p) in phi.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += flat[(i, j)] * p;
            }
        }
    }

    pub fn eval(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: y.len(),
            });
        }
        let mut phi = vec![0.0; self.layout.len()];
        let mut out = vec![0.0; self.dim()];
        self.eval_with(&self.flat(), y, &mut phi, &mut out);
        Ok(out)
    }

    /// Maps every point of `pts`. Points are independent, so the work is split
    /// across the current rayon pool without changing the result.
    pub fn apply(&self, pts: &PointSet) -> Result<PointSet> {
        let d = self.dim();
        if pts.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: pts.dim(),
            });
        }
        let flat = self.flat();
        let mut out = vec![0.0; pts.coords().len()];
        out.par_chunks_mut(d).zip(pts.coords().par_chunks(d)).for_each_init(
            || vec![0.0; self.layout.len()],
            |phi, (dst, src)| self.eval_with(&flat, src, phi, dst),
        );
        Ok(PointSet::from_raw(d, out))
    }

    /// `(B, b)` with `map(y) = B y + b`; only defined for first-order maps.
    pub fn as_affine(&self) -> Result<(DMatrix<f64>, DVector<f64>)> {
        if self.order() != 1 {
            return Err(Error::InvalidArgument(format!(
                "affine extraction needs order 1, map has order {}",
                self.order()
            )));
        }
        let linear = self.blocks[1].clone();
        let constant = self.blocks[0].column(0).into_owned();
        let offset = constant - &linear * DVector::from_column_slice(&self.center);
        Ok((linear, offset))
    }
}

/// The identity as an order-`q` map about `center`.
pub fn identity_map(dim: usize, order: usize, center: Vec<f64>) -> Result<AnalyticMap> {
    if order == 0 {
        return Err(Error::InvalidArgument("the identity needs order >= 1".into()));
    }
    let mut map = AnalyticMap::zero(dim, order, center)?;
    let c = map.center.clone();
    map.blocks[0].column_mut(0).copy_from_slice(&c);
    map.blocks[1] = DMatrix::identity(dim, dim);
    Ok(map)
}

/// Fits one map of order `q_inner * q_outer` to samples of `outer(inner(s))`
/// and returns the largest pointwise fitting residual. A residual near zero
/// confirms that composition stays inside the product-order space.
pub fn compose_sampled_degree_check(inner: &AnalyticMap, outer: &AnalyticMap, samples: &PointSet) -> Result<f64> {
    let d = inner.dim();
    if outer.dim() != d || samples.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if outer.dim() != d { outer.dim() } else { samples.dim() },
        });
    }
    let order = inner.order() * outer.order();
    let required = basis_size(d, order)?;
    if samples.len() < required {
        return Err(Error::Infeasible {
            available: samples.len(),
            required,
            order,
        });
    }
    let composed = outer.apply(&inner.apply(samples)?)?;
    let problem = WeightedFitProblem::new(
        samples.clone(),
        composed.clone(),
        vec![1.0; samples.len()],
        inner.center().to_vec(),
        order,
    )?;
    let fitted = weighted_fit(&problem, &FitOptions::default())?.map;
    let reproduced = fitted.apply(samples)?;
    Ok(reproduced
        .iter()
        .zip(composed.iter())
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
        .fold(0.0, f64::max))
}
