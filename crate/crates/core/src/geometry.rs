//! Point-set containers, the shared normalization frame, and pointwise error.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered set of `d`-dimensional points stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    dim: usize,
    coords: Vec<f64>,
}

impl PointSet {
    /// Builds a set from flat row-major coordinates.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be at least 1".into()));
        }
        if coords.len() % dim != 0 {
            return Err(Error::InvalidArgument(format!(
                "{} coordinates do not divide into {}-dimensional points",
                coords.len(),
                dim
            )));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite { index: i / dim });
        }
        Ok(Self { dim, coords })
    }

    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let first = points.first().ok_or(Error::EmptyPointSet)?;
        let dim = first.as_ref().len();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            coords.extend_from_slice(p);
        }
        Self::new(dim, coords)
    }

    /// Builds a set from an `M x d` matrix, one point per row.
    pub fn from_matrix(m: &DMatrix<f64>) -> Result<Self> {
        let (rows, dim) = m.shape();
        let mut coords = Vec::with_capacity(rows * dim);
        for i in 0..rows {
            coords.extend(m.row(i).iter());
        }
        Self::new(dim, coords)
    }

    /// Constructs without the finiteness check; used for iterates that may diverge.
    pub(crate) fn from_raw(dim: usize, coords: Vec<f64>) -> Self {
        debug_assert_eq!(coords.len() % dim, 0);
        Self { dim, coords }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    /// `M x d` coordinate matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.len(), self.dim, &self.coords)
    }

    pub fn centroid(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        for p in self.iter() {
            for (acc, x) in c.iter_mut().zip(p) {
                *acc += x;
            }
        }
        let n = self.len() as f64;
        c.iter_mut().for_each(|v| *v /= n);
        c
    }

    /// Largest absolute coordinate after subtracting `center`.
    fn max_abs_about(&self, center: &[f64]) -> f64 {
        self.iter()
            .flat_map(|p| p.iter().zip(center).map(|(x, c)| (x - c).abs()))
            .fold(0.0, f64::max)
    }

    fn map_points(&self, f: impl Fn(&[f64], &mut [f64])) -> PointSet {
        let mut out = vec![0.0; self.coords.len()];
        for (src, dst) in self.iter().zip(out.chunks_exact_mut(self.dim)) {
            f(src, dst);
        }
        PointSet::from_raw(self.dim, out)
    }
}

/// Affine frame `p_original = center + scale * p_normalized`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationTransform {
    pub center: Vec<f64>,
    pub scale: f64,
}

impl NormalizationTransform {
    pub fn identity(dim: usize) -> Self {
        Self {
            center: vec![0.0; dim],
            scale: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn normalize(&self, p: &PointSet) -> Result<PointSet> {
        check_dim(self.dim(), p.dim())?;
        let inv = 1.0 / self.scale;
        Ok(p.map_points(|src, dst| {
            for ((d, s), c) in dst.iter_mut().zip(src).zip(&self.center) {
                *d = (s - c) * inv;
            }
        }))
    }
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn frame_for(sets: &[&PointSet]) -> NormalizationTransform {
    let dim = sets[0].dim();
    let total: usize = sets.iter().map(|s| s.len()).sum();
    let mut center = vec![0.0; dim];
    for s in sets {
        for p in s.iter() {
            for (acc, x) in center.iter_mut().zip(p) {
                *acc += x;
            }
        }
    }
    center.iter_mut().for_each(|c| *c /= total as f64);
    let scale = sets.iter().map(|s| s.max_abs_about(&center)).fold(0.0, f64::max);
    // All points coincide: keep the centering, skip the scaling.
    let scale = if scale > 0.0 { scale } else { 1.0 };
    NormalizationTransform { center, scale }
}

/// Maps both sets into one frame: the union centroid goes to the origin and the
/// largest absolute coordinate over the union becomes 1.
pub fn normalize_pair(fixed: &PointSet, moving: &PointSet) -> Result<(PointSet, PointSet, NormalizationTransform)> {
    if fixed.is_empty() || moving.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    check_dim(fixed.dim(), moving.dim())?;
    let t = frame_for(&[fixed, moving]);
    Ok((t.normalize(fixed)?, t.normalize(moving)?, t))
}

/// Single-set variant of [`normalize_pair`].
pub fn normalize_single(set: &PointSet) -> Result<(PointSet, NormalizationTransform)> {
    if set.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let t = frame_for(&[set]);
    Ok((t.normalize(set)?, t))
}

pub fn denormalize(p: &PointSet, t: &NormalizationTransform) -> Result<PointSet> {
    check_dim(t.dim(), p.dim())?;
    Ok(p.map_points(|src, dst| {
        for ((d, s), c) in dst.iter_mut().zip(src).zip(&t.center) {
            *d = c + t.scale * s;
        }
    }))
}

/// Pointwise RMSE between index-matched sets.
pub fn rmse(a: &PointSet, b: &PointSet) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    if a.len() != b.len() {
        return Err(Error::CardinalityMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let sum: f64 = a.coords().iter().zip(b.coords()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((sum / a.len() as f64).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(points: &[&[f64]]) -> PointSet {
        PointSet::from_points(points).unwrap()
    }

    #[test]
    fn symmetric_pair_normalizes_to_unit_points() {
        let (f, m, t) = normalize_pair(&set(&[&[2.0, 0.0]]), &set(&[&[0.0, 0.0]])).unwrap();
        assert_eq!(t.center, vec![1.0, 0.0]);
        assert_eq!(t.scale, 1.0);
        assert_eq!(f.point(0), &[1.0, 0.0]);
        assert_eq!(m.point(0), &[-1.0, 0.0]);
    }

    #[test]
    fn already_normalized_pair_is_identity_frame() {
        let f = set(&[&[1.0, 0.5], &[-1.0, 0.0]]);
        let m = set(&[&[0.0, -0.5], &[0.0, 0.0]]);
        let (_, _, t) = normalize_pair(&f, &m).unwrap();
        assert_eq!(t.center, vec![0.0, 0.0]);
        assert_eq!(t.scale, 1.0);
    }

    #[test]
    fn coincident_points_fall_back_to_unit_scale() {
        let f = set(&[&[3.0, 3.0]]);
        let (nf, nm, t) = normalize_pair(&f, &f.clone()).unwrap();
        assert_eq!(t.scale, 1.0);
        assert_eq!(nf.point(0), &[0.0, 0.0]);
        assert_eq!(nm.point(0), &[0.0, 0.0]);
    }

    #[test]
    fn normalize_rejects_bad_input() {
        let a = set(&[&[1.0, 2.0]]);
        let b = set(&[&[1.0, 2.0, 3.0]]);
        assert!(matches!(normalize_pair(&a, &b), Err(Error::DimensionMismatch { .. })));
        let empty = PointSet::new(2, vec![]).unwrap();
        assert_eq!(normalize_pair(&a, &empty), Err(Error::EmptyPointSet));
    }

    #[test]
    fn denormalize_direct_arithmetic() {
        let t = NormalizationTransform {
            center: vec![1.0, 1.0],
            scale: 2.0,
        };
        let p = denormalize(&set(&[&[0.5, 0.0]]), &t).unwrap();
        assert_eq!(p.point(0), &[2.0, 1.0]);
        let same = denormalize(&p, &NormalizationTransform::identity(2)).unwrap();
        assert_eq!(same, p);
        assert!(denormalize(&set(&[&[0.0]]), &t).is_err());
    }

    #[test]
    fn rmse_basic_cases() {
        let a = set(&[&[0.0, 0.0]]);
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        assert_eq!(rmse(&a, &set(&[&[3.0, 4.0]])).unwrap(), 5.0);
        let two = set(&[&[0.0, 0.0], &[1.0, 1.0]]);
        assert!(matches!(rmse(&a, &two), Err(Error::CardinalityMismatch { .. })));
    }

    #[test]
    fn rejects_non_finite_coordinates() {
        assert_eq!(
            PointSet::new(2, vec![0.0, 1.0, f64::NAN, 0.0]),
            Err(Error::NonFinite { index: 1 })
        );
    }

    #[test]
    fn matrix_round_trip_keeps_row_order() {
        let p = set(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let m = p.to_matrix();
        assert_eq!(m[(1, 0)], 3.0);
        assert_eq!(PointSet::from_matrix(&m).unwrap(), p);
    }
}
