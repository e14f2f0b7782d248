//! Multi-index enumeration and the scaled Taylor basis `(y - c)^a / a!`.
//!
//! Indices are graded by total degree; within one degree they are listed in
//! descending lexicographic order of the exponent tuple, so for `d = 2` the
//! second-order block reads `x^2, xy, y^2`. Every consumer (basis evaluation,
//! design assembly, coefficient blocks) uses the same [`BasisLayout`].

use crate::error::{Error, Result};

/// Exponent tuple `(a_1, ..., a_d)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn degree(&self) -> usize {
        self.0.iter().map(|&a| a as usize).sum()
    }

    /// `a! = a_1! ... a_d!`
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&a| factorial(a as usize)).product()
    }
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

fn binomial(n: usize, k: usize) -> Result<usize> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // Exact at every step: the running product is C(n - k + i + 1, i + 1).
        acc = acc * (n - k + i + 1) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return Err(Error::InvalidArgument(format!("C({n}, {k}) overflows")));
        }
    }
    Ok(acc as usize)
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be at least 1".into()));
    }
    Ok(())
}

/// Number of monomials of exact total degree `r` in `d` variables.
pub fn monomial_count(d: usize, r: usize) -> Result<usize> {
    check_dim(d)?;
    binomial(r + d - 1, d - 1)
}

/// Number of basis terms with total degree at most `q`.
pub fn basis_size(d: usize, q: usize) -> Result<usize> {
    check_dim(d)?;
    binomial(q + d, d)
}

/// Scalar coefficient count of a `d`-vector-valued map of order `q`.
pub fn param_count(d: usize, q: usize) -> Result<usize> {
    basis_size(d, q)?
        .checked_mul(d)
        .ok_or_else(|| Error::InvalidArgument("parameter count overflows".into()))
}

fn push_degree(d: usize, remaining: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if prefix.len() + 1 == d {
        prefix.push(remaining);
        out.push(MultiIndex(prefix.clone()));
        prefix.pop();
        return;
    }
    for first in (0..=remaining).rev() {
        prefix.push(first);
        push_degree(d, remaining - first, prefix, out);
        prefix.pop();
    }
}

/// All multi-indices of exact degree `r`, descending lexicographic.
pub fn indices_of_degree(d: usize, r: usize) -> Result<Vec<MultiIndex>> {
    check_dim(d)?;
    let mut out = Vec::with_capacity(monomial_count(d, r)?);
    push_degree(d, r as u32, &mut Vec::with_capacity(d), &mut out);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisLayout {
    dim: usize,
    order: usize,
    indices: Vec<MultiIndex>,
    /// `offsets[r]..offsets[r + 1]` is the degree-`r` group.
    offsets: Vec<usize>,
}

impl BasisLayout {
    pub fn new(dim: usize, order: usize) -> Result<Self> {
        let mut indices = Vec::with_capacity(basis_size(dim, order)?);
        let mut offsets = Vec::with_capacity(order + 2);
        for r in 0..=order {
            offsets.push(indices.len());
            indices.extend(indices_of_degree(dim, r)?);
        }
        offsets.push(indices.len());
        Ok(Self {
            dim,
            order,
            indices,
            offsets,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// Position range of the degree-`r` group.
    pub fn group(&self, r: usize) -> std::ops::Range<usize> {
        self.offsets[r]..self.offsets[r + 1]
    }

    /// Evaluates `phi_q(y; c)` into `out` (length `len()`).
    pub fn eval_into(&self, y: &[f64], c: &[f64], out: &mut [f64]) {
        debug_assert_eq!(y.len(), self.dim);
        debug_assert_eq!(out.len(), self.len());
        let q = self.order;
        // scaled[l * (q + 1) + k] = delta_l^k / k!
        let mut scaled = vec![1.0; self.dim * (q + 1)];
        for l in 0..self.dim {
            let delta = y[l] - c[l];
            let row = &mut scaled[l * (q + 1)..(l + 1) * (q + 1)];
            for k in 1..=q {
                row[k] = row[k - 1] * delta / k as f64;
            }
        }
        for (slot, alpha) in out.iter_mut().zip(&self.indices) {
            *slot = alpha
                .0
                .iter()
                .enumerate()
                .map(|(l, &a)| scaled[l * (q + 1) + a as usize])
                .product();
        }
    }
}

/// Basis vector `phi_q(y; c)` with entries `(y - c)^a / a!` in layout order.
pub fn eval_basis(y: &[f64], c: &[f64], layout: &BasisLayout) -> Result<Vec<f64>> {
    for v in [y, c] {
        if v.len() != layout.dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.dim(),
                got: v.len(),
            });
        }
    }
    let mut out = vec![0.0; layout.len()];
    layout.eval_into(y, c, &mut out);
    Ok(out)
}
