//! Dense least squares: Householder QR with column-norm pivoting, falling back
//! to a truncated SVD when the pivoted factorization reports near-degeneracy.

use nalgebra::{DMatrix, SVD};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankPolicy {
    /// Fail with [`Error::RankDeficient`] when the numerical rank is short.
    Strict,
    /// Return the minimum-norm solution on the numerically retained subspace.
    MinimumNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    PivotedQr,
    Svd,
}

#[derive(Debug, Clone)]
pub struct LstsqSolution {
    /// `n x k` minimizer of `||A X - B||_F`.
    pub x: DMatrix<f64>,
    pub rank: usize,
    pub solver: Solver,
}

/// Solves `min ||A X - B||_F`. Columns of `A` are equilibrated to unit norm
/// before factorization, so `rel_tol` applies to the scaled problem.
pub fn least_squares(a: &DMatrix<f64>, b: &DMatrix<f64>, rel_tol: f64, policy: RankPolicy) -> Result<LstsqSolution> {
    let (m, n) = a.shape();
    assert_eq!(b.nrows(), m, "right-hand side row count");
    if n == 0 {
        return Ok(LstsqSolution {
            x: DMatrix::zeros(0, b.ncols()),
            rank: 0,
            solver: Solver::PivotedQr,
        });
    }

    let col_scale: Vec<f64> = a
        .column_iter()
        .map(|c| {
            let s = c.norm();
            if s > 0.0 {
                1.0 / s
            } else {
                1.0
            }
        })
        .collect();
    let mut scaled = a.clone();
    for (j, s) in col_scale.iter().enumerate() {
        scaled.column_mut(j).scale_mut(*s);
    }

    let mut sol = if m >= n {
        match pivoted_qr_solve(&scaled, b, rel_tol) {
            Some(x) => LstsqSolution {
                x,
                rank: n,
                solver: Solver::PivotedQr,
            },
            None => svd_solve(scaled, b, rel_tol)?,
        }
    } else {
        svd_solve(scaled, b, rel_tol)?
    };

    if sol.rank < n && policy == RankPolicy::Strict {
        return Err(Error::RankDeficient {
            rank: sol.rank,
            columns: n,
        });
    }
    for (j, s) in col_scale.iter().enumerate() {
        sol.x.row_mut(j).scale_mut(*s);
    }
    Ok(sol)
}

/// Returns `None` when some pivot falls below `rel_tol * |R_00|`.
fn pivoted_qr_solve(a: &DMatrix<f64>, b: &DMatrix<f64>, rel_tol: f64) -> Option<DMatrix<f64>> {
    let (m, n) = a.shape();
    let k = b.ncols();
    let mut r = a.clone();
    let mut qtb = b.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut v = vec![0.0; m];
    let mut first_pivot = 0.0;

    for j in 0..n {
        // Pivot on the largest remaining column norm.
        let (p, norm_sq) = (j..n)
            .map(|c| (c, r.view((j, c), (m - j, 1)).norm_squared()))
            .fold((j, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if p != j {
            r.swap_columns(j, p);
            perm.swap(j, p);
        }
        let norm = norm_sq.sqrt();
        if j == 0 {
            first_pivot = norm;
        }
        if norm == 0.0 || norm <= rel_tol * first_pivot {
            return None;
        }

        let x0 = r[(j, j)];
        let alpha = if x0 >= 0.0 { -norm } else { norm };
        let len = m - j;
        for i in 0..len {
            v[i] = r[(j + i, j)];
        }
        v[0] -= alpha;
        let v_norm_sq: f64 = v[..len].iter().map(|x| x * x).sum();
        if v_norm_sq > 0.0 {
            let apply = |mat: &mut DMatrix<f64>, col: usize| {
                let dot: f64 = (0..len).map(|i| v[i] * mat[(j + i, col)]).sum();
                let f = 2.0 * dot / v_norm_sq;
                for i in 0..len {
                    mat[(j + i, col)] -= f * v[i];
                }
            };
            for c in (j + 1)..n {
                apply(&mut r, c);
            }
            for c in 0..k {
                apply(&mut qtb, c);
            }
        }
        r[(j, j)] = alpha;
        for i in (j + 1)..m {
            r[(i, j)] = 0.0;
        }
    }

    // Back substitution on the leading n x n triangle.
    let mut z = qtb.rows(0, n).into_owned();
    for c in 0..k {
        for i in (0..n).rev() {
            let mut s = z[(i, c)];
            for l in (i + 1)..n {
                s -= r[(i, l)] * z[(l, c)];
            }
            z[(i, c)] = s / r[(i, i)];
        }
    }
    let mut x = DMatrix::zeros(n, k);
    for (row, &orig) in perm.iter().enumerate() {
        x.row_mut(orig).copy_from(&z.row(row));
    }
    Some(x)
}

fn svd_solve(a: DMatrix<f64>, b: &DMatrix<f64>, rel_tol: f64) -> Result<LstsqSolution> {
    let svd = SVD::new(a, true, true);
    let sigma_max = svd.singular_values.max();
    let eps = rel_tol * sigma_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    let x = svd.solve(b, eps).map_err(|_| Error::Singular("SVD least squares"))?;
    Ok(LstsqSolution {
        x,
        rank,
        solver: Solver::Svd,
    })
}
