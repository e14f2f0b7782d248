//! Weighted least-squares estimation of an [`AnalyticMap`] from
//! source/target pairs: the M-step of the analytic registration loop.
//!
//! Two assemblies of the same problem are provided. [`weighted_fit`] uses the
//! shared `M_s x S` Taylor design with all `d` output coordinates as right-hand
//! sides. [`weighted_fit_vectorized`] and [`correction_fit`] use the stacked
//! `d M_s x d S` Kronecker system, where each point contributes the block
//! `phi^T (x) I_d`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::PointSet;
use crate::linalg::{least_squares, RankPolicy, Solver};
use crate::multiindex::{basis_size, BasisLayout};
use crate::sam::AnalyticMap;

#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Relative singular-value cutoff on the column-equilibrated design.
    pub rank_tol: f64,
    pub policy: RankPolicy,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            rank_tol: 1e-10,
            policy: RankPolicy::Strict,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub map: AnalyticMap,
    pub rank: usize,
    pub solver: Solver,
}

#[derive(Debug, Clone)]
pub struct WeightedFitProblem {
    sources: PointSet,
    targets: PointSet,
    weights: Vec<f64>,
    center: Vec<f64>,
    order: usize,
}

impl WeightedFitProblem {
    pub fn new(
        sources: PointSet,
        targets: PointSet,
        weights: Vec<f64>,
        center: Vec<f64>,
        order: usize,
    ) -> Result<Self> {
        let d = sources.dim();
        for got in [targets.dim(), center.len()] {
            if got != d {
                return Err(Error::DimensionMismatch { expected: d, got });
            }
        }
        if targets.len() != sources.len() || weights.len() != sources.len() {
            return Err(Error::CardinalityMismatch {
                left: sources.len(),
                right: if targets.len() != sources.len() {
                    targets.len()
                } else {
                    weights.len()
                },
            });
        }
        if let Some(bad) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "fit weights must be positive, found {bad}"
            )));
        }
        let required = basis_size(d, order)?;
        if sources.len() < required {
            return Err(Error::Infeasible {
                available: sources.len(),
                required,
                order,
            });
        }
        Ok(Self {
            sources,
            targets,
            weights,
            center,
            order,
        })
    }

    pub fn dim(&self) -> usize {
        self.sources.dim()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn sources(&self) -> &PointSet {
        &self.sources
    }

    pub fn targets(&self) -> &PointSet {
        &self.targets
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// `Phi`: one row `phi_q(y_m; c)^T` per source point.
    pub fn design(&self) -> DMatrix<f64> {
        let layout = BasisLayout::new(self.dim(), self.order).expect("validated in new");
        let mut phi = DMatrix::zeros(self.len(), layout.len());
        let mut row = vec![0.0; layout.len()];
        for (m, y) in self.sources.iter().enumerate() {
            layout.eval_into(y, &self.center, &mut row);
            for (j, v) in row.iter().enumerate() {
                phi[(m, j)] = *v;
            }
        }
        phi
    }

    /// `sum_m w_m ||z_m - map(y_m)||^2`
    pub fn objective(&self, map: &AnalyticMap) -> Result<f64> {
        let mapped = map.apply(&self.sources)?;
        Ok(mapped
            .iter()
            .zip(self.targets.iter())
            .zip(&self.weights)
            .map(|((u, z), w)| w * u.iter().zip(z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .sum())
    }

    fn stacked_system(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let d = self.dim();
        let phi = self.design();
        let s = phi.ncols();
        let mut b = DMatrix::zeros(d * self.len(), d * s);
        let mut ell = DMatrix::zeros(d * self.len(), 1);
        for (m, z) in self.targets.iter().enumerate() {
            let sw = self.weights[m].sqrt();
            for i in 0..d {
                for j in 0..s {
                    b[(m * d + i, j * d + i)] = sw * phi[(m, j)];
                }
                ell[(m * d + i, 0)] = sw * z[i];
            }
        }
        (b, ell)
    }
}

/// Largest order `q <= q_raw` whose basis fits in `samples` equations.
pub fn feasible_order(samples: usize, d: usize, q_raw: usize) -> Result<usize> {
    if q_raw == 0 {
        return Err(Error::InvalidArgument("requested order must be at least 1".into()));
    }
    let affine = basis_size(d, 1)?;
    if samples < affine {
        return Err(Error::Infeasible {
            available: samples,
            required: affine,
            order: 1,
        });
    }
    let mut q = 1;
    while q < q_raw && basis_size(d, q + 1)? <= samples {
        q += 1;
    }
    Ok(q)
}

/// Minimizes `sum_m w_m ||z_m - A phi_q(y_m; c)||^2` with every point equation
/// scaled by `sqrt(w_m)`.
pub fn weighted_fit(problem: &WeightedFitProblem, opts: &FitOptions) -> Result<FitOutcome> {
    let mut design = problem.design();
    let mut rhs = problem.targets.to_matrix();
    for (m, w) in problem.weights.iter().enumerate() {
        let sw = w.sqrt();
        design.row_mut(m).scale_mut(sw);
        rhs.row_mut(m).scale_mut(sw);
    }
    let sol = least_squares(&design, &rhs, opts.rank_tol, opts.policy)?;
    let map = AnalyticMap::from_flat(problem.order, problem.center.clone(), &sol.x.transpose())?;
    Ok(FitOutcome {
        map,
        rank: sol.rank,
        solver: sol.solver,
    })
}

fn map_from_theta(problem: &WeightedFitProblem, theta: &DMatrix<f64>) -> Result<AnalyticMap> {
    let d = problem.dim();
    let flat = DMatrix::from_column_slice(d, theta.nrows() / d, theta.as_slice());
    AnalyticMap::from_flat(problem.order, problem.center.clone(), &flat)
}

/// Same minimizer as [`weighted_fit`], assembled as `B theta ~ ell` with
/// `theta = vec(A)`.
pub fn weighted_fit_vectorized(problem: &WeightedFitProblem, opts: &FitOptions) -> Result<FitOutcome> {
    let (b, ell) = problem.stacked_system();
    let sol = least_squares(&b, &ell, opts.rank_tol, opts.policy)?;
    Ok(FitOutcome {
        map: map_from_theta(problem, &sol.x)?,
        rank: sol.rank / problem.dim(),
        solver: sol.solver,
    })
}

/// One correction step from `initial`: solve for `delta` against the residual
/// `ell - B theta0` and return `theta0 + delta`. Since the model is linear in
/// its coefficients this lands on the weighted least-squares solution.
pub fn correction_fit(problem: &WeightedFitProblem, initial: &AnalyticMap, opts: &FitOptions) -> Result<FitOutcome> {
    if initial.dim() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: initial.dim(),
        });
    }
    if initial.order() != problem.order || initial.center() != problem.center() {
        return Err(Error::InvalidArgument(
            "initial map must share order and center with the problem".into(),
        ));
    }
    let (b, ell) = problem.stacked_system();
    let flat = initial.flat();
    let theta0 = DMatrix::from_column_slice(flat.len(), 1, flat.as_slice());
    let residual = ell - &b * &theta0;
    let sol = least_squares(&b, &residual, opts.rank_tol, opts.policy)?;
    Ok(FitOutcome {
        map: map_from_theta(problem, &(theta0 + sol.x))?,
        rank: sol.rank / problem.dim(),
        solver: sol.solver,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sam::identity_map;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> PointSet {
        PointSet::new(dim, (0..dim * n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    fn random_map(rng: &mut ChaCha8Rng, dim: usize, order: usize) -> AnalyticMap {
        let mut m = AnalyticMap::zero(dim, order, vec![0.0; dim]).unwrap();
        for b in m.blocks_mut() {
            b.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
        }
        m
    }

    fn planted(seed: u64, dim: usize, order: usize, n: usize) -> (WeightedFitProblem, AnalyticMap) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = random_map(&mut rng, dim, order);
        let src = random_points(&mut rng, dim, n);
        let tgt = truth.apply(&src).unwrap();
        let w = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
        let p = WeightedFitProblem::new(src, tgt, w, vec![0.0; dim], order).unwrap();
        (p, truth)
    }

    #[test]
    fn feasible_order_examples() {
        assert_eq!(feasible_order(6, 2, 10).unwrap(), 2);
        assert_eq!(feasible_order(286, 3, 10).unwrap(), 10);
        assert_eq!(feasible_order(285, 3, 10).unwrap(), 9);
        assert_eq!(feasible_order(1000, 2, 5).unwrap(), 5);
        assert!(matches!(
            feasible_order(2, 2, 3),
            Err(Error::Infeasible { required: 3, .. })
        ));
    }

    #[test]
    fn problem_validation() {
        let src = PointSet::from_points(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let ok = WeightedFitProblem::new(src.clone(), src.clone(), vec![1.0; 3], vec![0.0; 2], 1);
        assert!(ok.is_ok());
        let zero_w = WeightedFitProblem::new(src.clone(), src.clone(), vec![1.0, 0.0, 1.0], vec![0.0; 2], 1);
        assert!(matches!(zero_w, Err(Error::InvalidArgument(_))));
        let too_high = WeightedFitProblem::new(src.clone(), src.clone(), vec![1.0; 3], vec![0.0; 2], 2);
        assert!(matches!(too_high, Err(Error::Infeasible { .. })));
    }

    #[test]
    fn planted_quadratic_is_recovered() {
        let (p, truth) = planted(4, 2, 2, 60);
        let fit = weighted_fit(&p, &FitOptions::default()).unwrap();
        assert!((fit.map.flat() - truth.flat()).amax() < 1e-8);
        assert!(p.objective(&fit.map).unwrap() < 1e-10);
        assert_eq!(fit.rank, 6);
    }

    #[test]
    fn exact_affine_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.1 } else { rng.random_range(-0.3..0.3) });
        let t = DVector::from_vec(vec![0.2, -0.1, 0.4]);
        let src = random_points(&mut rng, 3, 12);
        let truth = AnalyticMap::from_affine(&b, &t, vec![0.0; 3]).unwrap();
        let tgt = truth.apply(&src).unwrap();
        let p = WeightedFitProblem::new(src, tgt, vec![1.0; 12], vec![0.0; 3], 1).unwrap();
        let (fb, ft) = weighted_fit(&p, &FitOptions::default())
            .unwrap()
            .map
            .as_affine()
            .unwrap();
        assert!((fb - b).amax() < 1e-10);
        assert!((ft - t).amax() < 1e-10);
    }

    #[test]
    fn minimal_affine_set_interpolates() {
        let src = PointSet::from_points(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let tgt = PointSet::from_points(&[[0.5, 0.5], [2.0, 0.0], [-1.0, 3.0]]).unwrap();
        let p = WeightedFitProblem::new(src.clone(), tgt.clone(), vec![1.0; 3], vec![0.0; 2], 1).unwrap();
        let map = weighted_fit(&p, &FitOptions::default()).unwrap().map;
        let out = map.apply(&src).unwrap();
        for (a, b) in out.coords().iter().zip(tgt.coords()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn duplicated_half_weights_match_single_unit_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let src = random_points(&mut rng, 2, 15);
        let tgt = random_points(&mut rng, 2, 15);
        let single = WeightedFitProblem::new(src.clone(), tgt.clone(), vec![1.0; 15], vec![0.0; 2], 2).unwrap();
        let dup_src = PointSet::new(2, [src.coords(), src.coords()].concat()).unwrap();
        let dup_tgt = PointSet::new(2, [tgt.coords(), tgt.coords()].concat()).unwrap();
        let double = WeightedFitProblem::new(dup_src, dup_tgt, vec![0.5; 30], vec![0.0; 2], 2).unwrap();
        let a = weighted_fit(&single, &FitOptions::default()).unwrap().map;
        let b = weighted_fit(&double, &FitOptions::default()).unwrap().map;
        assert!((a.flat() - b.flat()).amax() < 1e-12);
    }

    #[test]
    fn collinear_sources_are_rank_deficient() {
        let src = PointSet::from_points(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]).unwrap();
        let p = WeightedFitProblem::new(src.clone(), src, vec![1.0; 4], vec![0.0; 2], 1).unwrap();
        let err = weighted_fit(&p, &FitOptions::default()).unwrap_err();
        assert_eq!(err, Error::RankDeficient { rank: 2, columns: 3 });
        let relaxed = FitOptions {
            policy: RankPolicy::MinimumNorm,
            ..FitOptions::default()
        };
        let fit = weighted_fit(&p, &relaxed).unwrap();
        assert_eq!(fit.rank, 2);
        assert!(p.objective(&fit.map).unwrap() < 1e-20);
    }

    #[test]
    fn correction_from_exact_solution_is_a_no_op() {
        let (p, _) = planted(9, 3, 2, 40);
        let exact = weighted_fit(&p, &FitOptions::default()).unwrap().map;
        let again = correction_fit(&p, &exact, &FitOptions::default()).unwrap().map;
        assert!((again.flat() - exact.flat()).amax() < 1e-12);
    }

    #[test]
    fn correction_from_zero_and_random_starts() {
        let (p, _) = planted(10, 2, 3, 50);
        // Perturb targets so the optimum has a nonzero residual.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let noisy: Vec<f64> = p
            .targets()
            .coords()
            .iter()
            .map(|v| v + rng.random_range(-0.05..0.05))
            .collect();
        let p = WeightedFitProblem::new(
            p.sources().clone(),
            PointSet::new(2, noisy).unwrap(),
            p.weights().to_vec(),
            vec![0.0; 2],
            3,
        )
        .unwrap();
        let reference = weighted_fit(&p, &FitOptions::default()).unwrap().map;
        let zero = AnalyticMap::zero(2, 3, vec![0.0; 2]).unwrap();
        let from_zero = correction_fit(&p, &zero, &FitOptions::default()).unwrap().map;
        assert!((from_zero.flat() - reference.flat()).amax() < 1e-10);
        let start = random_map(&mut rng, 2, 3);
        let from_random = correction_fit(&p, &start, &FitOptions::default()).unwrap().map;
        assert!((from_random.flat() - reference.flat()).amax() < 1e-8);
    }

    #[test]
    fn correction_rejects_mismatched_initial_map() {
        let (p, _) = planted(12, 2, 2, 20);
        let wrong = identity_map(2, 1, vec![0.0; 2]).unwrap();
        assert!(correction_fit(&p, &wrong, &FitOptions::default()).is_err());
    }
}
