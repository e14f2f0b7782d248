//! The analytic EM loop: CPD posteriors, barycentric condensation, a weighted
//! Taylor-map M-step applied compositionally, and the variance update.

mod schedule;
mod trace;

pub use schedule::{build_schedule, fixed_schedule, DegreeSchedule};
pub(crate) use trace::{internal_rebound, Tracker};
pub use trace::{rebound_check, IterationRecord, ReboundGuard, RegistrationTrace, StopReason};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{feasible_order, weighted_fit, FitOptions, WeightedFitProblem};
use crate::geometry::PointSet;
use crate::linalg::RankPolicy;
use crate::posterior::{
    compute_posterior, condensed_objective, pairwise_objective, soft_targets, PosteriorStats, DEFAULT_EPS_RHO,
};
use crate::sam::AnalyticMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// Orders `1..=q_max` with decreasing stage lengths.
    Continuation,
    /// One order for every iteration.
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub t_max: usize,
    pub q_max: usize,
    pub w: f64,
    pub eps_rho: f64,
    pub tol: f64,
    pub sigma2_floor: f64,
    pub schedule: ScheduleKind,
    /// Relative singular-value cutoff for the M-step solver.
    pub rank_tol: f64,
    /// `Strict` aborts the run on a numerically rank-deficient design;
    /// `MinimumNorm` keeps going on the retained subspace.
    pub rank_policy: RankPolicy,
    /// Guard on the external RMSE; only consulted when it is recorded.
    pub rebound: Option<ReboundGuard>,
    /// Same test applied to `E_soft`. Off by default.
    pub internal_rebound: Option<ReboundGuard>,
    /// Track external RMSE against the fixed set, index by index.
    pub record_external_rmse: bool,
    /// Compare pairwise and condensed objective changes every iteration.
    pub check_condensation: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            t_max: 55,
            q_max: 10,
            w: 0.1,
            eps_rho: DEFAULT_EPS_RHO,
            tol: 1e-8,
            sigma2_floor: 1e-12,
            schedule: ScheduleKind::Continuation,
            rank_tol: 1e-10,
            rank_policy: RankPolicy::Strict,
            rebound: Some(ReboundGuard::default()),
            internal_rebound: None,
            record_external_rmse: false,
            check_condensation: false,
        }
    }
}

impl EngineConfig {
    pub fn degree_schedule(&self) -> Result<DegreeSchedule> {
        match self.schedule {
            ScheduleKind::Continuation => build_schedule(self.q_max, self.t_max),
            ScheduleKind::Fixed(q) => fixed_schedule(q, self.t_max),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.t_max == 0 || self.q_max == 0 {
            return Err(Error::InvalidArgument("t_max and q_max must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.w) {
            return Err(Error::InvalidArgument(format!("w must lie in [0, 1), got {}", self.w)));
        }
        if !(self.sigma2_floor > 0.0) {
            return Err(Error::InvalidArgument("sigma2_floor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Registration {
    /// Best configuration seen, per the tracked score.
    pub registered: PointSet,
    /// Configuration after the last executed iteration.
    pub last: PointSet,
    pub trace: RegistrationTrace,
    /// Fitted update maps in application order.
    pub maps: Vec<AnalyticMap>,
}

fn check_pair(x: &PointSet, y: &PointSet) -> Result<()> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: y.dim(),
        });
    }
    Ok(())
}

/// Average squared distance over all pairs and coordinates,
/// `sum_{m,n} ||x_n - y_m||^2 / (d M N)`.
pub fn init_sigma2(x: &PointSet, y: &PointSet) -> Result<f64> {
    check_pair(x, y)?;
    let (m, n, d) = (y.len() as f64, x.len() as f64, x.dim());
    let sq = |s: &PointSet| s.coords().iter().map(|v| v * v).sum::<f64>();
    let (cx, cy) = (x.centroid(), y.centroid());
    let cross: f64 = cx.iter().zip(&cy).map(|(a, b)| a * b).sum::<f64>() * m * n;
    let total = m * sq(x) + n * sq(y) - 2.0 * cross;
    Ok((total / (d as f64 * m * n)).max(0.0))
}

/// Variance from the posterior statistics of the previous E-step:
/// `[tr(X^T diag(eta) X) - 2 tr(S_X^T Y) + tr(Y^T diag(rho) Y)] / (N_P d)`.
pub fn sigma2_update(stats: &PosteriorStats, x: &PointSet, y_new: &PointSet) -> Result<f64> {
    if !(stats.np > 0.0) {
        return Err(Error::InvalidArgument("total posterior mass must be positive".into()));
    }
    if x.len() != stats.fixed_len() || y_new.len() != stats.moving_len() {
        return Err(Error::CardinalityMismatch {
            left: stats.moving_len(),
            right: y_new.len(),
        });
    }
    if x.dim() != y_new.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: y_new.dim(),
        });
    }
    let d = x.dim();
    let xx: f64 = x
        .iter()
        .zip(&stats.eta)
        .map(|(p, e)| e * p.iter().map(|v| v * v).sum::<f64>())
        .sum();
    let mut xy = 0.0;
    let mut yy = 0.0;
    for (m, (p, r)) in y_new.iter().zip(&stats.rho).enumerate() {
        for (l, v) in p.iter().enumerate() {
            xy += stats.sx[(m, l)] * v;
        }
        yy += r * p.iter().map(|v| v * v).sum::<f64>();
    }
    Ok(((xx - 2.0 * xy + yy) / (stats.np * d as f64)).max(0.0))
}

fn max_displacement(a: &PointSet, b: &PointSet) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(p, q)| p.iter().zip(q).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt())
        .fold(0.0, f64::max)
}

fn subset(points: &PointSet, indices: &[usize]) -> PointSet {
    let d = points.dim();
    let mut coords = Vec::with_capacity(indices.len() * d);
    for &i in indices {
        coords.extend_from_slice(points.point(i));
    }
    PointSet::from_raw(d, coords)
}

/// Registers the moving set `y` onto the fixed set `x`. Both sets must already
/// share one normalized frame; maps are expanded about the origin.
pub fn register(x: &PointSet, y: &PointSet, cfg: &EngineConfig) -> Result<Registration> {
    check_pair(x, y)?;
    cfg.validate()?;
    if cfg.record_external_rmse && x.len() != y.len() {
        return Err(Error::CardinalityMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let d = x.dim();
    let schedule = cfg.degree_schedule()?;
    let min_iters = schedule.guard_start();
    let center = vec![0.0; d];
    let fit_opts = FitOptions {
        rank_tol: cfg.rank_tol,
        policy: cfg.rank_policy,
    };

    let mut sigma2 = init_sigma2(x, y)?.max(cfg.sigma2_floor);
    let mut current = y.clone();
    let mut tracker = Tracker::new(y, sigma2, cfg.record_external_rmse.then_some(x))?;
    let mut maps = Vec::new();
    let mut prev_e_soft = tracker.trace.initial_e_soft;

    for t in 0..cfg.t_max {
        let requested = schedule.order_at(t);
        let stats = compute_posterior(x, &current, sigma2, cfg.w, cfg.eps_rho).map_err(|e| e.at(t))?;
        let targets = soft_targets(&stats, x).map_err(|e| e.at(t))?;
        let order = feasible_order(targets.sources.len(), d, requested).map_err(|e| e.at(t))?;
        let sources = subset(&current, &targets.sources);
        let problem = WeightedFitProblem::new(
            sources,
            targets.targets.clone(),
            targets.weights.clone(),
            center.clone(),
            order,
        )
        .map_err(|e| e.at(t))?;
        let fit = weighted_fit(&problem, &fit_opts).map_err(|e| e.at(t))?;
        let next = fit.map.apply(&current)?;

        if cfg.check_condensation && next.is_finite() {
            let pair_id = pairwise_objective(&stats, x, &current);
            let pair_fit = pairwise_objective(&stats, x, &next);
            let dp = pair_fit - pair_id;
            let dc = condensed_objective(&targets, &next) - condensed_objective(&targets, &current);
            if (dp - dc).abs() > 1e-6 * dp.abs() + 1e-12 * (pair_id + pair_fit) {
                return Err(Error::CondensationMismatch {
                    pairwise: dp,
                    condensed: dc,
                }
                .at(t));
            }
        }
        maps.push(fit.map);

        if !next.is_finite() {
            tracker.push(t, requested, order, f64::NAN, targets.sources.len(), fit.rank, &next)?;
            tracker.trace.stop_reason = StopReason::NonFinite;
            current = next;
            break;
        }

        let raw_sigma2 = sigma2_update(&stats, x, &next).map_err(|e| e.at(t))?;
        let floor_hit = raw_sigma2 <= cfg.sigma2_floor;
        sigma2 = raw_sigma2.max(cfg.sigma2_floor);
        let displacement = max_displacement(&current, &next);
        tracker.push(t, requested, order, sigma2, targets.sources.len(), fit.rank, &next)?;
        current = next;

        let e_soft = (d as f64 * sigma2).sqrt();
        let rel_change = (prev_e_soft - e_soft).abs() / prev_e_soft.max(f64::MIN_POSITIVE);
        prev_e_soft = e_soft;
        let final_stage = schedule.in_final_stage(t);

        if floor_hit {
            tracker.trace.stop_reason = StopReason::ConvergedResidual;
            break;
        }
        if final_stage && rel_change < cfg.tol {
            tracker.trace.stop_reason = StopReason::ConvergedResidual;
            break;
        }
        if final_stage && displacement < cfg.tol {
            tracker.trace.stop_reason = StopReason::ConvergedUpdate;
            break;
        }
        if let (true, Some(guard)) = (tracker.has_reference(), &cfg.rebound) {
            let guard = ReboundGuard {
                min_iters: Some(guard.min_iters.unwrap_or(min_iters)),
                ..guard.clone()
            };
            if rebound_check(&tracker.trace, &guard)? {
                tracker.trace.stop_reason = StopReason::ExternalRebound;
                break;
            }
        }
        if let Some(guard) = &cfg.internal_rebound {
            if internal_rebound(&tracker.trace, guard, guard.min_iters.unwrap_or(min_iters)) {
                tracker.trace.stop_reason = StopReason::InternalRebound;
                break;
            }
        }
    }

    let (registered, trace) = tracker.finish();
    Ok(Registration {
        registered,
        last: current,
        trace,
        maps,
    })
}
