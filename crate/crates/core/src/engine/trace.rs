use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{rmse, PointSet};

/// Stop condition on a rising error curve: after `min_iters` completed
/// iterations, stop once `E > (1 + tau_rise) E_best + eps_rise` has held for
/// `p_rise` consecutive iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReboundGuard {
    pub tau_rise: f64,
    pub eps_rise: f64,
    pub p_rise: usize,
    /// `None` lets the engine pick: the start of the top-order stage, and at
    /// least one full stage.
    pub min_iters: Option<usize>,
}

impl Default for ReboundGuard {
    fn default() -> Self {
        Self {
            tau_rise: 0.02,
            eps_rise: 1e-12,
            p_rise: 1,
            min_iters: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ConvergedResidual,
    ConvergedUpdate,
    MaxIters,
    ExternalRebound,
    InternalRebound,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Zero-based iteration index; the record describes the state after it.
    pub iteration: usize,
    /// Order asked for by the schedule (0 for the kernel baseline).
    pub requested_order: usize,
    /// Order actually fitted after the feasibility reduction.
    pub order: usize,
    pub sigma2: f64,
    pub e_soft: f64,
    pub external_rmse: Option<f64>,
    pub active: usize,
    pub rank: usize,
    pub elapsed_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationTrace {
    pub initial_sigma2: f64,
    pub initial_e_soft: f64,
    pub initial_external_rmse: Option<f64>,
    pub records: Vec<IterationRecord>,
    /// Number of completed iterations at the best state; 0 means the input.
    pub best_iteration: usize,
    pub best_score: f64,
    pub stop_reason: StopReason,
}

impl RegistrationTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    /// Input value first, then one value per record.
    fn external_series(&self) -> Option<Vec<f64>> {
        std::iter::once(self.initial_external_rmse)
            .chain(self.records.iter().map(|r| r.external_rmse))
            .collect()
    }

    fn internal_series(&self) -> Vec<f64> {
        std::iter::once(self.initial_e_soft)
            .chain(self.records.iter().map(|r| r.e_soft))
            .collect()
    }

    /// Any non-finite residual, or `E_soft` above `factor` times its initial value.
    pub fn diverged(&self, factor: f64) -> bool {
        self.stop_reason == StopReason::NonFinite
            || self
                .records
                .iter()
                .any(|r| !r.e_soft.is_finite() || r.e_soft > factor * self.initial_e_soft)
    }
}

/// Trailing-run test; `series[k]` is the value after `k` completed iterations,
/// so the input state seeds the best value.
fn rebound_in(series: &[f64], guard: &ReboundGuard, min_iters: usize) -> bool {
    let need = guard.p_rise.max(1);
    let mut best = f64::INFINITY;
    let mut run = 0;
    for (k, &e) in series.iter().enumerate() {
        let risen = k > min_iters && e > (1.0 + guard.tau_rise) * best + guard.eps_rise;
        run = if risen { run + 1 } else { 0 };
        best = best.min(e);
    }
    run >= need
}

/// External rebound test; needs a trace recorded with ordered correspondences.
pub fn rebound_check(trace: &RegistrationTrace, guard: &ReboundGuard) -> Result<bool> {
    let series = trace
        .external_series()
        .ok_or_else(|| Error::InvalidArgument("rebound check needs external RMSE on every record".into()))?;
    Ok(rebound_in(&series, guard, guard.min_iters.unwrap_or(0)))
}

pub(crate) fn internal_rebound(trace: &RegistrationTrace, guard: &ReboundGuard, min_iters: usize) -> bool {
    rebound_in(&trace.internal_series(), guard, min_iters)
}

/// Records iterations and keeps the best configuration. The best state is
/// ranked by external RMSE when a reference is available, else by `E_soft`.
pub(crate) struct Tracker<'a> {
    reference: Option<&'a PointSet>,
    dim: usize,
    start: Instant,
    pub trace: RegistrationTrace,
    pub best: PointSet,
}

impl<'a> Tracker<'a> {
    pub fn new(y0: &PointSet, sigma2: f64, reference: Option<&'a PointSet>) -> Result<Self> {
        let dim = y0.dim();
        let e_soft = (dim as f64 * sigma2).sqrt();
        let external = reference.map(|x| rmse(x, y0)).transpose()?;
        Ok(Self {
            reference,
            dim,
            start: Instant::now(),
            trace: RegistrationTrace {
                initial_sigma2: sigma2,
                initial_e_soft: e_soft,
                initial_external_rmse: external,
                records: Vec::new(),
                best_iteration: 0,
                best_score: external.unwrap_or(e_soft),
                stop_reason: StopReason::MaxIters,
            },
            best: y0.clone(),
        })
    }

    pub fn finish(self) -> (PointSet, RegistrationTrace) {
        (self.best, self.trace)
    }

    pub fn push(
        &mut self,
        iteration: usize,
        requested_order: usize,
        order: usize,
        sigma2: f64,
        active: usize,
        rank: usize,
        y: &PointSet,
    ) -> Result<()> {
        let e_soft = (self.dim as f64 * sigma2).sqrt();
        let external = match self.reference {
            Some(x) if y.is_finite() => Some(rmse(x, y)?),
            Some(_) => Some(f64::NAN),
            None => None,
        };
        self.trace.records.push(IterationRecord {
            iteration,
            requested_order,
            order,
            sigma2,
            e_soft,
            external_rmse: external,
            active,
            rank,
            elapsed_secs: self.start.elapsed().as_secs_f64(),
        });
        let score = external.unwrap_or(e_soft);
        if score < self.trace.best_score {
            self.trace.best_score = score;
            self.trace.best_iteration = self.trace.records.len();
            self.best = y.clone();
        }
        Ok(())
    }

    pub fn has_reference(&self) -> bool {
        self.reference.is_some()
    }
}
