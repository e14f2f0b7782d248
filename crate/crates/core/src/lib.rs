//! Non-rigid point-set registration with CPD posteriors and a weighted
//! truncated-Taylor map fitted in each M-step.

pub mod baseline_cpd;
pub mod engine;
pub mod error;
pub mod fit;
pub mod geometry;
pub mod linalg;
pub mod multiindex;
pub mod posterior;
pub mod sam;
pub mod shapes;
pub mod synth;

pub use nalgebra;

pub use baseline_cpd::{cpd_register, gaussian_kernel, CpdConfig, CpdRegistration};
pub use engine::{
    build_schedule, fixed_schedule, init_sigma2, rebound_check, register, sigma2_update, DegreeSchedule, EngineConfig,
    IterationRecord, ReboundGuard, Registration, RegistrationTrace, ScheduleKind, StopReason,
};
pub use error::{Error, Result};
pub use fit::{
    correction_fit, feasible_order, weighted_fit, weighted_fit_vectorized, FitOptions, FitOutcome, WeightedFitProblem,
};
pub use geometry::{denormalize, normalize_pair, normalize_single, rmse, NormalizationTransform, PointSet};
pub use linalg::{RankPolicy, Solver};
pub use multiindex::{basis_size, eval_basis, indices_of_degree, monomial_count, param_count, BasisLayout, MultiIndex};
pub use posterior::{compute_posterior, outlier_constant, soft_targets, PosteriorStats, SoftTargets};
pub use sam::{compose_sampled_degree_check, identity_map, AnalyticMap};
pub use synth::{
    apply_bump_blend, blend_weights, bump, make_bump_blend_field, random_analytic_deformation, BumpBlendField,
    SynthParams,
};
