//! Multi-seed benchmark grids and the degree-schedule ablation.

use std::fmt;
use std::path::Path;

use acpd_core::ScheduleKind;
use anyhow::{bail, Result};
use serde::{Deserialize, Serialize};

use crate::case::{generate_case, CaseSpec};
use crate::io::write_json;
use crate::run::{run_pair, Method, RunConfig, RunRecord};

/// E_soft above this multiple of its initial value counts as a failed run.
pub const DIVERGENCE_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
    pub median: f64,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    // Welford: constant input gives an exact mean and a zero spread.
    let (mut mean, mut m2) = (0.0, 0.0);
    for (k, &v) in values.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (v - mean);
    }
    let std = if values.len() > 1 {
        (m2 / (values.len() - 1) as f64).sqrt()
    } else {
        0.0
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    Some(Summary { mean, std, median })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseFailure {
    pub case_id: String,
    pub seed: u64,
    pub method: Method,
    pub message: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub model: String,
    pub generator: String,
    pub method: Method,
    pub runs: usize,
    pub failures: usize,
    pub final_rmse: Option<Summary>,
    pub elapsed_secs: Option<Summary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub records: Vec<RunRecord>,
    pub failures: Vec<CaseFailure>,
    pub rows: Vec<BenchRow>,
}

/// Runs every (spec, seed, method) combination on ordered synthetic cases.
/// Individual failures are recorded, not propagated.
pub fn cmd_bench(
    specs: &[CaseSpec],
    seeds: &[u64],
    methods: &[Method],
    base: &RunConfig,
    out: Option<&Path>,
) -> Result<BenchReport> {
    let mut report = BenchReport {
        records: Vec::new(),
        failures: Vec::new(),
        rows: Vec::new(),
    };
    for spec in specs {
        for &method in methods {
            let mut rmses = Vec::new();
            let mut times = Vec::new();
            let mut failures = 0;
            for &seed in seeds {
                let spec = spec.with_seed(seed);
                let cfg = RunConfig {
                    method,
                    ordered: true,
                    ..base.clone()
                };
                let result = generate_case(&spec)
                    .and_then(|case| run_pair(&case.fixed, &case.moving, &cfg, &spec.id(), Some(seed)));
                match result {
                    Ok(out) => {
                        rmses.push(out.record.final_rmse.expect("ordered run"));
                        times.push(out.record.elapsed_secs);
                        report.records.push(out.record);
                    }
                    Err(e) => {
                        failures += 1;
                        report.failures.push(CaseFailure {
                            case_id: spec.id(),
                            seed,
                            method,
                            message: format!("{e:#}"),
                        });
                    }
                }
            }
            report.rows.push(BenchRow {
                model: spec.model.clone(),
                generator: spec.generator.name().to_string(),
                method,
                runs: seeds.len(),
                failures,
                final_rmse: summarize(&rmses),
                elapsed_secs: summarize(&times),
            });
        }
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("bench.json"), &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Strategy {
    Fixed(usize),
    Continuation(usize),
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Fixed(q) => write!(f, "fixed:{q}"),
            Strategy::Continuation(q) => write!(f, "continuation:{q}"),
        }
    }
}

impl std::str::FromStr for Strategy {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, q) = s
            .split_once(':')
            .ok_or_else(|| anyhow::anyhow!("strategy '{s}' should look like fixed:2 or continuation:10"))?;
        let q: usize = q.parse()?;
        if q == 0 {
            bail!("strategy order must be at least 1");
        }
        match kind {
            "fixed" => Ok(Strategy::Fixed(q)),
            "continuation" => Ok(Strategy::Continuation(q)),
            other => bail!("unknown strategy kind '{other}'"),
        }
    }
}

impl TryFrom<String> for Strategy {
    type Error = anyhow::Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Strategy> for String {
    fn from(s: Strategy) -> String {
        s.to_string()
    }
}

impl Strategy {
    pub fn apply(self, cfg: &RunConfig) -> RunConfig {
        let mut cfg = cfg.clone();
        cfg.method = Method::AnalyticCpd;
        cfg.ordered = true;
        match self {
            Strategy::Fixed(q) => {
                cfg.engine.schedule = ScheduleKind::Fixed(q);
                cfg.engine.q_max = q;
            }
            Strategy::Continuation(q) => {
                cfg.engine.schedule = ScheduleKind::Continuation;
                cfg.engine.q_max = q;
            }
        }
        cfg
    }
}

pub const DEFAULT_STRATEGIES: &[Strategy] = &[
    Strategy::Fixed(1),
    Strategy::Fixed(2),
    Strategy::Fixed(5),
    Strategy::Fixed(10),
    Strategy::Continuation(10),
];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRun {
    pub seed: u64,
    pub failed: bool,
    pub final_rmse: Option<f64>,
    pub elapsed_secs: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationRow {
    pub strategy: Strategy,
    pub successes: usize,
    pub failures: usize,
    /// Over successful runs only.
    pub final_rmse: Option<Summary>,
    pub elapsed_secs: Option<Summary>,
    pub runs: Vec<AblationRun>,
}

/// A run fails if the engine errors or the trace diverges (non-finite
/// coordinates, or E_soft above [`DIVERGENCE_FACTOR`] times its start value).
pub fn cmd_ablate(
    spec: &CaseSpec,
    seeds: &[u64],
    strategies: &[Strategy],
    base: &RunConfig,
    out: Option<&Path>,
) -> Result<Vec<AblationRow>> {
    let cases = seeds
        .iter()
        .map(|&s| generate_case(&spec.with_seed(s)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for &strategy in strategies {
        let cfg = strategy.apply(base);
        let mut runs = Vec::new();
        for (case, &seed) in cases.iter().zip(seeds) {
            let run = match run_pair(&case.fixed, &case.moving, &cfg, &case.spec.id(), Some(seed)) {
                Ok(r) if r.record.trace.diverged(DIVERGENCE_FACTOR) => AblationRun {
                    seed,
                    failed: true,
                    final_rmse: r.record.final_rmse,
                    elapsed_secs: Some(r.record.elapsed_secs),
                    note: Some(format!("diverged ({:?})", r.record.stop_reason)),
                },
                Ok(r) => AblationRun {
                    seed,
                    failed: false,
                    final_rmse: r.record.final_rmse,
                    elapsed_secs: Some(r.record.elapsed_secs),
                    note: None,
                },
                Err(e) => AblationRun {
                    seed,
                    failed: true,
                    final_rmse: None,
                    elapsed_secs: None,
                    note: Some(format!("{e:#}")),
                },
            };
            runs.push(run);
        }
        let ok: Vec<&AblationRun> = runs.iter().filter(|r| !r.failed).collect();
        let rmses: Vec<f64> = ok.iter().filter_map(|r| r.final_rmse).collect();
        let times: Vec<f64> = ok.iter().filter_map(|r| r.elapsed_secs).collect();
        rows.push(AblationRow {
            strategy,
            successes: ok.len(),
            failures: runs.len() - ok.len(),
            final_rmse: summarize(&rmses),
            elapsed_secs: summarize(&times),
            runs,
        });
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write_json(&dir.join("ablation.json"), &rows)?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_values() {
        let s = summarize(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(s.mean, 2.5);
        assert_eq!(s.median, 2.5);
        assert!((s.std - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let one = summarize(&[0.7]).unwrap();
        assert_eq!((one.mean, one.std, one.median), (0.7, 0.0, 0.7));
        assert_eq!(summarize(&[2.0, 2.0]).unwrap().std, 0.0);
        assert!(summarize(&[]).is_none());
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("fixed:2".parse::<Strategy>().unwrap(), Strategy::Fixed(2));
        assert_eq!(
            "continuation:10".parse::<Strategy>().unwrap(),
            Strategy::Continuation(10)
        );
        assert!("fixed:0".parse::<Strategy>().is_err());
        assert!("fixed".parse::<Strategy>().is_err());
        for s in DEFAULT_STRATEGIES {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), *s);
        }
    }
}
