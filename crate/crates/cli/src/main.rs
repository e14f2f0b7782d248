use std::path::PathBuf;
use std::process::ExitCode;

use acpd_cli::stats::DEFAULT_STRATEGIES;
use acpd_cli::{
    cmd_ablate, cmd_bench, cmd_register, cmd_synth, thread_count, CaseSpec, GeneratorKind, Method, RunConfig, Strategy,
};
use acpd_core::{RankPolicy, ScheduleKind, SynthParams};
use anyhow::Result;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "acpd", version, about = "Non-rigid point-set registration with analytic CPD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deformed copy of a model.
    Synth {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Register a moving point file onto a fixed one.
    Register {
        #[arg(long)]
        fixed: PathBuf,
        #[arg(long)]
        moving: PathBuf,
        /// Files are index-matched; record external RMSE and use the rebound guard.
        /// Implied for a pair written by `synth`.
        #[arg(long)]
        ordered: bool,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Multi-seed statistics for one or more methods.
    Bench {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, default_value_t = 5)]
        runs: u64,
        #[arg(long, value_delimiter = ',', default_value = "analytic-cpd,cpd")]
        methods: Vec<Method>,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare fixed-order and continuation schedules.
    Ablate {
        #[command(flatten)]
        case: CaseArgs,
        #[arg(long, default_value_t = 5)]
        runs: u64,
        /// Comma-separated, e.g. fixed:1,fixed:2,continuation:10
        #[arg(long, value_delimiter = ',')]
        strategies: Vec<Strategy>,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct CaseArgs {
    /// Built-in shape (disk2d, fish2d, clusters2d, ellipsoid3d, torus3d, clusters3d) or point file.
    #[arg(long)]
    model: String,
    #[arg(long, default_value_t = 500)]
    points: usize,
    #[arg(long, default_value = "bumpblend3d")]
    generator: GeneratorKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.4)]
    gamma0: f64,
    #[arg(long, default_value_t = 0.2)]
    gamma_q: f64,
    /// Order of the analytic generators.
    #[arg(long, default_value_t = 2)]
    order: usize,
}

impl CaseArgs {
    fn spec(&self) -> CaseSpec {
        CaseSpec {
            model: self.model.clone(),
            points: self.points,
            generator: self.generator,
            params: SynthParams {
                gamma0: self.gamma0,
                gamma_q: self.gamma_q,
                seed: self.seed,
                analytic_order: self.order,
            },
        }
    }

    fn seeds(&self, runs: u64) -> Vec<u64> {
        (self.seed..self.seed + runs).collect()
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = "analytic-cpd")]
    method: Method,
    #[arg(long)]
    w: Option<f64>,
    #[arg(long)]
    tmax: Option<usize>,
    #[arg(long)]
    qmax: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    /// Hold one order for every iteration instead of continuation.
    #[arg(long)]
    fixed_order: Option<usize>,
    /// Disable the external rebound guard on ordered inputs.
    #[arg(long)]
    no_rebound: bool,
    /// Completed iterations before the rebound guard may fire.
    #[arg(long)]
    rebound_after: Option<usize>,
    /// Solve rank-deficient M-steps by minimum norm instead of stopping.
    #[arg(long)]
    min_norm: bool,
}

impl RunArgs {
    fn config(&self, ordered: bool) -> RunConfig {
        let mut cfg = RunConfig {
            method: self.method,
            ordered,
            ..RunConfig::default()
        };
        if let Some(w) = self.w {
            cfg.engine.w = w;
            cfg.cpd.w = w;
        }
        if let Some(t) = self.tmax {
            cfg.engine.t_max = t;
            cfg.cpd.max_iters = t;
        }
        if let Some(q) = self.qmax {
            cfg.engine.q_max = q;
        }
        if let Some(tol) = self.tol {
            cfg.engine.tol = tol;
            cfg.cpd.tol = tol;
        }
        if let Some(q) = self.fixed_order {
            cfg.engine.schedule = ScheduleKind::Fixed(q);
        }
        if let (Some(n), Some(guard)) = (self.rebound_after, cfg.engine.rebound.as_mut()) {
            guard.min_iters = Some(n);
        }
        if self.no_rebound {
            cfg.engine.rebound = None;
        }
        if self.min_norm {
            cfg.engine.rank_policy = RankPolicy::MinimumNorm;
        }
        cfg
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { case, out } => {
            let m = cmd_synth(&case.spec(), &out)?;
            println!("{}\tinitial_rmse={:.6e}\t{}", m.case_id, m.initial_rmse, out.display());
        }
        Command::Register {
            fixed,
            moving,
            ordered,
            run,
            out,
        } => {
            let r = cmd_register(&fixed, &moving, &run.config(ordered), &out)?;
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6e}"));
            println!(
                "{}\t{}\tinitial_rmse={}\tfinal_rmse={}\titerations={}\tstop={:?}\ttime={:.3}s",
                r.case_id,
                r.method.name(),
                fmt(r.initial_rmse),
                fmt(r.final_rmse),
                r.iterations,
                r.stop_reason,
                r.elapsed_secs
            );
        }
        Command::Bench {
            case,
            runs,
            methods,
            run,
            out,
        } => {
            let report = cmd_bench(
                &[case.spec()],
                &case.seeds(runs),
                &methods,
                &run.config(true),
                out.as_deref(),
            )?;
            println!("model\tgenerator\tmethod\truns\tfailures\tmean_rmse\tstd_rmse\tmedian_rmse\tmean_time_s");
            for row in &report.rows {
                let (mean, std, med) = row.final_rmse.map_or(("-".into(), "-".into(), "-".into()), |s| {
                    (
                        format!("{:.6e}", s.mean),
                        format!("{:.6e}", s.std),
                        format!("{:.6e}", s.median),
                    )
                });
                let time = row.elapsed_secs.map_or("-".into(), |s| format!("{:.3}", s.mean));
                println!(
                    "{}\t{}\t{}\t{}\t{}\t{mean}\t{std}\t{med}\t{time}",
                    row.model,
                    row.generator,
                    row.method.name(),
                    row.runs,
                    row.failures
                );
            }
        }
        Command::Ablate {
            case,
            runs,
            strategies,
            run,
            out,
        } => {
            let strategies = if strategies.is_empty() {
                DEFAULT_STRATEGIES.to_vec()
            } else {
                strategies
            };
            let rows = cmd_ablate(
                &case.spec(),
                &case.seeds(runs),
                &strategies,
                &run.config(true),
                out.as_deref(),
            )?;
            println!("strategy\tsuccesses\tfailures\tmean_rmse\tstd_rmse\tmean_time_s");
            for row in &rows {
                let (mean, std) = row.final_rmse.map_or(("-".into(), "-".into()), |s| {
                    (format!("{:.6e}", s.mean), format!("{:.6e}", s.std))
                });
                let time = row.elapsed_secs.map_or("-".into(), |s| format!("{:.3}", s.mean));
                println!(
                    "{}\t{}\t{}\t{mean}\t{std}\t{time}",
                    row.strategy, row.successes, row.failures
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = thread_count().and_then(|n| {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
        run(cli)
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "status": "error", "message": format!("{e:#}") });
            eprintln!("{line}");
            ExitCode::from(2)
        }
    }
}
