//! Library side of the `acpd` command: point I/O, synthetic cases, single
//! registrations, benchmark grids and the schedule ablation.

pub mod case;
pub mod io;
pub mod run;
pub mod stats;

pub use case::{cmd_synth, generate_case, Case, CaseSpec, GeneratorKind, Manifest};
pub use run::{cmd_register, run_pair, Method, RunConfig, RunOutcome, RunRecord};
pub use stats::{cmd_ablate, cmd_bench, summarize, AblationRow, BenchReport, Strategy, Summary};

/// Worker count from `ACPD_THREADS`, defaulting to 1.
pub fn thread_count() -> anyhow::Result<usize> {
    match std::env::var("ACPD_THREADS") {
        Ok(v) => {
            let n: usize = v
                .trim()
                .parse()
                .map_err(|_| anyhow::anyhow!("ACPD_THREADS must be a positive integer, got '{v}'"))?;
            anyhow::ensure!(n > 0, "ACPD_THREADS must be at least 1");
            Ok(n)
        }
        Err(_) => Ok(1),
    }
}
