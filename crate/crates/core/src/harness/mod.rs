//! Simulation studies and whole-graph estimation.

pub mod config;
pub mod estimators;
pub mod experiment;
pub mod graph;
pub mod output;
pub mod subsample;

pub use config::{EdgeSpec, Estimator, ExperimentConfig, NodeRef, Scenario, SubsampleSettings};
pub use experiment::{
    ks_distance_normal, qq_table, run_coverage, run_power, run_qq, Aggregate, ExperimentReport,
    PowerReport, PowerRow, QqRow, Record, Target,
};
pub use graph::{estimate_graph, GraphEstimate, PairResult};
pub use subsample::{run_subsample_protocol, run_subsample_synthetic, SubsampleReport};

use crate::error::{Error, Result};

/// Version of the JSON report layout.
pub const FORMAT_VERSION: u32 = 1;

pub const THREADS_ENV: &str = "ROCKET_THREADS";

/// Worker count: `ROCKET_THREADS` if set, else `configured`, else rayon's default.
pub fn resolve_threads(configured: Option<usize>) -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(k) if k > 0 => Ok(Some(k)),
            _ => Err(Error::Config(format!("{THREADS_ENV}={v:?} is not a positive integer"))),
        },
        Err(_) => Ok(configured),
    }
}

/// Runs `f` on a dedicated pool sized by [`resolve_threads`] and returns the
/// pool size alongside the result.
pub fn with_pool<T: Send>(configured: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<(T, usize)> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = resolve_threads(configured)? {
        builder = builder.num_threads(k);
    }
    let pool = builder.build().map_err(|e| Error::Config(e.to_string()))?;
    let k = pool.current_num_threads();
    Ok((pool.install(f), k))
}
