//! Parallel evaluation of posterior draws.

use rayon::prelude::*;
use strata_bounds_core::posterior::{aggregate, evaluate_draw, DrawAnalysis, DrawSampler};
use strata_bounds_core::{
    Error as CoreError, PosteriorConfig, PosteriorSummary, PriorSpec, TrialCounts,
};

use crate::error::{CliError, Result};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "STRATA_BOUNDS_THREADS";

fn thread_cap() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|&n| n > 0)
            .map(Some)
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "{THREADS_ENV} must be a positive integer, got {v:?}"
                ))
            }),
        Err(_) => Ok(None),
    }
}

/// Evaluates every draw on a rayon pool and aggregates in draw order, so
/// the summary does not depend on the number of threads.
pub fn summarize_parallel(
    counts: &TrialCounts,
    prior: &PriorSpec,
    config: &PosteriorConfig,
) -> Result<PosteriorSummary> {
    if config.n_draws == 0 {
        return Err(CoreError::NoDraws.into());
    }
    let sampler = DrawSampler::new(counts, prior, config.seed)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap()? {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    let tol = config.tolerances;
    let analyses: Vec<DrawAnalysis> = pool.install(|| {
        (0..config.n_draws as u64)
            .into_par_iter()
            .map(|i| evaluate_draw(&sampler, i, &tol))
            .collect::<Result<Vec<_>, CoreError>>()
    })?;
    Ok(aggregate(&analyses, counts.max_level(), config)?)
}
