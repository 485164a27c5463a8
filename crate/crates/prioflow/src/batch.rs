//! Batch evaluation of independent scenarios. Each run owns its whole
//! simulation, so runs are embarrassingly parallel: with the `parallel`
//! feature (default) the batch fans out over rayon, otherwise it falls
//! back to a sequential loop. Results come back in input order either way,
//! and both paths produce identical reports.

use crate::report::RunReport;
use crate::scenario::{run_bundle, ScenarioBundle};
use crate::Result;

/// Always-available sequential path.
pub fn run_bundles_seq(bundles: &[ScenarioBundle]) -> Vec<Result<RunReport>> {
    bundles.iter().map(run_bundle).collect()
}

/// Data-parallel path over rayon.
#[cfg(feature = "parallel")]
pub fn run_bundles_par(bundles: &[ScenarioBundle]) -> Vec<Result<RunReport>> {
    use rayon::prelude::*;
    bundles.par_iter().map(run_bundle).collect()
}

/// Run a batch with the best available strategy.
#[cfg(feature = "parallel")]
pub fn run_bundles(bundles: &[ScenarioBundle]) -> Vec<Result<RunReport>> {
    run_bundles_par(bundles)
}

/// Run a batch with the best available strategy (sequential build).
#[cfg(not(feature = "parallel"))]
pub fn run_bundles(bundles: &[ScenarioBundle]) -> Vec<Result<RunReport>> {
    run_bundles_seq(bundles)
}
