//! Closed-loop Monte Carlo simulation of `k` mean-field coupled subsystems.
//!
//! Each run draws its own disturbance tensor from a seed derived from the
//! base seed and the run index ([`split_seed`]). Policies compared on the
//! same base seed therefore see identical disturbances, and aggregates are
//! independent of thread scheduling.

mod ensemble;
mod rollout;

pub use ensemble::{
    compare_policies, ensemble, exact_problem_offset, nominal_problem_offset, objective_estimate,
    paired_objectives, predictive_variance_check, problem2_value, run_draws, run_rng, split_seed,
    EnsembleConfig, EnsembleStats, Objective, PairedObjectives, PolicyComparison,
    PredictiveVarianceReport, PredictiveVarianceRow, RunSummary, SeriesBands, TimeAverageBands,
    DEFAULT_TAIL, MIN_PV_SAMPLES,
};
pub use rollout::{rollout, rollout_with_draws, DisturbanceDraws, Policy, Trajectory};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// `k` initial states with i.i.d. `Normal(mean, variance)` entries.
pub fn normal_initial_states(
    k: usize,
    n: usize,
    mean: f64,
    variance: f64,
    seed: u64,
) -> Result<Vec<DVector<f64>>> {
    let normal = Normal::new(mean, variance.sqrt())
        .map_err(|e| Error::Invalid(format!("initial-state distribution: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..k)
        .map(|_| DVector::from_fn(n, |_, _| normal.sample(&mut rng)))
        .collect())
}
