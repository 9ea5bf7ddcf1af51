//! Finite-horizon Riccati solvers for the risk-aware mean-field coupled problem.
//!
//! Two routes produce the same controller. [`solve_centralized`] works on
//! the stacked `nk`-dimensional system with dense matrices.
//! [`solve_mean_field`] runs two `n`-dimensional recursions whose outputs
//! [`reconstruct_centralized`] maps back to the stacked form.

mod centralized;
mod mean_field;
mod step;
mod system;

pub use centralized::{
    build_centralized, solve_centralized, CentralizedGainSchedule, CentralizedModel,
};
pub use mean_field::{
    reconstruct_centralized, solve_mean_field, MeanFieldGainSchedule, PseudoBlockSchedule,
};
pub use system::{
    min_eigenvalue, risk_augmentation, RiskAugmentation, SystemMatrices, SystemSpec,
    WEIGHT_TOLERANCE,
};
