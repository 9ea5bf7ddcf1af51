//! Risk-aware finite-horizon LQR for `k` mean-field coupled linear subsystems.
//!
//! - [`pbd`]: pseudo-block diagonal matrices `I_k ⊗ M + E_k ⊗ (M̄ − M)`.
//! - [`disturbance`]: finite discrete noise with exact central moments.
//! - [`riccati`]: centralized and decoupled Riccati solvers.
//! - [`mfsim`]: closed-loop Monte Carlo simulation and ensemble statistics.
//! - [`verify`]: numerical checks tying the solvers and simulator together.
//! - [`cli`]: config parsing and the `mflqr` batch commands.

pub mod cli;
pub mod disturbance;
pub mod error;
pub mod mfsim;
pub mod pbd;
pub mod riccati;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
