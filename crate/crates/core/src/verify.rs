//! Numerical checks that tie the solvers and the simulator together.
//!
//! Each check returns a [`CheckResult`] with the worst observed deviation
//! and the tolerance it is held to; `mflqr verify` prints them and exits
//! nonzero when any fails.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::mfsim::{self, Policy};
use crate::pbd::{averaging_matrix, PseudoBlockMatrix};
use crate::riccati::{
    build_centralized, min_eigenvalue, reconstruct_centralized, solve_centralized,
    CentralizedGainSchedule, MeanFieldGainSchedule, SystemSpec,
};

/// Relative tolerance for decoupled-vs-dense solver agreement.
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-8;
/// Absolute tolerance for pseudo-block identities on unit-scale data.
pub const ALGEBRA_TOLERANCE: f64 = 1e-10;
/// Absolute tolerance for inverse round trips.
pub const INVERSE_TOLERANCE: f64 = 1e-8;
/// Most negative eigenvalue accepted for cost-to-go matrices.
pub const PSD_TOLERANCE: f64 = -1e-9;
/// Largest `|z|` accepted by Monte Carlo identity checks.
pub const Z_LIMIT: f64 = 4.0;
/// Largest stacked dimension `nk` the dense oracle is run on.
pub const MAX_DENSE_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn at_most(name: &str, value: f64, tolerance: f64, detail: String) -> Self {
        Self {
            name: name.to_string(),
            value,
            tolerance,
            passed: value <= tolerance,
            detail,
        }
    }
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {}: {:.3e} (tolerance {:.1e}) {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tolerance,
            self.detail
        )
    }
}

/// `max|a − b| / max(1, max|b|)`.
pub fn relative_deviation(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    let scale = b.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    (a - b).abs().max() / scale
}

fn relative_deviation_vec(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let scale = b.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    (a - b).abs().max() / scale
}

/// Worst relative deviations between a dense schedule and a candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleDeviation {
    pub cost_to_go: f64,
    pub gain: f64,
    pub linear_term: f64,
    pub offset: f64,
}

impl ScheduleDeviation {
    pub fn max(&self) -> f64 {
        self.cost_to_go
            .max(self.gain)
            .max(self.linear_term)
            .max(self.offset)
    }
}

pub fn schedule_deviation(
    candidate: &CentralizedGainSchedule,
    oracle: &CentralizedGainSchedule,
) -> ScheduleDeviation {
    let worst_m = |a: &[DMatrix<f64>], b: &[DMatrix<f64>]| {
        if a.len() != b.len() {
            return f64::INFINITY;
        }
        a.iter()
            .zip(b)
            .map(|(x, y)| relative_deviation(x, y))
            .fold(0.0, f64::max)
    };
    let worst_v = |a: &[DVector<f64>], b: &[DVector<f64>]| {
        if a.len() != b.len() {
            return f64::INFINITY;
        }
        a.iter()
            .zip(b)
            .map(|(x, y)| relative_deviation_vec(x, y))
            .fold(0.0, f64::max)
    };
    ScheduleDeviation {
        cost_to_go: worst_m(&candidate.cost_to_go, &oracle.cost_to_go),
        gain: worst_m(&candidate.gain, &oracle.gain),
        linear_term: worst_v(&candidate.linear_term, &oracle.linear_term),
        offset: worst_v(&candidate.offset, &oracle.offset),
    }
}

/// Compares a decoupled schedule, expanded to `nk` dimensions, against the dense solver.
pub fn equivalence_check(
    spec: &SystemSpec,
    schedule: &MeanFieldGainSchedule,
) -> Result<CheckResult> {
    let oracle = solve_centralized(spec)?;
    let rebuilt = reconstruct_centralized(schedule, spec.k())?.to_dense();
    let dev = schedule_deviation(&rebuilt, &oracle);
    Ok(CheckResult::at_most(
        "riccati equivalence",
        dev.max(),
        EQUIVALENCE_TOLERANCE,
        format!(
            "S {:.2e}, K {:.2e}, g {:.2e}, f {:.2e}",
            dev.cost_to_go, dev.gain, dev.linear_term, dev.offset
        ),
    ))
}

/// Smallest eigenvalue over all `S_t`, `S̄_t`.
pub fn min_cost_to_go_eigenvalue(schedule: &MeanFieldGainSchedule) -> f64 {
    schedule
        .cost_to_go
        .iter()
        .chain(&schedule.cost_to_go_bar)
        .map(min_eigenvalue)
        .fold(f64::INFINITY, f64::min)
}

pub fn psd_check(schedule: &MeanFieldGainSchedule) -> CheckResult {
    let min_eig = min_cost_to_go_eigenvalue(schedule);
    CheckResult {
        name: "cost-to-go PSD".into(),
        value: min_eig,
        tolerance: PSD_TOLERANCE,
        passed: min_eig >= PSD_TOLERANCE,
        detail: "minimum eigenvalue of S_t, S̄_t".into(),
    }
}

/// Worst deviation of `E_k` from idempotence, symmetry and `E_k 1 = 1`,
/// together with its smallest eigenvalue.
pub fn averaging_matrix_deviation(k: usize) -> (f64, f64) {
    let e = averaging_matrix(k);
    let ones = DVector::from_element(k, 1.0);
    let dev = (&e * &e - &e)
        .abs()
        .max()
        .max((&e - e.transpose()).abs().max())
        .max((&e * &ones - &ones).abs().max())
        .max((ones.transpose() * &e - ones.transpose()).abs().max());
    (dev, min_eigenvalue(&e))
}

/// Pseudo-block identities on the factors of a spec's stacked model.
pub fn pbd_check(spec: &SystemSpec, schedule: &MeanFieldGainSchedule) -> Result<CheckResult> {
    let model = build_centralized(spec)?;
    let k = spec.k();
    let mut worst: f64 = 0.0;
    let mut track = |value: f64, scale: f64| worst = worst.max(value / scale.max(1.0));
    let probe =
        |cols: usize| DVector::from_fn(cols * k, |i, _| ((i * 7 + 3) % 11) as f64 / 11.0 - 0.5);
    let magnitude = |m: &DMatrix<f64>| m.iter().fold(0.0f64, |a, x| a.max(x.abs()));

    for t in 0..spec.horizon() {
        let factors: [&PseudoBlockMatrix; 3] = [&model.a[t], &model.b[t], &model.r[t]];
        for x in factors {
            let dense = x.to_dense();
            let scale = magnitude(&dense);
            track(
                (x.transpose().to_dense() - dense.transpose()).abs().max(),
                scale,
            );
            track(
                (x.scale(-0.7).to_dense() - &dense * -0.7).abs().max(),
                scale,
            );
            track((x.add(x)?.to_dense() - &dense * 2.0).abs().max(), scale);
            let v = probe(x.block_shape().1);
            let y = x.apply_stacked(&v)?;
            track((y - &dense * &v).abs().max(), scale);
        }
        let s_next = PseudoBlockMatrix::new(
            k,
            schedule.cost_to_go[t + 1].clone(),
            schedule.cost_to_go_bar[t + 1].clone(),
        )?;
        // Ãᵀ S̃ B̃ through the product rule versus dense products
        let factored = model.a[t]
            .transpose()
            .matmul(&s_next)?
            .matmul(&model.b[t])?;
        let dense = model.a[t].to_dense().transpose() * s_next.to_dense() * model.b[t].to_dense();
        track(
            (factored.to_dense() - &dense).abs().max(),
            magnitude(&dense),
        );

        // (R̃ + B̃ᵀS̃B̃)⁻¹ via the inverse rule
        let hessian = model.r[t].add(
            &model.b[t]
                .transpose()
                .matmul(&s_next)?
                .matmul(&model.b[t])?,
        )?;
        let inv = hessian.inverse()?;
        let round_trip = hessian.to_dense() * inv.to_dense();
        let id = DMatrix::identity(round_trip.nrows(), round_trip.ncols());
        track(
            (round_trip - id).abs().max() * ALGEBRA_TOLERANCE / INVERSE_TOLERANCE,
            1.0,
        );
    }
    let (e_dev, e_min) = averaging_matrix_deviation(k);
    track(e_dev, 1.0);
    // E_k is positive semidefinite, not definite, once k ≥ 2
    track((-e_min).max(0.0), 1.0);
    Ok(CheckResult::at_most(
        "pseudo-block algebra",
        worst,
        ALGEBRA_TOLERANCE,
        format!("on the stacked factors with k = {k}"),
    ))
}

/// Predictive-variance identity at every epoch `t ≥ 1`.
pub fn predictive_variance_result(
    spec: &SystemSpec,
    policy: &dyn Policy,
    x0: &[DVector<f64>],
    n_samples: usize,
    seed: u64,
) -> Result<CheckResult> {
    let report = mfsim::predictive_variance_check(spec, policy, x0, n_samples, seed, 0)?;
    let worst = report
        .rows
        .iter()
        .max_by(|a, b| a.z.abs().total_cmp(&b.z.abs()));
    let detail = match worst {
        Some(row) => format!(
            "worst t = {}: E(Δ²) = {:.4e} vs {:.4e}",
            row.t, row.lhs, row.rhs
        ),
        None => "no epochs".into(),
    };
    Ok(CheckResult::at_most(
        "predictive variance |z|",
        report.max_abs_z(),
        Z_LIMIT,
        detail,
    ))
}

/// Paired `E(J₁) − E(J₂)` against the exact offset, in standard errors.
pub fn offset_result(
    spec: &SystemSpec,
    policy: &dyn Policy,
    x0: &[DVector<f64>],
    n_runs: usize,
    seed: u64,
) -> Result<CheckResult> {
    let paired = mfsim::paired_objectives(spec, policy, x0, n_runs, seed)?;
    let exact = mfsim::exact_problem_offset(spec, x0)?;
    let gap = (paired.difference.mean - exact).abs();
    let z = if paired.difference.std_error > 0.0 {
        gap / paired.difference.std_error
    } else if gap == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(CheckResult::at_most(
        "problem offset |z|",
        z,
        Z_LIMIT,
        format!(
            "J1 - J2 = {:.6e} ± {:.2e}, exact offset {:.6e}",
            paired.difference.mean, paired.difference.std_error, exact
        ),
    ))
}
