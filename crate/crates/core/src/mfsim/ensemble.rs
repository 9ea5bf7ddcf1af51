use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::rollout::{
    dot, mat_vec_acc, quad_form, rollout_with_draws, DisturbanceDraws, Policy, Trajectory,
};
use crate::error::{Error, Result};
use crate::riccati::{risk_augmentation, SystemSpec};
use crate::stats::{Band, Estimate, RunningStats};

/// Default lower tail of the reported quantile bands (5%–95%).
pub const DEFAULT_TAIL: f64 = 0.05;

/// Runs are evaluated in parallel in chunks of this size and folded in index order.
const CHUNK: usize = 1024;

/// Seed of run `index` under `base_seed`.
///
/// This is output `index + 1` of a SplitMix64 generator started at
/// `base_seed`, so runs are independent of execution order and thread count.
pub fn split_seed(base_seed: u64, index: u64) -> u64 {
    let mut z = base_seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for run `index`.
pub fn run_rng(base_seed: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(split_seed(base_seed, index))
}

/// Disturbances for run `index`; identical for every policy evaluated on that run.
pub fn run_draws(spec: &SystemSpec, base_seed: u64, index: u64) -> DisturbanceDraws {
    let mut rng = run_rng(base_seed, index);
    DisturbanceDraws::sample(spec.disturbance(), spec.horizon(), spec.k(), &mut rng)
}

/// Evaluates `f` for every run index in parallel and folds the results in index order.
fn fold_runs<T, F, A>(n_runs: usize, f: F, mut acc: A) -> Result<()>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
    A: FnMut(usize, T),
{
    let mut start = 0;
    while start < n_runs {
        let end = (start + CHUNK).min(n_runs);
        let chunk: Vec<T> = (start..end)
            .into_par_iter()
            .map(&f)
            .collect::<Result<_>>()?;
        for (offset, item) in chunk.into_iter().enumerate() {
            acc(start + offset, item);
        }
        start = end;
    }
    Ok(())
}

/// Per-epoch energy statistics of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    /// `c_t^{x,avg}`, `t ∈ 0..=T`.
    pub x_avg: Vec<f64>,
    /// `c_t^{x,max}`, `t ∈ 0..=T`.
    pub x_max: Vec<f64>,
    /// `c_t^{u,avg}`, `t ∈ 0..T`.
    pub u_avg: Vec<f64>,
    /// `c_t^{u,max}`, `t ∈ 0..T`.
    pub u_max: Vec<f64>,
}

impl RunSummary {
    pub fn from_trajectory(traj: &Trajectory) -> Self {
        let k = traj.k;
        let avg_max = |values: &[f64]| -> (Vec<f64>, Vec<f64>) {
            values
                .chunks_exact(k)
                .map(|row| {
                    let avg = row.iter().sum::<f64>() / k as f64;
                    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    (avg, max)
                })
                .unzip()
        };
        let (x_avg, x_max) = avg_max(&traj.state_energy);
        let (u_avg, u_max) = avg_max(&traj.control_energy);
        Self {
            x_avg,
            x_max,
            u_avg,
            u_max,
        }
    }

    /// Time averages `(x_avg, x_max, u_avg, u_max)`.
    pub fn time_averages(&self) -> [f64; 4] {
        let avg = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        [
            avg(&self.x_avg),
            avg(&self.x_max),
            avg(&self.u_avg),
            avg(&self.u_max),
        ]
    }
}

/// Mean and quantile bands of the four energy series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesBands {
    pub x_avg: Vec<Band>,
    pub x_max: Vec<Band>,
    pub u_avg: Vec<Band>,
    pub u_max: Vec<Band>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeAverageBands {
    pub x_avg: Band,
    pub x_max: Band,
    pub u_avg: Band,
    pub u_max: Band,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub lambda: f64,
    pub n_runs: usize,
    pub tail: f64,
    pub per_time: SeriesBands,
    pub time_average: TimeAverageBands,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleConfig {
    pub n_runs: usize,
    pub base_seed: u64,
    /// Lower tail probability; bands span `tail..1 − tail`.
    pub tail: f64,
}

impl EnsembleConfig {
    pub fn new(n_runs: usize, base_seed: u64) -> Self {
        Self {
            n_runs,
            base_seed,
            tail: DEFAULT_TAIL,
        }
    }
}

pub fn ensemble(
    spec: &SystemSpec,
    policy: &dyn Policy,
    x0: &[DVector<f64>],
    config: EnsembleConfig,
) -> Result<EnsembleStats> {
    if config.n_runs == 0 {
        return Err(Error::Invalid("ensemble needs at least one run".into()));
    }
    if !(0.0..=0.5).contains(&config.tail) {
        return Err(Error::Invalid(format!(
            "quantile tail {} outside [0, 0.5]",
            config.tail
        )));
    }
    let mut runs = Vec::with_capacity(config.n_runs);
    fold_runs(
        config.n_runs,
        |index| {
            let draws = run_draws(spec, config.base_seed, index as u64);
            let traj = rollout_with_draws(spec, policy, x0, &draws)?;
            Ok(RunSummary::from_trajectory(&traj))
        },
        |_, summary| runs.push(summary),
    )?;

    let tail = config.tail;
    let per_epoch = |pick: fn(&RunSummary) -> &Vec<f64>| -> Vec<Band> {
        let len = pick(&runs[0]).len();
        (0..len)
            .map(|t| {
                let column: Vec<f64> = runs.iter().map(|r| pick(r)[t]).collect();
                Band::from_samples(&column, tail)
            })
            .collect()
    };
    let per_time = SeriesBands {
        x_avg: per_epoch(|r| &r.x_avg),
        x_max: per_epoch(|r| &r.x_max),
        u_avg: per_epoch(|r| &r.u_avg),
        u_max: per_epoch(|r| &r.u_max),
    };
    let averages: Vec<[f64; 4]> = runs.iter().map(RunSummary::time_averages).collect();
    let band = |j: usize| {
        let column: Vec<f64> = averages.iter().map(|a| a[j]).collect();
        Band::from_samples(&column, tail)
    };
    Ok(EnsembleStats {
        lambda: spec.lambda(),
        n_runs: config.n_runs,
        tail,
        per_time,
        time_average: TimeAverageBands {
            x_avg: band(0),
            x_max: band(1),
            u_avg: band(2),
            u_max: band(3),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// `E(J)` including the realized predictive-variance cost.
    Problem1,
    /// The stacked problem with weights `Q̃^λ` and linear term `b̃^λ`.
    Problem2,
}

/// Realized value of the stacked objective `Σ_t xᵀQ̃^λx + xᵀb̃^λ + Σ_t uᵀR̃u`.
///
/// Uses the same summation order as [`Trajectory::total`], so with `λ = 0`
/// both objectives are bitwise equal.
pub fn problem2_value(
    traj: &Trajectory,
    q_lambda: &[nalgebra::DMatrix<f64>],
    b_lambda: &[DVector<f64>],
) -> f64 {
    let (k, n, horizon) = (traj.k, traj.n, traj.horizon);
    let mut total = 0.0;
    for t in 0..=horizon {
        let mut risk = 0.0;
        for i in 0..k {
            let x = traj.state(t, i);
            risk += quad_form(&q_lambda[t], x) + dot(x, b_lambda[t].as_slice());
        }
        debug_assert_eq!(b_lambda[t].len(), n);
        total += traj.state_cost[t] + risk;
        if t < horizon {
            total += traj.control_cost[t];
        }
    }
    total
}

/// Paired estimates of both objectives from the same rollouts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedObjectives {
    pub problem1: Estimate,
    pub problem2: Estimate,
    /// Run-wise `J₁ − J₂`.
    pub difference: Estimate,
}

pub fn paired_objectives(
    spec: &SystemSpec,
    policy: &dyn Policy,
    x0: &[DVector<f64>],
    n_runs: usize,
    base_seed: u64,
) -> Result<PairedObjectives> {
    if n_runs == 0 {
        return Err(Error::Invalid(
            "objective estimate needs at least one run".into(),
        ));
    }
    let aug = risk_augmentation(spec)?;
    let mut p1 = RunningStats::new();
    let mut p2 = RunningStats::new();
    let mut diff = RunningStats::new();
    fold_runs(
        n_runs,
        |index| {
            let draws = run_draws(spec, base_seed, index as u64);
            let traj = rollout_with_draws(spec, policy, x0, &draws)?;
            let j2 = problem2_value(&traj, &aug.q_lambda, &aug.b_lambda);
            Ok((traj.total, j2))
        },
        |_, (j1, j2)| {
            p1.push(j1);
            p2.push(j2);
            diff.push(j1 - j2);
        },
    )?;
    Ok(PairedObjectives {
        problem1: p1.estimate(),
        problem2: p2.estimate(),
        difference: diff.estimate(),
    })
}

pub fn objective_estimate(
    spec: &SystemSpec,
    policy: &dyn Policy,
    x0: &[DVector<f64>],
    n_runs: usize,
    base_seed: u64,
    which: Objective,
) -> Result<Estimate> {
    let paired = paired_objectives(spec, policy, x0, n_runs, base_seed)?;
    Ok(match which {
        Objective::Problem1 => paired.problem1,
        Objective::Problem2 => paired.problem2,
    })
}

/// `Σ_{t=0}^{T} kλ(δ_t − 4 tr((Σ Q_t)²))`, treating every epoch alike.
pub fn nominal_problem_offset(spec: &SystemSpec) -> Result<f64> {
    let aug = risk_augmentation(spec)?;
    let scale = spec.k() as f64 * spec.lambda();
    Ok((0..=spec.horizon()).map(|t| scale * aug.ell(spec, t)).sum())
}

/// Exact `E(J₁) − E(J₂)` for a deterministic initial state.
///
/// Epochs `t ≥ 1` contribute `kλℓ_t`. At `t = 0` the prediction error is
/// identically zero while the stacked objective still charges
/// `Σᵢ x₀ⁱᵀQ_0^λx₀ⁱ + x₀ⁱᵀb_0^λ`, which is subtracted instead.
pub fn exact_problem_offset(spec: &SystemSpec, x0: &[DVector<f64>]) -> Result<f64> {
    if spec.lambda() == 0.0 {
        return Ok(0.0);
    }
    let aug = risk_augmentation(spec)?;
    let scale = spec.k() as f64 * spec.lambda();
    let later: f64 = (1..=spec.horizon()).map(|t| scale * aug.ell(spec, t)).sum();
    let initial: f64 = x0
        .iter()
        .map(|x| {
            quad_form(&aug.q_lambda[0], x.as_slice())
                + dot(x.as_slice(), aug.b_lambda[0].as_slice())
        })
        .sum();
    Ok(later - initial)
}

/// Predictive-variance identity at one epoch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictiveVarianceRow {
    pub t: usize,
    /// Empirical `E(Δ_t²)`.
    pub lhs: f64,
    /// Empirical `4E(xᵀQΣQx + xᵀQγ) + ℓ_t`.
    pub rhs: f64,
    /// Standard error of the run-wise difference.
    pub std_error: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveVarianceReport {
    pub subsystem: usize,
    pub n_samples: usize,
    /// One row per epoch `t ∈ 1..=T`; `t = 0` is degenerate and skipped.
    pub rows: Vec<PredictiveVarianceRow>,
}

impl PredictiveVarianceReport {
    pub fn max_abs_z(&self) -> f64 {
        self.rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max)
    }
}

/// Minimum sample count accepted by [`predictive_variance_check`].
pub const MIN_PV_SAMPLES: usize = 10_000;

pub fn predictive_variance_check(
    spec: &SystemSpec,
    policy: &dyn Policy,
    x0: &[DVector<f64>],
    n_samples: usize,
    base_seed: u64,
    subsystem: usize,
) -> Result<PredictiveVarianceReport> {
    if n_samples < MIN_PV_SAMPLES {
        return Err(Error::Invalid(format!(
            "predictive-variance check needs at least {MIN_PV_SAMPLES} samples"
        )));
    }
    if subsystem >= spec.k() {
        return Err(Error::Range {
            index: subsystem,
            len: spec.k(),
        });
    }
    let horizon = spec.horizon();
    let n = spec.n();
    let aug = risk_augmentation(spec)?;
    // per epoch: QΣQ, Qγ and ℓ_t
    let weights: Vec<_> = (0..=horizon)
        .map(|t| {
            let q = spec.q(t);
            let set = &aug.moments[t];
            (q * &set.sigma * q, q * &set.gamma, aug.ell(spec, t))
        })
        .collect();

    let mut lhs = vec![RunningStats::new(); horizon + 1];
    let mut rhs = vec![RunningStats::new(); horizon + 1];
    let mut diff = vec![RunningStats::new(); horizon + 1];
    fold_runs(
        n_samples,
        |index| {
            let draws = run_draws(spec, base_seed, index as u64);
            let traj = rollout_with_draws(spec, policy, x0, &draws)?;
            let pairs: Vec<(f64, f64)> = (1..=horizon)
                .map(|t| {
                    let x = traj.state(t, subsystem);
                    let (qsq, qg, ell) = &weights[t];
                    let mut scratch = vec![0.0; n];
                    mat_vec_acc(qsq, x, &mut scratch);
                    let predicted = 4.0 * (dot(x, &scratch) + dot(x, qg.as_slice())) + ell;
                    let delta = traj.prediction_error(t, subsystem);
                    (delta * delta, predicted)
                })
                .collect();
            Ok(pairs)
        },
        |_, pairs| {
            for (offset, (l, r)) in pairs.into_iter().enumerate() {
                let t = offset + 1;
                lhs[t].push(l);
                rhs[t].push(r);
                diff[t].push(l - r);
            }
        },
    )?;

    let rows = (1..=horizon)
        .map(|t| {
            let d = diff[t].estimate();
            let z = if d.std_error > 0.0 {
                d.mean / d.std_error
            } else if d.mean == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            PredictiveVarianceRow {
                t,
                lhs: lhs[t].mean(),
                rhs: rhs[t].mean(),
                std_error: d.std_error,
                z,
            }
        })
        .collect();
    Ok(PredictiveVarianceReport {
        subsystem,
        n_samples,
        rows,
    })
}

/// Problem-1 objective of several policies on common disturbances.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyComparison {
    /// `E(J)` for each policy.
    pub objectives: Vec<Estimate>,
    /// Run-wise `J_j − J_0` for each policy `j` against the first.
    pub differences: Vec<Estimate>,
}

pub fn compare_policies(
    spec: &SystemSpec,
    policies: &[&dyn Policy],
    x0: &[DVector<f64>],
    n_runs: usize,
    base_seed: u64,
) -> Result<PolicyComparison> {
    if policies.is_empty() || n_runs == 0 {
        return Err(Error::Invalid(
            "need at least one policy and one run".into(),
        ));
    }
    let mut objectives = vec![RunningStats::new(); policies.len()];
    let mut differences = vec![RunningStats::new(); policies.len()];
    fold_runs(
        n_runs,
        |index| {
            let draws = run_draws(spec, base_seed, index as u64);
            policies
                .iter()
                .map(|p| rollout_with_draws(spec, *p, x0, &draws).map(|traj| traj.total))
                .collect::<Result<Vec<f64>>>()
        },
        |_, totals| {
            for (j, total) in totals.iter().enumerate() {
                objectives[j].push(*total);
                differences[j].push(total - totals[0]);
            }
        },
    )?;
    Ok(PolicyComparison {
        objectives: objectives.iter().map(RunningStats::estimate).collect(),
        differences: differences.iter().map(RunningStats::estimate).collect(),
    })
}
