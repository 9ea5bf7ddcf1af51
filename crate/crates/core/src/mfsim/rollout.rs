use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::disturbance::DiscreteDisturbance;
use crate::error::{shape, Result};
use crate::pbd::stack;
use crate::riccati::{
    CentralizedGainSchedule, MeanFieldGainSchedule, PseudoBlockSchedule, SystemSpec,
};

/// A feedback law over all `k` subsystems.
pub trait Policy: Sync {
    fn horizon(&self) -> usize;

    /// Writes the `k` stacked controls for time `t` into `out`.
    ///
    /// `states` holds `k` consecutive state blocks.
    fn controls(&self, t: usize, states: &[f64], out: &mut [f64]) -> Result<()>;
}

impl Policy for MeanFieldGainSchedule {
    fn horizon(&self) -> usize {
        MeanFieldGainSchedule::horizon(self)
    }

    fn controls(&self, t: usize, states: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.state_dim();
        let m = self.input_dim();
        if !states.len().is_multiple_of(n) || out.len() * n != states.len() * m {
            return Err(shape("state and control buffers disagree on k"));
        }
        let k = states.len() / n;
        let gain = &self.gain[t];
        let coupling = &self.gain_bar[t] - gain;
        let xbar = block_mean(states, n);
        // (K̄ − K) x̄ + f is shared by every subsystem
        let mut shared = self.offset[t].as_slice().to_vec();
        mat_vec_acc(&coupling, &xbar, &mut shared);
        for i in 0..k {
            let u = &mut out[i * m..(i + 1) * m];
            u.copy_from_slice(&shared);
            mat_vec_acc(gain, &states[i * n..(i + 1) * n], u);
        }
        Ok(())
    }
}

impl Policy for CentralizedGainSchedule {
    fn horizon(&self) -> usize {
        CentralizedGainSchedule::horizon(self)
    }

    fn controls(&self, t: usize, states: &[f64], out: &mut [f64]) -> Result<()> {
        let u = self.control(t, &DVector::from_column_slice(states));
        if u.len() != out.len() {
            return Err(shape("centralized gain does not match the control buffer"));
        }
        out.copy_from_slice(u.as_slice());
        Ok(())
    }
}

impl Policy for PseudoBlockSchedule {
    fn horizon(&self) -> usize {
        self.gain.len()
    }

    fn controls(&self, t: usize, states: &[f64], out: &mut [f64]) -> Result<()> {
        let u = self.gain[t].apply_stacked(&DVector::from_column_slice(states))?;
        let f = &self.offset[t];
        if u.len() != out.len() {
            return Err(shape("pseudo-block gain does not match the control buffer"));
        }
        for (i, (o, x)) in out.iter_mut().zip(u.iter()).enumerate() {
            *o = x + f[i % f.len()];
        }
        Ok(())
    }
}

/// Disturbance realizations `wⁱ_{t+1}` for `t ∈ 0..T`, `i ∈ 0..k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbanceDraws {
    horizon: usize,
    k: usize,
    n: usize,
    values: Vec<f64>,
}

impl DisturbanceDraws {
    /// Draws i.i.d. over time and subsystems, time-major.
    pub fn sample<R: Rng + ?Sized>(
        disturbance: &DiscreteDisturbance,
        horizon: usize,
        k: usize,
        rng: &mut R,
    ) -> Self {
        let n = disturbance.dim();
        let support = disturbance.support();
        let mut values = Vec::with_capacity(horizon * k * n);
        for _ in 0..horizon * k {
            values.extend_from_slice(support[disturbance.sample_index(rng)].as_slice());
        }
        Self {
            horizon,
            k,
            n,
            values,
        }
    }

    pub fn from_values(horizon: usize, k: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != horizon * k * n {
            return Err(shape(format!(
                "{} draws do not fill {horizon}×{k}×{n}",
                values.len()
            )));
        }
        Ok(Self {
            horizon,
            k,
            n,
            values,
        })
    }

    /// The disturbance entering between `t` and `t + 1` for subsystem `i`.
    pub fn get(&self, t: usize, i: usize) -> &[f64] {
        let start = (t * self.k + i) * self.n;
        &self.values[start..start + self.n]
    }

    /// Reorders subsystem streams so that new stream `i` is old stream `perm[i]`.
    pub fn permute_subsystems(&self, perm: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for t in 0..self.horizon {
            for &j in perm {
                values.extend_from_slice(self.get(t, j));
            }
        }
        Self { values, ..*self }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

/// One closed-loop realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    pub horizon: usize,
    /// `xⁱ_t` at `((t·k) + i)·n`, `t ∈ 0..=T`.
    pub states: Vec<f64>,
    /// `uⁱ_t` at `((t·k) + i)·m`, `t ∈ 0..T`.
    pub controls: Vec<f64>,
    /// `Δⁱ_t` at `t·k + i`, `t ∈ 0..=T`; zero at `t = 0`.
    pub prediction_errors: Vec<f64>,
    /// `xⁱ_tᵀ Q_t xⁱ_t` at `t·k + i`.
    pub state_energy: Vec<f64>,
    /// `uⁱ_tᵀ R_t uⁱ_t` at `t·k + i`.
    pub control_energy: Vec<f64>,
    /// `c_t^x`, `t ∈ 0..=T`.
    pub state_cost: Vec<f64>,
    /// `c_t^Δ`, `t ∈ 0..=T`.
    pub risk_cost: Vec<f64>,
    /// `c_t^u`, `t ∈ 0..T`.
    pub control_cost: Vec<f64>,
    /// The realized objective `J`.
    pub total: f64,
}

impl Trajectory {
    pub fn state(&self, t: usize, i: usize) -> &[f64] {
        let start = (t * self.k + i) * self.n;
        &self.states[start..start + self.n]
    }

    pub fn control(&self, t: usize, i: usize) -> &[f64] {
        let start = (t * self.k + i) * self.m;
        &self.controls[start..start + self.m]
    }

    pub fn prediction_error(&self, t: usize, i: usize) -> f64 {
        self.prediction_errors[t * self.k + i]
    }

    /// All `k` stacked states at epoch `t`.
    pub fn states_at(&self, t: usize) -> &[f64] {
        let len = self.k * self.n;
        &self.states[t * len..(t + 1) * len]
    }
}

/// Simulates the closed loop under `policy` with pre-drawn disturbances.
pub fn rollout_with_draws(
    spec: &SystemSpec,
    policy: &dyn Policy,
    x0: &[DVector<f64>],
    draws: &DisturbanceDraws,
) -> Result<Trajectory> {
    let (k, n, m, horizon) = (spec.k(), spec.n(), spec.m(), spec.horizon());
    if x0.len() != k || x0.iter().any(|x| x.len() != n) {
        return Err(shape(format!("expected {k} initial states of length {n}")));
    }
    if policy.horizon() != horizon {
        return Err(shape(format!(
            "policy horizon {} differs from spec horizon {horizon}",
            policy.horizon()
        )));
    }
    if draws.horizon != horizon || draws.k != k || draws.n != n {
        return Err(shape("disturbance draws do not match the spec"));
    }

    let lambda = spec.lambda();
    let disturbance = spec.disturbance();
    let mu = disturbance.mean();
    let sigma = disturbance.covariance();

    let mut traj = Trajectory {
        k,
        n,
        m,
        horizon,
        states: Vec::with_capacity((horizon + 1) * k * n),
        controls: vec![0.0; horizon * k * m],
        prediction_errors: vec![0.0; (horizon + 1) * k],
        state_energy: vec![0.0; (horizon + 1) * k],
        control_energy: vec![0.0; horizon * k],
        state_cost: vec![0.0; horizon + 1],
        risk_cost: vec![0.0; horizon + 1],
        control_cost: vec![0.0; horizon],
        total: 0.0,
    };
    traj.states.extend_from_slice(stack(x0).as_slice());

    // one-step predictions x̂ⁱ_t = E(xⁱ_t | history up to t−1)
    let mut predicted = vec![0.0; k * n];
    let mut next = vec![0.0; k * n];

    for t in 0..=horizon {
        let q = spec.q(t);
        let trace_q_sigma = (q * &sigma).trace();
        let states = traj.states_at(t).to_vec();
        let xbar = block_mean(&states, n);

        let mut energy_sum = 0.0;
        let mut risk = 0.0;
        for i in 0..k {
            let x = &states[i * n..(i + 1) * n];
            let energy = quad_form(q, x);
            traj.state_energy[t * k + i] = energy;
            energy_sum += energy;
            if t > 0 {
                let xhat = &predicted[i * n..(i + 1) * n];
                let delta = energy - (quad_form(q, xhat) + trace_q_sigma);
                traj.prediction_errors[t * k + i] = delta;
                risk += delta * delta;
            }
        }
        traj.state_cost[t] = k as f64 * quad_form(spec.p(t), &xbar) + energy_sum;
        traj.risk_cost[t] = lambda * risk;

        if t == horizon {
            break;
        }

        let u_all = &mut traj.controls[t * k * m..(t + 1) * k * m];
        policy.controls(t, &states, u_all)?;

        let (a, b, c, r) = (spec.a(t), spec.b(t), spec.c(t), spec.r(t));
        let mut coupling = vec![0.0; n];
        mat_vec_acc(c, &xbar, &mut coupling);
        let mut control_sum = 0.0;
        for i in 0..k {
            let x = &states[i * n..(i + 1) * n];
            let u = &u_all[i * m..(i + 1) * m];
            let energy = quad_form(r, u);
            traj.control_energy[t * k + i] = energy;
            control_sum += energy;

            let pred = &mut predicted[i * n..(i + 1) * n];
            pred.copy_from_slice(&coupling);
            mat_vec_acc(a, x, pred);
            mat_vec_acc(b, u, pred);
            let w = draws.get(t, i);
            let out = &mut next[i * n..(i + 1) * n];
            for j in 0..n {
                out[j] = pred[j] + w[j];
                pred[j] += mu[j];
            }
        }
        traj.control_cost[t] = control_sum;
        traj.states.extend_from_slice(&next);
    }

    let mut total = 0.0;
    for t in 0..=horizon {
        total += traj.state_cost[t] + traj.risk_cost[t];
        if t < horizon {
            total += traj.control_cost[t];
        }
    }
    traj.total = total;
    Ok(traj)
}

/// Draws disturbances from `rng` and simulates the closed loop.
pub fn rollout<R: Rng + ?Sized>(
    spec: &SystemSpec,
    policy: &dyn Policy,
    x0: &[DVector<f64>],
    rng: &mut R,
) -> Result<Trajectory> {
    let draws = DisturbanceDraws::sample(spec.disturbance(), spec.horizon(), spec.k(), rng);
    rollout_with_draws(spec, policy, x0, &draws)
}

pub(crate) fn block_mean(stacked: &[f64], n: usize) -> Vec<f64> {
    let k = stacked.len() / n;
    let mut mean = vec![0.0; n];
    for block in stacked.chunks_exact(n) {
        for (m, x) in mean.iter_mut().zip(block) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= k as f64;
    }
    mean
}

/// `out += mat · x`.
pub(crate) fn mat_vec_acc(mat: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    let rows = mat.nrows();
    for (col, &xc) in mat.as_slice().chunks_exact(rows).zip(x) {
        for (o, &v) in out.iter_mut().zip(col) {
            *o += v * xc;
        }
    }
}

/// `xᵀ M x`.
pub(crate) fn quad_form(mat: &DMatrix<f64>, x: &[f64]) -> f64 {
    let rows = mat.nrows();
    mat.as_slice()
        .chunks_exact(rows)
        .zip(x)
        .map(|(col, &xc)| xc * col.iter().zip(x).map(|(v, xr)| v * xr).sum::<f64>())
        .sum()
}

/// `xᵀ v`.
pub(crate) fn dot(x: &[f64], v: &[f64]) -> f64 {
    x.iter().zip(v).map(|(a, b)| a * b).sum()
}
