use nalgebra::{DMatrix, DVector};

use super::centralized::CentralizedGainSchedule;
use super::step::{affine_offset, linear_term, riccati_step, symmetrize};
use super::system::{risk_augmentation, SystemSpec};
use crate::error::{shape, Error, Result};
use crate::pbd::{replicate, PseudoBlockMatrix};

/// Decoupled gains for `uⁱ_t = K_t xⁱ_t + (K̄_t − K_t) x̄_t + f_t`.
///
/// `S_t` and `S̄_t` come from two independent `n`-dimensional Riccati
/// recursions: one on `(A_t, Q_t + Q_t^λ)` for deviations from the mean
/// field and one on `(A_t + C_t, P_t + Q_t + Q_t^λ)` for the mean field
/// itself. Nothing here depends on the subsystem count.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldGainSchedule {
    /// `S_t`, `t ∈ 0..=T`.
    pub cost_to_go: Vec<DMatrix<f64>>,
    /// `S̄_t`, `t ∈ 0..=T`.
    pub cost_to_go_bar: Vec<DMatrix<f64>>,
    /// `g_t`, `t ∈ 0..=T`.
    pub linear_term: Vec<DVector<f64>>,
    /// `K_t`, `t ∈ 0..T`.
    pub gain: Vec<DMatrix<f64>>,
    /// `K̄_t`, `t ∈ 0..T`.
    pub gain_bar: Vec<DMatrix<f64>>,
    /// `f_t`, `t ∈ 0..T`.
    pub offset: Vec<DVector<f64>>,
}

impl MeanFieldGainSchedule {
    pub fn horizon(&self) -> usize {
        self.gain.len()
    }

    pub fn state_dim(&self) -> usize {
        self.cost_to_go[0].nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.gain[0].nrows()
    }

    /// Control for one subsystem from its own state and the mean field.
    pub fn control(
        &self,
        t: usize,
        state: &DVector<f64>,
        mean_field: &DVector<f64>,
    ) -> Result<DVector<f64>> {
        if t >= self.horizon() {
            return Err(Error::Range {
                index: t,
                len: self.horizon(),
            });
        }
        let n = self.state_dim();
        if state.len() != n || mean_field.len() != n {
            return Err(shape(format!(
                "state and mean field must have length {n}, got {} and {}",
                state.len(),
                mean_field.len()
            )));
        }
        let k = &self.gain[t];
        let coupling = &self.gain_bar[t] - k;
        Ok(k * state + coupling * mean_field + &self.offset[t])
    }
}

pub fn solve_mean_field(spec: &SystemSpec) -> Result<MeanFieldGainSchedule> {
    let horizon = spec.horizon();
    let aug = risk_augmentation(spec)?;
    let mu = spec.disturbance().mean();

    let mut s = vec![DMatrix::zeros(0, 0); horizon + 1];
    let mut s_bar = vec![DMatrix::zeros(0, 0); horizon + 1];
    let mut g = vec![DVector::zeros(0); horizon + 1];
    let mut gain = vec![DMatrix::zeros(0, 0); horizon];
    let mut gain_bar = vec![DMatrix::zeros(0, 0); horizon];
    let mut offset = vec![DVector::zeros(0); horizon];

    let q_lam = &aug.q_lambda;
    s[horizon] = symmetrize(spec.q(horizon) + &q_lam[horizon]);
    s_bar[horizon] = symmetrize(spec.q_bar(horizon) + &q_lam[horizon]);
    g[horizon] = aug.b_lambda[horizon].clone();

    for t in (0..horizon).rev() {
        let a = spec.a(t);
        let a_bar = spec.a_bar(t);
        let b = spec.b(t);
        let r = spec.r(t);

        let deviation = riccati_step(a, b, &(spec.q(t) + &q_lam[t]), r, &s[t + 1])?;
        let mean = riccati_step(&a_bar, b, &(spec.q_bar(t) + &q_lam[t]), r, &s_bar[t + 1])?;

        offset[t] = affine_offset(&mean, b, &s_bar[t + 1], &mu, &g[t + 1]);
        g[t] = linear_term(
            &a_bar,
            b,
            &mean.gain,
            &s_bar[t + 1],
            &mu,
            &g[t + 1],
            &aug.b_lambda[t],
        );
        gain[t] = deviation.gain;
        gain_bar[t] = mean.gain;
        s[t] = deviation.cost_to_go;
        s_bar[t] = mean.cost_to_go;
    }

    Ok(MeanFieldGainSchedule {
        cost_to_go: s,
        cost_to_go_bar: s_bar,
        linear_term: g,
        gain,
        gain_bar,
        offset,
    })
}

/// The centralized schedule in factored form, rebuilt from a decoupled one.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoBlockSchedule {
    pub k: usize,
    /// `S̃_t = φ_k(S_t, S̄_t)`.
    pub cost_to_go: Vec<PseudoBlockMatrix>,
    /// Common block of `g̃_t = 1_k ⊗ g_t`.
    pub linear_term: Vec<DVector<f64>>,
    /// `K̃_t = φ_k(K_t, K̄_t)`.
    pub gain: Vec<PseudoBlockMatrix>,
    /// Common block of `f̃_t = 1_k ⊗ f_t`.
    pub offset: Vec<DVector<f64>>,
}

impl PseudoBlockSchedule {
    pub fn to_dense(&self) -> CentralizedGainSchedule {
        CentralizedGainSchedule {
            k: self.k,
            cost_to_go: self.cost_to_go.iter().map(|s| s.to_dense()).collect(),
            linear_term: self
                .linear_term
                .iter()
                .map(|g| replicate(g, self.k))
                .collect(),
            gain: self.gain.iter().map(|g| g.to_dense()).collect(),
            offset: self.offset.iter().map(|f| replicate(f, self.k)).collect(),
        }
    }
}

pub fn reconstruct_centralized(
    schedule: &MeanFieldGainSchedule,
    k: usize,
) -> Result<PseudoBlockSchedule> {
    let cost_to_go = schedule
        .cost_to_go
        .iter()
        .zip(&schedule.cost_to_go_bar)
        .map(|(s, s_bar)| PseudoBlockMatrix::new(k, s.clone(), s_bar.clone()))
        .collect::<Result<_>>()?;
    let gain = schedule
        .gain
        .iter()
        .zip(&schedule.gain_bar)
        .map(|(kk, k_bar)| PseudoBlockMatrix::new(k, kk.clone(), k_bar.clone()))
        .collect::<Result<_>>()?;
    Ok(PseudoBlockSchedule {
        k,
        cost_to_go,
        linear_term: schedule.linear_term.clone(),
        gain,
        offset: schedule.offset.clone(),
    })
}
