//! Centralized reformulation over the stacked `nk`-dimensional state.
//!
//! [`solve_centralized`] runs the Riccati recursion on the dense Kronecker
//! expansions and never uses the pseudo-block product rules, so it serves as
//! an independent check on the decoupled solver. It is quadratic in `k` in
//! memory and cubic in time; use it for small instances only.

use nalgebra::{DMatrix, DVector};

use super::step::{affine_offset, linear_term, riccati_step, symmetrize};
use super::system::{risk_augmentation, SystemSpec};
use crate::error::Result;
use crate::pbd::{replicate, PseudoBlockMatrix};

/// Stacked problem data in pseudo-block form.
#[derive(Debug, Clone)]
pub struct CentralizedModel {
    pub k: usize,
    /// `Ã_t = φ_k(A_t, A_t + C_t)`.
    pub a: Vec<PseudoBlockMatrix>,
    /// `B̃_t = φ_k(B_t, B_t)`.
    pub b: Vec<PseudoBlockMatrix>,
    /// `Q̃_t^λ = φ_k(Q_t + Q_t^λ, Q̄_t + Q_t^λ)`.
    pub q_lambda: Vec<PseudoBlockMatrix>,
    /// `R̃_t = φ_k(R_t, R_t)`.
    pub r: Vec<PseudoBlockMatrix>,
    /// Common block of `b̃_t^λ = 1_k ⊗ b_t^λ`.
    pub b_lambda: Vec<DVector<f64>>,
    /// Common block of `μ̃ = 1_k ⊗ μ`.
    pub mu: DVector<f64>,
}

pub fn build_centralized(spec: &SystemSpec) -> Result<CentralizedModel> {
    let k = spec.k();
    let horizon = spec.horizon();
    let aug = risk_augmentation(spec)?;
    let mut model = CentralizedModel {
        k,
        a: Vec::with_capacity(horizon),
        b: Vec::with_capacity(horizon),
        q_lambda: Vec::with_capacity(horizon + 1),
        r: Vec::with_capacity(horizon),
        b_lambda: aug.b_lambda.clone(),
        mu: spec.disturbance().mean(),
    };
    for t in 0..horizon {
        model
            .a
            .push(PseudoBlockMatrix::new(k, spec.a(t).clone(), spec.a_bar(t))?);
        model
            .b
            .push(PseudoBlockMatrix::block_diagonal(k, spec.b(t).clone())?);
        model
            .r
            .push(PseudoBlockMatrix::block_diagonal(k, spec.r(t).clone())?);
    }
    for t in 0..=horizon {
        let q_lam = &aug.q_lambda[t];
        model.q_lambda.push(PseudoBlockMatrix::new(
            k,
            spec.q(t) + q_lam,
            spec.q_bar(t) + q_lam,
        )?);
    }
    Ok(model)
}

/// Dense centralized gains and value-function terms.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralizedGainSchedule {
    pub k: usize,
    /// `S̃_t`, `t ∈ 0..=T`.
    pub cost_to_go: Vec<DMatrix<f64>>,
    /// `g̃_t`, `t ∈ 0..=T`.
    pub linear_term: Vec<DVector<f64>>,
    /// `K̃_t`, `t ∈ 0..T`.
    pub gain: Vec<DMatrix<f64>>,
    /// `f̃_t`, `t ∈ 0..T`.
    pub offset: Vec<DVector<f64>>,
}

impl CentralizedGainSchedule {
    pub fn horizon(&self) -> usize {
        self.gain.len()
    }

    /// `ũ_t = K̃_t x̃_t + f̃_t` on the stacked state.
    pub fn control(&self, t: usize, stacked_state: &DVector<f64>) -> DVector<f64> {
        &self.gain[t] * stacked_state + &self.offset[t]
    }
}

/// Theorem-1 style recursion on the dense stacked system.
pub fn solve_centralized(spec: &SystemSpec) -> Result<CentralizedGainSchedule> {
    let model = build_centralized(spec)?;
    let k = model.k;
    let horizon = spec.horizon();
    let mu = replicate(&model.mu, k);

    let mut cost_to_go = vec![DMatrix::zeros(0, 0); horizon + 1];
    let mut linear = vec![DVector::zeros(0); horizon + 1];
    let mut gain = vec![DMatrix::zeros(0, 0); horizon];
    let mut offset = vec![DVector::zeros(0); horizon];

    cost_to_go[horizon] = symmetrize(model.q_lambda[horizon].to_dense());
    linear[horizon] = replicate(&model.b_lambda[horizon], k);

    for t in (0..horizon).rev() {
        let a = model.a[t].to_dense();
        let b = model.b[t].to_dense();
        let q = model.q_lambda[t].to_dense();
        let r = model.r[t].to_dense();
        let b_lambda = replicate(&model.b_lambda[t], k);
        let s_next = &cost_to_go[t + 1];
        let g_next = &linear[t + 1];

        let step = riccati_step(&a, &b, &q, &r, s_next)?;
        offset[t] = affine_offset(&step, &b, s_next, &mu, g_next);
        linear[t] = linear_term(&a, &b, &step.gain, s_next, &mu, g_next, &b_lambda);
        gain[t] = step.gain;
        cost_to_go[t] = step.cost_to_go;
    }

    Ok(CentralizedGainSchedule {
        k,
        cost_to_go,
        linear_term: linear,
        gain,
        offset,
    })
}
