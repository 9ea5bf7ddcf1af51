use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// One backward Riccati step for `x⁺ = A x + B u` with stage weights `(Q, R)`.
pub(crate) struct RiccatiStep {
    pub cost_to_go: DMatrix<f64>,
    pub gain: DMatrix<f64>,
    /// Factor of `R + Bᵀ S⁺ B`.
    pub hessian: Cholesky<f64, Dyn>,
}

pub(crate) fn riccati_step(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    s_next: &DMatrix<f64>,
) -> Result<RiccatiStep> {
    let sb = s_next * b;
    let hessian = symmetrize(r + b.transpose() * &sb);
    let hessian = hessian
        .cholesky()
        .ok_or_else(|| Error::Numerical("R + BᵀSB is not positive definite".into()))?;
    let gain = -hessian.solve(&(sb.transpose() * a));
    // −AᵀSB(R+BᵀSB)⁻¹BᵀSA = AᵀSB K
    let cost_to_go = a.transpose() * s_next * a + a.transpose() * &sb * &gain + q;
    Ok(RiccatiStep {
        cost_to_go: symmetrize(cost_to_go),
        gain,
        hessian,
    })
}

/// `f = −(R + BᵀS⁺B)⁻¹ Bᵀ (S⁺ μ + g⁺/2)`.
pub(crate) fn affine_offset(
    step: &RiccatiStep,
    b: &DMatrix<f64>,
    s_next: &DMatrix<f64>,
    mu: &DVector<f64>,
    g_next: &DVector<f64>,
) -> DVector<f64> {
    let rhs = b.transpose() * (s_next * mu + g_next * 0.5);
    -step.hessian.solve(&rhs)
}

/// `g = (A + B K)ᵀ (2 S⁺ μ + g⁺) + b`.
pub(crate) fn linear_term(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    gain: &DMatrix<f64>,
    s_next: &DMatrix<f64>,
    mu: &DVector<f64>,
    g_next: &DVector<f64>,
    b_lambda: &DVector<f64>,
) -> DVector<f64> {
    let closed_loop = a + b * gain;
    closed_loop.transpose() * (s_next * mu * 2.0 + g_next) + b_lambda
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}
