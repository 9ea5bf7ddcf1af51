use nalgebra::{DMatrix, DVector};

use crate::disturbance::{DiscreteDisturbance, MomentSet};
use crate::error::{shape, Error, Result};

/// Absolute tolerance for symmetry and semidefiniteness of cost weights.
pub const WEIGHT_TOLERANCE: f64 = 1e-10;

/// Time-indexed problem matrices.
///
/// `a`, `b`, `c`, `r` hold one entry per step `t ∈ 0..T`; `p` and `q` hold one
/// entry per epoch `t ∈ 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices {
    pub a: Vec<DMatrix<f64>>,
    pub b: Vec<DMatrix<f64>>,
    pub c: Vec<DMatrix<f64>>,
    pub p: Vec<DMatrix<f64>>,
    pub q: Vec<DMatrix<f64>>,
    pub r: Vec<DMatrix<f64>>,
}

impl SystemMatrices {
    /// Time-invariant data repeated over a horizon.
    pub fn constant(
        horizon: usize,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        p: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
    ) -> Self {
        Self {
            a: vec![a; horizon],
            b: vec![b; horizon],
            c: vec![c; horizon],
            p: vec![p; horizon + 1],
            q: vec![q; horizon + 1],
            r: vec![r; horizon],
        }
    }

    /// Scalar (n = m = 1) time-invariant data.
    pub fn scalar(horizon: usize, a: f64, b: f64, c: f64, p: f64, q: f64, r: f64) -> Self {
        let s = |x| DMatrix::from_element(1, 1, x);
        Self::constant(horizon, s(a), s(b), s(c), s(p), s(q), s(r))
    }
}

/// A validated risk-aware mean-field coupled LQR instance.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    k: usize,
    n: usize,
    m: usize,
    matrices: SystemMatrices,
    lambda: f64,
    disturbance: DiscreteDisturbance,
}

impl SystemSpec {
    pub fn new(
        k: usize,
        matrices: SystemMatrices,
        lambda: f64,
        disturbance: DiscreteDisturbance,
    ) -> Result<Self> {
        if k == 0 {
            return Err(shape("subsystem count k must be at least 1"));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Invalid(format!(
                "risk parameter {lambda} must be >= 0"
            )));
        }
        let horizon = matrices.a.len();
        if horizon == 0 {
            return Err(shape("horizon must be at least 1"));
        }
        let counts = [
            ("B", matrices.b.len(), horizon),
            ("C", matrices.c.len(), horizon),
            ("R", matrices.r.len(), horizon),
            ("P", matrices.p.len(), horizon + 1),
            ("Q", matrices.q.len(), horizon + 1),
        ];
        for (name, got, want) in counts {
            if got != want {
                return Err(shape(format!("{name} has {got} entries, expected {want}")));
            }
        }
        let n = matrices.a[0].nrows();
        let m = matrices.b[0].ncols();
        if n == 0 || m == 0 {
            return Err(shape("state and input dimensions must be positive"));
        }
        for t in 0..horizon {
            expect_shape("A", t, &matrices.a[t], (n, n))?;
            expect_shape("B", t, &matrices.b[t], (n, m))?;
            expect_shape("C", t, &matrices.c[t], (n, n))?;
            expect_shape("R", t, &matrices.r[t], (m, m))?;
            check_symmetric("R", t, &matrices.r[t])?;
            if min_eigenvalue(&matrices.r[t]) <= 0.0 {
                return Err(Error::Invalid(format!("R[{t}] is not positive definite")));
            }
        }
        for t in 0..=horizon {
            for (name, w) in [("P", &matrices.p[t]), ("Q", &matrices.q[t])] {
                expect_shape(name, t, w, (n, n))?;
                check_symmetric(name, t, w)?;
                if min_eigenvalue(w) < -WEIGHT_TOLERANCE {
                    return Err(Error::Invalid(format!(
                        "{name}[{t}] is not positive semidefinite"
                    )));
                }
            }
        }
        if disturbance.dim() != n {
            return Err(shape(format!(
                "disturbance has dimension {}, state has {n}",
                disturbance.dim()
            )));
        }
        Ok(Self {
            k,
            n,
            m,
            matrices,
            lambda,
            disturbance,
        })
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(
            self.k,
            self.matrices.clone(),
            lambda,
            self.disturbance.clone(),
        )
    }

    pub fn with_k(&self, k: usize) -> Result<Self> {
        Self::new(
            k,
            self.matrices.clone(),
            self.lambda,
            self.disturbance.clone(),
        )
    }

    pub fn with_disturbance(&self, disturbance: DiscreteDisturbance) -> Result<Self> {
        Self::new(self.k, self.matrices.clone(), self.lambda, disturbance)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// State dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Input dimension.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn horizon(&self) -> usize {
        self.matrices.a.len()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn disturbance(&self) -> &DiscreteDisturbance {
        &self.disturbance
    }

    pub fn matrices(&self) -> &SystemMatrices {
        &self.matrices
    }

    pub fn a(&self, t: usize) -> &DMatrix<f64> {
        &self.matrices.a[t]
    }

    pub fn b(&self, t: usize) -> &DMatrix<f64> {
        &self.matrices.b[t]
    }

    pub fn c(&self, t: usize) -> &DMatrix<f64> {
        &self.matrices.c[t]
    }

    pub fn p(&self, t: usize) -> &DMatrix<f64> {
        &self.matrices.p[t]
    }

    pub fn q(&self, t: usize) -> &DMatrix<f64> {
        &self.matrices.q[t]
    }

    pub fn r(&self, t: usize) -> &DMatrix<f64> {
        &self.matrices.r[t]
    }

    /// Mean-field dynamics `Ā_t = A_t + C_t`.
    pub fn a_bar(&self, t: usize) -> DMatrix<f64> {
        &self.matrices.a[t] + &self.matrices.c[t]
    }

    /// Mean-field state weight `Q̄_t = P_t + Q_t`.
    pub fn q_bar(&self, t: usize) -> DMatrix<f64> {
        &self.matrices.p[t] + &self.matrices.q[t]
    }
}

/// Quadratic and linear state weights added by the predictive-variance cost.
#[derive(Debug, Clone)]
pub struct RiskAugmentation {
    /// Exact disturbance moments against each `Q_t`, `t ∈ 0..=T`.
    pub moments: Vec<MomentSet>,
    /// `Q_t^λ = 4λ Q_t Σ Q_t`.
    pub q_lambda: Vec<DMatrix<f64>>,
    /// `b_t^λ = 4λ Q_t γ_t`.
    pub b_lambda: Vec<DVector<f64>>,
}

impl RiskAugmentation {
    /// `ℓ_t = δ_t − 4 tr((Σ Q_t)²)`.
    pub fn ell(&self, spec: &SystemSpec, t: usize) -> f64 {
        self.moments[t].ell(spec.q(t))
    }
}

pub fn risk_augmentation(spec: &SystemSpec) -> Result<RiskAugmentation> {
    let lambda = spec.lambda();
    let horizon = spec.horizon();
    let mut moments = Vec::with_capacity(horizon + 1);
    let mut q_lambda = Vec::with_capacity(horizon + 1);
    let mut b_lambda = Vec::with_capacity(horizon + 1);
    for t in 0..=horizon {
        let q = spec.q(t);
        let set = spec.disturbance().moments(q)?;
        let quad = q * &set.sigma * q * (4.0 * lambda);
        q_lambda.push((&quad + quad.transpose()) * 0.5);
        b_lambda.push(q * &set.gamma * (4.0 * lambda));
        moments.push(set);
    }
    Ok(RiskAugmentation {
        moments,
        q_lambda,
        b_lambda,
    })
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

fn expect_shape(name: &str, t: usize, m: &DMatrix<f64>, want: (usize, usize)) -> Result<()> {
    if m.shape() != want {
        return Err(shape(format!(
            "{name}[{t}] is {:?}, expected {want:?}",
            m.shape()
        )));
    }
    Ok(())
}

fn check_symmetric(name: &str, t: usize, m: &DMatrix<f64>) -> Result<()> {
    if (m - m.transpose()).abs().max() > WEIGHT_TOLERANCE {
        return Err(Error::Invalid(format!("{name}[{t}] is not symmetric")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference(lambda: f64) -> SystemSpec {
        SystemSpec::new(
            250,
            SystemMatrices::scalar(50, 1.1, 0.3, 0.2, 0.4, 0.8, 1.2),
            lambda,
            DiscreteDisturbance::shifted_bernoulli(10.0, 0.25).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn risk_augmentation_zero_lambda() {
        let aug = risk_augmentation(&reference(0.0)).unwrap();
        assert!(aug.q_lambda.iter().all(|q| q.iter().all(|x| *x == 0.0)));
        assert!(aug.b_lambda.iter().all(|b| b.iter().all(|x| *x == 0.0)));
    }

    #[test]
    fn risk_augmentation_reference_values() {
        // 4λ·0.8·18.75·0.8 = 48λ and 4λ·0.8·75 = 240λ
        let lambda = 0.1;
        let aug = risk_augmentation(&reference(lambda)).unwrap();
        assert_eq!(aug.q_lambda.len(), 51);
        for t in 0..=50 {
            assert!((aug.q_lambda[t][(0, 0)] - 48.0 * lambda).abs() < 1e-12);
            assert!((aug.b_lambda[t][0] - 240.0 * lambda).abs() < 1e-11);
        }
    }

    #[test]
    fn risk_augmentation_symmetric_noise() {
        let spec = reference(0.5)
            .with_disturbance(DiscreteDisturbance::scalar(&[(2.0, 0.5), (-2.0, 0.5)]).unwrap())
            .unwrap();
        let aug = risk_augmentation(&spec).unwrap();
        assert!(aug.b_lambda.iter().all(|b| b[0] == 0.0));
    }

    #[test]
    fn rejects_invalid_specs() {
        let d = DiscreteDisturbance::shifted_bernoulli(10.0, 0.25).unwrap();
        let base = SystemMatrices::scalar(3, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0);
        assert!(SystemSpec::new(0, base.clone(), 0.0, d.clone()).is_err());
        assert!(SystemSpec::new(2, base.clone(), -1.0, d.clone()).is_err());

        let mut bad_r = base.clone();
        bad_r.r[1] = DMatrix::from_element(1, 1, 0.0);
        assert!(SystemSpec::new(2, bad_r, 0.0, d.clone()).is_err());

        let mut bad_q = base.clone();
        bad_q.q[3] = DMatrix::from_element(1, 1, -0.1);
        assert!(SystemSpec::new(2, bad_q, 0.0, d.clone()).is_err());

        let mut short = base.clone();
        short.p.pop();
        assert!(SystemSpec::new(2, short, 0.0, d.clone()).is_err());

        let mut asym = SystemMatrices::constant(
            2,
            DMatrix::identity(2, 2),
            DMatrix::from_element(2, 1, 1.0),
            DMatrix::zeros(2, 2),
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            DMatrix::identity(1, 1),
        );
        asym.q[0][(0, 1)] = 0.5;
        let d2 = DiscreteDisturbance::degenerate(DVector::zeros(2)).unwrap();
        assert!(SystemSpec::new(2, asym, 0.0, d2).is_err());

        // disturbance dimension mismatch
        let two_dim = DiscreteDisturbance::degenerate(DVector::zeros(2)).unwrap();
        assert!(SystemSpec::new(2, base, 0.0, two_dim).is_err());
    }
}
