//! Finite discrete disturbance models.
//!
//! Every disturbance `w` has finitely many atoms, so the central moments the
//! risk-aware cost depends on are exact finite sums over the atoms, with
//! `d = w − μ` the centered disturbance:
//!
//! - `Σ = E(d dᵀ)`
//! - `γ(Q) = E(d dᵀ Q d)`
//! - `δ(Q) = E((dᵀ Q d − tr(Σ Q))²)`

use nalgebra::{DMatrix, DVector};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{shape, Error, Result};

/// Allowed deviation of the probability sum from one.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct DiscreteDisturbance {
    support: Vec<DVector<f64>>,
    probs: Vec<f64>,
    sampler: WeightedIndex<f64>,
}

/// Exact moments of a disturbance for one cost weight `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    pub mu: DVector<f64>,
    pub sigma: DMatrix<f64>,
    pub gamma: DVector<f64>,
    pub delta: f64,
}

impl MomentSet {
    /// `δ − 4 tr((Σ Q)²)`, the constant part of the predictive variance.
    pub fn ell(&self, q: &DMatrix<f64>) -> f64 {
        let sq = &self.sigma * q;
        self.delta - 4.0 * (&sq * &sq).trace()
    }

    /// `tr(Σ Q)`.
    pub fn trace_sigma_q(&self, q: &DMatrix<f64>) -> f64 {
        (&self.sigma * q).trace()
    }
}

impl DiscreteDisturbance {
    /// Validates and normalizes a distribution.
    ///
    /// Probabilities must be nonnegative and sum to one within
    /// [`PROBABILITY_TOLERANCE`]; they are rescaled to sum to one exactly.
    pub fn new(support: Vec<DVector<f64>>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Invalid("disturbance needs at least one atom".into()));
        }
        if support.len() != probs.len() {
            return Err(shape(format!(
                "{} support points but {} probabilities",
                support.len(),
                probs.len()
            )));
        }
        let n = support[0].len();
        if n == 0 || support.iter().any(|w| w.len() != n) {
            return Err(shape("support vectors must share one nonzero dimension"));
        }
        if support.iter().any(|w| w.iter().any(|x| !x.is_finite())) {
            return Err(Error::Invalid("support points must be finite".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::Invalid("probabilities must be nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::Invalid(format!(
                "probabilities sum to {total}, not 1 within {PROBABILITY_TOLERANCE:e}"
            )));
        }
        let probs: Vec<f64> = probs.iter().map(|p| p / total).collect();
        let sampler = WeightedIndex::new(&probs)
            .map_err(|e| Error::Invalid(format!("cannot sample from probabilities: {e}")))?;
        Ok(Self {
            support,
            probs,
            sampler,
        })
    }

    /// A single atom with probability one.
    pub fn degenerate(atom: DVector<f64>) -> Result<Self> {
        Self::new(vec![atom], vec![1.0])
    }

    /// Scalar distribution from `(value, probability)` pairs.
    pub fn scalar(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            atoms
                .iter()
                .map(|&(w, _)| DVector::from_element(1, w))
                .collect(),
            atoms.iter().map(|&(_, p)| p).collect(),
        )
    }

    /// `scale · (Bernoulli(p) − p)`: the value `scale·(1−p)` w.p. `p`, else `−scale·p`.
    pub fn shifted_bernoulli(scale: f64, p: f64) -> Result<Self> {
        Self::scalar(&[(scale * (1.0 - p), p), (-scale * p, 1.0 - p)])
    }

    pub fn dim(&self) -> usize {
        self.support[0].len()
    }

    pub fn support(&self) -> &[DVector<f64>] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> DVector<f64> {
        self.weighted_sum(|w| w.clone())
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let mu = self.mean();
        let n = self.dim();
        let mut sigma = DMatrix::zeros(n, n);
        for (w, p) in self.support.iter().zip(&self.probs) {
            let d = w - &mu;
            sigma += (&d * d.transpose()) * *p;
        }
        (&sigma + sigma.transpose()) * 0.5
    }

    /// `E(d dᵀ Q d)`.
    pub fn gamma(&self, q: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_weight(q)?;
        let mu = self.mean();
        Ok(self.weighted_sum(|w| {
            let d = w - &mu;
            let energy = d.dot(&(q * &d));
            d * energy
        }))
    }

    /// `E((dᵀ Q d − tr(Σ Q))²)`.
    pub fn delta(&self, q: &DMatrix<f64>) -> Result<f64> {
        self.check_weight(q)?;
        let mu = self.mean();
        let trace = (self.covariance() * q).trace();
        Ok(self
            .support
            .iter()
            .zip(&self.probs)
            .map(|(w, p)| {
                let d = w - &mu;
                let dev = d.dot(&(q * &d)) - trace;
                p * dev * dev
            })
            .sum())
    }

    pub fn moments(&self, q: &DMatrix<f64>) -> Result<MomentSet> {
        Ok(MomentSet {
            mu: self.mean(),
            sigma: self.covariance(),
            gamma: self.gamma(q)?,
            delta: self.delta(q)?,
        })
    }

    /// Index of a random atom.
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sampler.sample(rng)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        self.support[self.sample_index(rng)].clone()
    }

    /// Same probabilities with every atom mapped through `f`.
    pub fn map_support(&self, f: impl Fn(&DVector<f64>) -> DVector<f64>) -> Result<Self> {
        Self::new(self.support.iter().map(f).collect(), self.probs.clone())
    }

    fn weighted_sum(&self, f: impl Fn(&DVector<f64>) -> DVector<f64>) -> DVector<f64> {
        let mut acc = DVector::zeros(self.dim());
        for (w, p) in self.support.iter().zip(&self.probs) {
            acc += f(w) * *p;
        }
        acc
    }

    fn check_weight(&self, q: &DMatrix<f64>) -> Result<()> {
        let n = self.dim();
        if q.shape() != (n, n) {
            return Err(shape(format!(
                "weight is {:?}, expected ({n}, {n})",
                q.shape()
            )));
        }
        Ok(())
    }
}
