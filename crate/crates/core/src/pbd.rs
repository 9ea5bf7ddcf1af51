//! Pseudo-block diagonal matrices.
//!
//! A pseudo-block diagonal matrix with `k` replicas is
//! `I_k ⊗ M + E_k ⊗ (M̄ − M)`, where `E_k = (1/k) 1 1ᵀ` is the rank-one
//! averaging matrix. It is block diagonal with block `M` plus a perturbation
//! whose blocks are all `(M̄ − M)/k`. The family is closed under transpose,
//! scaling, addition, multiplication and (when both factors are invertible)
//! inversion, and every such operation acts on `M` and `M̄` independently.
//! That is what lets the centralized `nk`-dimensional Riccati recursion be
//! carried out on two `n`-dimensional recursions.
//!
//! The dense Kronecker expansion ([`PseudoBlockMatrix::to_dense`]) is
//! quadratic in `k` and is meant for verification on small instances only.

use nalgebra::{DMatrix, DVector};

use crate::error::{shape, Error, Factor, Result};

/// Dense real matrix used for oracle expansions and small centralized solves.
pub type DenseMatrix = DMatrix<f64>;

/// Condition-number estimate above which a factor is treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoBlockMatrix {
    k: usize,
    inner: DMatrix<f64>,
    mean: DMatrix<f64>,
}

/// Builds `I_k ⊗ inner + E_k ⊗ (mean − inner)` in factored form.
pub fn phi(k: usize, inner: DMatrix<f64>, mean: DMatrix<f64>) -> Result<PseudoBlockMatrix> {
    PseudoBlockMatrix::new(k, inner, mean)
}

impl PseudoBlockMatrix {
    pub fn new(k: usize, inner: DMatrix<f64>, mean: DMatrix<f64>) -> Result<Self> {
        if k == 0 {
            return Err(shape("replication count k must be at least 1"));
        }
        if inner.shape() != mean.shape() {
            return Err(shape(format!(
                "inner block is {:?} but mean block is {:?}",
                inner.shape(),
                mean.shape()
            )));
        }
        Ok(Self { k, inner, mean })
    }

    /// Block diagonal `I_k ⊗ block`.
    pub fn block_diagonal(k: usize, block: DMatrix<f64>) -> Result<Self> {
        Self::new(k, block.clone(), block)
    }

    pub fn identity(k: usize, n: usize) -> Result<Self> {
        Self::block_diagonal(k, DMatrix::identity(n, n))
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn inner(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn mean(&self) -> &DMatrix<f64> {
        &self.mean
    }

    /// `(rows, cols)` of a single block.
    pub fn block_shape(&self) -> (usize, usize) {
        self.inner.shape()
    }

    /// `(rows, cols)` of the full `(rk) × (ck)` matrix.
    pub fn dense_shape(&self) -> (usize, usize) {
        let (r, c) = self.block_shape();
        (r * self.k, c * self.k)
    }

    pub fn into_parts(self) -> (usize, DMatrix<f64>, DMatrix<f64>) {
        (self.k, self.inner, self.mean)
    }

    /// Expands to `I_k ⊗ M + E_k ⊗ (M̄ − M)`.
    pub fn to_dense(&self) -> DenseMatrix {
        let identity = DMatrix::<f64>::identity(self.k, self.k);
        let averaging = averaging_matrix(self.k);
        identity.kronecker(&self.inner) + averaging.kronecker(&(&self.mean - &self.inner))
    }

    pub fn transpose(&self) -> Self {
        Self {
            k: self.k,
            inner: self.inner.transpose(),
            mean: self.mean.transpose(),
        }
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            k: self.k,
            inner: &self.inner * factor,
            mean: &self.mean * factor,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_k(other)?;
        if self.block_shape() != other.block_shape() {
            return Err(shape(format!(
                "cannot add blocks {:?} and {:?}",
                self.block_shape(),
                other.block_shape()
            )));
        }
        Ok(Self {
            k: self.k,
            inner: &self.inner + &other.inner,
            mean: &self.mean + &other.mean,
        })
    }

    /// `φ_k(M, M̄) φ_k(N, N̄) = φ_k(MN, M̄N̄)`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_k(other)?;
        if self.inner.ncols() != other.inner.nrows() {
            return Err(shape(format!(
                "cannot multiply blocks {:?} and {:?}",
                self.block_shape(),
                other.block_shape()
            )));
        }
        Ok(Self {
            k: self.k,
            inner: &self.inner * &other.inner,
            mean: &self.mean * &other.mean,
        })
    }

    /// `φ_k(M, M̄)⁻¹ = φ_k(M⁻¹, M̄⁻¹)`.
    pub fn inverse(&self) -> Result<Self> {
        let inner = checked_inverse(&self.inner, Factor::Inner)?;
        let mean = checked_inverse(&self.mean, Factor::Mean)?;
        Ok(Self {
            k: self.k,
            inner,
            mean,
        })
    }

    /// Action on a replicated vector `1_k ⊗ v`; returns the common block `M̄ v`.
    pub fn apply_replicated(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        if v.len() != self.inner.ncols() {
            return Err(shape(format!(
                "vector of length {} does not match block width {}",
                v.len(),
                self.inner.ncols()
            )));
        }
        Ok(&self.mean * v)
    }

    /// Action on a stacked vector of `k` blocks in `O(k)` block products.
    ///
    /// Block `i` of the result is `M xⁱ + (M̄ − M) x̄` with `x̄` the block mean.
    pub fn apply_stacked(&self, xs: &DVector<f64>) -> Result<DVector<f64>> {
        let (rows, cols) = self.block_shape();
        if xs.len() != cols * self.k {
            return Err(shape(format!(
                "stacked vector of length {} does not hold {} blocks of size {}",
                xs.len(),
                self.k,
                cols
            )));
        }
        let blocks = split_blocks(xs, self.k)?;
        let xbar = mean_field(&blocks)?;
        let coupling = (&self.mean - &self.inner) * xbar;
        let mut out = DVector::zeros(rows * self.k);
        for (i, block) in blocks.iter().enumerate() {
            let y = &self.inner * block + &coupling;
            out.rows_mut(i * rows, rows).copy_from(&y);
        }
        Ok(out)
    }

    fn check_k(&self, other: &Self) -> Result<()> {
        if self.k != other.k {
            return Err(shape(format!(
                "replication counts differ: {} vs {}",
                self.k, other.k
            )));
        }
        Ok(())
    }
}

/// Dense `E_k = (1/k) 1_k 1_kᵀ`.
pub fn averaging_matrix(k: usize) -> DMatrix<f64> {
    DMatrix::from_element(k, k, 1.0 / k as f64)
}

/// Arithmetic mean of equally sized blocks.
pub fn mean_field(blocks: &[DVector<f64>]) -> Result<DVector<f64>> {
    let first = blocks
        .first()
        .ok_or_else(|| shape("mean field of zero blocks"))?;
    let mut sum = DVector::zeros(first.len());
    for block in blocks {
        if block.len() != first.len() {
            return Err(shape(format!(
                "blocks of unequal size {} and {}",
                first.len(),
                block.len()
            )));
        }
        sum += block;
    }
    Ok(sum / blocks.len() as f64)
}

/// Concatenates blocks into one stacked vector.
pub fn stack(blocks: &[DVector<f64>]) -> DVector<f64> {
    let len = blocks.iter().map(|b| b.len()).sum();
    DVector::from_iterator(len, blocks.iter().flat_map(|b| b.iter().copied()))
}

/// Splits a stacked vector into `k` equal blocks.
pub fn split_blocks(xs: &DVector<f64>, k: usize) -> Result<Vec<DVector<f64>>> {
    if k == 0 || !xs.len().is_multiple_of(k) {
        return Err(shape(format!(
            "cannot split a vector of length {} into {} equal blocks",
            xs.len(),
            k
        )));
    }
    let size = xs.len() / k;
    Ok((0..k)
        .map(|i| xs.rows(i * size, size).into_owned())
        .collect())
}

/// `1_k ⊗ v`.
pub fn replicate(v: &DVector<f64>, k: usize) -> DVector<f64> {
    DVector::from_iterator(v.len() * k, (0..k).flat_map(|_| v.iter().copied()))
}

fn checked_inverse(m: &DMatrix<f64>, factor: Factor) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Singular {
            factor,
            detail: format!("{:?} block is not square", m.shape()),
        });
    }
    let inv = m
        .clone()
        .lu()
        .try_inverse()
        .ok_or_else(|| Error::Singular {
            factor,
            detail: "LU factorization has a zero pivot".into(),
        })?;
    let condition = norm_one(m) * norm_one(&inv);
    if !condition.is_finite() || condition > SINGULAR_CONDITION {
        return Err(Error::Singular {
            factor,
            detail: format!("condition estimate {condition:e} exceeds {SINGULAR_CONDITION:e}"),
        });
    }
    Ok(inv)
}

fn norm_one(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
