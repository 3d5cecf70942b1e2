//! Forward operators for the inverse problems handled by this crate.
//!
//! An [`Operator`] is an immutable handle for a linear map together with its
//! exact adjoint. The enum covers the desk-scale problem classes we study —
//! dense maps, circular convolution, coordinate sampling — plus composition.
//! Circular (periodic) convolution is used deliberately: the adjoint is a
//! kernel reversal and the spectrum is the discrete Fourier symbol, both
//! exact, which makes independent test oracles cheap.

use crate::error::{Error, Result};
use crate::mat::{jacobi_svd, Mat};
use crate::rng::{norm, seeded_rng, unit_vector};

/// Dense materialization refuses above this entry count; everything in the
/// intended regime (n ≤ 256) stays far below it.
pub const MATERIALIZE_BUDGET: usize = 1 << 20;

/// Singular values below `DEFAULT_RANK_TOL · s_max` are treated as exact zeros.
pub const DEFAULT_RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub enum Operator {
    Dense(Mat),
    /// Periodic convolution on signals of length `kernel.len()`.
    CircularConvolution { kernel: Vec<f64> },
    /// Selects the listed coordinates of a length-`n` vector, in order.
    MaskedSampling { indices: Vec<usize>, n: usize },
    Composed { outer: Box<Operator>, inner: Box<Operator> },
}

impl Operator {
    pub fn dense(a: Mat) -> Self {
        Operator::Dense(a)
    }

    pub fn circular_convolution(kernel: Vec<f64>) -> Result<Self> {
        if kernel.is_empty() {
            return Err(Error::invalid("circular convolution needs a nonempty kernel"));
        }
        Ok(Operator::CircularConvolution { kernel })
    }

    pub fn masked_sampling(indices: Vec<usize>, n: usize) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::invalid("sampling mask selects no coordinates"));
        }
        for w in indices.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::invalid(format!(
                    "sampling indices must be strictly ascending, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        let last = *indices.last().unwrap();
        if last >= n {
            return Err(Error::invalid(format!(
                "sampling index {last} out of range for length {n}"
            )));
        }
        Ok(Operator::MaskedSampling { indices, n })
    }

    pub fn composed(outer: Operator, inner: Operator) -> Result<Self> {
        if inner.out_dim() != outer.in_dim() {
            return Err(Error::DimensionMismatch {
                context: "operator composition (outer ∘ inner)",
                expected: outer.in_dim(),
                got: inner.out_dim(),
            });
        }
        Ok(Operator::Composed {
            outer: Box::new(outer),
            inner: Box::new(inner),
        })
    }

    pub fn in_dim(&self) -> usize {
        match self {
            Operator::Dense(a) => a.cols(),
            Operator::CircularConvolution { kernel } => kernel.len(),
            Operator::MaskedSampling { n, .. } => *n,
            Operator::Composed { inner, .. } => inner.in_dim(),
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            Operator::Dense(a) => a.rows(),
            Operator::CircularConvolution { kernel } => kernel.len(),
            Operator::MaskedSampling { indices, .. } => indices.len(),
            Operator::Composed { outer, .. } => outer.out_dim(),
        }
    }
}

pub fn apply(op: &Operator, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != op.in_dim() {
        return Err(Error::DimensionMismatch {
            context: "apply",
            expected: op.in_dim(),
            got: x.len(),
        });
    }
    Ok(match op {
        Operator::Dense(a) => a.matvec(x),
        Operator::CircularConvolution { kernel } => {
            let n = kernel.len();
            (0..n)
                .map(|j| {
                    (0..n)
                        .map(|m| kernel[m] * x[(j + n - m) % n])
                        .sum::<f64>()
                })
                .collect()
        }
        Operator::MaskedSampling { indices, .. } => indices.iter().map(|&i| x[i]).collect(),
        Operator::Composed { outer, inner } => apply(outer, &apply(inner, x)?)?,
    })
}

pub fn adjoint_apply(op: &Operator, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != op.out_dim() {
        return Err(Error::DimensionMismatch {
            context: "adjoint_apply",
            expected: op.out_dim(),
            got: y.len(),
        });
    }
    Ok(match op {
        Operator::Dense(a) => a.tr_matvec(y),
        Operator::CircularConvolution { kernel } => {
            // Adjoint of periodic convolution is correlation: the reversed kernel.
            let n = kernel.len();
            (0..n)
                .map(|i| (0..n).map(|m| kernel[m] * y[(i + m) % n]).sum::<f64>())
                .collect()
        }
        Operator::MaskedSampling { indices, n } => {
            let mut out = vec![0.0; *n];
            for (j, &i) in indices.iter().enumerate() {
                out[i] = y[j];
            }
            out
        }
        Operator::Composed { outer, inner } => adjoint_apply(inner, &adjoint_apply(outer, y)?)?,
    })
}

/// Largest singular value by power iteration on A*A.
///
/// Stops once the Rayleigh residual ‖A*Av − λv‖ drops below `tol·λ`; for a
/// symmetric iteration matrix that pins the dominant eigenvalue to relative
/// accuracy `tol`, hence the singular value to roughly `tol/2`.
pub fn operator_norm(op: &Operator, tol: f64, max_iter: usize, seed: u64) -> Result<f64> {
    if tol <= 0.0 {
        return Err(Error::invalid("operator_norm: tol must be positive"));
    }
    let mut v = unit_vector(&mut seeded_rng(seed), op.in_dim());
    let mut last_residual = f64::INFINITY;
    for it in 0..max_iter {
        let w = adjoint_apply(op, &apply(op, &v)?)?;
        let lambda: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        let residual = norm(
            &w.iter()
                .zip(&v)
                .map(|(wi, vi)| wi - lambda * vi)
                .collect::<Vec<_>>(),
        );
        let wn = norm(&w);
        if wn == 0.0 {
            // v was annihilated by A*A; with a generic start this means A = 0.
            return Ok(0.0);
        }
        if lambda > 0.0 && residual <= tol * lambda {
            return Ok(lambda.sqrt());
        }
        last_residual = residual;
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / wn;
        }
        let _ = it;
    }
    Err(Error::NonConvergence {
        what: "power iteration",
        iterations: max_iter,
        residual: last_residual,
    })
}

/// Dense matrix with column j equal to `apply(op, e_j)`.
pub fn materialize(op: &Operator) -> Result<Mat> {
    materialize_with_budget(op, MATERIALIZE_BUDGET)
}

pub fn materialize_with_budget(op: &Operator, budget: usize) -> Result<Mat> {
    let (m, n) = (op.out_dim(), op.in_dim());
    let entries = m.checked_mul(n).unwrap_or(usize::MAX);
    if entries > budget {
        return Err(Error::BudgetExceeded {
            rows: m,
            cols: n,
            entries,
            budget,
        });
    }
    let mut out = Mat::zeros(m, n);
    let mut e = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        let col = apply(op, &e)?;
        e[j] = 0.0;
        for i in 0..m {
            out[(i, j)] = col[i];
        }
    }
    Ok(out)
}

/// Truncated singular value decomposition of an operator.
///
/// Singular values are sorted non-increasing (repeated values are genuine for
/// sampling operators) and entries at or below `rank_tolerance · s_max` are
/// dropped, so `s` is strictly positive and `U`, `V` hold exactly the
/// directions that carry signal.
#[derive(Debug, Clone)]
pub struct SvdFactorization {
    pub u: Mat,
    pub s: Vec<f64>,
    pub v: Mat,
}

impl SvdFactorization {
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    pub fn s_max(&self) -> f64 {
        self.s.first().copied().unwrap_or(0.0)
    }

    pub fn s_min_nonzero(&self) -> f64 {
        self.s.last().copied().unwrap_or(0.0)
    }

    /// Uᵀy — coefficients of y against the left singular vectors.
    pub fn ut_times(&self, y: &[f64]) -> Vec<f64> {
        self.u.tr_matvec(y)
    }

    /// Vᵀx — coefficients of x against the right singular vectors.
    pub fn vt_times(&self, x: &[f64]) -> Vec<f64> {
        self.v.tr_matvec(x)
    }

    pub fn u_times(&self, c: &[f64]) -> Vec<f64> {
        self.u.matvec(c)
    }

    pub fn v_times(&self, c: &[f64]) -> Vec<f64> {
        self.v.matvec(c)
    }
}

pub fn svd(op: &Operator, rank_tolerance: f64) -> Result<SvdFactorization> {
    if !(rank_tolerance >= 0.0) {
        return Err(Error::invalid("svd: rank tolerance must be nonnegative"));
    }
    let a = materialize(op)?;
    let (u, s, v) = jacobi_svd(&a, rank_tolerance);
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical(
            "svd produced non-finite singular values".into(),
        ));
    }
    Ok(SvdFactorization { u, s, v })
}
