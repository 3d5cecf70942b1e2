//! Right inverses and orthogonal projections derived from an operator's SVD,
//! plus matrix-free iterative fallbacks for the kernel projection.
//!
//! The kernel projection is the workhorse: null-space networks apply it to
//! every network output, so both an exact route (via a cached factorization)
//! and iterative routes (CG / Landweber on the normal equations, never
//! forming A*A) are provided and must agree.

use crate::error::{Error, Result};
use crate::linops::{adjoint_apply, apply, operator_norm, Operator, SvdFactorization};
use crate::mat::{jacobi_svd, Mat};
use crate::rng::{axpy, dot, norm};

/// Default relative tolerance on ‖A x_k‖ for iterative kernel projections.
pub const ITERATIVE_PROJECTION_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IterativeMethod {
    ConjugateGradient,
    Landweber,
}

/// How to evaluate P_ker(A). `ExplicitSvd` when a factorization is already
/// available, `Iterative` otherwise.
#[derive(Debug, Clone)]
pub enum Projector {
    ExplicitSvd(SvdFactorization),
    Iterative {
        op: Operator,
        tol: f64,
        max_iter: usize,
        method: IterativeMethod,
    },
}

impl Projector {
    pub fn explicit(f: SvdFactorization) -> Self {
        Projector::ExplicitSvd(f)
    }

    pub fn conjugate_gradient(op: Operator) -> Self {
        let max_iter = 10 * op.in_dim();
        Projector::Iterative {
            op,
            tol: ITERATIVE_PROJECTION_TOL,
            max_iter,
            method: IterativeMethod::ConjugateGradient,
        }
    }

    /// Landweber converges linearly (CG is superlinear on the same normal
    /// equations), hence the larger default iteration budget.
    pub fn landweber(op: Operator) -> Self {
        let max_iter = 400 * op.in_dim();
        Projector::Iterative {
            op,
            tol: ITERATIVE_PROJECTION_TOL,
            max_iter,
            method: IterativeMethod::Landweber,
        }
    }

    pub fn in_dim(&self) -> usize {
        match self {
            Projector::ExplicitSvd(f) => f.v.rows(),
            Projector::Iterative { op, .. } => op.in_dim(),
        }
    }
}

/// A†y = Σ s_i⁻¹ ⟨u_i, y⟩ v_i. For y in the range this is the minimal-norm
/// solution of A x = y; in general it solves against the range projection of
/// y (rank truncation already removed the zero singular values).
pub fn pseudoinverse_apply(f: &SvdFactorization, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != f.u.rows() {
        return Err(Error::DimensionMismatch {
            context: "pseudoinverse_apply",
            expected: f.u.rows(),
            got: y.len(),
        });
    }
    let mut c = f.ut_times(y);
    for (ci, si) in c.iter_mut().zip(&f.s) {
        *ci /= si;
    }
    Ok(f.v_times(&c))
}

/// U Uᵀ y — orthogonal projection onto the range of A.
pub fn range_project(f: &SvdFactorization, y: &[f64]) -> Result<Vec<f64>> {
    if y.len() != f.u.rows() {
        return Err(Error::DimensionMismatch {
            context: "range_project",
            expected: f.u.rows(),
            got: y.len(),
        });
    }
    Ok(f.u_times(&f.ut_times(y)))
}

/// Orthogonal projection of `z` onto ker(A).
pub fn kernel_project(p: &Projector, z: &[f64]) -> Result<Vec<f64>> {
    if z.len() != p.in_dim() {
        return Err(Error::DimensionMismatch {
            context: "kernel_project",
            expected: p.in_dim(),
            got: z.len(),
        });
    }
    match p {
        Projector::ExplicitSvd(f) => {
            // z − V Vᵀ z
            let vvz = f.v_times(&f.vt_times(z));
            Ok(z.iter().zip(&vvz).map(|(a, b)| a - b).collect())
        }
        Projector::Iterative {
            op,
            tol,
            max_iter,
            method,
        } => {
            let nu = operator_norm(op, 1e-6, 100_000, 0x9e3779b9)?;
            let target = tol * nu * norm(z);
            match method {
                IterativeMethod::ConjugateGradient => {
                    cg_kernel_project(op, z, target, *max_iter)
                }
                IterativeMethod::Landweber => {
                    landweber_kernel_project(op, z, nu, target, *max_iter)
                }
            }
        }
    }
}

/// CG on A*A x = 0 started at z. Search directions live in ran(A*) = ker(A)⊥,
/// so iterates stay in z + ker(A)⊥ and the limit is the point of ker(A)
/// closest to z.
fn cg_kernel_project(op: &Operator, z: &[f64], target: f64, max_iter: usize) -> Result<Vec<f64>> {
    let mut x = z.to_vec();
    let mut ax = apply(op, &x)?;
    if norm(&ax) <= target {
        return Ok(x);
    }
    let mut r: Vec<f64> = adjoint_apply(op, &ax)?.iter().map(|v| -v).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        let ap = apply(op, &p)?;
        let p_m_p = dot(&ap, &ap);
        if p_m_p == 0.0 {
            break; // direction in the kernel ⇒ residual already zero
        }
        let alpha = rr / p_m_p;
        axpy(alpha, &p, &mut x);
        ax = apply(op, &x)?;
        if norm(&ax) <= target {
            return Ok(x);
        }
        let m_p = adjoint_apply(op, &ap)?;
        for (ri, mi) in r.iter_mut().zip(&m_p) {
            *ri -= alpha * mi;
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    if norm(&ax) <= target {
        return Ok(x);
    }
    Err(Error::NonConvergence {
        what: "CG kernel projection",
        iterations: max_iter,
        residual: norm(&ax),
    })
}

fn landweber_kernel_project(
    op: &Operator,
    z: &[f64],
    nu: f64,
    target: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let mut x = z.to_vec();
    if nu == 0.0 {
        return Ok(x); // zero operator: everything is kernel
    }
    // 0.9/‖A‖² keeps the iteration a contraction on ker(A)⊥ even when the
    // norm estimate is slightly low.
    let tau = 0.9 / (nu * nu);
    let mut res = f64::INFINITY;
    for _ in 0..max_iter {
        let ax = apply(op, &x)?;
        res = norm(&ax);
        if res <= target {
            return Ok(x);
        }
        let g = adjoint_apply(op, &ax)?;
        axpy(-tau, &g, &mut x);
    }
    let ax = apply(op, &x)?;
    if norm(&ax) <= target {
        return Ok(x);
    }
    Err(Error::NonConvergence {
        what: "Landweber kernel projection",
        iterations: max_iter,
        residual: res,
    })
}

/// Orthonormal basis of ker(A), of dimension in_dim − rank. Columns are the
/// eigendirections of I − V Vᵀ with eigenvalue one.
pub fn kernel_basis(f: &SvdFactorization) -> Mat {
    let n = f.v.rows();
    let r = f.rank();
    if r >= n {
        return Mat::zeros(n, 0);
    }
    let mut proj = Mat::identity(n);
    for i in 0..n {
        for j in 0..n {
            let mut acc = 0.0;
            for k in 0..r {
                acc += f.v[(i, k)] * f.v[(j, k)];
            }
            proj[(i, j)] -= acc;
        }
    }
    let (u, s, _) = jacobi_svd(&proj, 1e-12);
    // The projector's spectrum is {0, 1}; keep the unit part.
    let kept: Vec<usize> = (0..s.len()).filter(|&k| s[k] > 0.5).collect();
    let mut basis = Mat::zeros(n, kept.len());
    for (col, &k) in kept.iter().enumerate() {
        for i in 0..n {
            basis[(i, col)] = u[(i, k)];
        }
    }
    basis
}
