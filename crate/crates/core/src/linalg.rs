//! Symmetric operators and the Lanczos process shared by the eigenvalue
//! and Krylov subproblem solvers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::oracle::Problem;

/// A symmetric linear operator known only through products.
pub trait SymOp {
    fn dim(&self) -> usize;
    fn apply(&self, v: &DVector<f64>) -> DVector<f64>;
}

impl SymOp for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self * v
    }
}

impl<T: SymOp + ?Sized> SymOp for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        (**self).apply(v)
    }
}

/// The Hessian of a problem at a fixed point, applied through `hvp`.
pub struct HessianAt<'a, P: ?Sized> {
    problem: &'a P,
    x: &'a DVector<f64>,
}

impl<'a, P: Problem + ?Sized> HessianAt<'a, P> {
    pub fn new(problem: &'a P, x: &'a DVector<f64>) -> Self {
        HessianAt { problem, x }
    }
}

impl<P: Problem + ?Sized> SymOp for HessianAt<'_, P> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }
    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        self.problem.hvp(self.x, v)
    }
}

/// A closure-backed operator.
pub struct FnOp<F> {
    n: usize,
    f: F,
}

impl<F: Fn(&DVector<f64>) -> DVector<f64>> FnOp<F> {
    pub fn new(n: usize, f: F) -> Self {
        FnOp { n, f }
    }
}

impl<F: Fn(&DVector<f64>) -> DVector<f64>> SymOp for FnOp<F> {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        (self.f)(v)
    }
}

/// Relative asymmetry tolerated before a matrix is rejected.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Validates a square, finite, symmetric matrix and returns its
/// symmetrized copy.
pub(crate) fn checked_symmetric(h: &DMatrix<f64>, n: usize) -> Result<DMatrix<f64>> {
    if h.nrows() != n || h.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if h.nrows() != n { h.nrows() } else { h.ncols() },
        });
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Hessian"));
    }
    let scale = h.amax().max(1.0);
    let asym = (h - h.transpose()).amax() / scale;
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    Ok((h + h.transpose()) * 0.5)
}

pub(crate) fn checked_vector(g: &DVector<f64>, what: &'static str) -> Result<()> {
    if g.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Eigendecomposition with eigenvalues ascending and each eigenvector's
/// largest-magnitude entry made positive.
pub(crate) fn sorted_eigen(h: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = h.nrows();
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).into_owned();
        let lead = v.iamax();
        if v[lead] < 0.0 {
            v.neg_mut();
        }
        vectors.set_column(col, &v);
    }
    (values, vectors)
}

/// Deterministic generic starting vector for Lanczos when no better one
/// is available.
pub fn default_start(n: usize) -> DVector<f64> {
    let v = DVector::from_fn(n, |i, _| 1.0 + 0.5 * (1.7 * i as f64 + 0.3).sin());
    let norm = v.norm();
    v / norm
}

/// Lanczos tridiagonalization with full reorthogonalization.
///
/// After `j` successful steps, `basis` holds `q_1..q_j`, `alpha` the
/// diagonal of `T_j` and `beta` its subdiagonal plus the trailing
/// `β_j = ‖r_j‖`.
pub(crate) struct Lanczos {
    pub basis: Vec<DVector<f64>>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    residual: DVector<f64>,
    scale: f64,
}

impl Lanczos {
    /// Starts from `v0`, which must be nonzero.
    pub fn new(v0: &DVector<f64>) -> Self {
        Lanczos {
            basis: Vec::new(),
            alpha: Vec::new(),
            beta: Vec::new(),
            residual: v0.clone(),
            scale: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    /// Norm of the unnormalized next direction (`β_j`).
    pub fn trailing_beta(&self) -> f64 {
        self.beta.last().copied().unwrap_or(f64::INFINITY)
    }

    /// Whether the last step exhausted an invariant subspace.
    pub fn broke_down(&self) -> bool {
        !self.basis.is_empty() && self.trailing_beta() <= 1e-12 * self.scale.max(1e-300)
    }

    /// Adds one basis vector. Returns `false` when the process has broken
    /// down or the space is exhausted.
    pub fn extend(&mut self, op: &dyn SymOp) -> bool {
        let n = op.dim();
        if self.basis.len() >= n || self.broke_down() {
            return false;
        }
        let rnorm = self.residual.norm();
        if rnorm == 0.0 {
            return false;
        }
        let q = &self.residual / rnorm;
        let mut w = op.apply(&q);
        let a = q.dot(&w);
        w.axpy(-a, &q, 1.0);
        if let (Some(prev), Some(&b)) = (self.basis.last(), self.beta.last()) {
            w.axpy(-b, prev, 1.0);
        }
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for v in self.basis.iter().chain(std::iter::once(&q)) {
                let c = v.dot(&w);
                w.axpy(-c, v, 1.0);
            }
        }
        let b = w.norm();
        self.scale = self.scale.max(a.abs()).max(b);
        self.basis.push(q);
        self.alpha.push(a);
        self.beta.push(b);
        self.residual = w;
        true
    }

    /// The current tridiagonal matrix `T_j`.
    pub fn tridiagonal(&self) -> DMatrix<f64> {
        let j = self.alpha.len();
        let mut t = DMatrix::from_diagonal(&DVector::from_column_slice(&self.alpha));
        for i in 0..j.saturating_sub(1) {
            t[(i, i + 1)] = self.beta[i];
            t[(i + 1, i)] = self.beta[i];
        }
        t
    }

    /// Maps reduced coordinates `y` back to the full space, `Σ y_i q_i`.
    pub fn lift(&self, y: &DVector<f64>) -> DVector<f64> {
        let n = self.basis.first().map_or(0, |q| q.len());
        let mut out = DVector::zeros(n);
        for (q, &c) in self.basis.iter().zip(y.iter()) {
            out.axpy(c, q, 1.0);
        }
        out
    }
}
