//! Problem oracles: gradients, Hessians and Hessian-vector products of a
//! smooth objective, plus a small catalog of built-in test problems.
//!
//! The optimizer only ever asks an oracle for derivatives. Objective values
//! are exposed through [`Problem::value`] for diagnostics and tests.

use std::sync::atomic::{AtomicUsize, Ordering};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest dimension for which built-in problems materialize a dense Hessian.
pub const DENSE_LIMIT: usize = 1000;

/// Derivative oracle for a twice continuously differentiable objective.
///
/// Implementations must be pure: equal inputs give bitwise-equal outputs.
pub trait Problem: Send + Sync {
    fn dim(&self) -> usize;

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    /// Dense Hessian, or `None` when the problem only works matrix-free.
    fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>>;

    /// Hessian-vector product `H(x) v`.
    ///
    /// The default forms the dense Hessian, so matrix-free problems must
    /// override it.
    fn hvp(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let h = self
            .hessian(x)
            .expect("problem has no dense Hessian and does not override hvp");
        h * v
    }

    /// Objective value. Never read by the optimizer.
    fn value(&self, _x: &DVector<f64>) -> Option<f64> {
        None
    }

    /// Lipschitz constant of the gradient, when known globally.
    fn lipschitz_gradient(&self) -> Option<f64> {
        None
    }

    /// Lipschitz constant of the Hessian, when known globally.
    fn lipschitz_hessian(&self) -> Option<f64> {
        None
    }

    /// A known lower bound on the objective.
    fn lower_bound(&self) -> Option<f64> {
        None
    }
}

impl<P: Problem + ?Sized> Problem for &P {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (**self).gradient(x)
    }
    fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        (**self).hessian(x)
    }
    fn hvp(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        (**self).hvp(x, v)
    }
    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        (**self).value(x)
    }
    fn lipschitz_gradient(&self) -> Option<f64> {
        (**self).lipschitz_gradient()
    }
    fn lipschitz_hessian(&self) -> Option<f64> {
        (**self).lipschitz_hessian()
    }
    fn lower_bound(&self) -> Option<f64> {
        (**self).lower_bound()
    }
}

impl<P: Problem + ?Sized> Problem for Box<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (**self).gradient(x)
    }
    fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        (**self).hessian(x)
    }
    fn hvp(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        (**self).hvp(x, v)
    }
    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        (**self).value(x)
    }
    fn lipschitz_gradient(&self) -> Option<f64> {
        (**self).lipschitz_gradient()
    }
    fn lipschitz_hessian(&self) -> Option<f64> {
        (**self).lipschitz_hessian()
    }
    fn lower_bound(&self) -> Option<f64> {
        (**self).lower_bound()
    }
}

/// Coupling weight of the nearest-neighbour term in [`Builtin::CosineSum`].
const COSINE_COUPLING: f64 = 0.25;

/// The built-in test problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    /// `f(x) = ½‖x‖²`.
    QuadraticPsd,
    /// Chained Rosenbrock, `Σ 100(x_{i+1} − x_i²)² + (1 − x_i)²`.
    Rosenbrock,
    /// `f(x) = x₁³/3 − x₂²/2`, with a degenerate saddle at the origin.
    SaddleCubic,
    /// `f(x) = Σ cos x_i + ¼ Σ cos(x_i − x_{i+1})`, nonconvex and bounded.
    CosineSum,
}

/// Static description of a catalog entry.
#[derive(Debug, Clone, Copy)]
pub struct CatalogEntry {
    pub name: &'static str,
    pub family: Family,
    pub description: &'static str,
}

pub const CATALOG: &[CatalogEntry] = &[
    CatalogEntry {
        name: "quadratic_psd",
        family: Family::QuadraticPsd,
        description: "convex quadratic ½‖x‖², identity Hessian, any n ≥ 1",
    },
    CatalogEntry {
        name: "rosenbrock",
        family: Family::Rosenbrock,
        description: "chained Rosenbrock, n ≥ 2, minimizer (1, …, 1)",
    },
    CatalogEntry {
        name: "saddle_cubic",
        family: Family::SaddleCubic,
        description: "x₁³/3 − x₂²/2, n = 2, unbounded below",
    },
    CatalogEntry {
        name: "cosine_sum",
        family: Family::CosineSum,
        description: "Σ cos x_i + ¼ Σ cos(x_i − x_{i+1}), n ≥ 1, bounded with bounded gradient",
    },
];

/// A built-in problem instance of fixed dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Builtin {
    family: Family,
    n: usize,
}

/// Looks up `name` in the catalog and instantiates it in dimension `n`.
pub fn make_problem(name: &str, n: usize) -> Result<Builtin> {
    let entry = CATALOG
        .iter()
        .find(|e| e.name == name)
        .ok_or_else(|| Error::UnknownProblem(name.to_string()))?;
    let bad = |reason| Error::IncompatibleDimension {
        name: name.to_string(),
        n,
        reason,
    };
    match entry.family {
        _ if n == 0 => return Err(bad("dimension must be positive")),
        Family::Rosenbrock if n < 2 => return Err(bad("requires n ≥ 2")),
        Family::SaddleCubic if n != 2 => return Err(bad("defined for n = 2 only")),
        _ => {}
    }
    Ok(Builtin {
        family: entry.family,
        n,
    })
}

impl Builtin {
    pub fn family(&self) -> Family {
        self.family
    }

    pub fn name(&self) -> &'static str {
        CATALOG
            .iter()
            .find(|e| e.family == self.family)
            .map(|e| e.name)
            .unwrap_or("?")
    }

    /// Recommended starting point.
    pub fn x0(&self) -> DVector<f64> {
        let n = self.n;
        match self.family {
            Family::QuadraticPsd => DVector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 }),
            Family::Rosenbrock => DVector::from_fn(n, |i, _| if i % 2 == 0 { -1.2 } else { 1.0 }),
            Family::SaddleCubic => DVector::from_vec(vec![1.0, 0.1]),
            Family::CosineSum => DVector::from_fn(n, |i, _| 0.3 + 0.7 * i as f64),
        }
    }

    /// Uniform bound on `‖g(x)‖_∞`, when one exists.
    pub fn gradient_bound(&self) -> Option<f64> {
        match self.family {
            Family::CosineSum => Some(1.0 + 2.0 * COSINE_COUPLING),
            _ => None,
        }
    }

    /// Tridiagonal Hessian as (diagonal, superdiagonal).
    fn tridiagonal(&self, x: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        match self.family {
            Family::QuadraticPsd => diag.iter_mut().for_each(|d| *d = 1.0),
            Family::Rosenbrock => {
                for i in 0..n - 1 {
                    diag[i] += 1200.0 * x[i] * x[i] - 400.0 * x[i + 1] + 2.0;
                    diag[i + 1] += 200.0;
                    off[i] = -400.0 * x[i];
                }
            }
            Family::SaddleCubic => {
                diag[0] = 2.0 * x[0];
                diag[1] = -1.0;
            }
            Family::CosineSum => {
                for i in 0..n {
                    diag[i] = -x[i].cos();
                }
                for i in 0..n - 1 {
                    let c = COSINE_COUPLING * (x[i] - x[i + 1]).cos();
                    diag[i] -= c;
                    diag[i + 1] -= c;
                    off[i] = c;
                }
            }
        }
        (diag, off)
    }
}

impl Problem for Builtin {
    fn dim(&self) -> usize {
        self.n
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        match self.family {
            Family::QuadraticPsd => x.clone(),
            Family::Rosenbrock => {
                let mut g = DVector::zeros(n);
                for i in 0..n - 1 {
                    let r = x[i + 1] - x[i] * x[i];
                    g[i] += -400.0 * x[i] * r - 2.0 * (1.0 - x[i]);
                    g[i + 1] += 200.0 * r;
                }
                g
            }
            Family::SaddleCubic => DVector::from_vec(vec![x[0] * x[0], -x[1]]),
            Family::CosineSum => {
                let mut g = DVector::from_fn(n, |i, _| -x[i].sin());
                for i in 0..n - 1 {
                    let s = COSINE_COUPLING * (x[i] - x[i + 1]).sin();
                    g[i] -= s;
                    g[i + 1] += s;
                }
                g
            }
        }
    }

    fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        if self.n > DENSE_LIMIT {
            return None;
        }
        let (diag, off) = self.tridiagonal(x);
        let mut h = DMatrix::from_diagonal(&DVector::from_vec(diag));
        for (i, &o) in off.iter().enumerate() {
            h[(i, i + 1)] = o;
            h[(i + 1, i)] = o;
        }
        Some(h)
    }

    fn hvp(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let (diag, off) = self.tridiagonal(x);
        let mut out = DVector::from_fn(self.n, |i, _| diag[i] * v[i]);
        for (i, &o) in off.iter().enumerate() {
            out[i] += o * v[i + 1];
            out[i + 1] += o * v[i];
        }
        out
    }

    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        let n = self.n;
        Some(match self.family {
            Family::QuadraticPsd => 0.5 * x.norm_squared(),
            Family::Rosenbrock => (0..n - 1)
                .map(|i| {
                    let r = x[i + 1] - x[i] * x[i];
                    100.0 * r * r + (1.0 - x[i]).powi(2)
                })
                .sum(),
            Family::SaddleCubic => x[0].powi(3) / 3.0 - 0.5 * x[1] * x[1],
            Family::CosineSum => {
                let single: f64 = x.iter().map(|xi| xi.cos()).sum();
                let pair: f64 = (0..n - 1).map(|i| (x[i] - x[i + 1]).cos()).sum();
                single + COSINE_COUPLING * pair
            }
        })
    }

    fn lipschitz_gradient(&self) -> Option<f64> {
        match self.family {
            Family::QuadraticPsd => Some(1.0),
            // ‖diag(cos)‖ plus c times the weighted path Laplacian bound 4.
            Family::CosineSum => Some(1.0 + 4.0 * COSINE_COUPLING),
            Family::Rosenbrock | Family::SaddleCubic => None,
        }
    }

    fn lipschitz_hessian(&self) -> Option<f64> {
        match self.family {
            Family::QuadraticPsd => Some(0.0),
            Family::SaddleCubic => Some(2.0),
            Family::CosineSum => Some(1.0 + 4.0 * COSINE_COUPLING * std::f64::consts::SQRT_2),
            Family::Rosenbrock => None,
        }
    }

    fn lower_bound(&self) -> Option<f64> {
        let n = self.n as f64;
        match self.family {
            Family::QuadraticPsd | Family::Rosenbrock => Some(0.0),
            Family::SaddleCubic => None,
            Family::CosineSum => Some(-n - COSINE_COUPLING * (n - 1.0)),
        }
    }
}

/// Counts every oracle call made through it.
#[derive(Debug, Default)]
pub struct CallCounts {
    pub gradient: AtomicUsize,
    pub hessian: AtomicUsize,
    pub hvp: AtomicUsize,
    pub value: AtomicUsize,
}

/// Wraps a problem and records how often each map is evaluated.
#[derive(Debug)]
pub struct Counting<P> {
    inner: P,
    counts: CallCounts,
}

impl<P: Problem> Counting<P> {
    pub fn new(inner: P) -> Self {
        Counting {
            inner,
            counts: CallCounts::default(),
        }
    }

    pub fn value_calls(&self) -> usize {
        self.counts.value.load(Ordering::Relaxed)
    }

    pub fn gradient_calls(&self) -> usize {
        self.counts.gradient.load(Ordering::Relaxed)
    }

    pub fn hessian_calls(&self) -> usize {
        self.counts.hessian.load(Ordering::Relaxed)
    }

    pub fn hvp_calls(&self) -> usize {
        self.counts.hvp.load(Ordering::Relaxed)
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: Problem> Problem for Counting<P> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.counts.gradient.fetch_add(1, Ordering::Relaxed);
        self.inner.gradient(x)
    }
    fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        self.counts.hessian.fetch_add(1, Ordering::Relaxed);
        self.inner.hessian(x)
    }
    fn hvp(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        self.counts.hvp.fetch_add(1, Ordering::Relaxed);
        self.inner.hvp(x, v)
    }
    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        self.counts.value.fetch_add(1, Ordering::Relaxed);
        self.inner.value(x)
    }
    fn lipschitz_gradient(&self) -> Option<f64> {
        self.inner.lipschitz_gradient()
    }
    fn lipschitz_hessian(&self) -> Option<f64> {
        self.inner.lipschitz_hessian()
    }
    fn lower_bound(&self) -> Option<f64> {
        self.inner.lower_bound()
    }
}

/// Maximum relative errors of central finite differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdReport {
    /// `‖g − g_fd‖_∞ / max(1, ‖g‖_∞)` with `g_fd` from objective values.
    pub gradient_error: f64,
    /// `max |H − H_fd| / max(1, max |H|)` with `H_fd` from gradients.
    pub hessian_error: f64,
}

/// Compares the oracle's gradient and Hessian against central differences
/// with step `h` at `x`.
pub fn finite_diff_check<P: Problem + ?Sized>(
    problem: &P,
    x: &DVector<f64>,
    h: f64,
) -> Result<FdReport> {
    let n = problem.dim();
    if x.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len(),
        });
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::invalid("h", "finite-difference step must be positive"));
    }
    problem.value(x).ok_or(Error::MissingObjective)?;

    let g = problem.gradient(x);
    let mut grad_err: f64 = 0.0;
    let mut hess_err: f64 = 0.0;
    let mut hess_scale: f64 = 1.0;
    let mut columns = Vec::with_capacity(n);
    for j in 0..n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let fp = problem.value(&xp).ok_or(Error::MissingObjective)?;
        let fm = problem.value(&xm).ok_or(Error::MissingObjective)?;
        grad_err = grad_err.max(((fp - fm) / (2.0 * h) - g[j]).abs());
        let fd_col = (problem.gradient(&xp) - problem.gradient(&xm)) / (2.0 * h);
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        let col = problem.hvp(x, &e);
        hess_scale = hess_scale.max(col.amax());
        columns.push((col, fd_col));
    }
    for (col, fd_col) in &columns {
        hess_err = hess_err.max((col - fd_col).amax());
    }
    Ok(FdReport {
        gradient_error: grad_err / g.amax().max(1.0),
        hessian_error: hess_err / hess_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn quadratic_gradient_is_identity_map() {
        let p = make_problem("quadratic_psd", 2).unwrap();
        assert_eq!(p.gradient(&v(&[1.0, 0.0])), v(&[1.0, 0.0]));
        assert_eq!(p.hessian(&v(&[3.0, -4.0])).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn rosenbrock_minimizer_has_zero_gradient() {
        for n in [2, 5] {
            let p = make_problem("rosenbrock", n).unwrap();
            let g = p.gradient(&DVector::from_element(n, 1.0));
            assert_eq!(g.amax(), 0.0);
            assert_eq!(p.value(&DVector::from_element(n, 1.0)), Some(0.0));
        }
    }

    #[test]
    fn saddle_cubic_hessian_at_origin() {
        let p = make_problem("saddle_cubic", 2).unwrap();
        let h = p.hessian(&v(&[0.0, 0.0])).unwrap();
        assert_eq!(h, DMatrix::from_diagonal(&v(&[0.0, -1.0])));
        // Cross-check against differences of the gradient.
        let fd = finite_diff_check(&p, &v(&[0.0, 0.0]), 1e-5).unwrap();
        assert!(fd.hessian_error < 1e-8, "{fd:?}");
    }

    #[test]
    fn unknown_and_incompatible_names() {
        assert_eq!(
            make_problem("nope", 2),
            Err(Error::UnknownProblem("nope".into()))
        );
        assert!(matches!(
            make_problem("saddle_cubic", 3),
            Err(Error::IncompatibleDimension { .. })
        ));
        assert!(matches!(
            make_problem("rosenbrock", 1),
            Err(Error::IncompatibleDimension { .. })
        ));
        assert!(matches!(
            make_problem("quadratic_psd", 0),
            Err(Error::IncompatibleDimension { .. })
        ));
    }

    #[test]
    fn finite_difference_examples() {
        let q = make_problem("quadratic_psd", 2).unwrap();
        let r = finite_diff_check(&q, &v(&[1.0, 1.0]), 1e-5).unwrap();
        assert!(r.gradient_error <= 1e-8, "{r:?}");

        let rb = make_problem("rosenbrock", 2).unwrap();
        let r = finite_diff_check(&rb, &v(&[-1.2, 1.0]), 1e-5).unwrap();
        assert!(r.gradient_error <= 1e-5, "{r:?}");

        let s = make_problem("saddle_cubic", 2).unwrap();
        let r = finite_diff_check(&s, &v(&[0.3, 0.7]), 1e-5).unwrap();
        assert!(r.hessian_error <= 1e-5, "{r:?}");
    }

    struct GradOnly;
    impl Problem for GradOnly {
        fn dim(&self) -> usize {
            1
        }
        fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
            x.clone()
        }
        fn hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
            Some(DMatrix::identity(1, 1))
        }
    }

    #[test]
    fn finite_difference_needs_objective() {
        assert_eq!(
            finite_diff_check(&GradOnly, &v(&[0.0]), 1e-5),
            Err(Error::MissingObjective)
        );
    }

    #[test]
    fn builtin_invariants_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let problems = [
            make_problem("quadratic_psd", 4).unwrap(),
            make_problem("rosenbrock", 2).unwrap(),
            make_problem("rosenbrock", 6).unwrap(),
            make_problem("saddle_cubic", 2).unwrap(),
            make_problem("cosine_sum", 5).unwrap(),
        ];
        for p in &problems {
            let n = p.dim();
            for _ in 0..100 {
                let x = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
                let d = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
                let h = p.hessian(&x).unwrap();
                let scale = h.amax().max(1.0);
                assert!((&h - h.transpose()).amax() <= 1e-12 * scale);
                let hv = p.hvp(&x, &d);
                let dense = &h * &d;
                assert!((&hv - &dense).amax() <= 1e-10 * dense.amax().max(1.0));
                let fd = finite_diff_check(p, &x, 1e-5).unwrap();
                assert!(fd.gradient_error <= 1e-5, "{} {fd:?}", p.name());
                assert!(fd.hessian_error <= 1e-5, "{} {fd:?}", p.name());
                // purity
                assert_eq!(p.gradient(&x), p.gradient(&x));
                assert_eq!(p.hvp(&x, &d), p.hvp(&x, &d));
            }
        }
    }

    #[test]
    fn cosine_constants_bound_observed_behaviour() {
        let p = make_problem("cosine_sum", 6).unwrap();
        let l1 = p.lipschitz_gradient().unwrap();
        let l2 = p.lipschitz_hessian().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let x = DVector::from_fn(6, |_, _| rng.random_range(-4.0..4.0));
            let y = DVector::from_fn(6, |_, _| rng.random_range(-4.0..4.0));
            let hx = p.hessian(&x).unwrap();
            let hy = p.hessian(&y).unwrap();
            assert!(hx.symmetric_eigenvalues().amax() <= l1 + 1e-12);
            let dh = (&hx - &hy).symmetric_eigenvalues().amax();
            assert!(dh <= l2 * (&x - &y).norm() + 1e-12);
            assert!(p.value(&x).unwrap() >= p.lower_bound().unwrap());
            assert!(p.gradient(&x).amax() <= p.gradient_bound().unwrap());
        }
    }

    #[test]
    fn large_problems_are_matrix_free() {
        let p = make_problem("cosine_sum", DENSE_LIMIT + 1).unwrap();
        let x = p.x0();
        assert!(p.hessian(&x).is_none());
        let hv = p.hvp(&x, &DVector::from_element(p.dim(), 1.0));
        assert_eq!(hv.len(), DENSE_LIMIT + 1);
    }

    #[test]
    fn catalog_lower_bounds_documented() {
        for e in CATALOG {
            let n = if e.family == Family::SaddleCubic { 2 } else { 3 };
            let p = make_problem(e.name, n).unwrap();
            assert_eq!(p.name(), e.name);
            // Only the saddle is unbounded below.
            assert_eq!(p.lower_bound().is_none(), e.family == Family::SaddleCubic);
        }
    }
}
