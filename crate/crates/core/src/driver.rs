//! The adaptively scaled trust-region iteration.
//!
//! Each iteration computes `g_k`, `H_k` (or Hessian products), the measure
//! `φ_k = φ₂¹(x_k)` and its clipped value `φ̂_k = min(φ_k, ξ)`. It then
//! takes either the scaled gradient step `−g_k / w^L_k` when
//! `‖g_k‖² ≥ φ̂_k³`, or a trust-region step of radius `φ̂_k / w^Q_k`.
//! The trial point is always accepted; the objective is never evaluated.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::{checked_vector, HessianAt, SymOp};
use crate::oracle::Problem;
use crate::scaling::{Branch, Scaling};
use crate::trs::{solve_trs_krylov, SpectralModel};

/// Algorithm constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Astr2Config {
    /// Fraction of the Cauchy/eigen-point decrease a quadratic step must
    /// achieve, in `(0, 1]`.
    pub tau: f64,
    /// Eigenvector accuracy factor, in `(0, 1]`.
    pub chi: f64,
    /// Clipping level for `φ`, at least 1.
    pub xi: f64,
    pub scaling: Scaling,
    pub max_iter: usize,
    /// Stop once `‖g_k‖ ≤ ε₁` (when set) ...
    pub eps1: Option<f64>,
    /// ... and `φ_k ≤ ε₂/2` (when set).
    pub eps2: Option<f64>,
    /// Compute `φ` and the quadratic step in Krylov subspaces of at most
    /// this dimension, using Hessian-vector products only.
    pub subspace_max_dim: Option<usize>,
}

impl Astr2Config {
    pub fn new(scaling: Scaling) -> Self {
        Astr2Config {
            tau: 1.0,
            chi: 1.0,
            xi: 1.0,
            scaling,
            max_iter: 100,
            eps1: None,
            eps2: None,
            subspace_max_dim: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(Error::invalid("tau", format!("must lie in (0, 1], got {}", self.tau)));
        }
        if !(self.chi > 0.0 && self.chi <= 1.0) {
            return Err(Error::invalid("chi", format!("must lie in (0, 1], got {}", self.chi)));
        }
        if !(self.xi >= 1.0 && self.xi.is_finite()) {
            return Err(Error::invalid("xi", format!("must be at least 1, got {}", self.xi)));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter", "must be at least 1"));
        }
        for (name, eps) in [("eps1", self.eps1), ("eps2", self.eps2)] {
            if let Some(e) = eps {
                if !(e >= 0.0) {
                    return Err(Error::invalid(name, format!("must be nonnegative, got {e}")));
                }
            }
        }
        Ok(())
    }
}

/// One row of the optimization trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterateRecord {
    pub k: usize,
    pub x: DVector<f64>,
    pub g_norm: f64,
    pub phi: f64,
    pub hatphi: f64,
    pub branch: Branch,
    pub w_l: f64,
    pub w_q: f64,
    pub delta_l: f64,
    pub delta_q: f64,
    pub step_norm: f64,
    /// Model decrease `−(gᵀs + ½ sᵀHs)` of the step taken.
    pub model_decrease: f64,
    /// Cauchy decrease at radius `Δ^Q_k` (quadratic iterations only).
    pub cauchy_decrease: Option<f64>,
    /// Eigen-point decrease at radius `Δ^Q_k` (quadratic iterations only).
    pub eigen_decrease: Option<f64>,
    /// Krylov dimension used for `φ_k` in subspace mode.
    pub subspace_dim: Option<usize>,
    /// Adagrad accumulators after this iteration's update.
    pub accumulators: Option<(f64, f64)>,
    /// Objective value, filled only by [`annotate_objective`].
    pub f: Option<f64>,
}

/// Result of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub records: Vec<IterateRecord>,
    /// `x` after the last step.
    pub final_x: DVector<f64>,
    /// Whether the ε-test stopped the run before `max_iter`.
    pub converged: bool,
}

/// A run that aborted, with the iterations completed before the failure.
#[derive(Debug, Clone, PartialEq)]
pub struct RunError {
    pub error: Error,
    pub partial: Trace,
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} after {} iterations", self.error, self.partial.records.len())
    }
}

impl std::error::Error for RunError {}

enum Curvature<'a> {
    Dense(SpectralModel),
    Krylov(HessianAt<'a, dyn Problem + 'a>, usize),
}

/// One iteration from `x`, with iteration counter `k`.
///
/// Returns `x_{k+1}` and the iteration record. `scaling` is updated in
/// place.
pub fn astr2_step(
    problem: &dyn Problem,
    x: &DVector<f64>,
    k: usize,
    config: &Astr2Config,
    scaling: &mut Scaling,
) -> Result<(DVector<f64>, IterateRecord)> {
    checked_vector(x, "iterate")?;
    let g = problem.gradient(x);
    checked_vector(&g, "gradient")?;
    let g_norm = g.norm();

    let curvature = match config.subspace_max_dim {
        None => {
            let h = problem
                .hessian(x)
                .ok_or(Error::DenseHessianUnavailable(problem.dim()))?;
            Curvature::Dense(SpectralModel::new(&g, &h)?)
        }
        Some(m) => Curvature::Krylov(HessianAt::new(problem, x), m),
    };

    let (phi, subspace_dim) = match &curvature {
        Curvature::Dense(model) => (model.solve(1.0)?.model_decrease, None),
        Curvature::Krylov(_, 0) => (0.0, Some(0)),
        Curvature::Krylov(op, m) => {
            let kr = solve_trs_krylov(&g, op, 1.0, *m, 1.0, None)?;
            (kr.solution.model_decrease, Some(kr.subspace_dim))
        }
    };
    let hatphi = phi.min(config.xi);

    let branch = if g_norm * g_norm >= hatphi.powi(3) {
        Branch::Linear
    } else {
        Branch::Quadratic
    };
    let w = scaling.weights(k, branch, g_norm * g_norm, hatphi.powi(3));
    let delta_l = g_norm / w.linear;
    let delta_q = hatphi / w.quadratic;

    let (step, model_decrease, cauchy, eigen) = match branch {
        Branch::Linear => {
            let s = &g * (-1.0 / w.linear);
            let dq = match &curvature {
                Curvature::Dense(model) => model.decrease(&s),
                Curvature::Krylov(op, _) => -(g.dot(&s) + 0.5 * s.dot(&op.apply(&s))),
            };
            (s, dq, None, None)
        }
        Branch::Quadratic => match &curvature {
            Curvature::Dense(model) => {
                let sol = model.solve(delta_q)?;
                let c = model.cauchy(delta_q).decrease;
                let e = model.eigen_point(delta_q).decrease;
                (sol.step, sol.model_decrease, Some(c), Some(e))
            }
            Curvature::Krylov(op, m) => {
                let kr = solve_trs_krylov(&g, op, delta_q, (*m).max(1), config.tau, None)?;
                (
                    kr.solution.step,
                    kr.solution.model_decrease,
                    Some(kr.cauchy_decrease),
                    Some(kr.eigen_decrease),
                )
            }
        },
    };

    let step_norm = step.norm();
    let x_next = x + &step;
    let record = IterateRecord {
        k,
        x: x.clone(),
        g_norm,
        phi,
        hatphi,
        branch,
        w_l: w.linear,
        w_q: w.quadratic,
        delta_l,
        delta_q,
        step_norm,
        model_decrease,
        cauchy_decrease: cauchy,
        eigen_decrease: eigen,
        subspace_dim,
        accumulators: scaling.accumulators(),
        f: None,
    };
    Ok((x_next, record))
}

fn stop_test(config: &Astr2Config, rec: &IterateRecord) -> bool {
    if config.eps1.is_none() && config.eps2.is_none() {
        return false;
    }
    let first = config.eps1.is_none_or(|e| rec.g_norm <= e);
    let second = config.eps2.is_none_or(|e| rec.phi <= 0.5 * e);
    first && second
}

/// Runs up to `max_iter` iterations from `x0`.
///
/// When ε-thresholds are configured, the run stops after the first
/// iteration whose measures pass the test; that iteration is the last
/// record of the trace.
pub fn run(problem: &dyn Problem, x0: &DVector<f64>, config: &Astr2Config) -> Result<Trace, RunError> {
    let fail = |error, records, x: &DVector<f64>| RunError {
        error,
        partial: Trace {
            records,
            final_x: x.clone(),
            converged: false,
        },
    };
    if let Err(e) = config.validate() {
        return Err(fail(e, Vec::new(), x0));
    }
    if x0.len() != problem.dim() {
        let e = Error::DimensionMismatch {
            expected: problem.dim(),
            got: x0.len(),
        };
        return Err(fail(e, Vec::new(), x0));
    }
    let mut scaling = config.scaling.clone();
    let mut x = x0.clone();
    let mut records = Vec::with_capacity(config.max_iter.min(1 << 16));
    let mut converged = false;
    for k in 0..config.max_iter {
        match astr2_step(problem, &x, k, config, &mut scaling) {
            Ok((next, rec)) => {
                let stop = stop_test(config, &rec);
                records.push(rec);
                if stop {
                    converged = true;
                    break;
                }
                x = next;
            }
            Err(e) => return Err(fail(e, records, &x)),
        }
    }
    Ok(Trace {
        records,
        final_x: x,
        converged,
    })
}

/// Fills the diagnostic `f` column from the problem's objective, where
/// available.
pub fn annotate_objective<P: Problem + ?Sized>(trace: &mut Trace, problem: &P) {
    for rec in &mut trace.records {
        rec.f = problem.value(&rec.x);
    }
}

/// Suprema over `k` of the scaled rate statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateEnvelopes {
    /// `sup_k (k+1)·avg_{j≤k} ‖g_j‖²`.
    pub avg_grad_sq: f64,
    /// `sup_k (k+1)·avg_{j≤k} φ̂_j³`.
    pub avg_hatphi_cubed: f64,
    /// `sup_k √(k+1)·min_{j≤k} ‖g_j‖`.
    pub min_grad: f64,
    /// `sup_k (k+1)^{1/3}·min_{j≤k} φ̂_j`.
    pub min_hatphi: f64,
}

/// The per-`k` values whose suprema form [`RateEnvelopes`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnvelopeSeries {
    pub avg_grad_sq: Vec<f64>,
    pub avg_hatphi_cubed: Vec<f64>,
    pub min_grad: Vec<f64>,
    pub min_hatphi: Vec<f64>,
}

pub fn envelope_series(records: &[IterateRecord]) -> EnvelopeSeries {
    let mut out = EnvelopeSeries::default();
    let (mut sum_g, mut sum_p) = (0.0, 0.0);
    let (mut min_g, mut min_p) = (f64::INFINITY, f64::INFINITY);
    for (k, r) in records.iter().enumerate() {
        let t = (k + 1) as f64;
        sum_g += r.g_norm * r.g_norm;
        sum_p += r.hatphi.powi(3);
        min_g = min_g.min(r.g_norm);
        min_p = min_p.min(r.hatphi);
        out.avg_grad_sq.push(sum_g);
        out.avg_hatphi_cubed.push(sum_p);
        out.min_grad.push(t.sqrt() * min_g);
        out.min_hatphi.push(t.cbrt() * min_p);
    }
    out
}

/// The four rate envelopes of a trace. All zero for an empty trace.
pub fn rate_envelopes(records: &[IterateRecord]) -> RateEnvelopes {
    let s = envelope_series(records);
    let sup = |v: &[f64]| v.iter().copied().fold(0.0f64, f64::max);
    RateEnvelopes {
        avg_grad_sq: sup(&s.avg_grad_sq),
        avg_hatphi_cubed: sup(&s.avg_hatphi_cubed),
        min_grad: sup(&s.min_grad),
        min_hatphi: sup(&s.min_hatphi),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::make_problem;
    use crate::scaling::AdagradScaling;
    use nalgebra::DMatrix;

    /// 1-D oracle with constant gradient and Hessian.
    struct Constant {
        g: f64,
        h: f64,
    }

    impl Problem for Constant {
        fn dim(&self) -> usize {
            1
        }
        fn gradient(&self, _x: &DVector<f64>) -> DVector<f64> {
            DVector::from_element(1, self.g)
        }
        fn hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
            Some(DMatrix::from_element(1, 1, self.h))
        }
    }

    fn adagrad(varsigma: f64, mu: f64, nu: f64) -> Scaling {
        Scaling::Adagrad(AdagradScaling::new(varsigma, mu, nu).unwrap())
    }

    #[test]
    fn first_quadratic_step_of_the_worst_case_example() {
        let p = Constant { g: 0.0, h: -2.0 };
        let config = Astr2Config::new(adagrad(0.01, 0.5, 1.0 / 3.0));
        let mut scaling = config.scaling.clone();
        let (x1, rec) = astr2_step(&p, &DVector::zeros(1), 0, &config, &mut scaling).unwrap();
        assert_eq!(rec.branch, Branch::Quadratic);
        assert_eq!(rec.hatphi, 1.0);
        assert_eq!(rec.w_q, 1.01f64.powf(1.0 / 3.0));
        let expect = 1.01f64.powf(-1.0 / 3.0);
        assert!((x1[0].abs() - expect).abs() < 1e-15);
        assert!((x1[0].abs() - 0.996_689).abs() < 1e-6);
        assert_eq!(rec.step_norm, rec.delta_q);
    }

    #[test]
    fn tie_goes_to_linear_branch() {
        // ‖g‖² = 1 and φ̂ = min(φ, 1) = 1 since φ ≥ ‖g‖ = 1 here.
        let p = Constant { g: 1.0, h: 0.0 };
        let config = Astr2Config::new(adagrad(1.0, 0.5, 0.5));
        let mut scaling = config.scaling.clone();
        let (_, rec) = astr2_step(&p, &DVector::zeros(1), 0, &config, &mut scaling).unwrap();
        assert_eq!(rec.g_norm, 1.0);
        assert_eq!(rec.hatphi, 1.0);
        assert_eq!(rec.branch, Branch::Linear);
    }

    #[test]
    fn linear_step_is_scaled_gradient() {
        let p = make_problem("quadratic_psd", 3).unwrap();
        let x = DVector::from_vec(vec![2.0, -1.0, 0.5]);
        let config = Astr2Config::new(adagrad(1.0, 0.5, 1.0 / 3.0));
        let mut scaling = config.scaling.clone();
        let (x1, rec) = astr2_step(&p, &x, 0, &config, &mut scaling).unwrap();
        assert_eq!(rec.branch, Branch::Linear);
        let expect = &x - &x / rec.w_l;
        assert_eq!(x1, expect);
        assert!((rec.step_norm - rec.delta_l).abs() <= 1e-15 * rec.delta_l);
        assert_eq!(rec.w_l, (1.0 + x.norm_squared()).sqrt());
    }

    #[test]
    fn zero_max_iter_rejected() {
        let p = make_problem("quadratic_psd", 2).unwrap();
        let mut config = Astr2Config::new(adagrad(1.0, 0.5, 0.5));
        config.max_iter = 0;
        let err = run(&p, &p.x0(), &config).unwrap_err();
        assert!(matches!(err.error, Error::InvalidParameter { name: "max_iter", .. }));
    }

    #[test]
    fn quadratic_contraction_matches_closed_form() {
        let p = make_problem("quadratic_psd", 2).unwrap();
        let mut config = Astr2Config::new(adagrad(1.0, 0.5, 1.0 / 3.0));
        config.max_iter = 50;
        let trace = run(&p, &p.x0(), &config).unwrap();
        // Independent recursion: x_{k+1} = (1 − 1/w_k) x_k with
        // w_k = (1 + Σ_{j≤k} x_j²)^{1/2}, valid while every step is linear.
        let mut x = 1.0f64;
        let mut acc = 0.0f64;
        for rec in &trace.records {
            assert_eq!(rec.branch, Branch::Linear);
            assert!((rec.g_norm - x.abs()).abs() <= 1e-14);
            acc += x * x;
            let w = (1.0 + acc).sqrt();
            x *= 1.0 - 1.0 / w;
        }
        for pair in trace.records.windows(2) {
            assert!(pair[1].g_norm < pair[0].g_norm);
        }
    }

    #[test]
    fn epsilon_termination() {
        let p = make_problem("quadratic_psd", 2).unwrap();
        let mut config = Astr2Config::new(adagrad(1.0, 0.5, 1.0 / 3.0));
        config.max_iter = 10_000;
        config.eps1 = Some(1e-6);
        config.eps2 = Some(1e-6);
        let trace = run(&p, &p.x0(), &config).unwrap();
        assert!(trace.converged);
        assert!(trace.records.len() < 10_000);
        let last = trace.records.last().unwrap();
        assert!(last.g_norm <= 1e-6);
        assert!(last.phi <= 0.5e-6);
    }

    #[test]
    fn exact_second_order_point_takes_zero_steps() {
        let p = make_problem("quadratic_psd", 2).unwrap();
        let mut config = Astr2Config::new(adagrad(1.0, 0.5, 0.5));
        config.max_iter = 3;
        let trace = run(&p, &DVector::zeros(2), &config).unwrap();
        for r in &trace.records {
            assert_eq!(r.step_norm, 0.0);
            assert_eq!(r.branch, Branch::Linear);
        }
    }

    #[test]
    fn non_finite_gradient_aborts_with_partial_trace() {
        struct Blowup;
        impl Problem for Blowup {
            fn dim(&self) -> usize {
                1
            }
            fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
                if x[0] < -0.1 {
                    DVector::from_element(1, f64::NAN)
                } else {
                    DVector::from_element(1, 1.0)
                }
            }
            fn hessian(&self, _x: &DVector<f64>) -> Option<DMatrix<f64>> {
                Some(DMatrix::zeros(1, 1))
            }
        }
        let mut config = Astr2Config::new(adagrad(1.0, 0.5, 0.5));
        config.max_iter = 10;
        let err = run(&Blowup, &DVector::zeros(1), &config).unwrap_err();
        assert_eq!(err.error, Error::NonFinite("gradient"));
        assert!(!err.partial.records.is_empty());
    }

    #[test]
    fn envelopes_of_zero_gradient_trace() {
        let p = Constant { g: 0.0, h: 1.0 };
        let mut config = Astr2Config::new(adagrad(1.0, 0.5, 0.5));
        config.max_iter = 5;
        let trace = run(&p, &DVector::zeros(1), &config).unwrap();
        let env = rate_envelopes(&trace.records);
        assert_eq!(env.avg_grad_sq, 0.0);
        assert_eq!(env.min_grad, 0.0);
        assert_eq!(rate_envelopes(&[]).avg_hatphi_cubed, 0.0);
    }

    #[test]
    fn runs_are_bitwise_deterministic() {
        let p = make_problem("cosine_sum", 4).unwrap();
        let mut config = Astr2Config::new(adagrad(1.0, 0.5, 1.0 / 3.0));
        config.max_iter = 200;
        let a = run(&p, &p.x0(), &config).unwrap();
        let b = run(&p, &p.x0(), &config).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn subspace_mode_with_full_dimension_matches_dense_mode() {
        let p = make_problem("cosine_sum", 5).unwrap();
        let mut dense = Astr2Config::new(adagrad(1.0, 0.5, 1.0 / 3.0));
        dense.max_iter = 30;
        let mut sub = dense.clone();
        sub.subspace_max_dim = Some(5);
        let a = run(&p, &p.x0(), &dense).unwrap();
        let b = run(&p, &p.x0(), &sub).unwrap();
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.branch, rb.branch);
            assert!((ra.phi - rb.phi).abs() <= 1e-8, "{} vs {}", ra.phi, rb.phi);
        }
    }

    #[test]
    fn subspace_mode_runs_matrix_free() {
        let p = make_problem("cosine_sum", crate::oracle::DENSE_LIMIT + 5).unwrap();
        let mut config = Astr2Config::new(adagrad(1.0, 0.5, 1.0 / 3.0));
        config.max_iter = 3;
        config.subspace_max_dim = Some(4);
        let trace = run(&p, &p.x0(), &config).unwrap();
        assert_eq!(trace.records.len(), 3);
        config.subspace_max_dim = None;
        let err = run(&p, &p.x0(), &config).unwrap_err();
        assert!(matches!(err.error, Error::DenseHessianUnavailable(_)));
    }
}
