//! Trust-region subproblem machinery.
//!
//! All solvers maximize the model decrease
//! `Δq(d) = −(gᵀd + ½ dᵀHd)` over the Euclidean ball `‖d‖ ≤ Δ`, or over a
//! restricted family of steps inside it:
//!
//! * [`solve_trs_exact`]: the global maximizer, via the secular equation in
//!   the eigenbasis of `H` with an explicit hard-case branch;
//! * [`cauchy_decrease`]: along the steepest-descent ray;
//! * [`eigen_decrease`]: along a minimum-curvature direction;
//! * [`solve_trs_krylov`]: over a growing Lanczos subspace.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{checked_symmetric, checked_vector, default_start, sorted_eigen, Lanczos, SymOp};

/// Relative accuracy of the secular-equation root.
pub const SECULAR_TOL: f64 = 1e-12;

/// Default residual tolerance for the Lanczos minimum eigenpair.
pub const LANCZOS_TOL: f64 = 1e-8;

/// Relative model-decrease gain below which the Krylov solver stops.
pub const KRYLOV_STAGNATION: f64 = 1e-8;

/// A trust-region subproblem answer.
#[derive(Debug, Clone, PartialEq)]
pub struct TrsSolution {
    pub step: DVector<f64>,
    /// Lagrange multiplier of the norm constraint.
    pub multiplier: f64,
    /// `−(gᵀd + ½ dᵀHd)`, nonnegative.
    pub model_decrease: f64,
    pub on_boundary: bool,
    pub hard_case: bool,
}

impl TrsSolution {
    fn zero(n: usize) -> Self {
        TrsSolution {
            step: DVector::zeros(n),
            multiplier: 0.0,
            model_decrease: 0.0,
            on_boundary: false,
            hard_case: false,
        }
    }
}

/// A (possibly approximate) minimum eigenpair.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub value: f64,
    pub vector: DVector<f64>,
}

/// The best point on the ray `−α g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CauchyPoint {
    pub step_length: f64,
    pub decrease: f64,
}

/// The best point on the ray `α u` for a minimum-curvature direction `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPoint {
    pub direction: DVector<f64>,
    pub step_length: f64,
    pub decrease: f64,
}

/// The Hessian as a dense matrix or as a product-only operator.
#[derive(Clone, Copy)]
pub enum HessianRef<'a> {
    Dense(&'a DMatrix<f64>),
    Operator(&'a dyn SymOp),
}

fn check_radius(radius: f64) -> Result<()> {
    if radius > 0.0 && radius.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("radius", format!("must be positive and finite, got {radius}")))
    }
}

/// Maximizes `−(α b + ½ α² c)` over `α ∈ [0, α_max]`.
fn best_on_ray(b: f64, c: f64, alpha_max: f64) -> (f64, f64) {
    let alpha = if c > 0.0 {
        (-b / c).clamp(0.0, alpha_max)
    } else if b < 0.0 || c < 0.0 {
        alpha_max
    } else {
        0.0
    };
    let dec = -(alpha * b + 0.5 * alpha * alpha * c);
    (alpha, dec.max(0.0))
}

fn cauchy_from_curvature(g_norm: f64, curvature: f64, radius: f64) -> CauchyPoint {
    if g_norm == 0.0 {
        return CauchyPoint {
            step_length: 0.0,
            decrease: 0.0,
        };
    }
    // Along −α g: linear coefficient −‖g‖², quadratic gᵀHg.
    let (alpha, decrease) = best_on_ray(-g_norm * g_norm, curvature, radius / g_norm);
    CauchyPoint {
        step_length: alpha,
        decrease,
    }
}

/// The quadratic model in the eigenbasis of `H`.
///
/// Building it costs one symmetric eigendecomposition; afterwards the
/// exact subproblem can be solved for any radius, and the Cauchy and
/// eigen points come for free.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    g: DVector<f64>,
    values: Vec<f64>,
    vectors: DMatrix<f64>,
    g_hat: Vec<f64>,
}

impl SpectralModel {
    pub fn new(g: &DVector<f64>, h: &DMatrix<f64>) -> Result<Self> {
        checked_vector(g, "gradient")?;
        let h = checked_symmetric(h, g.len())?;
        let (values, vectors) = sorted_eigen(h);
        let g_hat = (vectors.transpose() * g).iter().copied().collect();
        Ok(SpectralModel {
            g: g.clone(),
            values,
            vectors,
            g_hat,
        })
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn lambda_min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    pub fn min_eigenpair(&self) -> EigenPair {
        EigenPair {
            value: self.lambda_min(),
            vector: self.vectors.column(0).into_owned(),
        }
    }

    /// `−(gᵀd + ½ dᵀHd)` for an arbitrary step `d`.
    pub fn decrease(&self, d: &DVector<f64>) -> f64 {
        let d_hat = self.vectors.transpose() * d;
        let q: f64 = self
            .g_hat
            .iter()
            .zip(d_hat.iter())
            .zip(&self.values)
            .map(|((g, d), l)| g * d + 0.5 * l * d * d)
            .sum();
        -q
    }

    fn scale(&self) -> f64 {
        self.values.iter().fold(1.0f64, |m, v| m.max(v.abs()))
    }

    fn decrease_of(&self, d_hat: &[f64]) -> f64 {
        let q: f64 = self
            .g_hat
            .iter()
            .zip(d_hat)
            .zip(&self.values)
            .map(|((g, d), l)| g * d + 0.5 * l * d * d)
            .sum();
        (-q).max(0.0)
    }

    /// Global solution of the subproblem at `radius`.
    pub fn solve(&self, radius: f64) -> Result<TrsSolution> {
        check_radius(radius)?;
        let n = self.dim();
        if n == 0 {
            return Ok(TrsSolution::zero(0));
        }
        let scale = self.scale();
        let g_norm = self.g.norm();
        let shift = (-self.lambda_min()).max(0.0);
        let lmin = self.lambda_min();
        // Shifted eigenvalues λ_i + shift, exact zero for the leftmost one
        // when H is indefinite.
        let sigma: Vec<f64> = self
            .values
            .iter()
            .map(|&l| if shift > 0.0 { l - lmin } else { l })
            .collect();
        let sigma_tol = 1e-12 * scale;
        let g_tol = 1e-13 * (g_norm + scale * radius);

        let mut g_hat = self.g_hat.clone();
        let mut singular_pull = false;
        for (gi, &s) in g_hat.iter_mut().zip(&sigma) {
            if s <= sigma_tol {
                if gi.abs() > g_tol {
                    singular_pull = true;
                } else {
                    *gi = 0.0;
                }
            }
        }

        let step_at = |t: f64| -> Vec<f64> {
            g_hat
                .iter()
                .zip(&sigma)
                .map(|(&gi, &s)| if gi == 0.0 { 0.0 } else { -gi / (s + t) })
                .collect()
        };
        let norm_of = |d: &[f64]| d.iter().map(|v| v * v).sum::<f64>().sqrt();

        if !singular_pull {
            let d0 = step_at(0.0);
            let n0 = norm_of(&d0);
            if n0 <= radius {
                if shift == 0.0 {
                    let model_decrease = self.decrease_of(&d0);
                    return Ok(self.lift(d0, 0.0, model_decrease, false, false));
                }
                // Hard case: fill the ball along the leftmost eigenvector.
                let mut d = d0;
                let fill = (radius * radius - n0 * n0).max(0.0).sqrt();
                let theta = if self.g_hat[0] > 0.0 { -fill } else { fill };
                d[0] += theta;
                let model_decrease = self.decrease_of(&d);
                return Ok(self.lift(d, shift, model_decrease, true, true));
            }
        }

        // Boundary solution: find t ≥ 0 with ‖d(t)‖ = Δ by safeguarded
        // Newton on 1/‖d(t)‖ − 1/Δ.
        let mut lo = 0.0f64;
        let mut hi = g_norm / radius;
        let mut t = hi;
        for _ in 0..500 {
            let d = step_at(t);
            let nd = norm_of(&d);
            if (nd - radius).abs() <= SECULAR_TOL * radius {
                break;
            }
            if nd > radius {
                lo = t;
            } else {
                hi = t;
            }
            if hi - lo <= f64::EPSILON * hi.max(f64::MIN_POSITIVE) {
                break;
            }
            let d3: f64 = g_hat
                .iter()
                .zip(&sigma)
                .map(|(&gi, &s)| if gi == 0.0 { 0.0 } else { gi * gi / (s + t).powi(3) })
                .sum();
            let phi = 1.0 / nd - 1.0 / radius;
            let dphi = d3 / nd.powi(3);
            let newton = t - phi / dphi;
            t = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        let d = step_at(t);
        let model_decrease = self.decrease_of(&d);
        Ok(self.lift(d, t + shift, model_decrease, true, false))
    }

    fn lift(
        &self,
        d_hat: Vec<f64>,
        multiplier: f64,
        model_decrease: f64,
        on_boundary: bool,
        hard_case: bool,
    ) -> TrsSolution {
        TrsSolution {
            step: &self.vectors * DVector::from_vec(d_hat),
            multiplier,
            model_decrease,
            on_boundary,
            hard_case,
        }
    }

    pub fn cauchy(&self, radius: f64) -> CauchyPoint {
        let curvature: f64 = self
            .g_hat
            .iter()
            .zip(&self.values)
            .map(|(g, l)| l * g * g)
            .sum();
        cauchy_from_curvature(self.g.norm(), curvature, radius)
    }

    pub fn eigen_point(&self, radius: f64) -> EigenPoint {
        let pair = self.min_eigenpair();
        eigen_point_from(&self.g, pair, radius)
    }
}

fn eigen_point_from(g: &DVector<f64>, pair: EigenPair, radius: f64) -> EigenPoint {
    let EigenPair { value, mut vector } = pair;
    if value >= 0.0 {
        return EigenPoint {
            direction: vector,
            step_length: 0.0,
            decrease: 0.0,
        };
    }
    let mut b = g.dot(&vector);
    if b > 0.0 {
        vector.neg_mut();
        b = -b;
    }
    let (step_length, decrease) = best_on_ray(b, value, radius);
    EigenPoint {
        direction: vector,
        step_length,
        decrease,
    }
}

/// Globally optimal solution of `max_{‖d‖≤Δ} −(gᵀd + ½ dᵀHd)`.
///
/// ```
/// use astr2::trs::solve_trs_exact;
/// use nalgebra::{DMatrix, DVector};
///
/// let g = DVector::from_vec(vec![1.0, 0.0]);
/// let sol = solve_trs_exact(&g, &DMatrix::identity(2, 2), 10.0).unwrap();
/// assert_eq!(sol.step, DVector::from_vec(vec![-1.0, 0.0]));
/// assert!(!sol.on_boundary);
/// assert!((sol.model_decrease - 0.5).abs() < 1e-15);
/// ```
pub fn solve_trs_exact(g: &DVector<f64>, h: &DMatrix<f64>, radius: f64) -> Result<TrsSolution> {
    check_radius(radius)?;
    SpectralModel::new(g, h)?.solve(radius)
}

/// Best decrease along `−α g` with `α‖g‖ ≤ Δ`.
pub fn cauchy_decrease(g: &DVector<f64>, h: &DMatrix<f64>, radius: f64) -> Result<CauchyPoint> {
    check_radius(radius)?;
    checked_vector(g, "gradient")?;
    let h = checked_symmetric(h, g.len())?;
    let curvature = g.dot(&(&h * g));
    Ok(cauchy_from_curvature(g.norm(), curvature, radius))
}

/// Best decrease along a unit minimum-curvature direction `u` with
/// `uᵀg ≤ 0`. Returns a zero decrease when `H` is positive semidefinite.
pub fn eigen_decrease(
    g: &DVector<f64>,
    h: &DMatrix<f64>,
    radius: f64,
    chi: f64,
) -> Result<EigenPoint> {
    check_radius(radius)?;
    check_chi(chi)?;
    let pair = min_eigpair(HessianRef::Dense(h), LANCZOS_TOL, chi)?;
    checked_vector(g, "gradient")?;
    Ok(eigen_point_from(g, pair, radius))
}

fn check_chi(chi: f64) -> Result<()> {
    if chi > 0.0 && chi <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("chi", format!("must lie in (0, 1], got {chi}")))
    }
}

/// Smallest eigenpair of `H`.
///
/// Dense input is decomposed exactly. Operator input runs Lanczos from a
/// fixed start vector until the Ritz residual drops below `tol` (relative
/// to `max(1, |θ|)`) or the subspace fills the space. `χ` is validated
/// but does not shorten the iteration.
pub fn min_eigpair(h: HessianRef<'_>, tol: f64, chi: f64) -> Result<EigenPair> {
    if !(tol > 0.0) {
        return Err(Error::invalid("tol", "must be positive"));
    }
    check_chi(chi)?;
    match h {
        HessianRef::Dense(m) => {
            let m = checked_symmetric(m, m.nrows())?;
            let (values, vectors) = sorted_eigen(m);
            Ok(EigenPair {
                value: values.first().copied().unwrap_or(0.0),
                vector: vectors.column(0).into_owned(),
            })
        }
        HessianRef::Operator(op) => lanczos_min_eigpair(op, None, tol, chi, op.dim()),
    }
}

/// Lanczos estimate of the minimum eigenpair, at most `max_iter` steps.
pub fn lanczos_min_eigpair(
    op: &dyn SymOp,
    start: Option<&DVector<f64>>,
    tol: f64,
    chi: f64,
    max_iter: usize,
) -> Result<EigenPair> {
    check_chi(chi)?;
    let n = op.dim();
    let v0 = match start {
        Some(v) if v.norm() > 0.0 => v.clone(),
        _ => default_start(n),
    };
    let mut lz = Lanczos::new(&v0);
    let mut last = (f64::NAN, f64::INFINITY);
    while lz.len() < max_iter.min(n) && lz.extend(op) {
        let (values, vectors) = sorted_eigen(lz.tridiagonal());
        let theta = values[0];
        let y = vectors.column(0).into_owned();
        let residual = if lz.broke_down() {
            0.0
        } else {
            lz.trailing_beta() * y[y.len() - 1].abs()
        };
        last = (theta, residual);
        // A small Ritz residual only shows that *some* eigenvalue lies
        // near θ, so it cannot certify θ ≤ χλ_min on its own; the loop
        // therefore always runs to the residual tolerance, which meets
        // any χ ≤ 1 once θ has settled on the leftmost eigenvalue.
        if residual <= tol * theta.abs().max(1.0) || lz.len() == n {
            let u = lz.lift(&y);
            let norm = u.norm();
            return Ok(EigenPair {
                value: theta,
                vector: u / norm,
            });
        }
    }
    Err(Error::LanczosNotConverged {
        iterations: lz.len(),
        residual: last.1,
    })
}

/// Output of the Krylov subproblem solver.
#[derive(Debug, Clone, PartialEq)]
pub struct KrylovSolution {
    pub solution: TrsSolution,
    pub subspace_dim: usize,
    /// Cauchy decrease at the same radius.
    pub cauchy_decrease: f64,
    /// Eigen-point decrease using the leftmost Ritz pair of the subspace.
    pub eigen_decrease: f64,
    /// The leftmost Ritz pair, when the subspace is nontrivial.
    pub ritz: Option<EigenPair>,
    /// Set when the subspace solution missed the τ-fraction of the Cauchy
    /// and eigen points and was replaced by the better of the two.
    pub fell_back: bool,
}

/// Solves the subproblem restricted to a Lanczos subspace grown from `g`
/// (or from `seed` when `g = 0`).
///
/// Each expansion solves the tridiagonal subproblem exactly. Growth stops
/// at `max_dim`, on breakdown, when the projected residual vanishes, or
/// when the relative gain in decrease falls below [`KRYLOV_STAGNATION`].
pub fn solve_trs_krylov(
    g: &DVector<f64>,
    op: &dyn SymOp,
    radius: f64,
    max_dim: usize,
    tau: f64,
    seed: Option<&DVector<f64>>,
) -> Result<KrylovSolution> {
    check_radius(radius)?;
    checked_vector(g, "gradient")?;
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::invalid("tau", format!("must lie in (0, 1], got {tau}")));
    }
    let n = op.dim();
    if g.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: g.len(),
        });
    }
    let max_dim = max_dim.min(n);
    let g_norm = g.norm();
    if max_dim == 0 || n == 0 {
        return Ok(KrylovSolution {
            solution: TrsSolution::zero(n),
            subspace_dim: 0,
            cauchy_decrease: 0.0,
            eigen_decrease: 0.0,
            ritz: None,
            fell_back: false,
        });
    }

    let start = if g_norm > 0.0 {
        g.clone()
    } else {
        match seed {
            Some(s) if s.norm() > 0.0 => s.clone(),
            _ => default_start(n),
        }
    };
    let mut lz = Lanczos::new(&start);
    let mut best: Option<(TrsSolution, usize)> = None;
    let mut reduced_model: Option<SpectralModel> = None;
    let mut prev_value = 0.0f64;

    while lz.len() < max_dim && lz.extend(op) {
        let j = lz.len();
        let mut e1 = DVector::zeros(j);
        e1[0] = g_norm;
        let model = SpectralModel::new(&e1, &lz.tridiagonal())?;
        let small = model.solve(radius)?;
        let value = small.model_decrease;
        let kkt_residual = lz.trailing_beta() * small.step[j - 1].abs();
        let step = lz.lift(&small.step);
        let gain = value - prev_value;
        prev_value = value;
        best = Some((
            TrsSolution {
                step,
                multiplier: small.multiplier,
                model_decrease: value,
                on_boundary: small.on_boundary,
                hard_case: small.hard_case,
            },
            j,
        ));
        reduced_model = Some(model);
        let stagnated = j > 1 && gain <= KRYLOV_STAGNATION * value.abs();
        let converged = g_norm > 0.0 && kkt_residual <= 1e-14 * (g_norm + 1.0);
        if lz.broke_down() || stagnated || converged {
            break;
        }
    }

    let (mut solution, subspace_dim) = best.expect("at least one Lanczos step");
    let model = reduced_model.expect("reduced model");
    let cauchy = model.cauchy(radius);
    let ritz_small = model.min_eigenpair();
    let ritz = EigenPair {
        value: ritz_small.value,
        vector: {
            let u = lz.lift(&ritz_small.vector);
            let nu = u.norm();
            u / nu
        },
    };
    let eigen = eigen_point_from(g, ritz.clone(), radius);

    let target = tau * cauchy.decrease.max(eigen.decrease);
    let mut fell_back = false;
    if solution.model_decrease < target {
        fell_back = true;
        solution = if cauchy.decrease >= eigen.decrease {
            TrsSolution {
                step: g * (-cauchy.step_length),
                multiplier: 0.0,
                model_decrease: cauchy.decrease,
                on_boundary: cauchy.step_length * g_norm >= radius * (1.0 - 1e-12),
                hard_case: false,
            }
        } else {
            TrsSolution {
                step: &eigen.direction * eigen.step_length,
                multiplier: 0.0,
                model_decrease: eigen.decrease,
                on_boundary: eigen.step_length >= radius * (1.0 - 1e-12),
                hard_case: false,
            }
        };
    }

    Ok(KrylovSolution {
        solution,
        subspace_dim,
        cauchy_decrease: cauchy.decrease,
        eigen_decrease: eigen.decrease,
        ritz: Some(ritz),
        fell_back,
    })
}
