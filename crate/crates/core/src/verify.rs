//! Brute-force reference values for the trust-region subproblem.
//!
//! These routines share nothing with [`crate::trs`]: they never form an
//! eigendecomposition or solve the secular equation. They only evaluate
//! the model at feasible points, so every value they return is a lower
//! bound on the true optimum.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::trs::{solve_trs_exact, solve_trs_krylov, TrsSolution};

fn decrease(g: &DVector<f64>, h: &DMatrix<f64>, d: &DVector<f64>) -> f64 {
    -(g.dot(d) + 0.5 * d.dot(&(h * d)))
}

/// Stationary points of the model strictly inside the ball.
fn interior_candidate(g: &DVector<f64>, h: &DMatrix<f64>, radius: f64) -> Option<f64> {
    let d = match h.clone().try_inverse() {
        Some(inv) => -(inv * g),
        None => {
            let pinv = h.clone().pseudo_inverse(1e-12).ok()?;
            -(pinv * g)
        }
    };
    (d.norm() <= radius).then(|| decrease(g, h, &d))
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        if (b - a).abs() < 1e-15 {
            break;
        }
    }
    fc.max(fd)
}

/// Best model decrease on the circle for `n = 2`: a 10⁴-point angular grid,
/// then golden-section refinement around every grid-local maximum.
fn circle_max(g: &DVector<f64>, h: &DMatrix<f64>, radius: f64) -> f64 {
    const POINTS: usize = 10_000;
    let step = std::f64::consts::TAU / POINTS as f64;
    let at = |theta: f64| {
        let d = DVector::from_vec(vec![radius * theta.cos(), radius * theta.sin()]);
        decrease(g, h, &d)
    };
    let vals: Vec<f64> = (0..POINTS).map(|i| at(i as f64 * step)).collect();
    let mut best = f64::MIN;
    for i in 0..POINTS {
        let prev = vals[(i + POINTS - 1) % POINTS];
        let next = vals[(i + 1) % POINTS];
        if vals[i] >= prev && vals[i] >= next {
            let theta = i as f64 * step;
            best = best.max(golden_max(at, theta - step, theta + step));
        }
        best = best.max(vals[i]);
    }
    best
}

/// Best model decrease on the sphere for `n ≥ 3`: majorize-minimize
/// iterations from `restarts` random seeds, then a long polish of the
/// best one.
fn sphere_max<R: Rng>(
    g: &DVector<f64>,
    h: &DMatrix<f64>,
    radius: f64,
    restarts: usize,
    rng: &mut R,
) -> f64 {
    let n = g.len();
    let sigma = h.norm() + 1.0;
    let iterate = |d: &DVector<f64>| {
        let grad = h * d + g;
        let w = d * sigma - grad;
        let nw = w.norm();
        if nw == 0.0 {
            d.clone()
        } else {
            w * (radius / nw)
        }
    };
    let mut best_d = None;
    let mut best_v = f64::MIN;
    for _ in 0..restarts {
        let mut d = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let nd = d.norm();
        if nd == 0.0 {
            continue;
        }
        d *= radius / nd;
        for _ in 0..300 {
            d = iterate(&d);
        }
        let v = decrease(g, h, &d);
        if v > best_v {
            best_v = v;
            best_d = Some(d);
        }
    }
    if let Some(mut d) = best_d {
        let mut prev = best_v;
        for _ in 0..50_000 {
            d = iterate(&d);
            let v = decrease(g, h, &d);
            if (v - prev).abs() <= 1e-16 * v.abs().max(1.0) {
                prev = v;
                break;
            }
            prev = v;
        }
        best_v = best_v.max(prev);
    }
    best_v
}

/// Brute-force estimate of `max_{‖d‖≤Δ} −(gᵀd + ½ dᵀHd)`.
///
/// Enumerates the interior stationary point and a boundary search:
/// both endpoints for `n = 1`, a refined angular grid for `n = 2`, and
/// 100 randomly seeded sphere ascents for `n ≥ 3`.
pub fn brute_force_trs<R: Rng>(g: &DVector<f64>, h: &DMatrix<f64>, radius: f64, rng: &mut R) -> f64 {
    let n = g.len();
    let mut best = 0.0f64;
    if let Some(v) = interior_candidate(g, h, radius) {
        best = best.max(v);
    }
    let boundary = match n {
        0 => 0.0,
        1 => {
            let a = decrease(g, h, &DVector::from_element(1, radius));
            let b = decrease(g, h, &DVector::from_element(1, -radius));
            a.max(b)
        }
        2 => circle_max(g, h, radius),
        _ => sphere_max(g, h, radius, 100, rng),
    };
    best.max(boundary)
}

/// Violations of the optimality conditions of a subproblem solution, each
/// scaled so that the pass threshold is the same for every instance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktResiduals {
    /// `max(0, ‖d‖ − Δ) / Δ`.
    pub norm_excess: f64,
    /// `max(0, −λ)`.
    pub negative_multiplier: f64,
    /// `|λ (Δ − ‖d‖)| / Δ`.
    pub complementarity: f64,
    /// `‖(H + λI)d + g‖ / (‖g‖ + 1)`.
    pub stationarity: f64,
    /// `max(0, −λ_min(H + λI))`.
    pub curvature: f64,
}

impl KktResiduals {
    /// Measures `sol` against the subproblem `(g, H, Δ)`.
    pub fn of(g: &DVector<f64>, h: &DMatrix<f64>, radius: f64, sol: &TrsSolution) -> Self {
        let n = g.len();
        let d = &sol.step;
        let lambda = sol.multiplier;
        let shifted = h + DMatrix::identity(n, n) * lambda;
        let lmin = if n == 0 {
            0.0
        } else {
            shifted.clone().symmetric_eigenvalues().min()
        };
        KktResiduals {
            norm_excess: (d.norm() - radius).max(0.0) / radius,
            negative_multiplier: (-lambda).max(0.0),
            complementarity: (lambda * (radius - d.norm())).abs() / radius,
            stationarity: (&shifted * d + g).norm() / (g.norm() + 1.0),
            curvature: (-lmin).max(0.0),
        }
    }

    /// Whether every residual is inside its tolerance.
    pub fn ok(&self) -> bool {
        self.norm_excess <= 1e-10
            && self.negative_multiplier == 0.0
            && self.complementarity <= 1e-8
            && self.stationarity <= 1e-8
            && self.curvature <= 1e-10
    }

    fn max_with(&mut self, o: &KktResiduals) {
        self.norm_excess = self.norm_excess.max(o.norm_excess);
        self.negative_multiplier = self.negative_multiplier.max(o.negative_multiplier);
        self.complementarity = self.complementarity.max(o.complementarity);
        self.stationarity = self.stationarity.max(o.stationarity);
        self.curvature = self.curvature.max(o.curvature);
    }
}

/// A random subproblem: `n` uniform in `1..=max_n`, entries of `g` and of
/// the symmetric `H` uniform in `[−2, 2]`.
pub fn random_trs_instance<R: Rng>(rng: &mut R, max_n: usize) -> (DVector<f64>, DMatrix<f64>) {
    let n = rng.random_range(1..=max_n);
    let g = DVector::from_fn(n, |_, _| rng.random_range(-2.0..=2.0));
    let mut h = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.random_range(-2.0..=2.0);
            h[(i, j)] = v;
            h[(j, i)] = v;
        }
    }
    (g, h)
}

/// Comparison of one subproblem against the brute-force and Krylov
/// solvers.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceCheck {
    pub exact: f64,
    pub brute_force: f64,
    pub krylov: f64,
    pub kkt: KktResiduals,
}

/// Pass threshold on model-decrease deviations.
pub const TRS_CHECK_TOL: f64 = 1e-8;

pub fn check_instance<R: Rng>(g: &DVector<f64>, h: &DMatrix<f64>, radius: f64, rng: &mut R) -> Result<InstanceCheck> {
    let exact = solve_trs_exact(g, h, radius)?;
    let krylov = solve_trs_krylov(g, h, radius, g.len(), 1.0, None)?;
    Ok(InstanceCheck {
        exact: exact.model_decrease,
        brute_force: brute_force_trs(g, h, radius, rng),
        krylov: krylov.solution.model_decrease,
        kkt: KktResiduals::of(g, h, radius, &exact),
    })
}

/// Aggregate of a seeded batch of subproblem checks.
#[derive(Debug, Clone, PartialEq)]
pub struct TrsCheckReport {
    pub instances: usize,
    pub solves: usize,
    pub seed: u64,
    /// `max |Δq_exact − Δq_brute|`.
    pub max_oracle_gap: f64,
    /// `max (Δq_brute − Δq_exact)`: positive only if the exact solver was
    /// beaten by a feasible point.
    pub max_oracle_excess: f64,
    /// `max |Δq_krylov − Δq_exact|` with the full Krylov dimension.
    pub max_krylov_gap: f64,
    pub worst_kkt: KktResiduals,
    pub kkt_failures: usize,
}

impl TrsCheckReport {
    pub fn passed(&self) -> bool {
        self.max_oracle_gap <= TRS_CHECK_TOL && self.max_krylov_gap <= TRS_CHECK_TOL && self.kkt_failures == 0
    }

    /// Fixed-format summary, identical for identical inputs.
    pub fn render(&self) -> String {
        let k = &self.worst_kkt;
        format!(
            "instances            {}\n\
             subproblems          {}\n\
             seed                 {}\n\
             max |exact - brute|  {:.6e}\n\
             max (brute - exact)  {:.6e}\n\
             max |krylov - exact| {:.6e}\n\
             kkt norm excess      {:.6e}\n\
             kkt complementarity  {:.6e}\n\
             kkt stationarity     {:.6e}\n\
             kkt curvature        {:.6e}\n\
             kkt failures         {}\n\
             result               {}\n",
            self.instances,
            self.solves,
            self.seed,
            self.max_oracle_gap,
            self.max_oracle_excess,
            self.max_krylov_gap,
            k.norm_excess,
            k.complementarity,
            k.stationarity,
            k.curvature,
            self.kkt_failures,
            if self.passed() { "PASS" } else { "FAIL" },
        )
    }
}

/// Checks `count` seeded random instances, each at every radius.
pub fn trs_check(count: usize, max_n: usize, radii: &[f64], seed: u64) -> Result<TrsCheckReport> {
    if count == 0 {
        return Err(Error::invalid("count", "need at least one instance"));
    }
    if max_n == 0 {
        return Err(Error::invalid("max_n", "need n ≥ 1"));
    }
    if radii.is_empty() {
        return Err(Error::invalid("radii", "need at least one radius"));
    }
    // Instances and oracle restarts draw from separate streams so that the
    // instance set does not depend on how much randomness the oracle uses.
    let mut gen = ChaCha8Rng::seed_from_u64(seed);
    let mut oracle_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let mut report = TrsCheckReport {
        instances: count,
        solves: 0,
        seed,
        max_oracle_gap: 0.0,
        max_oracle_excess: f64::NEG_INFINITY,
        max_krylov_gap: 0.0,
        worst_kkt: KktResiduals::default(),
        kkt_failures: 0,
    };
    for _ in 0..count {
        let (g, h) = random_trs_instance(&mut gen, max_n);
        for &radius in radii {
            let c = check_instance(&g, &h, radius, &mut oracle_rng)?;
            report.absorb(&c);
        }
    }
    Ok(report)
}

impl TrsCheckReport {
    /// Folds one instance into the aggregate.
    pub fn absorb(&mut self, c: &InstanceCheck) {
        self.solves += 1;
        self.max_oracle_gap = self.max_oracle_gap.max((c.exact - c.brute_force).abs());
        self.max_oracle_excess = self.max_oracle_excess.max(c.brute_force - c.exact);
        self.max_krylov_gap = self.max_krylov_gap.max((c.krylov - c.exact).abs());
        self.worst_kkt.max_with(&c.kkt);
        if !c.kkt.ok() {
            self.kkt_failures += 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let g = DVector::from_vec(vec![0.0]);
        let h = DMatrix::from_element(1, 1, -2.0);
        assert_eq!(brute_force_trs(&g, &h, 1.0, &mut rng), 1.0);

        let g = DVector::from_vec(vec![1.0, 0.0]);
        let h = DMatrix::identity(2, 2);
        assert!((brute_force_trs(&g, &h, 10.0, &mut rng) - 0.5).abs() < 1e-14);

        // Pure negative curvature in 3-D: ½·3·Δ².
        let g = DVector::zeros(3);
        let h = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -3.0, 0.5]));
        assert!((brute_force_trs(&g, &h, 2.0, &mut rng) - 6.0).abs() < 1e-10);
    }

    #[test]
    fn small_seeded_batch_passes_and_is_deterministic() {
        let a = trs_check(40, 4, &[0.1, 1.0, 10.0], 7).unwrap();
        assert!(a.passed(), "{}", a.render());
        assert_eq!(a.solves, 120);
        let b = trs_check(40, 4, &[0.1, 1.0, 10.0], 7).unwrap();
        assert_eq!(a.render(), b.render());
        assert!(trs_check(0, 4, &[1.0], 7).is_err());
    }
}
