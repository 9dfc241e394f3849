//! Worst-case univariate examples on which the iteration attains its
//! rate bounds.
//!
//! Each generator prescribes `g_k = 0` and a negative Hessian `H_k` at
//! breakpoints `x_k`, so that every iteration is a quadratic one taking a
//! full trust-region step. Hermite interpolation of `(f_k, g_k, H_k)` then
//! yields a smooth function realizing the sequence; [`replay_check`]
//! confirms that the optimizer, run on that data, retraces it.

use nalgebra::{DMatrix, DVector};

use crate::driver::{run, Astr2Config, Trace};
use crate::error::{Error, Result};
use crate::oracle::Problem;
use crate::scaling::{Branch, IntervalPolicy, Scaling};

/// Riemann zeta function for real `s > 1`.
///
/// Euler–Maclaurin summation: the first `N − 1` terms exactly, then the
/// integral, midpoint and Bernoulli corrections at `N = 64`. The
/// truncation error is far below double precision for every `s > 1`.
pub fn zeta(s: f64) -> Result<f64> {
    if !(s > 1.0 && s.is_finite()) {
        return Err(Error::invalid("s", format!("zeta needs s > 1, got {s}")));
    }
    const N: usize = 64;
    // B_{2j} / (2j)!
    const BERNOULLI: [f64; 5] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
    ];
    let mut head = 0.0;
    for n in (1..N).rev() {
        head += (n as f64).powf(-s);
    }
    let big_n = N as f64;
    let mut tail = big_n.powf(1.0 - s) / (s - 1.0) + 0.5 * big_n.powf(-s);
    // Rising factorial s(s+1)…(s+2j−2) times N^{−s−2j+1}.
    let mut rising = s;
    let mut power = big_n.powf(-s - 1.0);
    for (j, b) in BERNOULLI.iter().enumerate() {
        tail += b * rising * power;
        let m = 2 * j as u32 + 1;
        rising *= (s + m as f64) * (s + m as f64 + 1.0);
        power /= big_n * big_n;
    }
    Ok(head + tail)
}

/// Which construction produced a sequence, with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SharpnessFamily {
    Adagrad {
        mu: f64,
        nu: f64,
        epsilon: f64,
        varsigma: f64,
    },
    Divergent {
        mu2: f64,
        epsilon: f64,
        varsigma: f64,
        kappa_w: f64,
    },
}

/// The data of one worst-case example.
///
/// `g`, `h`, `s`, `dq` and `phi` are indexed by `k = 0..=K`; `x` and `f`
/// carry one more entry, `x_{K+1}` and `f_{K+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SharpnessSequence {
    pub family: SharpnessFamily,
    pub x: Vec<f64>,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub s: Vec<f64>,
    pub dq: Vec<f64>,
    pub phi: Vec<f64>,
}

impl SharpnessSequence {
    /// `K`, the last iteration index.
    pub fn last_index(&self) -> usize {
        self.phi.len() - 1
    }

    /// Decay exponent `a` with `φ_k = (k+1)^{−a}`.
    pub fn exponent(&self) -> f64 {
        match self.family {
            SharpnessFamily::Adagrad { epsilon, .. } => 1.0 / 3.0 + epsilon,
            SharpnessFamily::Divergent { mu2, epsilon, .. } => (1.0 - 2.0 * mu2) / 3.0 + epsilon,
        }
    }

    pub fn f0(&self) -> f64 {
        self.f[0]
    }

    fn build(family: SharpnessFamily, f0: f64, phi: Vec<f64>, s: Vec<f64>) -> Self {
        let n = phi.len();
        let h: Vec<f64> = phi.iter().map(|p| -2.0 * p).collect();
        let dq: Vec<f64> = phi.iter().zip(&s).map(|(p, s)| p * s * s).collect();
        let mut x = Vec::with_capacity(n + 1);
        let mut f = Vec::with_capacity(n + 1);
        x.push(0.0);
        f.push(f0);
        for k in 0..n {
            x.push(x[k] + s[k]);
            f.push(f[k] - dq[k]);
        }
        SharpnessSequence {
            family,
            x,
            f,
            g: vec![0.0; n],
            h,
            s,
            dq,
            phi,
        }
    }
}

fn check_k(k_max: usize) -> Result<()> {
    if k_max == 0 {
        Err(Error::invalid("K", "need at least one iteration"))
    } else {
        Ok(())
    }
}

/// The Adagrad-scaling example: `φ_k = (k+1)^{−(1/3+ε)}` and
/// `s_k = φ_k / (ς + Σ_{j≤k} φ_j³)^ν`.
pub fn gen_adagrad_example(mu: f64, nu: f64, epsilon: f64, varsigma: f64, k_max: usize) -> Result<SharpnessSequence> {
    for (name, v) in [("mu", mu), ("nu", nu)] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::invalid(name, format!("must lie in (0, 1), got {v}")));
        }
    }
    if !(epsilon > 0.0 && epsilon < 2.0 / 3.0) {
        return Err(Error::invalid("epsilon", format!("must lie in (0, 2/3), got {epsilon}")));
    }
    if !(varsigma > 0.0 && varsigma.is_finite()) {
        return Err(Error::invalid("varsigma", format!("must be positive, got {varsigma}")));
    }
    check_k(k_max)?;
    let a = 1.0 / 3.0 + epsilon;
    let phi: Vec<f64> = (0..=k_max).map(|k| ((k + 1) as f64).powf(-a)).collect();
    let mut acc = 0.0;
    let s = phi
        .iter()
        .map(|&p| {
            acc += p.powi(3);
            p / (varsigma + acc).powf(nu)
        })
        .collect();
    let family = SharpnessFamily::Adagrad {
        mu,
        nu,
        epsilon,
        varsigma,
    };
    Ok(SharpnessSequence::build(family, zeta(1.0 + 3.0 * epsilon)?, phi, s))
}

/// The divergent-scaling example: `φ_k = (k+1)^{−γ}`,
/// `γ = (1 − 2μ₂)/3 + ε`, and `s_k = 1/(κ_w (k+1)^{γ+μ₂})`.
pub fn gen_divergent_example(mu2: f64, epsilon: f64, varsigma: f64, kappa_w: f64, k_max: usize) -> Result<SharpnessSequence> {
    if !(mu2 > 0.0 && mu2 < 0.5) {
        return Err(Error::invalid("mu2", format!("must lie in (0, 1/2), got {mu2}")));
    }
    let eps_max = 1.0 - (1.0 - 2.0 * mu2) / 3.0;
    if !(epsilon > 0.0 && epsilon < eps_max) {
        return Err(Error::invalid("epsilon", format!("must lie in (0, {eps_max}), got {epsilon}")));
    }
    if !(varsigma > 0.0 && varsigma.is_finite()) {
        return Err(Error::invalid("varsigma", format!("must be positive, got {varsigma}")));
    }
    if !(kappa_w >= varsigma.max(1.0) && kappa_w.is_finite()) {
        return Err(Error::invalid("kappa_w", format!("must be at least max(1, ς), got {kappa_w}")));
    }
    check_k(k_max)?;
    let gamma = (1.0 - 2.0 * mu2) / 3.0 + epsilon;
    let phi = (0..=k_max).map(|k| ((k + 1) as f64).powf(-gamma)).collect();
    let s = (0..=k_max)
        .map(|k| 1.0 / (kappa_w * ((k + 1) as f64).powf(gamma + mu2)))
        .collect();
    let family = SharpnessFamily::Divergent {
        mu2,
        epsilon,
        varsigma,
        kappa_w,
    };
    Ok(SharpnessSequence::build(family, zeta(3.0 * gamma + 2.0 * mu2)?, phi, s))
}

/// A `C²` piecewise quintic on `[x_0, x_m]`.
///
/// On `[x_k, x_{k+1}]` the function is `Σ_i c_i (x − x_k)^i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseQuintic {
    pub breakpoints: Vec<f64>,
    pub coeffs: Vec<[f64; 6]>,
}

impl PiecewiseQuintic {
    /// The unique quintics matching value, slope and curvature at both
    /// ends of every interval.
    pub fn hermite(x: &[f64], f: &[f64], g: &[f64], h: &[f64]) -> Result<Self> {
        let m = x.len();
        if f.len() < m || g.len() < m || h.len() < m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: f.len().min(g.len()).min(h.len()),
            });
        }
        if m < 2 {
            return Err(Error::invalid("breakpoints", "need at least two"));
        }
        let all = x.iter().chain(&f[..m]).chain(&g[..m]).chain(&h[..m]);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("interpolation data"));
        }
        let mut coeffs = Vec::with_capacity(m - 1);
        for k in 0..m - 1 {
            let w = x[k + 1] - x[k];
            if !(w > 0.0) {
                return Err(Error::NonIncreasingBreakpoints(k + 1));
            }
            let (c0, c1, c2) = (f[k], g[k], 0.5 * h[k]);
            let a = f[k + 1] - (c0 + c1 * w + c2 * w * w);
            let b = g[k + 1] - (c1 + 2.0 * c2 * w);
            let c = h[k + 1] - 2.0 * c2;
            let (w2, w3) = (w * w, w * w * w);
            coeffs.push([
                c0,
                c1,
                c2,
                10.0 * a / w3 - 4.0 * b / w2 + c / (2.0 * w),
                -15.0 * a / (w3 * w) + 7.0 * b / w3 - c / w2,
                6.0 * a / (w3 * w2) - 3.0 * b / (w3 * w) + c / (2.0 * w3),
            ]);
        }
        Ok(PiecewiseQuintic {
            breakpoints: x.to_vec(),
            coeffs,
        })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.breakpoints[0], *self.breakpoints.last().unwrap())
    }

    /// `(p(x), p′(x), p″(x))` for `x` inside the window.
    pub fn eval(&self, x: f64) -> Result<(f64, f64, f64)> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return Err(Error::OutsideDomain(x, lo, hi));
        }
        let idx = self
            .breakpoints
            .partition_point(|&b| b <= x)
            .saturating_sub(1)
            .min(self.coeffs.len() - 1);
        let c = &self.coeffs[idx];
        let t = x - self.breakpoints[idx];
        let v = c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))));
        let d1 = c[1] + t * (2.0 * c[2] + t * (3.0 * c[3] + t * (4.0 * c[4] + t * 5.0 * c[5])));
        let d2 = 2.0 * c[2] + t * (6.0 * c[3] + t * (12.0 * c[4] + t * 20.0 * c[5]));
        Ok((v, d1, d2))
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        self.eval(x).map(|e| e.0)
    }

    pub fn d1(&self, x: f64) -> Result<f64> {
        self.eval(x).map(|e| e.1)
    }

    pub fn d2(&self, x: f64) -> Result<f64> {
        self.eval(x).map(|e| e.2)
    }
}

/// Interpolant of a sequence over its breakpoints `x_0 < … < x_K`.
pub fn hermite_interpolant(seq: &SharpnessSequence) -> Result<PiecewiseQuintic> {
    let m = seq.phi.len();
    PiecewiseQuintic::hermite(&seq.x[..m], &seq.f[..m], &seq.g, &seq.h)
}

/// One sample of a figure table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FigureRow {
    pub x: f64,
    pub f: f64,
    pub df: f64,
    pub d2f: f64,
}

/// Samples the interpolant on `points_per_interval` equispaced points of
/// every interval (starting at its left breakpoint), plus the final
/// breakpoint.
///
/// With `f0_shift = Some(c)` the `f` column is moved so it starts at `c`.
/// A count of zero is treated as one.
pub fn sample_figure(
    seq: &SharpnessSequence,
    interp: &PiecewiseQuintic,
    points_per_interval: usize,
    f0_shift: Option<f64>,
) -> Vec<FigureRow> {
    let per = points_per_interval.max(1);
    let offset = f0_shift.map_or(0.0, |c| c - seq.f0());
    let bp = &interp.breakpoints;
    let mut rows = Vec::with_capacity(per * interp.coeffs.len() + 1);
    let mut push = |x: f64| {
        let (f, df, d2f) = interp.eval(x).expect("sample inside window");
        rows.push(FigureRow { x, f: f + offset, df, d2f });
    };
    for k in 0..interp.coeffs.len() {
        let w = bp[k + 1] - bp[k];
        for i in 0..per {
            push(bp[k] + w * (i as f64 / per as f64));
        }
    }
    push(*bp.last().unwrap());
    rows
}

/// Largest difference quotient of `p″` between consecutive samples (a
/// numerical proxy for the Lipschitz constant of the Hessian).
pub fn curvature_lipschitz_proxy(interp: &PiecewiseQuintic, points_per_interval: usize) -> f64 {
    let per = points_per_interval.max(1);
    let mut best = 0.0f64;
    for (k, c) in interp.coeffs.iter().enumerate() {
        let w = interp.breakpoints[k + 1] - interp.breakpoints[k];
        let d2 = |t: f64| 2.0 * c[2] + t * (6.0 * c[3] + t * (12.0 * c[4] + t * 20.0 * c[5]));
        let dt = w / per as f64;
        let mut prev = d2(0.0);
        for i in 1..=per {
            let cur = d2(i as f64 * dt);
            best = best.max((cur - prev).abs() / dt);
            prev = cur;
        }
    }
    best
}

/// Oracle answering with the sequence data at its breakpoints.
///
/// Queries further than `1e-9` from every breakpoint get NaN, which makes
/// the optimizer abort: a faithful replay never leaves the breakpoints.
#[derive(Debug, Clone)]
pub struct SequenceOracle {
    x: Vec<f64>,
    f: Vec<f64>,
    h: Vec<f64>,
}

/// Distance within which a query is matched to a breakpoint.
pub const BREAKPOINT_TOL: f64 = 1e-9;

impl SequenceOracle {
    pub fn new(seq: &SharpnessSequence) -> Self {
        let m = seq.phi.len();
        SequenceOracle {
            x: seq.x[..m].to_vec(),
            f: seq.f[..m].to_vec(),
            h: seq.h.clone(),
        }
    }

    fn lookup(&self, x: f64) -> Option<usize> {
        let i = self.x.partition_point(|&b| b < x);
        [i.checked_sub(1), Some(i)]
            .into_iter()
            .flatten()
            .filter(|&j| j < self.x.len())
            .min_by(|&a, &b| (self.x[a] - x).abs().total_cmp(&(self.x[b] - x).abs()))
            .filter(|&j| (self.x[j] - x).abs() <= BREAKPOINT_TOL)
    }
}

impl Problem for SequenceOracle {
    fn dim(&self) -> usize {
        1
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let v = self.lookup(x[0]).map_or(f64::NAN, |_| 0.0);
        DVector::from_element(1, v)
    }

    fn hessian(&self, x: &DVector<f64>) -> Option<DMatrix<f64>> {
        let v = self.lookup(x[0]).map_or(f64::NAN, |j| self.h[j]);
        Some(DMatrix::from_element(1, 1, v))
    }

    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        self.lookup(x[0]).map(|j| self.f[j])
    }
}

/// Outcome of a replay.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub passed: bool,
    /// Iterations the driver completed (all `K + 1` on success).
    pub iterations: usize,
    pub max_step_error: f64,
    pub max_radius_error: f64,
    pub trace: Trace,
}

/// Agreement required between the replay and the sequence.
pub const REPLAY_TOL: f64 = 1e-10;

fn check_family(seq: &SharpnessSequence, scaling: &Scaling) -> Result<()> {
    match (&seq.family, scaling) {
        (SharpnessFamily::Adagrad { .. }, Scaling::Adagrad(a)) => {
            let unit = a.policy == IntervalPolicy::Upper || (a.theta_l == 1.0 && a.theta_q == 1.0);
            if unit {
                Ok(())
            } else {
                Err(Error::MismatchedReplay("the Adagrad example needs ϑ_L = ϑ_Q = 1".into()))
            }
        }
        (SharpnessFamily::Divergent { .. }, Scaling::Divergent(_)) => Ok(()),
        _ => Err(Error::MismatchedReplay("scaling family differs from the sequence's".into())),
    }
}

/// Runs the optimizer on `oracle` for `K + 1` iterations from `x = 0` and
/// compares the branch, step length and radius with the sequence.
pub fn replay_with<P: Problem>(seq: &SharpnessSequence, scaling: &Scaling, oracle: &P) -> Result<ReplayReport> {
    check_family(seq, scaling)?;
    let mut config = Astr2Config::new(scaling.clone());
    config.max_iter = seq.phi.len();
    let trace = match run(oracle, &DVector::zeros(1), &config) {
        Ok(t) => t,
        Err(e) => e.partial,
    };
    let mut passed = trace.records.len() == seq.phi.len();
    let (mut step_err, mut radius_err) = (0.0f64, 0.0f64);
    for (rec, &s) in trace.records.iter().zip(&seq.s) {
        step_err = step_err.max((rec.step_norm - s).abs());
        radius_err = radius_err.max((rec.delta_q - s).abs());
        passed &= rec.branch == Branch::Quadratic;
    }
    passed &= step_err <= REPLAY_TOL && radius_err <= REPLAY_TOL;
    Ok(ReplayReport {
        passed,
        iterations: trace.records.len(),
        max_step_error: step_err,
        max_radius_error: radius_err,
        trace,
    })
}

/// [`replay_with`] on the sequence's own [`SequenceOracle`].
pub fn replay_check(seq: &SharpnessSequence, scaling: &Scaling) -> Result<ReplayReport> {
    replay_with(seq, scaling, &SequenceOracle::new(seq))
}

/// Lower bound on `avg_{j≤k} φ̂_j` for the Adagrad example,
/// `3/(2(2+3ε)) · ((k+1)^{−(1/3+ε)} − 2/(k+1))`.
pub fn average_lower_bound(k: usize, epsilon: f64) -> f64 {
    let t = (k + 1) as f64;
    1.5 / (2.0 + 3.0 * epsilon) * (t.powf(-(1.0 / 3.0 + epsilon)) - 2.0 / t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scaling::{AdagradScaling, DivergentScaling};

    /// Partial sum to 10⁶ plus the integral and midpoint tail terms.
    fn zeta_direct(s: f64) -> f64 {
        let n = 1_000_000usize;
        let mut sum = 0.0;
        for i in (1..=n).rev() {
            sum += (i as f64).powf(-s);
        }
        let nf = n as f64;
        sum + nf.powf(1.0 - s) / (s - 1.0) - 0.5 * nf.powf(-s)
    }

    #[test]
    fn zeta_values() {
        assert!((zeta(2.0).unwrap() - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-14);
        assert!((zeta(4.0).unwrap() - std::f64::consts::PI.powi(4) / 90.0).abs() < 1e-14);
        for s in [1.03, 1.2, 1.5, 1.9] {
            let (a, b) = (zeta(s).unwrap(), zeta_direct(s));
            assert!((a - b).abs() <= 1e-10 * a, "s={s}: {a} vs {b}");
        }
        let z = zeta(1.03).unwrap();
        // Laurent expansion 1/(s−1) + γ_E − γ₁(s−1).
        let laurent = 1.0 / 0.03 + 0.577_215_664_901_532_9 + 0.072_815_845_483_676_7 * 0.03;
        assert!((z - laurent).abs() < 1e-3);
        assert!((z - 33.91).abs() < 0.01);
        assert!(zeta(1.0).is_err());
    }

    #[test]
    fn adagrad_sequence_examples() {
        let seq = gen_adagrad_example(0.5, 1.0 / 3.0, 0.01, 0.01, 10).unwrap();
        assert_eq!(seq.h[0], -2.0);
        assert_eq!(seq.phi[0], 1.0);
        assert!((seq.phi[1] - 0.788_2).abs() < 5e-5);
        assert!((seq.phi[1] - 2f64.powf(-(1.0 / 3.0 + 0.01))).abs() < 1e-15);
        assert!((seq.s[0] - 1.01f64.powf(-1.0 / 3.0)).abs() < 1e-15);
        assert!(gen_adagrad_example(0.5, 1.0 / 3.0, 0.0, 0.01, 10).is_err());
        assert!(gen_adagrad_example(0.5, 1.0 / 3.0, 0.01, 0.01, 0).is_err());
    }

    #[test]
    fn divergent_sequence_examples() {
        let seq = gen_divergent_example(1.0 / 3.0, 0.01, 1.0, 1.0, 10).unwrap();
        let gamma = 1.0 / 9.0 + 0.01;
        assert!((seq.s[7] - 8f64.powf(-(gamma + 1.0 / 3.0))).abs() < 1e-15);
        for k in 0..=10 {
            let t = (k + 1) as f64;
            assert!((seq.phi[k] * t.powf(gamma) - 1.0).abs() < 1e-12);
            let dq = 1.0 / t.powf(3.0 * gamma + 2.0 / 3.0);
            assert!((seq.dq[k] - dq).abs() <= 1e-14 * dq);
        }
        assert!(gen_divergent_example(1.0 / 3.0, 0.0, 1.0, 1.0, 10).is_err());
        assert!(gen_divergent_example(0.5, 0.01, 1.0, 1.0, 10).is_err());
        assert!(gen_divergent_example(1.0 / 3.0, 0.01, 2.0, 1.5, 10).is_err());
    }

    #[test]
    fn sequence_invariants() {
        let seqs = [
            gen_adagrad_example(0.5, 1.0 / 3.0, 0.01, 0.01, 200).unwrap(),
            gen_divergent_example(1.0 / 3.0, 0.01, 1.0, 1.0, 200).unwrap(),
        ];
        for seq in &seqs {
            let a = seq.exponent();
            for k in 0..=seq.last_index() {
                assert!(seq.x[k + 1] > seq.x[k]);
                assert!((seq.x[k + 1] - seq.x[k] - seq.s[k]).abs() <= 1e-15 * seq.x[k + 1]);
                assert!(seq.f[k + 1] < seq.f[k]);
                assert!(seq.f[k + 1] >= 0.0 && seq.f[k + 1] <= seq.f[0]);
                let expect = ((k + 1) as f64).powf(-a);
                assert!((seq.phi[k] - expect).abs() <= 1e-12 * expect);
            }
            let total: f64 = seq.dq.iter().sum();
            let k = seq.last_index();
            assert!((total - (seq.f[0] - seq.f[k + 1])).abs() <= 1e-12);
        }
        let ada = &seqs[0];
        for k in 0..=ada.last_index() {
            assert!(ada.dq[k] <= ((k + 1) as f64).powf(-1.03));
            let avg: f64 = ada.phi[..=k].iter().sum::<f64>() / (k + 1) as f64;
            assert!(avg >= average_lower_bound(k, 0.01) - 1e-10);
        }
    }

    /// Coefficients from the 6×6 system of endpoint conditions.
    fn quintic_by_solve(w: f64, l: (f64, f64, f64), r: (f64, f64, f64)) -> DVector<f64> {
        let mut a = DMatrix::zeros(6, 6);
        for i in 0..6 {
            let fi = i as f64;
            a[(3, i)] = w.powi(i as i32);
            if i >= 1 {
                a[(4, i)] = fi * w.powi(i as i32 - 1);
            }
            if i >= 2 {
                a[(5, i)] = fi * (fi - 1.0) * w.powi(i as i32 - 2);
            }
        }
        a[(0, 0)] = 1.0;
        a[(1, 1)] = 1.0;
        a[(2, 2)] = 2.0;
        let b = DVector::from_vec(vec![l.0, l.1, l.2, r.0, r.1, r.2]);
        a.lu().solve(&b).unwrap()
    }

    #[test]
    fn interpolant_matches_linear_solve_and_data() {
        let seq = gen_adagrad_example(0.5, 1.0 / 3.0, 0.01, 0.01, 10).unwrap();
        let p = hermite_interpolant(&seq).unwrap();
        for k in 0..10 {
            let w = seq.x[k + 1] - seq.x[k];
            let c = quintic_by_solve(w, (seq.f[k], 0.0, seq.h[k]), (seq.f[k + 1], 0.0, seq.h[k + 1]));
            for i in 0..6 {
                assert!((c[i] - p.coeffs[k][i]).abs() <= 1e-9 * c[i].abs().max(1.0));
            }
        }
        for k in 0..=10 {
            let (v, d1, d2) = p.eval(seq.x[k]).unwrap();
            assert!((v - seq.f[k]).abs() <= 1e-9);
            assert!(d1.abs() <= 1e-9);
            assert!((d2 - seq.h[k]).abs() <= 1e-9);
        }
        assert!(matches!(p.eval(-0.1), Err(Error::OutsideDomain(..))));
        assert!(p.eval(seq.x[10] + 1e-6).is_err());
    }

    #[test]
    fn trivial_interpolants() {
        let x = [0.0, 0.5, 2.0];
        let p = PiecewiseQuintic::hermite(&x, &[3.0; 3], &[0.0; 3], &[0.0; 3]).unwrap();
        for c in &p.coeffs {
            assert_eq!(c, &[3.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        }
        let p = PiecewiseQuintic::hermite(&x, &x, &[1.0; 3], &[0.0; 3]).unwrap();
        for t in [0.0, 0.3, 1.1, 2.0] {
            assert!((p.value(t).unwrap() - t).abs() < 1e-15);
        }
        let err = PiecewiseQuintic::hermite(&[0.0, 1.0, 1.0], &[0.0; 3], &[0.0; 3], &[0.0; 3]);
        assert_eq!(err, Err(Error::NonIncreasingBreakpoints(2)));
    }

    #[test]
    fn figure_samples() {
        let seq = gen_adagrad_example(0.5, 1.0 / 3.0, 0.01, 0.01, 10).unwrap();
        let p = hermite_interpolant(&seq).unwrap();
        let rows = sample_figure(&seq, &p, 50, Some(100.0));
        assert_eq!(rows.len(), 501);
        assert_eq!(rows[0].f, 100.0);
        for k in 0..=10 {
            let r = rows[50 * k];
            // The final breakpoint is evaluated from the right end of the
            // last interval, hence the tolerance.
            assert_eq!(r.x, seq.x[k]);
            assert!(r.df.abs() <= 1e-12);
            assert!((r.d2f - seq.h[k]).abs() <= 1e-12);
            assert!((r.f - (seq.f[k] + 100.0 - seq.f[0])).abs() < 1e-12);
        }
        // Exact range of the cubic p″ on each interval, from its values at
        // the ends and at the real roots of p‴, using the closed-form
        // coefficients of the Taylor-mismatch expansion.
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for k in 0..10 {
            let w = seq.x[k + 1] - seq.x[k];
            let a = seq.f[k + 1] - seq.f[k] - 0.5 * seq.h[k] * w * w;
            let b = -seq.h[k] * w;
            let c = seq.h[k + 1] - seq.h[k];
            // p″(u) = H_k + α u + β u² + γ u³ with u = t / w.
            let alpha = 60.0 * a / (w * w) - 24.0 * b / w + 3.0 * c;
            let beta = -180.0 * a / (w * w) + 84.0 * b / w - 12.0 * c;
            let gamma = 120.0 * a / (w * w) - 60.0 * b / w + 10.0 * c;
            let cubic = |u: f64| seq.h[k] + u * (alpha + u * (beta + u * gamma));
            let mut cand = vec![0.0, 1.0];
            let disc = 4.0 * beta * beta - 12.0 * gamma * alpha;
            if disc >= 0.0 && gamma != 0.0 {
                for sgn in [-1.0, 1.0] {
                    let u = (-2.0 * beta + sgn * disc.sqrt()) / (6.0 * gamma);
                    if (0.0..=1.0).contains(&u) {
                        cand.push(u);
                    }
                }
            }
            let (klo, khi) = cand
                .iter()
                .map(|&u| cubic(u))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(v), h.max(v)));
            for r in &rows[50 * k..=50 * (k + 1)] {
                assert!(r.d2f >= klo - 1e-9 && r.d2f <= khi + 1e-9, "{r:?} not in [{klo}, {khi}]");
            }
            lo = lo.min(klo);
            hi = hi.max(khi);
        }
        // The interpolant's curvature leaves [−2, 0] between breakpoints
        // even though every H_k lies inside it.
        assert!(seq.h.iter().all(|&h| (-2.0..=0.0).contains(&h)));
        assert!(lo < -2.0 && hi > 0.0);
        let lip = curvature_lipschitz_proxy(&p, 1000);
        assert!(lip.is_finite() && lip > 0.0);
    }

    #[test]
    fn replays_reproduce_sequences() {
        let seq = gen_adagrad_example(0.5, 1.0 / 3.0, 0.01, 0.01, 10).unwrap();
        let scaling = Scaling::Adagrad(AdagradScaling::new(0.01, 0.5, 1.0 / 3.0).unwrap());
        let r = replay_check(&seq, &scaling).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.iterations, 11);

        let off = Scaling::Adagrad(AdagradScaling::new(0.011, 0.5, 1.0 / 3.0).unwrap());
        assert!(!replay_check(&seq, &off).unwrap().passed);

        let div = gen_divergent_example(1.0 / 3.0, 0.01, 1.0, 1.0, 10).unwrap();
        let ds = DivergentScaling::upper_band(1.0, 1.0, (0.5, 1.0 / 3.0), (0.5, 1.0 / 3.0)).unwrap();
        assert!(replay_check(&div, &Scaling::Divergent(ds)).unwrap().passed);

        assert!(matches!(replay_check(&div, &scaling), Err(Error::MismatchedReplay(_))));
        let osc = AdagradScaling::with_interval(0.01, 0.5, 1.0 / 3.0, 0.5, 0.5, IntervalPolicy::Oscillating).unwrap();
        assert!(replay_check(&seq, &Scaling::Adagrad(osc)).is_err());
    }
}
