//! Scaling factors `w^L_k`, `w^Q_k` that turn optimality measures into
//! trust-region radii.
//!
//! Two families are provided. [`AdagradScaling`] accumulates squared
//! gradient norms (linear iterations) and cubed clipped measures
//! (quadratic iterations). [`DivergentScaling`] grows polynomially in the
//! iteration counter.

use crate::error::{Error, Result};

/// Which step the iteration takes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// Scaled negative gradient.
    Linear,
    /// Trust-region step on the quadratic model.
    Quadratic,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Linear => "L",
            Branch::Quadratic => "Q",
        }
    }
}

/// The pair of weights for one iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub linear: f64,
    pub quadratic: f64,
}

/// How a weight is picked inside `[ϑ·ŵ, ŵ]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IntervalPolicy {
    /// Always `ŵ`.
    #[default]
    Upper,
    /// `(ϑ + (1 − ϑ)(k mod 2))·ŵ`: the lower end on even iterations, the
    /// upper end on odd ones.
    Oscillating,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdagradScaling {
    pub varsigma: f64,
    pub mu: f64,
    pub nu: f64,
    pub theta_l: f64,
    pub theta_q: f64,
    pub policy: IntervalPolicy,
    a_accum: f64,
    b_accum: f64,
}

fn open_unit(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must lie in (0, 1), got {v}")))
    }
}

fn half_open_unit(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must lie in (0, 1], got {v}")))
    }
}

impl AdagradScaling {
    pub fn new(varsigma: f64, mu: f64, nu: f64) -> Result<Self> {
        Self::with_interval(varsigma, mu, nu, 1.0, 1.0, IntervalPolicy::Upper)
    }

    pub fn with_interval(
        varsigma: f64,
        mu: f64,
        nu: f64,
        theta_l: f64,
        theta_q: f64,
        policy: IntervalPolicy,
    ) -> Result<Self> {
        if !(varsigma > 0.0 && varsigma.is_finite()) {
            return Err(Error::invalid("varsigma", format!("must be positive, got {varsigma}")));
        }
        open_unit("mu", mu)?;
        open_unit("nu", nu)?;
        half_open_unit("theta_l", theta_l)?;
        half_open_unit("theta_q", theta_q)?;
        Ok(AdagradScaling {
            varsigma,
            mu,
            nu,
            theta_l,
            theta_q,
            policy,
            a_accum: 0.0,
            b_accum: 0.0,
        })
    }

    /// Running `Σ ‖g_ℓ‖²` over linear iterations so far.
    pub fn a_accum(&self) -> f64 {
        self.a_accum
    }

    /// Running `Σ φ̂_ℓ³` over quadratic iterations so far.
    pub fn b_accum(&self) -> f64 {
        self.b_accum
    }

    /// Upper ends `ŵ^L = (ς + a)^μ`, `ŵ^Q = (ς + b)^ν`.
    pub fn upper(&self) -> Weights {
        Weights {
            linear: (self.varsigma + self.a_accum).powf(self.mu),
            quadratic: (self.varsigma + self.b_accum).powf(self.nu),
        }
    }

    /// Adds iteration `k`'s own term to the accumulator of `branch`, then
    /// emits both weights.
    pub fn weights(&mut self, k: usize, branch: Branch, g_norm_sq: f64, hatphi_cubed: f64) -> Weights {
        match branch {
            Branch::Linear => self.a_accum += g_norm_sq,
            Branch::Quadratic => self.b_accum += hatphi_cubed,
        }
        let upper = self.upper();
        let pick = |theta: f64| match self.policy {
            IntervalPolicy::Upper => 1.0,
            IntervalPolicy::Oscillating => theta + (1.0 - theta) * (k % 2) as f64,
        };
        Weights {
            linear: pick(self.theta_l) * upper.linear,
            quadratic: pick(self.theta_q) * upper.quadratic,
        }
    }
}

/// Polynomially divergent weights `c·(k+1)^{e}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergentScaling {
    pub varsigma: f64,
    pub kappa_w: f64,
    pub nu1: f64,
    pub mu1: f64,
    pub nu2: f64,
    pub mu2: f64,
    /// Exponent used for `w^L`, in `[ν₁, μ₁]`.
    pub exp_linear: f64,
    /// Exponent used for `w^Q`, in `[ν₂, μ₂]`.
    pub exp_quadratic: f64,
    /// Coefficient in `[ς, κ_w]`.
    pub coeff: f64,
}

impl DivergentScaling {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        varsigma: f64,
        kappa_w: f64,
        (nu1, mu1): (f64, f64),
        (nu2, mu2): (f64, f64),
        exp_linear: f64,
        exp_quadratic: f64,
        coeff: f64,
    ) -> Result<Self> {
        half_open_unit("varsigma", varsigma)?;
        if !(kappa_w >= varsigma.max(1.0)) {
            return Err(Error::invalid("kappa_w", format!("must be at least max(1, ς), got {kappa_w}")));
        }
        if !(nu1 > 0.0 && nu1 <= mu1 && mu1 < 1.0) {
            return Err(Error::invalid("nu1/mu1", "need 0 < ν₁ ≤ μ₁ < 1"));
        }
        if !(nu2 > 0.0 && nu2 <= mu2 && mu2 < 0.5) {
            return Err(Error::invalid("nu2/mu2", "need 0 < ν₂ ≤ μ₂ < ½"));
        }
        if !(nu1..=mu1).contains(&exp_linear) {
            return Err(Error::invalid("exp_linear", "must lie in [ν₁, μ₁]"));
        }
        if !(nu2..=mu2).contains(&exp_quadratic) {
            return Err(Error::invalid("exp_quadratic", "must lie in [ν₂, μ₂]"));
        }
        if !(varsigma..=kappa_w).contains(&coeff) {
            return Err(Error::invalid("coeff", "must lie in [ς, κ_w]"));
        }
        Ok(DivergentScaling {
            varsigma,
            kappa_w,
            nu1,
            mu1,
            nu2,
            mu2,
            exp_linear,
            exp_quadratic,
            coeff,
        })
    }

    /// Weights at the upper end of both bands: `κ_w(k+1)^{μ₁}`,
    /// `κ_w(k+1)^{μ₂}`.
    pub fn upper_band(varsigma: f64, kappa_w: f64, nu: (f64, f64), mu: (f64, f64)) -> Result<Self> {
        Self::new(varsigma, kappa_w, (nu.0, mu.0), (nu.1, mu.1), mu.0, mu.1, kappa_w)
    }

    pub fn weights(&self, k: usize) -> Weights {
        let t = (k + 1) as f64;
        Weights {
            linear: self.coeff * t.powf(self.exp_linear),
            quadratic: self.coeff * t.powf(self.exp_quadratic),
        }
    }

    /// The admissible band for each weight at iteration `k`.
    pub fn bands(&self, k: usize) -> ((f64, f64), (f64, f64)) {
        let t = (k + 1) as f64;
        (
            (self.varsigma * t.powf(self.nu1), self.kappa_w * t.powf(self.mu1)),
            (self.varsigma * t.powf(self.nu2), self.kappa_w * t.powf(self.mu2)),
        )
    }
}

/// A scaling rule owned by one optimizer run.
#[derive(Debug, Clone, PartialEq)]
pub enum Scaling {
    Adagrad(AdagradScaling),
    Divergent(DivergentScaling),
}

impl Scaling {
    /// Weights for iteration `k` once its branch has been decided.
    pub fn weights(&mut self, k: usize, branch: Branch, g_norm_sq: f64, hatphi_cubed: f64) -> Weights {
        match self {
            Scaling::Adagrad(s) => s.weights(k, branch, g_norm_sq, hatphi_cubed),
            Scaling::Divergent(s) => s.weights(k),
        }
    }

    /// Accumulators `(a, b)` for Adagrad scaling.
    pub fn accumulators(&self) -> Option<(f64, f64)> {
        match self {
            Scaling::Adagrad(s) => Some((s.a_accum, s.b_accum)),
            Scaling::Divergent(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn adagrad_first_quadratic_iteration() {
        let mut s = AdagradScaling::new(0.01, 0.5, 1.0 / 3.0).unwrap();
        let w = s.weights(0, Branch::Quadratic, 0.0, 1.0);
        // (1.01)^{1/3} = 1.003322283...
        assert!((w.quadratic - 1.003_322_283_542_3).abs() < 1e-12);
        assert_eq!(w.quadratic, 1.01f64.powf(1.0 / 3.0));
        assert_eq!(w.linear, 0.01f64.sqrt());
    }

    #[test]
    fn adagrad_without_linear_iterations() {
        let mut s = AdagradScaling::new(1.0, 0.5, 1.0 / 3.0).unwrap();
        assert_eq!(s.weights(0, Branch::Quadratic, 4.0, 0.5).linear, 1.0);
        assert_eq!(s.a_accum(), 0.0);
        assert_eq!(s.b_accum(), 0.5);
    }

    #[test]
    fn collapsed_interval_emits_upper_end() {
        let mut s =
            AdagradScaling::with_interval(0.5, 0.4, 0.6, 1.0, 1.0, IntervalPolicy::Oscillating).unwrap();
        for k in 0..6 {
            let branch = if k % 3 == 0 { Branch::Linear } else { Branch::Quadratic };
            let w = s.weights(k, branch, 0.3, 0.2);
            assert_eq!(w, s.upper());
        }
    }

    #[test]
    fn oscillating_policy_stays_in_interval() {
        let mut s =
            AdagradScaling::with_interval(1.0, 0.5, 1.0 / 3.0, 0.4, 0.7, IntervalPolicy::Oscillating)
                .unwrap();
        let mut prev_upper = s.upper();
        for k in 0..20 {
            let branch = if k % 2 == 0 { Branch::Linear } else { Branch::Quadratic };
            let w = s.weights(k, branch, 0.5, 0.25);
            let u = s.upper();
            assert!(w.linear >= 0.4 * u.linear - 1e-15 && w.linear <= u.linear);
            assert!(w.quadratic >= 0.7 * u.quadratic - 1e-15 && w.quadratic <= u.quadratic);
            assert!(u.linear >= prev_upper.linear && u.quadratic >= prev_upper.quadratic);
            prev_upper = u;
        }
    }

    #[test]
    fn adagrad_rejects_bad_parameters() {
        assert!(AdagradScaling::new(0.0, 0.5, 0.5).is_err());
        assert!(AdagradScaling::new(-1.0, 0.5, 0.5).is_err());
        assert!(AdagradScaling::new(1.0, 1.0, 0.5).is_err());
        assert!(AdagradScaling::with_interval(1.0, 0.5, 0.5, 0.0, 1.0, IntervalPolicy::Upper).is_err());
    }

    #[test]
    fn divergent_examples() {
        let s = DivergentScaling::new(1.0, 1.0, (0.1, 0.5), (0.1, 1.0 / 3.0), 0.1, 0.2, 1.0).unwrap();
        assert_eq!(s.weights(0).linear, 1.0);
        let s = DivergentScaling::new(1.0, 1.0, (0.5, 0.5), (0.2, 1.0 / 3.0), 0.5, 1.0 / 3.0, 1.0)
            .unwrap();
        assert!((s.weights(7).quadratic - 2.0).abs() < 1e-15);
    }

    #[test]
    fn divergent_weights_respect_bands() {
        let s = DivergentScaling::new(0.5, 2.0, (0.2, 0.7), (0.1, 0.4), 0.3, 0.25, 1.3).unwrap();
        for k in 0..1000 {
            let w = s.weights(k);
            let ((l_lo, l_hi), (q_lo, q_hi)) = s.bands(k);
            assert!(l_lo <= w.linear && w.linear <= l_hi);
            assert!(q_lo <= w.quadratic && w.quadratic <= q_hi);
        }
    }

    #[test]
    fn divergent_rejects_inadmissible_exponents() {
        let base = |e1: f64, e2: f64, c: f64, kw: f64| {
            DivergentScaling::new(1.0, kw, (0.1, 0.5), (0.1, 0.4), e1, e2, c)
        };
        assert!(base(0.6, 0.2, 1.0, 1.0).is_err());
        assert!(base(0.3, 0.45, 1.0, 1.0).is_err());
        assert!(base(0.3, 0.2, 3.0, 2.0).is_err());
        assert!(base(0.3, 0.2, 1.0, 0.5).is_err());
        assert!(DivergentScaling::new(1.0, 1.0, (0.1, 0.5), (0.1, 0.5), 0.3, 0.2, 1.0).is_err());
    }
}
