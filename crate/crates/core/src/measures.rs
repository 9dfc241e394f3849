//! First- and second-order optimality measures.
//!
//! `φ₂^δ(x)` is the largest decrease of the second-order Taylor model
//! inside the ball of radius `δ`. It is computed from `g` and `H` alone,
//! never from `f`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::SymOp;
use crate::trs::{solve_trs_krylov, SpectralModel};

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("delta", format!("must be positive, got {delta}")))
    }
}

/// `φ₁^δ = δ‖g‖`.
pub fn phi1(g: &DVector<f64>, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    Ok(delta * g.norm())
}

/// `φ₂^δ` and a maximizing step.
pub fn phi2(g: &DVector<f64>, h: &DMatrix<f64>, delta: f64) -> Result<(f64, DVector<f64>)> {
    check_delta(delta)?;
    let sol = SpectralModel::new(g, h)?.solve(delta)?;
    Ok((sol.model_decrease, sol.step))
}

/// `φ₂^δ` restricted to a Krylov subspace of dimension at most `max_dim`.
///
/// `max_dim = 0` selects the trivial subspace `{0}` and returns zero.
pub fn phi2_subspace(
    g: &DVector<f64>,
    hvp: &dyn SymOp,
    delta: f64,
    max_dim: usize,
) -> Result<(f64, usize)> {
    check_delta(delta)?;
    if max_dim == 0 {
        return Ok((0.0, 0));
    }
    let k = solve_trs_krylov(g, hvp, delta, max_dim, 1.0, None)?;
    Ok((k.solution.model_decrease, k.subspace_dim))
}

/// All measures at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalityReport {
    pub phi1: f64,
    pub phi2: f64,
    /// `min(φ₂, ξ)`.
    pub hatphi: f64,
    /// `min(1, max(‖g‖², φ₂³))`.
    pub psi: f64,
    /// `max(0, −λ_min[H])`.
    pub eta: f64,
    pub argmin_d: DVector<f64>,
}

/// `min(1, max(‖g‖², φ³))`.
pub fn psi(g_norm: f64, phi: f64) -> f64 {
    (g_norm * g_norm).max(phi.powi(3)).min(1.0)
}

pub fn combined_measures(
    g: &DVector<f64>,
    h: &DMatrix<f64>,
    xi: f64,
    delta: f64,
) -> Result<OptimalityReport> {
    check_delta(delta)?;
    if !(xi >= 1.0) {
        return Err(Error::invalid("xi", format!("must be at least 1, got {xi}")));
    }
    let model = SpectralModel::new(g, h)?;
    let sol = model.solve(delta)?;
    let phi2 = sol.model_decrease;
    let g_norm = g.norm();
    Ok(OptimalityReport {
        phi1: delta * g_norm,
        phi2,
        hatphi: phi2.min(xi),
        psi: psi(g_norm, phi2),
        eta: (-model.lambda_min()).max(0.0),
        argmin_d: sol.step,
    })
}
