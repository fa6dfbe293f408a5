//! Continuity bounds that extend a visibility certified at a grid point
//! `(θ_i, φ_j)` to neighbouring angles: mixing in a separable state costs a
//! factor `v` on Alice's visibility.

use std::f64::consts::FRAC_PI_4;

use nalgebra::Matrix4;
use serde::Serialize;

use crate::bloch::{kron2, partial_trace, partial_transpose, schmidt_state, BipartiteOperator, Party, TwoQubitState};
use crate::error::{Error, Result};

/// A grid point with its LP-certified visibility.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GluePoint {
    pub theta_i: f64,
    pub phi_j: f64,
    pub eta_i: f64,
    pub alpha: f64,
}

fn check_angle(what: &'static str, theta: f64) -> Result<()> {
    if theta > 0.0 && theta <= FRAC_PI_4 + 1e-15 {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: theta,
            domain: "(0, π/4]",
        })
    }
}

/// Upper bounds on `v` from positivity of the four diagonal entries of the
/// separable remainder, in the order `00, 01, 10, 11`.
pub fn diag_bounds(theta: f64, theta_i: f64, eta: f64) -> Result<[f64; 4]> {
    check_angle("theta", theta)?;
    check_angle("theta_i", theta_i)?;
    let up = theta.tan() / theta_i.tan();
    let down = 1.0 / up;
    Ok([
        1.0 / (up * (1.0 + eta) - eta),
        1.0 / (down * (1.0 - eta) + eta),
        1.0 / (up * (1.0 - eta) + eta),
        1.0 / (down * (1.0 + eta) - eta),
    ])
}

/// `η_i / (cot θ·tan θ_i·(1 + η_i) − η_i)` for `θ ≤ θ_i`.
pub fn eta_theta_step(theta: f64, theta_i: f64, eta_i: f64) -> Result<f64> {
    check_angle("theta", theta)?;
    check_angle("theta_i", theta_i)?;
    if theta > theta_i {
        return Err(Error::Domain {
            what: "theta",
            value: theta,
            domain: "(0, θ_i]",
        });
    }
    let denom = theta_i.tan() / theta.tan() * (1.0 + eta_i) - eta_i;
    if denom <= 0.0 {
        return Err(Error::Internal(format!("non-positive denominator {denom}")));
    }
    Ok(eta_i / denom)
}

/// The decomposition behind [`eta_theta_step`] at `φ = 0`: with Alice's noise moved
/// into the state, `τ(θ) = p·τ_i + (1 − p)·σ` where `p = v·sin 2θ / sin 2θ_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaDecomposition {
    pub p: f64,
    pub sigma: Matrix4<f64>,
}

fn noisy_schmidt(theta: f64, eta: f64) -> Matrix4<f64> {
    let rho = schmidt_state(theta, 0.0);
    let rho_b = partial_trace(&rho, Party::Alice);
    let noise = kron2(&(nalgebra::Matrix2::identity() * 0.5), &rho_b.to_matrix());
    rho.matrix() * eta + noise * (1.0 - eta)
}

pub fn theta_decomposition(theta: f64, theta_i: f64, eta_i: f64, v: f64) -> Result<ThetaDecomposition> {
    check_angle("theta", theta)?;
    check_angle("theta_i", theta_i)?;
    let p = v * (2.0 * theta).sin() / (2.0 * theta_i).sin();
    if !(p < 1.0) {
        return Err(Error::Domain {
            what: "p",
            value: p,
            domain: "[0, 1)",
        });
    }
    let tau = noisy_schmidt(theta, v * eta_i);
    let tau_i = noisy_schmidt(theta_i, eta_i);
    Ok(ThetaDecomposition {
        p,
        sigma: (tau - tau_i * p) / (1.0 - p),
    })
}

/// Largest `|δφ|` for which the φ-step formula is defined: `½·arccos(7/8)`.
pub fn max_phi_step() -> f64 {
    0.5 * (7.0f64 / 8.0).acos()
}

/// `(1 − 2√2·√(1 − cos 2δφ)) / (8 cos 2δφ − 7)`.
pub fn v_phi_step(delta_phi: f64) -> Result<f64> {
    let c = (2.0 * delta_phi).cos();
    let denom = 8.0 * c - 7.0;
    if !(denom > 0.0) || !delta_phi.is_finite() {
        return Err(Error::Domain {
            what: "delta_phi",
            value: delta_phi,
            domain: "|δφ| < ½·arccos(7/8)",
        });
    }
    Ok((1.0 - 2.0 * 2f64.sqrt() * (1.0 - c).max(0.0).sqrt()) / denom)
}

pub fn eta_phi_step(delta_phi: f64, eta_i: f64) -> Result<f64> {
    Ok(v_phi_step(delta_phi)? * eta_i)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparabilityReport {
    pub trace: f64,
    /// `max |PT_B(σ) − σ|`.
    pub pt_residual: f64,
    /// Eigenvalues of σ, ascending.
    pub eigenvalues: [f64; 4],
    /// `{0, 1/4, (3 ± √(5 + 4 cos 4θ_i))/8}`, ascending.
    pub expected_eigenvalues: [f64; 4],
    pub eigen_residual: f64,
    /// PSD and PPT, hence separable for two qubits.
    pub separable: bool,
}

fn sorted_eigenvalues(m: &Matrix4<f64>) -> [f64; 4] {
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    [ev[0], ev[1], ev[2], ev[3]]
}

/// The separable remainder of the φ-step decomposition,
/// `σ = v/(1 − v)·(ρ(θ_i, δφ) − ρ(θ_i, 0)) + 𝟙/2 ⊗ Tr_A ρ(θ_i, δφ)`, with its checks.
pub fn separability_witness(theta_i: f64, delta_phi: f64, v: f64) -> Result<(Matrix4<f64>, SeparabilityReport)> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain {
            what: "v",
            value: v,
            domain: "[0, 1]",
        });
    }
    let moved = schmidt_state(theta_i, delta_phi);
    let rho_b = partial_trace(&moved, Party::Alice);
    let noise = kron2(&(nalgebra::Matrix2::identity() * 0.5), &rho_b.to_matrix());
    let sigma = if v == 1.0 {
        noise
    } else {
        (moved.matrix() - schmidt_state(theta_i, 0.0).matrix()) * (v / (1.0 - v)) + noise
    };
    let eigenvalues = sorted_eigenvalues(&sigma);
    let root = (5.0 + 4.0 * (4.0 * theta_i).cos()).max(0.0).sqrt();
    let mut expected = [0.0, 0.25, (3.0 - root) / 8.0, (3.0 + root) / 8.0];
    expected.sort_by(f64::total_cmp);
    let eigen_residual = eigenvalues
        .iter()
        .zip(&expected)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let pt_residual = (partial_transpose(&sigma, Party::Bob) - sigma).abs().max();
    let separable = eigenvalues[0] >= -1e-12 && pt_residual <= 1e-12;
    let report = SeparabilityReport {
        trace: sigma.trace(),
        pt_residual,
        eigenvalues,
        expected_eigenvalues: expected,
        eigen_residual,
        separable,
    };
    Ok((sigma, report))
}

/// σ as a validated state when it is one.
pub fn witness_state(sigma: &Matrix4<f64>) -> Option<TwoQubitState> {
    TwoQubitState::with_tolerance(*sigma, 1e-10).ok()
}

/// `v(Δφ)·min_j η(θ_i, φ_j)`: a bound valid for every φ within `Δφ` of the grid.
pub fn eta_grid_min(grid_values: &[f64], delta_phi: f64) -> Result<f64> {
    let min = grid_values.iter().copied().fold(f64::INFINITY, f64::min);
    if grid_values.is_empty() {
        return Err(Error::Dimension("empty φ grid".into()));
    }
    Ok(v_phi_step(delta_phi)? * min)
}

/// Propagates a φ-uniform bound at `θ_i` to `θ ≤ θ_i`.
pub fn eta_global(theta: f64, theta_i: f64, eta_of_theta_i: f64) -> Result<f64> {
    eta_theta_step(theta, theta_i, eta_of_theta_i)
}

/// The `θ < θ_i` at which [`eta_global`] falls to `target`:
/// `tan θ = tan θ_i·(1 + η)/(η·(1/target + 1))`. `None` when `η ≤ target`.
pub fn next_theta(theta_i: f64, eta_of_theta_i: f64, target: f64) -> Result<Option<f64>> {
    check_angle("theta_i", theta_i)?;
    if !(target > 0.0) {
        return Err(Error::Domain {
            what: "target",
            value: target,
            domain: "(0, 1]",
        });
    }
    let eta = eta_of_theta_i;
    if eta <= target {
        return Ok(None);
    }
    let t = theta_i.tan() * (1.0 + eta) / (eta * (1.0 / target + 1.0));
    Ok(Some(t.atan()))
}
