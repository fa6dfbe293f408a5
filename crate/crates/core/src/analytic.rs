//! Closed-form small-angle branch: maximal CHSH values, the Pauli visibility that
//! keeps CHSH unviolated, and the angle below which the noisy trine is simulable
//! by those Pauli measurements.

use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::{Matrix2, Matrix3, Matrix4};
use serde::Serialize;

use crate::bloch::{kron2, BipartiteOperator, TwoQubitState};
use crate::error::{check_range, Error, Result};

/// Pairwise incompatibility threshold of the trine, `√3 − 1`.
pub fn eta_pairwise() -> f64 {
    3f64.sqrt() - 1.0
}

/// Triplewise incompatibility threshold of the trine.
pub const ETA_TRIPLEWISE: f64 = 2.0 / 3.0;

/// Working visibility of the trine: inside the hollow-triangle window.
pub const ETA_STAR: f64 = 0.67;

/// `T_ij = Tr(ρ σ_i ⊗ σ_j)` for `i, j ∈ {X, Y, Z}`.
///
/// For a real matrix every entry mixing `Y` with `X` or `Z` vanishes and
/// `Y ⊗ Y = −J ⊗ J` with the real antisymmetric `J = iY`.
pub fn correlation_matrix(state: &impl BipartiteOperator) -> Matrix3<f64> {
    let m = state.matrix();
    let x = Matrix2::new(0.0, 1.0, 1.0, 0.0);
    let z = Matrix2::new(1.0, 0.0, 0.0, -1.0);
    let j = Matrix2::new(0.0, 1.0, -1.0, 0.0);
    let ev = |k: Matrix4<f64>| (m * k).trace();
    let mut t = Matrix3::zeros();
    t[(0, 0)] = ev(kron2(&x, &x));
    t[(0, 2)] = ev(kron2(&x, &z));
    t[(2, 0)] = ev(kron2(&z, &x));
    t[(2, 2)] = ev(kron2(&z, &z));
    t[(1, 1)] = -ev(kron2(&j, &j));
    t
}

/// Singular values of a 2×2 matrix, descending, in closed form.
pub fn singular_values2(a: f64, b: f64, c: f64, d: f64) -> (f64, f64) {
    let plus = (a + d).hypot(c - b);
    let minus = (a - d).hypot(c + b);
    (0.5 * (plus + minus), 0.5 * (plus - minus).abs())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChshReport {
    pub value: f64,
    /// The two largest singular values of the correlation matrix, descending.
    pub singular_values: (f64, f64),
}

/// Maximal CHSH value `2√(s₁² + s₂²)` over all projective measurements.
pub fn horodecki_chsh(state: &TwoQubitState) -> ChshReport {
    // Real states decouple Y from X and Z: T is a 2×2 block plus T_YY.
    let t = correlation_matrix(state);
    let (p, q) = singular_values2(t[(0, 0)], t[(0, 2)], t[(2, 0)], t[(2, 2)]);
    let y = t[(1, 1)].abs();
    let mut all = [p, q, y];
    all.sort_by(|a, b| b.total_cmp(a));
    let (s1, s2) = (all[0], all[1]);
    ChshReport {
        value: 2.0 * (s1 * s1 + s2 * s2).sqrt(),
        singular_values: (s1, s2),
    }
}

/// `v·(cos(angle)·X + sin(angle)·Z)`.
fn observable(angle: f64, visibility: f64) -> Matrix2<f64> {
    let (s, c) = angle.sin_cos();
    Matrix2::new(s, c, c, -s) * visibility
}

/// Bloch angle of the sign of a real symmetric 2×2 operator.
fn sign_angle(k: &Matrix2<f64>) -> f64 {
    let z = 0.5 * (k[(0, 0)] - k[(1, 1)]);
    let x = k[(0, 1)];
    z.atan2(x)
}

fn chsh_operator_value(m: &Matrix4<f64>, a: [f64; 2], b: [f64; 2], v: f64) -> f64 {
    let mut total = 0.0;
    for x in 0..2 {
        for y in 0..2 {
            let sign = if x * y == 1 { -1.0 } else { 1.0 };
            total += sign * (m * kron2(&observable(a[x], v), &observable(b[y], 1.0))).trace();
        }
    }
    total
}

/// Reduced operator `Tr_A[(O ⊗ 𝟙)·ρ]`.
fn steer_bob(m: &Matrix4<f64>, o: &Matrix2<f64>) -> Matrix2<f64> {
    let k = kron2(o, &Matrix2::identity()) * m;
    Matrix2::from_fn(|i, j| k[(i, j)] + k[(2 + i, 2 + j)])
}

fn steer_alice(m: &Matrix4<f64>, o: &Matrix2<f64>) -> Matrix2<f64> {
    let k = kron2(&Matrix2::identity(), o) * m;
    Matrix2::from_fn(|i, j| k[(2 * i, 2 * j)] + k[(2 * i + 1, 2 * j + 1)])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeesawChsh {
    pub value: f64,
    pub alice_angles: [f64; 2],
    pub bob_angles: [f64; 2],
}

/// Alternating best responses over real projective observables, Alice's scaled
/// by `visibility`. Starts are spread deterministically over the circle.
pub fn chsh_seesaw(state: &impl BipartiteOperator, visibility: f64, restarts: usize) -> Result<SeesawChsh> {
    check_range("visibility", visibility, 0.0, 1.0, "[0, 1]")?;
    if restarts == 0 {
        return Err(Error::Domain {
            what: "restarts",
            value: 0.0,
            domain: "≥ 1",
        });
    }
    let m = state.matrix();
    let mut best = SeesawChsh {
        value: f64::NEG_INFINITY,
        alice_angles: [0.0; 2],
        bob_angles: [0.0; 2],
    };
    for r in 0..restarts {
        let start = PI * r as f64 / restarts as f64;
        let mut a = [start, start + 0.5 * PI + 0.3];
        let mut b = [0.0; 2];
        let mut value = f64::NEG_INFINITY;
        for _ in 0..500 {
            let (a0, a1) = (observable(a[0], visibility), observable(a[1], visibility));
            b = [
                sign_angle(&steer_bob(m, &(a0 + a1))),
                sign_angle(&steer_bob(m, &(a0 - a1))),
            ];
            let (b0, b1) = (observable(b[0], 1.0), observable(b[1], 1.0));
            a = [
                sign_angle(&steer_alice(m, &(b0 + b1))),
                sign_angle(&steer_alice(m, &(b0 - b1))),
            ];
            let next = chsh_operator_value(m, a, b, visibility);
            let done = (next - value).abs() < 1e-15;
            value = next;
            if done {
                break;
            }
        }
        if value > best.value {
            best = SeesawChsh {
                value,
                alice_angles: a,
                bob_angles: b,
            };
        }
    }
    Ok(best)
}

/// Largest Pauli visibility with no CHSH violation: `1/√(1 + sin²2θ)`.
pub fn v_star(theta: f64) -> f64 {
    1.0 / (1.0 + (2.0 * theta).sin().powi(2)).sqrt()
}

/// Solves `η* = (√3 − 1)/√(1 + sin²2θ)` for `θ ∈ [0, π/4]`.
pub fn theta_star(eta_star: f64) -> Result<f64> {
    let eta2 = eta_pairwise();
    let lo_eta = eta2 / 2f64.sqrt();
    if !(eta_star >= lo_eta - 1e-15 && eta_star <= eta2 + 1e-15) {
        return Err(Error::Domain {
            what: "eta_star",
            value: eta_star,
            domain: "[(√3−1)/√2, √3−1]",
        });
    }
    // small_theta_bound decreases strictly on [0, π/4]; bisect to machine precision.
    let (mut lo, mut hi) = (0.0, FRAC_PI_4);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eta2 * v_star(mid) > eta_star {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.max(1e-300) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Trine visibility certified local via Pauli simulation: `v*(θ)·(√3 − 1)`.
pub fn small_theta_bound(theta: f64) -> Result<f64> {
    check_range("theta", theta, 0.0, FRAC_PI_4, "[0, π/4]")?;
    Ok(v_star(theta) * eta_pairwise())
}

/// CHSH value for observables `cos(a)·X + sin(a)·Z`, Alice's scaled by `visibility`.
pub fn chsh_value(
    state: &impl BipartiteOperator,
    alice_angles: [f64; 2],
    bob_angles: [f64; 2],
    visibility: f64,
) -> f64 {
    chsh_operator_value(state.matrix(), alice_angles, bob_angles, visibility)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::schmidt_state;

    #[test]
    fn chsh_examples() {
        assert!((horodecki_chsh(&schmidt_state(0.0, 0.4)).value - 2.0).abs() < 1e-12);
        assert!((horodecki_chsh(&schmidt_state(FRAC_PI_4, 0.0)).value - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        let a = horodecki_chsh(&schmidt_state(0.3, 1.0)).value;
        let b = horodecki_chsh(&schmidt_state(0.3, 0.0)).value;
        assert!((a - b).abs() < 1e-12);
        assert!((a - 2.0 * (1.0 + 0.6f64.sin().powi(2)).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn closed_form_singular_values_match_nalgebra() {
        for m in [
            Matrix2::new(0.3, -1.2, 0.7, 0.1),
            Matrix2::new(1.0, 0.0, 0.0, -1.0),
            Matrix2::zeros(),
        ] {
            let (s1, s2) = singular_values2(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
            let sv = m.singular_values();
            let (hi, lo) = (sv.max(), sv.min());
            assert!((s1 - hi).abs() < 1e-14 && (s2 - lo).abs() < 1e-14);
        }
    }

    #[test]
    fn seesaw_matches_horodecki() {
        let rho = schmidt_state(FRAC_PI_4, 0.0);
        let s = chsh_seesaw(&rho, 1.0, 8).unwrap();
        assert!((s.value - 2.0 * 2f64.sqrt()).abs() < 1e-9);
        let rho = schmidt_state(0.3, 0.8);
        let s = chsh_seesaw(&rho, 0.9, 8).unwrap();
        assert!((s.value - 0.9 * horodecki_chsh(&rho).value).abs() < 1e-6);
    }

    #[test]
    fn v_star_and_theta_star() {
        assert_eq!(v_star(0.0), 1.0);
        assert!((v_star(FRAC_PI_4) - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        let t = theta_star(ETA_STAR).unwrap();
        assert!((t - 0.2279).abs() < 1e-4);
        assert!((t - 0.227928).abs() < 1e-6);
        assert!((v_star(t) - ETA_STAR / eta_pairwise()).abs() < 1e-12);
        assert!(theta_star(eta_pairwise()).unwrap().abs() < 1e-12);
        assert!(theta_star(0.8).is_err());
        assert!(theta_star(0.5).is_err());
    }

    #[test]
    fn theta_star_literal_constant_form() {
        let literal = 0.5 * (((100.0f64 / 67.0).powi(2) * eta_pairwise().powi(2) - 1.0).sqrt()).asin();
        assert!((theta_star(0.67).unwrap() - literal).abs() < 1e-12);
    }

    #[test]
    fn small_theta_bound_examples() {
        assert!((small_theta_bound(0.0).unwrap() - eta_pairwise()).abs() < 1e-15);
        let t = theta_star(ETA_STAR).unwrap();
        assert!((small_theta_bound(t).unwrap() - ETA_STAR).abs() < 1e-12);
        assert!((small_theta_bound(FRAC_PI_4).unwrap() - eta_pairwise() / 2f64.sqrt()).abs() < 1e-15);
        assert!(small_theta_bound(1.0).is_err());
    }
}
