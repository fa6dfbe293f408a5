//! wasm-bindgen wrappers for the static demo page in `www/`.
//!
//! Every function returns a short plain-text report, so the page only has to
//! drop strings into `<pre>` blocks.

use std::fmt::Write;

use trinelhv::analytic::{horodecki_chsh, small_theta_bound};
use trinelhv::bloch::schmidt_state;
use trinelhv::lhvlp::{eta_bar, ShrinkFactors};
use wasm_bindgen::prelude::*;

fn fail(e: trinelhv::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// Pairwise and triplewise joint measurability of the noisy trine.
pub fn hollow_report(eta: f64) -> Result<String, trinelhv::Error> {
    let r = trinelhv::jointmeas::hollow_triangle_check(eta)?;
    let mut s = String::new();
    for p in &r.pairs {
        let (i, j) = p.settings;
        let _ = writeln!(
            s,
            "pair {{{i} {j}}}: {} (robustness {:.6})",
            if p.compatible { "compatible" } else { "incompatible" },
            p.robustness
        );
    }
    let _ = writeln!(
        s,
        "triple: {} (robustness {:.6})",
        if r.triple_compatible {
            "compatible"
        } else {
            "incompatible"
        },
        r.triple_robustness
    );
    let _ = write!(s, "hollow triangle: {}", if r.is_hollow { "yes" } else { "no" });
    Ok(s)
}

/// Largest visibility with a local model at `(θ, φ)`, all noise branches.
pub fn lp_report(theta: f64, phi: f64) -> Result<String, trinelhv::Error> {
    let e = eta_bar(theta, phi, &ShrinkFactors::published())?;
    let mut s = String::new();
    for (alpha, eta) in &e.per_branch {
        let _ = writeln!(s, "α = {alpha:.4}: η = {eta:.6}");
    }
    let _ = write!(s, "η̄ = {:.6} (α = {:.4})", e.value, e.alpha);
    Ok(s)
}

/// CHSH value of `cos θ|00⟩ + sin θ|11⟩` and the trine visibility that a
/// Pauli simulation keeps local.
pub fn chsh_report(theta: f64) -> Result<String, trinelhv::Error> {
    let bound = small_theta_bound(theta)?;
    let h = horodecki_chsh(&schmidt_state(theta, 0.0));
    Ok(format!(
        "max CHSH = {:.6}\nlocal by Pauli simulation for η ≤ {bound:.6}",
        h.value
    ))
}

#[wasm_bindgen]
pub fn hollow_triangle(eta: f64) -> Result<String, JsError> {
    hollow_report(eta).map_err(fail)
}

#[wasm_bindgen]
pub fn local_visibility(theta: f64, phi: f64) -> Result<String, JsError> {
    lp_report(theta, phi).map_err(fail)
}

#[wasm_bindgen]
pub fn chsh(theta: f64) -> Result<String, JsError> {
    chsh_report(theta).map_err(fail)
}
