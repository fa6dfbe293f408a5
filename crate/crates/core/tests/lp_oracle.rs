mod common;

use std::f64::consts::{FRAC_PI_3, FRAC_PI_4, FRAC_PI_6};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{full_enumeration_eta, random_pure, random_settings};
use trinelhv::bloch::{behavior, schmidt_state, QubitPovm, Vec2};
use trinelhv::lhvlp::{eta_bar, eta_branch, local_check, max_eta_lp_with, LocalCheck, NoiseBranch, ShrinkFactors};

#[test]
fn reduced_lp_matches_full_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut nonlocal = 0;
    for _ in 0..20 {
        let state = random_pure(&mut rng);
        let (alice, bob) = random_settings(&mut rng);
        let reduced = max_eta_lp_with(&state, &alice, &bob).unwrap();
        let full = full_enumeration_eta(&state, &alice, &bob);
        assert!(
            (reduced.eta - full).abs() <= 1e-9,
            "reduced {} vs full {}",
            reduced.eta,
            full
        );
        assert!(reduced.residual <= 1e-8);
        if full < 1.0 - 1e-9 {
            nonlocal += 1;
        }
    }
    // the comparison is only informative if some cases are below one
    assert!(nonlocal > 0);
}

#[test]
fn certified_models_reconstruct_and_pass_local_check() {
    let state = schmidt_state(0.5, 0.2);
    let alice = [Vec2::from_angle(0.0), Vec2::from_angle(1.1)];
    let bob: Vec<QubitPovm> = [0.3, 1.9]
        .iter()
        .map(|&a| QubitPovm::binary(Vec2::from_angle(a), 1.0))
        .collect();
    let sol = max_eta_lp_with(&state, &alice, &bob).unwrap();
    let binaries: Vec<_> = alice.iter().map(|&a| QubitPovm::binary(a, sol.eta)).collect();
    let target = behavior(&state, &binaries, &bob).unwrap();
    assert!(sol.model.residual(&target) <= 1e-8);
    assert!(sol.model.validity_residual() <= 1e-8);
    assert!(matches!(
        local_check(&sol.model.reconstruct()).unwrap(),
        LocalCheck::Local(_)
    ));
}

#[test]
fn eta_is_symmetric_in_phi() {
    let branches = ShrinkFactors::published().branches;
    for (theta, phi) in [(FRAC_PI_4, 0.1192), (0.5, 0.3), (0.3, 0.05)] {
        for b in &branches {
            let base = eta_branch(theta, phi, b).unwrap();
            for other in [phi + FRAC_PI_3, -phi, 2.0 * FRAC_PI_3 - phi, phi + FRAC_PI_6] {
                let e = eta_branch(theta, other, b).unwrap();
                assert!(
                    (e - base).abs() <= 1e-6,
                    "θ={theta} φ={phi}→{other} α={}: {base} vs {e}",
                    b.alpha
                );
            }
        }
    }
}

// Non-increasing in θ holds from θ ≈ 0.3 upward; below that the α = 5/6 branch
// rises again with θ, so the check is confined to [0.3, π/4].
#[test]
fn eta_bar_non_increasing_on_upper_range() {
    let factors = ShrinkFactors::published();
    let thetas: Vec<f64> = (0..=10).map(|k| 0.3 + (FRAC_PI_4 - 0.3) * k as f64 / 10.0).collect();
    let values: Vec<f64> = thetas
        .iter()
        .map(|&t| eta_bar(t, 0.0, &factors).unwrap().value)
        .collect();
    for w in values.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "{values:?}");
    }
}

#[test]
fn eta_branch_not_monotone_below_range() {
    let b = NoiseBranch {
        alpha: 5.0 / 6.0,
        eta_b: 0.89,
    };
    let low = eta_branch(0.22, 0.0, &b).unwrap();
    let mid = eta_branch(0.3, 0.0, &b).unwrap();
    assert!(low < mid);
}
