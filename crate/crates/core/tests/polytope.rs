use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trinelhv::bloch::{depolarize, zeta, QubitPovm};
use trinelhv::simpoly::{
    decompose_trine, facets, membership, projective_binary, rank_one_ternary, shrink_eta_for, shrink_eta_from_facets,
    vertex_set, Membership, PERMUTATIONS,
};

fn random_povm(rng: &mut ChaCha8Rng) -> QubitPovm {
    let base = loop {
        if rng.random_bool(0.25) {
            let p = projective_binary(rng.random_range(0.0..PI)).permuted(&PERMUTATIONS[rng.random_range(0..6)]);
            break p;
        }
        let b = [
            rng.random_range(0.0..2.0 * PI),
            rng.random_range(0.0..2.0 * PI),
            rng.random_range(0.0..2.0 * PI),
        ];
        if let Some(p) = rank_one_ternary(b) {
            break p;
        }
    };
    let z = zeta(rng.random_range(0.0..1.0)).unwrap();
    depolarize(&base, rng.random_range(0.6..1.0), &z).unwrap()
}

#[test]
fn membership_agrees_with_facets() {
    let vs = vertex_set();
    let fs = facets(&vs).unwrap();
    assert!(!fs.is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut inside, mut outside) = (0, 0);
    for _ in 0..1000 {
        let p = random_povm(&mut rng);
        let coords = trinelhv::simpoly::coordinates(&p).unwrap();
        let min_slack = fs.iter().map(|f| f.slack(&coords)).fold(f64::INFINITY, f64::min);
        match membership(&p, &vs).unwrap() {
            Membership::Inside { residual, .. } => {
                inside += 1;
                assert!(residual <= 1e-8);
                assert!(min_slack >= -1e-7, "inside but violates a facet by {min_slack}");
            }
            Membership::Outside { certificate, violation } => {
                outside += 1;
                assert!(violation > 0.0);
                assert!(certificate.slack(&coords) < 0.0);
                assert!(
                    min_slack <= 1e-7,
                    "outside but satisfies every facet (min slack {min_slack})"
                );
            }
        }
    }
    assert!(inside > 50 && outside > 50, "inside {inside}, outside {outside}");
}

#[test]
fn lp_and_facet_shrink_agree() {
    let vs = vertex_set();
    let fs = facets(&vs).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for alpha in [0.0, 5.0 / 6.0] {
        let z = zeta(alpha).unwrap();
        for _ in 0..100 {
            let p = random_povm(&mut rng);
            let a = shrink_eta_for(&p, &z, &vs).unwrap();
            let b = shrink_eta_from_facets(&p, &z, &fs).unwrap();
            assert!((a - b).abs() <= 1e-6, "LP {a} vs facets {b}");
        }
    }
}

#[test]
fn trine_threshold_is_sqrt3_minus_1() {
    let (mut lo, mut hi) = (0.5, 1.0);
    assert!(decompose_trine(lo).unwrap().is_some());
    assert!(decompose_trine(hi).unwrap().is_none());
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if decompose_trine(mid).unwrap().is_some() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    assert!((lo - (3f64.sqrt() - 1.0)).abs() <= 1e-6, "{lo}");
}

#[test]
fn trine_strategy_reconstructs() {
    let eta = 0.7;
    let s = decompose_trine(eta).unwrap().unwrap();
    let trine = trinelhv::bloch::trine_povm(eta).unwrap();
    for (rec, want) in s.reconstruct().iter().zip(&trine) {
        assert!(rec.max_abs_diff(want) <= 1e-12);
    }
    for setting in &s.settings {
        assert!((setting.total_probability() - 1.0).abs() <= 1e-12);
    }
}
