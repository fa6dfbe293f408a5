use nalgebra::Vector4;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use trinelhv::bloch::{behavior, BipartiteOperator, QubitPovm, TwoQubitState, Vec2};
use trinelhv::conic::ConicProgram;

/// Largest η with every strategy pair `(λ_A, λ_B)` enumerated on both sides.
pub fn full_enumeration_eta(chi: &impl BipartiteOperator, alice: &[Vec2], bob: &[QubitPovm]) -> f64 {
    let binaries = |eta: f64| alice.iter().map(|&a| QubitPovm::binary(a, eta)).collect::<Vec<_>>();
    let p0 = behavior(chi, &binaries(0.0), bob).unwrap();
    let p1 = behavior(chi, &binaries(1.0), bob).unwrap();
    let (nx, ny) = (alice.len(), bob.len());
    let n_strat = (1usize << nx) * (1usize << ny);
    let mut lp = ConicProgram::new(1 + n_strat);
    lp.maximize(&[(0, 1.0)]);
    for x in 0..nx {
        for y in 0..ny {
            for a in 0..2 {
                for b in 0..2 {
                    let mut terms: Vec<(usize, f64)> = (0..n_strat)
                        .filter(|&k| {
                            let (la, lb) = (k >> ny, k & ((1 << ny) - 1));
                            (la >> x) & 1 == a && (lb >> y) & 1 == b
                        })
                        .map(|k| (1 + k, 1.0))
                        .collect();
                    terms.push((0, -(p1.get(a, b, x, y) - p0.get(a, b, x, y))));
                    lp.eq(&terms, p0.get(a, b, x, y));
                }
            }
        }
    }
    let all: Vec<_> = (1..=n_strat).map(|j| (j, 1.0)).collect();
    lp.eq(&all, 1.0);
    lp.nonneg_range(0..1 + n_strat);
    lp.le(&[(0, 1.0)], 1.0);
    let sol = lp.solve().unwrap();
    assert!(sol.is_optimal(), "{:?}", sol.status);
    sol.x[0]
}

pub fn random_pure(rng: &mut ChaCha8Rng) -> TwoQubitState {
    let v = Vector4::from_fn(|_, _| rng.random_range(-1.0..1.0));
    TwoQubitState::from_pure(&(v / v.norm()))
}

/// Two random binary settings per side for the oracle comparison.
pub fn random_settings(rng: &mut ChaCha8Rng) -> (Vec<Vec2>, Vec<QubitPovm>) {
    let alice = (0..2)
        .map(|_| Vec2::from_angle(rng.random_range(0.0..std::f64::consts::PI)))
        .collect();
    let bob = (0..2)
        .map(|_| QubitPovm::binary(Vec2::from_angle(rng.random_range(0.0..std::f64::consts::PI)), 1.0))
        .collect();
    (alice, bob)
}
