//! End-to-end acceptance gate: one PASS/FAIL line per criterion.

mod common;

use std::f64::consts::{FRAC_PI_4, PI};
use std::time::{Duration, Instant};

use nalgebra::{Matrix2, Matrix4, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trinelhv::analytic::{chsh_seesaw, horodecki_chsh, small_theta_bound, theta_star};
use trinelhv::bell::BellFunctional;
use trinelhv::bloch::{bob_finite_set, schmidt_state, trine_povm, zeta, Scenario, TwoQubitState};
use trinelhv::glue::{eta_theta_step, separability_witness, v_phi_step};
use trinelhv::innn22::{compat_certificate, seesaw, SeesawOptions, SeesawOutcome};
use trinelhv::jointmeas::{hollow_triangle_check, jm_threshold, lossy_set, parent_lossy, trine_subset};
use trinelhv::lhvlp::{eta_bar, max_eta_lp_with, ShrinkFactors};
use trinelhv::simpoly::{facets, rank_one_ternary, shrink_eta_from_facets, shrink_factor, vertex_set, ShrinkOptions};
use trinelhv::steer::{assemblage, complex_assemblage, ghjw_reconstruct, realify, steering_functional, C64};
use trinelhv::sweep::{certify_full_range, CertifyOptions};

struct Outcome {
    ok: bool,
    detail: String,
}

fn check(ok: bool, detail: String) -> Outcome {
    Outcome { ok, detail }
}

fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    o.detail = format!("{}; {:.1} s", o.detail, took.as_secs_f64());
    o.ok &= took <= limit;
    o
}

fn jm_thresholds() -> Outcome {
    let pair = jm_threshold(trine_subset(&[0, 1]), 0.5, 1.0, 1e-5).unwrap();
    let triple = jm_threshold(trine_subset(&[0, 1, 2]), 0.5, 1.0, 1e-5).unwrap();
    let hollow = hollow_triangle_check(0.67).unwrap();
    let ok = (pair.value - 0.73205).abs() <= 1e-3 && (triple.value - 0.66667).abs() <= 1e-3 && hollow.is_hollow;
    check(
        ok,
        format!(
            "pair {:.6}, triple {:.6}, hollow at 0.67: {}",
            pair.value, triple.value, hollow.is_hollow
        ),
    )
}

fn analytic_branch() -> Outcome {
    let ts = theta_star(0.67).unwrap();
    let min_bound = (0..200)
        .map(|k| small_theta_bound(ts * k as f64 / 199.0).unwrap())
        .fold(f64::INFINITY, f64::min);
    let state = schmidt_state(FRAC_PI_4, 0.0);
    let h = horodecki_chsh(&state).value;
    let s = chsh_seesaw(&state, 1.0, 8).unwrap().value;
    let ok = (ts - 0.22798).abs() <= 1e-4
        && min_bound >= 0.67
        && (h - 2.0 * 2f64.sqrt()).abs() <= 1e-9
        && (h - s).abs() <= 1e-6;
    check(
        ok,
        format!("θ* {ts:.6}, min bound {min_bound:.6}, Horodecki {h:.9}, see-saw {s:.9}"),
    )
}

fn shrink_factors() -> Outcome {
    let vs = vertex_set();
    let fs = facets(&vs).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for (alpha, want) in [(0.0, 0.9268), (5.0 / 6.0, 0.8900)] {
        let z = zeta(alpha).unwrap();
        let r = shrink_factor(&z, &vs, &ShrinkOptions::default()).unwrap();
        let via_facets = shrink_eta_from_facets(&r.worst, &z, &fs).unwrap();
        ok &= (r.eta_b - want).abs() <= 2e-3 && (via_facets - r.eta_b).abs() <= 1e-3;
        parts.push(format!("α={alpha:.4}: LP {:.6}, facets {via_facets:.6}", r.eta_b));
    }
    check(ok, parts.join(", "))
}

fn lp_spot_value() -> Outcome {
    let e = eta_bar(FRAC_PI_4, 0.1192, &ShrinkFactors::published()).unwrap();
    check(
        (e.value - 0.6808).abs() <= 2e-3,
        format!("η̄ = {:.6} (α = {})", e.value, e.alpha),
    )
}

fn full_certificate() -> Outcome {
    let cert = certify_full_range(&CertifyOptions::default()).unwrap();
    let lowest = cert.lowest_chain_theta();
    let ok = cert.passed()
        && cert.chains.len() == 2
        && cert.chains.iter().all(|c| !c.points.is_empty())
        && cert.analytic.iter().all(|s| s.eta >= 0.67)
        && lowest.is_some_and(|t| t <= cert.theta_star);
    let lens: Vec<_> = cert.chains.iter().map(|c| c.points.len()).collect();
    check(
        ok,
        format!(
            "verdict {:?}, chain lengths {lens:?}, lowest chain θ {lowest:?}, θ* {:.6}",
            cert.verdict, cert.theta_star
        ),
    )
}

fn glue_formulas() -> Outcome {
    let v = v_phi_step(0.1f64.to_radians()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut eig, mut pt) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let theta_i = rng.random_range(0.01..FRAC_PI_4);
        let d = rng.random_range(1e-4..0.2);
        let (_, r) = separability_witness(theta_i, d, v_phi_step(d).unwrap()).unwrap();
        eig = eig.max(r.eigen_residual);
        pt = pt.max(r.pt_residual);
    }
    let mut monotone = true;
    for _ in 0..1000 {
        let theta_i = rng.random_range(0.2..FRAC_PI_4);
        let theta = theta_i * rng.random_range(0.6..0.999);
        let eta = rng.random_range(0.5..0.999);
        monotone &= eta_theta_step(theta, theta_i, eta + 1e-3).unwrap() > eta_theta_step(theta, theta_i, eta).unwrap();
    }
    let ok = (v - 0.993067).abs() <= 1e-6 && eig <= 1e-10 && pt <= 1e-12 && monotone;
    check(
        ok,
        format!("v(0.1°) {v:.6}, eigen residual {eig:.1e}, PT residual {pt:.1e}, monotone {monotone}"),
    )
}

fn lp_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let state = common::random_pure(&mut rng);
        let (alice, bob) = common::random_settings(&mut rng);
        let reduced = max_eta_lp_with(&state, &alice, &bob).unwrap().eta;
        worst = worst.max((reduced - common::full_enumeration_eta(&state, &alice, &bob)).abs());
    }
    check(worst <= 1e-9, format!("max |Δη| = {worst:.2e}"))
}

fn ghjw() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let bob = bob_finite_set();
    let (mut worst, mut cases) = (0.0f64, 0);
    while cases < 100 {
        let a = Vector4::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let b = Vector4::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let state = TwoQubitState::from_pure(&(a / a.norm()))
            .mix(&TwoQubitState::from_pure(&(b / b.norm())), rng.random_range(0.0..1.0))
            .unwrap();
        let mut meas = bob.clone();
        let angles = [
            rng.random_range(0.0..2.0 * PI),
            rng.random_range(0.0..2.0 * PI),
            rng.random_range(0.0..2.0 * PI),
        ];
        meas.extend(rank_one_ternary(angles));
        let asm = assemblage(&state, &meas).unwrap();
        let (l0, l1) = asm.reduced().eigenvalues();
        if l0.min(l1) < 1e-3 {
            continue;
        }
        let rec = ghjw_reconstruct(&asm).unwrap();
        worst = worst.max(assemblage(&rec.state, &rec.bob).unwrap().max_abs_diff(&asm));
        cases += 1;
    }

    let trine = trine_povm(1.0).unwrap();
    let c = BellFunctional::from_fn(Scenario::new(vec![2; 3], vec![2, 2]), |a, b, x, y| {
        ((a + 2 * b + 3 * x + 5 * y) % 7) as f64 - 3.0
    });
    let f = steering_functional(&c, &trine).unwrap();
    let mut beta = 0.0f64;
    for _ in 0..20 {
        let psi = Vector4::from_fn(|_, _| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        let psi = psi / C64::new(psi.norm(), 0.0);
        let rho: Matrix4<C64> = (psi * psi.adjoint()).map(|z| C64::new(z.re, 0.0));
        let ph: f64 = rng.random_range(0.0..2.0 * PI);
        let u = nalgebra::Vector2::new(C64::new(ph.cos(), 0.0), C64::new(0.0, ph.sin()));
        let p0: Matrix2<C64> = u * u.adjoint();
        let meas = vec![
            vec![p0, Matrix2::identity() - p0],
            vec![Matrix2::identity() * C64::new(0.5, 0.0); 2],
        ];
        let casm = complex_assemblage(&rho, &meas).unwrap();
        let rasm = realify(&casm).unwrap();
        beta = beta.max((f.evaluate_complex(&casm).unwrap() - f.evaluate(&rasm).unwrap()).abs());
    }
    check(
        worst <= 1e-10 && beta <= 1e-12,
        format!("roundtrip residual {worst:.1e} over {cases} cases, β drift {beta:.1e}"),
    )
}

fn lossy_family() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut marginal = 0.0f64;
    for n in 2..=5 {
        for d in [2, n] {
            let base: Vec<_> = (0..n)
                .map(|_| {
                    let v = nalgebra::DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
                    trinelhv::innn22::DenseOperator::projector(&(&v / v.norm()))
                })
                .collect();
            let parent = parent_lossy(&base).unwrap();
            let c = parent
                .check(&lossy_set(&base, 1.0 / n as f64).unwrap().measurements(), 1e-12)
                .unwrap();
            if !c.all_psd {
                marginal = f64::INFINITY;
            }
            marginal = marginal.max(c.marginal_residual).max(c.completeness_residual);
        }
    }
    let out = seesaw(&SeesawOptions::new(3)).unwrap();
    let w = out.witness();
    let compat = compat_certificate(&w.alice, w.eta).unwrap().passed;
    let found = matches!(out, SeesawOutcome::Found(_));
    let ok = marginal <= 1e-12 && found && compat;
    check(
        ok,
        format!(
            "parent residual {marginal:.1e}; I_3322 at η=1/2: {} value {:.6}, bound {}, margin {:.6}, dimension {}, restart {}; compat {compat}",
            if found { "FOUND" } else { "NOT-FOUND" },
            w.value,
            w.local_bound,
            w.margin(),
            w.dim,
            w.restart
        ),
    )
}

type Criterion = (&'static str, Box<dyn FnOnce() -> Outcome>);

#[test]
fn acceptance() {
    let criteria: Vec<Criterion> = vec![
        (
            "1 joint-measurability thresholds",
            Box::new(|| timed(Duration::from_secs(30), jm_thresholds)),
        ),
        ("2 analytic branch", Box::new(analytic_branch)),
        (
            "3 shrink factors",
            Box::new(|| timed(Duration::from_secs(30 * 60), shrink_factors)),
        ),
        (
            "4 LP spot value",
            Box::new(|| timed(Duration::from_secs(10), lp_spot_value)),
        ),
        (
            "5 full certificate",
            Box::new(|| timed(Duration::from_secs(2 * 3600), full_certificate)),
        ),
        ("6 glue formulas", Box::new(glue_formulas)),
        ("7 LP oracle equivalence", Box::new(lp_oracle)),
        ("8 GHJW roundtrip", Box::new(ghjw)),
        ("9 lossy measurements and I_NN22", Box::new(lossy_family)),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        let o = run();
        println!("{} criterion {name}: {}", if o.ok { "PASS" } else { "FAIL" }, o.detail);
        if !o.ok {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
