use std::f64::consts::FRAC_PI_4;
use std::fs::File;
use std::io::BufWriter;

use serde::Serialize;

use trinelhv::analytic::{chsh_seesaw, horodecki_chsh, small_theta_bound, v_star};
use trinelhv::bloch::{bob_finite_set, pauli_pair, schmidt_state, trine_povm, zeta};
use trinelhv::innn22::{compat_certificate, seesaw, write_witness_csv, SeesawOptions, SeesawOutcome};
use trinelhv::jointmeas::{hollow_triangle_check, jm_feasible, jm_threshold, trine_subset};
use trinelhv::lhvlp::{eta_branch, NoiseBranch, ShrinkFactors};
use trinelhv::simpoly::{
    decompose_trine, facets, shrink_eta_from_facets, shrink_factor, vertex_set, Pauli, Response, ShrinkOptions,
};
use trinelhv::steer::{assemblage, ghjw_reconstruct};
use trinelhv::sweep::{
    certify_full_range, emit_fig2, fig2_rows, run_chain, run_chain_resumable, Certificate, CertifyOptions, Chain,
    ChainOptions, ChainRow, ChainStop, Verdict,
};

use crate::output::{sig6, Sink};
use crate::{
    BranchArgs, CertifyArgs, ChainArgs, ChshArgs, CliError, EtabArgs, Fig2Args, GridArgs, Innn22Args, JmArgs, LpArgs,
    SimulateArgs, Status, SteerArgs,
};

#[derive(Serialize)]
struct JmRow {
    family: &'static str,
    settings: String,
    eta: f64,
    compatible: bool,
    robustness: f64,
}

#[derive(Serialize)]
struct ThresholdRow {
    family: &'static str,
    settings: String,
    threshold: f64,
    compatible_at: f64,
    incompatible_at: f64,
}

fn labels(s: &[usize]) -> String {
    s.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn jm(a: &JmArgs, sink: &Sink) -> Result<Status, CliError> {
    let family = if a.pauli { "pauli" } else { "trine" };
    if a.threshold {
        let subsets: Vec<Vec<usize>> = if a.pauli {
            vec![vec![0, 1]]
        } else {
            vec![vec![0, 1], vec![0, 1, 2]]
        };
        let mut rows = Vec::new();
        for s in &subsets {
            let t = if a.pauli {
                jm_threshold(pauli_pair, 0.0, 1.0, a.tol)?
            } else {
                jm_threshold(trine_subset(s), 0.0, 1.0, a.tol)?
            };
            println!(
                "{family} {{{}}}: threshold {} (compatible at {}, incompatible at {})",
                labels(s),
                sig6(t.value),
                sig6(t.compatible_at),
                sig6(t.incompatible_at)
            );
            rows.push(ThresholdRow {
                family,
                settings: labels(s),
                threshold: t.value,
                compatible_at: t.compatible_at,
                incompatible_at: t.incompatible_at,
            });
        }
        sink.save(&rows)?;
        return Ok(Status::Success);
    }
    let mut rows = Vec::new();
    if a.pauli {
        let o = jm_feasible(&pauli_pair(a.eta)?)?;
        println!(
            "pauli {{0 1}} at η = {}: compatible {}, robustness {}",
            sig6(a.eta),
            yes_no(o.is_compatible()),
            sig6(o.robustness())
        );
        rows.push(JmRow {
            family,
            settings: "0 1".into(),
            eta: a.eta,
            compatible: o.is_compatible(),
            robustness: o.robustness(),
        });
    } else {
        let r = hollow_triangle_check(a.eta)?;
        println!("trine at η = {}", sig6(a.eta));
        for p in &r.pairs {
            println!(
                "  pair {{{} {}}}: compatible {}, robustness {}",
                p.settings.0,
                p.settings.1,
                yes_no(p.compatible),
                sig6(p.robustness)
            );
            rows.push(JmRow {
                family,
                settings: labels(&[p.settings.0, p.settings.1]),
                eta: a.eta,
                compatible: p.compatible,
                robustness: p.robustness,
            });
        }
        println!(
            "  triple {{0 1 2}}: compatible {}, robustness {}",
            yes_no(r.triple_compatible),
            sig6(r.triple_robustness)
        );
        println!("hollow triangle: {}", yes_no(r.is_hollow));
        rows.push(JmRow {
            family,
            settings: "0 1 2".into(),
            eta: a.eta,
            compatible: r.triple_compatible,
            robustness: r.triple_robustness,
        });
    }
    sink.save(&rows)?;
    Ok(Status::Success)
}

#[derive(Serialize)]
struct SimRow {
    setting: usize,
    x_weight: f64,
    z_weight: f64,
    coin: f64,
}

pub fn simulate(a: &SimulateArgs, sink: &Sink) -> Result<Status, CliError> {
    let Some(s) = decompose_trine(a.eta)? else {
        println!(
            "η = {}: no Pauli simulation (the threshold is √3 − 1 ≈ {})",
            sig6(a.eta),
            sig6(3f64.sqrt() - 1.0)
        );
        return Ok(Status::Fail);
    };
    let residual = s
        .reconstruct()
        .iter()
        .zip(trine_povm(a.eta)?)
        .map(|(r, t)| r.max_abs_diff(&t))
        .fold(0.0, f64::max);
    let mut rows = Vec::new();
    for (x, st) in s.settings.iter().enumerate() {
        let mut w = [0.0; 2];
        for &(p, r, q) in &st.branches {
            let sign = if r == Response::Keep { 1.0 } else { -1.0 };
            w[if p == Pauli::X { 0 } else { 1 }] = sign * q;
        }
        println!(
            "setting {x}: X {}, Z {}, coin {}",
            sig6(w[0]),
            sig6(w[1]),
            sig6(st.coin)
        );
        rows.push(SimRow {
            setting: x,
            x_weight: w[0],
            z_weight: w[1],
            coin: st.coin,
        });
    }
    println!("reconstruction residual {}", sig6(residual));
    println!("(signed weights: negative means the Pauli outcome is flipped)");
    sink.save(&rows)?;
    Ok(Status::Success)
}

#[derive(Serialize)]
struct EtabRow {
    alpha: f64,
    eta_b: f64,
    family: String,
    angles: String,
    grid_minimum: f64,
    converged: bool,
    facet_eta_b: Option<f64>,
}

pub fn etab(a: &EtabArgs, sink: &Sink) -> Result<Status, CliError> {
    let z = zeta(a.alpha)?;
    let vs = vertex_set();
    let opts = ShrinkOptions {
        ternary_step_deg: a.ternary_step,
        binary_step_deg: a.binary_step,
        ..ShrinkOptions::default()
    };
    let r = shrink_factor(&z, &vs, &opts)?;
    let angles: Vec<String> = r.angles.iter().map(|t| sig6(t.to_degrees())).collect();
    println!("α = {}: η_B = {}", sig6(a.alpha), sig6(r.eta_b));
    println!("  worst measurement: {:?} at [{}] degrees", r.family, angles.join(", "));
    println!(
        "  grid minimum {}, {} evaluations, converged {}",
        sig6(r.grid_minimum),
        r.evaluations,
        yes_no(r.converged)
    );
    let facet = if a.facets {
        let f = shrink_eta_from_facets(&r.worst, &z, &facets(&vs)?)?;
        println!("  facet route {}", sig6(f));
        Some(f)
    } else {
        None
    };
    sink.save(&[EtabRow {
        alpha: a.alpha,
        eta_b: r.eta_b,
        family: format!("{:?}", r.family).to_lowercase(),
        angles: r.angles.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(" "),
        grid_minimum: r.grid_minimum,
        converged: r.converged,
        facet_eta_b: facet,
    }])?;
    Ok(Status::Success)
}

fn check_theta(theta: f64) -> Result<(), CliError> {
    if (0.0..=FRAC_PI_4).contains(&theta) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--theta {theta} is outside [0, π/4]")))
    }
}

fn branches(b: &BranchArgs) -> Result<Vec<NoiseBranch>, CliError> {
    let published = ShrinkFactors::published().branches;
    match (b.alpha, b.eta_b) {
        (None, _) => Ok(published),
        (Some(alpha), Some(eta_b)) => Ok(vec![NoiseBranch { alpha, eta_b }]),
        (Some(alpha), None) => published
            .into_iter()
            .find(|p| (p.alpha - alpha).abs() < 1e-9)
            .map(|p| vec![p])
            .ok_or_else(|| CliError::Usage(format!("no published shrink factor for α = {alpha}; pass --eta-b"))),
    }
}

#[derive(Serialize)]
struct LpRow {
    theta: f64,
    phi: f64,
    alpha: f64,
    eta_b: f64,
    eta: f64,
}

pub fn lp(a: &LpArgs, sink: &Sink) -> Result<Status, CliError> {
    check_theta(a.theta)?;
    let mut rows = Vec::new();
    for b in branches(&a.branch)? {
        let eta = eta_branch(a.theta, a.phi, &b)?;
        println!("α = {}, η_B = {}: η = {}", sig6(b.alpha), sig6(b.eta_b), sig6(eta));
        rows.push(LpRow {
            theta: a.theta,
            phi: a.phi,
            alpha: b.alpha,
            eta_b: b.eta_b,
            eta,
        });
    }
    if rows.len() > 1 {
        let best = rows.iter().map(|r| r.eta).fold(f64::NEG_INFINITY, f64::max);
        println!("η̄ = {}", sig6(best));
    }
    sink.save(&rows)?;
    Ok(Status::Success)
}

fn chain_options(branch: NoiseBranch, theta0: f64, g: &GridArgs) -> ChainOptions {
    ChainOptions {
        epsilon: g.epsilon,
        delta_phi: g.delta_phi.to_radians(),
        phi_max: g.phi_max.to_radians(),
        target: g.target,
        half_step: g.half_step,
        ..ChainOptions::new(branch, theta0)
    }
}

fn describe_stop(stop: &ChainStop) -> String {
    match stop {
        ChainStop::Converged => "converged".into(),
        ChainStop::ReachedFloor => "reached the floor angle".into(),
        ChainStop::MaxPoints => "point limit".into(),
        ChainStop::GridMinBelowTarget { theta, eta } => {
            format!(
                "grid bound {} at θ = {} is not above the target",
                sig6(*eta),
                sig6(*theta)
            )
        }
        ChainStop::LpBelowTarget { theta, phi, eta } => {
            format!("LP gives {} at θ = {}, φ = {}", sig6(*eta), sig6(*theta), sig6(*phi))
        }
        ChainStop::SolverFailure { theta, phi, message } => {
            format!("solver failure at θ = {}, φ = {}: {message}", sig6(*theta), sig6(*phi))
        }
    }
}

fn chain_summary(c: &Chain) -> String {
    let range = match c.covered {
        Some((lo, hi)) => format!("[{}, {}]", sig6(lo), sig6(hi)),
        None => "nothing".into(),
    };
    format!(
        "α = {}: {} points, covers {range}, stop: {}",
        sig6(c.alpha),
        c.points.len(),
        describe_stop(&c.stop)
    )
}

fn chain_rows(c: &Chain) -> Vec<ChainRow> {
    c.points
        .iter()
        .enumerate()
        .map(|(i, p)| ChainRow {
            i,
            theta_i: p.theta_i,
            eta: p.eta,
            phi_min: p.phi_min,
        })
        .collect()
}

pub fn chain(a: &ChainArgs, sink: &Sink) -> Result<Status, CliError> {
    let branch = branches(&BranchArgs {
        alpha: Some(a.alpha),
        eta_b: a.eta_b,
    })?[0];
    let mut opts = chain_options(branch, a.theta0.unwrap_or(FRAC_PI_4), &a.grid);
    opts.theta_floor = a.floor;
    opts.max_points = a.max_points;
    let c = match &a.resume {
        Some(path) => run_chain_resumable(&opts, path)?,
        None => run_chain(&opts)?,
    };
    println!("{:>5} {:>10} {:>10} {:>10}", "i", "theta_i", "eta", "phi_min");
    for r in chain_rows(&c) {
        println!(
            "{:>5} {:>10} {:>10} {:>10}",
            r.i,
            sig6(r.theta_i),
            sig6(r.eta),
            sig6(r.phi_min)
        );
    }
    println!("{}", chain_summary(&c));
    sink.save(&chain_rows(&c))?;
    Ok(match c.stop {
        ChainStop::Converged | ChainStop::ReachedFloor | ChainStop::MaxPoints => Status::Success,
        _ => Status::Fail,
    })
}

fn certify_with(a: &CertifyArgs) -> Result<Certificate, CliError> {
    let opts = CertifyOptions {
        target: a.grid.target,
        epsilon: a.grid.epsilon,
        delta_phi: a.grid.delta_phi.to_radians(),
        phi_max: a.grid.phi_max.to_radians(),
        analytic_samples: a.samples,
        half_step: a.grid.half_step,
        ..CertifyOptions::default()
    };
    let cert = certify_full_range(&opts)?;
    if cert.analytic.is_empty() {
        println!("analytic branch: none at target {}", sig6(cert.target));
    } else {
        println!(
            "analytic branch: [0, {}] (θ*), {} samples",
            sig6(cert.theta_star),
            cert.analytic.len()
        );
    }
    for c in &cert.chains {
        println!("{}", chain_summary(c));
    }
    match &cert.verdict {
        Verdict::Pass => println!("PASS: η ≥ {} certified for every θ in [0, π/4]", sig6(cert.target)),
        Verdict::Fail { gaps } => {
            let g: Vec<String> = gaps
                .iter()
                .map(|(lo, hi)| format!("[{}, {}]", sig6(*lo), sig6(*hi)))
                .collect();
            println!("FAIL: uncovered {}", g.join(", "));
        }
    }
    Ok(cert)
}

fn verdict_status(cert: &Certificate) -> Status {
    if cert.passed() {
        Status::Success
    } else {
        Status::Fail
    }
}

pub fn certify(a: &CertifyArgs, sink: &Sink) -> Result<Status, CliError> {
    let cert = certify_with(a)?;
    sink.save(&fig2_rows(&cert))?;
    Ok(verdict_status(&cert))
}

pub fn fig2(a: &Fig2Args, sink: &Sink) -> Result<Status, CliError> {
    let cert = certify_with(&a.certify)?;
    emit_fig2(&cert, &a.stem)?;
    println!(
        "wrote {} and {}",
        a.stem.with_extension("csv").display(),
        a.stem.with_extension("svg").display()
    );
    sink.save(&fig2_rows(&cert))?;
    Ok(verdict_status(&cert))
}

#[derive(Serialize)]
struct ChshRow {
    theta: f64,
    phi: f64,
    visibility: f64,
    horodecki: f64,
    seesaw: f64,
    v_star: f64,
    small_theta_bound: f64,
}

pub fn chsh(a: &ChshArgs, sink: &Sink) -> Result<Status, CliError> {
    check_theta(a.theta)?;
    if !(0.0..=1.0).contains(&a.visibility) {
        return Err(CliError::Usage(format!(
            "--visibility {} is outside [0, 1]",
            a.visibility
        )));
    }
    let state = schmidt_state(a.theta, a.phi);
    let h = horodecki_chsh(&state).value * a.visibility;
    let s = chsh_seesaw(&state, a.visibility, a.restarts.max(1))?.value;
    let bound = small_theta_bound(a.theta)?;
    println!("Horodecki {}", sig6(h));
    println!("see-saw   {}", sig6(s));
    println!("v*(θ) {}, trine bound {}", sig6(v_star(a.theta)), sig6(bound));
    sink.save(&[ChshRow {
        theta: a.theta,
        phi: a.phi,
        visibility: a.visibility,
        horodecki: h,
        seesaw: s,
        v_star: v_star(a.theta),
        small_theta_bound: bound,
    }])?;
    Ok(Status::Success)
}

#[derive(Serialize)]
struct SteerRow {
    theta: f64,
    phi: f64,
    recovered_theta: f64,
    recovered_phi: f64,
    residual: f64,
    no_signalling_residual: f64,
}

pub fn steer_roundtrip(a: &SteerArgs, sink: &Sink) -> Result<Status, CliError> {
    check_theta(a.theta)?;
    let asm = assemblage(&schmidt_state(a.theta, a.phi), &bob_finite_set())?;
    let rec = ghjw_reconstruct(&asm)?;
    let residual = assemblage(&rec.state, &rec.bob)?.max_abs_diff(&asm);
    let ns = asm.no_signalling_residual();
    println!("recovered θ = {}, φ = {}", sig6(rec.theta), sig6(rec.phi));
    println!(
        "roundtrip residual {}, no-signalling residual {}",
        sig6(residual),
        sig6(ns)
    );
    let ok = residual <= 1e-10 && ns <= 1e-10;
    println!("{}", if ok { "PASS" } else { "FAIL" });
    sink.save(&[SteerRow {
        theta: a.theta,
        phi: a.phi,
        recovered_theta: rec.theta,
        recovered_phi: rec.phi,
        residual,
        no_signalling_residual: ns,
    }])?;
    Ok(if ok { Status::Success } else { Status::Fail })
}

#[derive(Serialize)]
struct Innn22Row {
    n: usize,
    eta: f64,
    dim: usize,
    seed: u64,
    restart: usize,
    value: f64,
    local_bound: f64,
    margin: f64,
    found: bool,
    compatible: Option<bool>,
}

pub fn innn22(a: &Innn22Args, sink: &Sink) -> Result<Status, CliError> {
    if a.n < 2 {
        return Err(CliError::Usage("--n must be at least 2".into()));
    }
    let base = SeesawOptions::new(a.n);
    let opts = SeesawOptions {
        eta: a.eta.unwrap_or(base.eta),
        dim: a.dim.unwrap_or(a.n),
        restarts: a.restarts,
        seed: a.seed,
        ..base
    };
    let out = seesaw(&opts)?;
    let w = out.witness();
    let found = matches!(out, SeesawOutcome::Found(_));
    println!(
        "I_{n}{n}22 at η = {}, dimension {}, seed {}",
        sig6(w.eta),
        w.dim,
        w.seed,
        n = a.n
    );
    println!(
        "{}: value {}, local bound {}, margin {} (restart {})",
        if found { "FOUND" } else { "NOT-FOUND" },
        sig6(w.value),
        sig6(w.local_bound),
        sig6(w.margin()),
        w.restart
    );
    let compatible = if a.n >= 3 && (w.eta - 1.0 / (a.n - 1) as f64).abs() <= 1e-12 {
        let r = compat_certificate(&w.alice, w.eta)?;
        println!(
            "every {}-subset of Alice's measurements jointly measurable: {}",
            a.n - 1,
            yes_no(r.passed)
        );
        Some(r.passed)
    } else {
        None
    };
    if let Some(path) = &a.witness {
        let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        write_witness_csv(w, BufWriter::new(file))?;
    }
    sink.save(&[Innn22Row {
        n: a.n,
        eta: w.eta,
        dim: w.dim,
        seed: w.seed,
        restart: w.restart,
        value: w.value,
        local_bound: w.local_bound,
        margin: w.margin(),
        found,
        compatible,
    }])?;
    Ok(if found && compatible != Some(false) {
        Status::Success
    } else {
        Status::Fail
    })
}
