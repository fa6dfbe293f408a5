//! Simulability geometry: reproducing the noisy trine with the two Pauli
//! measurements, the 81-vertex polytope spanned by Bob's finite measurement set,
//! and the depolarising shrink factor that maps every real three-outcome POVM
//! into that polytope.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::bloch::{bob_finite_set, depolarize, trine_axes, QubitPovm, RealQubitOperator, Vec2};
use crate::conic::ConicProgram;
use crate::error::{check_range, Error, Result};
use crate::hull::{self, Halfspace};

/// Outcome relabellings; new outcome `b` is old outcome `PERMUTATIONS[k][b]`.
pub const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Provenance id of the three one-outcome-certain measurements.
pub const DEGENERATE_BASE: usize = 13;

/// `(t₀, r₀ₓ, r₀_z, t₁, r₁ₓ, r₁_z)`; the third effect follows from completeness.
pub type Coords = [f64; 6];

pub fn coordinates(povm: &QubitPovm) -> Result<Coords> {
    let povm = match povm.arity() {
        2 => povm.embed(3),
        3 => povm.clone(),
        n => return Err(Error::Dimension(format!("expected a 3-outcome POVM, got {n} outcomes"))),
    };
    let (e0, e1) = (povm.element(0), povm.element(1));
    Ok([e0.t, e0.r.x1, e0.r.x3, e1.t, e1.r.x1, e1.r.x3])
}

pub fn povm_from_coords(c: &Coords) -> QubitPovm {
    let e0 = RealQubitOperator::new(c[0], Vec2::new(c[1], c[2]));
    let e1 = RealQubitOperator::new(c[3], Vec2::new(c[4], c[5]));
    let e2 = RealQubitOperator::identity() - e0 - e1;
    QubitPovm::from_elements_unchecked(vec![e0, e1, e2])
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PovmVertex {
    pub coords: Coords,
    /// Index into Bob's finite set, or [`DEGENERATE_BASE`].
    pub base: usize,
    /// Index into [`PERMUTATIONS`]; for degenerate vertices, the certain outcome.
    pub perm: usize,
}

impl PovmVertex {
    pub fn to_povm(&self) -> QubitPovm {
        povm_from_coords(&self.coords)
    }
}

/// All outcome permutations of Bob's 13 measurements plus the three deterministic ones.
pub fn vertex_set() -> Vec<PovmVertex> {
    let mut out = Vec::with_capacity(81);
    for (base, povm) in bob_finite_set().iter().enumerate() {
        for (perm, p) in PERMUTATIONS.iter().enumerate() {
            let coords = coordinates(&povm.permuted(p)).expect("finite set is three-outcome");
            out.push(PovmVertex { coords, base, perm });
        }
    }
    for b in 0..3 {
        let mut coords = [0.0; 6];
        if b < 2 {
            coords[3 * b] = 2.0;
        }
        out.push(PovmVertex {
            coords,
            base: DEGENERATE_BASE,
            perm: b,
        });
    }
    out
}

/// Which Pauli observable a simulation step measures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Pauli {
    X,
    Z,
}

/// How the Pauli outcome becomes the simulated outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Response {
    Keep,
    Flip,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SettingStrategy {
    /// `(observable, response, probability)`.
    pub branches: Vec<(Pauli, Response, f64)>,
    /// Probability of ignoring the system and outputting a fair coin.
    pub coin: f64,
}

impl SettingStrategy {
    /// The simulated binary POVM.
    pub fn reconstruct(&self) -> QubitPovm {
        let mut first = RealQubitOperator::identity() * (0.5 * self.coin);
        for &(pauli, response, q) in &self.branches {
            let axis = match pauli {
                Pauli::X => Vec2::E1,
                Pauli::Z => Vec2::E3,
            };
            let sign = match response {
                Response::Keep => 1.0,
                Response::Flip => -1.0,
            };
            first += RealQubitOperator::new(1.0, axis * sign) * q;
        }
        QubitPovm::from_elements_unchecked(vec![first, RealQubitOperator::identity() - first])
    }

    pub fn total_probability(&self) -> f64 {
        self.coin + self.branches.iter().map(|b| b.2).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimulationStrategy {
    pub eta: f64,
    pub settings: Vec<SettingStrategy>,
}

impl SimulationStrategy {
    pub fn reconstruct(&self) -> Vec<QubitPovm> {
        self.settings.iter().map(SettingStrategy::reconstruct).collect()
    }
}

/// Writes `(𝟙 + r·σ)/2` as a mixture of Pauli outcomes and a fair coin; possible iff
/// `r` lies in the square `|r₁| + |r₃| ≤ 1`.
fn square_mixture(r: Vec2) -> Option<SettingStrategy> {
    const SLACK: f64 = 1e-12;
    let coin = 1.0 - r.x1.abs() - r.x3.abs();
    if coin < -SLACK {
        return None;
    }
    let mut branches = Vec::new();
    for (pauli, c) in [(Pauli::X, r.x1), (Pauli::Z, r.x3)] {
        if c != 0.0 {
            let response = if c > 0.0 { Response::Keep } else { Response::Flip };
            branches.push((pauli, response, c.abs()));
        }
    }
    Some(SettingStrategy {
        branches,
        coin: coin.max(0.0),
    })
}

/// Simulation of the noisy trine by randomly chosen Pauli measurements, or `None`
/// when some trine direction leaves the square.
pub fn decompose_trine(eta: f64) -> Result<Option<SimulationStrategy>> {
    check_range("eta", eta, 0.0, 1.0, "[0, 1]")?;
    let settings: Option<Vec<_>> = trine_axes().iter().map(|&a| square_mixture(a * eta)).collect();
    Ok(settings.map(|settings| SimulationStrategy { eta, settings }))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Membership {
    Inside {
        weights: Vec<f64>,
        residual: f64,
    },
    /// `certificate` holds for every vertex and is violated by the POVM.
    Outside {
        certificate: Halfspace,
        violation: f64,
    },
}

impl Membership {
    pub fn is_inside(&self) -> bool {
        matches!(self, Membership::Inside { .. })
    }
}

fn centroid(vertices: &[PovmVertex]) -> Coords {
    let mut c = [0.0; 6];
    for v in vertices {
        for k in 0..6 {
            c[k] += v.coords[k] / vertices.len() as f64;
        }
    }
    c
}

/// `Σ_v w_v·v − μ·dir = base`, `Σ w = 1`, `w ≥ 0`; maximise `μ ≤ cap`.
fn ray_program(vertices: &[PovmVertex], base: &Coords, dir: &Coords, cap: f64) -> ConicProgram {
    let n = vertices.len();
    let mut lp = ConicProgram::new(n + 1);
    lp.maximize(&[(n, 1.0)]);
    for k in 0..6 {
        let mut terms: Vec<_> = vertices.iter().enumerate().map(|(j, v)| (j, v.coords[k])).collect();
        terms.push((n, -dir[k]));
        lp.eq(&terms, base[k]);
    }
    let ones: Vec<_> = (0..n).map(|j| (j, 1.0)).collect();
    lp.eq(&ones, 1.0);
    lp.nonneg_range(0..n);
    lp.le(&[(n, 1.0)], cap);
    lp
}

fn combination_residual(vertices: &[PovmVertex], weights: &[f64], target: &Coords) -> f64 {
    (0..6)
        .map(|k| {
            let s: f64 = vertices.iter().zip(weights).map(|(v, w)| w * v.coords[k]).sum();
            (s - target[k]).abs()
        })
        .fold(0.0, f64::max)
}

/// Convex weights reproducing `povm`, or a separating halfspace.
pub fn membership(povm: &QubitPovm, vertices: &[PovmVertex]) -> Result<Membership> {
    if vertices.is_empty() {
        return Err(Error::Dimension("empty vertex set".into()));
    }
    let p = coordinates(povm)?;
    let c = centroid(vertices);
    let dir: Coords = std::array::from_fn(|k| p[k] - c[k]);
    let sol = ray_program(vertices, &c, &dir, 2.0).solve()?;
    if !sol.is_optimal() {
        return Err(Error::Solver(format!("membership program ended with {:?}", sol.status)));
    }
    let n = vertices.len();
    let mu = sol.x[n];
    let uniform = 1.0 / n as f64;
    if mu >= 1.0 - 1e-10 {
        let (a, b) = if mu > 1.0 {
            (1.0 / mu, 1.0 - 1.0 / mu)
        } else {
            (1.0, 0.0)
        };
        let mut weights: Vec<f64> = sol.x[..n].iter().map(|w| (a * w + b * uniform).max(0.0)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let residual = combination_residual(vertices, &weights, &p);
        if residual <= 1e-9 {
            return Ok(Membership::Inside { weights, residual });
        }
    }
    // The coordinate multipliers define a separating functional up to sign.
    let y = &sol.eq_duals[..6];
    let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for sign in [1.0, -1.0] {
            let normal: Vec<f64> = y.iter().map(|v| sign * v / norm).collect();
            let offset = vertices
                .iter()
                .map(|v| normal.iter().zip(&v.coords).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            let certificate = Halfspace { normal, offset };
            let violation = -certificate.slack(&p);
            if violation > 0.0 {
                return Ok(Membership::Outside { certificate, violation });
            }
        }
    }
    Err(Error::Solver(format!(
        "membership undecided: ray parameter {mu} without a separating functional"
    )))
}

/// Coordinates of `depolarize(povm, 0, ζ)` and the direction towards `povm`.
fn depolarizing_ray(povm: &QubitPovm, zeta: &RealQubitOperator) -> Result<(Coords, Coords)> {
    let povm = if povm.arity() == 2 { povm.embed(3) } else { povm.clone() };
    let p = coordinates(&povm)?;
    let d0 = coordinates(&depolarize(&povm, 0.0, zeta)?)?;
    Ok((d0, std::array::from_fn(|k| p[k] - d0[k])))
}

/// Largest `η ≤ 1` with `depolarize(povm, η, ζ)` inside the polytope.
pub fn shrink_eta_for(povm: &QubitPovm, zeta: &RealQubitOperator, vertices: &[PovmVertex]) -> Result<f64> {
    if !povm.is_valid(1e-9) {
        return Err(Error::InvalidOperator("input is not a valid POVM".into()));
    }
    let (d0, dir) = depolarizing_ray(povm, zeta)?;
    let sol = ray_program(vertices, &d0, &dir, 1.0).solve()?;
    if !sol.is_optimal() {
        return Err(Error::Solver(format!("shrink program ended with {:?}", sol.status)));
    }
    Ok(sol.x[vertices.len()].clamp(0.0, 1.0))
}

/// The same quantity from an explicit facet list.
pub fn shrink_eta_from_facets(povm: &QubitPovm, zeta: &RealQubitOperator, facets: &[Halfspace]) -> Result<f64> {
    let (d0, dir) = depolarizing_ray(povm, zeta)?;
    let mut eta: f64 = 1.0;
    for f in facets {
        let rate: f64 = f.normal.iter().zip(&dir).map(|(a, b)| a * b).sum();
        // Facets parallel to the ray (zero-weight outcomes) cannot bind.
        if rate > 1e-12 {
            eta = eta.min(f.slack(&d0).max(0.0) / rate);
        }
    }
    Ok(eta.max(0.0))
}

/// Projective two-outcome measurement along `angle`, padded to three outcomes.
pub fn projective_binary(angle: f64) -> QubitPovm {
    QubitPovm::binary(Vec2::from_angle(angle), 1.0).embed(3)
}

/// Rank-one three-outcome POVM with Bloch directions `betas`, when one exists.
///
/// Weights are fixed by `Σ t_b = 2` and `Σ t_b·m̂_b = 0`, which forces
/// `t ∝ (sin(β₂−β₁), sin(β₀−β₂), sin(β₁−β₀))`.
pub fn rank_one_ternary(betas: [f64; 3]) -> Option<QubitPovm> {
    let [b0, b1, b2] = betas;
    let w = [(b2 - b1).sin(), (b0 - b2).sin(), (b1 - b0).sin()];
    let sign = if w.iter().all(|&x| x > 1e-12) {
        1.0
    } else if w.iter().all(|&x| x < -1e-12) {
        -1.0
    } else {
        return None;
    };
    let total: f64 = w.iter().sum::<f64>() * sign;
    let elements = (0..3)
        .map(|b| {
            let t = 2.0 * sign * w[b] / total;
            RealQubitOperator::new(t, Vec2::from_angle(betas[b]) * t)
        })
        .collect();
    Some(QubitPovm::from_elements_unchecked(elements))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShrinkOptions {
    /// Grid spacing for the three ternary directions, in degrees.
    pub ternary_step_deg: f64,
    /// Grid spacing for the projective binaries, in degrees.
    pub binary_step_deg: f64,
    /// Number of best grid points refined locally.
    pub refine_starts: usize,
    /// Final step of the local search, in radians.
    pub refine_tol: f64,
}

impl Default for ShrinkOptions {
    fn default() -> Self {
        ShrinkOptions {
            ternary_step_deg: 3.0,
            binary_step_deg: 1.0,
            refine_starts: 4,
            refine_tol: 1e-7,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ExtremalFamily {
    Binary,
    Ternary,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShrinkReport {
    pub eta_b: f64,
    pub family: ExtremalFamily,
    /// Direction angles of the minimiser, in radians.
    pub angles: Vec<f64>,
    pub worst: QubitPovm,
    pub grid_minimum: f64,
    pub evaluations: usize,
    /// The local search reached `refine_tol` within its iteration budget.
    pub converged: bool,
}

fn povm_for(family: ExtremalFamily, angles: &[f64]) -> Option<QubitPovm> {
    match family {
        ExtremalFamily::Binary => Some(projective_binary(angles[0])),
        ExtremalFamily::Ternary => rank_one_ternary([angles[0], angles[1], angles[2]]),
    }
}

/// Sorted direction triples on the grid that are not confined to a closed half-plane,
/// up to the reflection `β ↦ π − β`.
pub fn ternary_grid(step_deg: f64) -> Vec<[f64; 3]> {
    let n = (360.0 / step_deg).round() as usize;
    let half = n / 2;
    let step = 2.0 * PI / n as f64;
    let mut out = Vec::new();
    for i0 in 0..n {
        for i1 in i0 + 1..n {
            if i1 - i0 >= half {
                break;
            }
            for i2 in i1 + 1..n {
                if i2 - i1 >= half {
                    break;
                }
                if n - (i2 - i0) >= half {
                    continue;
                }
                // β ↦ π − β leaves the vertex set and ζ invariant; keep one of each pair.
                if n.is_multiple_of(2) {
                    let mut mirrored = [i0, i1, i2].map(|i| (n + half - i) % n);
                    mirrored.sort_unstable();
                    if mirrored < [i0, i1, i2] {
                        continue;
                    }
                }
                out.push([i0 as f64 * step, i1 as f64 * step, i2 as f64 * step]);
            }
        }
    }
    out
}

/// Compass search on the angles; returns the best value, point, and whether the
/// step shrank to `tol`.
fn compass_search(
    mut f: impl FnMut(&[f64]) -> Result<f64>,
    start: &[f64],
    start_value: f64,
    step: f64,
    tol: f64,
    evaluations: &mut usize,
) -> Result<(f64, Vec<f64>, bool)> {
    const MAX_EVALS: usize = 4000;
    let mut x = start.to_vec();
    let mut best = start_value;
    let mut h = step;
    let mut spent = 0;
    while h > tol {
        if spent > MAX_EVALS {
            return Ok((best, x, false));
        }
        let mut improved = false;
        for i in 0..x.len() {
            for s in [1.0, -1.0] {
                let mut y = x.clone();
                y[i] += s * h;
                let v = f(&y)?;
                spent += 1;
                *evaluations += 1;
                if v < best {
                    best = v;
                    x = y;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    Ok((best, x, true))
}

/// Minimum of [`shrink_eta_for`] over all real three-outcome POVMs, taken over the
/// extremal ones: projective binaries and rank-one ternaries.
pub fn shrink_factor(zeta: &RealQubitOperator, vertices: &[PovmVertex], opts: &ShrinkOptions) -> Result<ShrinkReport> {
    if !zeta.is_state(1e-10) {
        return Err(Error::InvalidOperator("zeta is not a qubit state".into()));
    }
    if !(opts.ternary_step_deg > 0.0 && opts.binary_step_deg > 0.0) {
        return Err(Error::Domain {
            what: "grid step",
            value: opts.ternary_step_deg.min(opts.binary_step_deg),
            domain: "(0, 360)",
        });
    }
    let eval = |family: ExtremalFamily, angles: &[f64]| -> Result<f64> {
        match povm_for(family, angles) {
            Some(p) => shrink_eta_for(&p, zeta, vertices),
            None => Ok(1.0),
        }
    };

    let nb = (180.0 / opts.binary_step_deg).round() as usize;
    let mut candidates: Vec<(f64, ExtremalFamily, Vec<f64>)> = Vec::new();
    for k in 0..nb {
        let a = vec![k as f64 * PI / nb as f64];
        candidates.push((eval(ExtremalFamily::Binary, &a)?, ExtremalFamily::Binary, a));
    }
    let grid = ternary_grid(opts.ternary_step_deg);
    let ternary_values = map_grid(&grid, |b| eval(ExtremalFamily::Ternary, b))?;
    candidates.extend(
        ternary_values
            .into_iter()
            .zip(grid)
            .map(|(v, b)| (v, ExtremalFamily::Ternary, b.to_vec())),
    );
    let mut evaluations = candidates.len();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let grid_minimum = candidates[0].0;

    let mut best: Option<(f64, ExtremalFamily, Vec<f64>, bool)> = None;
    let step = opts.ternary_step_deg.to_radians() * 0.5;
    for (value, family, angles) in candidates.into_iter().take(opts.refine_starts.max(1)) {
        let (v, x, converged) = compass_search(
            |a| eval(family, a),
            &angles,
            value,
            step,
            opts.refine_tol,
            &mut evaluations,
        )?;
        if best.as_ref().is_none_or(|b| v < b.0) {
            best = Some((v, family, x, converged));
        }
    }
    let (eta_b, family, angles, converged) = best.expect("at least one start");
    let worst = povm_for(family, &angles).expect("refined point is evaluated");
    Ok(ShrinkReport {
        eta_b,
        family,
        angles,
        worst,
        grid_minimum,
        evaluations,
        converged,
    })
}

#[cfg(feature = "parallel")]
fn map_grid<T: Sync>(items: &[T], f: impl Fn(&T) -> Result<f64> + Sync + Send) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_grid<T>(items: &[T], f: impl Fn(&T) -> Result<f64>) -> Result<Vec<f64>> {
    items.iter().map(f).collect()
}

/// Facets of the vertex polytope, verified against every vertex.
pub fn facets(vertices: &[PovmVertex]) -> Result<Vec<Halfspace>> {
    let points: Vec<Vec<f64>> = vertices.iter().map(|v| v.coords.to_vec()).collect();
    let facets = hull::facets(&points, 1e-9)?;
    hull::verify(&points, &facets, 1e-9)?;
    Ok(facets)
}

pub fn write_vertices_csv(vertices: &[PovmVertex], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["base", "perm", "t0", "r0x", "r0z", "t1", "r1x", "r1z"])
        .map_err(io_err)?;
    for v in vertices {
        let mut row = vec![v.base.to_string(), v.perm.to_string()];
        row.extend(v.coords.iter().map(|c| format!("{c:.17e}")));
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

pub fn write_facets_csv(facets: &[Halfspace], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["f_t0", "f_r0x", "f_r0z", "f_t1", "f_r1x", "f_r1z", "offset"])
        .map_err(io_err)?;
    for f in facets {
        let row: Vec<String> = f
            .normal
            .iter()
            .chain([&f.offset])
            .map(|c| format!("{c:.17e}"))
            .collect();
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

fn io_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
