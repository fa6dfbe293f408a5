//! The semi-analytic certification: chains of grid points in θ, each certified
//! by the visibility LP over a φ grid and glued down to the next point, merged
//! with the closed-form small-θ branch.

use std::f64::consts::FRAC_PI_4;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analytic::{small_theta_bound, theta_star};
use crate::bloch::{bob_finite_set, zeta, QubitPovm, RealQubitOperator};
use crate::error::{Error, Result};
use crate::glue::{eta_global, eta_grid_min, next_theta};
use crate::lhvlp::{chi, max_eta_lp, NoiseBranch, ShrinkFactors};

fn io(e: impl std::fmt::Display) -> Error {
    Error::Io(e.to_string())
}

/// A certified chain point: `eta` is the φ-uniform bound at `theta_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainPoint {
    pub theta_i: f64,
    pub eta: f64,
    pub alpha: f64,
    pub phi_min: f64,
}

/// One row of the chain CSV.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRow {
    pub i: usize,
    pub theta_i: f64,
    pub eta: f64,
    pub phi_min: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChainOptions {
    pub branch: NoiseBranch,
    pub theta0: f64,
    pub epsilon: f64,
    pub delta_phi: f64,
    pub phi_max: f64,
    pub target: f64,
    /// Stop once the glued interval reaches this angle.
    pub theta_floor: Option<f64>,
    pub max_points: usize,
    /// Use `v(Δφ/2)`: every φ in range is within half a step of the grid.
    /// Off by default, which keeps the conservative full-step factor.
    pub half_step: bool,
}

impl ChainOptions {
    pub fn new(branch: NoiseBranch, theta0: f64) -> Self {
        ChainOptions {
            branch,
            theta0,
            epsilon: 1e-4,
            delta_phi: 0.1f64.to_radians(),
            phi_max: 30f64.to_radians(),
            target: 0.67,
            theta_floor: None,
            max_points: 10_000,
            half_step: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.theta0 > 0.0 && self.theta0 <= FRAC_PI_4 + 1e-15) {
            return Err(Error::Domain {
                what: "theta0",
                value: self.theta0,
                domain: "(0, π/4]",
            });
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Domain {
                what: "epsilon",
                value: self.epsilon,
                domain: "> 0",
            });
        }
        if !(self.delta_phi > 0.0) || !(self.phi_max >= 0.0) {
            return Err(Error::Domain {
                what: "delta_phi",
                value: self.delta_phi,
                domain: "> 0 with φ_max ≥ 0",
            });
        }
        if !(self.target > 0.0 && self.target < 1.0) {
            return Err(Error::Domain {
                what: "target",
                value: self.target,
                domain: "(0, 1)",
            });
        }
        Ok(())
    }

    /// `{0, Δφ, …, φ_max}`; the last step is shortened if `φ_max` is off-grid.
    pub fn phi_grid(&self) -> Vec<f64> {
        let steps = (self.phi_max / self.delta_phi - 1e-9).ceil().max(0.0) as usize;
        (0..=steps)
            .map(|j| (j as f64 * self.delta_phi).min(self.phi_max))
            .collect()
    }
}

/// Why a chain ended.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ChainStop {
    /// Consecutive points closer than ε.
    Converged,
    /// The glued interval passed the floor angle.
    ReachedFloor,
    /// The φ-uniform bound at this θ is not above the target.
    GridMinBelowTarget {
        theta: f64,
        eta: f64,
    },
    /// A single grid LP returned a visibility at or below the target.
    LpBelowTarget {
        theta: f64,
        phi: f64,
        eta: f64,
    },
    /// The LP failed at this point even with tight tolerances.
    SolverFailure {
        theta: f64,
        phi: f64,
        message: String,
    },
    MaxPoints,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Chain {
    pub alpha: f64,
    pub points: Vec<ChainPoint>,
    /// `[lowest glued θ, θ₀]`, absent when no point was certified.
    pub covered: Option<(f64, f64)>,
    pub stop: ChainStop,
}

/// Fixed inputs of the per-point LPs.
struct PointSolver {
    zeta: RealQubitOperator,
    bob: Vec<QubitPovm>,
    eta_b: f64,
}

impl PointSolver {
    fn new(branch: &NoiseBranch) -> Result<Self> {
        Ok(PointSolver {
            zeta: zeta(branch.alpha)?,
            bob: bob_finite_set(),
            eta_b: branch.eta_b,
        })
    }

    fn eta(&self, theta: f64, phi: f64) -> Result<f64> {
        let c = chi(theta, phi, self.eta_b, &self.zeta)?;
        Ok(max_eta_lp(&c, &self.bob)?.eta)
    }
}

#[cfg(feature = "parallel")]
fn map_phi(grid: &[f64], f: impl Fn(f64) -> Result<f64> + Sync + Send) -> Vec<Result<f64>> {
    use rayon::prelude::*;
    grid.par_iter().map(|&p| f(p)).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_phi(grid: &[f64], f: impl Fn(f64) -> Result<f64>) -> Vec<Result<f64>> {
    grid.iter().map(|&p| f(p)).collect()
}

/// Raw LP visibilities over the φ grid at `theta`.
pub fn phi_scan(branch: &NoiseBranch, theta: f64, grid: &[f64]) -> Result<Vec<f64>> {
    let solver = PointSolver::new(branch)?;
    map_phi(grid, |phi| solver.eta(theta, phi)).into_iter().collect()
}

enum Step {
    Accept(ChainPoint),
    Stop(ChainStop),
}

fn certify_point(solver: &PointSolver, opts: &ChainOptions, grid: &[f64], theta: f64) -> Result<Step> {
    let values = map_phi(grid, |phi| solver.eta(theta, phi));
    let mut etas = Vec::with_capacity(grid.len());
    for (&phi, v) in grid.iter().zip(values) {
        match v {
            Ok(eta) if eta <= opts.target => {
                return Ok(Step::Stop(ChainStop::LpBelowTarget { theta, phi, eta }));
            }
            Ok(eta) => etas.push(eta),
            Err(e @ (Error::Solver(_) | Error::Infeasible(_))) => {
                return Ok(Step::Stop(ChainStop::SolverFailure {
                    theta,
                    phi,
                    message: e.to_string(),
                }));
            }
            Err(e) => return Err(e),
        }
    }
    let (arg, _) = etas
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (j, &v)| if v < acc.1 { (j, v) } else { acc });
    let gap = if opts.half_step {
        0.5 * opts.delta_phi
    } else {
        opts.delta_phi
    };
    let eta = eta_grid_min(&etas, gap)?;
    if eta <= opts.target {
        return Ok(Step::Stop(ChainStop::GridMinBelowTarget { theta, eta }));
    }
    Ok(Step::Accept(ChainPoint {
        theta_i: theta,
        eta,
        alpha: opts.branch.alpha,
        phi_min: grid[arg],
    }))
}

/// Where the chain goes after `p`, or why it stops there.
fn advance(opts: &ChainOptions, p: &ChainPoint) -> Result<(f64, Option<ChainStop>)> {
    let next = next_theta(p.theta_i, p.eta, opts.target)?
        .ok_or_else(|| Error::Internal(format!("accepted point at θ = {} has η ≤ target", p.theta_i)))?;
    let stop = if p.theta_i - next <= opts.epsilon {
        Some(ChainStop::Converged)
    } else if opts.theta_floor.is_some_and(|f| next <= f) {
        Some(ChainStop::ReachedFloor)
    } else {
        None
    };
    Ok((next, stop))
}

fn continue_chain(
    opts: &ChainOptions,
    mut points: Vec<ChainPoint>,
    mut sink: impl FnMut(usize, &ChainPoint) -> Result<()>,
) -> Result<Chain> {
    opts.validate()?;
    let solver = PointSolver::new(&opts.branch)?;
    let grid = opts.phi_grid();
    let mut theta = opts.theta0;
    let mut lowest = None;
    let mut stop = None;
    if let Some(last) = points.last() {
        let (next, s) = advance(opts, last)?;
        theta = next;
        lowest = Some(next);
        stop = s;
    }
    while stop.is_none() {
        if points.len() >= opts.max_points {
            stop = Some(ChainStop::MaxPoints);
            break;
        }
        match certify_point(&solver, opts, &grid, theta)? {
            Step::Stop(s) => stop = Some(s),
            Step::Accept(p) => {
                sink(points.len(), &p)?;
                let (next, s) = advance(opts, &p)?;
                points.push(p);
                lowest = Some(next);
                theta = next;
                stop = s;
            }
        }
    }
    let covered = lowest.map(|lo| (lo, opts.theta0));
    Ok(Chain {
        alpha: opts.branch.alpha,
        points,
        covered,
        stop: stop.unwrap_or(ChainStop::MaxPoints),
    })
}

/// Runs a chain from `θ₀` downwards until consecutive points are within ε, the
/// floor is reached, or a point cannot be certified above the target.
pub fn run_chain(opts: &ChainOptions) -> Result<Chain> {
    continue_chain(opts, Vec::new(), |_, _| Ok(()))
}

/// Reads a chain CSV, checking that it was produced with these options.
pub fn read_chain_csv(path: &Path, opts: &ChainOptions) -> Result<Vec<ChainPoint>> {
    let mut reader = csv::Reader::from_path(path).map_err(io)?;
    let mut points = Vec::new();
    for (k, row) in reader.deserialize::<ChainRow>().enumerate() {
        let row = row.map_err(io)?;
        if row.i != k {
            return Err(Error::Io(format!("row {k} is labelled {}", row.i)));
        }
        let expected = match points.last() {
            None => opts.theta0,
            Some(p) => advance(opts, p)?.0,
        };
        if (row.theta_i - expected).abs() > 1e-12 * expected.max(1.0) {
            return Err(Error::Io(format!(
                "row {k}: θ = {} but this chain expects {expected}",
                row.theta_i
            )));
        }
        points.push(ChainPoint {
            theta_i: row.theta_i,
            eta: row.eta,
            alpha: opts.branch.alpha,
            phi_min: row.phi_min,
        });
    }
    Ok(points)
}

/// [`run_chain`] that appends each certified point to `path` and resumes from it.
pub fn run_chain_resumable(opts: &ChainOptions, path: &Path) -> Result<Chain> {
    let existing = if path.exists() && std::fs::metadata(path).map_err(io)?.len() > 0 {
        read_chain_csv(path, opts)?
    } else {
        Vec::new()
    };
    let fresh = existing.is_empty();
    let file = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    let mut writer = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    continue_chain(opts, existing, |i, p| {
        writer
            .serialize(ChainRow {
                i,
                theta_i: p.theta_i,
                eta: p.eta,
                phi_min: p.phi_min,
            })
            .map_err(io)?;
        writer.flush().map_err(io)
    })
}

pub fn write_chain_csv(chain: &Chain, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for (i, p) in chain.points.iter().enumerate() {
        w.serialize(ChainRow {
            i,
            theta_i: p.theta_i,
            eta: p.eta,
            phi_min: p.phi_min,
        })
        .map_err(io)?;
    }
    if chain.points.is_empty() {
        w.write_record(["i", "theta_i", "eta", "phi_min"]).map_err(io)?;
    }
    w.flush().map_err(io)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AnalyticSample {
    pub theta: f64,
    pub eta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Verdict {
    Pass,
    Fail { gaps: Vec<(f64, f64)> },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub target: f64,
    pub theta_star: f64,
    pub analytic: Vec<AnalyticSample>,
    pub chains: Vec<Chain>,
    pub verdict: Verdict,
}

impl Certificate {
    pub fn passed(&self) -> bool {
        self.verdict == Verdict::Pass
    }

    /// Lowest θ reached by any chain.
    pub fn lowest_chain_theta(&self) -> Option<f64> {
        self.chains
            .iter()
            .filter_map(|c| c.covered.map(|r| r.0))
            .reduce(f64::min)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertifyOptions {
    pub target: f64,
    pub epsilon: f64,
    pub delta_phi: f64,
    pub phi_max: f64,
    pub factors: ShrinkFactors,
    /// Starting angle for each branch, in the order of `factors`.
    pub starts: Vec<f64>,
    pub analytic_samples: usize,
    pub half_step: bool,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            target: 0.67,
            epsilon: 1e-4,
            delta_phi: 0.1f64.to_radians(),
            phi_max: 30f64.to_radians(),
            factors: ShrinkFactors::published(),
            starts: vec![FRAC_PI_4, 0.6],
            analytic_samples: 200,
            half_step: false,
        }
    }
}

/// Parts of `[lo, hi]` not covered by any of `intervals`.
pub fn uncovered(lo: f64, hi: f64, intervals: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<_> = intervals.iter().copied().filter(|(a, b)| a <= b).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut gaps = Vec::new();
    let mut reach = lo;
    for (a, b) in sorted {
        if a > reach {
            gaps.push((reach, a.min(hi)));
        }
        reach = reach.max(b);
        if reach >= hi {
            break;
        }
    }
    if reach < hi {
        gaps.push((reach, hi));
    }
    gaps.retain(|(a, b)| b > a);
    gaps
}

/// The closed-form branch on `[0, θ*]` plus one chain per noise branch, and the
/// verdict on whether together they cover `[0, π/4]` above the target.
pub fn certify_full_range(opts: &CertifyOptions) -> Result<Certificate> {
    if opts.starts.len() != opts.factors.branches.len() {
        return Err(Error::Dimension(format!(
            "{} start angles for {} branches",
            opts.starts.len(),
            opts.factors.branches.len()
        )));
    }
    let mut intervals = Vec::new();
    let (theta_star, analytic) = match theta_star(opts.target) {
        Ok(ts) => {
            let n = opts.analytic_samples.max(2);
            let samples = (0..n)
                .map(|k| {
                    let theta = ts * k as f64 / (n - 1) as f64;
                    Ok(AnalyticSample {
                        theta,
                        eta: small_theta_bound(theta)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            intervals.push((0.0, ts));
            (ts, samples)
        }
        // Targets above the pairwise threshold have no closed-form branch.
        Err(Error::Domain { .. }) if opts.target > crate::analytic::eta_pairwise() => (0.0, Vec::new()),
        Err(e) => return Err(e),
    };
    let mut chains = Vec::new();
    for (k, (branch, &start)) in opts.factors.branches.iter().zip(&opts.starts).enumerate() {
        let mut c = ChainOptions::new(*branch, start);
        c.epsilon = opts.epsilon;
        c.delta_phi = opts.delta_phi;
        c.phi_max = opts.phi_max;
        c.target = opts.target;
        c.half_step = opts.half_step;
        // The last chain only needs to reach the closed-form branch.
        if k + 1 == opts.factors.branches.len() && !analytic.is_empty() {
            c.theta_floor = Some(theta_star);
        }
        let chain = run_chain(&c)?;
        if let Some(r) = chain.covered {
            intervals.push(r);
        }
        chains.push(chain);
    }
    let gaps = uncovered(0.0, FRAC_PI_4, &intervals);
    let verdict = if gaps.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail { gaps }
    };
    Ok(Certificate {
        target: opts.target,
        theta_star,
        analytic,
        chains,
        verdict,
    })
}

/// One row of the figure data.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Fig2Row {
    pub branch: &'static str,
    pub theta: f64,
    pub eta: f64,
    pub alpha: Option<f64>,
}

pub fn fig2_rows(cert: &Certificate) -> Vec<Fig2Row> {
    let mut rows: Vec<Fig2Row> = cert
        .analytic
        .iter()
        .map(|s| Fig2Row {
            branch: "analytic",
            theta: s.theta,
            eta: s.eta,
            alpha: None,
        })
        .collect();
    for chain in &cert.chains {
        rows.extend(chain.points.iter().map(|p| Fig2Row {
            branch: "chain",
            theta: p.theta_i,
            eta: p.eta,
            alpha: Some(p.alpha),
        }));
    }
    rows
}

pub fn write_fig2_csv(cert: &Certificate, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in fig2_rows(cert) {
        w.serialize(row).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// η against θ: the closed-form curve, chain markers (diamonds for the first
/// branch, open circles otherwise) and the target line.
pub fn fig2_svg(cert: &Certificate) -> String {
    let (w, h, m) = (640.0, 420.0, 50.0);
    let rows = fig2_rows(cert);
    let eta_lo = rows.iter().map(|r| r.eta).fold(cert.target, f64::min) - 0.01;
    let eta_hi = rows.iter().map(|r| r.eta).fold(cert.target, f64::max) + 0.01;
    let sx = |t: f64| m + t / FRAC_PI_4 * (w - 2.0 * m);
    let sy = |e: f64| h - m - (e - eta_lo) / (eta_hi - eta_lo) * (h - 2.0 * m);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <line x1=\"{m}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <text x=\"{cx}\" y=\"{ty}\" font-size=\"14\" text-anchor=\"middle\">θ</text>\n\
         <text x=\"15\" y=\"{cy}\" font-size=\"14\">η</text>\n",
        b = h - m,
        r = w - m,
        cx = w / 2.0,
        ty = h - 12.0,
        cy = h / 2.0,
    );
    for k in 0..=4 {
        let t = FRAC_PI_4 * k as f64 / 4.0;
        s += &format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"middle\">{t:.3}</text>\n",
            sx(t),
            h - m + 16.0
        );
    }
    for k in 0..=4 {
        let e = eta_lo + (eta_hi - eta_lo) * k as f64 / 4.0;
        s += &format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{e:.3}</text>\n",
            m - 4.0,
            sy(e) + 4.0
        );
    }
    s += &format!(
        "<line x1=\"{m}\" y1=\"{y:.2}\" x2=\"{r}\" y2=\"{y:.2}\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n",
        y = sy(cert.target),
        r = w - m
    );
    if !cert.analytic.is_empty() {
        let pts: Vec<String> = cert
            .analytic
            .iter()
            .map(|a| format!("{:.2},{:.2}", sx(a.theta), sy(a.eta)))
            .collect();
        s += &format!(
            "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            pts.join(" ")
        );
    }
    for (k, chain) in cert.chains.iter().enumerate() {
        for p in &chain.points {
            let (x, y) = (sx(p.theta_i), sy(p.eta));
            if k == 0 {
                s += &format!(
                    "<polygon points=\"{:.2},{:.2} {:.2},{:.2} {:.2},{:.2} {:.2},{:.2}\" fill=\"black\"/>\n",
                    x,
                    y - 4.0,
                    x + 4.0,
                    y,
                    x,
                    y + 4.0,
                    x - 4.0,
                    y
                );
            } else {
                s += &format!("<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"3.5\" fill=\"none\" stroke=\"black\"/>\n");
            }
        }
    }
    s += "</svg>\n";
    s
}

/// Writes `<stem>.csv` and `<stem>.svg`.
pub fn emit_fig2(cert: &Certificate, stem: &Path) -> Result<()> {
    write_fig2_csv(cert, File::create(stem.with_extension("csv")).map_err(io)?)?;
    std::fs::write(stem.with_extension("svg"), fig2_svg(cert)).map_err(io)
}

/// Checks that each consecutive pair of chain points is glued exactly at the target.
pub fn glue_residual(chain: &Chain, target: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for pair in chain.points.windows(2) {
        let v = eta_global(pair[1].theta_i, pair[0].theta_i, pair[0].eta)?;
        worst = worst.max((v - target).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_301_points() {
        let o = ChainOptions::new(ShrinkFactors::published().branches[0], FRAC_PI_4);
        let g = o.phi_grid();
        assert_eq!(g.len(), 301);
        assert!((g[300] - 30f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn gaps() {
        assert!(uncovered(0.0, 1.0, &[(0.0, 0.4), (0.3, 1.0)]).is_empty());
        assert_eq!(uncovered(0.0, 1.0, &[(0.0, 0.4), (0.5, 1.0)]), vec![(0.4, 0.5)]);
        assert_eq!(uncovered(0.0, 1.0, &[]), vec![(0.0, 1.0)]);
    }

    #[test]
    fn coarse_chain_glues_at_target() {
        let mut o = ChainOptions::new(ShrinkFactors::published().branches[1], 0.45);
        o.delta_phi = 1f64.to_radians();
        o.phi_max = 30f64.to_radians();
        o.target = 0.60;
        o.epsilon = 1e-3;
        o.theta_floor = Some(0.35);
        let c = run_chain(&o).unwrap();
        assert!(!c.points.is_empty());
        assert!(c.points.iter().all(|p| p.eta > 0.60));
        assert!(glue_residual(&c, 0.60).unwrap() < 1e-9);
    }
}
