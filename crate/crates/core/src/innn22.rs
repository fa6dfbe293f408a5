//! The N-setting two-outcome Collins–Gisin inequalities, lossy measurements for
//! Alice, and a see-saw search for violations by measurements that are
//! (N−1)-wise compatible.

use std::io::Write;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bell::{response_maps, BellFunctional};
use crate::bloch::{Behavior, Scenario};
use crate::error::{Error, Result};
use crate::jointmeas::{lossy_set, parent_lossy, Effect};

/// A real symmetric matrix of any dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseOperator {
    m: DMatrix<f64>,
}

impl DenseOperator {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!("{}×{} operator", m.nrows(), m.ncols())));
        }
        let asym = (&m - m.transpose()).abs().max();
        if asym > 1e-12 * (1.0 + m.abs().max()) {
            return Err(Error::InvalidOperator(format!("not symmetric (deviation {asym:e})")));
        }
        Ok(DenseOperator {
            m: 0.5 * (&m + m.transpose()),
        })
    }

    pub fn identity(d: usize) -> Self {
        DenseOperator {
            m: DMatrix::identity(d, d),
        }
    }

    pub fn zeros(d: usize) -> Self {
        DenseOperator {
            m: DMatrix::zeros(d, d),
        }
    }

    /// `|v⟩⟨v|/⟨v|v⟩`.
    pub fn projector(v: &DVector<f64>) -> Self {
        DenseOperator {
            m: v * v.transpose() / v.norm_squared(),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        self.m.trace()
    }

    pub fn kron(&self, other: &DenseOperator) -> DenseOperator {
        DenseOperator {
            m: self.m.kronecker(&other.m),
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.m.symmetric_eigenvalues().min()
    }

    /// Projector onto the span of eigenvectors with positive eigenvalue.
    pub fn positive_part_projector(&self) -> DenseOperator {
        let eig = SymmetricEigen::new(self.m.clone());
        let d = self.dim();
        let mut p = DMatrix::zeros(d, d);
        for (k, &l) in eig.eigenvalues.iter().enumerate() {
            if l > 0.0 {
                let v = eig.eigenvectors.column(k);
                p += v * v.transpose();
            }
        }
        DenseOperator { m: p }
    }

    /// `Tr(self·other)`.
    pub fn hs_inner(&self, other: &DenseOperator) -> f64 {
        self.m.component_mul(&other.m).sum()
    }
}

impl Effect for DenseOperator {
    fn zero_like(&self) -> Self {
        DenseOperator::zeros(self.dim())
    }
    fn identity_like(&self) -> Self {
        DenseOperator::identity(self.dim())
    }
    fn plus(&self, other: &Self) -> Self {
        DenseOperator { m: &self.m + &other.m }
    }
    fn scaled(&self, k: f64) -> Self {
        DenseOperator { m: &self.m * k }
    }
    fn is_psd(&self, tol: f64) -> bool {
        self.min_eigenvalue() >= -tol
    }
    fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        (&self.m - &other.m).abs().max()
    }
}

/// Coefficients of `Σ_x a_x p_A(0|x) + Σ_y b_y p_B(0|y) + Σ_xy j_xy p(00|xy)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CgFunctional {
    pub alice: Vec<f64>,
    pub bob: Vec<f64>,
    /// `joint[x][y]`.
    pub joint: Vec<Vec<f64>>,
}

/// Deterministic strategies per party are enumerated exhaustively up to this many settings.
pub const MAX_ENUMERATED_SETTINGS: usize = 6;

impl CgFunctional {
    pub fn new(alice: Vec<f64>, bob: Vec<f64>, joint: Vec<Vec<f64>>) -> Result<Self> {
        if joint.len() != alice.len() || joint.iter().any(|r| r.len() != bob.len()) {
            return Err(Error::Dimension(
                "joint block does not match the marginal coefficients".into(),
            ));
        }
        if alice
            .iter()
            .chain(&bob)
            .chain(joint.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidOperator("non-finite coefficient".into()));
        }
        Ok(CgFunctional { alice, bob, joint })
    }

    /// `I_NN22` with settings numbered from one: `−(N − x)` on `p_A(0|x)`, `−1` on
    /// `p_B(0|1)`, and `+1` / `−1` on `p(00|xy)` for `x + y ≤ N + 1` / `x + y = N + 2`.
    /// Local bound 0. `N = 2` is the CH inequality.
    pub fn i_nn22(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain {
                what: "N",
                value: n as f64,
                domain: "N ≥ 2",
            });
        }
        let alice = (1..=n).map(|x| -((n - x) as f64)).collect();
        let bob = (1..=n).map(|y| if y == 1 { -1.0 } else { 0.0 }).collect();
        let joint = (1..=n)
            .map(|x| {
                (1..=n)
                    .map(|y| match x + y {
                        s if s <= n + 1 => 1.0,
                        s if s == n + 2 => -1.0,
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect();
        CgFunctional::new(alice, bob, joint)
    }

    pub fn alice_settings(&self) -> usize {
        self.alice.len()
    }

    pub fn bob_settings(&self) -> usize {
        self.bob.len()
    }

    pub fn scenario(&self) -> Scenario {
        Scenario::new(vec![2; self.alice_settings()], vec![2; self.bob_settings()])
    }

    pub fn value(&self, p: &Behavior) -> Result<f64> {
        if *p.scenario() != self.scenario() {
            return Err(Error::Dimension("behaviour does not match the functional".into()));
        }
        let mut v = 0.0;
        for (x, a) in self.alice.iter().enumerate() {
            v += a * p.alice_marginal(0, x, 0);
        }
        for (y, b) in self.bob.iter().enumerate() {
            v += b * p.bob_marginal(0, y, 0);
        }
        for (x, row) in self.joint.iter().enumerate() {
            for (y, j) in row.iter().enumerate() {
                v += j * p.get(0, 0, x, y);
            }
        }
        Ok(v)
    }

    /// The same functional on the full probability table; marginals are read
    /// off the first setting of the other party.
    pub fn to_bell(&self) -> BellFunctional {
        BellFunctional::from_fn(self.scenario(), |a, b, x, y| {
            let mut c = 0.0;
            if a == 0 && y == 0 {
                c += self.alice[x];
            }
            if b == 0 && x == 0 {
                c += self.bob[y];
            }
            if a == 0 && b == 0 {
                c += self.joint[x][y];
            }
            c
        })
    }

    fn deterministic_value(&self, fa: &[usize], fb: &[usize]) -> f64 {
        let mut v = 0.0;
        for x in 0..fa.len() {
            if fa[x] == 0 {
                v += self.alice[x];
                for y in 0..fb.len() {
                    if fb[y] == 0 {
                        v += self.joint[x][y];
                    }
                }
            }
        }
        v + fb
            .iter()
            .zip(&self.bob)
            .filter(|(b, _)| **b == 0)
            .map(|(_, c)| c)
            .sum::<f64>()
    }
}

/// Maximum over all pairs of deterministic strategies.
pub fn local_bound(f: &CgFunctional) -> Result<f64> {
    let (na, nb) = (f.alice_settings(), f.bob_settings());
    if na.max(nb) > MAX_ENUMERATED_SETTINGS {
        return Err(Error::TooLarge(format!(
            "{na}×{nb} settings; enumeration is limited to {MAX_ENUMERATED_SETTINGS}"
        )));
    }
    let alice = response_maps(&vec![2; na]);
    let bob = response_maps(&vec![2; nb]);
    let mut best = f64::NEG_INFINITY;
    for fa in &alice {
        for fb in &bob {
            best = best.max(f.deterministic_value(fa, fb));
        }
    }
    Ok(best)
}

fn check_effect(m: &DenseOperator, what: &str) -> Result<()> {
    let lo = m.min_eigenvalue();
    let hi = -(DenseOperator::identity(m.dim()).plus(&m.scaled(-1.0))).min_eigenvalue();
    if lo < -1e-9 || hi > 1e-9 {
        return Err(Error::InvalidOperator(format!("{what} is not between 0 and 𝟙")));
    }
    Ok(())
}

fn check_state(rho: &DenseOperator, d: usize) -> Result<()> {
    if rho.dim() != d * d {
        return Err(Error::Dimension(format!(
            "state of dimension {} for local dimension {d}",
            rho.dim()
        )));
    }
    if (rho.trace() - 1.0).abs() > 1e-9 || rho.min_eigenvalue() < -1e-9 {
        return Err(Error::InvalidOperator("not a density matrix".into()));
    }
    Ok(())
}

/// `p(ab|xy) = Tr[ρ·M^η_{a|x} ⊗ B_{b|y}]` with `M^η_{0|x} = η·M_x` and
/// Bob's binary measurements given by their outcome-0 effects.
pub fn lossy_behavior(
    rho: &DenseOperator,
    base: &[DenseOperator],
    bob: &[DenseOperator],
    eta: f64,
) -> Result<Behavior> {
    if base.is_empty() || bob.is_empty() {
        return Err(Error::Dimension("both parties need at least one setting".into()));
    }
    let d = base[0].dim();
    if base.iter().chain(bob).any(|m| m.dim() != d) {
        return Err(Error::Dimension("effects of different dimensions".into()));
    }
    check_state(rho, d)?;
    for b in bob {
        check_effect(b, "Bob's effect")?;
    }
    let alice = lossy_set(base, eta)?.measurements();
    let bob_full: Vec<[DenseOperator; 2]> = bob
        .iter()
        .map(|b| [b.clone(), DenseOperator::identity(d).plus(&b.scaled(-1.0))])
        .collect();
    let scenario = Scenario::new(vec![2; base.len()], vec![2; bob.len()]);
    Ok(Behavior::from_fn(scenario, |a, b, x, y| {
        rho.hs_inner(&alice[x][a].kron(&bob_full[y][b]))
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeesawOptions {
    pub n: usize,
    pub eta: f64,
    /// Local dimension of each party.
    pub dim: usize,
    pub restarts: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
}

impl SeesawOptions {
    /// `η = 1/(N − 1)`, local dimension `N`, 50 restarts.
    pub fn new(n: usize) -> Self {
        SeesawOptions {
            n,
            eta: 1.0 / (n.max(2) - 1) as f64,
            dim: n,
            restarts: 50,
            seed: 0,
            tol: 1e-13,
            max_iter: 5000,
        }
    }
}

/// A violating configuration: pure state, Alice's base effects `M_x` (her
/// outcome-0 effect is `η·M_x`) and Bob's outcome-0 projectors.
#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub n: usize,
    pub eta: f64,
    pub dim: usize,
    pub seed: u64,
    pub restart: usize,
    pub value: f64,
    pub local_bound: f64,
    pub state: DVector<f64>,
    pub alice: Vec<DenseOperator>,
    pub bob: Vec<DenseOperator>,
}

impl Witness {
    pub fn margin(&self) -> f64 {
        self.value - self.local_bound
    }

    pub fn behavior(&self) -> Result<Behavior> {
        lossy_behavior(&DenseOperator::projector(&self.state), &self.alice, &self.bob, self.eta)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SeesawOutcome {
    Found(Witness),
    /// No restart exceeded the local bound; the best configuration is kept.
    NotFound(Witness),
}

impl SeesawOutcome {
    pub fn witness(&self) -> &Witness {
        match self {
            SeesawOutcome::Found(w) | SeesawOutcome::NotFound(w) => w,
        }
    }

    pub fn is_found(&self) -> bool {
        matches!(self, SeesawOutcome::Found(_))
    }
}

/// A violation has to clear the local bound by more than this.
pub const VIOLATION_MARGIN: f64 = 1e-9;

struct Run {
    value: f64,
    state: DVector<f64>,
    alice: Vec<DenseOperator>,
    bob: Vec<DenseOperator>,
}

fn random_projector(rng: &mut ChaCha8Rng, d: usize) -> DenseOperator {
    let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    DenseOperator { m: &m + m.transpose() }.positive_part_projector()
}

fn bell_operator(f: &CgFunctional, eta: f64, alice: &[DenseOperator], bob: &[DenseOperator]) -> DenseOperator {
    let d = alice[0].dim();
    let id = DenseOperator::identity(d);
    let mut op = DMatrix::zeros(d * d, d * d);
    for (x, m) in alice.iter().enumerate() {
        let ax = m.scaled(eta);
        op += ax.kron(&id).m * f.alice[x];
        for (y, b) in bob.iter().enumerate() {
            if f.joint[x][y] != 0.0 {
                op += ax.kron(b).m * f.joint[x][y];
            }
        }
    }
    for (y, b) in bob.iter().enumerate() {
        if f.bob[y] != 0.0 {
            op += id.kron(b).m * f.bob[y];
        }
    }
    DenseOperator { m: op }
}

/// `Tr_B[(𝟙 ⊗ L)·|ψ⟩⟨ψ|]` and `Tr_A[(L ⊗ 𝟙)·|ψ⟩⟨ψ|]` through the `d×d` reshaping of ψ.
fn reduce_alice(psi: &DMatrix<f64>, l: &DMatrix<f64>) -> DenseOperator {
    DenseOperator {
        m: psi * l.transpose() * psi.transpose(),
    }
}

fn reduce_bob(psi: &DMatrix<f64>, l: &DMatrix<f64>) -> DenseOperator {
    DenseOperator {
        m: psi.transpose() * l.transpose() * psi,
    }
}

fn expectation(psi: &DVector<f64>, op: &DenseOperator) -> f64 {
    (psi.transpose() * &op.m * psi)[(0, 0)]
}

fn seesaw_run(f: &CgFunctional, o: &SeesawOptions, restart: usize) -> Result<Run> {
    let d = o.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed.wrapping_add(restart as u64));
    let mut alice: Vec<_> = (0..o.n).map(|_| random_projector(&mut rng, d)).collect();
    let mut bob: Vec<_> = (0..o.n).map(|_| random_projector(&mut rng, d)).collect();
    let id = DMatrix::<f64>::identity(d, d);
    let mut previous = f64::NEG_INFINITY;
    let mut state = DVector::zeros(d * d);
    let slack = |v: f64| 1e-10 * (1.0 + v.abs());
    for _ in 0..o.max_iter {
        let op = bell_operator(f, o.eta, &alice, &bob);
        let eig = SymmetricEigen::new(op.m.clone());
        let top = eig.eigenvalues.imax();
        let value = eig.eigenvalues[top];
        if value < previous - slack(previous) {
            return Err(Error::Internal(format!("see-saw decreased from {previous} to {value}")));
        }
        state = eig.eigenvectors.column(top).into_owned();
        // ψ_{ij} with Alice's index first.
        let psi = DMatrix::from_fn(d, d, |i, j| state[i * d + j]);
        for x in 0..o.n {
            let mut l = &id * f.alice[x];
            for (y, b) in bob.iter().enumerate() {
                l += &b.m * f.joint[x][y];
            }
            alice[x] = reduce_alice(&psi, &l).positive_part_projector();
        }
        let after_alice = expectation(&state, &bell_operator(f, o.eta, &alice, &bob));
        if after_alice < value - slack(value) {
            return Err(Error::Internal(format!(
                "Alice's update decreased {value} to {after_alice}"
            )));
        }
        for y in 0..o.n {
            let mut l = &id * f.bob[y];
            for (x, m) in alice.iter().enumerate() {
                l += &m.m * (o.eta * f.joint[x][y]);
            }
            bob[y] = reduce_bob(&psi, &l).positive_part_projector();
        }
        let after_bob = expectation(&state, &bell_operator(f, o.eta, &alice, &bob));
        if after_bob < after_alice - slack(after_alice) {
            return Err(Error::Internal(format!(
                "Bob's update decreased {after_alice} to {after_bob}"
            )));
        }
        let done = (value - previous).abs() <= o.tol;
        previous = value;
        if done {
            break;
        }
    }
    // The measurements were updated after the last eigenvector: refresh the state.
    let op = bell_operator(f, o.eta, &alice, &bob);
    let eig = SymmetricEigen::new(op.m.clone());
    let top = eig.eigenvalues.imax();
    if eig.eigenvalues[top] >= previous - slack(previous) {
        state = eig.eigenvectors.column(top).into_owned();
        previous = eig.eigenvalues[top];
    }
    Ok(Run {
        value: previous,
        state,
        alice,
        bob,
    })
}

#[cfg(feature = "parallel")]
fn run_all(f: &CgFunctional, o: &SeesawOptions) -> Vec<Result<Run>> {
    use rayon::prelude::*;
    (0..o.restarts).into_par_iter().map(|r| seesaw_run(f, o, r)).collect()
}

#[cfg(not(feature = "parallel"))]
fn run_all(f: &CgFunctional, o: &SeesawOptions) -> Vec<Result<Run>> {
    (0..o.restarts).map(|r| seesaw_run(f, o, r)).collect()
}

/// Alternating optimisation of `I_NN22` with lossy Alice: state from the top
/// eigenvector of the Bell operator, then each party's effects from the positive
/// part of their coefficient operator. Seeded restarts; the best run is
/// re-evaluated from its behaviour before it is returned.
pub fn seesaw(o: &SeesawOptions) -> Result<SeesawOutcome> {
    if o.n < 3 {
        return Err(Error::Domain {
            what: "N",
            value: o.n as f64,
            domain: "N ≥ 3",
        });
    }
    if o.dim < 2 || o.restarts == 0 {
        return Err(Error::Domain {
            what: "dim",
            value: o.dim as f64,
            domain: "dim ≥ 2 with at least one restart",
        });
    }
    crate::error::check_range("eta", o.eta, 0.0, 1.0, "[0, 1]")?;
    let f = CgFunctional::i_nn22(o.n)?;
    let bound = local_bound(&f)?;
    let mut best: Option<(usize, Run)> = None;
    for (r, run) in run_all(&f, o).into_iter().enumerate() {
        let run = run?;
        if best.as_ref().is_none_or(|(_, b)| run.value > b.value) {
            best = Some((r, run));
        }
    }
    let (restart, run) = best.expect("at least one restart");
    let witness = Witness {
        n: o.n,
        eta: o.eta,
        dim: o.dim,
        seed: o.seed,
        restart,
        value: run.value,
        local_bound: bound,
        state: run.state,
        alice: run.alice,
        bob: run.bob,
    };
    let check = f.value(&witness.behavior()?)?;
    if (check - witness.value).abs() > 1e-9 {
        return Err(Error::Internal(format!(
            "witness evaluates to {check}, see-saw reported {}",
            witness.value
        )));
    }
    Ok(if witness.margin() > VIOLATION_MARGIN {
        SeesawOutcome::Found(witness)
    } else {
        SeesawOutcome::NotFound(witness)
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubsetCertificate {
    /// The setting left out.
    pub excluded: usize,
    pub marginal_residual: f64,
    pub completeness_residual: f64,
    pub all_psd: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompatReport {
    pub eta: f64,
    pub subsets: Vec<SubsetCertificate>,
    pub passed: bool,
}

/// Tolerance for the parent checks of [`compat_certificate`].
pub const PARENT_CHECK_TOL: f64 = 1e-12;

/// Builds the lossy parent for every `(N−1)`-subset of Alice's measurements at
/// `η = 1/(N−1)` and checks it.
pub fn compat_certificate(base: &[DenseOperator], eta: f64) -> Result<CompatReport> {
    let n = base.len();
    if n < 2 {
        return Err(Error::Dimension("need at least two measurements".into()));
    }
    let sub = n - 1;
    if (eta - 1.0 / sub as f64).abs() > 1e-12 {
        return Err(Error::Domain {
            what: "eta",
            value: eta,
            domain: "1/(N−1)",
        });
    }
    let mut subsets = Vec::with_capacity(n);
    for excluded in 0..n {
        let chosen: Vec<DenseOperator> = base
            .iter()
            .enumerate()
            .filter(|(x, _)| *x != excluded)
            .map(|(_, m)| m.clone())
            .collect();
        let parent = parent_lossy(&chosen)?;
        let children = lossy_set(&chosen, eta)?.measurements();
        let c = parent.check(&children, PARENT_CHECK_TOL)?;
        subsets.push(SubsetCertificate {
            excluded,
            marginal_residual: c.marginal_residual,
            completeness_residual: c.completeness_residual,
            all_psd: c.all_psd,
        });
    }
    let passed = subsets
        .iter()
        .all(|s| s.all_psd && s.marginal_residual <= PARENT_CHECK_TOL && s.completeness_residual <= PARENT_CHECK_TOL);
    Ok(CompatReport { eta, subsets, passed })
}

/// Whether the lossy parent construction covers `n` measurements at `eta`.
pub fn lossy_parent_applies(n: usize, eta: f64) -> bool {
    n > 0 && eta <= 1.0 / n as f64 + 1e-15
}

/// Flat dump of a witness, one matrix entry per row: `part,index,row,col,value`
/// where `part` is `state` (index 0, col 0, row = basis index `i·d + j`),
/// `alice` (base effect `M_x`, index `x`) or `bob` (outcome-0 effect, index `y`).
pub fn write_witness_csv(w: &Witness, out: impl Write) -> Result<()> {
    let mut csv = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    csv.write_record(["part", "index", "row", "col", "value"]).map_err(io)?;
    for (k, v) in w.state.iter().enumerate() {
        csv.write_record([
            "state".to_string(),
            "0".into(),
            k.to_string(),
            "0".into(),
            v.to_string(),
        ])
        .map_err(io)?;
    }
    for (part, ops) in [("alice", &w.alice), ("bob", &w.bob)] {
        for (x, op) in ops.iter().enumerate() {
            for r in 0..op.dim() {
                for c in 0..op.dim() {
                    csv.write_record([
                        part.to_string(),
                        x.to_string(),
                        r.to_string(),
                        c.to_string(),
                        op.m[(r, c)].to_string(),
                    ])
                    .map_err(io)?;
                }
            }
        }
    }
    csv.flush().map_err(|e| Error::Io(e.to_string()))
}
