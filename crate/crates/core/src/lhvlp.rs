//! The visibility linear program: the largest trine visibility for Alice such that
//! the correlations of a surrogate operator `χ` with Bob's finite measurement set
//! admit a local hidden-variable model.
//!
//! Only Alice is determinised; Bob keeps a response table per Alice strategy
//! (`w_λ(b|y)` with `Σ_b w_λ(b|y) = q_λ`). This is exact because the local polytope
//! factorises over the two parties.

use serde::Serialize;

use crate::bell::{response_maps, BellFunctional};
use crate::bloch::{
    bob_finite_set, expectation, kron2, partial_trace, schmidt_state, trine_axes, zeta, Behavior, BipartiteOperator,
    Party, PseudoState, QubitPovm, RealQubitOperator, Scenario, Vec2,
};
use crate::conic::{ConicProgram, Solution, Tolerances};
use crate::error::{Error, Result};

/// Response maps `x ↦ a` and `y ↦ b`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DeterministicStrategy {
    pub alice: Vec<usize>,
    pub bob: Vec<usize>,
}

impl DeterministicStrategy {
    /// Every strategy pair for the scenario.
    pub fn enumerate(scenario: &Scenario) -> Vec<DeterministicStrategy> {
        let bob = response_maps(&scenario.bob_outcomes);
        response_maps(&scenario.alice_outcomes)
            .into_iter()
            .flat_map(|a| {
                bob.iter().map(move |b| DeterministicStrategy {
                    alice: a.clone(),
                    bob: b.clone(),
                })
            })
            .collect()
    }

    /// `D(a|x)·D(b|y)`.
    pub fn probability(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        if self.alice[x] == a && self.bob[y] == b {
            1.0
        } else {
            0.0
        }
    }
}

/// `p(ab|xy) = Σ_λ D(a|x,λ)·w_λ(b|y)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalModel {
    scenario: Scenario,
    alice_strategies: Vec<Vec<usize>>,
    weights: Vec<f64>,
    /// `tables[λ][y][b] = w_λ(b|y)`.
    tables: Vec<Vec<Vec<f64>>>,
}

impl LocalModel {
    pub fn new(scenario: Scenario, alice_strategies: Vec<Vec<usize>>, tables: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if alice_strategies.len() != tables.len()
            || tables.iter().any(|t| {
                t.len() != scenario.bob_settings() || t.iter().zip(&scenario.bob_outcomes).any(|(c, &n)| c.len() != n)
            })
            || alice_strategies.iter().any(|f| {
                f.len() != scenario.alice_settings() || f.iter().zip(&scenario.alice_outcomes).any(|(&a, &n)| a >= n)
            })
        {
            return Err(Error::Dimension("local model tables do not match the scenario".into()));
        }
        let weights = tables.iter().map(|t| t[0].iter().sum()).collect();
        Ok(LocalModel {
            scenario,
            alice_strategies,
            weights,
            tables,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn alice_strategies(&self) -> &[Vec<usize>] {
        &self.alice_strategies
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn table(&self, lambda: usize) -> &[Vec<f64>] {
        &self.tables[lambda]
    }

    /// Largest violation of positivity, per-strategy consistency and normalisation.
    pub fn validity_residual(&self) -> f64 {
        let mut worst: f64 = (self.weights.iter().sum::<f64>() - 1.0).abs();
        for (q, t) in self.weights.iter().zip(&self.tables) {
            for column in t {
                worst = worst.max((column.iter().sum::<f64>() - q).abs());
                worst = worst.max(column.iter().map(|&w| -w).fold(0.0, f64::max));
            }
        }
        worst
    }

    pub fn reconstruct(&self) -> Behavior {
        Behavior::from_fn(self.scenario.clone(), |a, b, x, y| {
            self.alice_strategies
                .iter()
                .zip(&self.tables)
                .filter(|(f, _)| f[x] == a)
                .map(|(_, t)| t[y][b])
                .sum()
        })
    }

    /// `max(validity residual, reconstruction error against target)`.
    pub fn residual(&self, target: &Behavior) -> f64 {
        self.validity_residual().max(self.reconstruct().max_abs_diff(target))
    }
}

/// `χ = ρ/η_B + (η_B − 1)/η_B·ρ_A ⊗ ζ_B`, so that `η_B·χ + (1 − η_B)·ρ_A ⊗ ζ_B = ρ`.
pub fn chi(theta: f64, phi: f64, eta_b: f64, zeta_b: &RealQubitOperator) -> Result<PseudoState> {
    if !(eta_b > 0.0 && eta_b <= 1.0) {
        return Err(Error::Domain {
            what: "eta_b",
            value: eta_b,
            domain: "(0, 1]",
        });
    }
    if !zeta_b.is_state(1e-10) {
        return Err(Error::InvalidOperator("zeta is not a qubit state".into()));
    }
    let rho = schmidt_state(theta, phi);
    let rho_a = partial_trace(&rho, Party::Bob);
    let product = kron2(&rho_a.to_matrix(), &zeta_b.to_matrix());
    PseudoState::new(rho.matrix() / eta_b + product * ((eta_b - 1.0) / eta_b))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LhvSolution {
    pub eta: f64,
    pub model: LocalModel,
    /// Reconstruction error of the model against the behaviour at `eta`.
    pub residual: f64,
}

const ACCEPT_RESIDUAL: f64 = 1e-8;

/// Index bookkeeping for the reduced variable set.
struct Layout {
    strategies: Vec<Vec<usize>>,
    /// Outcomes of each Bob setting whose effect is not identically zero.
    active: Vec<Vec<usize>>,
    /// `offset[λ][y]`: first variable of `w_λ(·|y)`.
    offset: Vec<Vec<usize>>,
    n_vars: usize,
}

impl Layout {
    fn new(n_alice: usize, bob: &[QubitPovm], first: usize) -> Self {
        let strategies = response_maps(&vec![2; n_alice]);
        let active: Vec<Vec<usize>> = bob
            .iter()
            .map(|p| {
                (0..p.arity())
                    .filter(|&b| *p.element(b) != RealQubitOperator::zero())
                    .collect()
            })
            .collect();
        let mut next = first;
        let offset = strategies
            .iter()
            .map(|_| {
                active
                    .iter()
                    .map(|act| {
                        let o = next;
                        next += act.len();
                        o
                    })
                    .collect()
            })
            .collect();
        Layout {
            strategies,
            active,
            offset,
            n_vars: next,
        }
    }

    fn var(&self, lambda: usize, y: usize, j: usize) -> usize {
        self.offset[lambda][y] + j
    }

    /// Adds per-strategy consistency, normalisation and positivity of the tables.
    fn add_structure(&self, lp: &mut ConicProgram, first: usize) {
        for lambda in 0..self.strategies.len() {
            let base: Vec<_> = (0..self.active[0].len())
                .map(|j| (self.var(lambda, 0, j), -1.0))
                .collect();
            for y in 1..self.active.len() {
                let mut terms: Vec<_> = (0..self.active[y].len())
                    .map(|j| (self.var(lambda, y, j), 1.0))
                    .collect();
                terms.extend_from_slice(&base);
                lp.eq(&terms, 0.0);
            }
        }
        let all: Vec<_> = (0..self.strategies.len())
            .flat_map(|l| (0..self.active[0].len()).map(move |j| (l, j)))
            .map(|(l, j)| (self.var(l, 0, j), 1.0))
            .collect();
        lp.eq(&all, 1.0);
        lp.nonneg_range(first..self.n_vars);
    }

    fn model(&self, x: &[f64], bob: &[QubitPovm], n_alice: usize) -> Result<LocalModel> {
        let scenario = Scenario::new(vec![2; n_alice], bob.iter().map(QubitPovm::arity).collect());
        let tables = (0..self.strategies.len())
            .map(|l| {
                bob.iter()
                    .enumerate()
                    .map(|(y, p)| {
                        let mut column = vec![0.0; p.arity()];
                        for (j, &b) in self.active[y].iter().enumerate() {
                            column[b] = x[self.var(l, y, j)].max(0.0);
                        }
                        column
                    })
                    .collect()
            })
            .collect();
        LocalModel::new(scenario, self.strategies.clone(), tables)
    }
}

fn solve_checked(lp: &ConicProgram, accept: impl Fn(&Solution) -> Result<bool>) -> Result<Solution> {
    let mut last = None;
    for tol in [Tolerances::default(), Tolerances::refined(), Tolerances::tight()] {
        let sol = lp.solve_with(&tol)?;
        if sol.status == crate::conic::Status::Infeasible {
            return Err(Error::Infeasible(
                "no local model exists even at zero visibility".into(),
            ));
        }
        if sol.is_optimal() && accept(&sol)? {
            return Ok(sol);
        }
        last = Some(sol.status);
    }
    Err(Error::Solver(format!(
        "visibility program not accepted (last status {last:?})"
    )))
}

fn binary_family(axes: &[Vec2], eta: f64) -> Vec<QubitPovm> {
    axes.iter().map(|&a| QubitPovm::binary(a, eta)).collect()
}

/// [`max_eta_lp_with`] for the trine on Alice's side.
pub fn max_eta_lp(chi: &impl BipartiteOperator, bob: &[QubitPovm]) -> Result<LhvSolution> {
    max_eta_lp_with(chi, &trine_axes(), bob)
}

/// Largest `η ∈ [0, 1]` for which Alice's binary measurements `(𝟙 ± η·a_x·σ)/2`
/// together with `bob` produce a local behaviour on `chi`.
pub fn max_eta_lp_with(chi: &impl BipartiteOperator, alice_axes: &[Vec2], bob: &[QubitPovm]) -> Result<LhvSolution> {
    if alice_axes.is_empty() || bob.is_empty() {
        return Err(Error::Dimension("both parties need at least one measurement".into()));
    }
    let m = chi.matrix();
    let layout = Layout::new(alice_axes.len(), bob, 1);
    let mut lp = ConicProgram::new(layout.n_vars);
    lp.maximize(&[(0, 1.0)]);
    let half_identity = RealQubitOperator::new(1.0, Vec2::ZERO);
    for (x, &axis) in alice_axes.iter().enumerate() {
        let slope_op = RealQubitOperator::new(0.0, axis);
        for (y, povm) in bob.iter().enumerate() {
            for (j, &b) in layout.active[y].iter().enumerate() {
                let c0 = expectation(m, &half_identity, povm.element(b));
                let c1 = expectation(m, &slope_op, povm.element(b));
                let mut terms: Vec<_> = layout
                    .strategies
                    .iter()
                    .enumerate()
                    .filter(|(_, f)| f[x] == 0)
                    .map(|(l, _)| (layout.var(l, y, j), 1.0))
                    .collect();
                terms.push((0, -c1));
                lp.eq(&terms, c0);
            }
        }
    }
    // Bob's marginals; the last active outcome follows from normalisation.
    for (y, povm) in bob.iter().enumerate() {
        let act = &layout.active[y];
        for (j, &b) in act.iter().enumerate().take(act.len().saturating_sub(1)) {
            let pb = expectation(m, &RealQubitOperator::identity(), povm.element(b));
            let terms: Vec<_> = (0..layout.strategies.len())
                .map(|l| (layout.var(l, y, j), 1.0))
                .collect();
            lp.eq(&terms, pb);
        }
    }
    layout.add_structure(&mut lp, 1);
    lp.nonneg(0);
    lp.le(&[(0, 1.0)], 1.0);

    let verify = |sol: &Solution| -> Result<(f64, LocalModel, f64)> {
        let eta = sol.x[0].clamp(0.0, 1.0);
        let model = layout.model(&sol.x, bob, alice_axes.len())?;
        let target = crate::bloch::behavior(chi, &binary_family(alice_axes, eta), bob)?;
        let residual = model.residual(&target);
        Ok((eta, model, residual))
    };
    let sol = solve_checked(&lp, |s| Ok(verify(s)?.2 <= ACCEPT_RESIDUAL))?;
    let (eta, model, residual) = verify(&sol)?;
    Ok(LhvSolution { eta, model, residual })
}

/// A depolarising branch: noise state parameter and its shrink factor.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoiseBranch {
    pub alpha: f64,
    pub eta_b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShrinkFactors {
    pub branches: Vec<NoiseBranch>,
}

impl ShrinkFactors {
    /// Four-digit values, each slightly below the computed threshold.
    pub fn published() -> Self {
        ShrinkFactors {
            branches: vec![
                NoiseBranch {
                    alpha: 0.0,
                    eta_b: 0.9268,
                },
                NoiseBranch {
                    alpha: 5.0 / 6.0,
                    eta_b: 0.8900,
                },
            ],
        }
    }
}

impl Default for ShrinkFactors {
    fn default() -> Self {
        Self::published()
    }
}

/// Certified visibility for one branch at `(θ, φ)`.
pub fn eta_branch(theta: f64, phi: f64, branch: &NoiseBranch) -> Result<f64> {
    let z = zeta(branch.alpha)?;
    let c = chi(theta, phi, branch.eta_b, &z)?;
    Ok(max_eta_lp(&c, &bob_finite_set())?.eta)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EtaBar {
    pub value: f64,
    /// `α` of the winning branch.
    pub alpha: f64,
    /// `(α, η)` for every branch.
    pub per_branch: Vec<(f64, f64)>,
}

/// Maximum of the per-branch visibilities.
pub fn eta_bar(theta: f64, phi: f64, factors: &ShrinkFactors) -> Result<EtaBar> {
    if factors.branches.is_empty() {
        return Err(Error::Dimension("no noise branches".into()));
    }
    let per_branch = factors
        .branches
        .iter()
        .map(|b| Ok((b.alpha, eta_branch(theta, phi, b)?)))
        .collect::<Result<Vec<_>>>()?;
    let (alpha, value) =
        per_branch.iter().copied().fold(
            (f64::NAN, f64::NEG_INFINITY),
            |acc, (a, v)| if v > acc.1 { (a, v) } else { acc },
        );
    Ok(EtaBar {
        value,
        alpha,
        per_branch,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum LocalCheck {
    Local(LocalModel),
    /// A functional whose value on the behaviour exceeds its local bound.
    Nonlocal {
        functional: BellFunctional,
        value: f64,
        local_bound: f64,
    },
}

/// Decides whether a behaviour admits a local model, returning a violated Bell
/// functional otherwise.
pub fn local_check(p: &Behavior) -> Result<LocalCheck> {
    let s = p.scenario().clone();
    if s.alice_settings() == 0 || s.bob_settings() == 0 {
        return Err(Error::Dimension("empty scenario".into()));
    }
    if !p.is_proper(1e-9) || p.normalization_residual() > 1e-8 {
        return Err(Error::InvalidOperator(
            "behaviour is not a normalised probability table".into(),
        ));
    }
    // Variables: v, then w_λ(b|y) for every Alice map λ.
    let strategies = response_maps(&s.alice_outcomes);
    let per = s.bob_outcomes.iter().sum::<usize>();
    let col: Vec<usize> = s
        .bob_outcomes
        .iter()
        .scan(0, |acc, &n| {
            let o = *acc;
            *acc += n;
            Some(o)
        })
        .collect();
    let var = |l: usize, y: usize, b: usize| 1 + l * per + col[y] + b;
    let n_vars = 1 + strategies.len() * per;
    let mut lp = ConicProgram::new(n_vars);
    lp.maximize(&[(0, 1.0)]);
    let noise = |x: usize, y: usize| 1.0 / (s.alice_outcomes[x] * s.bob_outcomes[y]) as f64;
    let mut rows = Vec::new();
    for x in 0..s.alice_settings() {
        for y in 0..s.bob_settings() {
            for a in 0..s.alice_outcomes[x] {
                for b in 0..s.bob_outcomes[y] {
                    let mut terms: Vec<_> = strategies
                        .iter()
                        .enumerate()
                        .filter(|(_, f)| f[x] == a)
                        .map(|(l, _)| (var(l, y, b), 1.0))
                        .collect();
                    terms.push((0, noise(x, y) - p.get(a, b, x, y)));
                    rows.push((a, b, x, y, lp.eq(&terms, noise(x, y))));
                }
            }
        }
    }
    for l in 0..strategies.len() {
        for y in 1..s.bob_settings() {
            let mut terms: Vec<_> = (0..s.bob_outcomes[y]).map(|b| (var(l, y, b), 1.0)).collect();
            terms.extend((0..s.bob_outcomes[0]).map(|b| (var(l, 0, b), -1.0)));
            lp.eq(&terms, 0.0);
        }
    }
    lp.nonneg_range(1..n_vars);
    lp.le(&[(0, 1.0)], 1.0);

    let mut last = String::new();
    for tol in [Tolerances::tight(), Tolerances::default(), Tolerances::refined()] {
        let sol = lp.solve_with(&tol)?;
        if !sol.is_optimal() {
            last = format!("locality program ended with {:?}", sol.status);
            continue;
        }
        let v = sol.x[0];
        if v >= 1.0 - 1e-9 {
            let tables = (0..strategies.len())
                .map(|l| {
                    (0..s.bob_settings())
                        .map(|y| (0..s.bob_outcomes[y]).map(|b| sol.x[var(l, y, b)].max(0.0)).collect())
                        .collect()
                })
                .collect();
            let model = LocalModel::new(s.clone(), strategies.clone(), tables)?;
            if model.residual(p) <= ACCEPT_RESIDUAL {
                return Ok(LocalCheck::Local(model));
            }
        }
        let mut coefficients = Behavior::zeros(s.clone());
        for &(a, b, x, y, row) in &rows {
            coefficients.set(a, b, x, y, sol.eq_duals[row]);
        }
        for sign in [1.0, -1.0] {
            let values: Vec<f64> = coefficients.values().iter().map(|c| sign * c).collect();
            let functional = BellFunctional::from_values(s.clone(), &values)?;
            let local_bound = functional.enumerated_local_bound()?;
            let value = functional.evaluate(p)?;
            if value > local_bound + 1e-9 {
                let functional = functional.with_local_bound(local_bound);
                return Ok(LocalCheck::Nonlocal {
                    functional,
                    value,
                    local_bound,
                });
            }
        }
        last = format!("locality undecided: visibility {v} without a violated functional");
    }
    Err(Error::Solver(last))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::{behavior, pauli_pair, trine_povm};
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn chi_identity_and_limits() {
        let z = zeta(0.0).unwrap();
        let c = chi(0.4, 0.3, 1.0, &z).unwrap();
        assert!((c.matrix() - schmidt_state(0.4, 0.3).matrix()).abs().max() < 1e-15);
        let eta_b = 0.9268;
        let c = chi(0.4, 0.3, eta_b, &z).unwrap();
        let rho = schmidt_state(0.4, 0.3);
        let rho_a = partial_trace(&rho, Party::Bob);
        let back = c.matrix() * eta_b + kron2(&rho_a.to_matrix(), &z.to_matrix()) * (1.0 - eta_b);
        assert!((back - rho.matrix()).abs().max() < 1e-12);
        assert!(chi(0.4, 0.3, 0.0, &z).is_err());
        let c = chi(FRAC_PI_4, 0.0, eta_b, &z).unwrap();
        assert!(c.eigenvalues().min() < 0.0);
    }

    #[test]
    fn chi_of_product_state() {
        let z = zeta(5.0 / 6.0).unwrap();
        let eta_b = 0.89;
        let phi = 0.7;
        let c = chi(0.0, phi, eta_b, &z).unwrap();
        let a = crate::bloch::rotation(phi) * nalgebra::Vector2::new(1.0, 0.0);
        let proj_a = a * a.transpose();
        let zero = nalgebra::Matrix2::new(1.0, 0.0, 0.0, 0.0);
        let bob = zero / eta_b + z.to_matrix() * (1.0 - 1.0 / eta_b);
        assert!((c.matrix() - kron2(&proj_a, &bob)).abs().max() < 1e-12);
    }

    #[test]
    fn product_state_is_local_at_full_visibility() {
        let rho = schmidt_state(0.0, 0.0);
        let sol = max_eta_lp(&rho, &bob_finite_set()).unwrap();
        assert!((sol.eta - 1.0).abs() < 1e-8);
        assert!(sol.residual <= 1e-8);
    }

    #[test]
    fn working_point_value() {
        let b = eta_bar(FRAC_PI_4, 0.1192, &ShrinkFactors::published()).unwrap();
        assert!((b.value - 0.6808).abs() < 2e-4, "{b:?}");
        assert_eq!(b.alpha, 0.0);
        assert!(b.per_branch.iter().all(|&(_, v)| v <= b.value));
    }

    #[test]
    fn local_model_roundtrip() {
        let scenario = Scenario::new(vec![2, 2], vec![3, 2]);
        let strategies = response_maps(&[2, 2]);
        let tables = vec![
            vec![vec![0.1, 0.0, 0.1], vec![0.05, 0.15]],
            vec![vec![0.3, 0.0, 0.0], vec![0.0, 0.3]],
            vec![vec![0.0, 0.1, 0.0], vec![0.1, 0.0]],
            vec![vec![0.2, 0.1, 0.1], vec![0.25, 0.15]],
        ];
        let model = LocalModel::new(scenario, strategies, tables).unwrap();
        assert!(model.validity_residual() < 1e-15);
        let p = model.reconstruct();
        assert!(matches!(local_check(&p).unwrap(), LocalCheck::Local(_)));
    }

    #[test]
    fn noiseless_trine_coin_is_local() {
        let rho = schmidt_state(FRAC_PI_4, 0.3);
        let p = behavior(&rho, &trine_povm(0.0).unwrap(), &bob_finite_set()).unwrap();
        match local_check(&p).unwrap() {
            LocalCheck::Local(m) => assert!(m.residual(&p) <= 1e-8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn chsh_optimal_behaviour_is_nonlocal() {
        let rho = schmidt_state(FRAC_PI_4, 0.0);
        let alice = pauli_pair(1.0).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bob = vec![
            QubitPovm::binary(Vec2::new(s, s), 1.0),
            QubitPovm::binary(Vec2::new(s, -s), 1.0),
        ];
        let p = behavior(&rho, &alice, &bob).unwrap();
        assert!((BellFunctional::chsh().evaluate(&p).unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
        match local_check(&p).unwrap() {
            LocalCheck::Nonlocal {
                value,
                local_bound,
                functional,
            } => {
                assert!(value > local_bound);
                assert_eq!(functional.enumerated_local_bound().unwrap(), local_bound);
            }
            other => panic!("{other:?}"),
        }
    }
}
