//! Real qubit and two-qubit operator algebra.
//!
//! Every single-qubit operator in this crate lives in the real XZ plane of the
//! Bloch ball and is stored as `(t, r)` with `Op = (t·𝟙 + r.x1·X + r.x3·Z) / 2`.
//! With that normalisation `Tr Op = t`, the identity is `t = 2`, a qubit state
//! has `t = 1`, and positivity is the exact inequality `t ≥ ‖r‖`.
//!
//! Basis convention: `|0⟩⟨0| = (𝟙 + Z)/2`, so `e3` is the Bloch direction of
//! `|0⟩` and `e1` that of `|+⟩`. Two-qubit matrices use the ordering
//! `|ab⟩ ↦ 2a + b` with Alice's qubit first.

use std::f64::consts::PI;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{Matrix2, Matrix4, Vector4};
use serde::Serialize;

use crate::error::{check_range, Error, Result};

/// Absolute tolerance used by the validity predicates unless a caller passes its own.
pub const DEFAULT_TOL: f64 = 1e-10;

/// A vector in the real Bloch plane spanned by `e1` (X) and `e3` (Z).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Vec2 {
    pub x1: f64,
    pub x3: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x1: 0.0, x3: 0.0 };
    pub const E1: Vec2 = Vec2 { x1: 1.0, x3: 0.0 };
    pub const E3: Vec2 = Vec2 { x1: 0.0, x3: 1.0 };

    pub const fn new(x1: f64, x3: f64) -> Self {
        Vec2 { x1, x3 }
    }

    /// `cos(angle)·e1 + sin(angle)·e3`.
    pub fn from_angle(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Vec2 { x1: c, x3: s }
    }

    pub fn norm(self) -> f64 {
        self.x1.hypot(self.x3)
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x1 * other.x1 + self.x3 * other.x3
    }

    pub fn angle(self) -> f64 {
        self.x3.atan2(self.x1)
    }

    pub fn is_finite(self) -> bool {
        self.x1.is_finite() && self.x3.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x1 + o.x1, self.x3 + o.x3)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x1 - o.x1, self.x3 - o.x3)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x1, -self.x3)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x1 * k, self.x3 * k)
    }
}

/// A real symmetric 2×2 operator `(t·𝟙 + r·σ)/2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct RealQubitOperator {
    pub t: f64,
    pub r: Vec2,
}

impl RealQubitOperator {
    pub const fn new(t: f64, r: Vec2) -> Self {
        RealQubitOperator { t, r }
    }

    pub const fn zero() -> Self {
        RealQubitOperator { t: 0.0, r: Vec2::ZERO }
    }

    pub const fn identity() -> Self {
        RealQubitOperator { t: 2.0, r: Vec2::ZERO }
    }

    /// The maximally mixed state `𝟙/2`.
    pub const fn maximally_mixed() -> Self {
        RealQubitOperator { t: 1.0, r: Vec2::ZERO }
    }

    /// Rank-one projector `(𝟙 + n·σ)/2` onto the Bloch direction `n` (assumed unit).
    pub fn projector(n: Vec2) -> Self {
        RealQubitOperator { t: 1.0, r: n }
    }

    pub fn from_matrix(m: &Matrix2<f64>) -> Result<Self> {
        if (m[(0, 1)] - m[(1, 0)]).abs() > 1e-9 * (1.0 + m.abs().max()) {
            return Err(Error::InvalidOperator(format!("matrix is not symmetric: {m}")));
        }
        let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
        Ok(RealQubitOperator {
            t: m[(0, 0)] + m[(1, 1)],
            r: Vec2::new(2.0 * off, m[(0, 0)] - m[(1, 1)]),
        })
    }

    pub fn to_matrix(&self) -> Matrix2<f64> {
        Matrix2::new(
            0.5 * (self.t + self.r.x3),
            0.5 * self.r.x1,
            0.5 * self.r.x1,
            0.5 * (self.t - self.r.x3),
        )
    }

    pub fn trace(&self) -> f64 {
        self.t
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let n = self.r.norm();
        (0.5 * (self.t - n), 0.5 * (self.t + n))
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.t + tol >= self.r.norm()
    }

    pub fn is_state(&self, tol: f64) -> bool {
        self.is_psd(tol) && (self.t - 1.0).abs() <= tol
    }

    /// Hilbert–Schmidt inner product `Tr(A·B)`.
    pub fn hs_inner(&self, other: &RealQubitOperator) -> f64 {
        0.5 * (self.t * other.t + self.r.dot(other.r))
    }

    pub fn max_abs_diff(&self, other: &RealQubitOperator) -> f64 {
        (self.t - other.t)
            .abs()
            .max((self.r.x1 - other.r.x1).abs())
            .max((self.r.x3 - other.r.x3).abs())
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.r.is_finite()
    }
}

impl Add for RealQubitOperator {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        RealQubitOperator::new(self.t + o.t, self.r + o.r)
    }
}

impl AddAssign for RealQubitOperator {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for RealQubitOperator {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        RealQubitOperator::new(self.t - o.t, self.r - o.r)
    }
}

impl Neg for RealQubitOperator {
    type Output = Self;
    fn neg(self) -> Self {
        RealQubitOperator::new(-self.t, -self.r)
    }
}

impl Mul<f64> for RealQubitOperator {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        RealQubitOperator::new(self.t * k, self.r * k)
    }
}

impl Sum for RealQubitOperator {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(RealQubitOperator::zero(), |a, b| a + b)
    }
}

impl<'a> Sum<&'a RealQubitOperator> for RealQubitOperator {
    fn sum<I: Iterator<Item = &'a Self>>(iter: I) -> Self {
        iter.fold(RealQubitOperator::zero(), |a, b| a + *b)
    }
}

/// An ordered list of real qubit effects summing to the identity.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QubitPovm {
    elements: Vec<RealQubitOperator>,
}

impl QubitPovm {
    pub fn new(elements: Vec<RealQubitOperator>) -> Result<Self> {
        Self::with_tolerance(elements, DEFAULT_TOL)
    }

    pub fn with_tolerance(elements: Vec<RealQubitOperator>, tol: f64) -> Result<Self> {
        let povm = QubitPovm { elements };
        if povm.elements.is_empty() {
            return Err(Error::InvalidOperator("POVM has no elements".into()));
        }
        if let Some((b, e)) = povm
            .elements
            .iter()
            .enumerate()
            .find(|(_, e)| !e.is_finite() || !e.is_psd(tol))
        {
            return Err(Error::InvalidOperator(format!("effect {b} is not positive: {e:?}")));
        }
        let residual = povm.closure_residual();
        if residual > tol {
            return Err(Error::InvalidOperator(format!(
                "effects do not sum to the identity (residual {residual:e})"
            )));
        }
        Ok(povm)
    }

    pub(crate) fn from_elements_unchecked(elements: Vec<RealQubitOperator>) -> Self {
        QubitPovm { elements }
    }

    /// Two-outcome measurement `(𝟙 ± v·n·σ)/2` along the unit direction `n`.
    pub fn binary(n: Vec2, visibility: f64) -> Self {
        QubitPovm {
            elements: vec![
                RealQubitOperator::new(1.0, n * visibility),
                RealQubitOperator::new(1.0, n * -visibility),
            ],
        }
    }

    pub fn arity(&self) -> usize {
        self.elements.len()
    }

    pub fn elements(&self) -> &[RealQubitOperator] {
        &self.elements
    }

    pub fn element(&self, b: usize) -> &RealQubitOperator {
        &self.elements[b]
    }

    /// `max(|Σt − 2|, |Σr|∞)`.
    pub fn closure_residual(&self) -> f64 {
        let total: RealQubitOperator = self.elements.iter().sum();
        total.max_abs_diff(&RealQubitOperator::identity())
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.elements.iter().all(|e| e.is_psd(tol)) && self.closure_residual() <= tol
    }

    /// Pads with exact zero effects up to `arity` outcomes.
    pub fn embed(&self, arity: usize) -> QubitPovm {
        let mut elements = self.elements.clone();
        elements.resize(arity.max(elements.len()), RealQubitOperator::zero());
        QubitPovm { elements }
    }

    /// Outcome relabelling: new outcome `b` is old outcome `perm[b]`.
    pub fn permuted(&self, perm: &[usize]) -> QubitPovm {
        QubitPovm {
            elements: perm.iter().map(|&p| self.elements[p]).collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &QubitPovm) -> f64 {
        if self.arity() != other.arity() {
            return f64::INFINITY;
        }
        self.elements
            .iter()
            .zip(&other.elements)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }
}

/// Bloch directions of the trine: `cos(2xπ/3)·e1 + sin(2xπ/3)·e3`.
pub fn trine_axes() -> [Vec2; 3] {
    [0, 1, 2].map(|x| Vec2::from_angle(2.0 * x as f64 * PI / 3.0))
}

/// The three noisy trine measurements with visibility `eta`.
pub fn trine_povm(eta: f64) -> Result<Vec<QubitPovm>> {
    check_range("eta", eta, 0.0, 1.0, "[0, 1]")?;
    Ok(trine_axes().iter().map(|&a| QubitPovm::binary(a, eta)).collect())
}

/// Noisy X and Z measurements `(𝟙 ± v·X)/2`, `(𝟙 ± v·Z)/2`.
pub fn pauli_pair(v: f64) -> Result<Vec<QubitPovm>> {
    check_range("v", v, 0.0, 1.0, "[0, 1]")?;
    Ok(vec![QubitPovm::binary(Vec2::E1, v), QubitPovm::binary(Vec2::E3, v)])
}

/// Planar rotation `O(φ) = [[cos φ, −sin φ], [sin φ, cos φ]]`.
///
/// Conjugation `O(φ)·A·O(φ)ᵀ` turns the Bloch vector of `A` by `−2φ`.
pub fn rotation(phi: f64) -> Matrix2<f64> {
    let (s, c) = phi.sin_cos();
    Matrix2::new(c, -s, s, c)
}

pub fn kron2(a: &Matrix2<f64>, b: &Matrix2<f64>) -> Matrix4<f64> {
    Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// `(O(φ) ⊗ 𝟙)(cos θ|00⟩ + sin θ|11⟩)`.
pub fn schmidt_vector(theta: f64, phi: f64) -> Vector4<f64> {
    let base = Vector4::new(theta.cos(), 0.0, 0.0, theta.sin());
    kron2(&rotation(phi), &Matrix2::identity()) * base
}

pub fn schmidt_state(theta: f64, phi: f64) -> TwoQubitState {
    TwoQubitState::from_pure(&schmidt_vector(theta, phi))
}

/// Bob's finite measurement set: nine projective binaries along
/// `cos(yπ/9)·e1 + sin(yπ/9)·e3` (embedded as three outcomes with an exact zero
/// third effect) followed by four symmetric ternary measurements.
pub fn bob_finite_set() -> Vec<QubitPovm> {
    let mut set: Vec<QubitPovm> = (0..9)
        .map(|y| QubitPovm::binary(Vec2::from_angle(y as f64 * PI / 9.0), 1.0).embed(3))
        .collect();
    for y in 9..13 {
        let base = y as f64 * PI / 2.0;
        let elements = (0..3)
            .map(|b| {
                let dir = Vec2::from_angle(base + b as f64 * 2.0 * PI / 3.0);
                RealQubitOperator::new(2.0 / 3.0, dir * (2.0 / 3.0))
            })
            .collect();
        set.push(QubitPovm::from_elements_unchecked(elements));
    }
    set
}

/// `ζ_B = α|0⟩⟨0| + (1 − α)𝟙/2`, i.e. `t = 1`, `r = (0, α)`.
pub fn zeta(alpha: f64) -> Result<RealQubitOperator> {
    check_range("alpha", alpha, 0.0, 1.0, "[0, 1]")?;
    Ok(RealQubitOperator::new(1.0, Vec2::new(0.0, alpha)))
}

/// `M_b ↦ η_B·M_b + (1 − η_B)·Tr(M_b ζ)·𝟙`.
pub fn depolarize(povm: &QubitPovm, eta_b: f64, zeta: &RealQubitOperator) -> Result<QubitPovm> {
    check_range("eta_b", eta_b, 0.0, 1.0, "[0, 1]")?;
    if !zeta.is_state(DEFAULT_TOL) {
        return Err(Error::InvalidOperator(format!("zeta is not a qubit state: {zeta:?}")));
    }
    let elements = povm
        .elements()
        .iter()
        .map(|m| {
            let p = m.hs_inner(zeta);
            *m * eta_b + RealQubitOperator::identity() * ((1.0 - eta_b) * p)
        })
        .collect();
    Ok(QubitPovm::from_elements_unchecked(elements))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Party {
    Alice,
    Bob,
}

/// Any 4×4 real symmetric bipartite operator that behaviours can be computed from.
pub trait BipartiteOperator {
    fn matrix(&self) -> &Matrix4<f64>;
}

fn symmetric_residual(m: &Matrix4<f64>) -> f64 {
    (m - m.transpose()).abs().max()
}

/// A two-qubit density matrix with real entries.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoQubitState {
    m: Matrix4<f64>,
}

impl TwoQubitState {
    pub fn new(m: Matrix4<f64>) -> Result<Self> {
        Self::with_tolerance(m, DEFAULT_TOL)
    }

    pub fn with_tolerance(m: Matrix4<f64>, tol: f64) -> Result<Self> {
        if symmetric_residual(&m) > tol {
            return Err(Error::InvalidOperator("state matrix is not symmetric".into()));
        }
        if (m.trace() - 1.0).abs() > tol {
            return Err(Error::InvalidOperator(format!("state trace {} != 1", m.trace())));
        }
        let min_eig = m.symmetric_eigenvalues().min();
        if min_eig < -tol {
            return Err(Error::InvalidOperator(format!("state has eigenvalue {min_eig:e} < 0")));
        }
        Ok(TwoQubitState { m })
    }

    pub fn from_pure(v: &Vector4<f64>) -> Self {
        let v = v / v.norm();
        TwoQubitState { m: v * v.transpose() }
    }

    /// `w·self + (1 − w)·other`.
    pub fn mix(&self, other: &TwoQubitState, w: f64) -> Result<TwoQubitState> {
        check_range("weight", w, 0.0, 1.0, "[0, 1]")?;
        Ok(TwoQubitState {
            m: self.m * w + other.m * (1.0 - w),
        })
    }

    pub fn eigenvalues(&self) -> Vector4<f64> {
        self.m.symmetric_eigenvalues()
    }

    pub fn into_pseudo(self) -> PseudoState {
        PseudoState { m: self.m }
    }
}

impl BipartiteOperator for TwoQubitState {
    fn matrix(&self) -> &Matrix4<f64> {
        &self.m
    }
}

/// A unit-trace real symmetric 4×4 operator with no positivity requirement.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoState {
    m: Matrix4<f64>,
}

impl PseudoState {
    pub fn new(m: Matrix4<f64>) -> Result<Self> {
        if symmetric_residual(&m) > DEFAULT_TOL {
            return Err(Error::InvalidOperator("pseudo-state matrix is not symmetric".into()));
        }
        if (m.trace() - 1.0).abs() > DEFAULT_TOL {
            return Err(Error::InvalidOperator(format!("pseudo-state trace {} != 1", m.trace())));
        }
        Ok(PseudoState { m })
    }

    pub fn eigenvalues(&self) -> Vector4<f64> {
        self.m.symmetric_eigenvalues()
    }
}

impl BipartiteOperator for PseudoState {
    fn matrix(&self) -> &Matrix4<f64> {
        &self.m
    }
}

/// Reduced operator after tracing out `traced`.
pub fn partial_trace(state: &impl BipartiteOperator, traced: Party) -> RealQubitOperator {
    let m = state.matrix();
    let reduced = Matrix2::from_fn(|i, j| match traced {
        Party::Bob => m[(2 * i, 2 * j)] + m[(2 * i + 1, 2 * j + 1)],
        Party::Alice => m[(i, j)] + m[(2 + i, 2 + j)],
    });
    // Partial traces of symmetric matrices are symmetric.
    RealQubitOperator::from_matrix(&reduced).expect("partial trace of a symmetric matrix")
}

/// Partial transpose with respect to `party`.
pub fn partial_transpose(m: &Matrix4<f64>, party: Party) -> Matrix4<f64> {
    Matrix4::from_fn(|r, c| {
        let (a, b) = (r / 2, r % 2);
        let (a2, b2) = (c / 2, c % 2);
        match party {
            Party::Bob => m[(2 * a + b2, 2 * a2 + b)],
            Party::Alice => m[(2 * a2 + b, 2 * a + b2)],
        }
    })
}

/// `Tr((A ⊗ B)·ρ)`.
pub fn expectation(rho: &Matrix4<f64>, a: &RealQubitOperator, b: &RealQubitOperator) -> f64 {
    let k = kron2(&a.to_matrix(), &b.to_matrix());
    k.component_mul(&rho.transpose()).sum()
}

/// Settings and outcome counts for both parties.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Scenario {
    pub alice_outcomes: Vec<usize>,
    pub bob_outcomes: Vec<usize>,
}

impl Scenario {
    pub fn new(alice_outcomes: Vec<usize>, bob_outcomes: Vec<usize>) -> Self {
        Scenario {
            alice_outcomes,
            bob_outcomes,
        }
    }

    pub fn alice_settings(&self) -> usize {
        self.alice_outcomes.len()
    }

    pub fn bob_settings(&self) -> usize {
        self.bob_outcomes.len()
    }

    fn block_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.alice_settings() * self.bob_settings() + 1);
        let mut acc = 0;
        for &oa in &self.alice_outcomes {
            for &ob in &self.bob_outcomes {
                offsets.push(acc);
                acc += oa * ob;
            }
        }
        offsets.push(acc);
        offsets
    }
}

/// A conditional table `p(ab|xy)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Behavior {
    scenario: Scenario,
    #[serde(skip)]
    offsets: Vec<usize>,
    data: Vec<f64>,
}

impl Behavior {
    pub fn zeros(scenario: Scenario) -> Self {
        let offsets = scenario.block_offsets();
        let len = *offsets.last().unwrap_or(&0);
        Behavior {
            scenario,
            offsets,
            data: vec![0.0; len],
        }
    }

    pub fn from_fn(scenario: Scenario, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut beh = Behavior::zeros(scenario);
        for x in 0..beh.scenario.alice_settings() {
            for y in 0..beh.scenario.bob_settings() {
                for a in 0..beh.scenario.alice_outcomes[x] {
                    for b in 0..beh.scenario.bob_outcomes[y] {
                        let v = f(a, b, x, y);
                        beh.set(a, b, x, y, v);
                    }
                }
            }
        }
        beh
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    fn index(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        let block = x * self.scenario.bob_settings() + y;
        self.offsets[block] + a * self.scenario.bob_outcomes[y] + b
    }

    pub fn get(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.data[self.index(a, b, x, y)]
    }

    pub fn set(&mut self, a: usize, b: usize, x: usize, y: usize, v: f64) {
        let i = self.index(a, b, x, y);
        self.data[i] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn is_proper(&self, tol: f64) -> bool {
        self.data.iter().all(|&p| p >= -tol)
    }

    /// `p_A(a|x)` computed through Bob's setting `y`.
    pub fn alice_marginal(&self, a: usize, x: usize, y: usize) -> f64 {
        (0..self.scenario.bob_outcomes[y]).map(|b| self.get(a, b, x, y)).sum()
    }

    pub fn bob_marginal(&self, b: usize, y: usize, x: usize) -> f64 {
        (0..self.scenario.alice_outcomes[x]).map(|a| self.get(a, b, x, y)).sum()
    }

    /// Largest deviation of any `Σ_ab p(ab|xy)` from one.
    pub fn normalization_residual(&self) -> f64 {
        let (na, nb) = (self.scenario.alice_settings(), self.scenario.bob_settings());
        let mut worst: f64 = 0.0;
        for block in 0..na * nb {
            let s: f64 = self.data[self.offsets[block]..self.offsets[block + 1]].iter().sum();
            worst = worst.max((s - 1.0).abs());
        }
        worst
    }

    /// Largest dependence of either party's marginal on the other party's setting.
    pub fn no_signalling_residual(&self) -> f64 {
        let (na, nb) = (self.scenario.alice_settings(), self.scenario.bob_settings());
        let mut worst: f64 = 0.0;
        for x in 0..na {
            for a in 0..self.scenario.alice_outcomes[x] {
                let first = self.alice_marginal(a, x, 0);
                for y in 1..nb {
                    worst = worst.max((self.alice_marginal(a, x, y) - first).abs());
                }
            }
        }
        for y in 0..nb {
            for b in 0..self.scenario.bob_outcomes[y] {
                let first = self.bob_marginal(b, y, 0);
                for x in 1..na {
                    worst = worst.max((self.bob_marginal(b, y, x) - first).abs());
                }
            }
        }
        worst
    }

    pub fn max_abs_diff(&self, other: &Behavior) -> f64 {
        if self.scenario != other.scenario {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `p(ab|xy) = Tr((M_{a|x} ⊗ M_{b|y})·state)`.
pub fn behavior(state: &impl BipartiteOperator, alice: &[QubitPovm], bob: &[QubitPovm]) -> Result<Behavior> {
    if alice.is_empty() || bob.is_empty() {
        return Err(Error::Dimension("both parties need at least one measurement".into()));
    }
    let scenario = Scenario::new(
        alice.iter().map(QubitPovm::arity).collect(),
        bob.iter().map(QubitPovm::arity).collect(),
    );
    let rho = state.matrix();
    Ok(Behavior::from_fn(scenario, |a, b, x, y| {
        expectation(rho, alice[x].element(a), bob[y].element(b))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EPS: f64 = 1e-12;

    #[test]
    fn trine_noise_limits() {
        for povm in trine_povm(0.0).unwrap() {
            for e in povm.elements() {
                assert!(e.max_abs_diff(&RealQubitOperator::maximally_mixed()) < EPS);
            }
        }
        let sharp = trine_povm(1.0).unwrap();
        assert!(sharp[0].element(0).max_abs_diff(&RealQubitOperator::new(1.0, Vec2::E1)) < EPS);
        assert!(
            sharp[0]
                .element(1)
                .max_abs_diff(&RealQubitOperator::new(1.0, -Vec2::E1))
                < EPS
        );
    }

    #[test]
    fn trine_at_working_visibility() {
        let t = trine_povm(0.67).unwrap();
        let r = t[1].element(0).r;
        assert!((r.x1 - (-0.335)).abs() < EPS);
        assert!((r.x3 - 0.67 * (3f64.sqrt() / 2.0)).abs() < EPS);
        assert!(t.iter().all(|p| p.is_valid(DEFAULT_TOL)));
    }

    #[test]
    fn visibilities_are_range_checked() {
        assert!(matches!(trine_povm(1.2), Err(Error::Domain { .. })));
        assert!(trine_povm(-0.01).is_err());
        assert!(pauli_pair(f64::NAN).is_err());
        assert!(zeta(1.5).is_err());
    }

    #[test]
    fn pauli_pair_values() {
        let p = pauli_pair(0.8).unwrap();
        assert_eq!(*p[0].element(0), RealQubitOperator::new(1.0, Vec2::new(0.8, 0.0)));
        assert_eq!(*p[1].element(1), RealQubitOperator::new(1.0, Vec2::new(0.0, -0.8)));
        for e in pauli_pair(0.0).unwrap().iter().flat_map(|p| p.elements().to_vec()) {
            assert_eq!(e, RealQubitOperator::maximally_mixed());
        }
    }

    #[test]
    fn bloch_matrix_roundtrip_and_convention() {
        let ket0 = RealQubitOperator::new(1.0, Vec2::E3).to_matrix();
        assert_eq!(ket0, Matrix2::new(1.0, 0.0, 0.0, 0.0));
        let op = RealQubitOperator::new(0.7, Vec2::new(-0.2, 0.4));
        let back = RealQubitOperator::from_matrix(&op.to_matrix()).unwrap();
        assert!(back.max_abs_diff(&op) < EPS);
        assert!(RealQubitOperator::from_matrix(&Matrix2::new(1.0, 0.5, 0.0, 1.0)).is_err());
    }

    #[test]
    fn psd_predicate_matches_eigenvalues() {
        let op = RealQubitOperator::new(1.0, Vec2::new(0.6, 0.8));
        assert!(op.is_psd(0.0));
        assert!(op.eigenvalues().0.abs() < EPS);
        assert!(!RealQubitOperator::new(0.99, Vec2::new(0.6, 0.8)).is_psd(1e-10));
    }

    #[test]
    fn schmidt_state_examples() {
        let prod = schmidt_state(0.0, 0.0);
        let mut expected = Matrix4::zeros();
        expected[(0, 0)] = 1.0;
        assert!((prod.matrix() - expected).abs().max() < EPS);

        let bell = schmidt_state(PI / 4.0, 0.0);
        for party in [Party::Alice, Party::Bob] {
            let red = partial_trace(&bell, party);
            assert!(red.max_abs_diff(&RealQubitOperator::maximally_mixed()) < EPS);
        }

        let s = schmidt_state(0.3, 0.0);
        let ra = partial_trace(&s, Party::Bob).to_matrix();
        assert!((ra[(0, 0)] - 0.3f64.cos().powi(2)).abs() < EPS);
        assert!((ra[(1, 1)] - 0.3f64.sin().powi(2)).abs() < EPS);
        assert!(ra[(0, 1)].abs() < EPS);
        assert!((s.matrix().trace() - 1.0).abs() < EPS);
        assert!(TwoQubitState::new(*s.matrix()).is_ok());
    }

    #[test]
    fn reduced_state_rotates_with_phi() {
        let (theta, phi) = (0.37, 1.1);
        let o = rotation(phi);
        let r0 = partial_trace(&schmidt_state(theta, 0.0), Party::Bob).to_matrix();
        let rp = partial_trace(&schmidt_state(theta, phi), Party::Bob).to_matrix();
        assert!((o * r0 * o.transpose() - rp).abs().max() < EPS);
        let bob0 = partial_trace(&schmidt_state(theta, 0.0), Party::Alice);
        let bobp = partial_trace(&schmidt_state(theta, phi), Party::Alice);
        assert!(bob0.max_abs_diff(&bobp) < EPS);
    }

    #[test]
    fn finite_set_shape() {
        let set = bob_finite_set();
        assert_eq!(set.len(), 13);
        assert!(set.iter().all(|p| p.arity() == 3 && p.is_valid(DEFAULT_TOL)));
        assert!(set[0].element(0).max_abs_diff(&RealQubitOperator::new(1.0, Vec2::E1)) < EPS);
        assert_eq!(*set[4].element(2), RealQubitOperator::zero());
        let y9 = set[9].element(0);
        assert!(y9.max_abs_diff(&RealQubitOperator::new(2.0 / 3.0, Vec2::E3 * (2.0 / 3.0))) < EPS);
        for p in &set[9..] {
            assert!(p.elements().iter().all(|e| (e.t - 2.0 / 3.0).abs() < EPS));
        }
    }

    #[test]
    fn depolarize_limits() {
        let z = zeta(0.3).unwrap();
        let pauli = &pauli_pair(1.0).unwrap()[1];
        assert!(depolarize(pauli, 1.0, &z).unwrap().max_abs_diff(pauli) < EPS);
        let trivial = depolarize(pauli, 0.0, &z).unwrap();
        for (m, d) in pauli.elements().iter().zip(trivial.elements()) {
            assert!(d.r.norm() < EPS);
            assert!((d.t - 2.0 * m.hs_inner(&z)).abs() < EPS);
        }
        let contracted = depolarize(&pauli_pair(1.0).unwrap()[0], 0.9268, &zeta(0.0).unwrap()).unwrap();
        assert!(
            contracted
                .element(0)
                .max_abs_diff(&RealQubitOperator::new(1.0, Vec2::new(0.9268, 0.0)))
                < EPS
        );
        assert!(contracted.is_valid(DEFAULT_TOL));
        let bad = RealQubitOperator::new(1.0, Vec2::new(0.0, 1.5));
        assert!(depolarize(pauli, 0.5, &bad).is_err());
    }

    #[test]
    fn zeta_examples() {
        assert_eq!(zeta(0.0).unwrap(), RealQubitOperator::maximally_mixed());
        assert_eq!(zeta(5.0 / 6.0).unwrap().r, Vec2::new(0.0, 5.0 / 6.0));
        assert_eq!(zeta(1.0).unwrap().to_matrix(), Matrix2::new(1.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn behavior_on_product_state() {
        let prod = schmidt_state(0.0, 0.0);
        let trine = trine_povm(0.67).unwrap();
        let z = pauli_pair(1.0).unwrap()[1].clone();
        let beh = behavior(&prod, &trine, &[z]).unwrap();
        for x in 0..3 {
            let expected = 0.5 * (1.0 + 0.67 * (2.0 * x as f64 * PI / 3.0).sin());
            assert!((beh.get(0, 0, x, 0) - expected).abs() < EPS);
        }
        assert!(beh.normalization_residual() < EPS);
    }

    #[test]
    fn behavior_with_blind_alice() {
        let rho = schmidt_state(0.4, 0.9);
        let bob = bob_finite_set();
        let beh = behavior(&rho, &trine_povm(0.0).unwrap(), &bob).unwrap();
        let rho_b = partial_trace(&rho, Party::Alice);
        for x in 0..3 {
            for (y, m) in bob.iter().enumerate() {
                for b in 0..3 {
                    let pb = m.element(b).hs_inner(&rho_b);
                    assert!((beh.get(0, b, x, y) - 0.5 * pb).abs() < EPS);
                    assert!((beh.get(1, b, x, y) - 0.5 * pb).abs() < EPS);
                }
            }
        }
        assert!(beh.no_signalling_residual() < EPS);
    }

    #[test]
    fn pseudo_state_can_give_negative_entries() {
        let mut m = Matrix4::zeros();
        m[(0, 0)] = 1.5;
        m[(3, 3)] = -0.5;
        let chi = PseudoState::new(m).unwrap();
        let beh = behavior(&chi, &pauli_pair(1.0).unwrap(), &pauli_pair(1.0).unwrap()).unwrap();
        assert!(!beh.is_proper(1e-12));
        assert!(beh.normalization_residual() < EPS);
        assert!(TwoQubitState::new(m).is_err());
    }

    #[test]
    fn behavior_rejects_empty_lists() {
        assert!(matches!(
            behavior(&schmidt_state(0.1, 0.0), &[], &bob_finite_set()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn partial_transpose_is_involution() {
        let rho = schmidt_state(0.5, 0.3);
        let pt = partial_transpose(rho.matrix(), Party::Bob);
        assert!((partial_transpose(&pt, Party::Bob) - rho.matrix()).abs().max() < EPS);
        // The transpose on both sides is the full transpose.
        let both = partial_transpose(&pt, Party::Alice);
        assert!((both - rho.matrix().transpose()).abs().max() < EPS);
    }
}
