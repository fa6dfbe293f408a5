//! Joint measurability of measurement sets: parent POVMs, the cone program that
//! decides compatibility of real qubit POVMs, visibility thresholds, and the
//! explicit parents of lossy measurement families.

use std::fmt::Debug;

use serde::Serialize;

use crate::bloch::{trine_povm, QubitPovm, RealQubitOperator, Vec2, DEFAULT_TOL};
use crate::conic::ConicProgram;
use crate::error::{check_range, Error, Result};

/// Operations a measurement effect needs for parent-POVM bookkeeping.
pub trait Effect: Clone + Debug {
    fn zero_like(&self) -> Self;
    fn identity_like(&self) -> Self;
    fn plus(&self, other: &Self) -> Self;
    fn scaled(&self, k: f64) -> Self;
    fn is_psd(&self, tol: f64) -> bool;
    fn max_abs_diff(&self, other: &Self) -> f64;
}

impl Effect for RealQubitOperator {
    fn zero_like(&self) -> Self {
        RealQubitOperator::zero()
    }
    fn identity_like(&self) -> Self {
        RealQubitOperator::identity()
    }
    fn plus(&self, other: &Self) -> Self {
        *self + *other
    }
    fn scaled(&self, k: f64) -> Self {
        *self * k
    }
    fn is_psd(&self, tol: f64) -> bool {
        RealQubitOperator::is_psd(self, tol)
    }
    fn max_abs_diff(&self, other: &Self) -> f64 {
        RealQubitOperator::max_abs_diff(self, other)
    }
}

/// Mixed-radix labels, first setting most significant.
fn labels_for(outcome_counts: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = outcome_counts.iter().product();
    (0..total)
        .map(|mut k| {
            let mut label = vec![0; outcome_counts.len()];
            for (slot, &c) in label.iter_mut().zip(outcome_counts).rev() {
                *slot = k % c;
                k /= c;
            }
            label
        })
        .collect()
}

/// A joint measurement with one outcome per tuple `(a_1, …, a_n)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParentPovm<E> {
    outcome_counts: Vec<usize>,
    labels: Vec<Vec<usize>>,
    elements: Vec<E>,
}

/// Residuals of a parent against the measurements it should reproduce.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ParentCheck {
    pub marginal_residual: f64,
    pub completeness_residual: f64,
    pub all_psd: bool,
}

impl ParentCheck {
    pub fn passes(&self, tol: f64) -> bool {
        self.all_psd && self.marginal_residual <= tol && self.completeness_residual <= tol
    }
}

impl<E: Effect> ParentPovm<E> {
    pub fn new(outcome_counts: Vec<usize>, elements: Vec<E>) -> Result<Self> {
        let labels = labels_for(&outcome_counts);
        if labels.len() != elements.len() {
            return Err(Error::Dimension(format!(
                "{} parent elements for {} labels",
                elements.len(),
                labels.len()
            )));
        }
        Ok(ParentPovm {
            outcome_counts,
            labels,
            elements,
        })
    }

    pub fn outcome_counts(&self) -> &[usize] {
        &self.outcome_counts
    }

    pub fn labels(&self) -> &[Vec<usize>] {
        &self.labels
    }

    pub fn elements(&self) -> &[E] {
        &self.elements
    }

    pub fn element(&self, label: &[usize]) -> Option<&E> {
        self.labels.iter().position(|l| l == label).map(|i| &self.elements[i])
    }

    /// `Σ_{labels with a_x = a} M_label`.
    pub fn marginal(&self, x: usize, a: usize) -> E {
        let zero = self.elements[0].zero_like();
        self.labels
            .iter()
            .zip(&self.elements)
            .filter(|(l, _)| l[x] == a)
            .fold(zero, |acc, (_, e)| acc.plus(e))
    }

    /// Marginal residual, completeness and positivity, computed independently of how
    /// the parent was obtained.
    pub fn check(&self, children: &[Vec<E>], psd_tol: f64) -> Result<ParentCheck> {
        if children.len() != self.outcome_counts.len()
            || children.iter().zip(&self.outcome_counts).any(|(c, &k)| c.len() != k)
        {
            return Err(Error::Dimension(
                "children do not match the parent's label shape".into(),
            ));
        }
        let mut marginal_residual: f64 = 0.0;
        for (x, child) in children.iter().enumerate() {
            for (a, effect) in child.iter().enumerate() {
                marginal_residual = marginal_residual.max(self.marginal(x, a).max_abs_diff(effect));
            }
        }
        let zero = self.elements[0].zero_like();
        let total = self.elements.iter().fold(zero, |acc, e| acc.plus(e));
        Ok(ParentCheck {
            marginal_residual,
            completeness_residual: total.max_abs_diff(&total.identity_like()),
            all_psd: self.elements.iter().all(|e| e.is_psd(psd_tol)),
        })
    }
}

/// Result of the compatibility cone program.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum JmOutcome {
    /// A parent reproducing the inputs; `robustness ≥ 1` is the largest visibility
    /// multiplier at which the set would stay compatible.
    Compatible {
        parent: ParentPovm<RealQubitOperator>,
        robustness: f64,
    },
    /// No parent exists: even after shrinking all Bloch vectors by `robustness < 1`
    /// the set is only just compatible. `margin = 1 − robustness > 0`.
    Incompatible { robustness: f64, margin: f64 },
    /// The robustness is within solver accuracy of one.
    Undecided { robustness: f64 },
}

impl JmOutcome {
    pub fn is_compatible(&self) -> bool {
        matches!(self, JmOutcome::Compatible { .. })
    }

    pub fn robustness(&self) -> f64 {
        match self {
            JmOutcome::Compatible { robustness, .. }
            | JmOutcome::Incompatible { robustness, .. }
            | JmOutcome::Undecided { robustness } => *robustness,
        }
    }
}

const MAX_SETTINGS: usize = 6;
const MAX_LABELS: usize = 729;
const ROBUSTNESS_CAP: f64 = 4.0;
const DECISION_MARGIN: f64 = 1e-7;
const PARENT_TOL: f64 = 1e-9;

/// Decides joint measurability of real qubit POVMs.
///
/// Poses the largest `μ` such that the Bloch-contracted set
/// `{(t_b, μ·r_b)}` has a parent whose elements lie in the qubit PSD cone
/// `t ≥ ‖r‖`; the inputs are compatible iff `μ ≥ 1`.
pub fn jm_feasible(povms: &[QubitPovm]) -> Result<JmOutcome> {
    if povms.is_empty() {
        return Err(Error::Dimension("no measurements given".into()));
    }
    if let Some(p) = povms.iter().find(|p| !p.is_valid(DEFAULT_TOL)) {
        return Err(Error::InvalidOperator(format!("not a valid POVM: {p:?}")));
    }
    let counts: Vec<usize> = povms.iter().map(QubitPovm::arity).collect();
    let n_labels: usize = counts.iter().product();
    if povms.len() > MAX_SETTINGS || n_labels > MAX_LABELS {
        return Err(Error::TooLarge(format!(
            "{} settings with {n_labels} parent outcomes (limit {MAX_SETTINGS} / {MAX_LABELS})",
            povms.len()
        )));
    }
    if povms.len() == 1 {
        let parent = ParentPovm::new(counts, povms[0].elements().to_vec())?;
        return Ok(JmOutcome::Compatible {
            parent,
            robustness: f64::INFINITY,
        });
    }

    let labels = labels_for(&counts);
    let children: Vec<Vec<RealQubitOperator>> = povms.iter().map(|p| p.elements().to_vec()).collect();
    let mu = 3 * n_labels;
    let sol = compatibility_program(povms, &labels, None).solve()?;
    if !sol.is_optimal() {
        return Err(Error::Solver(format!(
            "compatibility program ended with {:?}",
            sol.status
        )));
    }
    let robustness = sol.x[mu];
    if robustness <= 1.0 - DECISION_MARGIN {
        return Ok(JmOutcome::Incompatible {
            robustness,
            margin: 1.0 - robustness,
        });
    }
    let unpack = |x: &[f64], k: usize| RealQubitOperator::new(x[3 * k], Vec2::new(x[3 * k + 1], x[3 * k + 2]));

    if robustness >= 1.0 + DECISION_MARGIN {
        // Mix the contracted parent with the product of trace parts to land at μ = 1.
        let w = 1.0 / robustness;
        let mut elements: Vec<RealQubitOperator> = labels
            .iter()
            .enumerate()
            .map(|(k, label)| {
                let trivial_t = 2.0
                    * label
                        .iter()
                        .enumerate()
                        .map(|(x, &a)| 0.5 * povms[x].element(a).t)
                        .product::<f64>();
                unpack(&sol.x, k) * w + RealQubitOperator::new(trivial_t, Vec2::ZERO) * (1.0 - w)
            })
            .collect();
        correct_marginals(&counts, &labels, &mut elements, &children);
        let parent = ParentPovm::new(counts.clone(), elements)?;
        if parent.check(&children, PARENT_TOL)?.passes(PARENT_TOL) {
            return Ok(JmOutcome::Compatible { parent, robustness });
        }
    }

    // Boundary sets (rank-one effects cap μ at 1): solve at μ = 1 directly.
    let exact = compatibility_program(povms, &labels, Some(1.0)).solve()?;
    if exact.is_optimal() {
        let mut elements: Vec<RealQubitOperator> = (0..n_labels).map(|k| unpack(&exact.x, k)).collect();
        correct_marginals(&counts, &labels, &mut elements, &children);
        let parent = ParentPovm::new(counts, elements)?;
        if parent.check(&children, PARENT_TOL)?.passes(PARENT_TOL) {
            return Ok(JmOutcome::Compatible {
                parent,
                robustness: robustness.min(1.0),
            });
        }
    }
    Ok(JmOutcome::Undecided { robustness })
}

/// Largest Bloch contraction `μ` admitting a parent, or plain feasibility when `μ` is fixed.
fn compatibility_program(povms: &[QubitPovm], labels: &[Vec<usize>], fixed_mu: Option<f64>) -> ConicProgram {
    let n_labels = labels.len();
    let mu = 3 * n_labels;
    let mut prog = ConicProgram::new(mu + 1);
    match fixed_mu {
        Some(m) => {
            prog.eq(&[(mu, 1.0)], m);
        }
        None => {
            prog.maximize(&[(mu, 1.0)]);
            prog.le(&[(mu, 1.0)], ROBUSTNESS_CAP);
        }
    }
    for (x, povm) in povms.iter().enumerate() {
        // The last outcome is implied by completeness.
        for a in 0..povm.arity() - 1 {
            let target = povm.element(a);
            let members: Vec<usize> = (0..n_labels).filter(|&k| labels[k][x] == a).collect();
            let t_terms: Vec<_> = members.iter().map(|&k| (3 * k, 1.0)).collect();
            prog.eq(&t_terms, target.t);
            for (comp, r) in [(1, target.r.x1), (2, target.r.x3)] {
                let mut terms: Vec<_> = members.iter().map(|&k| (3 * k + comp, 1.0)).collect();
                terms.push((mu, -r));
                prog.eq(&terms, 0.0);
            }
        }
    }
    for (comp, rhs) in [(0, 2.0), (1, 0.0), (2, 0.0)] {
        let terms: Vec<_> = (0..n_labels).map(|k| (3 * k + comp, 1.0)).collect();
        prog.eq(&terms, rhs);
    }
    for k in 0..n_labels {
        prog.soc(&[3 * k, 3 * k + 1, 3 * k + 2]);
    }
    prog
}

/// Adds the minimal structured correction that makes every marginal exact.
fn correct_marginals<E: Effect>(counts: &[usize], labels: &[Vec<usize>], elements: &mut [E], children: &[Vec<E>]) {
    let n = counts.len();
    let total_labels = labels.len() as f64;
    let zero = elements[0].zero_like();
    let sum = elements.iter().fold(zero.clone(), |acc, e| acc.plus(e));
    let delta_total = sum.identity_like().plus(&sum.scaled(-1.0));

    // Residuals are computed against the uncorrected parent.
    let residuals: Vec<Vec<E>> = children
        .iter()
        .enumerate()
        .map(|(x, child)| {
            child
                .iter()
                .enumerate()
                .map(|(a, target)| {
                    let m = labels
                        .iter()
                        .zip(elements.iter())
                        .filter(|(l, _)| l[x] == a)
                        .fold(zero.clone(), |acc, (_, e)| acc.plus(e));
                    target.plus(&m.scaled(-1.0))
                })
                .collect()
        })
        .collect();
    for (label, e) in labels.iter().zip(elements.iter_mut()) {
        let mut corr = delta_total.scaled(-((n as f64) - 1.0) / total_labels);
        for (x, &a) in label.iter().enumerate() {
            let others = total_labels / counts[x] as f64;
            corr = corr.plus(&residuals[x][a].scaled(1.0 / others));
        }
        *e = e.plus(&corr);
    }
}

/// A bracketed compatibility threshold from bisection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Threshold {
    pub value: f64,
    /// Largest visibility certified compatible.
    pub compatible_at: f64,
    /// Smallest visibility certified incompatible (equals `compatible_at` when saturated).
    pub incompatible_at: f64,
    /// The family stayed compatible up to the upper endpoint.
    pub saturated: bool,
}

/// Bisects the compatibility transition of a family that only loses compatibility as
/// `eta` grows.
pub fn jm_threshold<F>(family: F, lo: f64, hi: f64, tol: f64) -> Result<Threshold>
where
    F: Fn(f64) -> Result<Vec<QubitPovm>>,
{
    if !(lo < hi) || !(tol > 0.0) {
        return Err(Error::NonBracketing(format!(
            "invalid interval [{lo}, {hi}] with tol {tol}"
        )));
    }
    let compatible = |eta: f64| -> Result<bool> { Ok(jm_feasible(&family(eta)?)?.is_compatible()) };
    if !compatible(lo)? {
        return Err(Error::NonBracketing(format!("family already incompatible at {lo}")));
    }
    if compatible(hi)? {
        return Ok(Threshold {
            value: hi,
            compatible_at: hi,
            incompatible_at: hi,
            saturated: true,
        });
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if compatible(mid)? {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(Threshold {
        value: 0.5 * (a + b),
        compatible_at: a,
        incompatible_at: b,
        saturated: false,
    })
}

/// The noisy trine restricted to the settings in `subset`.
pub fn trine_subset(subset: &[usize]) -> impl Fn(f64) -> Result<Vec<QubitPovm>> + '_ {
    move |eta| {
        let trine = trine_povm(eta)?;
        Ok(subset.iter().map(|&x| trine[x].clone()).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairCompatibility {
    pub settings: (usize, usize),
    pub compatible: bool,
    pub robustness: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HollowTriangleReport {
    pub eta: f64,
    pub pairs: Vec<PairCompatibility>,
    pub triple_compatible: bool,
    pub triple_robustness: f64,
    pub is_hollow: bool,
}

/// Pairwise and triplewise compatibility of the noisy trine at `eta`.
pub fn hollow_triangle_check(eta: f64) -> Result<HollowTriangleReport> {
    let trine = trine_povm(eta)?;
    let mut pairs = Vec::new();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let outcome = jm_feasible(&[trine[i].clone(), trine[j].clone()])?;
        pairs.push(PairCompatibility {
            settings: (i, j),
            compatible: outcome.is_compatible(),
            robustness: outcome.robustness(),
        });
    }
    let triple = jm_feasible(&trine)?;
    let triple_compatible = triple.is_compatible();
    let is_hollow = pairs.iter().all(|p| p.compatible) && !triple_compatible;
    Ok(HollowTriangleReport {
        eta,
        pairs,
        triple_compatible,
        triple_robustness: triple.robustness(),
        is_hollow,
    })
}

/// Two-outcome measurements `{η·M_x, 𝟙 − η·M_x}` built from base effects `M_x`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LossyPovmSet<E> {
    base: Vec<E>,
    eta: f64,
}

impl<E: Effect> LossyPovmSet<E> {
    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn base(&self) -> &[E] {
        &self.base
    }

    pub fn len(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    /// `[η·M_x, 𝟙 − η·M_x]`.
    pub fn effects(&self, x: usize) -> Vec<E> {
        let m = self.base[x].scaled(self.eta);
        let rest = m.identity_like().plus(&m.scaled(-1.0));
        vec![m, rest]
    }

    pub fn measurements(&self) -> Vec<Vec<E>> {
        (0..self.base.len()).map(|x| self.effects(x)).collect()
    }
}

impl LossyPovmSet<RealQubitOperator> {
    pub fn to_povms(&self) -> Vec<QubitPovm> {
        self.measurements()
            .into_iter()
            .map(QubitPovm::from_elements_unchecked)
            .collect()
    }
}

fn check_effect<E: Effect>(x: usize, m: &E, tol: f64) -> Result<()> {
    let complement = m.identity_like().plus(&m.scaled(-1.0));
    if m.is_psd(tol) && complement.is_psd(tol) {
        Ok(())
    } else {
        Err(Error::InvalidOperator(format!(
            "base effect {x} is not between 0 and 𝟙"
        )))
    }
}

pub fn lossy_set<E: Effect>(base: &[E], eta: f64) -> Result<LossyPovmSet<E>> {
    check_range("eta", eta, 0.0, 1.0, "[0, 1]")?;
    for (x, m) in base.iter().enumerate() {
        check_effect(x, m, 1e-9)?;
    }
    Ok(LossyPovmSet {
        base: base.to_vec(),
        eta,
    })
}

const MAX_LOSSY: usize = 16;

/// Parent of the lossy set at `η = 1/n`: the single-zero string with the zero at
/// position `x` carries `M_x / n`, the all-ones string carries `Σ_x (𝟙 − M_x) / n`,
/// every other element vanishes.
pub fn parent_lossy<E: Effect>(base: &[E]) -> Result<ParentPovm<E>> {
    let n = base.len();
    if n == 0 {
        return Err(Error::Dimension("no base effects".into()));
    }
    if n > MAX_LOSSY {
        return Err(Error::TooLarge(format!("{n} settings exceed the limit of {MAX_LOSSY}")));
    }
    for (x, m) in base.iter().enumerate() {
        check_effect(x, m, 1e-9)?;
    }
    let inv = 1.0 / n as f64;
    let zero = base[0].zero_like();
    let identity = base[0].identity_like();
    let counts = vec![2; n];
    let elements = labels_for(&counts)
        .iter()
        .map(|label| {
            let zeros: Vec<usize> = (0..n).filter(|&x| label[x] == 0).collect();
            match zeros.as_slice() {
                [] => base
                    .iter()
                    .fold(zero.clone(), |acc, m| acc.plus(&identity.plus(&m.scaled(-1.0))))
                    .scaled(inv),
                [x] => base[*x].scaled(inv),
                _ => zero.clone(),
            }
        })
        .collect();
    ParentPovm::new(counts, elements)
}
