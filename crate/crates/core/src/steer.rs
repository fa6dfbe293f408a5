//! Assemblages steered onto Alice by Bob's measurements, their realification,
//! and the GHJW reconstruction of a state and measurements that produce them.

use nalgebra::{Complex, Matrix2, Matrix4, SymmetricEigen};
use serde::Serialize;

use crate::bell::BellFunctional;
use crate::bloch::{kron2, rotation, schmidt_state, BipartiteOperator, QubitPovm, RealQubitOperator, TwoQubitState};
use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

const NS_TOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;

/// `σ_{b|y}`, indexed `[y][b]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assemblage {
    members: Vec<Vec<RealQubitOperator>>,
}

impl Assemblage {
    /// Checks positivity, unit trace and no-signalling.
    pub fn new(members: Vec<Vec<RealQubitOperator>>) -> Result<Self> {
        let asm = Assemblage { members };
        if asm.members.is_empty() || asm.members.iter().any(|m| m.is_empty()) {
            return Err(Error::Dimension(
                "assemblage needs at least one outcome per setting".into(),
            ));
        }
        if let Some(m) = asm.members.iter().flatten().find(|m| !m.is_psd(PSD_TOL)) {
            return Err(Error::InvalidOperator(format!("member {m:?} is not positive")));
        }
        let trace = asm.reduced().trace();
        if (trace - 1.0).abs() > NS_TOL {
            return Err(Error::InvalidOperator(format!("total trace {trace}")));
        }
        let ns = asm.no_signalling_residual();
        if ns > NS_TOL {
            return Err(Error::InvalidOperator(format!(
                "signalling assemblage (residual {ns:e})"
            )));
        }
        Ok(asm)
    }

    pub fn settings(&self) -> usize {
        self.members.len()
    }

    pub fn outcomes(&self, y: usize) -> usize {
        self.members[y].len()
    }

    pub fn member(&self, b: usize, y: usize) -> &RealQubitOperator {
        &self.members[y][b]
    }

    pub fn members(&self) -> &[Vec<RealQubitOperator>] {
        &self.members
    }

    /// `ρ_A = Σ_b σ_{b|0}`.
    pub fn reduced(&self) -> RealQubitOperator {
        self.members[0].iter().sum()
    }

    pub fn no_signalling_residual(&self) -> f64 {
        let first = self.reduced();
        self.members
            .iter()
            .map(|m| m.iter().sum::<RealQubitOperator>().max_abs_diff(&first))
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Assemblage) -> f64 {
        if self.members.len() != other.members.len()
            || self.members.iter().zip(&other.members).any(|(a, b)| a.len() != b.len())
        {
            return f64::INFINITY;
        }
        self.members
            .iter()
            .flatten()
            .zip(other.members.iter().flatten())
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }
}

/// `σ_{b|y} = Tr_B[ρ·(𝟙 ⊗ M_{b|y})]`.
pub fn assemblage(state: &TwoQubitState, bob: &[QubitPovm]) -> Result<Assemblage> {
    if bob.is_empty() {
        return Err(Error::Dimension("no measurements for Bob".into()));
    }
    let m = state.matrix();
    let members = bob
        .iter()
        .map(|p| {
            p.elements()
                .iter()
                .map(|e| {
                    let k = m * kron2(&Matrix2::identity(), &e.to_matrix());
                    RealQubitOperator::from_matrix(&trace_bob(&k))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Assemblage::new(members)
}

fn trace_bob<T: nalgebra::Scalar + std::ops::Add<Output = T> + Copy>(k: &Matrix4<T>) -> Matrix2<T> {
    Matrix2::from_fn(|i, j| k[(2 * i, 2 * j)] + k[(2 * i + 1, 2 * j + 1)])
}

/// An assemblage with Hermitian complex members, as produced by complex
/// measurements; the intake side of [`realify`].
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexAssemblage {
    pub members: Vec<Vec<Matrix2<C64>>>,
}

impl ComplexAssemblage {
    pub fn from_real(asm: &Assemblage) -> Self {
        ComplexAssemblage {
            members: asm
                .members
                .iter()
                .map(|m| m.iter().map(|e| e.to_matrix().map(|v| C64::new(v, 0.0))).collect())
                .collect(),
        }
    }

    /// Largest `|Im σ|` entry: zero exactly when every member is real.
    pub fn imaginary_part(&self) -> f64 {
        self.members
            .iter()
            .flatten()
            .flat_map(|m| m.iter().map(|z| z.im.abs()))
            .fold(0.0, f64::max)
    }
}

fn kron2c(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix4<C64> {
    Matrix4::from_fn(|r, c| a[(r / 2, c / 2)] * b[(r % 2, c % 2)])
}

/// Hermitian-positivity of a 2×2 complex matrix.
fn hermitian_psd(m: &Matrix2<C64>, tol: f64) -> bool {
    let herm = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max) <= tol;
    let (a, d) = (m[(0, 0)].re, m[(1, 1)].re);
    let det = a * d - m[(0, 1)].norm_sqr();
    herm && a >= -tol && d >= -tol && det >= -tol
}

/// Assemblage of a complex state under complex Bob effects (each `[y][b]`).
pub fn complex_assemblage(rho: &Matrix4<C64>, bob: &[Vec<Matrix2<C64>>]) -> Result<ComplexAssemblage> {
    if bob.is_empty() || bob.iter().any(|p| p.is_empty()) {
        return Err(Error::Dimension("empty measurement".into()));
    }
    for (y, p) in bob.iter().enumerate() {
        let sum: Matrix2<C64> = p.iter().sum();
        if (sum - Matrix2::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max) > 1e-9
            || p.iter().any(|e| !hermitian_psd(e, 1e-9))
        {
            return Err(Error::InvalidOperator(format!("measurement {y} is not a POVM")));
        }
    }
    let members = bob
        .iter()
        .map(|p| {
            p.iter()
                .map(|e| trace_bob(&(rho * kron2c(&Matrix2::identity(), e))))
                .collect()
        })
        .collect();
    Ok(ComplexAssemblage { members })
}

/// `σ ↦ (σ + σ*)/2` member-wise.
pub fn realify(asm: &ComplexAssemblage) -> Result<Assemblage> {
    let members = asm
        .members
        .iter()
        .map(|m| {
            m.iter()
                .map(|s| {
                    let re = s.map(|z| z.re);
                    // Hermitian input makes the real part symmetric.
                    RealQubitOperator::from_matrix(&(0.5 * (re + re.transpose())))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Assemblage::new(members)
}

/// `F_{b|y} = Σ_{a,x} c_{ab|xy}·M_{a|x}`, indexed `[y][b]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SteeringFunctional {
    pub operators: Vec<Vec<RealQubitOperator>>,
}

impl SteeringFunctional {
    fn check_shape(&self, shape: impl ExactSizeIterator<Item = usize>) -> Result<()> {
        let ours: Vec<usize> = self.operators.iter().map(Vec::len).collect();
        let theirs: Vec<usize> = shape.collect();
        if ours != theirs {
            return Err(Error::Dimension(format!(
                "functional shape {ours:?}, assemblage shape {theirs:?}"
            )));
        }
        Ok(())
    }

    /// `β = Σ_{b,y} Tr(F_{b|y}·σ_{b|y})`.
    pub fn evaluate(&self, asm: &Assemblage) -> Result<f64> {
        self.check_shape(asm.members.iter().map(Vec::len))?;
        Ok(self
            .operators
            .iter()
            .flatten()
            .zip(asm.members.iter().flatten())
            .map(|(f, s)| f.hs_inner(s))
            .sum())
    }

    /// β on a complex assemblage; for these real symmetric `F` only `Re σ` contributes.
    pub fn evaluate_complex(&self, asm: &ComplexAssemblage) -> Result<f64> {
        self.check_shape(asm.members.iter().map(Vec::len))?;
        Ok(self
            .operators
            .iter()
            .flatten()
            .zip(asm.members.iter().flatten())
            .map(|(f, s)| (f.to_matrix().map(|v| C64::new(v, 0.0)) * s).trace().re)
            .sum())
    }
}

pub fn steering_functional(c: &BellFunctional, alice: &[QubitPovm]) -> Result<SteeringFunctional> {
    let s = c.scenario();
    if alice.len() != s.alice_settings() || alice.iter().zip(&s.alice_outcomes).any(|(p, &k)| p.arity() != k) {
        return Err(Error::Dimension(
            "Alice's measurements do not match the functional".into(),
        ));
    }
    let operators = (0..s.bob_settings())
        .map(|y| {
            (0..s.bob_outcomes[y])
                .map(|b| {
                    let mut f = RealQubitOperator::zero();
                    for (x, p) in alice.iter().enumerate() {
                        for (a, e) in p.elements().iter().enumerate() {
                            f += *e * c.coefficient(a, b, x, y);
                        }
                    }
                    f
                })
                .collect()
        })
        .collect();
    Ok(SteeringFunctional { operators })
}

/// Output of [`ghjw_reconstruct`].
#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub state: TwoQubitState,
    pub bob: Vec<QubitPovm>,
    /// Schmidt angle and local rotation of the recovered state.
    pub theta: f64,
    pub phi: f64,
}

/// Smallest eigenvalue of `ρ_A` accepted as full rank.
pub const RANK_TOL: f64 = 1e-12;

/// Purifies `ρ_A = O(φ)·diag(λ)·O(φ)ᵀ` as `(O(φ) ⊗ 𝟙)Σ√λ_i|ii⟩` and sets
/// `⟨j|M_{b|y}|i⟩ = ⟨i|σ'_{b|y}|j⟩/√(λ_iλ_j)` with `σ' = O(φ)ᵀσO(φ)`.
pub fn ghjw_reconstruct(asm: &Assemblage) -> Result<Reconstruction> {
    let rho_a = asm.reduced().to_matrix();
    let eig = SymmetricEigen::new(rho_a);
    let (i0, i1) = if eig.eigenvalues[0] >= eig.eigenvalues[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    let lambda = [eig.eigenvalues[i0], eig.eigenvalues[i1]];
    if lambda[1] <= RANK_TOL {
        return Err(Error::InvalidOperator(format!(
            "reduced state is rank deficient (eigenvalues {:e}, {:e})",
            lambda[0], lambda[1]
        )));
    }
    let mut v = eig.eigenvectors.column(i0).into_owned();
    let larger = if v[0].abs() >= v[1].abs() { v[0] } else { v[1] };
    if larger < 0.0 {
        v = -v;
    }
    let phi = v[1].atan2(v[0]);
    let o = rotation(phi);
    let theta = lambda[0].sqrt().clamp(0.0, 1.0).acos();
    let scale = Matrix2::from_fn(|i, j| 1.0 / (lambda[i] * lambda[j]).sqrt());
    let bob = asm
        .members
        .iter()
        .map(|m| {
            let elements = m
                .iter()
                .map(|s| {
                    let rotated = o.transpose() * s.to_matrix() * o;
                    RealQubitOperator::from_matrix(&rotated.transpose().component_mul(&scale))
                })
                .collect::<Result<Vec<_>>>()?;
            QubitPovm::with_tolerance(elements, 1e-8)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Reconstruction {
        state: schmidt_state(theta, phi),
        bob,
        theta,
        phi,
    })
}
