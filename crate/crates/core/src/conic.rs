//! Thin builder over the Clarabel interior-point solver for the linear and
//! second-order-cone programs used throughout the crate.
//!
//! Constraints are collected by cone kind and handed to the solver as
//! `A·x + s = b`, `s ∈ K`. Dual values are returned in the order the
//! constraints were added.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use crate::error::{Error, Result};

pub type Terms<'a> = &'a [(usize, f64)];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub gap: f64,
    pub feasibility: f64,
    pub max_iter: u32,
    /// Iterative refinement of each KKT solve: tolerance and iteration cap.
    pub refine_tol: f64,
    pub refine_iters: u32,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            gap: 1e-10,
            feasibility: 1e-10,
            max_iter: 200,
            refine_tol: 1e-13,
            refine_iters: 10,
        }
    }
}

impl Tolerances {
    /// Default stopping criteria with much stronger linear-system refinement;
    /// rescues runs that stall at reduced accuracy.
    pub fn refined() -> Self {
        Tolerances {
            refine_tol: 1e-15,
            refine_iters: 50,
            ..Self::default()
        }
    }

    /// Tighter settings used for retries.
    pub fn tight() -> Self {
        Tolerances {
            gap: 1e-12,
            feasibility: 1e-12,
            max_iter: 400,
            refine_tol: 1e-15,
            refine_iters: 50,
        }
    }

    fn settings(&self) -> DefaultSettings<f64> {
        DefaultSettingsBuilder::default()
            .verbose(false)
            .tol_gap_abs(self.gap)
            .tol_gap_rel(self.gap)
            .tol_feas(self.feasibility)
            .tol_infeas_abs(self.feasibility)
            .tol_infeas_rel(self.feasibility)
            .max_iter(self.max_iter)
            .max_threads(1)
            .iterative_refinement_reltol(self.refine_tol)
            .iterative_refinement_abstol(self.refine_tol)
            .iterative_refinement_max_iter(self.refine_iters)
            .build()
            .expect("static solver settings are valid")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Status {
    Optimal,
    /// Converged only to the solver's reduced accuracy tolerances.
    AlmostOptimal,
    Infeasible,
    Unbounded,
    Failed(String),
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub status: Status,
    pub x: Vec<f64>,
    /// Multipliers of the equality constraints, in insertion order.
    pub eq_duals: Vec<f64>,
    /// Multipliers of the inequality constraints, in insertion order.
    pub ineq_duals: Vec<f64>,
    /// Value of the objective as posed (maximisation objectives are not negated).
    pub objective: f64,
}

impl Solution {
    pub fn is_optimal(&self) -> bool {
        matches!(self.status, Status::Optimal | Status::AlmostOptimal)
    }
}

#[derive(Clone, Debug)]
struct Row {
    terms: Vec<(usize, f64)>,
    rhs: f64,
}

/// Minimise or maximise a linear objective over equalities, `≤` rows and
/// second-order cones `x[t] ≥ ‖x[rest]‖`.
#[derive(Clone, Debug)]
pub struct ConicProgram {
    n: usize,
    objective: Vec<f64>,
    maximize: bool,
    eqs: Vec<Row>,
    les: Vec<Row>,
    socs: Vec<Vec<usize>>,
}

impl ConicProgram {
    pub fn new(n: usize) -> Self {
        ConicProgram {
            n,
            objective: vec![0.0; n],
            maximize: false,
            eqs: Vec::new(),
            les: Vec::new(),
            socs: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn maximize(&mut self, terms: Terms) {
        self.set_objective(terms, true);
    }

    pub fn minimize(&mut self, terms: Terms) {
        self.set_objective(terms, false);
    }

    fn set_objective(&mut self, terms: Terms, maximize: bool) {
        self.objective.iter_mut().for_each(|c| *c = 0.0);
        for &(j, c) in terms {
            self.objective[j] += c;
        }
        self.maximize = maximize;
    }

    /// `Σ c_j x_j = rhs`; returns the row index into `eq_duals`.
    pub fn eq(&mut self, terms: Terms, rhs: f64) -> usize {
        self.eqs.push(Row {
            terms: terms.to_vec(),
            rhs,
        });
        self.eqs.len() - 1
    }

    /// `Σ c_j x_j ≤ rhs`; returns the row index into `ineq_duals`.
    pub fn le(&mut self, terms: Terms, rhs: f64) -> usize {
        self.les.push(Row {
            terms: terms.to_vec(),
            rhs,
        });
        self.les.len() - 1
    }

    pub fn ge(&mut self, terms: Terms, rhs: f64) -> usize {
        let neg: Vec<_> = terms.iter().map(|&(j, c)| (j, -c)).collect();
        self.le(&neg, -rhs)
    }

    pub fn nonneg(&mut self, j: usize) -> usize {
        self.le(&[(j, -1.0)], 0.0)
    }

    pub fn nonneg_range(&mut self, range: std::ops::Range<usize>) {
        for j in range {
            self.nonneg(j);
        }
    }

    /// `x[vars[0]] ≥ ‖(x[vars[1]], …)‖₂`.
    pub fn soc(&mut self, vars: &[usize]) {
        self.socs.push(vars.to_vec());
    }

    pub fn solve(&self) -> Result<Solution> {
        self.solve_with(&Tolerances::default())
    }

    pub fn solve_with(&self, tol: &Tolerances) -> Result<Solution> {
        let (mut ri, mut ci, mut vals) = (Vec::new(), Vec::new(), Vec::new());
        let mut b = Vec::new();
        let mut row = 0;
        for r in self.eqs.iter().chain(&self.les) {
            for &(j, c) in &r.terms {
                if j >= self.n {
                    return Err(Error::Internal(format!("variable {j} out of range {}", self.n)));
                }
                if c != 0.0 {
                    ri.push(row);
                    ci.push(j);
                    vals.push(c);
                }
            }
            b.push(r.rhs);
            row += 1;
        }
        for cone in &self.socs {
            for &j in cone {
                ri.push(row);
                ci.push(j);
                vals.push(-1.0);
                b.push(0.0);
                row += 1;
            }
        }
        let m = row;
        let a = CscMatrix::new_from_triplets(m, self.n, ri, ci, vals);
        let p = CscMatrix::<f64>::zeros((self.n, self.n));
        let sign = if self.maximize { -1.0 } else { 1.0 };
        let q: Vec<f64> = self.objective.iter().map(|c| sign * c).collect();

        let mut cones = Vec::new();
        if !self.eqs.is_empty() {
            cones.push(SupportedConeT::ZeroConeT(self.eqs.len()));
        }
        if !self.les.is_empty() {
            cones.push(SupportedConeT::NonnegativeConeT(self.les.len()));
        }
        for cone in &self.socs {
            cones.push(SupportedConeT::SecondOrderConeT(cone.len()));
        }

        let mut solver =
            DefaultSolver::new(&p, &q, &a, &b, &cones, tol.settings()).map_err(|e| Error::Solver(format!("{e:?}")))?;
        solver.solve();
        let sol = &solver.solution;
        let status = match sol.status {
            SolverStatus::Solved => Status::Optimal,
            SolverStatus::AlmostSolved => Status::AlmostOptimal,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => Status::Infeasible,
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => Status::Unbounded,
            other => Status::Failed(format!("{other:?}")),
        };
        let ne = self.eqs.len();
        let nl = self.les.len();
        Ok(Solution {
            status,
            x: sol.x.clone(),
            eq_duals: sol.z[..ne].to_vec(),
            ineq_duals: sol.z[ne..ne + nl].to_vec(),
            objective: sign * sol.obj_val,
        })
    }
}
