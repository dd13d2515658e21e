//! Lasserre-hierarchy relaxations of quadratic integer programs: moment
//! index enumeration, SDP assembly and solving, vector extraction, and
//! consistency auditing.
//!
//! The problem shape is: minimize x̃ᵀAx̃ over proper labelings x̃ ∈ {0,1}^{V×[k]}
//! (one label per vertex) with A PSD, subject to linear constraints
//! Σ b_i(u,g)·x̃_u(g) {≥,=} c_i, coordinates forced to zero, and general
//! monomial equalities. The r′-round relaxation replaces labelings by the
//! moment vector z and the PSD moment matrix 𝒴(z).

pub mod index;
pub mod poly;
mod solution;
mod solve;

pub use index::{build_moment_index, IndexError, MomentIndex, MonomialConstraint};
pub use poly::{AffineBasis, AffineExpr, Assign, Poly};
pub use solution::{
    check_consistency, extract_vectors, ConsistencyReport, LasserreSolution, SolutionDocument,
    SolverDiagnostics, VectorFamily,
};
pub use solve::{solve_sdp, SolveOptions};

use nalgebra::DMatrix;
use thiserror::Error;

/// Sense of a lifted linear constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Sense {
    Eq,
    Ge,
}

/// One linear constraint Σ b(u,g)·x̃_u(g) {≥,=} c with at most one labeled
/// coefficient per vertex.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct LinearConstraint {
    /// Sparse coefficients (vertex, label, weight).
    pub b: Vec<(usize, usize, f64)>,
    pub c: f64,
    pub sense: Sense,
}

/// A quadratic integer program with PSD objective over V×[k].
#[derive(Debug, Clone)]
pub struct QipInstance {
    pub n: usize,
    pub k: usize,
    /// PSD objective over V×[k]; index (u,i) sits at row u·k + i.
    pub objective: DMatrix<f64>,
    pub linear: Vec<LinearConstraint>,
    /// Coordinates forced to zero (monomial x_u(i) = 0).
    pub forbidden: Vec<(usize, usize)>,
    /// General monomial equalities.
    pub monomials: Vec<MonomialConstraint>,
    /// Magnitude bound W on nonzero constraint coefficients (1/W ≤ |b| ≤ 1).
    pub w_bound: f64,
    /// Solver accuracy target.
    pub eps0: f64,
}

/// Errors from instance validation or solving.
#[derive(Debug, Error)]
pub enum LasserreError {
    #[error("objective matrix must be {expected}×{expected} (n·k), got {rows}×{cols}")]
    ObjectiveShape { expected: usize, rows: usize, cols: usize },
    #[error("objective is not PSD: min eigenvalue {min_eig:.3e}")]
    ObjectiveNotPsd { min_eig: f64 },
    #[error("constraint {row} has |b| = {value} > 1")]
    CoefficientTooLarge { row: usize, value: f64 },
    #[error("constraint {row} touches labels {first} and {second} of vertex {vertex}")]
    TwoLabelsPerVertex { row: usize, vertex: usize, first: usize, second: usize },
    #[error("constraint {row} references vertex {vertex} or label {label} out of range")]
    ConstraintOutOfRange { row: usize, vertex: usize, label: usize },
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error("instance is infeasible: {reason}")]
    Infeasible { reason: String },
    #[error("solver did not converge within {iterations} iterations \
             (primal residual {primal:.3e}, dual residual {dual:.3e})")]
    NonConvergence { iterations: usize, primal: f64, dual: f64 },
    #[error("extracted Gram matrix violates PSD: min eigenvalue {min_eig:.3e}")]
    GramNotPsd { min_eig: f64 },
}

impl QipInstance {
    /// A plain instance with the given PSD objective and no constraints.
    pub fn unconstrained(n: usize, k: usize, objective: DMatrix<f64>) -> Self {
        QipInstance {
            n,
            k,
            objective,
            linear: Vec::new(),
            forbidden: Vec::new(),
            monomials: Vec::new(),
            w_bound: 1.0,
            eps0: 1e-6,
        }
    }

    /// Checks the instance shape invariants.
    pub fn validate(&self) -> Result<(), LasserreError> {
        let expected = self.n * self.k;
        if self.objective.nrows() != expected || self.objective.ncols() != expected {
            return Err(LasserreError::ObjectiveShape {
                expected,
                rows: self.objective.nrows(),
                cols: self.objective.ncols(),
            });
        }
        let scale = self.objective.norm().max(1.0);
        let min_eig = crate::linalg::min_eigenvalue(&self.objective);
        if min_eig < -1e-7 * scale {
            return Err(LasserreError::ObjectiveNotPsd { min_eig });
        }
        for (row, lc) in self.linear.iter().enumerate() {
            let mut seen: Vec<(usize, usize)> = Vec::new();
            for &(u, g, w) in &lc.b {
                if u >= self.n || g >= self.k {
                    return Err(LasserreError::ConstraintOutOfRange { row, vertex: u, label: g });
                }
                if w.abs() > 1.0 + 1e-12 {
                    return Err(LasserreError::CoefficientTooLarge { row, value: w.abs() });
                }
                if let Some(&(_, first)) = seen.iter().find(|&&(v, _)| v == u) {
                    if first != g {
                        return Err(LasserreError::TwoLabelsPerVertex {
                            row,
                            vertex: u,
                            first,
                            second: g,
                        });
                    }
                }
                seen.push((u, g));
            }
        }
        Ok(())
    }

    /// All monomial constraints: the explicit ones plus the forbidden pairs
    /// as x_u(i) = 0.
    pub fn all_monomials(&self) -> Vec<MonomialConstraint> {
        let mut out = self.monomials.clone();
        for &(u, i) in &self.forbidden {
            out.push(MonomialConstraint { assign: Assign::singleton(u, i), value: 0 });
        }
        out
    }

    /// Row index of (u, i) in the objective matrix.
    pub fn coord(&self, u: usize, i: usize) -> usize {
        u * self.k + i
    }
}
