//! The SDP solver behind the r′-round relaxation.
//!
//! All equality structure — the moment-coordinate quotient, monomial
//! substitutions, and lifted equality constraints — is eliminated exactly
//! into an affine parametrization v ↦ z before any iteration starts, so the
//! optimization is: minimize qᵀv subject to M(v) ⪰ 0 and G·v + g₀ ≥ 0, where
//! M(v) is the reduced (last-label-free) moment matrix. That problem is
//! solved by ADMM with over-relaxation, eigenvalue-clipping PSD projection,
//! and penalty rebalancing, followed by an alternating-projection polish that
//! drives the final matrix inside the PSD cone to the reporting tolerance.
//!
//! PSD-ness of the reduced matrix certifies PSD-ness of the full moment
//! matrix: every full-label vector is an inclusion–exclusion combination of
//! reduced ones, making the full Gram a congruence image of the reduced one.

use super::index::{build_moment_index, MomentIndex};
use super::poly::{AffineBasis, AffineExpr, Assign, Poly};
use super::solution::{LasserreSolution, SolverDiagnostics};
use super::{LasserreError, QipInstance, Sense};
use crate::linalg::{min_eigenvalue, project_psd};
use nalgebra::{Cholesky, DMatrix, DVector};

/// Knobs for [`solve_sdp`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Cap on (k·n)^{r′} for the moment index.
    pub budget: u64,
    /// ADMM iteration cap.
    pub max_iter: usize,
    /// Residual target (relative) for the ADMM phase.
    pub target_residual: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { budget: 10_000_000, max_iter: 200_000, target_residual: 1e-10 }
    }
}

/// The assembled reduced-form problem.
struct Assembled {
    index: MomentIndex,
    basis: AffineBasis,
    /// Reduced matrix side.
    d: usize,
    /// Free variable count.
    m: usize,
    /// Constant part of M(v).
    c0: DMatrix<f64>,
    /// Per-variable cells (i, j, coeff) with i ≤ j.
    var_cells: Vec<Vec<(usize, usize, f64)>>,
    /// Inequality rows a(v) = terms·v + constant ≥ 0.
    ineq: Vec<AffineExpr>,
    /// Objective qᵀv + q0.
    q: DVector<f64>,
    q0: f64,
}

fn lifted_row_poly(base: &Assign, lc: &super::LinearConstraint) -> Poly {
    let mut poly = Poly::zero();
    for &(u, g, w) in &lc.b {
        let mut term = Poly::mono(base.clone()).mul_mono(&Assign::singleton(u, g));
        term.scale(w);
        poly.add(&term);
    }
    let mut rhs = Poly::mono(base.clone());
    rhs.scale(-lc.c);
    poly.add(&rhs);
    poly
}

fn assemble(inst: &QipInstance, r_prime: usize, opts: &SolveOptions) -> Result<Assembled, LasserreError> {
    inst.validate()?;
    let index = build_moment_index(inst.n, inst.k, r_prime, &inst.all_monomials(), opts.budget)?;
    let k = inst.k;
    let width = index.coords().len();
    let coord_lookup: std::collections::HashMap<Assign, usize> = index
        .coords()
        .iter()
        .enumerate()
        .map(|(i, a)| (a.clone(), i))
        .collect();

    // Equality rows: structural quotient plus lifted equality constraints
    // (quantified over the reduced base entries; the full-label rows follow
    // by linearity of the last-label expansion).
    let mut rows: Vec<(Vec<f64>, f64)> = index.structural_rows().to_vec();
    for lc in inst.linear.iter().filter(|lc| lc.sense == Sense::Eq) {
        for &ei in index.reduced_entries() {
            let poly = lifted_row_poly(index.entry(ei), lc).reduce(k);
            let row = poly.to_row(&coord_lookup, width);
            if row.iter().any(|&c| c != 0.0) {
                rows.push((row, 0.0));
            }
        }
    }
    let basis = AffineBasis::eliminate(width, &rows)
        .map_err(|e| LasserreError::Infeasible { reason: e.to_string() })?;

    // Inequality rows are lifted for ALL (S,f), including last-label
    // labelings: inequalities do not combine linearly, so each one is its
    // own constraint.
    let mut ineq: Vec<AffineExpr> = Vec::new();
    for lc in inst.linear.iter().filter(|lc| lc.sense == Sense::Ge) {
        for base in index.entries() {
            let poly = lifted_row_poly(base, lc).reduce(k);
            let row_expr = AffineExpr {
                constant: 0.0,
                terms: poly.terms().map(|(a, c)| (coord_lookup[a], c)).collect(),
            };
            let over_free = row_expr.compose(&basis.coord_expr);
            if over_free.terms.is_empty() {
                if over_free.constant < -inst.eps0 {
                    return Err(LasserreError::Infeasible {
                        reason: format!(
                            "lifted inequality row is constant {:.3e} < 0",
                            over_free.constant
                        ),
                    });
                }
            } else if !ineq.contains(&over_free) {
                ineq.push(over_free);
            }
        }
    }

    // Reduced matrix cells.
    let d = index.reduced_side();
    let m = basis.free.len();
    let mut c0 = DMatrix::zeros(d, d);
    let mut var_cells: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); m];
    for (ri, &er) in index.reduced_entries().iter().enumerate() {
        for (ci, &ec) in index.reduced_entries().iter().enumerate().skip(ri) {
            if let Some(a) = index.pair_assign(er, ec) {
                let coord = coord_lookup[&a];
                let expr = &basis.coord_expr[coord];
                c0[(ri, ci)] = expr.constant;
                c0[(ci, ri)] = expr.constant;
                for &(v, coeff) in &expr.terms {
                    var_cells[v].push((ri, ci, coeff));
                }
            }
        }
    }

    // Objective: x̃ᵀAx̃ in moment coordinates.
    let mut obj_poly = Poly::zero();
    for u in 0..inst.n {
        for i in 0..k {
            for v in 0..inst.n {
                for j in 0..k {
                    let coeff = inst.objective[(inst.coord(u, i), inst.coord(v, j))];
                    if coeff == 0.0 {
                        continue;
                    }
                    if let Some(a) =
                        Assign::singleton(u, i).union(&Assign::singleton(v, j))
                    {
                        obj_poly.add_term(a, coeff);
                    }
                }
            }
        }
    }
    let obj_row = obj_poly.reduce(k);
    let obj_expr = AffineExpr {
        constant: 0.0,
        terms: obj_row.terms().map(|(a, c)| (coord_lookup[a], c)).collect(),
    };
    let over_free = obj_expr.compose(&basis.coord_expr);
    let mut q = DVector::zeros(m);
    for &(v, c) in &over_free.terms {
        q[v] = c;
    }
    Ok(Assembled { index, basis, d, m, c0, var_cells, ineq, q, q0: over_free.constant })
}

impl Assembled {
    fn matrix_of(&self, v: &DVector<f64>) -> DMatrix<f64> {
        let mut mat = self.c0.clone();
        for (var, cells) in self.var_cells.iter().enumerate() {
            let val = v[var];
            if val == 0.0 {
                continue;
            }
            for &(i, j, c) in cells {
                mat[(i, j)] += c * val;
                if i != j {
                    mat[(j, i)] += c * val;
                }
            }
        }
        mat
    }

    /// Adjoint of the matrix map: p ↦ Σ_cells mult·coeff·X_cell.
    fn adjoint(&self, x: &DMatrix<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.m);
        for (var, cells) in self.var_cells.iter().enumerate() {
            let mut acc = 0.0;
            for &(i, j, c) in cells {
                let mult = if i == j { 1.0 } else { 2.0 };
                acc += mult * c * x[(i, j)];
            }
            out[var] = acc;
        }
        out
    }

    /// Gram matrix of the matrix map (Frobenius inner products of the F_j).
    fn map_gram(&self) -> DMatrix<f64> {
        // Cells of distinct variables can share positions (after
        // elimination), so accumulate via a dense per-position pass.
        let mut gram = DMatrix::zeros(self.m, self.m);
        let mut by_cell: std::collections::HashMap<(usize, usize), Vec<(usize, f64)>> =
            std::collections::HashMap::new();
        for (var, cells) in self.var_cells.iter().enumerate() {
            for &(i, j, c) in cells {
                by_cell.entry((i, j)).or_default().push((var, c));
            }
        }
        for ((i, j), vars) in by_cell {
            let mult = if i == j { 1.0 } else { 2.0 };
            for &(p, cp) in &vars {
                for &(q, cq) in &vars {
                    gram[(p, q)] += mult * cp * cq;
                }
            }
        }
        gram
    }

    fn ineq_values(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.ineq.len(),
            self.ineq.iter().map(|e| e.eval(v.as_slice())),
        )
    }
}

/// Solves the r′-round relaxation of `inst` to the solver contract:
/// moment matrix PSD to reporting tolerance, lifted constraints within eps0,
/// all consistency constraints exact by construction.
pub fn solve_sdp(
    inst: &QipInstance,
    r_prime: usize,
    opts: &SolveOptions,
) -> Result<LasserreSolution, LasserreError> {
    let asm = assemble(inst, r_prime, opts)?;
    let v = admm(&asm, inst.eps0, opts)?;
    finish(inst, asm, v)
}

fn admm(asm: &Assembled, eps0: f64, opts: &SolveOptions) -> Result<DVector<f64>, LasserreError> {
    let (d, m, p) = (asm.d, asm.m, asm.ineq.len());
    if m == 0 {
        // Fully pinned instance: nothing to optimize, just sanity-check.
        let min_eig = min_eigenvalue(&asm.c0);
        if min_eig < -1e-6 {
            return Err(LasserreError::Infeasible {
                reason: format!("pinned moment matrix has eigenvalue {min_eig:.3e}"),
            });
        }
        return Ok(DVector::zeros(0));
    }

    // Normal matrix for the v-step (independent of the penalty in scaled form).
    let mut normal = asm.map_gram();
    let mut g_mat = DMatrix::zeros(p, m);
    let mut g0 = DVector::zeros(p);
    for (r, e) in asm.ineq.iter().enumerate() {
        g0[r] = e.constant;
        for &(var, c) in &e.terms {
            g_mat[(r, var)] = c;
        }
    }
    normal += g_mat.transpose() * &g_mat;
    let ridge = 1e-12 * (normal.trace() / m as f64).max(1.0);
    for i in 0..m {
        normal[(i, i)] += ridge;
    }
    let chol = Cholesky::new(normal)
        .ok_or(LasserreError::NonConvergence { iterations: 0, primal: f64::NAN, dual: f64::NAN })?;

    let scale = 1.0 + asm.c0.norm() + asm.q.norm();
    let tol_hard = (opts.target_residual * scale).max(1e-12);
    let tol_soft = (1e-8 * scale).max(tol_hard);

    // Warm start at the uniform-distribution moments, which are feasible for
    // the quotient by construction of the free coordinates.
    let k = asm.index.k;
    let mut v = DVector::from_iterator(
        m,
        asm.basis.free.iter().map(|&cid| {
            let a = &asm.index.coords()[cid];
            (1.0 / k as f64).powi(a.len() as i32)
        }),
    );
    let mut s = project_psd(&asm.matrix_of(&v)).0;
    let mut t = asm.ineq_values(&v).map(|x| x.max(0.0));
    let mut u_mat = DMatrix::zeros(d, d);
    let mut u_vec = DVector::zeros(p);
    let mut rho: f64 = 1.0;
    let alpha = 1.6;
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut last_obj = f64::INFINITY;
    let mut stall = 0usize;

    for iter in 0..opts.max_iter {
        // v-step.
        let rhs_mat = &s - &u_mat - &asm.c0;
        let mut rhs = asm.adjoint(&rhs_mat);
        rhs += g_mat.transpose() * (&t - &u_vec - &g0);
        rhs -= &asm.q / rho;
        v = chol.solve(&rhs);

        // Over-relaxed projection steps.
        let m_v = asm.matrix_of(&v);
        let m_hat = &m_v * alpha + &s * (1.0 - alpha);
        let s_new = project_psd(&(&m_hat + &u_mat)).0;
        let a_v = asm.ineq_values(&v);
        let a_hat = &a_v * alpha + &t * (1.0 - alpha);
        let t_new = (&a_hat + &u_vec).map(|x| x.max(0.0));
        u_mat += &m_hat - &s_new;
        u_vec += &a_hat - &t_new;

        if iter % 25 == 24 {
            let primal = ((&m_v - &s_new).norm_squared() + (&a_v - &t_new).norm_squared()).sqrt();
            let dual_mat = asm.adjoint(&(&s_new - &s));
            let dual_vec = g_mat.transpose() * (&t_new - &t);
            let dual = rho * (dual_mat.norm_squared() + dual_vec.norm_squared()).sqrt();
            let obj = asm.q.dot(&v);
            if primal <= tol_hard && dual <= tol_hard {
                return Ok(v);
            }
            if primal <= tol_soft && dual <= tol_soft {
                if best.as_ref().map_or(true, |(b, _)| primal < *b) {
                    best = Some((primal, v.clone()));
                }
                if (obj - last_obj).abs() <= 1e-10 * scale {
                    stall += 1;
                    if stall >= 20 {
                        return Ok(best.map(|(_, bv)| bv).unwrap_or(v));
                    }
                } else {
                    stall = 0;
                }
            }
            last_obj = obj;
            // Penalty rebalancing (scaled duals shrink when rho grows).
            if primal > 10.0 * dual && rho < 1e6 {
                rho *= 2.0;
                u_mat /= 2.0;
                u_vec /= 2.0;
            } else if dual > 10.0 * primal && rho > 1e-6 {
                rho /= 2.0;
                u_mat *= 2.0;
                u_vec *= 2.0;
            }
        }
        s = s_new;
        t = t_new;
    }
    if let Some((_, bv)) = best {
        return Ok(bv);
    }
    let m_v = asm.matrix_of(&v);
    let primal = (&m_v - project_psd(&m_v).0).norm();
    if primal > 1e-5 * scale {
        return Err(LasserreError::Infeasible {
            reason: format!(
                "no PSD point found: residual {primal:.3e} after {} iterations \
                 (instance is likely infeasible beyond the eps0 = {eps0:.1e} tolerance)",
                opts.max_iter
            ),
        });
    }
    Err(LasserreError::NonConvergence { iterations: opts.max_iter, primal, dual: f64::NAN })
}

/// Alternating-projection polish: pull M(v) inside the PSD cone without
/// leaving the affine parametrization.
fn polish(asm: &Assembled, mut v: DVector<f64>) -> (DVector<f64>, f64) {
    if asm.m == 0 {
        let me = min_eigenvalue(&asm.c0);
        return (v, me);
    }
    let mut fit = asm.map_gram();
    let ridge = 1e-12 * (fit.trace() / asm.m as f64).max(1.0);
    for i in 0..asm.m {
        fit[(i, i)] += ridge;
    }
    let chol = match Cholesky::new(fit) {
        Some(c) => c,
        None => {
            let me = min_eigenvalue(&asm.matrix_of(&v));
            return (v, me);
        }
    };
    // The reported Gram is a congruence image of the reduced matrix, which
    // can amplify a small negative eigenvalue by an order of magnitude, so
    // polish well past the reporting tolerance.
    let mut min_eig = 0.0;
    for _ in 0..2000 {
        let x = asm.matrix_of(&v);
        min_eig = min_eigenvalue(&x);
        if min_eig >= -2e-11 {
            break;
        }
        let (xp, _) = project_psd(&x);
        v = chol.solve(&asm.adjoint(&(&xp - &asm.c0)));
    }
    (v, min_eig)
}

fn finish(
    inst: &QipInstance,
    asm: Assembled,
    v: DVector<f64>,
) -> Result<LasserreSolution, LasserreError> {
    let (v, min_eig) = polish(&asm, v);
    if min_eig < -1e-6 {
        return Err(LasserreError::GramNotPsd { min_eig });
    }
    // Worst lifted-inequality violation, for the diagnostics record.
    let ineq_violation = asm
        .ineq_values(&v)
        .iter()
        .fold(0.0f64, |worst, &val| worst.max(-val))
        .max(0.0);
    let reduced_z = asm.basis.coords_from_free(v.as_slice());
    let full_z = asm.index.full_from_reduced(&reduced_z);
    let gram = asm.index.gram_from_full_z(&full_z);
    let objective = asm.q.dot(&v) + asm.q0;
    let diagnostics = SolverDiagnostics {
        objective,
        min_eigenvalue: min_eig,
        ineq_violation,
        free_variables: asm.m,
        reduced_side: asm.d,
    };
    Ok(LasserreSolution::new(inst.clone(), asm.index, full_z, gram, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lasserre::check_consistency;
    use approx::assert_abs_diff_eq;

    /// Bisection-style instance: Laplacian on the label-0 block, Σ x̃_u(0) = μ.
    fn bisection_instance(g: &crate::graph::WeightedGraph, mu: f64) -> QipInstance {
        let n = g.n();
        let lap = g.laplacian();
        let mut objective = DMatrix::zeros(2 * n, 2 * n);
        for u in 0..n {
            for v in 0..n {
                objective[(2 * u, 2 * v)] = lap[(u, v)];
            }
        }
        let mut inst = QipInstance::unconstrained(n, 2, objective);
        inst.linear.push(super::super::LinearConstraint {
            b: (0..n).map(|u| (u, 0, 1.0)).collect(),
            c: mu,
            sense: Sense::Eq,
        });
        inst
    }

    #[test]
    fn k2_bisection_value_is_one() {
        let g = crate::graph::complete(2);
        let sol = solve_sdp(&bisection_instance(&g, 1.0), 1, &SolveOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.value(), 1.0, epsilon = 1e-6);
        let report = check_consistency(&sol);
        assert!(report.passes(), "{report:?}");
    }

    #[test]
    fn edgeless_graph_objective_zero() {
        let g = crate::graph::WeightedGraph::new(3, vec![]).unwrap();
        let sol = solve_sdp(&bisection_instance(&g, 1.0), 1, &SolveOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.value(), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn c4_bisection_monotone_and_below_opt() {
        let g = crate::graph::cycle(4);
        let opts = SolveOptions::default();
        let v1 = solve_sdp(&bisection_instance(&g, 2.0), 1, &opts).unwrap().value();
        let v2 = solve_sdp(&bisection_instance(&g, 2.0), 2, &opts).unwrap().value();
        assert!(v2 <= 2.0 + 1e-6, "r'=2 value {v2}");
        assert!(v2 >= v1 - 2e-6, "hierarchy must tighten: r'=1 {v1}, r'=2 {v2}");
    }

    #[test]
    fn c6_bisection_r3_converges_fast_enough() {
        let g = crate::graph::cycle(6);
        let start = std::time::Instant::now();
        let sol = solve_sdp(&bisection_instance(&g, 3.0), 3, &SolveOptions::default()).unwrap();
        let elapsed = start.elapsed();
        println!("C6 r'=3: value {} in {elapsed:?}", sol.value());
        assert!(sol.value() <= 2.0 + 1e-5);
        let report = check_consistency(&sol);
        assert!(report.passes(), "{report:?}");
        assert!(elapsed.as_secs_f64() < 30.0, "too slow: {elapsed:?}");
    }

    #[test]
    fn infeasible_mu_reports_infeasibility() {
        let g = crate::graph::complete(2);
        let err = solve_sdp(&bisection_instance(&g, 5.0), 1, &SolveOptions::default()).unwrap_err();
        assert!(matches!(err, LasserreError::Infeasible { .. } | LasserreError::NonConvergence { .. }));
    }
}
