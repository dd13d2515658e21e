//! Solved relaxations: the moment vector, its Gram matrix, extracted
//! vectors, consistency auditing, and serialization.

use super::index::MomentIndex;
use super::poly::Assign;
use super::{LasserreError, QipInstance, Sense};
use crate::linalg::symmetric_eigen;
use nalgebra::DMatrix;
use std::collections::BTreeMap;

/// Solver telemetry recorded with every solution.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SolverDiagnostics {
    /// Objective value Tr(A·𝒴(z)).
    pub objective: f64,
    /// Smallest eigenvalue of the reduced moment matrix after polishing.
    pub min_eigenvalue: f64,
    /// Worst violation of a lifted inequality row (0 when none).
    pub ineq_violation: f64,
    /// Free coordinates after the affine quotient.
    pub free_variables: usize,
    /// Side of the reduced PSD block.
    pub reduced_side: usize,
}

/// A solved r′-round relaxation.
#[derive(Debug, Clone)]
pub struct LasserreSolution {
    instance: QipInstance,
    index: MomentIndex,
    /// Moment vector over the full coordinate enumeration.
    z: Vec<f64>,
    gram: DMatrix<f64>,
    diagnostics: SolverDiagnostics,
}

impl LasserreSolution {
    pub(crate) fn new(
        instance: QipInstance,
        index: MomentIndex,
        z: Vec<f64>,
        gram: DMatrix<f64>,
        diagnostics: SolverDiagnostics,
    ) -> Self {
        LasserreSolution { instance, index, z, gram, diagnostics }
    }

    /// Exact moments of a point distribution on one proper labeling:
    /// z_{(A,h)} = 1 iff h agrees with the labeling. Useful as the ground
    /// truth in rounding and consistency tests.
    pub fn integral(
        instance: QipInstance,
        r_prime: usize,
        labeling: &[usize],
    ) -> Result<Self, LasserreError> {
        assert_eq!(labeling.len(), instance.n);
        let index = super::index::build_moment_index(
            instance.n,
            instance.k,
            r_prime,
            &instance.all_monomials(),
            u64::MAX,
        )?;
        let z: Vec<f64> = index
            .full_coords()
            .iter()
            .map(|a| {
                let matches = a.pairs().iter().all(|&(u, l)| labeling[u] == l);
                if matches { 1.0 } else { 0.0 }
            })
            .collect();
        let gram = index.gram_from_full_z(&z);
        let objective = objective_from_z(&instance, &index, &z);
        let diagnostics = SolverDiagnostics {
            objective,
            min_eigenvalue: 0.0,
            ineq_violation: 0.0,
            free_variables: 0,
            reduced_side: index.reduced_side(),
        };
        Ok(LasserreSolution { instance, index, z, gram, diagnostics })
    }

    pub fn instance(&self) -> &QipInstance {
        &self.instance
    }

    pub fn index(&self) -> &MomentIndex {
        &self.index
    }

    pub fn r_prime(&self) -> usize {
        self.index.r_prime
    }

    pub fn k(&self) -> usize {
        self.index.k
    }

    pub fn n(&self) -> usize {
        self.index.n
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn diagnostics(&self) -> &SolverDiagnostics {
        &self.diagnostics
    }

    /// Objective value Tr(A·𝒴(z)).
    pub fn value(&self) -> f64 {
        self.diagnostics.objective
    }

    /// z-value of an arbitrary assignment within the coordinate cap.
    pub fn z_of(&self, a: &Assign) -> f64 {
        self.index.full_coord_id(a).map_or(0.0, |id| self.z[id])
    }

    /// ⟨x_S(f), x_T(g)⟩ read off the moment structure: the coordinate of
    /// the union, or 0 on conflict.
    pub fn z_pair(&self, a: &Assign, b: &Assign) -> f64 {
        match a.union(b) {
            Some(u) => self.z_of(&u),
            None => 0.0,
        }
    }

    /// Same solution with a replaced Gram matrix (for negative-control
    /// consistency tests).
    pub fn with_gram(mut self, gram: DMatrix<f64>) -> Self {
        self.gram = gram;
        self
    }

    /// The serializable document form.
    pub fn to_document(&self) -> SolutionDocument {
        let z = self
            .index
            .full_coords()
            .iter()
            .zip(&self.z)
            .map(|(a, &v)| (a.canonical_key(), v))
            .collect();
        SolutionDocument {
            schema: 1,
            n: self.n(),
            k: self.k(),
            r_prime: self.r_prime(),
            z,
            diagnostics: self.diagnostics.clone(),
        }
    }

    /// Rebuilds a solution from a document plus the originating instance.
    pub fn from_document(
        doc: &SolutionDocument,
        instance: QipInstance,
    ) -> Result<Self, LasserreError> {
        let index = super::index::build_moment_index(
            doc.n,
            doc.k,
            doc.r_prime,
            &instance.all_monomials(),
            u64::MAX,
        )?;
        let z: Vec<f64> = index
            .full_coords()
            .iter()
            .map(|a| doc.z.get(&a.canonical_key()).copied().unwrap_or(0.0))
            .collect();
        let gram = index.gram_from_full_z(&z);
        Ok(LasserreSolution {
            instance,
            index,
            z,
            gram,
            diagnostics: doc.diagnostics.clone(),
        })
    }
}

/// Recomputes Tr(A·𝒴(z)) from the moment vector.
pub(crate) fn objective_from_z(inst: &QipInstance, index: &MomentIndex, z: &[f64]) -> f64 {
    let mut total = 0.0;
    for u in 0..inst.n {
        for i in 0..inst.k {
            for v in 0..inst.n {
                for j in 0..inst.k {
                    let coeff = inst.objective[(inst.coord(u, i), inst.coord(v, j))];
                    if coeff == 0.0 {
                        continue;
                    }
                    if let Some(a) = Assign::singleton(u, i).union(&Assign::singleton(v, j)) {
                        total += coeff * z[index.full_coord_id(&a).expect("within cap")];
                    }
                }
            }
        }
    }
    total
}

/// Round-trippable serialization of a solution: the moment vector keyed by
/// canonical `{sorted-S}:(labels)` strings plus solver residuals.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolutionDocument {
    pub schema: u32,
    pub n: usize,
    pub k: usize,
    pub r_prime: usize,
    pub z: BTreeMap<String, f64>,
    pub diagnostics: SolverDiagnostics,
}

impl PartialEq for SolverDiagnostics {
    fn eq(&self, other: &Self) -> bool {
        self.objective == other.objective
            && self.min_eigenvalue == other.min_eigenvalue
            && self.ineq_violation == other.ineq_violation
            && self.free_variables == other.free_variables
            && self.reduced_side == other.reduced_side
    }
}

/// The extracted vector family: one ambient-space column per moment-matrix
/// entry, with Gram reproducing the moment matrix.
#[derive(Debug, Clone)]
pub struct VectorFamily {
    /// Υ × side matrix; column e is x_{(S,f)} for entry e.
    pub columns: DMatrix<f64>,
}

impl VectorFamily {
    pub fn ambient_dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn column(&self, entry: usize) -> nalgebra::DVectorView<'_, f64> {
        self.columns.column(entry)
    }
}

/// Factors gram = VᵀV by eigendecomposition with negative eigenvalues
/// clipped at zero. Errors when the most negative eigenvalue is below −1e−6.
pub fn extract_vectors(gram: &DMatrix<f64>) -> Result<VectorFamily, LasserreError> {
    let (values, vectors) = symmetric_eigen(gram);
    if let Some(&min_eig) = values.first() {
        if min_eig < -1e-6 {
            return Err(LasserreError::GramNotPsd { min_eig });
        }
    }
    let mut columns = vectors.transpose();
    for (r, &val) in values.iter().enumerate() {
        let s = val.max(0.0).sqrt();
        columns.row_mut(r).scale_mut(s);
    }
    Ok(VectorFamily { columns })
}

/// Residual report for the Lasserre consistency constraints.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConsistencyReport {
    /// |z_∅ − 1|.
    pub z_empty: f64,
    /// Largest conflicting-pair entry.
    pub conflict: f64,
    /// Largest spread among matrix cells sharing one coordinate.
    pub coordinate_spread: f64,
    /// Largest per-vertex label-sum violation.
    pub label_sum: f64,
    /// Largest marginalization residual ‖Σ_g x_S(f∘g) − x_{S∖u}(f)‖.
    pub marginalization: f64,
    /// Largest lifted linear-constraint violation.
    pub linear: f64,
    /// Smallest eigenvalue of the moment matrix.
    pub min_eigenvalue: f64,
}

impl ConsistencyReport {
    pub fn max_residual(&self) -> f64 {
        [self.z_empty, self.conflict, self.coordinate_spread, self.label_sum, self.marginalization, self.linear]
            .into_iter()
            .fold(0.0, f64::max)
    }

    pub fn passes(&self) -> bool {
        self.max_residual() <= 1e-6 && self.min_eigenvalue >= -1e-9
    }
}

/// Audits the Gram matrix of `sol` against every consistency constraint,
/// recomputing everything from the matrix entries (nothing is trusted from
/// the construction).
pub fn check_consistency(sol: &LasserreSolution) -> ConsistencyReport {
    let index = sol.index();
    let gram = sol.gram();
    let k = sol.k();
    let side = index.side();

    let z_empty = (gram[(0, 0)] - 1.0).abs();

    let mut conflict = 0.0f64;
    let mut coordinate_spread = 0.0f64;
    let mut by_coord: std::collections::HashMap<Assign, (f64, f64)> =
        std::collections::HashMap::new();
    for r in 0..side {
        for c in r..side {
            match index.pair_assign(r, c) {
                None => conflict = conflict.max(gram[(r, c)].abs()),
                Some(a) => {
                    let v = gram[(r, c)];
                    let slot = by_coord.entry(a).or_insert((v, v));
                    slot.0 = slot.0.min(v);
                    slot.1 = slot.1.max(v);
                }
            }
        }
    }
    for (_, (lo, hi)) in by_coord {
        coordinate_spread = coordinate_spread.max(hi - lo);
    }

    let mut label_sum = 0.0f64;
    for u in 0..sol.n() {
        let total: f64 = (0..k)
            .map(|g| {
                let e = index.lookup(&Assign::singleton(u, g)).expect("singleton entry");
                gram[(e, e)]
            })
            .sum();
        label_sum = label_sum.max((total - gram[(0, 0)]).abs());
    }

    // Item 6: ‖Σ_g x_{T∪u}(f∘g) − x_T(f)‖ via the Gram quadratic form.
    let mut marginalization = 0.0f64;
    for (ti, base) in index.entries().iter().enumerate() {
        if base.len() + 1 > sol.r_prime() {
            continue;
        }
        for u in 0..sol.n() {
            if base.label_of(u).is_some() {
                continue;
            }
            let plus: Vec<usize> = (0..k)
                .map(|g| index.lookup(&base.with(u, g)).expect("extended entry"))
                .collect();
            let mut quad = gram[(ti, ti)];
            for &a in &plus {
                quad -= 2.0 * gram[(a, ti)];
                for &b in &plus {
                    quad += gram[(a, b)];
                }
            }
            marginalization = marginalization.max(quad.max(0.0).sqrt());
        }
    }

    // Lifted linear-constraint rows read off the matrix entries.
    let mut linear = 0.0f64;
    for lc in &sol.instance().linear {
        for (ei, base) in index.entries().iter().enumerate() {
            let z_base = gram[(ei, ei)];
            let mut lhs = 0.0;
            for &(u, g, w) in &lc.b {
                let val = match base.label_of(u) {
                    Some(l) if l == g => z_base,
                    Some(_) => 0.0,
                    None => {
                        let su = index.lookup(&Assign::singleton(u, g)).expect("singleton");
                        gram[(ei, su)]
                    }
                };
                lhs += w * val;
            }
            let rhs = lc.c * z_base;
            let violation = match lc.sense {
                Sense::Ge => (rhs - lhs).max(0.0),
                Sense::Eq => (lhs - rhs).abs(),
            };
            linear = linear.max(violation);
        }
    }

    let min_eigenvalue = crate::linalg::min_eigenvalue(gram);

    ConsistencyReport {
        z_empty,
        conflict,
        coordinate_spread,
        label_sum,
        marginalization,
        linear,
        min_eigenvalue,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lasserre::{LinearConstraint, QipInstance, Sense};
    use approx::assert_abs_diff_eq;

    fn k2_bisection_instance() -> QipInstance {
        // Laplacian of K2 in the label-0 block; Σ_u x̃_u(0) = 1.
        let mut objective = DMatrix::zeros(4, 4);
        // (u,i) at u·2+i: label-0 rows are 0 and 2.
        objective[(0, 0)] = 1.0;
        objective[(2, 2)] = 1.0;
        objective[(0, 2)] = -1.0;
        objective[(2, 0)] = -1.0;
        let mut inst = QipInstance::unconstrained(2, 2, objective);
        inst.linear.push(LinearConstraint {
            b: vec![(0, 0, 1.0), (1, 0, 1.0)],
            c: 1.0,
            sense: Sense::Eq,
        });
        inst
    }

    #[test]
    fn integral_solution_is_fully_consistent() {
        let inst = k2_bisection_instance();
        let sol = LasserreSolution::integral(inst, 2, &[0, 1]).unwrap();
        let report = check_consistency(&sol);
        assert_eq!(report.max_residual(), 0.0);
        assert!(report.min_eigenvalue >= -1e-12);
        assert!(report.passes());
        assert_abs_diff_eq!(sol.value(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn perturbed_gram_is_flagged() {
        let inst = k2_bisection_instance();
        let sol = LasserreSolution::integral(inst, 2, &[0, 1]).unwrap();
        let mut gram = sol.gram().clone();
        // Corrupt one off-diagonal cell pair: its twin cells share the same
        // coordinate, so the coordinate-spread check must fire (or PSD, for
        // larger kicks).
        gram[(0, 1)] += 1e-3;
        gram[(1, 0)] += 1e-3;
        let report = check_consistency(&sol.with_gram(gram));
        assert!(report.coordinate_spread >= 1e-4 || report.min_eigenvalue < -1e-4);
        assert!(!report.passes());
    }

    #[test]
    fn extraction_reproduces_gram() {
        let inst = k2_bisection_instance();
        let sol = LasserreSolution::integral(inst, 2, &[1, 0]).unwrap();
        let fam = extract_vectors(sol.gram()).unwrap();
        let rebuilt = fam.columns.transpose() * &fam.columns;
        assert_abs_diff_eq!(rebuilt, sol.gram().clone(), epsilon = 1e-7);
    }

    #[test]
    fn extraction_identity_and_rank_one() {
        let fam = extract_vectors(&DMatrix::identity(3, 3)).unwrap();
        let rebuilt = fam.columns.transpose() * &fam.columns;
        assert_abs_diff_eq!(rebuilt, DMatrix::identity(3, 3), epsilon = 1e-10);
        let ones = DMatrix::from_element(3, 3, 1.0);
        let fam1 = extract_vectors(&ones).unwrap();
        for c in 1..3 {
            assert_abs_diff_eq!(
                fam1.columns.column(c).into_owned(),
                fam1.columns.column(0).into_owned(),
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn extraction_rejects_indefinite() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(extract_vectors(&m), Err(LasserreError::GramNotPsd { .. })));
    }

    #[test]
    fn document_round_trips_bit_exactly() {
        let inst = k2_bisection_instance();
        let sol = LasserreSolution::integral(inst.clone(), 2, &[0, 1]).unwrap();
        let doc = sol.to_document();
        let text = serde_json::to_string_pretty(&doc).unwrap();
        let back: SolutionDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(doc, back);
        assert_eq!(text, serde_json::to_string_pretty(&back).unwrap());
        let rebuilt = LasserreSolution::from_document(&back, inst).unwrap();
        assert_eq!(rebuilt.z(), sol.z());
        assert_eq!(rebuilt.gram(), sol.gram());
    }
}
