//! Enumeration of the moment index and the affine coordinate space behind
//! the moment matrix.
//!
//! Rows/columns of the moment matrix are pairs (S, f): a vertex subset with
//! |S| ≤ r′ and a labeling f ∈ [k]^S. The matrix entry at ((S,f),(T,g)) is
//! the moment coordinate z_{(S∪T, f∘g)} when the labelings agree and 0 when
//! they conflict. The coordinate space is quotiented by three families of
//! affine constraints: z_∅ = 1, the per-vertex label-sum identity (realized
//! here by eliminating the last label entirely), and the monomial
//! substitutions coming from forbidden pairs and general monomial
//! equalities. What survives is a set of free coordinates; everything else
//! is an exact affine function of them, so every Lasserre consistency
//! constraint holds identically in the parametrization.

use super::poly::{AffineBasis, AffineExpr, Assign, Inconsistent, Poly};
use std::collections::HashMap;
use thiserror::Error;

/// A monomial equality constraint ∏_{(u,i)∈T} x_u(i) = value (0 or 1).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MonomialConstraint {
    pub assign: Assign,
    pub value: u8,
}

/// Errors from moment-index construction.
#[derive(Debug, Error)]
pub enum IndexError {
    #[error("budget exceeded: (k·n)^r' = ({k}·{n})^{r_prime} ≈ {size:.3e} > budget {budget}; \
             full matrix side would be {side}")]
    BudgetExceeded { n: usize, k: usize, r_prime: usize, size: f64, budget: u64, side: usize },
    #[error("monomial constraints are mutually infeasible: {0}")]
    Infeasible(#[from] Inconsistent),
    #[error("need k >= 2 labels, got {0}")]
    TooFewLabels(usize),
    #[error("need r' >= 1, got {0}")]
    TooFewRounds(usize),
}

/// The moment index: full-label matrix entries, reduced coordinates, and the
/// structural affine basis.
#[derive(Debug, Clone)]
pub struct MomentIndex {
    pub n: usize,
    pub k: usize,
    pub r_prime: usize,
    /// All (S,f) with |S| ≤ r′, f ∈ [k]^S; entry 0 is (∅, ()).
    entries: Vec<Assign>,
    lookup: HashMap<Assign, usize>,
    /// Indices into `entries` whose labelings avoid the last label; these are
    /// the rows/columns of the reduced moment matrix.
    reduced_entries: Vec<usize>,
    /// Reduced coordinates (A,h): |A| ≤ min(2r′, n), labels < k−1.
    coords: Vec<Assign>,
    coord_lookup: HashMap<Assign, usize>,
    /// Full coordinates (A,h) with all labels, same size cap.
    full_coords: Vec<Assign>,
    full_coord_lookup: HashMap<Assign, usize>,
    /// Expansion of each full coordinate over the reduced coordinates.
    expansion: Vec<AffineExpr>,
    /// Structural equality rows over reduced coordinates (z_∅ = 1 plus all
    /// lifted monomial substitutions).
    structural_rows: Vec<(Vec<f64>, f64)>,
    /// Elimination of the structural rows: the public free-coordinate view.
    basis: AffineBasis,
    monomials: Vec<MonomialConstraint>,
}

/// Enumerates all assignments (S,f) with |S| ≤ max_size and labels < k_labels,
/// ordered by |S|, then lexicographic S, then lexicographic labeling.
fn enumerate_assignments(n: usize, k_labels: usize, max_size: usize) -> Vec<Assign> {
    let mut out = vec![Assign::empty()];
    let mut current: Vec<Vec<usize>> = vec![vec![]];
    for size in 1..=max_size.min(n) {
        let mut next: Vec<Vec<usize>> = Vec::new();
        for subset in &current {
            let start = subset.last().map_or(0, |&l| l + 1);
            for v in start..n {
                let mut s = subset.clone();
                s.push(v);
                next.push(s);
            }
        }
        for subset in &next {
            // Mixed-radix label counter, first vertex most significant.
            let mut labels = vec![0usize; size];
            loop {
                let pairs = subset.iter().copied().zip(labels.iter().copied()).collect();
                out.push(Assign::from_pairs(pairs).expect("distinct vertices"));
                let mut pos = size;
                loop {
                    if pos == 0 {
                        break;
                    }
                    pos -= 1;
                    labels[pos] += 1;
                    if labels[pos] < k_labels {
                        break;
                    }
                    labels[pos] = 0;
                }
                if labels.iter().all(|&l| l == 0) {
                    break;
                }
            }
        }
        current = next;
    }
    out
}

/// Builds the moment index for n vertices, k labels, r′ rounds, under the
/// given monomial constraints. `budget` caps (k·n)^{r′}.
pub fn build_moment_index(
    n: usize,
    k: usize,
    r_prime: usize,
    monomials: &[MonomialConstraint],
    budget: u64,
) -> Result<MomentIndex, IndexError> {
    if k < 2 {
        return Err(IndexError::TooFewLabels(k));
    }
    if r_prime < 1 {
        return Err(IndexError::TooFewRounds(r_prime));
    }
    let size = ((k * n) as f64).powi(r_prime as i32);
    if size > budget as f64 {
        // Exact matrix side Σ_{s ≤ min(r′,n)} C(n,s)·k^s for the report.
        let mut side = 0.0f64;
        let mut choose = 1.0f64;
        for s in 0..=r_prime.min(n) {
            if s > 0 {
                choose *= (n - s + 1) as f64 / s as f64;
            }
            side += choose * (k as f64).powi(s as i32);
        }
        return Err(IndexError::BudgetExceeded { n, k, r_prime, size, budget, side: side as usize });
    }
    let entries = enumerate_assignments(n, k, r_prime);
    let lookup: HashMap<Assign, usize> =
        entries.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
    let reduced_entries: Vec<usize> =
        (0..entries.len()).filter(|&i| entries[i].is_reduced(k)).collect();

    let coord_cap = (2 * r_prime).min(n);
    let coords = enumerate_assignments(n, k - 1, coord_cap);
    let coord_lookup: HashMap<Assign, usize> =
        coords.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();
    let full_coords = enumerate_assignments(n, k, coord_cap);
    let full_coord_lookup: HashMap<Assign, usize> =
        full_coords.iter().enumerate().map(|(i, a)| (a.clone(), i)).collect();

    let expansion: Vec<AffineExpr> = full_coords
        .iter()
        .map(|a| {
            let poly = Poly::mono(a.clone()).reduce(k);
            let mut terms: Vec<(usize, f64)> =
                poly.terms().map(|(t, c)| (coord_lookup[t], c)).collect();
            terms.sort_unstable_by_key(|&(i, _)| i);
            AffineExpr { constant: 0.0, terms }
        })
        .collect();

    // Structural rows: z_∅ = 1, then every monomial constraint lifted against
    // every reduced base entry whose union stays inside the coordinate cap.
    let width = coords.len();
    let mut structural_rows: Vec<(Vec<f64>, f64)> = Vec::new();
    let mut empty_row = vec![0.0; width];
    empty_row[coord_lookup[&Assign::empty()]] = 1.0;
    structural_rows.push((empty_row, 1.0));
    for mc in monomials {
        for &ei in &reduced_entries {
            let base = &entries[ei];
            let union_size = {
                let sv: std::collections::BTreeSet<usize> =
                    base.vertices().chain(mc.assign.vertices()).collect();
                sv.len()
            };
            if union_size > coord_cap {
                continue;
            }
            // mono(S,f)·(mono(T,g) − value) = 0, expanded over reduced coords.
            let mut poly = Poly::mono(base.clone()).mul_mono(&mc.assign);
            let mut rhs_part = Poly::mono(base.clone());
            rhs_part.scale(-(mc.value as f64));
            poly.add(&rhs_part);
            let row = poly.reduce(k).to_row(&coord_lookup, width);
            if row.iter().any(|&c| c != 0.0) {
                structural_rows.push((row, 0.0));
            }
        }
    }
    let basis = AffineBasis::eliminate(width, &structural_rows)?;

    Ok(MomentIndex {
        n,
        k,
        r_prime,
        entries,
        lookup,
        reduced_entries,
        coords,
        coord_lookup,
        full_coords,
        full_coord_lookup,
        expansion,
        structural_rows,
        basis,
        monomials: monomials.to_vec(),
    })
}

impl MomentIndex {
    /// Side of the full moment matrix.
    pub fn side(&self) -> usize {
        self.entries.len()
    }

    /// Side of the reduced (last-label-free) moment matrix.
    pub fn reduced_side(&self) -> usize {
        self.reduced_entries.len()
    }

    pub fn entries(&self) -> &[Assign] {
        &self.entries
    }

    pub fn entry(&self, idx: usize) -> &Assign {
        &self.entries[idx]
    }

    pub fn lookup(&self, a: &Assign) -> Option<usize> {
        self.lookup.get(a).copied()
    }

    /// Indices (into `entries`) of the reduced rows.
    pub fn reduced_entries(&self) -> &[usize] {
        &self.reduced_entries
    }

    /// The z-coordinate behind matrix cell (row, col), or None on a labeling
    /// conflict (where the entry is structurally zero).
    pub fn pair_assign(&self, row: usize, col: usize) -> Option<Assign> {
        self.entries[row].union(&self.entries[col])
    }

    pub fn coords(&self) -> &[Assign] {
        &self.coords
    }

    pub fn coord_id(&self, a: &Assign) -> Option<usize> {
        self.coord_lookup.get(a).copied()
    }

    pub fn full_coords(&self) -> &[Assign] {
        &self.full_coords
    }

    pub fn full_coord_id(&self, a: &Assign) -> Option<usize> {
        self.full_coord_lookup.get(a).copied()
    }

    /// Expansion of a full coordinate over reduced coordinates.
    pub fn expansion(&self, full_coord: usize) -> &AffineExpr {
        &self.expansion[full_coord]
    }

    /// Structural equality rows over reduced coordinates (z_∅ pin plus
    /// monomial substitutions).
    pub fn structural_rows(&self) -> &[(Vec<f64>, f64)] {
        &self.structural_rows
    }

    /// The elimination of the structural rows alone.
    pub fn structural_basis(&self) -> &AffineBasis {
        &self.basis
    }

    /// Number of free z-coordinates after the structural quotient.
    pub fn free_count(&self) -> usize {
        self.basis.free.len()
    }

    pub fn monomials(&self) -> &[MonomialConstraint] {
        &self.monomials
    }

    /// Full z-vector (over `full_coords`) from reduced coordinate values.
    pub fn full_from_reduced(&self, reduced: &[f64]) -> Vec<f64> {
        self.expansion.iter().map(|e| e.eval(reduced)).collect()
    }

    /// Builds the full moment matrix from a full z-vector.
    pub fn gram_from_full_z(&self, full_z: &[f64]) -> nalgebra::DMatrix<f64> {
        let m = self.side();
        let mut gram = nalgebra::DMatrix::zeros(m, m);
        for r in 0..m {
            for c in r..m {
                let v = match self.pair_assign(r, c) {
                    Some(a) => full_z[self.full_coord_lookup[&a]],
                    None => 0.0,
                };
                gram[(r, c)] = v;
                gram[(c, r)] = v;
            }
        }
        gram
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn asg(pairs: &[(usize, usize)]) -> Assign {
        Assign::from_pairs(pairs.to_vec()).unwrap()
    }

    #[test]
    fn single_vertex_two_labels_one_round() {
        // Matrix side 3: (∅), (u,0), (u,1); one free coordinate.
        let idx = build_moment_index(1, 2, 1, &[], 1_000_000).unwrap();
        assert_eq!(idx.side(), 3);
        assert_eq!(idx.entry(0), &Assign::empty());
        assert_eq!(idx.free_count(), 1);
    }

    #[test]
    fn two_vertices_side_five() {
        let idx = build_moment_index(2, 2, 1, &[], 1_000_000).unwrap();
        assert_eq!(idx.side(), 1 + 2 * 2);
    }

    #[test]
    fn corpus_scale_sides() {
        // n=6, k=2: full sides 13/73/233 at r′=1/2/3; reduced coordinate
        // count at r′=3 is 2^6 = 64, reduced matrix side Σ_{s≤3} C(6,s) = 42.
        let sides = [(1, 13), (2, 73), (3, 233)];
        for (rp, side) in sides {
            let idx = build_moment_index(6, 2, rp, &[], 10_000_000).unwrap();
            assert_eq!(idx.side(), side);
        }
        let idx = build_moment_index(6, 2, 3, &[], 10_000_000).unwrap();
        assert_eq!(idx.coords().len(), 64);
        assert_eq!(idx.reduced_side(), 42);
    }

    #[test]
    fn budget_guard_reports_size() {
        let err = build_moment_index(6, 2, 3, &[], 100).unwrap_err();
        assert!(matches!(err, IndexError::BudgetExceeded { side: 233, .. }));
    }

    #[test]
    fn pair_map_conflict_iff_disagreeing_labels() {
        let idx = build_moment_index(3, 2, 1, &[], 1_000_000).unwrap();
        let r = idx.lookup(&asg(&[(0, 0)])).unwrap();
        let c_conflict = idx.lookup(&asg(&[(0, 1)])).unwrap();
        let c_ok = idx.lookup(&asg(&[(1, 1)])).unwrap();
        assert!(idx.pair_assign(r, c_conflict).is_none());
        assert_eq!(idx.pair_assign(r, c_ok).unwrap(), asg(&[(0, 0), (1, 1)]));
        // Symmetry and shared coordinates for equal unions.
        assert_eq!(idx.pair_assign(c_ok, r), idx.pair_assign(r, c_ok));
    }

    #[test]
    fn independent_set_edge_monomial_pins_pair_coordinate() {
        // x_u(0)x_v(0) = 0 pins z_{({u,v},(0,0))} to 0.
        let mc = MonomialConstraint { assign: asg(&[(0, 0), (1, 0)]), value: 0 };
        let idx = build_moment_index(2, 2, 1, &[mc], 1_000_000).unwrap();
        let coord = idx.coord_id(&asg(&[(0, 0), (1, 0)])).unwrap();
        let expr = &idx.structural_basis().coord_expr[coord];
        assert_eq!(expr.constant, 0.0);
        assert!(expr.terms.is_empty());
    }

    #[test]
    fn foreground_pin_forces_label() {
        // x_u(1) = x_∅ with k=2 forces z_{(u,0)} = 0 (label 1 always taken).
        let mc = MonomialConstraint { assign: asg(&[(0, 1)]), value: 1 };
        let idx = build_moment_index(2, 2, 1, &[mc], 1_000_000).unwrap();
        let coord = idx.coord_id(&asg(&[(0, 0)])).unwrap();
        let z_empty = idx.coord_id(&Assign::empty()).unwrap();
        for free_vals_len in [idx.free_count()] {
            let vals = idx.structural_basis().coords_from_free(&vec![0.3; free_vals_len]);
            assert_eq!(vals[z_empty], 1.0);
            assert!((vals[coord]).abs() < 1e-12);
        }
    }

    #[test]
    fn expansion_respects_label_sums() {
        // For every u: Σ_g z_{(u,g)} expands to z_∅ identically.
        let idx = build_moment_index(3, 3, 2, &[], 1_000_000).unwrap();
        let reduced_dim = idx.coords().len();
        let fake_reduced: Vec<f64> =
            (0..reduced_dim).map(|i| 0.1 + 0.01 * i as f64).collect();
        let full = idx.full_from_reduced(&fake_reduced);
        let empty_id = idx.full_coord_id(&Assign::empty()).unwrap();
        for u in 0..3 {
            let total: f64 = (0..3)
                .map(|g| full[idx.full_coord_id(&Assign::singleton(u, g)).unwrap()])
                .sum();
            assert!((total - full[empty_id]).abs() < 1e-12);
        }
    }

    #[test]
    fn gram_from_integral_labeling_is_rank_one_consistent() {
        // Point distribution on labeling (0→1, 1→0): z_(A,h) = 1 iff h matches.
        let idx = build_moment_index(2, 2, 2, &[], 1_000_000).unwrap();
        let labeling = [1usize, 0usize];
        let full_z: Vec<f64> = idx
            .full_coords()
            .iter()
            .map(|a| {
                let matches = a.pairs().iter().all(|&(u, l)| labeling[u] == l);
                if matches { 1.0 } else { 0.0 }
            })
            .collect();
        let gram = idx.gram_from_full_z(&full_z);
        let eigs = crate::linalg::spectrum(&gram).unwrap();
        // Rank 1 PSD with a single nonzero eigenvalue.
        assert!(eigs.eigenvalues.first().unwrap() > &-1e-12);
        let nonzero = eigs.eigenvalues.iter().filter(|&&v| v > 1e-9).count();
        assert_eq!(nonzero, 1);
    }
}
