//! Partial label assignments, indicator-monomial algebra, and affine
//! elimination over moment coordinates.
//!
//! A moment coordinate is indexed by a partial assignment (A, h): a vertex
//! subset A with one label per vertex. Products of 0/1 label indicators obey
//! x_u(i)·x_u(i) = x_u(i) and x_u(i)·x_u(j) = 0 for i ≠ j, so a polynomial in
//! indicators is a weighted sum of partial assignments. Eliminating the last
//! label via x_u(k−1) = 1 − Σ_{j<k−1} x_u(j) rewrites any such sum over the
//! reduced coordinates (labels < k−1 only), which is the coordinate system
//! the SDP solver works in.

use std::collections::HashMap;

pub type Vertex = usize;
pub type Label = usize;

/// A partial labeling: sorted (vertex, label) pairs, one label per vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub struct Assign(Vec<(Vertex, Label)>);

impl Assign {
    pub fn empty() -> Self {
        Assign(Vec::new())
    }

    pub fn singleton(u: Vertex, label: Label) -> Self {
        Assign(vec![(u, label)])
    }

    /// Builds from pairs; returns None if a vertex appears with two labels.
    pub fn from_pairs(mut pairs: Vec<(Vertex, Label)>) -> Option<Self> {
        pairs.sort_unstable();
        pairs.dedup();
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return None;
            }
        }
        Some(Assign(pairs))
    }

    pub fn pairs(&self) -> &[(Vertex, Label)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn vertices(&self) -> impl Iterator<Item = Vertex> + '_ {
        self.0.iter().map(|&(u, _)| u)
    }

    pub fn label_of(&self, u: Vertex) -> Option<Label> {
        self.0.iter().find(|&&(v, _)| v == u).map(|&(_, l)| l)
    }

    /// Union of two assignments; None when they conflict on some vertex
    /// (the orthogonality condition).
    pub fn union(&self, other: &Assign) -> Option<Assign> {
        let mut merged = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (a, b) = (self.0[i], other.0[j]);
            if a.0 < b.0 {
                merged.push(a);
                i += 1;
            } else if b.0 < a.0 {
                merged.push(b);
                j += 1;
            } else {
                if a.1 != b.1 {
                    return None;
                }
                merged.push(a);
                i += 1;
                j += 1;
            }
        }
        merged.extend_from_slice(&self.0[i..]);
        merged.extend_from_slice(&other.0[j..]);
        Some(Assign(merged))
    }

    /// The assignment with vertex `u` dropped.
    pub fn without(&self, u: Vertex) -> Assign {
        Assign(self.0.iter().copied().filter(|&(v, _)| v != u).collect())
    }

    /// The assignment with vertex `u` (re)labeled `label`.
    pub fn with(&self, u: Vertex, label: Label) -> Assign {
        let mut pairs = self.without(u).0;
        pairs.push((u, label));
        pairs.sort_unstable();
        Assign(pairs)
    }

    /// True when every label is < k−1 (the reduced coordinate system).
    pub fn is_reduced(&self, k: usize) -> bool {
        self.0.iter().all(|&(_, l)| l < k - 1)
    }

    /// Canonical text key, e.g. `{0,3}:(1,0)`; the empty assignment is `{}:()`.
    pub fn canonical_key(&self) -> String {
        let verts: Vec<String> = self.0.iter().map(|&(u, _)| u.to_string()).collect();
        let labels: Vec<String> = self.0.iter().map(|&(_, l)| l.to_string()).collect();
        format!("{{{}}}:({})", verts.join(","), labels.join(","))
    }
}

/// A polynomial in label indicators: weighted sum of partial assignments.
#[derive(Debug, Clone, Default)]
pub struct Poly {
    terms: HashMap<Assign, f64>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn mono(a: Assign) -> Self {
        let mut terms = HashMap::new();
        terms.insert(a, 1.0);
        Poly { terms }
    }

    pub fn add_term(&mut self, a: Assign, coeff: f64) {
        let slot = self.terms.entry(a).or_insert(0.0);
        *slot += coeff;
        if *slot == 0.0 {
            // Keep exact integer cancellations from leaving ghost terms.
        }
    }

    pub fn add(&mut self, other: &Poly) {
        for (a, &c) in &other.terms {
            self.add_term(a.clone(), c);
        }
    }

    pub fn scale(&mut self, s: f64) {
        for c in self.terms.values_mut() {
            *c *= s;
        }
    }

    /// Multiplies by a single monomial; conflicting terms vanish.
    pub fn mul_mono(&self, a: &Assign) -> Poly {
        let mut out = Poly::zero();
        for (t, &c) in &self.terms {
            if let Some(u) = t.union(a) {
                out.add_term(u, c);
            }
        }
        out
    }

    /// Rewrites every occurrence of the last label k−1 via
    /// x_u(k−1) = 1 − Σ_{j<k−1} x_u(j), leaving only reduced assignments.
    pub fn reduce(&self, k: usize) -> Poly {
        assert!(k >= 2, "need at least two labels");
        let mut out = Poly::zero();
        let mut stack: Vec<(Assign, f64)> =
            self.terms.iter().map(|(a, &c)| (a.clone(), c)).collect();
        // Deterministic processing order (HashMap iteration is not).
        stack.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.partial_cmp(&b.1).unwrap()));
        while let Some((a, c)) = stack.pop() {
            if c == 0.0 {
                continue;
            }
            match a.pairs().iter().find(|&&(_, l)| l == k - 1).copied() {
                None => out.add_term(a, c),
                Some((u, _)) => {
                    let base = a.without(u);
                    stack.push((base.clone(), c));
                    for j in 0..(k - 1) {
                        stack.push((base.with(u, j), -c));
                    }
                }
            }
        }
        out.terms.retain(|_, c| *c != 0.0);
        out
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Assign, f64)> + '_ {
        self.terms.iter().map(|(a, &c)| (a, c))
    }

    /// Dense coefficient row over a coordinate enumeration. Every term must
    /// be present in the lookup.
    pub fn to_row(&self, coord_lookup: &HashMap<Assign, usize>, width: usize) -> Vec<f64> {
        let mut row = vec![0.0; width];
        for (a, c) in self.terms() {
            let idx = *coord_lookup
                .get(a)
                .unwrap_or_else(|| panic!("assignment {} outside coordinate space", a.canonical_key()));
            row[idx] += c;
        }
        row
    }
}

/// An affine expression c₀ + Σ coeff·var over some variable enumeration.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AffineExpr {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        AffineExpr { constant: c, terms: Vec::new() }
    }

    pub fn variable(idx: usize) -> Self {
        AffineExpr { constant: 0.0, terms: vec![(idx, 1.0)] }
    }

    pub fn eval(&self, vars: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * vars[i]).sum::<f64>()
    }

    /// Substitutes each variable by the corresponding expression over a new
    /// variable space.
    pub fn compose(&self, substitutions: &[AffineExpr]) -> AffineExpr {
        let mut constant = self.constant;
        let mut acc: HashMap<usize, f64> = HashMap::new();
        for &(i, c) in &self.terms {
            let sub = &substitutions[i];
            constant += c * sub.constant;
            for &(j, cj) in &sub.terms {
                *acc.entry(j).or_insert(0.0) += c * cj;
            }
        }
        let mut terms: Vec<(usize, f64)> =
            acc.into_iter().filter(|&(_, c)| c != 0.0).collect();
        terms.sort_unstable_by_key(|&(i, _)| i);
        AffineExpr { constant, terms }
    }
}

/// Result of eliminating affine equality rows over a coordinate space:
/// every coordinate expressed over the surviving free coordinates.
#[derive(Debug, Clone)]
pub struct AffineBasis {
    /// Coordinate indices that remain free, ascending.
    pub free: Vec<usize>,
    /// For each original coordinate, its expression over free-variable
    /// indices 0..free.len().
    pub coord_expr: Vec<AffineExpr>,
}

/// An equality system has no solution.
#[derive(Debug, thiserror::Error)]
#[error("inconsistent affine constraints: residual {residual:.3e} on an eliminated row")]
pub struct Inconsistent {
    pub residual: f64,
}

impl AffineBasis {
    /// Gauss–Jordan elimination of `rows` (coefficients over `width`
    /// coordinates, with right-hand sides) producing the free/pivot split.
    ///
    /// Redundant rows are dropped; inconsistent ones are an error. Pivots are
    /// chosen by largest absolute value for stability, with ties broken by
    /// highest coordinate index so low-index coordinates (e.g. z_∅ aside)
    /// tend to stay free and readable.
    pub fn eliminate(width: usize, rows: &[(Vec<f64>, f64)]) -> Result<AffineBasis, Inconsistent> {
        let mut reduced: Vec<(Vec<f64>, f64)> = Vec::new();
        let mut pivot_cols: Vec<usize> = Vec::new();
        for (coeffs, rhs) in rows {
            let mut row = coeffs.clone();
            let mut b = *rhs;
            debug_assert_eq!(row.len(), width);
            for (r, &pc) in reduced.iter().zip(&pivot_cols) {
                let factor = row[pc];
                if factor != 0.0 {
                    for (x, y) in row.iter_mut().zip(&r.0) {
                        *x -= factor * y;
                    }
                    b -= factor * r.1;
                }
            }
            let scale = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let orig_scale = coeffs.iter().fold(rhs.abs(), |m, v| m.max(v.abs())).max(1.0);
            if scale <= 1e-10 * orig_scale {
                if b.abs() > 1e-8 * orig_scale {
                    return Err(Inconsistent { residual: b.abs() });
                }
                continue; // redundant row
            }
            let pivot = (0..width)
                .filter(|&c| row[c].abs() > 1e-10 * scale)
                .max_by(|&a, &bb| {
                    row[a].abs().partial_cmp(&row[bb].abs()).unwrap().then(a.cmp(&bb))
                })
                .unwrap();
            let p = row[pivot];
            for x in row.iter_mut() {
                *x /= p;
            }
            b /= p;
            // Clear this column from earlier rows (Jordan step).
            for (r, _) in reduced.iter_mut().zip(0..) {
                let factor = r.0[pivot];
                if factor != 0.0 {
                    for (x, y) in r.0.iter_mut().zip(&row) {
                        *x -= factor * y;
                    }
                    r.1 -= factor * b;
                }
            }
            reduced.push((row, b));
            pivot_cols.push(pivot);
        }
        let mut is_pivot = vec![false; width];
        for &c in &pivot_cols {
            is_pivot[c] = true;
        }
        let free: Vec<usize> = (0..width).filter(|&c| !is_pivot[c]).collect();
        let free_slot: HashMap<usize, usize> =
            free.iter().enumerate().map(|(s, &c)| (c, s)).collect();
        let mut coord_expr: Vec<AffineExpr> = (0..width)
            .map(|c| match free_slot.get(&c) {
                Some(&s) => AffineExpr::variable(s),
                None => AffineExpr::default(),
            })
            .collect();
        for ((row, b), &pc) in reduced.iter().zip(&pivot_cols) {
            let mut expr = AffineExpr::constant(*b);
            for (c, &coeff) in row.iter().enumerate() {
                if c != pc && coeff != 0.0 {
                    if let Some(&s) = free_slot.get(&c) {
                        expr.terms.push((s, -coeff));
                    }
                    // Non-free, non-pivot coefficients cannot remain after
                    // Gauss–Jordan: every other pivot column was cleared.
                    debug_assert!(free_slot.contains_key(&c) || coeff.abs() < 1e-9);
                }
            }
            expr.terms.sort_unstable_by_key(|&(i, _)| i);
            coord_expr[pc] = expr;
        }
        Ok(AffineBasis { free, coord_expr })
    }

    /// Evaluates all coordinates from free-variable values.
    pub fn coords_from_free(&self, free_vals: &[f64]) -> Vec<f64> {
        self.coord_expr.iter().map(|e| e.eval(free_vals)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn asg(pairs: &[(usize, usize)]) -> Assign {
        Assign::from_pairs(pairs.to_vec()).unwrap()
    }

    #[test]
    fn union_merges_and_detects_conflicts() {
        let a = asg(&[(0, 1), (2, 0)]);
        let b = asg(&[(1, 1), (2, 0)]);
        assert_eq!(a.union(&b).unwrap(), asg(&[(0, 1), (1, 1), (2, 0)]));
        let c = asg(&[(2, 1)]);
        assert!(a.union(&c).is_none());
    }

    #[test]
    fn from_pairs_rejects_two_labels_on_one_vertex() {
        assert!(Assign::from_pairs(vec![(0, 0), (0, 1)]).is_none());
        assert_eq!(Assign::from_pairs(vec![(0, 1), (0, 1)]).unwrap().len(), 1);
    }

    #[test]
    fn canonical_key_format() {
        assert_eq!(Assign::empty().canonical_key(), "{}:()");
        assert_eq!(asg(&[(3, 0), (1, 2)]).canonical_key(), "{1,3}:(2,0)");
    }

    #[test]
    fn mul_mono_applies_idempotency_and_conflict() {
        let p = Poly::mono(asg(&[(0, 1)]));
        let same = p.mul_mono(&asg(&[(0, 1)]));
        assert_eq!(same.terms().count(), 1);
        let conflict = p.mul_mono(&asg(&[(0, 0)]));
        assert_eq!(conflict.terms().count(), 0);
    }

    #[test]
    fn reduce_expands_last_label_k2() {
        // x_u(1) → 1 − x_u(0) for k = 2.
        let p = Poly::mono(asg(&[(0, 1)])).reduce(2);
        let terms: HashMap<String, f64> =
            p.terms().map(|(a, c)| (a.canonical_key(), c)).collect();
        assert_eq!(terms.len(), 2);
        assert_eq!(terms["{}:()"], 1.0);
        assert_eq!(terms["{0}:(0)"], -1.0);
    }

    #[test]
    fn reduce_pair_with_two_last_labels_k3() {
        // x_u(2)x_v(2) for k=3 expands to (1−x_u(0)−x_u(1))(1−x_v(0)−x_v(1)):
        // 9 reduced terms.
        let p = Poly::mono(asg(&[(0, 2), (1, 2)])).reduce(3);
        assert_eq!(p.terms().count(), 9);
        let total: f64 = p.terms().map(|(_, c)| c).sum();
        // Evaluating all indicators at 0 keeps only the constant term: 1.
        assert_eq!(
            p.terms().filter(|(a, _)| a.is_empty()).map(|(_, c)| c).next(),
            Some(1.0)
        );
        // Coefficients are ±1 summing to 1 (inclusion–exclusion signs).
        assert_eq!(total, 1.0);
    }

    #[test]
    fn reduce_leaves_reduced_terms_alone() {
        let p = Poly::mono(asg(&[(0, 0), (3, 1)]));
        let r = p.reduce(3);
        assert_eq!(r.terms().count(), 1);
        assert!(r.terms().all(|(a, c)| a.is_reduced(3) && c == 1.0));
    }

    #[test]
    fn affine_compose() {
        // e = 2 + 3·v0, v0 = 1 − v1 ⇒ e = 5 − 3·v1.
        let e = AffineExpr { constant: 2.0, terms: vec![(0, 3.0)] };
        let sub = vec![AffineExpr { constant: 1.0, terms: vec![(1, -1.0)] }];
        // Substitution slot 1 refers to the new variable space directly.
        let composed = e.compose(&sub);
        assert_eq!(composed.constant, 5.0);
        assert_eq!(composed.terms, vec![(1, -3.0)]);
    }

    #[test]
    fn eliminate_simple_pin_and_identification() {
        // Coordinates z0,z1,z2 with rows: z0 = 1, z1 − z2 = 0.
        let rows = vec![
            (vec![1.0, 0.0, 0.0], 1.0),
            (vec![0.0, 1.0, -1.0], 0.0),
        ];
        let basis = AffineBasis::eliminate(3, &rows).unwrap();
        assert_eq!(basis.free.len(), 1);
        let vals = basis.coords_from_free(&[0.25]);
        assert_eq!(vals[0], 1.0);
        assert_eq!(vals[1], vals[2]);
        assert_eq!(vals[1], 0.25);
    }

    #[test]
    fn eliminate_detects_inconsistency_and_drops_redundancy() {
        let rows = vec![
            (vec![1.0, 1.0], 1.0),
            (vec![2.0, 2.0], 2.0), // redundant
            (vec![1.0, 1.0], 3.0), // inconsistent
        ];
        assert!(AffineBasis::eliminate(2, &rows[..2]).is_ok());
        assert!(AffineBasis::eliminate(2, &rows).is_err());
    }

    #[test]
    fn eliminate_satisfies_original_rows() {
        // Random-ish consistent system: check all rows hold for any free values.
        let rows = vec![
            (vec![1.0, 2.0, 0.0, -1.0], 3.0),
            (vec![0.0, 1.0, 1.0, 1.0], 2.0),
        ];
        let basis = AffineBasis::eliminate(4, &rows).unwrap();
        assert_eq!(basis.free.len(), 2);
        for free_vals in [[0.0, 0.0], [1.0, -2.0], [0.3, 0.7]] {
            let z = basis.coords_from_free(&free_vals);
            for (coeffs, rhs) in &rows {
                let lhs: f64 = coeffs.iter().zip(&z).map(|(c, zv)| c * zv).sum();
                assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }
}
