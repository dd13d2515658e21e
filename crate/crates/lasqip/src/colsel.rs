//! Column-subset selection for low-rank approximation.
//!
//! Provides projectors onto selected column spans, the weighted
//! projection-distance functional Tr(XᵀX_S^⊥X·diag(w)), and a selection
//! procedure meeting the tail-eigenvalue bound
//! (r′+1)/(r′−r+1)·Σ_{i≥r+1} σ_i. The selection heuristic is greedy pivoting;
//! the bound is asserted after selection and an exhaustive search over all
//! size-r′ subsets serves as both fallback and validation oracle.

use crate::linalg::{generalized_spectrum, symmetric_eigen, LinalgError};
use nalgebra::DMatrix;
use thiserror::Error;

/// Singular values below this fraction of the largest are treated as zero
/// when computing column spans.
const RANK_TOL: f64 = 1e-10;

/// Errors from column selection.
#[derive(Debug, Error)]
pub enum ColselError {
    #[error("requested {r_prime} columns but the matrix has only {cols}")]
    TooManyColumns { r_prime: usize, cols: usize },
    #[error("exhaustive search over C({cols}, {r_prime}) subsets exceeds budget {budget}")]
    BudgetExceeded { cols: usize, r_prime: usize, budget: u64 },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// A selected column subset with its certified residual mass.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSelection {
    /// Selected column indices, ascending.
    pub columns: Vec<usize>,
    /// Tr(XᵀX_S^⊥X·diag(w)) for the weighted matrix the selection ran on.
    pub projection_distance: f64,
    /// The tail-eigenvalue bound (r′+1)/(r′−r+1)·Σ_{i≥r+1} σ_i certified for
    /// this selection (set to the exhaustive minimum's bound when produced by
    /// the oracle path).
    pub bound: f64,
}

/// Orthonormal basis of span{X_u : u ∈ S}, with rank decided by the
/// `RANK_TOL` singular-value cutoff.
fn span_basis(x: &DMatrix<f64>, s: &[usize]) -> DMatrix<f64> {
    if s.is_empty() {
        return DMatrix::zeros(x.nrows(), 0);
    }
    let sub = DMatrix::from_fn(x.nrows(), s.len(), |r, c| x[(r, s[c])]);
    let svd = sub.svd(true, false);
    let u = svd.u.as_ref().expect("u requested");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&sv| sv > RANK_TOL * sigma_max && sv > 0.0)
        .count();
    u.columns(0, rank).into_owned()
}

/// X_S^⊥X: the columns of X with their components in span{X_u : u∈S}
/// projected out.
pub fn project_out(x: &DMatrix<f64>, s: &[usize]) -> DMatrix<f64> {
    let q = span_basis(x, s);
    if q.ncols() == 0 {
        return x.clone();
    }
    x - &q * (q.transpose() * x)
}

/// The orthogonal projector onto span{X_u : u ∈ S}.
pub fn span_projector(x: &DMatrix<f64>, s: &[usize]) -> DMatrix<f64> {
    let q = span_basis(x, s);
    if q.ncols() == 0 {
        return DMatrix::zeros(x.nrows(), x.nrows());
    }
    &q * q.transpose()
}

/// Σ_u weights_u·‖X_S^⊥X_u‖² = Tr(XᵀX_S^⊥X·diag(weights)).
pub fn projection_distance(x: &DMatrix<f64>, s: &[usize], weights: &[f64]) -> f64 {
    assert_eq!(weights.len(), x.ncols());
    let residual = project_out(x, s);
    (0..x.ncols()).map(|u| weights[u] * residual.column(u).norm_squared()).sum()
}

/// Descending eigenvalues σ_i of the weighted Gram matrix
/// diag(w)^{1/2}·XᵀX·diag(w)^{1/2}.
fn weighted_gram_sigmas(x: &DMatrix<f64>, weights: &[f64]) -> Vec<f64> {
    let sqrt_w: Vec<f64> = weights.iter().map(|&w| w.sqrt()).collect();
    let gram = x.transpose() * x;
    let wgram = DMatrix::from_fn(gram.nrows(), gram.ncols(), |i, j| {
        gram[(i, j)] * sqrt_w[i] * sqrt_w[j]
    });
    let (mut values, _) = symmetric_eigen(&wgram);
    values.reverse();
    values
}

/// The tail bound (r′+1)/(r′−r+1)·Σ_{i≥r+1} σ_i (σ 1-based descending).
fn tail_bound(sigmas: &[f64], r: usize, r_prime: usize) -> f64 {
    let tail: f64 = sigmas.iter().skip(r).sum();
    ((r_prime + 1) as f64 / (r_prime - r + 1) as f64) * tail
}

/// Selects ≤ `r_prime` columns of X·diag(weights)^{1/2} whose span certifies
/// the tail-eigenvalue bound for rank `r`.
///
/// Greedy forward selection pivots on the largest weighted residual column;
/// if the greedy set misses the bound, the exhaustive minimizer (which meets
/// it by the existence theorem) is returned instead.
pub fn select_columns(
    x: &DMatrix<f64>,
    r: usize,
    r_prime: usize,
    weights: &[f64],
) -> Result<ColumnSelection, ColselError> {
    assert!(r >= 1 && r <= r_prime, "need 1 <= r <= r_prime");
    if r_prime > x.ncols() {
        return Err(ColselError::TooManyColumns { r_prime, cols: x.ncols() });
    }
    let sigmas = weighted_gram_sigmas(x, weights);
    let bound = tail_bound(&sigmas, r, r_prime);
    let selected = greedy_select(x, r_prime, weights);
    let distance = projection_distance(x, &selected, weights);
    let tol = 1e-9 * (1.0 + sigmas.iter().sum::<f64>().abs());
    if distance <= bound + tol {
        return Ok(ColumnSelection { columns: selected, projection_distance: distance, bound });
    }
    // Greedy missed the contractual bound; fall back to the exact minimizer.
    let mut exact = exhaustive_select(x, r_prime, weights)?;
    exact.bound = bound;
    Ok(exact)
}

fn greedy_select(x: &DMatrix<f64>, r_prime: usize, weights: &[f64]) -> Vec<usize> {
    let sqrt_w: Vec<f64> = weights.iter().map(|&w| w.sqrt()).collect();
    let mut residual = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * sqrt_w[j]);
    let scale = residual.norm_squared().max(1.0);
    let mut selected = Vec::new();
    for _ in 0..r_prime {
        // Zero-weight columns have zero residual and are never picked;
        // ties break toward the lowest column index.
        let mut best: Option<(usize, f64)> = None;
        for u in 0..residual.ncols() {
            if selected.contains(&u) {
                continue;
            }
            let norm2 = residual.column(u).norm_squared();
            if norm2 <= RANK_TOL * scale {
                continue;
            }
            if best.map_or(true, |(_, b)| norm2 > b) {
                best = Some((u, norm2));
            }
        }
        let Some((pivot, norm2)) = best else { break };
        selected.push(pivot);
        let dir = residual.column(pivot) / norm2.sqrt();
        let coeffs = dir.transpose() * &residual;
        residual -= dir * coeffs;
    }
    selected.sort_unstable();
    selected
}

/// The exact minimizer of the weighted projection distance over all
/// subsets of exactly `r_prime` columns (the definitional δ_{r′}).
pub fn exhaustive_select(
    x: &DMatrix<f64>,
    r_prime: usize,
    weights: &[f64],
) -> Result<ColumnSelection, ColselError> {
    const BUDGET: u64 = 1_000_000;
    let cols = x.ncols();
    if r_prime > cols {
        return Err(ColselError::TooManyColumns { r_prime, cols });
    }
    if binomial(cols as u64, r_prime as u64) > BUDGET {
        return Err(ColselError::BudgetExceeded { cols, r_prime, budget: BUDGET });
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    let mut subset: Vec<usize> = (0..r_prime).collect();
    loop {
        let d = projection_distance(x, &subset, weights);
        // Deterministic reduction: min by value, then lexicographic subset.
        if best.as_ref().map_or(true, |(_, bd)| d < *bd) {
            best = Some((subset.clone(), d));
        }
        if !next_combination(&mut subset, cols) {
            break;
        }
    }
    let (columns, projection_distance) =
        best.unwrap_or((Vec::new(), projection_distance(x, &[], weights)));
    Ok(ColumnSelection { columns, projection_distance, bound: projection_distance })
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc.saturating_mul(n - i) / (i + 1);
    }
    acc
}

/// Advances `subset` to the next size-|subset| combination of 0..cols in
/// lexicographic order; returns false after the last one.
pub(crate) fn next_combination(subset: &mut [usize], cols: usize) -> bool {
    let k = subset.len();
    if k == 0 {
        return false;
    }
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < cols - (k - i) {
            subset[i] += 1;
            for j in (i + 1)..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// λ_{r+1}[L; diag(L)]: the (r+1)-th smallest generalized eigenvalue of a
/// PSD matrix against its own diagonal (∞-sentinels excluded).
pub fn generalized_bound(l: &DMatrix<f64>, r: usize) -> Result<f64, ColselError> {
    Ok(generalized_spectrum(l)?.lambda(r + 1))
}
