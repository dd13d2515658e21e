//! Propagation rounding of solved relaxations.
//!
//! A solved relaxation is rounded by picking a small seed set S* of vertices,
//! sampling a joint labeling f of S* with probability ‖x_{S*}(f)‖², and then
//! labeling every other vertex independently from the conditional marginals
//! ⟨x̄_{S*}(f), x_u(j)⟩/‖x_{S*}(f)‖. This module provides the seed-set search
//! (iterated column selection on the projected singleton vectors), the
//! sampling distribution itself, and exact closed-form audits of the rounded
//! expectation: the marginal and pairwise label probabilities and the expected
//! quadratic form E[x̃ᵀLx̃] = Tr(𝒳ᵀΠ_{S*}^⊥𝒳 diag L) + Tr(𝒳ᵀΠ_{S*}𝒳 L).

use crate::colsel::{self, ColselError};
use crate::lasserre::{extract_vectors, Assign, LasserreError, LasserreSolution};
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Seed labelings with squared norm below this are treated as outside the
/// support of the seed distribution.
const SUPPORT_TOL: f64 = 1e-10;

/// Knobs for building the sampling distribution.
#[derive(Debug, Clone)]
pub struct RoundingOptions {
    /// Cap on the number of seed labelings k^{|S*|} enumerated when building
    /// the distribution.
    pub labeling_budget: u64,
}

impl Default for RoundingOptions {
    fn default() -> Self {
        RoundingOptions { labeling_budget: 1_000_000 }
    }
}

/// Errors from seed selection and rounding.
#[derive(Debug, Error)]
pub enum RoundingError {
    #[error("seed set of {size} vertices exceeds the solution's {r_prime} rounds")]
    InsufficientRounds { size: usize, r_prime: usize },
    #[error("enumerating {k}^{size} seed labelings exceeds budget {budget}")]
    LabelingBudget { k: usize, size: usize, budget: u64 },
    #[error("pairwise probability needs two distinct vertices, got {u} twice")]
    SameVertex { u: usize },
    #[error("guarantee matrix must be {expected}×{expected}, got {rows}×{cols}")]
    MatrixShape { expected: usize, rows: usize, cols: usize },
    #[error(transparent)]
    Colsel(#[from] ColselError),
    #[error(transparent)]
    Lasserre(#[from] LasserreError),
}

/// One augmentation round of the seed search.
#[derive(Debug, Clone)]
pub struct AugmentationStep {
    /// Vertices added to S* this round, ascending.
    pub added: Vec<usize>,
    /// True when the solution's round budget clipped the vertices this round
    /// wanted to add; the per-round residual bound is not certified then.
    pub truncated: bool,
    /// Residual mass Tr(𝒳ᵀΠ_{S*}^⊥𝒳 diag L) after the round.
    pub delta: f64,
    /// Seeded mass Tr(𝒳ᵀΠ_{S*}𝒳 L) after the round.
    pub eta_seed: f64,
    /// Expected quadratic form delta + eta_seed after the round.
    pub xi: f64,
    /// Certified per-round cap on delta: (η − η_prev)/λ′ where η_prev is the
    /// seeded mass before the round and λ′ = (1−ε)·min{λ_{r+1}, 1}.
    pub claim_bound: f64,
}

/// A chosen seed set with its certified rounding guarantee.
#[derive(Debug, Clone)]
pub struct SeedSet {
    /// Seed vertices, ascending.
    pub s_star: Vec<usize>,
    /// Augmentation rounds used by the iterative search.
    pub iterations: usize,
    /// E[x̃ᵀLx̃] for this seed set, by the closed form.
    pub certified_bound: f64,
    /// Tr(𝒳ᵀ𝒳L), the relaxation's own mass against L.
    pub eta: f64,
    /// (r+1)-th smallest generalized eigenvalue of L against diag(L).
    pub lambda: f64,
    /// The contract (1+ε)/(1−ε)·η/min{λ_{r+1},1} the bound is held to.
    pub target: f64,
    /// True when the iterative search missed the target and the seed came
    /// from exhaustive enumeration instead.
    pub used_fallback: bool,
    /// Per-round log of the iterative search.
    pub augmentations: Vec<AugmentationStep>,
}

impl SeedSet {
    /// Whether the certified bound meets the target (with slack `tol`).
    pub fn meets_target(&self, tol: f64) -> bool {
        self.certified_bound <= self.target + tol
    }
}

/// Validates a seed set against a solution: sorted, deduplicated, in range,
/// and small enough that the vectors x_S(f) exist in the hierarchy.
fn check_seed(sol: &LasserreSolution, s: &[usize]) -> Result<Vec<usize>, RoundingError> {
    let mut sorted = s.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    assert!(sorted.iter().all(|&u| u < sol.n()), "seed vertex out of range");
    if sorted.len() > sol.r_prime() {
        return Err(RoundingError::InsufficientRounds {
            size: sorted.len(),
            r_prime: sol.r_prime(),
        });
    }
    Ok(sorted)
}

fn check_matrix(sol: &LasserreSolution, l: &DMatrix<f64>) -> Result<(), RoundingError> {
    let expected = sol.n() * sol.k();
    if l.nrows() != expected || l.ncols() != expected {
        return Err(RoundingError::MatrixShape {
            expected,
            rows: l.nrows(),
            cols: l.ncols(),
        });
    }
    Ok(())
}

/// All labelings f ∈ [k]^S as assignments, in mixed-radix order.
fn seed_labelings(s: &[usize], k: usize) -> Vec<Assign> {
    let mut out = Vec::new();
    let mut labels = vec![0usize; s.len()];
    loop {
        let pairs: Vec<(usize, usize)> = s.iter().copied().zip(labels.iter().copied()).collect();
        out.push(Assign::from_pairs(pairs).expect("distinct vertices"));
        let mut pos = s.len();
        loop {
            if pos == 0 {
                return out;
            }
            pos -= 1;
            labels[pos] += 1;
            if labels[pos] < k {
                break;
            }
            labels[pos] = 0;
        }
    }
}

/// The singleton-vector matrix 𝒳: one column per (u, i) at position u·k + i,
/// in the ambient space of the extracted vector family.
pub fn singleton_matrix(sol: &LasserreSolution) -> Result<DMatrix<f64>, RoundingError> {
    let fam = extract_vectors(sol.gram())?;
    Ok(singleton_matrix_from(sol, &fam.columns))
}

fn singleton_matrix_from(sol: &LasserreSolution, columns: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = (sol.n(), sol.k());
    let mut x = DMatrix::zeros(columns.nrows(), n * k);
    for u in 0..n {
        for i in 0..k {
            let e = sol.index().lookup(&Assign::singleton(u, i)).expect("singleton entry");
            x.set_column(u * k + i, &columns.column(e));
        }
    }
    x
}

/// The orthogonal projector Π_S = Σ_f x̄_S(f)·x̄_S(f)ᵀ onto the span of the
/// seed-labeling vectors (zero-norm labelings skipped).
pub fn projector_pi(sol: &LasserreSolution, s: &[usize]) -> Result<DMatrix<f64>, RoundingError> {
    let s = check_seed(sol, s)?;
    let fam = extract_vectors(sol.gram())?;
    Ok(projector_from(sol, &fam.columns, &s))
}

fn projector_from(sol: &LasserreSolution, columns: &DMatrix<f64>, s: &[usize]) -> DMatrix<f64> {
    let side = columns.nrows();
    let mut pi = DMatrix::zeros(side, side);
    for a in seed_labelings(s, sol.k()) {
        let e = sol.index().lookup(&a).expect("seed entry within rounds");
        let col = columns.column(e);
        let norm2 = col.norm_squared();
        if norm2 > SUPPORT_TOL {
            pi += col * col.transpose() / norm2;
        }
    }
    pi
}

/// Splits E[x̃ᵀLx̃] into the residual mass Tr(XᵀΠ^⊥X diag L) and the seeded
/// mass Tr(XᵀΠX L).
fn xi_split(x: &DMatrix<f64>, pi: &DMatrix<f64>, l: &DMatrix<f64>) -> (f64, f64) {
    let px = pi * x;
    let m = x.transpose() * &px;
    let mut delta = 0.0;
    for u in 0..x.ncols() {
        delta += l[(u, u)] * (x.column(u).norm_squared() - m[(u, u)]);
    }
    let mut eta_seed = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            eta_seed += m[(i, j)] * l[(j, i)];
        }
    }
    (delta, eta_seed)
}

/// The exact expected quadratic form E_{x̃}[x̃ᵀLx̃] of the rounding seeded at
/// S, by the closed form Tr(𝒳ᵀΠ_S^⊥𝒳 diag L) + Tr(𝒳ᵀΠ_S𝒳 L).
pub fn expected_quadratic(
    sol: &LasserreSolution,
    s: &[usize],
    l: &DMatrix<f64>,
) -> Result<f64, RoundingError> {
    let s = check_seed(sol, s)?;
    check_matrix(sol, l)?;
    let fam = extract_vectors(sol.gram())?;
    let x = singleton_matrix_from(sol, &fam.columns);
    let pi = projector_from(sol, &fam.columns, &s);
    let (delta, eta_seed) = xi_split(&x, &pi, l);
    Ok(delta + eta_seed)
}

/// Pr[x̃_u(g) = 1] under the rounding seeded at S, by summing the conditional
/// over all seed labelings: Σ_f ‖x_{S∪u}(f∘g)‖². Algebraically this equals
/// the singleton moment ‖x_u(g)‖² for every S.
pub fn marginal_probability(
    sol: &LasserreSolution,
    s: &[usize],
    u: usize,
    g: usize,
) -> Result<f64, RoundingError> {
    let s = check_seed(sol, s)?;
    let sing = Assign::singleton(u, g);
    let mut total = 0.0;
    for a in seed_labelings(&s, sol.k()) {
        if let Some(un) = a.union(&sing) {
            total += sol.z_of(&un);
        }
    }
    Ok(total)
}

/// Pr[x̃_u(g) = 1 ∧ x̃_v(h) = 1] under the rounding seeded at S, by the
/// explicit sum over seed labelings of the product of conditionals.
pub fn pairwise_probability(
    sol: &LasserreSolution,
    s: &[usize],
    u: usize,
    g: usize,
    v: usize,
    h: usize,
) -> Result<f64, RoundingError> {
    if u == v {
        return Err(RoundingError::SameVertex { u });
    }
    let s = check_seed(sol, s)?;
    let su = Assign::singleton(u, g);
    let sv = Assign::singleton(v, h);
    let mut total = 0.0;
    for a in seed_labelings(&s, sol.k()) {
        let w = sol.z_of(&a);
        if w <= SUPPORT_TOL {
            continue;
        }
        let pu = a.union(&su).map_or(0.0, |un| sol.z_of(&un));
        let pv = a.union(&sv).map_or(0.0, |un| sol.z_of(&un));
        total += pu * pv / w;
    }
    Ok(total)
}

/// The same pairwise probability in projector form:
/// ⟨Π_S x_u(g), Π_S x_v(h)⟩. Equal to [`pairwise_probability`] as an
/// algebraic identity; exposed separately so the two routes can be audited
/// against each other.
pub fn pairwise_projector_form(
    sol: &LasserreSolution,
    s: &[usize],
    u: usize,
    g: usize,
    v: usize,
    h: usize,
) -> Result<f64, RoundingError> {
    if u == v {
        return Err(RoundingError::SameVertex { u });
    }
    let s = check_seed(sol, s)?;
    let fam = extract_vectors(sol.gram())?;
    let pi = projector_from(sol, &fam.columns, &s);
    let eu = sol.index().lookup(&Assign::singleton(u, g)).expect("singleton");
    let ev = sol.index().lookup(&Assign::singleton(v, h)).expect("singleton");
    let xu = fam.columns.column(eu);
    let xv = fam.columns.column(ev);
    Ok((xu.transpose() * &pi * xv)[(0, 0)])
}

/// Picks a seed set S* whose closed-form rounding expectation certifies
/// E[x̃ᵀLx̃] ≤ (1+ε)/(1−ε)·Tr(𝒳ᵀ𝒳L)/min{λ_{r+1}, 1}.
///
/// The search starts from S* = ∅ and augments at most ⌈1/ε⌉ times: each round
/// selects ⌈r/ε⌉ columns of Π_{S*}^⊥𝒳 weighted by diag(L) via column
/// selection and adds the owning vertices. A round may add fewer vertices
/// than selected when the solution's round budget would otherwise be
/// exceeded; if the loop then misses the target, an exhaustive search over
/// all seed sets within the round budget takes over.
pub fn select_seed(
    sol: &LasserreSolution,
    l: &DMatrix<f64>,
    r: usize,
    eps: f64,
) -> Result<SeedSet, RoundingError> {
    assert!(r >= 1, "need r >= 1");
    assert!(eps > 0.0 && eps < 1.0, "need 0 < eps < 1");
    check_matrix(sol, l)?;
    let (n, k, rp) = (sol.n(), sol.k(), sol.r_prime());
    let fam = extract_vectors(sol.gram())?;
    let x = singleton_matrix_from(sol, &fam.columns);
    let weights: Vec<f64> = (0..n * k).map(|c| l[(c, c)].max(0.0)).collect();

    let eta = (x.transpose() * &x * l).trace();
    let lambda = colsel::generalized_bound(l, r)?;
    let denom = lambda.min(1.0);
    let target = if denom > 0.0 { (1.0 + eps) / (1.0 - eps) * eta / denom } else { f64::INFINITY };
    let lambda_prime = (1.0 - eps) * denom;
    let tol = 1e-9 * (1.0 + eta.abs());

    let mut s_star: Vec<usize> = Vec::new();
    let mut pi = projector_from(sol, &fam.columns, &s_star);
    let (mut delta, mut eta_seed) = xi_split(&x, &pi, l);
    let mut xi = delta + eta_seed;
    let mut augmentations = Vec::new();
    let mut iterations = 0usize;
    let max_rounds = (1.0 / eps).ceil() as usize;
    let cols_per_round = ((r as f64) / eps).ceil() as usize;

    // The search always augments at least once when the seedless projector
    // leaves residual mass behind: the unconditioned expectation can meet the
    // certified target while the propagation conditionals are still
    // independent, and only conditioning on a seed makes the sampled
    // labelings concentrate.
    let needs_more = |delta: f64, xi: f64, iterations: usize| {
        if iterations == 0 {
            delta > tol
        } else {
            xi > target + tol
        }
    };
    while needs_more(delta, xi, iterations) && iterations < max_rounds && s_star.len() < rp {
        let residual = &x - &pi * &x;
        let want = cols_per_round.min(residual.ncols());
        if want < r {
            break;
        }
        let sel = colsel::select_columns(&residual, r, want, &weights)?;
        let mut wanted: Vec<usize> = sel.columns.iter().map(|&c| c / k).collect();
        wanted.sort_unstable();
        wanted.dedup();
        wanted.retain(|u| !s_star.contains(u));
        let room = rp - s_star.len();
        let truncated = wanted.len() > room;
        let added: Vec<usize> = wanted.into_iter().take(room).collect();
        if added.is_empty() {
            break;
        }
        s_star.extend(added.iter().copied());
        s_star.sort_unstable();
        iterations += 1;

        let eta_prev = eta_seed;
        pi = projector_from(sol, &fam.columns, &s_star);
        (delta, eta_seed) = xi_split(&x, &pi, l);
        xi = delta + eta_seed;
        let claim_bound = if lambda_prime > 0.0 {
            (eta - eta_prev) / lambda_prime
        } else {
            f64::INFINITY
        };
        augmentations.push(AugmentationStep {
            added,
            truncated,
            delta,
            eta_seed,
            xi,
            claim_bound,
        });
    }

    let mut used_fallback = false;
    if xi > target + tol {
        // The iterative search ran out of rounds or round budget; take the
        // best seed set over every subset within the budget instead.
        let mut best: Option<(Vec<usize>, f64)> = None;
        'sizes: for size in 0..=rp.min(n) {
            let mut subset: Vec<usize> = (0..size).collect();
            loop {
                let pi_s = projector_from(sol, &fam.columns, &subset);
                let (d, e) = xi_split(&x, &pi_s, l);
                let v = d + e;
                if best.as_ref().is_none_or(|(_, bv)| v < *bv - tol) {
                    best = Some((subset.clone(), v));
                    if v <= target + tol {
                        break 'sizes;
                    }
                }
                if !colsel::next_combination(&mut subset, n) {
                    break;
                }
            }
        }
        if let Some((subset, v)) = best {
            if v < xi {
                s_star = subset;
                xi = v;
            }
        }
        used_fallback = true;
    }

    Ok(SeedSet {
        s_star,
        iterations,
        certified_bound: xi,
        eta,
        lambda,
        target,
        used_fallback,
        augmentations,
    })
}

/// The sampling distribution of the propagation rounding: a weight per seed
/// labeling in the support, and per-vertex conditional label marginals for
/// each of them.
#[derive(Debug, Clone)]
pub struct RoundingDistribution {
    s_star: Vec<usize>,
    n: usize,
    k: usize,
    /// Support labelings of S* with their normalized probabilities.
    support: Vec<(Assign, f64)>,
    /// Raw (pre-normalization) total weight of the support; 1 up to solver
    /// residual.
    weight_sum: f64,
    /// Per support labeling, an n×k row-stochastic matrix of conditionals.
    conditionals: Vec<DMatrix<f64>>,
}

impl RoundingDistribution {
    /// Builds the distribution for a seed set from the solved moments.
    pub fn new(
        sol: &LasserreSolution,
        s_star: &[usize],
        opts: &RoundingOptions,
    ) -> Result<Self, RoundingError> {
        let s = check_seed(sol, s_star)?;
        let (n, k) = (sol.n(), sol.k());
        let count = (k as u64).checked_pow(s.len() as u32);
        if count.is_none_or(|c| c > opts.labeling_budget) {
            return Err(RoundingError::LabelingBudget {
                k,
                size: s.len(),
                budget: opts.labeling_budget,
            });
        }

        let mut support = Vec::new();
        let mut weight_sum = 0.0;
        for a in seed_labelings(&s, k) {
            let w = sol.z_of(&a).max(0.0);
            if w > SUPPORT_TOL {
                weight_sum += w;
                support.push((a, w));
            }
        }
        for (_, w) in &mut support {
            *w /= weight_sum;
        }

        let mut conditionals = Vec::with_capacity(support.len());
        for (a, _) in &support {
            let w = sol.z_of(a);
            let mut cond = DMatrix::zeros(n, k);
            for u in 0..n {
                match a.label_of(u) {
                    Some(lab) => cond[(u, lab)] = 1.0,
                    None => {
                        let mut row_sum = 0.0;
                        for j in 0..k {
                            let p = (sol.z_pair(a, &Assign::singleton(u, j)) / w).clamp(0.0, 1.0);
                            cond[(u, j)] = p;
                            row_sum += p;
                        }
                        if row_sum > 0.0 {
                            for j in 0..k {
                                cond[(u, j)] /= row_sum;
                            }
                        } else {
                            for j in 0..k {
                                cond[(u, j)] = 1.0 / k as f64;
                            }
                        }
                    }
                }
            }
            conditionals.push(cond);
        }

        Ok(RoundingDistribution { s_star: s, n, k, support, weight_sum, conditionals })
    }

    pub fn seed_vertices(&self) -> &[usize] {
        &self.s_star
    }

    /// Support labelings with normalized probabilities.
    pub fn support(&self) -> &[(Assign, f64)] {
        &self.support
    }

    /// Raw support mass before normalization (1 up to solver residual).
    pub fn weight_sum(&self) -> f64 {
        self.weight_sum
    }

    /// Conditional Pr[label of u = j | seed labeling index fi].
    pub fn conditional(&self, fi: usize, u: usize, j: usize) -> f64 {
        self.conditionals[fi][(u, j)]
    }

    /// Draws one proper labeling of all n vertices.
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<usize> {
        let fi = self.draw_labeling_index(rng);
        self.sample_given(fi, rng)
    }

    /// Draws a seed labeling index from the support weights.
    pub fn draw_labeling_index(&self, rng: &mut impl Rng) -> usize {
        let t: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = self.support.len() - 1;
        for (i, (_, w)) in self.support.iter().enumerate() {
            acc += w;
            if t < acc {
                pick = i;
                break;
            }
        }
        pick
    }

    /// Draws a seed labeling index restricted to `allowed` (weights
    /// renormalized over the subset).
    pub fn draw_restricted(&self, allowed: &[usize], rng: &mut impl Rng) -> usize {
        let total: f64 = allowed.iter().map(|&fi| self.support[fi].1).sum();
        let t: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = *allowed.last().expect("nonempty restriction");
        for &fi in allowed {
            acc += self.support[fi].1;
            if t < acc {
                pick = fi;
                break;
            }
        }
        pick
    }

    /// E[x̃ᵀLx̃ | seed labeling index fi]: given the seed labeling, vertices
    /// are labeled independently, so the expectation factorizes over pairs.
    pub fn conditional_expected_quadratic(&self, fi: usize, l: &DMatrix<f64>) -> f64 {
        let cond = &self.conditionals[fi];
        let (n, k) = (self.n, self.k);
        let mut total = 0.0;
        for u in 0..n {
            for i in 0..k {
                let pu = cond[(u, i)];
                if pu == 0.0 {
                    continue;
                }
                total += pu * l[(u * k + i, u * k + i)];
                for v in 0..n {
                    if v == u {
                        continue;
                    }
                    for j in 0..k {
                        total += pu * cond[(v, j)] * l[(u * k + i, v * k + j)];
                    }
                }
            }
        }
        total
    }

    /// E[x̃ᵀLx̃] over the full distribution, by mixing the conditional
    /// expectations with the seed-labeling weights.
    pub fn expected_quadratic(&self, l: &DMatrix<f64>) -> f64 {
        self.support
            .iter()
            .enumerate()
            .map(|(fi, &(_, w))| w * self.conditional_expected_quadratic(fi, l))
            .sum()
    }

    /// Indices of seed labelings whose conditional expectation does not
    /// exceed the overall expectation (plus slack); never empty, since the
    /// mixture cannot sit strictly below every component.
    pub fn favorable_labelings(&self, l: &DMatrix<f64>, slack: f64) -> Vec<usize> {
        let overall = self.expected_quadratic(l);
        let good: Vec<usize> = (0..self.support.len())
            .filter(|&fi| self.conditional_expected_quadratic(fi, l) <= overall + slack)
            .collect();
        assert!(!good.is_empty(), "mixture below all components");
        good
    }

    /// Draws the propagated labels for a fixed seed labeling index.
    pub fn sample_given(&self, fi: usize, rng: &mut impl Rng) -> Vec<usize> {
        let cond = &self.conditionals[fi];
        let mut labeling = vec![0usize; self.n];
        for u in 0..self.n {
            let t: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = self.k - 1;
            for j in 0..self.k {
                acc += cond[(u, j)];
                if t < acc {
                    pick = j;
                    break;
                }
            }
            labeling[u] = pick;
        }
        labeling
    }
}

/// Draws one labeling from a fixed 64-bit stream seed; identical seeds give
/// identical labelings across runs and platforms.
pub fn sample_labeling(dist: &RoundingDistribution, rng_seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    dist.sample(&mut rng)
}

/// x̃ᵀLx̃ for the indicator vector of a proper labeling.
pub fn labeling_quadratic(labeling: &[usize], k: usize, l: &DMatrix<f64>) -> f64 {
    let mut total = 0.0;
    for (u, &lu) in labeling.iter().enumerate() {
        for (v, &lv) in labeling.iter().enumerate() {
            total += l[(u * k + lu, v * k + lv)];
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lasserre::{solve_sdp, LinearConstraint, QipInstance, Sense, SolveOptions};
    use crate::linalg::min_eigenvalue;
    use approx::assert_abs_diff_eq;

    /// Laplacian on the label-0 block (k = 2), the quadratic form whose value
    /// on a labeling is the weight cut by the label-0 class.
    fn lifted_label0(g: &crate::graph::WeightedGraph) -> DMatrix<f64> {
        let n = g.n();
        let lap = g.laplacian();
        let mut l = DMatrix::zeros(2 * n, 2 * n);
        for u in 0..n {
            for v in 0..n {
                l[(2 * u, 2 * v)] = lap[(u, v)];
            }
        }
        l
    }

    fn bisection_instance(g: &crate::graph::WeightedGraph, mu: f64) -> QipInstance {
        let mut inst = QipInstance::unconstrained(g.n(), 2, lifted_label0(g));
        inst.linear.push(LinearConstraint {
            b: (0..g.n()).map(|u| (u, 0, 1.0)).collect(),
            c: mu,
            sense: Sense::Eq,
        });
        inst
    }

    fn solved_c4() -> LasserreSolution {
        let g = crate::graph::cycle(4);
        solve_sdp(&bisection_instance(&g, 2.0), 2, &SolveOptions::default()).unwrap()
    }

    #[test]
    fn empty_projector_is_rank_one_onto_the_constant_vector() {
        let sol = solved_c4();
        let pi = projector_pi(&sol, &[]).unwrap();
        assert_abs_diff_eq!(pi.trace(), 1.0, epsilon = 1e-8);
        let fam = extract_vectors(sol.gram()).unwrap();
        let x0 = fam.columns.column(0).into_owned();
        assert_abs_diff_eq!(&pi * &x0, x0, epsilon = 1e-7);
    }

    #[test]
    fn projector_is_idempotent_and_dominates_singleton_span() {
        let sol = solved_c4();
        let x = singleton_matrix(&sol).unwrap();
        for s in [vec![0], vec![1, 2], vec![0, 3]] {
            let pi = projector_pi(&sol, &s).unwrap();
            assert_abs_diff_eq!(&pi * &pi, pi.clone(), epsilon = 1e-7);
            assert_abs_diff_eq!(pi.transpose(), pi.clone(), epsilon = 1e-10);
            // The seed-labeling span contains every singleton vector of the
            // seeded vertices: Π fixes them up to solver/extraction noise.
            for &u in &s {
                for i in 0..2 {
                    let col = x.column(2 * u + i);
                    let out = (&col - &pi * col).norm();
                    assert!(out <= 1e-5, "S={s:?} ({u},{i}): residual {out}");
                }
            }
        }
    }

    #[test]
    fn projector_dominates_singleton_span_exactly_on_integral_moments() {
        // On noise-free moments the spectral form of the containment holds:
        // Π_S − P_S has no negative eigenvalue, where P_S projects onto the
        // span of the seeded singleton vectors.
        let g = crate::graph::cycle(4);
        let sol =
            LasserreSolution::integral(bisection_instance(&g, 2.0), 2, &[0, 1, 0, 1]).unwrap();
        let x = singleton_matrix(&sol).unwrap();
        for s in [vec![0], vec![1, 3]] {
            let pi = projector_pi(&sol, &s).unwrap();
            let cols: Vec<usize> = s.iter().flat_map(|&u| [2 * u, 2 * u + 1]).collect();
            let p_s = crate::colsel::span_projector(&x, &cols);
            assert!(min_eigenvalue(&(&pi - &p_s)) >= -1e-8);
        }
    }

    #[test]
    fn marginal_is_seed_independent() {
        let sol = solved_c4();
        let seeds: Vec<Vec<usize>> = vec![vec![], vec![0], vec![2], vec![0, 1], vec![1, 3]];
        for s in &seeds {
            for u in 0..4 {
                for g in 0..2 {
                    let m = marginal_probability(&sol, s, u, g).unwrap();
                    let direct = sol.z_of(&Assign::singleton(u, g));
                    assert!(
                        (m - direct).abs() <= 1e-8,
                        "S={s:?} u={u} g={g}: {m} vs {direct}"
                    );
                }
            }
        }
    }

    #[test]
    fn pairwise_sum_matches_projector_form() {
        let sol = solved_c4();
        let seeds: Vec<Vec<usize>> = vec![vec![], vec![0], vec![1, 2], vec![0, 3]];
        for s in &seeds {
            for u in 0..4 {
                for v in 0..4 {
                    if u == v {
                        continue;
                    }
                    for g in 0..2 {
                        for h in 0..2 {
                            let by_sum = pairwise_probability(&sol, s, u, g, v, h).unwrap();
                            let by_proj = pairwise_projector_form(&sol, s, u, g, v, h).unwrap();
                            assert!(
                                (by_sum - by_proj).abs() <= 1e-8,
                                "S={s:?} ({u},{g})({v},{h}): {by_sum} vs {by_proj}"
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn pairwise_rejects_equal_vertices() {
        let sol = solved_c4();
        assert!(matches!(
            pairwise_probability(&sol, &[], 1, 0, 1, 1),
            Err(RoundingError::SameVertex { u: 1 })
        ));
    }

    #[test]
    fn seed_too_large_for_rounds_is_rejected() {
        let sol = solved_c4();
        assert!(matches!(
            expected_quadratic(&sol, &[0, 1, 2], &lifted_label0(&crate::graph::cycle(4))),
            Err(RoundingError::InsufficientRounds { size: 3, r_prime: 2 })
        ));
    }

    #[test]
    fn expected_quadratic_is_exact_on_integral_moments() {
        let g = crate::graph::cycle(4);
        let l = lifted_label0(&g);
        let labeling = [0usize, 1, 0, 1];
        let sol =
            LasserreSolution::integral(bisection_instance(&g, 2.0), 2, &labeling).unwrap();
        let truth = labeling_quadratic(&labeling, 2, &l);
        assert_abs_diff_eq!(truth, 4.0, epsilon = 1e-12);
        for s in [vec![], vec![0], vec![1, 3]] {
            let e = expected_quadratic(&sol, &s, &l).unwrap();
            assert_abs_diff_eq!(e, truth, epsilon = 1e-9);
        }
    }

    #[test]
    fn expected_quadratic_matches_monte_carlo() {
        let sol = solved_c4();
        let l = lifted_label0(&crate::graph::cycle(4));
        let s = vec![0usize];
        let closed = expected_quadratic(&sol, &s, &l).unwrap();
        let dist = RoundingDistribution::new(&sol, &s, &RoundingOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1234);
        let n_samples = 100_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n_samples {
            let lab = dist.sample(&mut rng);
            let v = labeling_quadratic(&lab, 2, &l);
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n_samples as f64;
        let var = (sum_sq / n_samples as f64 - mean * mean).max(0.0);
        let band = 4.0 * (var / n_samples as f64).sqrt() + 1e-6;
        assert!(
            (mean - closed).abs() <= band,
            "mean {mean} vs closed {closed} (band {band})"
        );
    }

    #[test]
    fn distribution_invariants() {
        let sol = solved_c4();
        let dist =
            RoundingDistribution::new(&sol, &[0, 2], &RoundingOptions::default()).unwrap();
        assert!((dist.weight_sum() - 1.0).abs() <= 1e-6);
        let total: f64 = dist.support().iter().map(|&(_, w)| w).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        for (fi, (a, _)) in dist.support().iter().enumerate() {
            for u in 0..4 {
                let row: f64 = (0..2).map(|j| dist.conditional(fi, u, j)).sum();
                assert!((row - 1.0).abs() <= 1e-6, "f={fi} u={u}: row sum {row}");
                if let Some(lab) = a.label_of(u) {
                    assert_eq!(dist.conditional(fi, u, lab), 1.0);
                }
            }
        }
    }

    #[test]
    fn labeling_budget_is_enforced() {
        let sol = solved_c4();
        let opts = RoundingOptions { labeling_budget: 2 };
        assert!(matches!(
            RoundingDistribution::new(&sol, &[0, 1], &opts),
            Err(RoundingError::LabelingBudget { k: 2, size: 2, budget: 2 })
        ));
    }

    #[test]
    fn pinned_coordinate_is_always_honored() {
        // Forbid label 1 on vertex 0, so x_0(0) = x_∅ and the sampler must
        // always emit label 0 there.
        let g = crate::graph::cycle(4);
        let mut inst = bisection_instance(&g, 2.0);
        inst.forbidden.push((0, 1));
        let sol = solve_sdp(&inst, 2, &SolveOptions::default()).unwrap();
        assert_abs_diff_eq!(sol.z_of(&Assign::singleton(0, 0)), 1.0, epsilon = 1e-7);
        let dist =
            RoundingDistribution::new(&sol, &[1], &RoundingOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let lab = dist.sample(&mut rng);
            assert_eq!(lab[0], 0);
        }
    }

    #[test]
    fn integral_moments_sample_their_own_labeling() {
        let g = crate::graph::cycle(4);
        let labeling = [1usize, 0, 1, 0];
        let sol =
            LasserreSolution::integral(bisection_instance(&g, 2.0), 2, &labeling).unwrap();
        let dist = RoundingDistribution::new(&sol, &[2], &RoundingOptions::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            assert_eq!(dist.sample(&mut rng), labeling);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_stream_seed() {
        let sol = solved_c4();
        let dist =
            RoundingDistribution::new(&sol, &[0], &RoundingOptions::default()).unwrap();
        assert_eq!(sample_labeling(&dist, 42), sample_labeling(&dist, 42));
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            assert_eq!(dist.sample(&mut a), dist.sample(&mut b));
        }
    }

    #[test]
    fn select_seed_on_integral_moments_certifies_eta() {
        let g = crate::graph::cycle(4);
        let l = lifted_label0(&g);
        let labeling = [0usize, 1, 0, 1];
        let sol =
            LasserreSolution::integral(bisection_instance(&g, 2.0), 2, &labeling).unwrap();
        let seed = select_seed(&sol, &l, 1, 0.5).unwrap();
        // The seedless projector already absorbs everything (all vectors are
        // parallel to x_∅), so no augmentation happens and the certified
        // bound equals η exactly.
        assert_eq!(seed.iterations, 0);
        assert!(seed.s_star.is_empty());
        assert_abs_diff_eq!(seed.certified_bound, seed.eta, epsilon = 1e-9);
        assert_abs_diff_eq!(seed.eta, 4.0, epsilon = 1e-9);
        assert!(seed.meets_target(1e-9));
    }

    #[test]
    fn select_seed_zero_matrix_returns_empty_seed() {
        let sol = solved_c4();
        let l = DMatrix::zeros(8, 8);
        let seed = select_seed(&sol, &l, 1, 0.5).unwrap();
        assert!(seed.s_star.is_empty());
        assert_eq!(seed.iterations, 0);
        assert_abs_diff_eq!(seed.certified_bound, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn select_seed_k4_bisection_meets_contract() {
        // λ_2(normalized Laplacian of K4) = 4/3, so min{1, λ_2} = 1 and the
        // contract is certified_bound ≤ 3η at ε = 0.5.
        let g = crate::graph::complete(4);
        let l = lifted_label0(&g);
        let sol = solve_sdp(&bisection_instance(&g, 2.0), 2, &SolveOptions::default()).unwrap();
        let seed = select_seed(&sol, &l, 1, 0.5).unwrap();
        assert_abs_diff_eq!(seed.lambda, 4.0 / 3.0, epsilon = 1e-7);
        assert!(seed.meets_target(1e-6), "bound {} target {}", seed.certified_bound, seed.target);
        assert!(seed.certified_bound <= 3.0 * seed.eta + 1e-6);
        assert!(seed.iterations <= 2);
        assert!(seed.s_star.len() <= 2);
        // Every untruncated augmentation respects its per-round residual cap.
        for step in &seed.augmentations {
            if !step.truncated {
                assert!(
                    step.delta <= step.claim_bound + 1e-7 * (1.0 + seed.eta),
                    "delta {} cap {}",
                    step.delta,
                    step.claim_bound
                );
            }
        }
    }

    #[test]
    fn distribution_expectation_matches_closed_form() {
        let sol = solved_c4();
        let l = lifted_label0(&crate::graph::cycle(4));
        for s in [vec![], vec![0], vec![1, 3]] {
            let closed = expected_quadratic(&sol, &s, &l).unwrap();
            let dist = RoundingDistribution::new(&sol, &s, &RoundingOptions::default()).unwrap();
            assert_abs_diff_eq!(dist.expected_quadratic(&l), closed, epsilon = 1e-7);
            // Favorable seed labelings exist and are never worse than the mix.
            let good = dist.favorable_labelings(&l, 1e-9);
            assert!(!good.is_empty());
            for fi in good {
                assert!(dist.conditional_expected_quadratic(fi, &l) <= closed + 1e-9);
            }
        }
    }

    #[test]
    fn select_seed_bound_matches_expected_quadratic() {
        let sol = solved_c4();
        let l = lifted_label0(&crate::graph::cycle(4));
        let seed = select_seed(&sol, &l, 1, 0.5).unwrap();
        let direct = expected_quadratic(&sol, &seed.s_star, &l).unwrap();
        assert_abs_diff_eq!(seed.certified_bound, direct, epsilon = 1e-9);
        assert!(seed.meets_target(1e-6));
    }
}

