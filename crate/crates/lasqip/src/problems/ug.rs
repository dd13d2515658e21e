//! Unique games: per-edge label bijections over a weighted graph, with a
//! tensor embedding that turns per-vertex label-vector families into single
//! vectors for seed selection.

use super::{trial_count, GuaranteeReport, ProblemError, ProblemKind};
use crate::colsel::{generalized_bound, select_columns};
use crate::graph::{GraphError, WeightedGraph};
use crate::lasserre::{
    extract_vectors, solve_sdp, Assign, LasserreSolution, QipInstance,
};
use crate::rounding::{RoundingDistribution, RoundingOptions};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// A unique-games instance: each edge (u, v) with u < v carries a
/// permutation π of the k labels, and a labeling f satisfies the edge when
/// f(v) = π(f(u)). The permutation always applies to the lexicographically
/// smaller endpoint's label.
#[derive(Debug, Clone)]
pub struct UniqueGamesInstance {
    pub graph: WeightedGraph,
    pub k: usize,
    /// One permutation per edge, aligned with `graph.edges()`: entry j is
    /// π(j), the required label of the larger endpoint when the smaller one
    /// has label j.
    pub perms: Vec<Vec<usize>>,
}

/// Errors from unique-games construction or parsing.
#[derive(Debug, Error)]
pub enum UgError {
    #[error("edge {edge} carries {got} images, expected k = {k}")]
    PermLength { edge: usize, got: usize, k: usize },
    #[error("edge {edge}'s permutation is not a bijection on [{k}]")]
    NotBijective { edge: usize, k: usize },
    #[error("line {line}: expected `u v w pi(0),...,pi(k-1)`")]
    Malformed { line: usize },
    #[error("vertex {u}: labels {f} and {g} have inner product {dot:.3e}, not orthogonal")]
    NotOrthogonal { u: usize, f: usize, g: usize, dot: f64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl UniqueGamesInstance {
    pub fn new(
        graph: WeightedGraph,
        k: usize,
        perms: Vec<Vec<usize>>,
    ) -> Result<Self, UgError> {
        assert_eq!(perms.len(), graph.edges().len(), "one permutation per edge");
        for (e, p) in perms.iter().enumerate() {
            if p.len() != k {
                return Err(UgError::PermLength { edge: e, got: p.len(), k });
            }
            let mut seen = vec![false; k];
            for &img in p {
                if img >= k || seen[img] {
                    return Err(UgError::NotBijective { edge: e, k });
                }
                seen[img] = true;
            }
        }
        Ok(UniqueGamesInstance { graph, k, perms })
    }

    /// Total weight of edges a labeling violates.
    pub fn unsat_weight(&self, labeling: &[usize]) -> f64 {
        self.graph
            .edges()
            .iter()
            .zip(&self.perms)
            .filter(|(&(u, v, _), p)| p[labeling[u]] != labeling[v])
            .map(|(&(_, _, w), _)| w)
            .sum()
    }
}

/// Embeds per-vertex label-vector families into the tensor space:
/// X_u = Σ_f x_u(f) ⊗ x̄_u(f), flattened to length m². The summands use
/// mutually orthogonal normalized right factors, so ‖X_u‖² = Σ_f ‖x_u(f)‖²
/// and distances/projections of the families transfer to the X_u (distances
/// shrink by at most half under any label matching, projections onto the
/// orthogonal complement of a span never grow).
pub fn embed_vectors(families: &[Vec<DVector<f64>>]) -> Vec<DVector<f64>> {
    families
        .iter()
        .map(|fam| {
            let m = fam.first().map_or(0, DVector::len);
            let mut x = DVector::zeros(m * m);
            for v in fam {
                let norm = v.norm();
                if norm <= 1e-12 {
                    continue;
                }
                for i in 0..m {
                    if v[i] == 0.0 {
                        continue;
                    }
                    for j in 0..m {
                        x[i * m + j] += v[i] * v[j] / norm;
                    }
                }
            }
            x
        })
        .collect()
}

/// Extracts the singleton label vectors of a solved relaxation and embeds
/// them; errors if any vertex's label vectors are not pairwise orthogonal
/// within 1e−6 (they are identically orthogonal in an exact hierarchy).
pub fn embed_ug(sol: &LasserreSolution) -> Result<Vec<DVector<f64>>, UgError> {
    let (n, k) = (sol.n(), sol.k());
    for u in 0..n {
        for f in 0..k {
            for g in (f + 1)..k {
                let dot = sol.z_pair(&Assign::singleton(u, f), &Assign::singleton(u, g));
                if dot.abs() > 1e-6 {
                    return Err(UgError::NotOrthogonal { u, f, g, dot });
                }
            }
        }
    }
    let fam = extract_vectors(sol.gram()).expect("solved gram factors");
    let families: Vec<Vec<DVector<f64>>> = (0..n)
        .map(|u| {
            (0..k)
                .map(|i| {
                    let e = sol
                        .index()
                        .lookup(&Assign::singleton(u, i))
                        .expect("singleton entry");
                    fam.columns.column(e).into_owned()
                })
                .collect()
        })
        .collect();
    Ok(embed_vectors(&families))
}

/// Builds the quadratic integer program whose optimum is the total weight
/// of violated constraints: ½ Σ_e w_e Σ_i (x̃_u(i) − x̃_v(π_e(i)))², which
/// charges w_e exactly when f(v) ≠ π_e(f(u)).
pub fn build_ug(inst: &UniqueGamesInstance) -> QipInstance {
    let n = inst.graph.n();
    let k = inst.k;
    let mut objective = DMatrix::zeros(n * k, n * k);
    for (&(u, v, w), perm) in inst.graph.edges().iter().zip(&inst.perms) {
        for i in 0..k {
            let a = u * k + i;
            let b = v * k + perm[i];
            objective[(a, a)] += 0.5 * w;
            objective[(b, b)] += 0.5 * w;
            objective[(a, b)] -= 0.5 * w;
            objective[(b, a)] -= 0.5 * w;
        }
    }
    QipInstance::unconstrained(n, k, objective)
}

/// Runs the unique-games pipeline: relax the violation objective, embed the
/// label vectors, pick seed vertices by column selection on the
/// degree-scaled embeddings, round by propagation, and report the best
/// labeling against the bound 1 + (2+ε)/λ_{r+1}(𝓛).
pub fn solve_ug(
    ug: &UniqueGamesInstance,
    eps: f64,
    r: usize,
    r_prime: usize,
    rng_seed: u64,
) -> Result<(Vec<usize>, GuaranteeReport), ProblemError> {
    assert!(eps > 0.0 && eps < 1.0, "need 0 < eps < 1");
    assert!(r >= 1, "need r >= 1");
    let qip = build_ug(ug);
    let n = ug.graph.n();
    let sol = solve_sdp(&qip, r_prime, &super::solve_options())?;

    // Seed vertices: column selection over the degree-scaled embeddings.
    let embedded = embed_ug(&sol)?;
    let deg = ug.graph.degrees();
    let dim = embedded.first().map_or(0, DVector::len);
    let mut scaled = DMatrix::zeros(dim, n);
    for (u, x) in embedded.iter().enumerate() {
        scaled.set_column(u, &(x * deg[u].sqrt()));
    }
    let want = ((r as f64 / eps).ceil() as usize).min(r_prime).min(n);
    let weights = vec![1.0; n];
    let selection = select_columns(&scaled, r, want, &weights)?;
    let mut s_star: Vec<usize> = selection.columns.clone();
    s_star.sort_unstable();
    s_star.dedup();
    s_star.truncate(r_prime);

    let dist = RoundingDistribution::new(&sol, &s_star, &RoundingOptions::default())?;
    let slack = 1e-9 * (1.0 + sol.value().abs());
    let favorable = dist.favorable_labelings(&qip.objective, slack);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut best: Option<(f64, Vec<usize>)> = None;
    for _ in 0..trial_count(eps, n) {
        let fi = dist.draw_restricted(&favorable, &mut rng);
        let labeling = dist.sample_given(fi, &mut rng);
        let unsat = ug.unsat_weight(&labeling);
        let better = match &best {
            None => true,
            Some((b_unsat, b_lab)) => (unsat, &labeling) < (*b_unsat, b_lab),
        };
        if better {
            best = Some((unsat, labeling));
        }
    }
    let (unsat, labeling) = best.expect("at least one trial");

    let lambda = generalized_bound(&ug.graph.laplacian(), r)?;
    let predicted_bound =
        if lambda > 0.0 { 1.0 + (2.0 + eps) / lambda } else { f64::INFINITY };
    let report = GuaranteeReport {
        instance_id: String::new(),
        kind: ProblemKind::Ug,
        n,
        k: ug.k,
        r,
        eps,
        sdp_value: sol.value(),
        lambda_r1: lambda.min(1.0).max(0.0),
        predicted_bound,
        achieved_value: unsat,
        achieved_balance: 0.0,
        balance_allowance: f64::INFINITY,
        opt: None,
    };
    Ok((labeling, report))
}

/// Parses `u v w pi(0),...,pi(k-1)` lines (`#` comments and blanks skipped)
/// into a unique-games instance; k is taken from the first permutation.
pub fn parse_unique_games(text: &str) -> Result<UniqueGamesInstance, UgError> {
    let mut edges = Vec::new();
    let mut perms = Vec::new();
    let mut n = 0usize;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = trimmed.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(UgError::Malformed { line });
        }
        let u: usize = parts[0].parse().map_err(|_| UgError::Malformed { line })?;
        let v: usize = parts[1].parse().map_err(|_| UgError::Malformed { line })?;
        let w: f64 = parts[2].parse().map_err(|_| UgError::Malformed { line })?;
        let perm: Vec<usize> = parts[3]
            .split(',')
            .map(|t| t.parse().map_err(|_| UgError::Malformed { line }))
            .collect::<Result<_, _>>()?;
        n = n.max(u + 1).max(v + 1);
        // The file convention fixes the permutation's domain to the smaller
        // endpoint's label regardless of the order the line lists them in.
        edges.push((u.min(v), u.max(v), w));
        perms.push(perm);
    }
    let k = perms.first().map_or(1, Vec::len);
    let graph = WeightedGraph::new(n, edges)?;
    // WeightedGraph::new preserves edge order, so perms stay aligned.
    UniqueGamesInstance::new(graph, k, perms)
}
