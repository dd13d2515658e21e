//! Maximum independent set via orthogonality constraints.
//!
//! The relaxation minimizes the mass left outside the set, Σ_u ‖x_u(1)‖²,
//! subject to one monomial equality x_u(0)·x_v(0) = 0 per edge, so
//! η = n − value upper-bounds the independence number α(G). Seed selection
//! runs against I+𝒜 lifted into the label-0 block. Rounding is two-phase:
//! include each vertex labeled 0 independently with probability p_u, then
//! delete one random endpoint of every edge still inside the set, which
//! makes the output independent unconditionally. The inclusion probability
//! is p_u = 1 when the seed-conditioned set is already near-independent
//! (ξ ≈ 0) and p_u = min{1, 1/(ξ·√d_max·√d_u)} otherwise, where ξ measures
//! the adjacency mass the seed projector retains.

use super::{trial_count, GuaranteeReport, PartitionProblem, ProblemError, ProblemKind};
use crate::lasserre::{
    solve_sdp, Assign, LasserreSolution, MonomialConstraint, QipInstance,
};
use crate::problems::lift_block;
use crate::rounding::{projector_pi, select_seed, singleton_matrix, RoundingDistribution};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

/// Below this, the retained adjacency mass ξ counts as zero and every
/// labeled vertex is included outright.
const XI_TOL: f64 = 1e-9;

/// Builds the program: minimize the label-1 mass with one orthogonality
/// monomial per edge. Label 0 marks membership in the independent set.
pub fn build_indset(p: &PartitionProblem) -> Result<QipInstance, ProblemError> {
    assert_eq!(p.kind, ProblemKind::Indset, "build_indset needs an independent-set problem");
    p.validate()?;
    let n = p.graph.n();
    let mut objective = nalgebra::DMatrix::zeros(2 * n, 2 * n);
    for u in 0..n {
        objective[(2 * u + 1, 2 * u + 1)] = 1.0;
    }
    let mut inst = QipInstance::unconstrained(n, 2, objective);
    for &(u, v, _) in p.graph.edges() {
        let assign = Assign::from_pairs(vec![(u, 0), (v, 0)]).expect("distinct endpoints");
        inst.monomials.push(MonomialConstraint { assign, value: 0 });
    }
    Ok(inst)
}

/// The guaranteed fraction of α(G) the rounding keeps in expectation:
/// min{ (1/(2·d_max)) · (1/((1−ε)·min{λ, 1}) − 1)^{-1}, 1 }, where λ is
/// the (r+1)-th smallest eigenvalue of I+𝒜. A vacuous spectrum (λ ≤ 0 after
/// the (1−ε) discount) gives 0; a discounted λ at or above 1 gives 1.
pub fn indset_expectation_floor(d_max: f64, eps: f64, lambda: f64) -> f64 {
    let beta = (1.0 - eps) * lambda.min(1.0);
    if beta <= 0.0 {
        return 0.0;
    }
    let gap = 1.0 / beta - 1.0;
    if gap <= 0.0 {
        return 1.0;
    }
    (1.0 / (2.0 * d_max * gap)).min(1.0)
}

/// Everything the per-sample rounding needs, fixed once per solve.
struct Prepared {
    sol: LasserreSolution,
    s_star: Vec<usize>,
    /// Per-vertex inclusion probability.
    p_u: Vec<f64>,
    /// λ_{r+1}(I+𝒜), clamped to [0, 1].
    lambda: f64,
    /// n − relaxation value: the relaxation's upper bound on α(G).
    eta: f64,
}

fn prepare(p: &PartitionProblem, r_prime: usize) -> Result<Prepared, ProblemError> {
    let inst = build_indset(p)?;
    let n = p.graph.n();
    let sol = solve_sdp(&inst, r_prime, &super::solve_options())?;

    let adj = p.graph.normalized_adjacency();
    let shifted = nalgebra::DMatrix::identity(n, n) + &adj;
    let guide = lift_block(&shifted, 2, 0);
    let seed = select_seed(&sol, &guide, p.r, p.eps)?;

    // λ_{r+1}(I+𝒜) off the unlifted matrix (the lifted guide pads the
    // spectrum with zero directions on the label-1 coordinates).
    let mut eigs: Vec<f64> = shifted.symmetric_eigenvalues().iter().cloned().collect();
    eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lambda = eigs.get(p.r).cloned().unwrap_or(f64::INFINITY).clamp(0.0, 1.0);

    // ξ: the fraction of the membership vectors' mass that the seed
    // projector leaves correlated across edges.
    let x_all = singleton_matrix(&sol)?;
    let mut x0 = nalgebra::DMatrix::zeros(x_all.nrows(), n);
    for u in 0..n {
        x0.set_column(u, &x_all.column(2 * u));
    }
    let pi = projector_pi(&sol, &seed.s_star)?;
    let den = (x0.transpose() * &x0).trace();
    let num = (x0.transpose() * pi * &x0 * &adj).trace();
    let xi = if den > XI_TOL { (num / den).max(0.0) } else { 0.0 };

    let degrees = p.graph.degrees();
    let d_max = p.graph.d_max();
    let p_u: Vec<f64> = (0..n)
        .map(|u| {
            if xi <= XI_TOL || degrees[u] <= 0.0 {
                1.0
            } else {
                (1.0 / (xi * d_max.sqrt() * degrees[u].sqrt())).min(1.0)
            }
        })
        .collect();

    let eta = n as f64 - sol.value();
    Ok(Prepared { sol, s_star: seed.s_star, p_u, lambda, eta })
}

/// One two-phase sample: propagate a labeling, keep each 0-labeled vertex
/// with its inclusion probability, then delete a random endpoint of every
/// edge whose endpoints both survived.
fn sample_independent(
    p: &PartitionProblem,
    dist: &RoundingDistribution,
    p_u: &[f64],
    rng: &mut impl Rng,
) -> BTreeSet<usize> {
    let labeling = dist.sample(rng);
    let mut set: BTreeSet<usize> = (0..p.graph.n())
        .filter(|&u| labeling[u] == 0 && rng.random::<f64>() < p_u[u])
        .collect();
    for &(u, v, _) in p.graph.edges() {
        if set.contains(&u) && set.contains(&v) {
            let drop = if rng.random::<f64>() < 0.5 { u } else { v };
            set.remove(&drop);
        }
    }
    set
}

/// Runs the independent-set pipeline; the returned set is independent by
/// construction and the report's `sdp_value` upper-bounds α(G).
pub fn solve_independent_set(
    p: &PartitionProblem,
    r_prime: usize,
    rng_seed: u64,
) -> Result<(BTreeSet<usize>, GuaranteeReport), ProblemError> {
    let prep = prepare(p, r_prime)?;
    let dist = RoundingDistribution::new(&prep.sol, &prep.s_star, &Default::default())?;
    let n = p.graph.n();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut best: Option<(usize, BTreeSet<usize>)> = None;
    for _ in 0..trial_count(p.eps, n) {
        let set = sample_independent(p, &dist, &prep.p_u, &mut rng);
        let key = n - set.len();
        let better = match &best {
            None => true,
            Some((b_key, b_set)) => (key, &set) < (*b_key, b_set),
        };
        if better {
            best = Some((key, set));
        }
    }
    let (_, set) = best.expect("at least one trial");

    let report = GuaranteeReport {
        instance_id: String::new(),
        kind: ProblemKind::Indset,
        n,
        k: 2,
        r: p.r,
        eps: p.eps,
        sdp_value: prep.eta,
        lambda_r1: prep.lambda,
        predicted_bound: 1.0,
        achieved_value: set.len() as f64,
        achieved_balance: 0.0,
        balance_allowance: f64::INFINITY,
        opt: None,
    };
    Ok((set, report))
}

/// Monte-Carlo estimate of the expected rounded set size: solves once,
/// draws `samples` two-phase roundings, and returns the sample mean of |I|
/// with the standard error of that mean.
pub fn indset_monte_carlo(
    p: &PartitionProblem,
    r_prime: usize,
    rng_seed: u64,
    samples: usize,
) -> Result<(f64, f64), ProblemError> {
    let prep = prepare(p, r_prime)?;
    let dist = RoundingDistribution::new(&prep.sol, &prep.s_star, &Default::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..samples {
        let size = sample_independent(p, &dist, &prep.p_u, &mut rng).len() as f64;
        sum += size;
        sum_sq += size * size;
    }
    let mean = sum / samples as f64;
    let var = (sum_sq / samples as f64 - mean * mean).max(0.0);
    Ok((mean, (var / samples as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete, cycle, WeightedGraph};
    use crate::oracle::brute_force_independent_set;
    use approx::assert_relative_eq;

    fn problem(g: WeightedGraph, eps: f64, r: usize) -> PartitionProblem {
        PartitionProblem::new(ProblemKind::Indset, g, eps, r)
    }

    fn is_independent(g: &WeightedGraph, set: &BTreeSet<usize>) -> bool {
        g.edges().iter().all(|&(u, v, _)| !(set.contains(&u) && set.contains(&v)))
    }

    #[test]
    fn build_pins_edge_monomials_to_zero() {
        let p = problem(complete(3), 0.5, 1);
        let inst = build_indset(&p).unwrap();
        inst.validate().unwrap();
        assert_eq!(inst.monomials.len(), 3);
        assert!(inst.monomials.iter().all(|m| m.value == 0 && m.assign.len() == 2));
        // Objective charges only the label-1 diagonal.
        assert_relative_eq!(inst.objective[(1, 1)], 1.0);
        assert_relative_eq!(inst.objective[(0, 0)], 0.0);
    }

    #[test]
    fn edgeless_graph_keeps_every_vertex() {
        let g = WeightedGraph::new(3, vec![]).unwrap();
        let p = problem(g, 0.5, 1);
        let (set, report) = solve_independent_set(&p, 1, 3).unwrap();
        assert_eq!(set.len(), 3);
        assert_relative_eq!(report.achieved_value, 3.0);
        // Nothing to leave out: η reaches n.
        assert_relative_eq!(report.sdp_value, 3.0, epsilon = 1e-5);
    }

    #[test]
    fn k2_keeps_exactly_one_endpoint() {
        let p = problem(complete(2), 0.5, 1);
        let (set, report) = solve_independent_set(&p, 2, 5).unwrap();
        let opt = brute_force_independent_set(&p.graph).unwrap();
        assert_relative_eq!(opt.value, 1.0);
        assert_eq!(set.len(), 1);
        assert!(is_independent(&p.graph, &set));
        // η relaxes α from above, and |I| never beats α.
        assert!(opt.value <= report.sdp_value + 1e-5);
        assert!(report.achieved_value <= report.predicted_bound * opt.value + 1e-6);
    }

    #[test]
    fn c5_finds_a_maximum_independent_set() {
        let p = problem(cycle(5), 0.5, 2);
        let (set, report) = solve_independent_set(&p, 2, 7).unwrap();
        let opt = brute_force_independent_set(&p.graph).unwrap();
        assert_relative_eq!(opt.value, 2.0);
        assert!(is_independent(&p.graph, &set));
        assert_eq!(set.len(), 2);
        assert!(opt.value <= report.sdp_value + 1e-5);
        assert!(report.achieved_value <= report.predicted_bound * opt.value + 1e-6);
    }

    #[test]
    fn returned_set_is_independent_across_rng_seeds() {
        let p = problem(complete(4), 0.5, 1);
        for rng_seed in 0..20 {
            let (set, _) = solve_independent_set(&p, 2, rng_seed).unwrap();
            assert!(is_independent(&p.graph, &set));
            assert!(!set.is_empty());
        }
    }

    #[test]
    fn monte_carlo_mean_clears_the_expectation_floor() {
        let p = problem(cycle(5), 0.5, 2);
        let (_, report) = solve_independent_set(&p, 2, 1).unwrap();
        let opt = brute_force_independent_set(&p.graph).unwrap();
        let floor =
            indset_expectation_floor(p.graph.d_max(), p.eps, report.lambda_r1) * opt.value;
        let (mean, sigma) = indset_monte_carlo(&p, 2, 9, 2000).unwrap();
        assert!(
            mean + 4.0 * sigma >= floor,
            "mean {mean} (σ {sigma}) misses floor {floor}"
        );
    }

    #[test]
    fn expectation_floor_edge_cases() {
        // Vacuous spectrum gives no guarantee; a generous one caps at 1.
        assert_relative_eq!(indset_expectation_floor(3.0, 0.5, 0.0), 0.0);
        assert_relative_eq!(indset_expectation_floor(3.0, 0.1, 2.0), 1.0);
        // Interior case: β = 0.5·0.8 = 0.4, gap = 1.5, d_max = 2 → 1/6.
        assert_relative_eq!(
            indset_expectation_floor(2.0, 0.5, 0.8),
            1.0 / 6.0,
            epsilon = 1e-12
        );
    }
}
