//! Max cut, phrased as minimum uncut weight.
//!
//! With k = 2 labels the objective ½Σ_e w_e[(x̃_u(0)−x̃_v(1))² +
//! (x̃_u(1)−x̃_v(0))²] charges w_e exactly when both endpoints take the same
//! label, giving the block matrix ½[[D,−A],[−A,D]], which is PSD. Two
//! spectral bounds are certified and the smaller is reported:
//! 1 + (2+ε)/λ_{r+1}(𝓛) and (1+ε)/min{λ_{r+1}(I+𝒜), 1}. Seed selection
//! runs against I+𝒜 lifted into the label-0 block; the base projector
//! already removes the common x_∅ direction, so the selection sees the
//! centered label vectors.
//!
//! Setting a positive μ turns the problem into maximum bisection: the
//! bisection size row is attached and only the second bound applies.

use super::{lift_block, trial_count, GuaranteeReport, PartitionProblem, ProblemError, ProblemKind};
use crate::colsel::generalized_bound;
use crate::lasserre::{solve_sdp, LinearConstraint, QipInstance, Sense};
use crate::rounding::{select_seed, RoundingDistribution, RoundingOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

/// Builds the minimum-uncut program; a positive `p.mu` attaches the
/// bisection size row Σ x̃_u(0) = μ.
pub fn build_maxcut(p: &PartitionProblem) -> Result<QipInstance, ProblemError> {
    assert_eq!(p.kind, ProblemKind::Maxcut, "build_maxcut needs a maxcut problem");
    p.validate()?;
    let n = p.graph.n();
    let adj = p.graph.adjacency_matrix();
    let mut objective = nalgebra::DMatrix::zeros(2 * n, 2 * n);
    let deg = p.graph.degrees();
    for u in 0..n {
        objective[(2 * u, 2 * u)] = 0.5 * deg[u];
        objective[(2 * u + 1, 2 * u + 1)] = 0.5 * deg[u];
        for v in 0..n {
            objective[(2 * u, 2 * v + 1)] = -0.5 * adj[(u, v)];
            objective[(2 * u + 1, 2 * v)] = -0.5 * adj[(u, v)];
        }
    }
    let mut inst = QipInstance::unconstrained(n, 2, objective);
    if p.mu > 0.0 {
        inst.linear.push(LinearConstraint {
            b: (0..n).map(|u| (u, 0, 1.0)).collect(),
            c: p.mu,
            sense: Sense::Eq,
        });
    }
    Ok(inst)
}

/// Total weight of edges with both endpoints on the same side.
fn uncut_weight(g: &crate::graph::WeightedGraph, set: &BTreeSet<usize>) -> f64 {
    g.edges()
        .iter()
        .filter(|&&(u, v, _)| set.contains(&u) == set.contains(&v))
        .map(|&(_, _, w)| w)
        .sum()
}

/// Runs the max-cut pipeline; returns one side of the cut and a report
/// whose `achieved_value` is the uncut weight.
pub fn solve_maxcut(
    p: &PartitionProblem,
    r_prime: usize,
    rng_seed: u64,
) -> Result<(BTreeSet<usize>, GuaranteeReport), ProblemError> {
    let inst = build_maxcut(p)?;
    let n = p.graph.n();
    let sol = solve_sdp(&inst, r_prime, &super::solve_options())?;

    // Seed selection runs against I+𝒜 on the label-0 coordinates.
    let shifted = nalgebra::DMatrix::identity(n, n) + p.graph.normalized_adjacency();
    let guide = lift_block(&shifted, 2, 0);
    let seed = select_seed(&sol, &guide, p.r, p.eps)?;
    let dist = RoundingDistribution::new(&sol, &seed.s_star, &RoundingOptions::default())?;
    let slack = 1e-9 * (1.0 + seed.eta.abs());
    let favorable = dist.favorable_labelings(&inst.objective, slack);

    // λ_{r+1}(I+𝒜), ascending; the lifted guide has paired zero rows, so
    // read the spectrum off the unlifted matrix.
    let mut shifted_eigs: Vec<f64> =
        shifted.symmetric_eigenvalues().iter().cloned().collect();
    shifted_eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let lambda_shift = shifted_eigs.get(p.r).cloned().unwrap_or(f64::INFINITY);
    let denom = lambda_shift.min(1.0).max(0.0);
    let bound_shift = if denom > 0.0 { (1.0 + p.eps) / denom } else { f64::INFINITY };
    let is_bisection = p.mu > 0.0;
    let predicted_bound = if is_bisection {
        bound_shift
    } else {
        let lambda_lap = generalized_bound(&p.graph.laplacian(), p.r)?;
        let bound_lap =
            if lambda_lap > 0.0 { 1.0 + (2.0 + p.eps) / lambda_lap } else { f64::INFINITY };
        bound_lap.min(bound_shift)
    };

    let allowance =
        if is_bisection { 2.0 * (p.mu * (1.0 / p.eps).ln()).sqrt() } else { f64::INFINITY };
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut best: Option<((bool, f64, f64), BTreeSet<usize>)> = None;
    for _ in 0..trial_count(p.eps, n) {
        let fi = dist.draw_restricted(&favorable, &mut rng);
        let labeling = dist.sample_given(fi, &mut rng);
        let set: BTreeSet<usize> = (0..n).filter(|&u| labeling[u] == 0).collect();
        let uncut = uncut_weight(&p.graph, &set);
        let dev = if is_bisection { (set.len() as f64 - p.mu).abs() } else { 0.0 };
        let key = (dev > allowance + 1e-9, uncut, dev);
        let better = match &best {
            None => true,
            Some((b_key, b_set)) => (key, &set) < (*b_key, b_set),
        };
        if better {
            best = Some((key, set));
        }
    }
    let ((_, uncut, dev), set) = best.expect("at least one trial");

    let report = GuaranteeReport {
        instance_id: String::new(),
        kind: ProblemKind::Maxcut,
        n,
        k: 2,
        r: p.r,
        eps: p.eps,
        sdp_value: sol.value(),
        lambda_r1: denom,
        predicted_bound,
        achieved_value: uncut,
        achieved_balance: dev,
        balance_allowance: allowance,
        opt: None,
    };
    Ok((set, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete, cycle, star, WeightedGraph};
    use crate::linalg::generalized_spectrum;
    use crate::oracle::brute_force_min_uncut;
    use approx::assert_relative_eq;

    fn problem(g: WeightedGraph, eps: f64, r: usize) -> PartitionProblem {
        PartitionProblem::new(ProblemKind::Maxcut, g, eps, r)
    }

    #[test]
    fn objective_charges_uncut_edges() {
        let p = problem(complete(2), 0.5, 1);
        let inst = build_maxcut(&p).unwrap();
        inst.validate().unwrap();
        // Same-side labeling pays the edge, split labeling pays nothing.
        let same = nalgebra::DVector::from_vec(vec![1.0, 0.0, 1.0, 0.0]);
        let split = nalgebra::DVector::from_vec(vec![1.0, 0.0, 0.0, 1.0]);
        assert_relative_eq!((same.transpose() * &inst.objective * &same)[(0, 0)], 1.0);
        assert_relative_eq!((split.transpose() * &inst.objective * &split)[(0, 0)], 0.0);
    }

    #[test]
    fn lifted_spectrum_pairs_lambda_with_two_minus_lambda() {
        let g = cycle(5);
        let p = problem(g, 0.5, 1);
        let inst = build_maxcut(&p).unwrap();
        let lifted = generalized_spectrum(&inst.objective).unwrap();
        let mut expect: Vec<f64> = Vec::new();
        let graph = generalized_spectrum(&p.graph.laplacian()).unwrap();
        for i in 1..=5 {
            expect.push(graph.lambda(i));
            expect.push(2.0 - graph.lambda(i));
        }
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (i, e) in expect.iter().enumerate() {
            assert_relative_eq!(lifted.lambda(i + 1), *e, epsilon = 1e-8);
        }
    }

    #[test]
    fn k2_is_fully_cut() {
        let p = problem(complete(2), 0.5, 1);
        let (set, report) = solve_maxcut(&p, 1, 3).unwrap();
        assert_eq!(set.len(), 1);
        assert_relative_eq!(report.achieved_value, 0.0);
        assert!(report.sdp_value.abs() <= 1e-5);
    }

    #[test]
    fn k3_leaves_one_edge_uncut() {
        let p = problem(complete(3), 0.5, 1);
        let (_, report) = solve_maxcut(&p, 2, 5).unwrap();
        let opt = brute_force_min_uncut(&p.graph).unwrap();
        assert_relative_eq!(opt.value, 1.0);
        assert_relative_eq!(report.achieved_value, 1.0, epsilon = 1e-6);
        assert!(report.achieved_value <= report.predicted_bound * opt.value + 1e-6);
    }

    #[test]
    fn c5_meets_the_reported_bound() {
        let p = problem(cycle(5), 0.5, 2);
        let (set, report) = solve_maxcut(&p, 2, 1).unwrap();
        let opt = brute_force_min_uncut(&p.graph).unwrap();
        assert_relative_eq!(opt.value, 1.0);
        assert_relative_eq!(report.achieved_value, 1.0, epsilon = 1e-6);
        assert!(!set.is_empty() && set.len() < 5);
        assert!(report.sdp_value <= opt.value + 1e-5);
        assert!(report.achieved_value <= report.predicted_bound * opt.value + 1e-6);
    }

    #[test]
    fn positive_mu_gives_maximum_bisection() {
        // Unconstrained max cut of a star is perfect (uncut 0, center
        // alone); forcing |U| = 2 at a tight allowance leaves one edge
        // uncut.
        let mut p = problem(star(3), 0.9, 1);
        p.mu = 2.0;
        let (set, report) = solve_maxcut(&p, 2, 4).unwrap();
        assert_eq!(set.len(), 2);
        assert_relative_eq!(report.achieved_value, 1.0, epsilon = 1e-6);
        assert!(report.achieved_balance <= report.balance_allowance + 1e-9);
        assert!(report.balance_allowance < 1.0);
    }
}
