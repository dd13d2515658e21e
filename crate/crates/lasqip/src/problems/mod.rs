//! Problem formulations and end-to-end pipelines.
//!
//! Each partitioning problem (bisection, small-set expansion, ratio cuts,
//! k-way partitioning, max cut, unique games, independent set) gets one
//! pipeline: build the quadratic integer program, solve its relaxation, pick
//! a seed set against the problem's guarantee matrix, round by propagation,
//! and report the achieved value next to the certified spectral bound.

use crate::graph::WeightedGraph;
use std::collections::BTreeSet;
use thiserror::Error;

mod bisection;
mod indset;
mod kway;
mod maxcut;
mod ratio;
mod sse;
mod ug;

pub use bisection::{build_bisection, solve_bisection};
pub use indset::{
    build_indset, indset_expectation_floor, indset_monte_carlo, solve_independent_set,
};
pub use kway::{build_kway, solve_kway};
pub use maxcut::{build_maxcut, solve_maxcut};
pub use ratio::solve_ratio;
pub use sse::{build_sse, solve_sse};
pub use ug::{
    build_ug, embed_ug, embed_vectors, parse_unique_games, solve_ug, UgError, UniqueGamesInstance,
};

/// Which partitioning problem a [`PartitionProblem`] describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Bisection,
    Sse,
    Sparsest,
    Expansion,
    Ncut,
    Conductance,
    Kway,
    Maxcut,
    Ug,
    Indset,
}

/// A partitioning problem over a weighted graph: the target size or volume,
/// pinned foreground/background vertices, and the accuracy/rank parameters
/// of the pipeline.
#[derive(Debug, Clone)]
pub struct PartitionProblem {
    pub kind: ProblemKind,
    pub graph: WeightedGraph,
    /// Target size (bisection) or volume (small-set expansion); unused for
    /// ratio objectives and max cut.
    pub mu: f64,
    /// Target class sizes for k-way partitioning; unused elsewhere.
    pub mu_list: Vec<f64>,
    /// Vertices pinned inside the solution set.
    pub f_set: BTreeSet<usize>,
    /// Vertices pinned outside the solution set.
    pub b_set: BTreeSet<usize>,
    pub eps: f64,
    pub r: usize,
}

impl PartitionProblem {
    /// A problem with empty pins and default mu over the given graph.
    pub fn new(kind: ProblemKind, graph: WeightedGraph, eps: f64, r: usize) -> Self {
        PartitionProblem {
            kind,
            graph,
            mu: 0.0,
            mu_list: Vec::new(),
            f_set: BTreeSet::new(),
            b_set: BTreeSet::new(),
            eps,
            r,
        }
    }

    /// Free vertices: neither pinned in nor pinned out.
    pub fn free_vertices(&self) -> Vec<usize> {
        (0..self.graph.n())
            .filter(|u| !self.f_set.contains(u) && !self.b_set.contains(u))
            .collect()
    }

    /// Checks the structural invariants of the problem statement.
    pub fn validate(&self) -> Result<(), ProblemError> {
        if let Some(&u) = self.f_set.intersection(&self.b_set).next() {
            return Err(ProblemError::PinnedTwice { vertex: u });
        }
        let n = self.graph.n();
        if let Some(&u) = self.f_set.iter().chain(self.b_set.iter()).find(|&&u| u >= n) {
            return Err(ProblemError::VertexOutOfRange { vertex: u, n });
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(ProblemError::BadEps { eps: self.eps });
        }
        if self.r == 0 {
            return Err(ProblemError::BadRank);
        }
        match self.kind {
            ProblemKind::Bisection => {
                let free = self.free_vertices().len() as f64;
                if self.mu < 0.0 || self.mu > free {
                    return Err(ProblemError::InfeasibleTarget { mu: self.mu, cap: free });
                }
            }
            ProblemKind::Sse => {
                let free: BTreeSet<usize> = self.free_vertices().into_iter().collect();
                let cap = self.graph.volume(&free);
                if self.mu < 0.0 || self.mu > cap {
                    return Err(ProblemError::InfeasibleTarget { mu: self.mu, cap });
                }
            }
            ProblemKind::Kway => {
                let total: f64 = self.mu_list.iter().sum();
                if self.mu_list.len() < 2 || (total - n as f64).abs() > 1e-9 {
                    return Err(ProblemError::InfeasibleSizes {
                        total,
                        n,
                        k: self.mu_list.len(),
                    });
                }
                if self.mu_list.iter().any(|&m| m < 1.0) {
                    return Err(ProblemError::InfeasibleSizes {
                        total,
                        n,
                        k: self.mu_list.len(),
                    });
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Errors from problem validation or pipelines.
#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("vertex {vertex} is pinned both inside and outside")]
    PinnedTwice { vertex: usize },
    #[error("pinned vertex {vertex} out of range for n = {n}")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("eps must be in (0, 1), got {eps}")]
    BadEps { eps: f64 },
    #[error("rank parameter r must be at least 1")]
    BadRank,
    #[error("target {mu} outside the feasible range [0, {cap}]")]
    InfeasibleTarget { mu: f64, cap: f64 },
    #[error("class sizes (k = {k}) sum to {total}, need {n} with every class nonempty")]
    InfeasibleSizes { total: f64, n: usize, k: usize },
    #[error("retry budget of {trials} sampling trials exhausted")]
    RetriesExhausted { trials: usize },
    #[error(transparent)]
    Lasserre(#[from] crate::lasserre::LasserreError),
    #[error(transparent)]
    Rounding(#[from] crate::rounding::RoundingError),
    #[error(transparent)]
    Colsel(#[from] crate::colsel::ColselError),
    #[error(transparent)]
    Ug(#[from] ug::UgError),
    #[error(transparent)]
    Graph(#[from] crate::graph::GraphError),
}

/// Solver options used by every pipeline: the defaults, with the
/// moment-index budget overridable through the `LASSERRE_BUDGET`
/// environment variable.
pub(crate) fn solve_options() -> crate::lasserre::SolveOptions {
    let mut opts = crate::lasserre::SolveOptions::default();
    if let Some(budget) =
        std::env::var("LASSERRE_BUDGET").ok().and_then(|s| s.trim().parse::<u64>().ok())
    {
        opts.budget = budget;
    }
    opts
}

/// Places `block` into the label-`label` block of the lifted (u·k + i)
/// coordinate space: entry (u, v) of `block` lands at (u·k+label, v·k+label).
pub(crate) fn lift_block(
    block: &nalgebra::DMatrix<f64>,
    k: usize,
    label: usize,
) -> nalgebra::DMatrix<f64> {
    let n = block.nrows();
    let mut out = nalgebra::DMatrix::zeros(n * k, n * k);
    for u in 0..n {
        for v in 0..n {
            out[(u * k + label, v * k + label)] = block[(u, v)];
        }
    }
    out
}

/// Number of sampling trials in the retry loop: ⌈(1/ε)·(ln n + 3)⌉.
pub(crate) fn trial_count(eps: f64, n: usize) -> usize {
    ((1.0 / eps) * ((n as f64).ln() + 3.0)).ceil() as usize
}

/// How a pipeline ranks a rounded sample, given (set, cut weight, balance
/// deviation): `true` in the first slot marks the sample ineligible (kept
/// only if nothing eligible shows up), then lower keys win, with the
/// lexicographically smallest set as the final tie-break.
pub(crate) type SampleScore<'a> = &'a dyn Fn(&BTreeSet<usize>, f64, f64) -> (bool, f64, f64);

/// Ranking factory: given the balance allowance and the certified cut cap of
/// the pass being run, produce the sample ranking to use.
pub(crate) type ScoreFor<'a> =
    &'a dyn Fn(f64, f64) -> Box<dyn Fn(&BTreeSet<usize>, f64, f64) -> (bool, f64, f64) + 'a>;

/// The certified per-sample cut cap (1+ε)/min{1, λ}·η; infinite when the
/// spectral gap vanishes and the ratio guarantee is vacuous.
pub(crate) fn certified_cut_cap(eps: f64, lambda: f64, eta: f64) -> f64 {
    let l = lambda.min(1.0);
    if l > 0.0 {
        (1.0 + eps) / l * eta
    } else {
        f64::INFINITY
    }
}

/// The default ranking: a sample is eligible when it sits within the balance
/// allowance AND its cut meets the certified cap; among eligible samples the
/// smallest deviation wins, then the smallest cut. Deviation outranks the
/// cut so the trivial all-in/all-out sets (whose cut is 0) cannot shadow a
/// properly balanced side whenever one is sampled, while the cap keeps every
/// eligible sample inside the spectral guarantee.
pub(crate) fn balance_cut_score(
    allowance: f64,
    cut_cap: f64,
) -> impl Fn(&BTreeSet<usize>, f64, f64) -> (bool, f64, f64) {
    move |_set, cut, dev| (dev > allowance + 1e-9 || cut > cut_cap + 1e-6, dev, cut)
}

/// The shared retry loop for set-valued pipelines: draw a favorable seed
/// labeling, propagate, read off the label-0 set with pins enforced exactly,
/// and keep the sample the score ranks best.
///
/// Returns (set, cut weight, balance deviation).
pub(crate) fn sample_best_set(
    p: &PartitionProblem,
    sol: &crate::lasserre::LasserreSolution,
    lifted: &nalgebra::DMatrix<f64>,
    seed: &crate::rounding::SeedSet,
    rng_seed: u64,
    deviation: &dyn Fn(&BTreeSet<usize>) -> f64,
    score: SampleScore,
) -> Result<(BTreeSet<usize>, f64, f64), ProblemError> {
    use rand::SeedableRng;
    let dist =
        crate::rounding::RoundingDistribution::new(sol, &seed.s_star, &Default::default())?;
    let slack = 1e-9 * (1.0 + seed.eta.abs());
    let favorable = dist.favorable_labelings(lifted, slack);
    let n = p.graph.n();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(rng_seed);
    let mut best: Option<((bool, f64, f64), f64, f64, BTreeSet<usize>)> = None;
    for _ in 0..trial_count(p.eps, n) {
        let fi = dist.draw_restricted(&favorable, &mut rng);
        let labeling = dist.sample_given(fi, &mut rng);
        // Enforce the pins exactly: sampling honors them only up to solver
        // accuracy, and the output contract is hard.
        let set: BTreeSet<usize> = (0..n)
            .filter(|u| p.f_set.contains(u) || (labeling[*u] == 0 && !p.b_set.contains(u)))
            .collect();
        let cut = p.graph.cut_weight(&set);
        let dev = deviation(&set);
        let key = score(&set, cut, dev);
        let better = match &best {
            None => true,
            Some((b_key, _, _, b_set)) => (key, &set) < (*b_key, b_set),
        };
        if better {
            best = Some((key, cut, dev, set));
        }
    }
    let (_, cut, dev, set) = best.expect("at least one trial");
    Ok((set, cut, dev))
}

/// The certified guarantee next to what the pipeline actually achieved.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GuaranteeReport {
    /// Short instance identifier used in audit CSV rows.
    pub instance_id: String,
    pub kind: ProblemKind,
    pub n: usize,
    pub k: usize,
    pub r: usize,
    pub eps: f64,
    /// The relaxation's objective mass η.
    pub sdp_value: f64,
    /// min{1, λ_{r+1}} of the guarantee matrix's normalized spectrum.
    pub lambda_r1: f64,
    /// The multiplicative ratio the achieved value is certified against.
    pub predicted_bound: f64,
    /// Objective value of the returned set/labeling.
    pub achieved_value: f64,
    /// Deviation of the achieved size/volume from its target.
    pub achieved_balance: f64,
    /// Largest balance deviation the guarantee permits (infinite when the
    /// problem has no balance clause).
    pub balance_allowance: f64,
    /// Brute-force optimum when it was computed.
    pub opt: Option<f64>,
}
