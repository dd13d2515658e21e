//! Brute-force exact optima, concentration radii, and the guarantee-audit
//! harness.
//!
//! Everything here is an oracle for the tests and the audit pipeline: exact
//! optima by exhaustive enumeration, the corpus of all connected graphs on up
//! to six vertices (one representative per isomorphism class), tail radii for
//! weighted sums of independent indicator variables, and the pass/fail audit
//! of a pipeline report against the brute-force optimum.

use crate::graph::{CutObjective, WeightedGraph};
use crate::problems::{GuaranteeReport, PartitionProblem, ProblemKind, UniqueGamesInstance};
use std::collections::BTreeSet;
use thiserror::Error;

/// Cap on the number of candidate solutions an exhaustive search may visit.
pub const SEARCH_BUDGET: u64 = 10_000_000;

/// Errors from the oracle routines.
#[derive(Debug, Error)]
pub enum OracleError {
    #[error("search space of {space} candidates exceeds budget {budget}")]
    BudgetExceeded { space: u64, budget: u64 },
    #[error("no candidate satisfies the hard constraints")]
    NoFeasibleWitness,
    #[error("eps must be in (0, 1), got {eps}")]
    BadEps { eps: f64 },
    #[error("tail mode requires nonnegative weights, got {value}")]
    NegativeWeight { value: f64 },
    #[error("largest weight {max_weight} exceeds mu/ln(1/eps) = {cap}")]
    WeightTooLarge { max_weight: f64, cap: f64 },
    #[error("kind {kind:?} has no PartitionProblem brute force; use its dedicated oracle")]
    UnsupportedKind { kind: ProblemKind },
    #[error(transparent)]
    Problem(#[from] crate::problems::ProblemError),
}

/// The optimizer found by exhaustive search.
#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    /// A vertex subset (cut problems, independent set).
    Subset(Vec<usize>),
    /// A full labeling of V (k-way, unique games).
    Labeling(Vec<usize>),
}

/// An exact optimum with its witness and the number of candidates visited.
#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    pub value: f64,
    pub witness: Witness,
    pub enumerated: u64,
}

fn check_budget(space: u64) -> Result<(), OracleError> {
    if space > SEARCH_BUDGET {
        return Err(OracleError::BudgetExceeded { space, budget: SEARCH_BUDGET });
    }
    Ok(())
}

/// Iterates subsets of `pool` as bitmasks, calling `visit(subset-union-base)`.
fn for_each_subset(
    base: &BTreeSet<usize>,
    pool: &[usize],
    mut visit: impl FnMut(&BTreeSet<usize>, u64),
) -> Result<u64, OracleError> {
    check_budget(1u64 << pool.len())?;
    let mut count = 0u64;
    for mask in 0u64..(1u64 << pool.len()) {
        let mut set = base.clone();
        for (i, &u) in pool.iter().enumerate() {
            if mask >> i & 1 == 1 {
                set.insert(u);
            }
        }
        count += 1;
        visit(&set, mask);
    }
    Ok(count)
}

/// Minimum cut weight over U with F ⊆ U ⊆ V∖B and |U∖F| = mu.
pub fn brute_force_bisection(
    g: &WeightedGraph,
    mu: usize,
    f_set: &BTreeSet<usize>,
    b_set: &BTreeSet<usize>,
) -> Result<BruteForceResult, OracleError> {
    let pool: Vec<usize> = (0..g.n())
        .filter(|u| !f_set.contains(u) && !b_set.contains(u))
        .collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let enumerated = for_each_subset(f_set, &pool, |set, mask| {
        if mask.count_ones() as usize != mu {
            return;
        }
        let value = g.cut_weight(set);
        if best.as_ref().is_none_or(|(bv, _)| value < *bv) {
            best = Some((value, set.iter().copied().collect()));
        }
    })?;
    let (value, witness) = best.ok_or(OracleError::NoFeasibleWitness)?;
    Ok(BruteForceResult { value, witness: Witness::Subset(witness), enumerated })
}

/// Minimum cut weight over U with F ⊆ U ⊆ V∖B and Vol(U∖F) = mu.
pub fn brute_force_sse(
    g: &WeightedGraph,
    mu: f64,
    f_set: &BTreeSet<usize>,
    b_set: &BTreeSet<usize>,
) -> Result<BruteForceResult, OracleError> {
    let pool: Vec<usize> = (0..g.n())
        .filter(|u| !f_set.contains(u) && !b_set.contains(u))
        .collect();
    let degrees = g.degrees();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let enumerated = for_each_subset(f_set, &pool, |set, _| {
        let vol: f64 = set.iter().filter(|u| !f_set.contains(u)).map(|&u| degrees[u]).sum();
        if (vol - mu).abs() > 1e-9 {
            return;
        }
        let value = g.cut_weight(set);
        if best.as_ref().is_none_or(|(bv, _)| value < *bv) {
            best = Some((value, set.iter().copied().collect()));
        }
    })?;
    let (value, witness) = best.ok_or(OracleError::NoFeasibleWitness)?;
    Ok(BruteForceResult { value, witness: Witness::Subset(witness), enumerated })
}

/// Minimum of a cut objective over all nonempty proper vertex subsets.
pub fn brute_force_ratio(
    g: &WeightedGraph,
    objective: CutObjective,
) -> Result<BruteForceResult, OracleError> {
    let pool: Vec<usize> = (0..g.n()).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let enumerated = for_each_subset(&BTreeSet::new(), &pool, |set, _| {
        if set.is_empty() || set.len() == g.n() {
            return;
        }
        let value = g.evaluate_cut(set, objective).expect("proper side");
        if best.as_ref().is_none_or(|(bv, _)| value < *bv) {
            best = Some((value, set.iter().copied().collect()));
        }
    })?;
    let (value, witness) = best.ok_or(OracleError::NoFeasibleWitness)?;
    Ok(BruteForceResult { value, witness: Witness::Subset(witness), enumerated })
}

/// Minimum total cut weight (weight of edges between different classes) over
/// labelings with prescribed class sizes.
pub fn brute_force_kway(
    g: &WeightedGraph,
    sizes: &[usize],
) -> Result<BruteForceResult, OracleError> {
    let k = sizes.len();
    let n = g.n();
    assert_eq!(sizes.iter().sum::<usize>(), n, "sizes must sum to n");
    check_budget((k as u64).saturating_pow(n as u32))?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut labeling = vec![0usize; n];
    let mut enumerated = 0u64;
    loop {
        enumerated += 1;
        let mut counts = vec![0usize; k];
        for &l in &labeling {
            counts[l] += 1;
        }
        if counts == sizes {
            let value: f64 = g
                .edges()
                .iter()
                .filter(|&&(u, v, _)| labeling[u] != labeling[v])
                .map(|&(_, _, w)| w)
                .sum();
            if best.as_ref().is_none_or(|(bv, _)| value < *bv) {
                best = Some((value, labeling.clone()));
            }
        }
        if !advance(&mut labeling, k) {
            break;
        }
    }
    let (value, witness) = best.ok_or(OracleError::NoFeasibleWitness)?;
    Ok(BruteForceResult { value, witness: Witness::Labeling(witness), enumerated })
}

/// Minimum uncut weight (total weight minus max-cut) over bipartitions.
pub fn brute_force_min_uncut(g: &WeightedGraph) -> Result<BruteForceResult, OracleError> {
    let total: f64 = g.edges().iter().map(|&(_, _, w)| w).sum();
    let pool: Vec<usize> = (1..g.n()).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    let enumerated = for_each_subset(&BTreeSet::new(), &pool, |set, _| {
        let value = total - g.cut_weight(set);
        if best.as_ref().is_none_or(|(bv, _)| value < *bv) {
            best = Some((value, set.iter().copied().collect()));
        }
    })?;
    let (value, witness) = best.ok_or(OracleError::NoFeasibleWitness)?;
    Ok(BruteForceResult { value, witness: Witness::Subset(witness), enumerated })
}

/// Minimum unsatisfied weight of a unique-games instance over all labelings.
pub fn brute_force_ug(inst: &UniqueGamesInstance) -> Result<BruteForceResult, OracleError> {
    let (n, k) = (inst.graph.n(), inst.k);
    check_budget((k as u64).saturating_pow(n as u32))?;
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut labeling = vec![0usize; n];
    let mut enumerated = 0u64;
    loop {
        enumerated += 1;
        let value = inst.unsat_weight(&labeling);
        if best.as_ref().is_none_or(|(bv, _)| value < *bv) {
            best = Some((value, labeling.clone()));
        }
        if !advance(&mut labeling, k) {
            break;
        }
    }
    let (value, witness) = best.ok_or(OracleError::NoFeasibleWitness)?;
    Ok(BruteForceResult { value, witness: Witness::Labeling(witness), enumerated })
}

/// Maximum independent set size α(G).
pub fn brute_force_independent_set(g: &WeightedGraph) -> Result<BruteForceResult, OracleError> {
    let pool: Vec<usize> = (0..g.n()).collect();
    let mut best: Option<(usize, Vec<usize>)> = None;
    let enumerated = for_each_subset(&BTreeSet::new(), &pool, |set, _| {
        let independent = g
            .edges()
            .iter()
            .all(|&(u, v, w)| w == 0.0 || !(set.contains(&u) && set.contains(&v)));
        if independent && best.as_ref().is_none_or(|(bs, _)| set.len() > *bs) {
            best = Some((set.len(), set.iter().copied().collect()));
        }
    })?;
    let (value, witness) = best.ok_or(OracleError::NoFeasibleWitness)?;
    Ok(BruteForceResult {
        value: value as f64,
        witness: Witness::Subset(witness),
        enumerated,
    })
}

/// Mixed-radix increment of a labeling; false after the last one.
fn advance(labeling: &mut [usize], k: usize) -> bool {
    for slot in labeling.iter_mut().rev() {
        *slot += 1;
        if *slot < k {
            return true;
        }
        *slot = 0;
    }
    false
}

/// Exact optimum of a partition problem by exhaustive enumeration.
pub fn brute_force(p: &PartitionProblem) -> Result<BruteForceResult, OracleError> {
    p.validate()?;
    match p.kind {
        ProblemKind::Bisection => {
            brute_force_bisection(&p.graph, p.mu.round() as usize, &p.f_set, &p.b_set)
        }
        ProblemKind::Sse => brute_force_sse(&p.graph, p.mu, &p.f_set, &p.b_set),
        ProblemKind::Sparsest => brute_force_ratio(&p.graph, CutObjective::Sparsest),
        ProblemKind::Expansion => brute_force_ratio(&p.graph, CutObjective::Expansion),
        ProblemKind::Ncut => brute_force_ratio(&p.graph, CutObjective::Ncut),
        ProblemKind::Conductance => brute_force_ratio(&p.graph, CutObjective::Conductance),
        ProblemKind::Kway => {
            let sizes: Vec<usize> = p.mu_list.iter().map(|&m| m.round() as usize).collect();
            brute_force_kway(&p.graph, &sizes)
        }
        ProblemKind::Maxcut => brute_force_min_uncut(&p.graph),
        // Unique games and independent set are driven by their own instance
        // types and dedicated oracles, not by a PartitionProblem.
        ProblemKind::Ug | ProblemKind::Indset => {
            Err(OracleError::UnsupportedKind { kind: p.kind })
        }
    }
}

// --- Small-graph corpus ----------------------------------------------------

/// Number of vertex pairs (i, j), i < j, indexing edge bits.
fn pair_index(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
        }
    }
    pairs
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..n).collect();
    heap_permute(&mut current, n, &mut out);
    out
}

fn heap_permute(arr: &mut Vec<usize>, size: usize, out: &mut Vec<Vec<usize>>) {
    if size == 1 {
        out.push(arr.clone());
        return;
    }
    for i in 0..size {
        heap_permute(arr, size - 1, out);
        if size % 2 == 0 {
            arr.swap(i, size - 1);
        } else {
            arr.swap(0, size - 1);
        }
    }
}

/// Applies a vertex permutation to an edge bitmask.
fn permute_mask(mask: u32, pairs: &[(usize, usize)], lookup: &[Vec<usize>], perm: &[usize]) -> u32 {
    let mut out = 0u32;
    for (bit, &(i, j)) in pairs.iter().enumerate() {
        if mask >> bit & 1 == 1 {
            let (a, b) = (perm[i].min(perm[j]), perm[i].max(perm[j]));
            out |= 1 << lookup[a][b];
        }
    }
    out
}

/// All connected unweighted graphs on exactly `n` vertices, one per
/// isomorphism class, ordered by canonical edge bitmask.
pub fn connected_graphs(n: usize) -> Vec<WeightedGraph> {
    assert!(n >= 1 && n <= 7, "corpus generator is sized for n <= 7");
    let pairs = pair_index(n);
    let mut lookup = vec![vec![0usize; n]; n];
    for (bit, &(i, j)) in pairs.iter().enumerate() {
        lookup[i][j] = bit;
    }
    let perms = permutations(n);
    let mut canon: BTreeSet<u32> = BTreeSet::new();
    for mask in 0u32..(1u32 << pairs.len()) {
        let edges: Vec<(usize, usize, f64)> = pairs
            .iter()
            .enumerate()
            .filter(|&(bit, _)| mask >> bit & 1 == 1)
            .map(|(_, &(i, j))| (i, j, 1.0))
            .collect();
        let g = WeightedGraph::new(n, edges).expect("valid pairs");
        if !g.is_connected() {
            continue;
        }
        let canonical = perms
            .iter()
            .map(|p| permute_mask(mask, &pairs, &lookup, p))
            .min()
            .expect("at least identity");
        canon.insert(canonical);
    }
    canon
        .into_iter()
        .map(|mask| {
            let edges: Vec<(usize, usize, f64)> = pairs
                .iter()
                .enumerate()
                .filter(|&(bit, _)| mask >> bit & 1 == 1)
                .map(|(_, &(i, j))| (i, j, 1.0))
                .collect();
            WeightedGraph::new(n, edges).expect("valid pairs")
        })
        .collect()
}

/// The audit corpus: every connected graph with at most `max_n` vertices,
/// one per isomorphism class, each with a stable identifier.
pub fn corpus(max_n: usize) -> Vec<(String, WeightedGraph)> {
    let mut out = Vec::new();
    for n in 1..=max_n {
        for (idx, g) in connected_graphs(n).into_iter().enumerate() {
            out.push((format!("c{n}-{idx:03}"), g));
        }
    }
    out
}

// --- Concentration radii ---------------------------------------------------

/// Which tail bound a radius is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaMode {
    /// Two-sided bound from the squared Euclidean mass of the weights.
    Hoeffding,
    /// Two-sided multiplicative bound; needs nonnegative weights that are
    /// individually small next to the mean.
    Chernoff,
}

/// Radius Δ such that a weighted sum of independent indicator variables with
/// mean `mu` leaves [mu − Δ, mu + Δ] with probability at most `eps`.
pub fn delta_eps(a: &[f64], mu: f64, eps: f64, mode: DeltaMode) -> Result<f64, OracleError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(OracleError::BadEps { eps });
    }
    match mode {
        DeltaMode::Hoeffding => {
            let norm2: f64 = a.iter().map(|&x| x * x).sum();
            Ok((norm2 * (2.0 / eps).ln() / 2.0).sqrt())
        }
        DeltaMode::Chernoff => {
            if let Some(&bad) = a.iter().find(|&&x| x < 0.0) {
                return Err(OracleError::NegativeWeight { value: bad });
            }
            let max_weight = a.iter().cloned().fold(0.0, f64::max);
            let cap = mu / (1.0 / eps).ln();
            if max_weight > cap + 1e-12 {
                return Err(OracleError::WeightTooLarge { max_weight, cap });
            }
            Ok(2.0 * (max_weight * mu * (2.0 / eps).ln()).sqrt())
        }
    }
}

// --- Audit harness ---------------------------------------------------------

/// Slack allowed on the relaxation clause η ≤ OPT.
pub const RELAXATION_TOL: f64 = 1e-5;
/// Slack allowed on the ratio clause achieved ≤ bound·OPT.
pub const RATIO_TOL: f64 = 1e-6;

/// Result of auditing one pipeline report against the exact optimum.
#[derive(Debug, Clone)]
pub struct AuditOutcome {
    pub pass: bool,
    /// One message per violated clause, naming the clause.
    pub failures: Vec<String>,
}

/// Audits a report: the relaxation value must lower-bound the optimum, the
/// achieved value must stay within the certified ratio of the optimum, and
/// the balance deviation must stay within its allowance.
pub fn audit(run: &GuaranteeReport, opt: &BruteForceResult) -> AuditOutcome {
    let mut failures = Vec::new();
    match run.kind {
        // Ratio objectives report the relaxation mass of the best
        // denominator guess, which is in cut-weight units, not ratio units;
        // no relaxation-vs-optimum comparison applies.
        ProblemKind::Sparsest
        | ProblemKind::Expansion
        | ProblemKind::Ncut
        | ProblemKind::Conductance => {}
        // Independent set maximizes, so its relaxation upper-bounds the
        // optimum.
        ProblemKind::Indset => {
            if opt.value > run.sdp_value + RELAXATION_TOL {
                failures.push(format!(
                    "relaxation: opt {} exceeds sdp_value {} + {RELAXATION_TOL}",
                    opt.value, run.sdp_value
                ));
            }
        }
        _ => {
            if run.sdp_value > opt.value + RELAXATION_TOL {
                failures.push(format!(
                    "relaxation: sdp_value {} exceeds opt {} + {RELAXATION_TOL}",
                    run.sdp_value, opt.value
                ));
            }
        }
    }
    if run.achieved_value > run.predicted_bound * opt.value + RATIO_TOL {
        failures.push(format!(
            "ratio: achieved {} exceeds bound {} x opt {} + {RATIO_TOL}",
            run.achieved_value, run.predicted_bound, opt.value
        ));
    }
    if run.achieved_balance > run.balance_allowance + 1e-9 {
        failures.push(format!(
            "balance: deviation {} exceeds allowance {}",
            run.achieved_balance, run.balance_allowance
        ));
    }
    AuditOutcome { pass: failures.is_empty(), failures }
}

/// Header line of the audit CSV.
pub fn csv_header() -> &'static str {
    "instance-id,kind,n,k,r,eps,eta,lambda,bound,achieved,opt,balance_dev,pass"
}

/// One audit CSV row; `opt` comes from the report when recorded.
pub fn csv_row(run: &GuaranteeReport, outcome: &AuditOutcome) -> String {
    let kind = serde_json::to_value(run.kind)
        .expect("kind serializes")
        .as_str()
        .expect("kind is a string")
        .to_string();
    let opt = run.opt.map_or(String::new(), |v| v.to_string());
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        run.instance_id,
        kind,
        run.n,
        run.k,
        run.r,
        run.eps,
        run.sdp_value,
        run.lambda_r1,
        run.predicted_bound,
        run.achieved_value,
        opt,
        run.achieved_balance,
        outcome.pass
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{complete, cycle, star, WeightedGraph};
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn set(vs: &[usize]) -> BTreeSet<usize> {
        vs.iter().copied().collect()
    }

    #[test]
    fn corpus_counts_match_the_isomorphism_census() {
        // Connected graphs per vertex count: 1, 1, 2, 6, 21, 112.
        let expected = [1usize, 1, 2, 6, 21, 112];
        for (n, &want) in expected.iter().enumerate() {
            let graphs = connected_graphs(n + 1);
            assert_eq!(graphs.len(), want, "n = {}", n + 1);
            assert!(graphs.iter().all(WeightedGraph::is_connected));
        }
        assert_eq!(corpus(6).len(), 143);
    }

    #[test]
    fn bisection_examples() {
        let k4 = complete(4);
        let r = brute_force_bisection(&k4, 2, &set(&[]), &set(&[])).unwrap();
        assert_abs_diff_eq!(r.value, 4.0);
        let c4 = cycle(4);
        let r = brute_force_bisection(&c4, 1, &set(&[0]), &set(&[])).unwrap();
        assert_abs_diff_eq!(r.value, 2.0);
        if let Witness::Subset(u) = &r.witness {
            assert!(u == &[0, 1] || u == &[0, 3]);
        } else {
            panic!("expected a subset witness");
        }
    }

    #[test]
    fn sse_examples() {
        let s4 = star(4);
        let r = brute_force_sse(&s4, 1.0, &set(&[]), &set(&[])).unwrap();
        assert_abs_diff_eq!(r.value, 1.0);
        let c6 = cycle(6);
        let r = brute_force_sse(&c6, 4.0, &set(&[]), &set(&[])).unwrap();
        assert_abs_diff_eq!(r.value, 2.0);
    }

    #[test]
    fn ratio_examples() {
        // Two triangles joined by one edge: conductance 1/7 at one triangle.
        let dumbbell = WeightedGraph::new(
            6,
            vec![
                (0, 1, 1.0),
                (0, 2, 1.0),
                (1, 2, 1.0),
                (3, 4, 1.0),
                (3, 5, 1.0),
                (4, 5, 1.0),
                (2, 3, 1.0),
            ],
        )
        .unwrap();
        let r = brute_force_ratio(&dumbbell, CutObjective::Conductance).unwrap();
        assert_abs_diff_eq!(r.value, 1.0 / 7.0, epsilon = 1e-12);
        let r = brute_force_ratio(&cycle(6), CutObjective::Sparsest).unwrap();
        assert_abs_diff_eq!(r.value, 2.0 / 9.0, epsilon = 1e-12);
        let r = brute_force_ratio(&complete(4), CutObjective::Expansion).unwrap();
        assert_abs_diff_eq!(r.value, 2.0);
    }

    #[test]
    fn kway_examples() {
        let r = brute_force_kway(&complete(3), &[1, 1, 1]).unwrap();
        assert_abs_diff_eq!(r.value, 3.0);
        let two_k2 = WeightedGraph::new(4, vec![(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
        let r = brute_force_kway(&two_k2, &[2, 2]).unwrap();
        assert_abs_diff_eq!(r.value, 0.0);
        let r = brute_force_kway(&cycle(6), &[3, 3]).unwrap();
        assert_abs_diff_eq!(r.value, 2.0);
    }

    #[test]
    fn min_uncut_examples() {
        assert_abs_diff_eq!(brute_force_min_uncut(&cycle(5)).unwrap().value, 1.0);
        assert_abs_diff_eq!(brute_force_min_uncut(&complete(3)).unwrap().value, 1.0);
        assert_abs_diff_eq!(brute_force_min_uncut(&complete(2)).unwrap().value, 0.0);
    }

    #[test]
    fn ug_triangle_with_one_swap() {
        // Two identity edges and one swap compose to a derangement around the
        // triangle: at least one edge must break.
        let inst = crate::problems::parse_unique_games(
            "0 1 1.0 0,1\n1 2 1.0 0,1\n0 2 1.0 1,0\n",
        )
        .unwrap();
        let r = brute_force_ug(&inst).unwrap();
        assert_abs_diff_eq!(r.value, 1.0);
        assert_eq!(r.enumerated, 8);
    }

    #[test]
    fn independent_set_examples() {
        assert_abs_diff_eq!(brute_force_independent_set(&cycle(5)).unwrap().value, 2.0);
        assert_abs_diff_eq!(brute_force_independent_set(&complete(4)).unwrap().value, 1.0);
        let empty = WeightedGraph::new(3, vec![]).unwrap();
        assert_abs_diff_eq!(brute_force_independent_set(&empty).unwrap().value, 3.0);
    }

    #[test]
    fn values_are_invariant_under_relabeling() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for g in connected_graphs(5) {
            let n = g.n();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let edges: Vec<(usize, usize, f64)> = g
                .edges()
                .iter()
                .map(|&(u, v, w)| (perm[u].min(perm[v]), perm[u].max(perm[v]), w))
                .collect();
            let h = WeightedGraph::new(n, edges).unwrap();
            let a = brute_force_bisection(&g, n / 2, &set(&[]), &set(&[])).unwrap();
            let b = brute_force_bisection(&h, n / 2, &set(&[]), &set(&[])).unwrap();
            assert_abs_diff_eq!(a.value, b.value);
            let a = brute_force_ratio(&g, CutObjective::Sparsest).unwrap();
            let b = brute_force_ratio(&h, CutObjective::Sparsest).unwrap();
            assert_abs_diff_eq!(a.value, b.value, epsilon = 1e-12);
            let a = brute_force_independent_set(&g).unwrap();
            let b = brute_force_independent_set(&h).unwrap();
            assert_abs_diff_eq!(a.value, b.value);
        }
    }

    #[test]
    fn budget_guard_fires() {
        let big = WeightedGraph::new(30, (0..29).map(|i| (i, i + 1, 1.0)).collect()).unwrap();
        assert!(matches!(
            brute_force_ratio(&big, CutObjective::Sparsest),
            Err(OracleError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn delta_closed_forms() {
        assert_abs_diff_eq!(delta_eps(&[], 0.0, 0.5, DeltaMode::Hoeffding).unwrap(), 0.0);
        assert_abs_diff_eq!(
            delta_eps(&[0.0; 4], 0.0, 0.5, DeltaMode::Chernoff).unwrap(),
            0.0
        );
        let ones = vec![1.0; 9];
        assert_abs_diff_eq!(
            delta_eps(&ones, 4.5, 0.05, DeltaMode::Hoeffding).unwrap(),
            (9.0 * 40.0f64.ln() / 2.0).sqrt(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            delta_eps(&ones, 4.5, 0.1, DeltaMode::Chernoff).unwrap(),
            2.0 * (4.5 * 20.0f64.ln()).sqrt(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn delta_is_monotone_and_guards_preconditions() {
        let a = vec![0.5, 1.0, 0.25];
        let d1 = delta_eps(&a, 2.0, 0.2, DeltaMode::Hoeffding).unwrap();
        let d2 = delta_eps(&a, 2.0, 0.05, DeltaMode::Hoeffding).unwrap();
        assert!(d2 > d1);
        let bigger = vec![1.0, 1.0, 1.0];
        let d3 = delta_eps(&bigger, 2.0, 0.2, DeltaMode::Hoeffding).unwrap();
        assert!(d3 > d1);
        assert!(matches!(
            delta_eps(&a, 2.0, 1.5, DeltaMode::Hoeffding),
            Err(OracleError::BadEps { .. })
        ));
        assert!(matches!(
            delta_eps(&[-0.1], 2.0, 0.2, DeltaMode::Chernoff),
            Err(OracleError::NegativeWeight { .. })
        ));
        // Weight 1 exceeds mu/ln(1/eps) = 0.5/ln(10).
        assert!(matches!(
            delta_eps(&[1.0], 0.5, 0.1, DeltaMode::Chernoff),
            Err(OracleError::WeightTooLarge { .. })
        ));
    }

    #[test]
    fn empirical_tail_is_covered() {
        // Bernoulli(p) draws weighted by a: exceedance beyond Δ must stay
        // under eps plus three standard errors.
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let trials = 100_000usize;
        for &eps in &[0.1, 0.05] {
            for vector in 0..3 {
                let len = 5 + 3 * vector;
                let a: Vec<f64> = (0..len).map(|_| rng.random_range(0.1..1.0)).collect();
                let p = 0.4;
                let mu: f64 = a.iter().sum::<f64>() * p;
                let delta = delta_eps(&a, mu, eps, DeltaMode::Hoeffding).unwrap();
                let mut exceed = 0usize;
                for _ in 0..trials {
                    let s: f64 = a
                        .iter()
                        .map(|&w| if rng.random::<f64>() < p { w } else { 0.0 })
                        .sum();
                    if (s - mu).abs() > delta {
                        exceed += 1;
                    }
                }
                let rate = exceed as f64 / trials as f64;
                let se = (eps * (1.0 - eps) / trials as f64).sqrt();
                assert!(
                    rate <= eps + 3.0 * se,
                    "eps {eps} vector {vector}: exceedance {rate}"
                );
            }
        }
    }

    #[test]
    fn audit_passes_exact_and_fails_corrupted() {
        let opt = BruteForceResult {
            value: 1.0,
            witness: Witness::Subset(vec![0]),
            enumerated: 2,
        };
        let run = GuaranteeReport {
            instance_id: "k2".into(),
            kind: ProblemKind::Bisection,
            n: 2,
            k: 2,
            r: 1,
            eps: 0.5,
            sdp_value: 1.0,
            lambda_r1: 1.0,
            predicted_bound: 1.5,
            achieved_value: 1.0,
            achieved_balance: 0.0,
            balance_allowance: 2.0,
            opt: Some(1.0),
        };
        let outcome = audit(&run, &opt);
        assert!(outcome.pass, "{:?}", outcome.failures);
        let row = csv_row(&run, &outcome);
        assert!(row.starts_with("k2,bisection,2,2,1,0.5,"));
        assert!(row.ends_with(",true"));
        assert_eq!(row.split(',').count(), csv_header().split(',').count());

        let mut bad = run.clone();
        bad.achieved_value = 10.0;
        let outcome = audit(&bad, &opt);
        assert!(!outcome.pass);
        assert!(outcome.failures[0].starts_with("ratio:"));
        let mut bad = run;
        bad.sdp_value = 1.1;
        assert!(audit(&bad, &opt).failures[0].starts_with("relaxation:"));
    }
}
