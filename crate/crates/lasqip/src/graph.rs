//! Weighted-graph representation, matrix builders, and cut objective evaluators.
//!
//! Graphs are undirected with nonnegative edge weights, stored once per edge;
//! evaluators that conceptually walk directed edges double-count internally.
//! Everything is dense: at desk scale (n up to a few dozen) O(n^3) linear
//! algebra is free, so no sparse machinery is used.

use nalgebra::DMatrix;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use thiserror::Error;

/// Errors from graph construction or edge-list parsing.
#[derive(Debug, Error)]
pub enum GraphError {
    #[error("line {line}: malformed edge entry `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: self-loop on vertex {vertex}")]
    SelfLoop { line: usize, vertex: usize },
    #[error("line {line}: negative weight {weight}")]
    NegativeWeight { line: usize, weight: f64 },
    #[error("edge ({u}, {v}) references vertex >= n = {n}")]
    VertexOutOfRange { u: usize, v: usize, n: usize },
}

/// An undirected graph with nonnegative edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl WeightedGraph {
    /// Builds a graph from an explicit vertex count and edge list.
    ///
    /// Rejects self-loops and negative weights; vertex ids must be `< n`.
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self, GraphError> {
        for (i, &(u, v, w)) in edges.iter().enumerate() {
            if u == v {
                return Err(GraphError::SelfLoop { line: i + 1, vertex: u });
            }
            if w < 0.0 || !w.is_finite() {
                return Err(GraphError::NegativeWeight { line: i + 1, weight: w });
            }
            if u >= n || v >= n {
                return Err(GraphError::VertexOutOfRange { u, v, n });
            }
        }
        Ok(Self { n, edges })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    /// Weighted degree d_u of each vertex.
    pub fn degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for &(u, v, w) in &self.edges {
            d[u] += w;
            d[v] += w;
        }
        d
    }

    pub fn d_max(&self) -> f64 {
        self.degrees().into_iter().fold(0.0, f64::max)
    }

    /// Total volume m = Σ_u d_u (twice the total edge weight).
    pub fn total_volume(&self) -> f64 {
        self.degrees().iter().sum()
    }

    /// Vol_G(U) = Σ_{u∈U} d_u.
    pub fn volume(&self, set: &BTreeSet<usize>) -> f64 {
        let d = self.degrees();
        set.iter().map(|&u| d[u]).sum()
    }

    /// Weighted adjacency matrix A.
    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for &(u, v, w) in &self.edges {
            a[(u, v)] += w;
            a[(v, u)] += w;
        }
        a
    }

    /// Combinatorial Laplacian L = D − A.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(self.n, self.n);
        for &(u, v, w) in &self.edges {
            l[(u, u)] += w;
            l[(v, v)] += w;
            l[(u, v)] -= w;
            l[(v, u)] -= w;
        }
        l
    }

    /// Normalized Laplacian 𝓛 = D^{-1/2} L D^{-1/2}.
    ///
    /// Rows and columns of degree-0 vertices are zero (the 0/0 diagonal entry
    /// is taken as 0, keeping isolated vertices inert).
    pub fn normalized_laplacian(&self) -> DMatrix<f64> {
        scale_by_inv_sqrt_diag(&self.laplacian(), &self.degrees())
    }

    /// Normalized adjacency 𝒜 = D^{-1/2} A D^{-1/2} (same 0-degree convention).
    pub fn normalized_adjacency(&self) -> DMatrix<f64> {
        scale_by_inv_sqrt_diag(&self.adjacency_matrix(), &self.degrees())
    }

    /// Cut weight Γ_G(U): total weight of edges with exactly one endpoint in U.
    pub fn cut_weight(&self, set: &BTreeSet<usize>) -> f64 {
        self.edges
            .iter()
            .filter(|&&(u, v, _)| set.contains(&u) != set.contains(&v))
            .map(|&(_, _, w)| w)
            .sum()
    }

    /// True if every pair of vertices is joined by a path.
    pub fn is_connected(&self) -> bool {
        if self.n == 0 {
            return true;
        }
        let mut adj = vec![Vec::new(); self.n];
        for &(u, v, w) in &self.edges {
            if w > 0.0 {
                adj[u].push(v);
                adj[v].push(u);
            }
        }
        let mut seen = vec![false; self.n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Serializes to the edge-list text format accepted by [`parse_graph`].
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for &(u, v, w) in &self.edges {
            writeln!(out, "{} {} {:.17e}", u, v, w).unwrap();
        }
        out
    }
}

fn scale_by_inv_sqrt_diag(m: &DMatrix<f64>, degrees: &[f64]) -> DMatrix<f64> {
    let n = degrees.len();
    let inv_sqrt: Vec<f64> = degrees
        .iter()
        .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
        .collect();
    DMatrix::from_fn(n, n, |i, j| m[(i, j)] * inv_sqrt[i] * inv_sqrt[j])
}

/// Parses the edge-list format: one `u v [w]` triple per line, 0-based ids,
/// weight defaulting to 1.0; `#` starts a comment line; blank lines ignored.
/// The vertex count is 1 + the largest id seen.
pub fn parse_graph(text: &str) -> Result<WeightedGraph, GraphError> {
    let mut edges = Vec::new();
    let mut max_id = None::<usize>;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        let malformed = || GraphError::Malformed { line, text: raw.to_string() };
        if fields.len() < 2 || fields.len() > 3 {
            return Err(malformed());
        }
        let u: usize = fields[0].parse().map_err(|_| malformed())?;
        let v: usize = fields[1].parse().map_err(|_| malformed())?;
        let w: f64 = match fields.get(2) {
            Some(s) => s.parse().map_err(|_| malformed())?,
            None => 1.0,
        };
        if u == v {
            return Err(GraphError::SelfLoop { line, vertex: u });
        }
        if w < 0.0 || !w.is_finite() {
            return Err(GraphError::NegativeWeight { line, weight: w });
        }
        max_id = Some(max_id.unwrap_or(0).max(u).max(v));
        edges.push((u, v, w));
    }
    let n = max_id.map_or(0, |m| m + 1);
    WeightedGraph::new(n, edges)
}

/// The cut and ratio objectives of the partitioning problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutObjective {
    /// Γ_G(U): raw cut weight.
    Cut,
    /// Γ / (|U|·|V∖U|): uniform sparsest cut.
    Sparsest,
    /// Γ / min(|U|, |V∖U|): edge expansion.
    Expansion,
    /// Γ / (Vol(U)·Vol(V∖U)): normalized cut.
    Ncut,
    /// Γ / min(Vol(U), Vol(V∖U)): conductance.
    Conductance,
}

impl CutObjective {
    pub fn is_ratio(self) -> bool {
        !matches!(self, CutObjective::Cut)
    }

    /// True for objectives whose denominator is a volume rather than a size.
    pub fn is_volume_based(self) -> bool {
        matches!(self, CutObjective::Ncut | CutObjective::Conductance)
    }
}

/// A cut together with the side statistics used in balance audits.
#[derive(Debug, Clone, PartialEq)]
pub struct CutValue {
    pub cut_weight: f64,
    pub side_size: usize,
    pub side_volume: f64,
}

impl WeightedGraph {
    /// Evaluates `objective` on the side `set`. Ratio objectives require
    /// ∅ ⊊ set ⊊ V.
    pub fn evaluate_cut(&self, set: &BTreeSet<usize>, objective: CutObjective) -> Result<f64, CutError> {
        let size = set.len();
        if objective.is_ratio() && (size == 0 || size == self.n) {
            return Err(CutError::DegenerateSide { size, n: self.n });
        }
        let gamma = self.cut_weight(set);
        let co_size = self.n - size;
        let vol = self.volume(set);
        let co_vol = self.total_volume() - vol;
        Ok(match objective {
            CutObjective::Cut => gamma,
            CutObjective::Sparsest => gamma / (size as f64 * co_size as f64),
            CutObjective::Expansion => gamma / size.min(co_size) as f64,
            CutObjective::Ncut => gamma / (vol * co_vol),
            CutObjective::Conductance => gamma / vol.min(co_vol),
        })
    }

    /// Cut weight plus side statistics for `set`.
    pub fn cut_value(&self, set: &BTreeSet<usize>) -> CutValue {
        CutValue {
            cut_weight: self.cut_weight(set),
            side_size: set.len(),
            side_volume: self.volume(set),
        }
    }
}

/// Error from ratio-objective evaluation on an empty or full side.
#[derive(Debug, Error)]
pub enum CutError {
    #[error("ratio objective undefined for side of size {size} in graph of {n} vertices")]
    DegenerateSide { size: usize, n: usize },
}

// --- Built-in test family -------------------------------------------------

/// Complete graph K_n with unit weights.
pub fn complete(n: usize) -> WeightedGraph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            edges.push((u, v, 1.0));
        }
    }
    WeightedGraph::new(n, edges).unwrap()
}

/// Cycle C_n with unit weights.
pub fn cycle(n: usize) -> WeightedGraph {
    assert!(n >= 3, "cycle needs at least 3 vertices");
    let edges = (0..n).map(|u| (u, (u + 1) % n, 1.0)).collect();
    WeightedGraph::new(n, edges).unwrap()
}

/// Path P_n with unit weights.
pub fn path(n: usize) -> WeightedGraph {
    let edges = (0..n.saturating_sub(1)).map(|u| (u, u + 1, 1.0)).collect();
    WeightedGraph::new(n, edges).unwrap()
}

/// Star K_{1,leaves}: vertex 0 is the center.
pub fn star(leaves: usize) -> WeightedGraph {
    let edges = (1..=leaves).map(|v| (0, v, 1.0)).collect();
    WeightedGraph::new(leaves + 1, edges).unwrap()
}

/// Hypercube Q_d on 2^d vertices.
pub fn hypercube(d: usize) -> WeightedGraph {
    let n = 1usize << d;
    let mut edges = Vec::new();
    for u in 0..n {
        for bit in 0..d {
            let v = u ^ (1 << bit);
            if u < v {
                edges.push((u, v, 1.0));
            }
        }
    }
    WeightedGraph::new(n, edges).unwrap()
}

/// Petersen graph (n = 10, 3-regular).
pub fn petersen() -> WeightedGraph {
    let mut edges = Vec::new();
    for u in 0..5 {
        edges.push((u, (u + 1) % 5, 1.0)); // outer pentagon
        edges.push((u, u + 5, 1.0)); // spokes
        edges.push((u + 5, (u + 2) % 5 + 5, 1.0)); // inner pentagram
    }
    WeightedGraph::new(10, edges).unwrap()
}

/// Complete bipartite graph K_{a,b}: vertices 0..a on one side.
pub fn complete_bipartite(a: usize, b: usize) -> WeightedGraph {
    let mut edges = Vec::new();
    for u in 0..a {
        for v in a..(a + b) {
            edges.push((u, v, 1.0));
        }
    }
    WeightedGraph::new(a + b, edges).unwrap()
}
