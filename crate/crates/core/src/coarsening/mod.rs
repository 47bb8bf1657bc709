//! Graph hierarchies built by repeated coarsening.
//!
//! A [`Hierarchy`] is the sequence `G⁰ … Gᴷ` together with the surjective
//! node maps `φₖ : Vᵏ → Vᵏ⁺¹` (stored as [`Partition`]s) and the projection
//! matrices derived from them. Three coarseners are provided:
//!
//! - [`louvain`]: greedy modularity maximization with node moves and
//!   aggregation.
//! - [`girvan_newman`]: divisive clustering by repeated removal of the edge
//!   with the highest betweenness.
//! - [`heavy_edge_matching`]: multilevel contraction of maximal matchings.
//!
//! Anything else can be plugged in through the [`Coarsener`] trait and
//! [`Hierarchy::build_with`].

mod girvan_newman;
mod hierarchy;
mod louvain;
mod matching;

use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use thiserror::Error;

use crate::graph::{Graph, GraphError};

pub use girvan_newman::{edge_betweenness, girvan_newman, GnTarget};
pub use hierarchy::{Hierarchy, HierarchyConfig, HierarchyFile};
pub use louvain::louvain;
pub use matching::heavy_edge_matching;

#[derive(Debug, Error, PartialEq)]
pub enum CoarsenError {
    #[error("unknown coarsening algorithm {0:?} (expected louvain, newman or hem)")]
    UnknownAlgorithm(String),
    #[error("partition covers {partition} nodes but graph has {graph}")]
    SizeMismatch { partition: usize, graph: usize },
    #[error("partition is not surjective: cluster {0} is empty")]
    EmptyCluster(usize),
    #[error("requested {target} clusters from a graph with {num_nodes} nodes")]
    TargetTooLarge { target: usize, num_nodes: usize },
    #[error("coarsening ratio must lie in (0, 1), got {0}")]
    InvalidRatio(f64),
    #[error("level {level} out of range for hierarchy with max level {max}")]
    LevelOutOfRange { level: usize, max: usize },
    #[error("invalid hierarchy: {0}")]
    InvalidHierarchy(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Assignment of every node to exactly one cluster in `0..num_clusters`,
/// with no empty clusters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assign: Vec<usize>,
    num_clusters: usize,
}

impl Partition {
    /// Validates that `assign` is surjective onto `0..=max`.
    pub fn new(assign: Vec<usize>) -> Result<Self, CoarsenError> {
        let num_clusters = assign.iter().max().map_or(0, |m| m + 1);
        let mut seen = vec![false; num_clusters];
        for &c in &assign {
            seen[c] = true;
        }
        if let Some(empty) = seen.iter().position(|s| !s) {
            return Err(CoarsenError::EmptyCluster(empty));
        }
        Ok(Self { assign, num_clusters })
    }

    /// Relabels arbitrary cluster labels to `0..k` in order of first
    /// appearance.
    pub fn from_labels<T: Eq + std::hash::Hash + Copy>(labels: &[T]) -> Self {
        let mut ids = std::collections::HashMap::new();
        let assign = labels
            .iter()
            .map(|l| {
                let next = ids.len();
                *ids.entry(*l).or_insert(next)
            })
            .collect();
        Self { assign, num_clusters: ids.len() }
    }

    pub fn singletons(n: usize) -> Self {
        Self { assign: (0..n).collect(), num_clusters: n }
    }

    pub fn whole(n: usize) -> Self {
        Self { assign: vec![0; n], num_clusters: usize::from(n > 0) }
    }

    pub fn assign(&self) -> &[usize] {
        &self.assign
    }

    pub fn cluster_of(&self, node: usize) -> usize {
        self.assign[node]
    }

    pub fn num_clusters(&self) -> usize {
        self.num_clusters
    }

    pub fn num_nodes(&self) -> usize {
        self.assign.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_clusters];
        for &c in &self.assign {
            sizes[c] += 1;
        }
        sizes
    }

    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_clusters];
        for (v, &c) in self.assign.iter().enumerate() {
            out[c].push(v);
        }
        out
    }

    /// `next ∘ self`: maps a node through this partition, then through `next`.
    pub fn then(&self, next: &Partition) -> Partition {
        assert_eq!(next.num_nodes(), self.num_clusters, "partitions do not chain");
        Partition {
            assign: self.assign.iter().map(|&c| next.assign[c]).collect(),
            num_clusters: next.num_clusters,
        }
    }

    /// True when both partitions group nodes identically, regardless of
    /// cluster numbering.
    pub fn same_grouping(&self, other: &Partition) -> bool {
        Partition::from_labels(&self.assign).assign == Partition::from_labels(&other.assign).assign
    }
}

/// Newman–Girvan modularity of `p` on `g`. Zero for edgeless graphs.
pub fn modularity(g: &Graph, p: &Partition) -> f64 {
    let m = g.num_edges() as f64;
    if m == 0.0 {
        return 0.0;
    }
    let mut internal = vec![0.0; p.num_clusters()];
    let mut degree = vec![0.0; p.num_clusters()];
    for u in 0..g.num_nodes() {
        let cu = p.cluster_of(u);
        degree[cu] += g.degree(u) as f64;
        for &v in g.neighbors(u) {
            if u < v && p.cluster_of(v) == cu {
                internal[cu] += 1.0;
            }
        }
    }
    internal
        .iter()
        .zip(&degree)
        .map(|(l, d)| l / m - (d / (2.0 * m)).powi(2))
        .sum()
}

/// One-hot projection `P̂` from a level to the next, its normalized form
/// `P = P̂ C^{-1/2}`, and the cluster sizes on the diagonal of `C`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    pub raw: Array2<f64>,
    pub normalized: Array2<f64>,
    pub cluster_sizes: Vec<usize>,
}

impl ProjectionMatrix {
    pub fn from_partition(p: &Partition) -> Self {
        let sizes = p.sizes();
        let mut raw = Array2::zeros((p.num_nodes(), p.num_clusters()));
        let mut normalized = Array2::zeros((p.num_nodes(), p.num_clusters()));
        for (v, &c) in p.assign().iter().enumerate() {
            raw[[v, c]] = 1.0;
            normalized[[v, c]] = 1.0 / (sizes[c] as f64).sqrt();
        }
        Self { raw, normalized, cluster_sizes: sizes }
    }
}

/// Output of [`build_coarse_graph`].
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseLevel {
    /// Cluster graph. Features, when present, are `Pᵀ X` with the normalized
    /// projection, i.e. cluster means scaled by `√|cluster|`.
    pub graph: Graph,
    /// Plain per-cluster feature means.
    pub mean_features: Option<Array2<f64>>,
    /// Edges whose endpoints share a cluster; dropped from `graph` rather
    /// than turned into self-loops.
    pub intra_cluster_edges: usize,
}

pub fn build_coarse_graph(g: &Graph, p: &Partition) -> Result<CoarseLevel, CoarsenError> {
    if p.num_nodes() != g.num_nodes() {
        return Err(CoarsenError::SizeMismatch { partition: p.num_nodes(), graph: g.num_nodes() });
    }
    let mut edges = Vec::new();
    let mut intra = 0;
    for (u, v) in g.edges() {
        let (a, b) = (p.cluster_of(u), p.cluster_of(v));
        if a == b {
            intra += 1;
        } else {
            edges.push((a, b));
        }
    }
    let mut graph = Graph::from_edges(p.num_clusters(), &edges)?;
    let mut mean_features = None;
    if let Some(x) = g.features() {
        let proj = ProjectionMatrix::from_partition(p);
        graph = graph.with_features(proj.normalized.t().dot(x))?;
        let mut mean = proj.raw.t().dot(x);
        for (mut row, &size) in mean.rows_mut().into_iter().zip(&proj.cluster_sizes) {
            row /= size as f64;
        }
        mean_features = Some(mean);
    }
    Ok(CoarseLevel { graph, mean_features, intra_cluster_edges: intra })
}

/// The built-in coarsening algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Louvain,
    Newman,
    Hem,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Louvain => "louvain",
            Algorithm::Newman => "newman",
            Algorithm::Hem => "hem",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = CoarsenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "louvain" => Ok(Algorithm::Louvain),
            "newman" | "girvan-newman" => Ok(Algorithm::Newman),
            "hem" | "metis" => Ok(Algorithm::Hem),
            other => Err(CoarsenError::UnknownAlgorithm(other.to_string())),
        }
    }
}

/// Produces the node map for one coarsening step. `level` is the index of
/// the graph being coarsened, so seeded algorithms can vary per level.
pub trait Coarsener {
    fn name(&self) -> String;

    fn coarsen(&self, g: &Graph, level: usize) -> Result<Partition, CoarsenError>;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gdwl::named::path;
    use ndarray::array;

    #[test]
    fn partition_rejects_gaps() {
        assert_eq!(Partition::new(vec![0, 2, 2]).unwrap_err(), CoarsenError::EmptyCluster(1));
        let p = Partition::new(vec![1, 0, 1]).unwrap();
        assert_eq!(p.num_clusters(), 2);
        assert_eq!(p.sizes(), vec![1, 2]);
    }

    #[test]
    fn from_labels_is_canonical() {
        let p = Partition::from_labels(&[7, 7, 3, 9, 3]);
        assert_eq!(p.assign(), &[0, 0, 1, 2, 1]);
    }

    #[test]
    fn projection_columns_orthonormal() {
        let p = Partition::new(vec![0, 1, 0, 2, 1, 0]).unwrap();
        let proj = ProjectionMatrix::from_partition(&p);
        let gram = proj.normalized.t().dot(&proj.normalized);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[[i, j]] - want).abs() < 1e-12);
            }
        }
        for row in proj.raw.rows() {
            assert_eq!(row.sum(), 1.0);
        }
        assert_eq!(proj.raw.sum_axis(ndarray::Axis(0)).to_vec(), vec![3.0, 2.0, 1.0]);
    }

    #[test]
    fn coarse_path() {
        let p = Partition::new(vec![0, 0, 1]).unwrap();
        let level = build_coarse_graph(&path(3), &p).unwrap();
        assert_eq!((level.graph.num_nodes(), level.graph.num_edges()), (2, 1));
        assert_eq!(level.intra_cluster_edges, 1);
    }

    #[test]
    fn coarse_triangle_drops_self_loop() {
        let tri = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let level = build_coarse_graph(&tri, &Partition::whole(3)).unwrap();
        assert_eq!((level.graph.num_nodes(), level.graph.num_edges()), (1, 0));
        assert_eq!(level.intra_cluster_edges, 3);
    }

    #[test]
    fn coarse_features_mean_and_formula() {
        let g = path(3).with_features(array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]).unwrap();
        let p = Partition::new(vec![0, 0, 1]).unwrap();
        let level = build_coarse_graph(&g, &p).unwrap();
        let mean = level.mean_features.unwrap();
        assert_eq!(mean, array![[2.0, 3.0], [5.0, 6.0]]);
        let x = level.graph.features().unwrap();
        let s = 2f64.sqrt();
        assert!((x[[0, 0]] - 2.0 * s).abs() < 1e-12 && (x[[0, 1]] - 3.0 * s).abs() < 1e-12);
        assert_eq!(x.row(1).to_vec(), vec![5.0, 6.0]);
    }

    #[test]
    fn modularity_reference_values() {
        // two disjoint edges, split along components: 2 * (1/2 - 1/4)
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let p = Partition::new(vec![0, 0, 1, 1]).unwrap();
        assert!((modularity(&g, &p) - 0.5).abs() < 1e-15);
        assert!(modularity(&g, &Partition::whole(4)).abs() < 1e-15);
        assert_eq!(modularity(&Graph::empty(3), &Partition::singletons(3)), 0.0);
    }

    #[test]
    fn algorithm_names() {
        assert_eq!("louvain".parse::<Algorithm>().unwrap(), Algorithm::Louvain);
        assert_eq!("newman".parse::<Algorithm>().unwrap(), Algorithm::Newman);
        assert_eq!("hem".parse::<Algorithm>().unwrap(), Algorithm::Hem);
        assert!(matches!("spectral".parse::<Algorithm>(), Err(CoarsenError::UnknownAlgorithm(_))));
    }
}
