//! Undirected, unweighted simple graphs in CSR form.
//!
//! [`Graph`] is immutable once built. Every constructor funnels through
//! [`Graph::from_edges`], which normalizes the edge list (orders each pair,
//! sorts, deduplicates) and rejects self-loops, so all downstream code can
//! assume sorted neighbor lists and a symmetric adjacency.

use std::fmt::Write as _;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid JSON graph: {0}")]
    Json(String),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("edge ({u}, {v}) references a node outside 0..{num_nodes}")]
    NodeOutOfRange { u: usize, v: usize, num_nodes: usize },
    #[error("feature matrix has {rows} rows but graph has {num_nodes} nodes")]
    FeatureRows { rows: usize, num_nodes: usize },
    #[error("label vector has {len} entries but graph has {num_nodes} nodes")]
    LabelCount { len: usize, num_nodes: usize },
    #[error("feature rows have inconsistent widths")]
    RaggedFeatures,
    #[error("non-finite feature value at ({row}, {col})")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("permutation is not a bijection on 0..{0}")]
    NotBijective(usize),
    #[error("permutation covers {perm} nodes but graph has {graph}")]
    PermutationSize { perm: usize, graph: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    features: Option<Array2<f64>>,
    labels: Option<Vec<usize>>,
}

impl Graph {
    /// Builds a validated graph from an arbitrary edge list.
    ///
    /// Pairs are unordered; `(u, v)` and `(v, u)` are the same edge and
    /// repeated pairs collapse to one.
    pub fn from_edges(num_nodes: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut pairs = Vec::with_capacity(edges.len());
        for &(u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(GraphError::NodeOutOfRange { u, v, num_nodes });
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            pairs.push((u.min(v), u.max(v)));
        }
        pairs.sort_unstable();
        pairs.dedup();

        let mut degree = vec![0usize; num_nodes];
        for &(u, v) in &pairs {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut offsets = Vec::with_capacity(num_nodes + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..num_nodes].to_vec();
        let mut neighbors = vec![0usize; offsets[num_nodes]];
        for &(u, v) in &pairs {
            neighbors[fill[u]] = v;
            fill[u] += 1;
            neighbors[fill[v]] = u;
            fill[v] += 1;
        }
        for u in 0..num_nodes {
            neighbors[offsets[u]..offsets[u + 1]].sort_unstable();
        }
        Ok(Self { offsets, neighbors, features: None, labels: None })
    }

    pub fn empty(num_nodes: usize) -> Self {
        Self { offsets: vec![0; num_nodes + 1], neighbors: Vec::new(), features: None, labels: None }
    }

    pub fn with_features(mut self, features: Array2<f64>) -> Result<Self, GraphError> {
        if features.nrows() != self.num_nodes() {
            return Err(GraphError::FeatureRows { rows: features.nrows(), num_nodes: self.num_nodes() });
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self, GraphError> {
        if labels.len() != self.num_nodes() {
            return Err(GraphError::LabelCount { len: labels.len(), num_nodes: self.num_nodes() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn without_features(mut self) -> Self {
        self.features = None;
        self
    }

    pub fn without_labels(mut self) -> Self {
        self.labels = None;
        self
    }

    pub fn num_nodes(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn neighbors(&self, u: usize) -> &[usize] {
        &self.neighbors[self.offsets[u]..self.offsets[u + 1]]
    }

    pub fn degree(&self, u: usize) -> usize {
        self.offsets[u + 1] - self.offsets[u]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.num_nodes() && self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in ascending order. The position of an
    /// edge in this list is its edge id.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.num_edges());
        for u in 0..self.num_nodes() {
            for &v in self.neighbors(u) {
                if u < v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    pub fn features(&self) -> Option<&Array2<f64>> {
        self.features.as_ref()
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    /// Re-checks every structural invariant. Constructors already guarantee
    /// these; this exists for data that crossed a serialization boundary.
    pub fn validate(&self) -> Result<(), GraphError> {
        let n = self.num_nodes();
        if self.offsets[0] != 0 || *self.offsets.last().unwrap() != self.neighbors.len() {
            return Err(GraphError::Json("CSR offsets do not span the neighbor array".into()));
        }
        for u in 0..n {
            if self.offsets[u] > self.offsets[u + 1] {
                return Err(GraphError::Json(format!("CSR offsets decrease at node {u}")));
            }
            let nb = self.neighbors(u);
            for w in nb.windows(2) {
                if w[0] >= w[1] {
                    return Err(GraphError::Json(format!("neighbors of {u} not strictly ascending")));
                }
            }
            for &v in nb {
                if v >= n {
                    return Err(GraphError::NodeOutOfRange { u, v, num_nodes: n });
                }
                if v == u {
                    return Err(GraphError::SelfLoop(u));
                }
                if !self.has_edge(v, u) {
                    return Err(GraphError::Json(format!("edge ({u}, {v}) has no reverse")));
                }
            }
        }
        if let Some(x) = &self.features {
            if x.nrows() != n {
                return Err(GraphError::FeatureRows { rows: x.nrows(), num_nodes: n });
            }
        }
        if let Some(l) = &self.labels {
            if l.len() != n {
                return Err(GraphError::LabelCount { len: l.len(), num_nodes: n });
            }
        }
        Ok(())
    }

    /// Relabels nodes so that node `i` of `self` becomes node `perm.apply(i)`.
    pub fn permute(&self, perm: &NodePermutation) -> Result<Self, GraphError> {
        if perm.len() != self.num_nodes() {
            return Err(GraphError::PermutationSize { perm: perm.len(), graph: self.num_nodes() });
        }
        let edges: Vec<_> = self.edges().into_iter().map(|(u, v)| (perm.apply(u), perm.apply(v))).collect();
        let mut out = Graph::from_edges(self.num_nodes(), &edges)?;
        let inv = perm.inverse();
        if let Some(x) = &self.features {
            let idx: Vec<usize> = (0..self.num_nodes()).map(|i| inv.apply(i)).collect();
            out.features = Some(x.select(Axis(0), &idx));
        }
        if let Some(l) = &self.labels {
            out.labels = Some((0..self.num_nodes()).map(|i| l[inv.apply(i)]).collect());
        }
        Ok(out)
    }

    pub fn degree_sequence(&self) -> Vec<usize> {
        let mut d: Vec<usize> = (0..self.num_nodes()).map(|u| self.degree(u)).collect();
        d.sort_unstable();
        d
    }

    /// Parses the whitespace-separated edge-list format.
    ///
    /// `#` starts a comment line, an optional `n <count>` header fixes the node
    /// count (allowing isolated trailing nodes), and every other non-blank line
    /// is a `u v` pair. Without a header the node count is `max id + 1`.
    pub fn from_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut declared = None;
        let mut edges = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let first = parts.next().unwrap();
            if first == "n" {
                let count = parts
                    .next()
                    .and_then(|t| t.parse::<usize>().ok())
                    .ok_or_else(|| GraphError::Parse { line: line_no, msg: "expected `n <count>`".into() })?;
                if parts.next().is_some() {
                    return Err(GraphError::Parse { line: line_no, msg: "trailing tokens after header".into() });
                }
                if declared.is_some() || !edges.is_empty() {
                    return Err(GraphError::Parse { line: line_no, msg: "header must precede edges".into() });
                }
                declared = Some(count);
                continue;
            }
            let parse = |tok: Option<&str>| -> Result<usize, GraphError> {
                tok.and_then(|t| t.parse::<usize>().ok()).ok_or_else(|| GraphError::Parse {
                    line: line_no,
                    msg: format!("expected `u v`, got {line:?}"),
                })
            };
            let u = parse(Some(first))?;
            let v = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(GraphError::Parse { line: line_no, msg: format!("expected `u v`, got {line:?}") });
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            edges.push((u, v));
        }
        let inferred = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
        let n = match declared {
            Some(n) => n,
            None => inferred,
        };
        Graph::from_edges(n, &edges)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        writeln!(out, "n {}", self.num_nodes()).unwrap();
        for (u, v) in self.edges() {
            writeln!(out, "{u} {v}").unwrap();
        }
        out
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let raw: JsonGraph = serde_json::from_str(text).map_err(|e| GraphError::Json(e.to_string()))?;
        raw.try_into()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&JsonGraph::from(self)).expect("graph serializes")
    }
}

/// Serialized form shared by the JSON graph loader and hierarchy files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JsonGraph {
    pub num_nodes: usize,
    pub edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<usize>>,
}

impl From<&Graph> for JsonGraph {
    fn from(g: &Graph) -> Self {
        Self {
            num_nodes: g.num_nodes(),
            edges: g.edges().into_iter().map(|(u, v)| [u, v]).collect(),
            features: g.features().map(|x| x.rows().into_iter().map(|r| r.to_vec()).collect()),
            labels: g.labels().map(<[usize]>::to_vec),
        }
    }
}

impl TryFrom<JsonGraph> for Graph {
    type Error = GraphError;

    fn try_from(raw: JsonGraph) -> Result<Self, GraphError> {
        let edges: Vec<_> = raw.edges.iter().map(|e| (e[0], e[1])).collect();
        let mut g = Graph::from_edges(raw.num_nodes, &edges)?;
        if let Some(rows) = raw.features {
            if rows.len() != raw.num_nodes {
                return Err(GraphError::FeatureRows { rows: rows.len(), num_nodes: raw.num_nodes });
            }
            let width = rows.first().map_or(0, Vec::len);
            if rows.iter().any(|r| r.len() != width) {
                return Err(GraphError::RaggedFeatures);
            }
            let flat: Vec<f64> = rows.into_iter().flatten().collect();
            if let Some(pos) = flat.iter().position(|x| !x.is_finite()) {
                return Err(GraphError::NonFiniteFeature { row: pos / width.max(1), col: pos % width.max(1) });
            }
            let x = Array2::from_shape_vec((raw.num_nodes, width), flat).expect("shape checked");
            g = g.with_features(x)?;
        }
        if let Some(labels) = raw.labels {
            g = g.with_labels(labels)?;
        }
        Ok(g)
    }
}

/// A bijection on `0..n`, used to relabel graphs and everything derived
/// from them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodePermutation {
    forward: Vec<usize>,
}

impl NodePermutation {
    pub fn new(forward: Vec<usize>) -> Result<Self, GraphError> {
        let n = forward.len();
        let mut seen = vec![false; n];
        for &t in &forward {
            if t >= n || seen[t] {
                return Err(GraphError::NotBijective(n));
            }
            seen[t] = true;
        }
        Ok(Self { forward })
    }

    pub fn identity(n: usize) -> Self {
        Self { forward: (0..n).collect() }
    }

    pub fn random(n: usize, seed: u64) -> Self {
        let mut forward: Vec<usize> = (0..n).collect();
        forward.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Self { forward }
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }

    pub fn apply(&self, i: usize) -> usize {
        self.forward[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.forward
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.forward.len()];
        for (i, &t) in self.forward.iter().enumerate() {
            inv[t] = i;
        }
        Self { forward: inv }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn p3() -> Graph {
        Graph::from_edge_list("0 1\n1 2").unwrap()
    }

    #[test]
    fn path_from_edge_list() {
        let g = p3();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.neighbors(1), &[0, 2]);
    }

    #[test]
    fn reversed_duplicate_collapses() {
        let g = Graph::from_edge_list("0 1\n1 0").unwrap();
        assert_eq!((g.num_nodes(), g.num_edges()), (2, 1));
    }

    #[test]
    fn header_allows_isolated_nodes() {
        let g = Graph::from_edge_list("# tail nodes\nn 5\n0 1\n").unwrap();
        assert_eq!(g.num_nodes(), 5);
        assert_eq!(g.degree(4), 0);
    }

    #[test]
    fn header_rejects_out_of_range_edge() {
        assert!(matches!(Graph::from_edge_list("n 2\n0 3"), Err(GraphError::NodeOutOfRange { .. })));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = Graph::from_edge_list("0 1\n# c\n1 x\n").unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 3, .. }), "{err:?}");
        let err = Graph::from_edge_list("0 1 2\n").unwrap_err();
        assert!(matches!(err, GraphError::Parse { line: 1, .. }));
    }

    #[test]
    fn self_loop_rejected() {
        assert_eq!(Graph::from_edge_list("0 1\n2 2").unwrap_err(), GraphError::SelfLoop(2));
    }

    #[test]
    fn json_examples() {
        let g = Graph::from_json(r#"{"num_nodes":2,"edges":[[0,1]]}"#).unwrap();
        assert_eq!((g.num_nodes(), g.num_edges()), (2, 1));

        let g = Graph::from_json(r#"{"num_nodes":3,"edges":[[0,1],[1,2]],"features":[[1],[0],[1]]}"#).unwrap();
        assert_eq!(g.features().unwrap(), &array![[1.0], [0.0], [1.0]]);

        let err = Graph::from_json(r#"{"num_nodes":2,"edges":[[0,1]],"features":[[1]]}"#).unwrap_err();
        assert_eq!(err, GraphError::FeatureRows { rows: 1, num_nodes: 2 });
    }

    #[test]
    fn json_round_trip_keeps_labels() {
        let g = p3().with_labels(vec![0, 1, 0]).unwrap();
        let back = Graph::from_json(&g.to_json()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn permute_identity_and_swap() {
        let g = p3();
        assert_eq!(g.permute(&NodePermutation::identity(3)).unwrap(), g);
        let swap = NodePermutation::new(vec![2, 1, 0]).unwrap();
        assert_eq!(g.permute(&swap).unwrap().edges(), g.edges());
    }

    #[test]
    fn permute_moves_features() {
        let g = p3().with_features(array![[1.0], [2.0], [3.0]]).unwrap();
        let sigma = NodePermutation::new(vec![1, 2, 0]).unwrap();
        let h = g.permute(&sigma).unwrap();
        // node i of h carries the features of sigma^-1(i)
        assert_eq!(h.features().unwrap(), &array![[3.0], [1.0], [2.0]]);
    }

    #[test]
    fn non_bijection_rejected() {
        assert_eq!(NodePermutation::new(vec![0, 0, 1]).unwrap_err(), GraphError::NotBijective(3));
        let g = p3();
        assert!(g.permute(&NodePermutation::identity(4)).is_err());
    }
}
