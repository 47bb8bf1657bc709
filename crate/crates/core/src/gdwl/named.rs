//! Generators for the small graphs used throughout the test suite and CLI.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::Graph;

#[derive(Debug, Error, PartialEq)]
pub enum NamedGraphError {
    #[error("unknown graph name {0:?}")]
    UnknownName(String),
    #[error("invalid parameters for {name}: {msg}")]
    BadParams { name: &'static str, msg: String },
}

/// A named construction. Parses from `dodecahedron`, `desargues`,
/// `cycle:N`, `barbell:K` and `community:N:P:Q:SEED`.
#[derive(Debug, Clone, PartialEq)]
pub enum NamedGraph {
    Dodecahedron,
    Desargues,
    Cycle(usize),
    /// Two `K`-cliques joined by one bridge edge.
    Barbell(usize),
    /// Two Erdős–Rényi blocks over `n` nodes total, labeled by block.
    CommunityPair { n: usize, p: f64, q: f64, seed: u64 },
}

impl NamedGraph {
    pub fn build(&self) -> Result<Graph, NamedGraphError> {
        match *self {
            NamedGraph::Dodecahedron => Ok(generalized_petersen(10, 2)),
            NamedGraph::Desargues => Ok(generalized_petersen(10, 3)),
            NamedGraph::Cycle(n) => {
                if n < 3 {
                    return Err(NamedGraphError::BadParams { name: "cycle", msg: format!("need n >= 3, got {n}") });
                }
                Ok(cycle(n))
            }
            NamedGraph::Barbell(k) => {
                if k < 2 {
                    return Err(NamedGraphError::BadParams { name: "barbell", msg: format!("need k >= 2, got {k}") });
                }
                Ok(barbell(k))
            }
            NamedGraph::CommunityPair { n, p, q, seed } => {
                if n < 2 || !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) {
                    return Err(NamedGraphError::BadParams {
                        name: "community",
                        msg: format!("need n >= 2 and probabilities in [0, 1], got n={n} p={p} q={q}"),
                    });
                }
                Ok(community_pair(n, p, q, seed))
            }
        }
    }
}

impl fmt::Display for NamedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NamedGraph::Dodecahedron => write!(f, "dodecahedron"),
            NamedGraph::Desargues => write!(f, "desargues"),
            NamedGraph::Cycle(n) => write!(f, "cycle:{n}"),
            NamedGraph::Barbell(k) => write!(f, "barbell:{k}"),
            NamedGraph::CommunityPair { n, p, q, seed } => write!(f, "community:{n}:{p}:{q}:{seed}"),
        }
    }
}

impl FromStr for NamedGraph {
    type Err = NamedGraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let bad = |name: &'static str| NamedGraphError::BadParams { name, msg: format!("cannot parse {s:?}") };
        match parts.as_slice() {
            ["dodecahedron"] => Ok(NamedGraph::Dodecahedron),
            ["desargues"] => Ok(NamedGraph::Desargues),
            ["cycle", n] => Ok(NamedGraph::Cycle(n.parse().map_err(|_| bad("cycle"))?)),
            ["barbell", k] => Ok(NamedGraph::Barbell(k.parse().map_err(|_| bad("barbell"))?)),
            ["community", n, p, q, seed] => Ok(NamedGraph::CommunityPair {
                n: n.parse().map_err(|_| bad("community"))?,
                p: p.parse().map_err(|_| bad("community"))?,
                q: q.parse().map_err(|_| bad("community"))?,
                seed: seed.parse().map_err(|_| bad("community"))?,
            }),
            _ => Err(NamedGraphError::UnknownName(s.to_string())),
        }
    }
}

pub fn make_named_graph(name: &str) -> Result<Graph, NamedGraphError> {
    name.parse::<NamedGraph>()?.build()
}

/// GP(n, k): outer cycle `0..n`, spokes `i -- n+i`, inner star polygon
/// `n+i -- n+(i+k) mod n`.
pub fn generalized_petersen(n: usize, k: usize) -> Graph {
    let mut edges = Vec::with_capacity(3 * n);
    for i in 0..n {
        edges.push((i, (i + 1) % n));
        edges.push((i, n + i));
        edges.push((n + i, n + (i + k) % n));
    }
    Graph::from_edges(2 * n, &edges).expect("generalized Petersen edges are simple")
}

pub fn cycle(n: usize) -> Graph {
    let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    Graph::from_edges(n, &edges).expect("cycle edges are simple")
}

pub fn path(n: usize) -> Graph {
    let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
    Graph::from_edges(n, &edges).expect("path edges are simple")
}

pub fn complete(n: usize) -> Graph {
    let edges: Vec<_> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    Graph::from_edges(n, &edges).expect("clique edges are simple")
}

pub fn barbell(k: usize) -> Graph {
    let mut edges = Vec::new();
    for base in [0, k] {
        for u in 0..k {
            for v in u + 1..k {
                edges.push((base + u, base + v));
            }
        }
    }
    edges.push((k - 1, k));
    Graph::from_edges(2 * k, &edges).expect("barbell edges are simple")
}

/// Nodes `0..n/2` form block 0, the rest block 1. Each intra-block pair is
/// an edge with probability `p`, each cross pair with probability `q`.
pub fn community_pair(n: usize, p: f64, q: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = n / 2;
    let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= half)).collect();
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            let prob = if labels[u] == labels[v] { p } else { q };
            if rng.random::<f64>() < prob {
                edges.push((u, v));
            }
        }
    }
    Graph::from_edges(n, &edges)
        .and_then(|g| g.with_labels(labels))
        .expect("community edges are simple")
}

/// Erdős–Rényi G(n, p).
pub fn gnp(n: usize, p: f64, seed: u64) -> Graph {
    community_pair(n, p, p, seed).without_labels()
}
