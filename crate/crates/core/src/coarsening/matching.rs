use std::collections::BTreeMap;

use super::{CoarsenError, Partition};
use crate::graph::Graph;

/// Multilevel coarsening by heavy-edge matching.
///
/// Each round visits the current clusters in ascending id order and pairs
/// every unmatched cluster with its unmatched neighbor of heaviest
/// connecting weight (number of original edges between them; smallest id on
/// ties). Matched pairs merge. Rounds repeat until the cluster count is at
/// most `ratio * n` or no edges remain, so an edgeless graph stays as
/// singletons.
pub fn heavy_edge_matching(g: &Graph, ratio: f64) -> Result<Partition, CoarsenError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(CoarsenError::InvalidRatio(ratio));
    }
    let n = g.num_nodes();
    let goal = ratio * n as f64;
    let mut assign: Vec<usize> = (0..n).collect();
    let mut adj: Vec<BTreeMap<usize, usize>> =
        (0..n).map(|u| g.neighbors(u).iter().map(|&v| (v, 1)).collect()).collect();

    while (adj.len() as f64) > goal && adj.iter().any(|row| !row.is_empty()) {
        let k = adj.len();
        let mut mate = vec![usize::MAX; k];
        for u in 0..k {
            if mate[u] != usize::MAX {
                continue;
            }
            let mut best: Option<(usize, usize)> = None;
            for (&v, &w) in &adj[u] {
                if mate[v] == usize::MAX && best.is_none_or(|(_, bw)| w > bw) {
                    best = Some((v, w));
                }
            }
            if let Some((v, _)) = best {
                mate[u] = v;
                mate[v] = u;
            }
        }
        let mut next = vec![usize::MAX; k];
        let mut count = 0;
        for u in 0..k {
            if next[u] == usize::MAX {
                next[u] = count;
                if mate[u] != usize::MAX {
                    next[mate[u]] = count;
                }
                count += 1;
            }
        }
        let mut merged: Vec<BTreeMap<usize, usize>> = vec![BTreeMap::new(); count];
        for (u, row) in adj.iter().enumerate() {
            for (&v, &w) in row {
                let (a, b) = (next[u], next[v]);
                if a != b {
                    *merged[a].entry(b).or_insert(0) += w;
                }
            }
        }
        for a in assign.iter_mut() {
            *a = next[*a];
        }
        adj = merged;
    }
    Ok(Partition::new(assign).expect("matching relabels densely"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gdwl::named::{cycle, path};

    #[test]
    fn path_of_four_pairs_up() {
        let p = heavy_edge_matching(&path(4), 0.5).unwrap();
        assert_eq!(p.assign(), &[0, 0, 1, 1]);
    }

    #[test]
    fn eight_cycle_adjacent_pairs() {
        let p = heavy_edge_matching(&cycle(8), 0.5).unwrap();
        assert_eq!(p.assign(), &[0, 0, 1, 1, 2, 2, 3, 3]);
    }

    #[test]
    fn edgeless_stays_singletons() {
        let p = heavy_edge_matching(&Graph::empty(4), 0.25).unwrap();
        assert_eq!(p.num_clusters(), 4);
    }

    #[test]
    fn repeated_rounds_reach_ratio() {
        // P8 at 0.25: round one gives 4 pairs, round two merges pairs of pairs
        let p = heavy_edge_matching(&path(8), 0.25).unwrap();
        assert_eq!(p.assign(), &[0, 0, 0, 0, 1, 1, 1, 1]);
    }

    #[test]
    fn heavier_edge_preferred() {
        // after round one on P6 the clusters {0,1},{2,3},{4,5} form a path
        // with unit weights; a triangle fan changes the weights
        let g = Graph::from_edges(6, &[(0, 1), (2, 3), (4, 5), (1, 2), (1, 4), (0, 4), (3, 5)]).unwrap();
        let p = heavy_edge_matching(&g, 0.4).unwrap();
        // round one: 0-1, 2-3, 4-5; clusters A={0,1}, B={2,3}, C={4,5};
        // w(A,B)=1, w(A,C)=2, w(B,C)=1, so A takes C
        assert_eq!(p.assign(), &[0, 0, 1, 1, 0, 0]);
    }

    #[test]
    fn invalid_ratio() {
        assert_eq!(heavy_edge_matching(&path(3), 1.0).unwrap_err(), CoarsenError::InvalidRatio(1.0));
        assert!(heavy_edge_matching(&path(3), 0.0).is_err());
    }
}
