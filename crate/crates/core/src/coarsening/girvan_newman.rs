use std::collections::VecDeque;

use super::{modularity, CoarsenError, Partition};
use crate::graph::Graph;

/// Relative tolerance under which two betweenness scores count as tied.
const TIE_TOL: f64 = 1e-9;

/// Stopping rule for [`girvan_newman`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GnTarget {
    /// Stop as soon as the graph has at least this many components.
    Clusters(usize),
    /// Run to exhaustion and keep the component split of highest modularity.
    ModularityPeak,
}

/// Brandes edge betweenness over the edges with `alive[id]` set. Scores are
/// indexed by edge id (position in `g.edges()`), summed over ordered
/// source/target pairs, so each unordered pair contributes twice.
fn betweenness_masked(g: &Graph, edges: &[(usize, usize)], alive: &[bool]) -> Vec<f64> {
    let n = g.num_nodes();
    // (neighbor, edge id) lists over surviving edges
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (id, &(u, v)) in edges.iter().enumerate() {
        if alive[id] {
            adj[u].push((v, id));
            adj[v].push((u, id));
        }
    }
    let mut score = vec![0.0; edges.len()];
    let mut dist = vec![usize::MAX; n];
    let mut sigma = vec![0.0f64; n];
    let mut delta = vec![0.0f64; n];
    let mut order = Vec::with_capacity(n);
    let mut queue = VecDeque::new();
    for s in 0..n {
        dist.fill(usize::MAX);
        sigma.fill(0.0);
        delta.fill(0.0);
        order.clear();
        dist[s] = 0;
        sigma[s] = 1.0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for &(v, _) in &adj[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
                if dist[v] == dist[u] + 1 {
                    sigma[v] += sigma[u];
                }
            }
        }
        for &w in order.iter().rev() {
            for &(v, id) in &adj[w] {
                if dist[v] != usize::MAX && dist[v] + 1 == dist[w] {
                    let c = sigma[v] / sigma[w] * (1.0 + delta[w]);
                    score[id] += c;
                    delta[v] += c;
                }
            }
        }
    }
    score
}

/// Edge betweenness of every edge of `g`, indexed by edge id. Each unordered
/// node pair contributes once.
pub fn edge_betweenness(g: &Graph) -> Vec<f64> {
    let edges = g.edges();
    let alive = vec![true; edges.len()];
    betweenness_masked(g, &edges, &alive).into_iter().map(|b| b / 2.0).collect()
}

fn components(n: usize, edges: &[(usize, usize)], alive: &[bool]) -> Vec<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (id, &(u, v)) in edges.iter().enumerate() {
        if alive[id] {
            let (a, b) = (find(&mut parent, u), find(&mut parent, v));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
    }
    (0..n).map(|v| find(&mut parent, v)).collect()
}

/// Girvan–Newman divisive clustering.
///
/// Repeatedly removes the single edge of highest betweenness (recomputed
/// after each removal; ties within a relative `1e-9` go to the smallest edge
/// id) and reads clusters off the connected components. Components of a
/// disconnected input are simply separate clusters from the start.
pub fn girvan_newman(g: &Graph, target: GnTarget) -> Result<Partition, CoarsenError> {
    let n = g.num_nodes();
    if let GnTarget::Clusters(k) = target {
        if k > n {
            return Err(CoarsenError::TargetTooLarge { target: k, num_nodes: n });
        }
    }
    let edges = g.edges();
    let mut alive = vec![true; edges.len()];
    let mut remaining = edges.len();

    let mut current = Partition::from_labels(&components(n, &edges, &alive));
    let mut best_q = modularity(g, &current);
    let mut best = current.clone();
    loop {
        if let GnTarget::Clusters(k) = target {
            if current.num_clusters() >= k {
                return Ok(current);
            }
        }
        if remaining == 0 {
            break;
        }
        let score = betweenness_masked(g, &edges, &alive);
        let max = score.iter().zip(&alive).filter(|(_, &a)| a).map(|(s, _)| *s).fold(f64::NEG_INFINITY, f64::max);
        let cut = (0..edges.len())
            .find(|&id| alive[id] && score[id] >= max - TIE_TOL * max.abs().max(1.0))
            .expect("an alive edge attains the maximum");
        alive[cut] = false;
        remaining -= 1;

        let split = Partition::from_labels(&components(n, &edges, &alive));
        if split.num_clusters() != current.num_clusters() {
            current = split;
            let q = modularity(g, &current);
            if q > best_q + 1e-12 {
                best_q = q;
                best = current.clone();
            }
        }
    }
    Ok(match target {
        GnTarget::Clusters(_) => current,
        GnTarget::ModularityPeak => best,
    })
}
