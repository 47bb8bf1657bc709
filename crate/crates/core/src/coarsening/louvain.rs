use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Partition;
use crate::graph::Graph;

const MAX_PASSES: usize = 64;
const GAIN_EPS: f64 = 1e-12;

/// Weighted graph used between aggregation rounds. `adj[i]` holds
/// `(j, A_ij)` sorted by `j`; a self-loop entry stores `A_ii`, which is twice
/// the internal edge weight so that `k_i = Σ_j A_ij` stays the node strength.
struct Weighted {
    adj: Vec<Vec<(usize, f64)>>,
    strength: Vec<f64>,
    two_m: f64,
}

impl Weighted {
    fn from_graph(g: &Graph) -> Self {
        let adj: Vec<Vec<(usize, f64)>> =
            (0..g.num_nodes()).map(|u| g.neighbors(u).iter().map(|&v| (v, 1.0)).collect()).collect();
        Self::from_adj(adj)
    }

    fn from_adj(adj: Vec<Vec<(usize, f64)>>) -> Self {
        let strength: Vec<f64> = adj.iter().map(|row| row.iter().map(|&(_, w)| w).sum()).collect();
        let two_m = strength.iter().sum();
        Self { adj, strength, two_m }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    fn aggregate(&self, community: &[usize], count: usize) -> Self {
        let mut rows: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); count];
        for (i, row) in self.adj.iter().enumerate() {
            let ci = community[i];
            for &(j, w) in row {
                *rows[ci].entry(community[j]).or_insert(0.0) += w;
            }
        }
        Self::from_adj(rows.into_iter().map(|r| r.into_iter().collect()).collect())
    }
}

/// Moves nodes between communities until no move raises modularity.
/// Returns whether any node changed community.
fn local_moves(g: &Weighted, community: &mut [usize], rng: &mut ChaCha8Rng) -> bool {
    let n = g.len();
    let mut total = vec![0.0; n];
    for i in 0..n {
        total[community[i]] += g.strength[i];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut link = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut improved = false;
    for _ in 0..MAX_PASSES {
        let mut moved = false;
        for &i in &order {
            let own = community[i];
            let ki = g.strength[i];
            for &(j, w) in &g.adj[i] {
                if j == i {
                    continue;
                }
                let c = community[j];
                if !touched.contains(&c) {
                    touched.push(c);
                }
                link[c] += w;
            }
            total[own] -= ki;

            // gain of joining c, up to the common factor 1/m
            let gain = |c: usize, link: &[f64]| link[c] - total[c] * ki / g.two_m;
            // staying wins ties; among movers the smallest index wins
            let mut best = own;
            let mut best_gain = gain(own, &link);
            touched.sort_unstable();
            for &c in &touched {
                let gc = gain(c, &link);
                if c != own && gc > best_gain + GAIN_EPS {
                    best = c;
                    best_gain = gc;
                }
            }
            total[best] += ki;
            if best != own {
                community[i] = best;
                moved = true;
                improved = true;
            }
            for &c in &touched {
                link[c] = 0.0;
            }
            touched.clear();
        }
        if !moved {
            break;
        }
    }
    improved
}

/// Louvain community detection.
///
/// Nodes are visited in a seeded shuffled order; each moves to the
/// neighboring community with the largest modularity gain (smallest index
/// on ties) when that beats staying put. Communities are then collapsed into
/// a weighted super-graph and the process repeats until a round makes no
/// move. The returned partition is numbered by first appearance.
pub fn louvain(g: &Graph, seed: u64) -> Partition {
    let n = g.num_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assign: Vec<usize> = (0..n).collect();
    if g.num_edges() == 0 {
        return Partition::singletons(n);
    }
    let mut current = Weighted::from_graph(g);
    loop {
        let mut community: Vec<usize> = (0..current.len()).collect();
        if !local_moves(&current, &mut community, &mut rng) {
            break;
        }
        let relabeled = Partition::from_labels(&community);
        for a in assign.iter_mut() {
            *a = relabeled.cluster_of(*a);
        }
        current = current.aggregate(relabeled.assign(), relabeled.num_clusters());
        if current.len() == 1 {
            break;
        }
    }
    Partition::from_labels(&assign)
}
