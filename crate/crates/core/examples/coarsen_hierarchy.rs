//! Builds a two-level hierarchy of two bridged 4-cliques with each
//! coarsener and prints the cluster assignments.

use hdse::coarsening::modularity;
use hdse::{Algorithm, Graph, Hierarchy, HierarchyConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut edges = Vec::new();
    for block in [0, 4] {
        for u in block..block + 4 {
            for v in u + 1..block + 4 {
                edges.push((u, v));
            }
        }
    }
    edges.push((3, 4));
    let g = Graph::from_edges(8, &edges)?;

    for algo in [Algorithm::Louvain, Algorithm::Newman, Algorithm::Hem] {
        let h = Hierarchy::build(&g, &HierarchyConfig::new(algo, 2).seed(7))?;
        println!("{algo}:");
        for (k, map) in h.maps().iter().enumerate() {
            let q = modularity(h.level(k), map);
            println!("  level {k} -> {}: {:?} (modularity {q:.3})", k + 1, map.assign());
        }
        let sizes: Vec<usize> = h.levels().iter().map(Graph::num_nodes).collect();
        println!("  sizes {sizes:?}, ratios {:?}", h.ratios());
    }
    Ok(())
}
