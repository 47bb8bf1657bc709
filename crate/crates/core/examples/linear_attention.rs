//! Linear attention from every node to the clusters of level 1, biased by the
//! high-level distance tensor. Cost is |V⁰|·|V¹| instead of |V⁰|².

use hdse::attention::{linear_attention_forward, bias_matrix, AttentionParams, BiasParams};
use hdse::gdwl::named::community_pair;
use hdse::{high_level_hdse, Algorithm, Hierarchy, HierarchyConfig};
use ndarray::Array2;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = 4;
    let g = community_pair(40, 0.3, 0.05, 3);
    let n = g.num_nodes();
    let x = Array2::from_shape_fn((n, d), |(i, j)| ((i + 3 * j) as f64 * 0.21).cos());
    let g = g.with_features(x.clone())?;

    let h = Hierarchy::build(&g, &HierarchyConfig::new(Algorithm::Louvain, 2))?;
    let clusters = h.level(1).features().expect("coarse features").clone();
    let codes = high_level_hdse(&h, 1, 30)?;
    println!("{} nodes attend to {} clusters; distance tensor {:?}", n, clusters.nrows(), codes.dims());

    let p = AttentionParams::init(d, 2, 2, 5);
    let bias = bias_matrix(&codes, &BiasParams::init(h.max_level(), 30, 8, 8, 2, 6))?;
    let out = linear_attention_forward(&x, &clusters, &p, &bias.h)?;
    println!("output {:?}; first row {:.4}", out.dim(), out.row(0));
    Ok(())
}
