//! Dense attention biased by HDSE: builds the bias from the distance tensor,
//! runs the layer, and backpropagates a loss into every parameter.

use hdse::attention::{AttentionParams, BiasParams, HdseLayer, ParamSet};
use hdse::gdwl::named::barbell;
use hdse::{hdse, Algorithm, Hierarchy, HierarchyConfig};
use ndarray::Array2;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = barbell(4);
    let h = Hierarchy::build(&g, &HierarchyConfig::new(Algorithm::Louvain, 1))?;
    let codes = hdse(&h, 30)?;

    let (d, heads, head_dim) = (4, 2, 3);
    let x = Array2::from_shape_fn((g.num_nodes(), d), |(i, j)| ((i * d + j) as f64 * 0.37).sin());
    let mut layer = HdseLayer::new(
        AttentionParams::init(d, head_dim, heads, 1),
        Some(BiasParams::init(h.max_level() + 1, 30, 8, 8, heads, 2)),
    )?;

    let out = layer.forward(&x, &x, Some(&codes))?;
    println!("output {:?}", out.dim());
    let probs = layer.last_cache().unwrap().probs(0);
    println!("head 0 attention from node 0: {:.3}", probs.row(0));

    let grads = layer.backward(&Array2::ones(out.raw_dim()))?;
    for (name, t) in grads.params.tensor_names().iter().zip(grads.params.tensors()) {
        let norm = t.iter().map(|v| v * v).sum::<f64>().sqrt();
        println!("|dL/d{name}| = {norm:.4}");
    }
    Ok(())
}
