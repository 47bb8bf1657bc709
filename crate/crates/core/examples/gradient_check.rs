//! Checks the analytic gradients of a biased attention layer against central
//! finite differences and prints the worst relative error per tensor.

use hdse::attention::gradcheck::check_gradients;
use hdse::attention::{AttentionParams, BiasParams, HdseLayer};
use hdse::gdwl::named::cycle;
use hdse::{hdse, Algorithm, Hierarchy, HierarchyConfig};
use ndarray::Array2;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = cycle(9);
    let h = Hierarchy::build(&g, &HierarchyConfig::new(Algorithm::Hem, 2))?;
    let codes = hdse(&h, 5)?;
    let x = Array2::from_shape_fn((9, 3), |(i, j)| ((2 * i + j) as f64 * 0.53).sin());
    let layer = HdseLayer::new(AttentionParams::init(3, 2, 2, 1), Some(BiasParams::init(3, 5, 4, 4, 2, 2)))?;

    let report = check_gradients(&layer, &x, None, Some(&codes), 1e-5, 0)?;
    for (name, err) in &report.per_tensor {
        println!("{name:<24} {err:.2e}");
    }
    println!("max relative error {:.2e} over {} entries", report.max_rel_error, report.entries_checked);
    Ok(())
}
