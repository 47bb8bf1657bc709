//! Computes the per-level hierarchy distances and the clipped HDSE tensor of
//! a barbell graph, then writes and re-reads the binary tensor format.

use hdse::distance::{ghd, CodeTensor};
use hdse::gdwl::named::barbell;
use hdse::{hdse, high_level_hdse, Algorithm, Hierarchy, HierarchyConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let g = barbell(4);
    let h = Hierarchy::build(&g, &HierarchyConfig::new(Algorithm::Louvain, 1))?;
    for k in 0..=h.max_level() {
        let d = ghd(&h, k)?;
        println!("GHD^{k} from node 0: {:?}", (0..g.num_nodes()).map(|j| d.raw(0, j)).collect::<Vec<_>>());
    }

    let t = hdse(&h, 30)?;
    println!("HDSE dims {:?}; D(0, 7) = {:?}", t.dims(), hdse::distance::DistanceCodes::pair(&t, 0, 7));

    let high = high_level_hdse(&h, 1, 30)?;
    println!("high-level tensor over level-1 clusters: dims {:?}", high.dims());

    let bytes = t.to_binary();
    let back = CodeTensor::read_binary(bytes.as_slice())?;
    assert_eq!(back, t.0);
    println!("binary round trip ok ({} bytes)", bytes.len());
    Ok(())
}
