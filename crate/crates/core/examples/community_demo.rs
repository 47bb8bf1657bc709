//! Trains the one-layer classifier on synthetic two-community graphs with
//! no bias, a shortest-path bias and the hierarchical bias, and prints the
//! mean test accuracy of each over a few seeds.
//!
//!     cargo run --release --example community_demo -- [seeds] [feature_signal]

use hdse::attention::train::{train_demo, DemoConfig, DemoEncoding};

fn main() {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().map_or(5, |s| s.parse().expect("seed count"));
    let mut cfg = DemoConfig::default();
    if let Some(s) = args.next() {
        cfg.feature_signal = s.parse().expect("feature signal");
    }
    println!("encoding,{},mean", (0..seeds).map(|s| format!("seed{s}")).collect::<Vec<_>>().join(","));
    for enc in DemoEncoding::ALL {
        let accs: Vec<f64> = (0..seeds).map(|s| train_demo(&cfg, enc, s).expect("training").test_accuracy).collect();
        let mean = accs.iter().sum::<f64>() / accs.len() as f64;
        let cells: Vec<String> = accs.iter().map(|a| format!("{a:.4}")).collect();
        println!("{enc},{},{mean:.4}", cells.join(","));
    }
}
