use std::path::Path;
use std::process::{Command, Output};

use hdse::coarsening::{girvan_newman, GnTarget};
use hdse::distance::{CodeTensor, UNREACHABLE};
use hdse::gdwl::named::make_named_graph;
use hdse::{spd_all_pairs, Graph, Hierarchy};

fn hdse_cmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hdse")).args(args).env("HDSE_THREADS", "1").output().expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn coarsen_path_three_gives_two_levels() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("p3.txt");
    std::fs::write(&input, "0 1\n1 2\n").unwrap();
    let out = dir.path().join("h.json");
    let o = hdse_cmd(&["coarsen", path_str(&input), "--algo", "louvain", "-k", "1", "-o", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let h = Hierarchy::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(h.levels().len(), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("level 1:"));
}

#[test]
fn coarsen_dodecahedron_matches_modularity_peak() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("h.json");
    let o = hdse_cmd(&["coarsen", "named:dodecahedron", "--algo", "newman", "-k", "1", "-o", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let h = Hierarchy::from_json(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let peak = girvan_newman(&make_named_graph("dodecahedron").unwrap(), GnTarget::ModularityPeak).unwrap();
    assert_eq!(h.level(1).num_nodes(), peak.num_clusters());
}

#[test]
fn missing_file_exits_two() {
    let o = hdse_cmd(&["coarsen", "/definitely/not/here.txt"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
    assert!(o.stdout.is_empty());
}

#[test]
fn malformed_edge_list_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.txt");
    std::fs::write(&input, "0 1\n1 x\n").unwrap();
    assert_eq!(hdse_cmd(&["coarsen", path_str(&input)]).status.code(), Some(2));
}

#[test]
fn invalid_config_exits_three() {
    assert_eq!(hdse_cmd(&["coarsen", "named:cycle:6", "--algo", "hem", "--ratio", "1.5"]).status.code(), Some(3));
    assert_eq!(hdse_cmd(&["coarsen", "named:cycle:6", "--algo", "spectral"]).status.code(), Some(3));
    assert_eq!(hdse_cmd(&["coarsen", "named:cycle:6", "--no-such-flag"]).status.code(), Some(3));
    assert_eq!(hdse_cmd(&["demo", "--lr", "0", "--seeds", "1", "--epochs", "1"]).status.code(), Some(3));
    assert_eq!(hdse_cmd(&["named-graph", "petersen"]).status.code(), Some(3));
}

#[test]
fn encode_level_zero_is_clipped_spd() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("h.json");
    let t = dir.path().join("t.bin");
    // two components so the unreachable code appears
    let input = dir.path().join("g.txt");
    std::fs::write(&input, "n 9\n0 1\n1 2\n2 3\n3 4\n4 5\n6 7\n").unwrap();
    assert_eq!(hdse_cmd(&["coarsen", path_str(&input), "-k", "0", "-o", path_str(&h)]).status.code(), Some(0));
    let o = hdse_cmd(&["encode", path_str(&h), "--clip", "3", "-o", path_str(&t)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "9 x 9 x 1");

    let tensor = CodeTensor::read_binary(std::fs::read(&t).unwrap().as_slice()).unwrap();
    let g = Graph::from_edge_list(&std::fs::read_to_string(&input).unwrap()).unwrap();
    let spd = spd_all_pairs(&g);
    for i in 0..9 {
        for j in 0..9 {
            let expected = match spd.raw(i, j) {
                UNREACHABLE => 4,
                d => d.min(3) as u8,
            };
            assert_eq!(tensor.get(i, j, 0), expected, "({i}, {j})");
        }
    }
}

#[test]
fn encode_base_level_dims_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let h = dir.path().join("h.json");
    let t = dir.path().join("t.bin");
    hdse_cmd(&["coarsen", "named:barbell:4", "-k", "1", "-o", path_str(&h)]);
    let o = hdse_cmd(&["encode", path_str(&h), "--base-level", "1", "-o", path_str(&t)]);
    assert_eq!(o.status.code(), Some(0));
    let clusters = Hierarchy::from_json(&std::fs::read_to_string(&h).unwrap()).unwrap().level(1).num_nodes();
    let bytes = std::fs::read(&t).unwrap();
    let tensor = CodeTensor::read_binary(bytes.as_slice()).unwrap();
    assert_eq!(tensor.dims(), (8, clusters, 1));
    assert_eq!(tensor.to_binary(), bytes);

    assert_eq!(hdse_cmd(&["encode", path_str(&h), "--base-level", "2", "-o", path_str(&t)]).status.code(), Some(3));
}

#[test]
fn gdwl_exit_codes() {
    let spd = hdse_cmd(&["gdwl", "named:dodecahedron", "named:desargues", "--enc", "spd"]);
    assert_eq!(spd.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&spd.stdout).unwrap();
    assert_eq!(report["distinguished"], false);

    let hdse = hdse_cmd(&["gdwl", "named:dodecahedron", "named:desargues", "--enc", "hdse", "--algo", "newman"]);
    assert_eq!(hdse.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&hdse.stdout).unwrap();
    assert_eq!(report["distinguished"], true);
    assert_eq!(report["seed_stability"].as_array().unwrap().len(), 3);
    assert_eq!(report["seed_dependent"], false);
}

#[test]
fn gdwl_graph_vs_its_permutation() {
    let dir = tempfile::tempdir().unwrap();
    let g = make_named_graph("community:24:0.3:0.1:2").unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.txt");
    std::fs::write(&a, g.to_json()).unwrap();
    let gp = g.permute(&hdse::NodePermutation::random(24, 9)).unwrap();
    std::fs::write(&b, gp.to_edge_list()).unwrap();
    let o = hdse_cmd(&["gdwl", path_str(&a), path_str(&b), "--enc", "spd"]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn demo_smoke() {
    let o = hdse_cmd(&["demo", "--seeds", "1", "--epochs", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "encoding,seed0,mean");
    assert_eq!(lines.len(), 4);
    for (line, name) in lines[1..].iter().zip(["none", "spd", "hdse"]) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[0], name);
        for c in &cells[1..] {
            let acc: f64 = c.parse().unwrap();
            assert!(acc.is_finite() && (0.0..=1.0).contains(&acc));
        }
    }
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("verdict:"));
}

#[test]
fn demo_writes_run_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("acc.csv");
    let runs = dir.path().join("runs");
    let o = hdse_cmd(&[
        "demo", "--seeds", "2", "--epochs", "2", "--graphs", "3", "-o", path_str(&out), "--runs-dir", path_str(&runs),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(&out).unwrap().lines().count(), 4);
    let metrics = std::fs::read_to_string(runs.join("hdse_seed1.csv")).unwrap();
    assert_eq!(metrics.lines().next(), Some("epoch,loss,train_acc,test_acc"));
    assert_eq!(metrics.lines().count(), 3);
    let ckpt: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(runs.join("spd_seed0.json")).unwrap()).unwrap();
    assert!(ckpt["layer"]["attention"]["w_q"][0]["dim"].is_array());
}

#[test]
fn named_graph_emits_edge_list() {
    let o = hdse_cmd(&["named-graph", "desargues"]);
    assert_eq!(o.status.code(), Some(0));
    let g = Graph::from_edge_list(&String::from_utf8(o.stdout).unwrap()).unwrap();
    assert_eq!((g.num_nodes(), g.num_edges()), (20, 30));
}

#[test]
fn threads_flag_validated() {
    assert_eq!(hdse_cmd(&["--threads", "0", "named-graph", "cycle:4"]).status.code(), Some(3));
    assert_eq!(hdse_cmd(&["--threads", "2", "named-graph", "cycle:4"]).status.code(), Some(0));
}
