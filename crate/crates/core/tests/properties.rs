use hdse::attention::{attention_forward, AttentionParams};
use hdse::coarsening::{Algorithm, Hierarchy, HierarchyConfig, Partition};
use hdse::distance::{ghd, DistanceCodes, UNREACHABLE};
use hdse::gdwl::{gd_wl_refine, verdict_from_codes, EncodingKind, PairEncoding};
use hdse::{hdse, spd_all_pairs, Graph, GraphError, NodePermutation};
use ndarray::{Array2, Array3};
use proptest::prelude::*;

fn graph_strategy(max_n: usize) -> impl Strategy<Value = Graph> {
    (1..=max_n).prop_flat_map(|n| {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
        let len = pairs.len();
        (Just(n), Just(pairs), proptest::collection::vec(any::<bool>(), len), 0.0..1.0f64).prop_map(
            |(n, pairs, keep, density)| {
                let edges: Vec<_> = pairs
                    .into_iter()
                    .zip(keep)
                    .enumerate()
                    .filter(|(i, (_, k))| *k && ((*i as f64 * 0.618).fract() < density))
                    .map(|(_, (e, _))| e)
                    .collect();
                Graph::from_edges(n, &edges).unwrap()
            },
        )
    })
}

fn algo_strategy() -> impl Strategy<Value = Algorithm> {
    prop_oneof![Just(Algorithm::Louvain), Just(Algorithm::Newman), Just(Algorithm::Hem)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn permute_round_trip(g in graph_strategy(20), seed in any::<u64>()) {
        let sigma = NodePermutation::random(g.num_nodes(), seed);
        let back = g.permute(&sigma).unwrap().permute(&sigma.inverse()).unwrap();
        prop_assert_eq!(back.edges(), g.edges());
        let permuted = g.permute(&sigma).unwrap();
        prop_assert_eq!(permuted.num_edges(), g.num_edges());
        for (u, v) in g.edges() {
            prop_assert!(permuted.has_edge(sigma.apply(u), sigma.apply(v)));
        }
    }

    #[test]
    fn edge_list_and_json_round_trip(g in graph_strategy(20)) {
        let from_text = Graph::from_edge_list(&g.to_edge_list()).unwrap();
        prop_assert_eq!(from_text.num_nodes(), g.num_nodes());
        prop_assert_eq!(from_text.edges(), g.edges());
        let from_json = Graph::from_json(&g.to_json()).unwrap();
        prop_assert_eq!(from_json.edges(), g.edges());
    }

    #[test]
    fn corrupted_json_is_rejected(n in 1usize..10, u in 0usize..20, v in 0usize..20) {
        let text = format!(r#"{{"num_nodes": {n}, "edges": [[{u}, {v}]]}}"#);
        let result = Graph::from_json(&text);
        if u >= n || v >= n {
            prop_assert!(matches!(result, Err(GraphError::NodeOutOfRange { .. })), "{:?}", result);
        } else if u == v {
            prop_assert!(matches!(result, Err(GraphError::SelfLoop(_))), "{:?}", result);
        } else {
            let g = result.unwrap();
            prop_assert!(g.validate().is_ok());
            prop_assert_eq!(g.num_edges(), 1);
        }
    }

    #[test]
    fn spd_is_a_metric_on_components(g in graph_strategy(16)) {
        let d = spd_all_pairs(&g);
        let n = g.num_nodes();
        for i in 0..n {
            prop_assert_eq!(d.raw(i, i), 0);
            for j in 0..n {
                prop_assert_eq!(d.raw(i, j), d.raw(j, i));
                if g.has_edge(i, j) {
                    prop_assert_eq!(d.raw(i, j), 1);
                }
            }
        }
    }

    #[test]
    fn ghd_pseudometric_and_monotone(g in graph_strategy(14), algo in algo_strategy(), seed in 0u64..4) {
        let h = Hierarchy::build(&g, &HierarchyConfig::new(algo, 2).seed(seed)).unwrap();
        let n = g.num_nodes();
        let levels: Vec<_> = (0..=2).map(|k| ghd(&h, k).unwrap()).collect();
        for d in &levels {
            for i in 0..n {
                prop_assert_eq!(d.raw(i, i), 0);
                for j in 0..n {
                    prop_assert_eq!(d.raw(i, j), d.raw(j, i));
                    for m in 0..n {
                        let (a, b) = (d.raw(i, m), d.raw(m, j));
                        if a != UNREACHABLE && b != UNREACHABLE {
                            prop_assert!(d.raw(i, j) <= a + b);
                        }
                    }
                }
            }
        }
        // coarsening never lengthens a distance
        for k in 0..2 {
            for i in 0..n {
                for j in 0..n {
                    prop_assert!(levels[k + 1].raw(i, j) <= levels[k].raw(i, j));
                }
            }
        }
    }

    #[test]
    fn hdse_permutation_equivariant(g in graph_strategy(14), algo in algo_strategy(), seed in any::<u64>()) {
        let h = Hierarchy::build(&g, &HierarchyConfig::new(algo, 2)).unwrap();
        let sigma = NodePermutation::random(g.num_nodes(), seed);
        let hp = h.permute(&sigma).unwrap();
        let (t, tp) = (hdse(&h, 6).unwrap(), hdse(&hp, 6).unwrap());
        for i in 0..g.num_nodes() {
            for j in 0..g.num_nodes() {
                prop_assert_eq!(t.pair(i, j), tp.pair(sigma.apply(i), sigma.apply(j)));
            }
        }
    }

    #[test]
    fn attention_permutation_equivariant(n in 1usize..8, seed in any::<u64>()) {
        let p = AttentionParams::init(3, 2, 2, seed);
        let x = Array2::from_shape_fn((n, 3), |(i, j)| ((seed % 97) as f64 + (i * 3 + j) as f64).sin());
        let h = Array3::from_shape_fn((n, n, 2), |(i, j, k)| ((i * 7 + j * 3 + k) as f64 * 0.41).cos());
        let sigma = NodePermutation::random(n, seed.wrapping_add(1));
        let xp = Array2::from_shape_fn((n, 3), |(i, j)| x[[sigma.inverse().apply(i), j]]);
        let inv = sigma.inverse();
        let hp = Array3::from_shape_fn((n, n, 2), |(i, j, k)| h[[inv.apply(i), inv.apply(j), k]]);
        let (out, _) = attention_forward(&x, &x, &p, Some(&h)).unwrap();
        let (outp, _) = attention_forward(&xp, &xp, &p, Some(&hp)).unwrap();
        for i in 0..n {
            for c in 0..out.ncols() {
                prop_assert!((out[[i, c]] - outp[[sigma.apply(i), c]]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn softmax_row_shift_invariance(n in 1usize..8, row in 0usize..8, shift in -50.0..50.0f64) {
        let row = row % n;
        let p = AttentionParams::init(3, 2, 1, 3);
        let x = Array2::from_shape_fn((n, 3), |(i, j)| ((i + 2 * j) as f64).cos());
        let h = Array3::from_shape_fn((n, n, 1), |(i, j, _)| (i as f64 - j as f64) * 0.3);
        let mut shifted = h.clone();
        for j in 0..n {
            shifted[[row, j, 0]] += shift;
        }
        let (a, _) = attention_forward(&x, &x, &p, Some(&h)).unwrap();
        let (b, _) = attention_forward(&x, &x, &p, Some(&shifted)).unwrap();
        for c in 0..a.ncols() {
            prop_assert!((a[[row, c]] - b[[row, c]]).abs() <= 1e-12);
        }
    }

    #[test]
    fn gdwl_sound_under_permutation(g in graph_strategy(12), seed in any::<u64>()) {
        let sigma = NodePermutation::random(g.num_nodes(), seed);
        let gp = g.permute(&sigma).unwrap();
        let spd = EncodingKind::Spd;
        let v = verdict_from_codes(&g, &spd.encode(&g).unwrap(), &gp, &spd.encode(&gp).unwrap());
        prop_assert!(!v.distinguished);

        // HDSE on a hierarchy carried along by the permutation is also sound.
        let h = Hierarchy::build(&g, &HierarchyConfig::new(Algorithm::Louvain, 1).seed(seed)).unwrap();
        let encode = |h: &Hierarchy| {
            let t = &hdse(h, 30).unwrap();
            let n = t.rows();
            let codes = (0..n).flat_map(|i| (0..n).flat_map(move |j| t.pair(i, j).to_vec())).map(u32::from).collect();
            PairEncoding::new(n, t.num_levels(), codes)
        };
        let v = verdict_from_codes(&g, &encode(&h), &gp, &encode(&h.permute(&sigma).unwrap()));
        prop_assert!(!v.distinguished);
    }

    #[test]
    fn refinement_only_splits(g in graph_strategy(14)) {
        let map = gd_wl_refine(&g, &EncodingKind::Spd, 10).unwrap();
        for w in map.history.windows(2) {
            prop_assert!(w[0] <= w[1]);
        }
        for t in 1..map.colors.len() {
            let (prev, next) = (&map.colors[t - 1], &map.colors[t]);
            for u in 0..g.num_nodes() {
                for v in 0..g.num_nodes() {
                    if next[u] == next[v] {
                        prop_assert_eq!(prev[u], prev[v]);
                    }
                }
            }
        }
    }

    #[test]
    fn partition_canonical_labels(labels in proptest::collection::vec(0u8..5, 1..30)) {
        let p = Partition::from_labels(&labels);
        prop_assert_eq!(p.sizes().iter().sum::<usize>(), labels.len());
        for i in 0..labels.len() {
            for j in 0..labels.len() {
                prop_assert_eq!(labels[i] == labels[j], p.cluster_of(i) == p.cluster_of(j));
            }
        }
        prop_assert_eq!(p.cluster_of(0), 0);
    }
}
