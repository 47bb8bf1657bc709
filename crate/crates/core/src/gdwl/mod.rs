//! Generalized-distance Weisfeiler–Leman color refinement.
//!
//! Each round recolors node `v` by the multiset
//! `{ (D(v, u), χ(u)) : u ∈ V }` over *all* nodes `u`, where `D` is a pair
//! encoding: plain shortest-path distance or the hierarchical distance
//! vector. Colors for two graphs are drawn from one namespace so their
//! histograms can be compared directly.

pub mod named;

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::coarsening::{Algorithm, CoarsenError, Hierarchy, HierarchyConfig};
use crate::distance::{hdse, spd_all_pairs, DistanceCodes, DistanceError};
use crate::graph::Graph;

#[derive(Debug, Error)]
pub enum GdwlError {
    #[error("max_iter must be at least 1")]
    ZeroIterations,
    #[error(transparent)]
    Coarsen(#[from] CoarsenError),
    #[error(transparent)]
    Distance(#[from] DistanceError),
}

/// Which pair encoding drives the refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EncodingKind {
    Spd,
    Hdse { max_level: usize, algo: Algorithm, clip: usize, seed: u64, ratio: f64 },
}

impl EncodingKind {
    /// HDSE with Girvan–Newman coarsening at the modularity peak.
    pub fn hdse_newman(max_level: usize, seed: u64) -> Self {
        EncodingKind::Hdse { max_level, algo: Algorithm::Newman, clip: 30, seed, ratio: 0.5 }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            EncodingKind::Spd => EncodingKind::Spd,
            EncodingKind::Hdse { max_level, algo, clip, ratio, .. } => {
                EncodingKind::Hdse { max_level, algo, clip, seed, ratio }
            }
        }
    }

    /// Flattened `n × n × width` pair codes for `g`.
    pub fn encode(&self, g: &Graph) -> Result<PairEncoding, GdwlError> {
        let n = g.num_nodes();
        match *self {
            EncodingKind::Spd => {
                let d = spd_all_pairs(g);
                Ok(PairEncoding { n, width: 1, codes: d.as_slice().to_vec() })
            }
            EncodingKind::Hdse { max_level, algo, clip, seed, ratio } => {
                let config = HierarchyConfig::new(algo, max_level).ratio(ratio).seed(seed);
                let h = Hierarchy::build(g, &config)?;
                let t = hdse(&h, clip)?;
                let width = t.num_levels();
                let mut codes = Vec::with_capacity(n * n * width);
                for i in 0..n {
                    for j in 0..n {
                        codes.extend(t.pair(i, j).iter().map(|&c| u32::from(c)));
                    }
                }
                Ok(PairEncoding { n, width, codes })
            }
        }
    }
}

/// Pair codes for one graph, `width` values per ordered pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairEncoding {
    n: usize,
    width: usize,
    codes: Vec<u32>,
}

impl PairEncoding {
    pub fn new(n: usize, width: usize, codes: Vec<u32>) -> Self {
        assert_eq!(codes.len(), n * n * width, "pair encoding size");
        Self { n, width, codes }
    }

    fn pair(&self, v: usize, u: usize) -> &[u32] {
        let start = (v * self.n + u) * self.width;
        &self.codes[start..start + self.width]
    }
}

/// Colors per iteration for one graph. `colors[0]` is the initial coloring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColorMap {
    pub colors: Vec<Vec<u32>>,
    /// Number of distinct colors after each iteration, starting at 0.
    pub history: Vec<usize>,
}

impl ColorMap {
    pub fn final_colors(&self) -> &[u32] {
        self.colors.last().expect("at least the initial coloring")
    }

    pub fn histogram(&self) -> BTreeMap<u32, usize> {
        let mut h = BTreeMap::new();
        for &c in self.final_colors() {
            *h.entry(c).or_insert(0) += 1;
        }
        h
    }

    /// Refinement steps performed after the initial coloring.
    pub fn iterations(&self) -> usize {
        self.colors.len() - 1
    }
}

/// Outcome of refining two graphs in a shared color namespace.
#[derive(Debug, Clone, Serialize)]
pub struct Verdict {
    pub distinguished: bool,
    pub iterations: usize,
    pub histogram_g1: BTreeMap<u32, usize>,
    pub histogram_g2: BTreeMap<u32, usize>,
}

fn initial_key(g: &Graph, v: usize) -> Vec<u64> {
    match g.features() {
        Some(x) => x.row(v).iter().map(|f| f.to_bits()).collect(),
        None => Vec::new(),
    }
}

/// Assigns ids to keys in sorted key order, so ids depend only on the set
/// of keys present, not on node order.
fn canonical_ids<K: Ord + Clone>(keys: &[Vec<K>]) -> Vec<u32> {
    let mut sorted: Vec<&Vec<K>> = keys.iter().collect();
    sorted.sort();
    sorted.dedup();
    let ids: BTreeMap<&Vec<K>, u32> = sorted.into_iter().enumerate().map(|(i, k)| (k, i as u32)).collect();
    keys.iter().map(|k| ids[k]).collect()
}

/// Refines the colorings of several graphs jointly until the combined
/// partition stops splitting or `max_iter` rounds have run.
fn refine_joint(graphs: &[(&Graph, &PairEncoding)], max_iter: usize) -> Vec<ColorMap> {
    let sizes: Vec<usize> = graphs.iter().map(|(g, _)| g.num_nodes()).collect();
    let split = |flat: Vec<u32>| -> Vec<Vec<u32>> {
        let mut out = Vec::with_capacity(sizes.len());
        let mut rest = flat.as_slice();
        for &n in &sizes {
            let (head, tail) = rest.split_at(n);
            out.push(head.to_vec());
            rest = tail;
        }
        out
    };
    let distinct = |c: &[u32]| {
        let mut c = c.to_vec();
        c.sort_unstable();
        c.dedup();
        c.len()
    };

    let init_keys: Vec<Vec<u64>> = graphs.iter().flat_map(|(g, _)| (0..g.num_nodes()).map(|v| initial_key(g, v))).collect();
    let mut flat = canonical_ids(&init_keys);
    let mut per_graph: Vec<ColorMap> = split(flat.clone())
        .into_iter()
        .map(|c| ColorMap { history: vec![distinct(&c)], colors: vec![c] })
        .collect();
    let mut joint_count = distinct(&flat);

    for _ in 0..max_iter {
        let mut keys = Vec::with_capacity(flat.len());
        let mut offset = 0;
        for &(g, enc) in graphs {
            let n = g.num_nodes();
            let colors = &flat[offset..offset + n];
            for v in 0..n {
                let mut sig: Vec<(&[u32], u32)> = (0..n).map(|u| (enc.pair(v, u), colors[u])).collect();
                sig.sort_unstable();
                let mut key = Vec::with_capacity(n * (enc.width + 1));
                for (code, color) in sig {
                    key.extend_from_slice(code);
                    key.push(color);
                }
                keys.push(key);
            }
            offset += n;
        }
        let next = canonical_ids(&keys);
        let next_count = distinct(&next);
        for (map, colors) in per_graph.iter_mut().zip(split(next.clone())) {
            map.history.push(distinct(&colors));
            map.colors.push(colors);
        }
        flat = next;
        if next_count == joint_count {
            break;
        }
        joint_count = next_count;
    }
    per_graph
}

/// GD-WL refinement of a single graph.
pub fn gd_wl_refine(g: &Graph, enc: &EncodingKind, max_iter: usize) -> Result<ColorMap, GdwlError> {
    if max_iter == 0 {
        return Err(GdwlError::ZeroIterations);
    }
    let codes = enc.encode(g)?;
    Ok(refine_joint(&[(g, &codes)], max_iter).pop().unwrap())
}

/// Runs refinement on both graphs in one namespace, to stabilization.
pub fn gd_wl_pair(g1: &Graph, g2: &Graph, enc: &EncodingKind) -> Result<Verdict, GdwlError> {
    let (c1, c2) = (enc.encode(g1)?, enc.encode(g2)?);
    Ok(verdict_from_codes(g1, &c1, g2, &c2))
}

/// As [`gd_wl_pair`] with precomputed encodings.
pub fn verdict_from_codes(g1: &Graph, c1: &PairEncoding, g2: &Graph, c2: &PairEncoding) -> Verdict {
    let max_iter = g1.num_nodes().max(g2.num_nodes()) + 1;
    let maps = refine_joint(&[(g1, c1), (g2, c2)], max_iter);
    let (h1, h2) = (maps[0].histogram(), maps[1].histogram());
    Verdict {
        distinguished: g1.num_nodes() != g2.num_nodes() || h1 != h2,
        iterations: maps[0].iterations(),
        histogram_g1: h1,
        histogram_g2: h2,
    }
}

/// Whether GD-WL with `enc` tells `g1` and `g2` apart. Graphs of different
/// sizes are always distinguished.
pub fn distinguishes(g1: &Graph, g2: &Graph, enc: &EncodingKind) -> Result<bool, GdwlError> {
    if g1.num_nodes() != g2.num_nodes() {
        return Ok(true);
    }
    Ok(gd_wl_pair(g1, g2, enc)?.distinguished)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gdwl::named::{cycle, make_named_graph, path};
    use ndarray::array;

    #[test]
    fn edgeless_stays_uniform() {
        let map = gd_wl_refine(&Graph::empty(3), &EncodingKind::Spd, 5).unwrap();
        for colors in &map.colors {
            assert!(colors.iter().all(|&c| c == colors[0]));
        }
    }

    #[test]
    fn path_three_splits_center() {
        let map = gd_wl_refine(&path(3), &EncodingKind::Spd, 1).unwrap();
        let c = &map.colors[1];
        assert_eq!(c[0], c[2]);
        assert_ne!(c[0], c[1]);
        assert_eq!(map.history, vec![1, 2]);
    }

    #[test]
    fn six_cycle_vs_two_triangles() {
        let two = Graph::from_edges(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        let v = gd_wl_pair(&cycle(6), &two, &EncodingKind::Spd).unwrap();
        assert!(v.distinguished);
        assert_ne!(v.histogram_g1, v.histogram_g2);
    }

    #[test]
    fn identical_graphs_not_distinguished() {
        let g = make_named_graph("community:20:0.3:0.1:4").unwrap();
        assert!(!distinguishes(&g, &g, &EncodingKind::Spd).unwrap());
        assert!(!distinguishes(&g, &g, &EncodingKind::hdse_newman(1, 0)).unwrap());
    }

    #[test]
    fn dodecahedron_desargues_separation() {
        let a = make_named_graph("dodecahedron").unwrap();
        let b = make_named_graph("desargues").unwrap();
        assert!(!distinguishes(&a, &b, &EncodingKind::Spd).unwrap());
        assert!(distinguishes(&a, &b, &EncodingKind::hdse_newman(1, 0)).unwrap());
    }

    #[test]
    fn size_mismatch_is_distinguished() {
        assert!(distinguishes(&path(3), &path(4), &EncodingKind::Spd).unwrap());
    }

    #[test]
    fn features_seed_initial_colors() {
        let g = path(3).with_features(array![[1.0], [1.0], [2.0]]).unwrap();
        let map = gd_wl_refine(&g, &EncodingKind::Spd, 3).unwrap();
        assert_eq!(map.history[0], 2);
        let c = map.final_colors();
        assert!(c[0] != c[1] && c[1] != c[2] && c[0] != c[2]);
    }

    #[test]
    fn zero_iterations_rejected() {
        assert!(matches!(gd_wl_refine(&path(3), &EncodingKind::Spd, 0), Err(GdwlError::ZeroIterations)));
    }
}
