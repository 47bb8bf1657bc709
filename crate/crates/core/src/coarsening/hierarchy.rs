use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{
    build_coarse_graph, girvan_newman, heavy_edge_matching, louvain, Algorithm, CoarsenError, Coarsener, GnTarget,
    Partition, ProjectionMatrix,
};
use crate::graph::{Graph, JsonGraph, NodePermutation};

/// Parameters for [`Hierarchy::build`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HierarchyConfig {
    pub algo: Algorithm,
    /// Maximum level `K`; the hierarchy has `K + 1` graphs.
    pub max_level: usize,
    /// Target coarsening ratio for heavy-edge matching.
    pub ratio: f64,
    pub seed: u64,
}

impl HierarchyConfig {
    pub fn new(algo: Algorithm, max_level: usize) -> Self {
        Self { algo, max_level, ratio: 0.5, seed: 0 }
    }

    pub fn ratio(mut self, ratio: f64) -> Self {
        self.ratio = ratio;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

impl Coarsener for HierarchyConfig {
    fn name(&self) -> String {
        self.algo.name().to_string()
    }

    fn coarsen(&self, g: &Graph, level: usize) -> Result<Partition, CoarsenError> {
        let level_seed = self.seed.wrapping_add(level as u64);
        match self.algo {
            Algorithm::Louvain => Ok(louvain(g, level_seed)),
            Algorithm::Hem => heavy_edge_matching(g, self.ratio),
            // Girvan–Newman is deterministic up to edge ids; a nonzero seed
            // relabels the graph first so that ties resolve in a different order.
            Algorithm::Newman if self.seed == 0 => girvan_newman(g, GnTarget::ModularityPeak),
            Algorithm::Newman => {
                let sigma = NodePermutation::random(g.num_nodes(), level_seed);
                let p = girvan_newman(&g.permute(&sigma)?, GnTarget::ModularityPeak)?;
                let labels: Vec<usize> = (0..g.num_nodes()).map(|v| p.cluster_of(sigma.apply(v))).collect();
                Ok(Partition::from_labels(&labels))
            }
        }
    }
}

/// The sequence `G⁰ … Gᴷ` with node maps `φ₀ … φ_{K-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    levels: Vec<Graph>,
    maps: Vec<Partition>,
    projections: Vec<ProjectionMatrix>,
    ratios: Vec<f64>,
    mean_features: Vec<Option<Array2<f64>>>,
    intra_cluster_edges: Vec<usize>,
    algo: String,
    seed: u64,
}

impl Hierarchy {
    pub fn build(g: &Graph, config: &HierarchyConfig) -> Result<Self, CoarsenError> {
        if config.algo == Algorithm::Hem && !(config.ratio > 0.0 && config.ratio < 1.0) {
            return Err(CoarsenError::InvalidRatio(config.ratio));
        }
        let mut h = Self::build_with(g, config, config.max_level)?;
        h.seed = config.seed;
        Ok(h)
    }

    /// Builds `max_level` coarsening steps with any [`Coarsener`]. Once a
    /// level has a single node, later levels repeat it.
    pub fn build_with(g: &Graph, coarsener: &dyn Coarsener, max_level: usize) -> Result<Self, CoarsenError> {
        let mut maps = Vec::with_capacity(max_level);
        let mut levels = vec![g.clone()];
        for k in 0..max_level {
            let current = &levels[k];
            let p = if current.num_nodes() <= 1 {
                Partition::whole(current.num_nodes())
            } else {
                coarsener.coarsen(current, k)?
            };
            if p.num_nodes() != current.num_nodes() {
                return Err(CoarsenError::SizeMismatch { partition: p.num_nodes(), graph: current.num_nodes() });
            }
            maps.push(p);
            let next = build_coarse_graph(current, maps.last().unwrap())?;
            levels.push(next.graph);
        }
        Self::assemble(levels, maps, coarsener.name(), 0)
    }

    /// Rebuilds projections and metadata from levels and maps, checking the
    /// structural invariants.
    fn assemble(levels: Vec<Graph>, maps: Vec<Partition>, algo: String, seed: u64) -> Result<Self, CoarsenError> {
        if levels.is_empty() || levels.len() != maps.len() + 1 {
            return Err(CoarsenError::InvalidHierarchy(format!(
                "{} levels but {} maps",
                levels.len(),
                maps.len()
            )));
        }
        let mut projections = Vec::with_capacity(maps.len());
        let mut ratios = Vec::with_capacity(maps.len());
        let mut mean_features = vec![None];
        let mut intra = Vec::with_capacity(maps.len());
        for (k, p) in maps.iter().enumerate() {
            let (fine, coarse) = (&levels[k], &levels[k + 1]);
            if p.num_nodes() != fine.num_nodes() {
                return Err(CoarsenError::InvalidHierarchy(format!(
                    "map {k} covers {} nodes, level {k} has {}",
                    p.num_nodes(),
                    fine.num_nodes()
                )));
            }
            if coarse.num_nodes() != p.num_clusters() {
                return Err(CoarsenError::InvalidHierarchy(format!(
                    "level {} has {} nodes, map {k} has {} clusters",
                    k + 1,
                    coarse.num_nodes(),
                    p.num_clusters()
                )));
            }
            let expect = build_coarse_graph(&fine.clone().without_features(), p)?;
            if expect.graph.edges() != coarse.edges() {
                return Err(CoarsenError::InvalidHierarchy(format!("level {} edges do not match map {k}", k + 1)));
            }
            let proj = ProjectionMatrix::from_partition(p);
            if let Some(x) = fine.features() {
                let mut mean = proj.raw.t().dot(x);
                for (mut row, &size) in mean.axis_iter_mut(Axis(0)).zip(&proj.cluster_sizes) {
                    row /= size as f64;
                }
                mean_features.push(Some(mean));
            } else {
                mean_features.push(None);
            }
            intra.push(expect.intra_cluster_edges);
            ratios.push(if fine.num_nodes() == 0 { 1.0 } else { coarse.num_nodes() as f64 / fine.num_nodes() as f64 });
            projections.push(proj);
        }
        Ok(Self { levels, maps, projections, ratios, mean_features, intra_cluster_edges: intra, algo, seed })
    }

    /// `K`: index of the coarsest level.
    pub fn max_level(&self) -> usize {
        self.maps.len()
    }

    pub fn levels(&self) -> &[Graph] {
        &self.levels
    }

    pub fn level(&self, k: usize) -> &Graph {
        &self.levels[k]
    }

    pub fn maps(&self) -> &[Partition] {
        &self.maps
    }

    pub fn projections(&self) -> &[ProjectionMatrix] {
        &self.projections
    }

    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    /// Plain per-cluster means of the previous level's features, per level
    /// (`None` at level 0 or without features).
    pub fn mean_features(&self, k: usize) -> Option<&Array2<f64>> {
        self.mean_features[k].as_ref()
    }

    pub fn intra_cluster_edges(&self) -> &[usize] {
        &self.intra_cluster_edges
    }

    pub fn algo(&self) -> &str {
        &self.algo
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn check_level(&self, k: usize) -> Result<(), CoarsenError> {
        if k > self.max_level() {
            return Err(CoarsenError::LevelOutOfRange { level: k, max: self.max_level() });
        }
        Ok(())
    }

    /// `φ_{k-1} ∘ … ∘ φ₀` as a partition of `G⁰` into level-`k` nodes.
    pub fn image_at(&self, k: usize) -> Result<Partition, CoarsenError> {
        self.image_between(0, k)
    }

    /// Map from level-`from` nodes to level-`to` nodes (`from ≤ to`).
    pub fn image_between(&self, from: usize, to: usize) -> Result<Partition, CoarsenError> {
        self.check_level(to)?;
        if from > to {
            return Err(CoarsenError::LevelOutOfRange { level: from, max: to });
        }
        let mut p = Partition::singletons(self.levels[from].num_nodes());
        for map in &self.maps[from..to] {
            p = p.then(map);
        }
        Ok(p)
    }

    /// Product `P̂⁰ ⋯ P̂^{c-1}` of the raw one-hot projections: row `i` is
    /// one-hot at the level-`c` cluster holding base node `i`.
    pub fn composed_projection(&self, c: usize) -> Result<ProjectionMatrix, CoarsenError> {
        if c == 0 || c > self.max_level() {
            return Err(CoarsenError::LevelOutOfRange { level: c, max: self.max_level() });
        }
        let mut raw = self.projections[0].raw.clone();
        for proj in &self.projections[1..c] {
            raw = raw.dot(&proj.raw);
        }
        let sizes: Vec<usize> = raw.sum_axis(Axis(0)).iter().map(|&s| s as usize).collect();
        let mut normalized = raw.clone();
        for (mut col, &s) in normalized.axis_iter_mut(Axis(1)).zip(&sizes) {
            col /= (s as f64).sqrt();
        }
        Ok(ProjectionMatrix { raw, normalized, cluster_sizes: sizes })
    }

    /// Relabels `G⁰` by `sigma` and folds the relabeling into `φ₀`; coarser
    /// levels are untouched and no coarsening is re-run.
    pub fn permute(&self, sigma: &NodePermutation) -> Result<Self, CoarsenError> {
        let mut levels = self.levels.clone();
        levels[0] = self.levels[0].permute(sigma)?;
        let mut maps = self.maps.clone();
        if let Some(first) = maps.first_mut() {
            let inv = sigma.inverse();
            let assign: Vec<usize> = (0..sigma.len()).map(|i| first.cluster_of(inv.apply(i))).collect();
            *first = Partition::new(assign)?;
        }
        Self::assemble(levels, maps, self.algo.clone(), self.seed)
    }

    pub fn to_file(&self) -> HierarchyFile {
        HierarchyFile {
            levels: self.levels.iter().map(JsonGraph::from).collect(),
            maps: self.maps.iter().map(|p| p.assign().to_vec()).collect(),
            ratios: self.ratios.clone(),
            algo: self.algo.clone(),
            seed: self.seed,
        }
    }

    pub fn from_file(file: HierarchyFile) -> Result<Self, CoarsenError> {
        let levels = file.levels.into_iter().map(Graph::try_from).collect::<Result<Vec<_>, _>>()?;
        let maps = file.maps.into_iter().map(Partition::new).collect::<Result<Vec<_>, _>>()?;
        Self::assemble(levels, maps, file.algo, file.seed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file()).expect("hierarchy serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CoarsenError> {
        let file: HierarchyFile =
            serde_json::from_str(text).map_err(|e| CoarsenError::InvalidHierarchy(e.to_string()))?;
        Self::from_file(file)
    }
}

/// On-disk hierarchy layout.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HierarchyFile {
    pub levels: Vec<JsonGraph>,
    pub maps: Vec<Vec<usize>>,
    pub ratios: Vec<f64>,
    pub algo: String,
    pub seed: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gdwl::named::{make_named_graph, path};
    use ndarray::array;

    fn two_cliques() -> Graph {
        let mut edges = Vec::new();
        for base in [0, 4] {
            for u in 0..4 {
                for v in u + 1..4 {
                    edges.push((base + u, base + v));
                }
            }
        }
        edges.push((3, 4));
        Graph::from_edges(8, &edges).unwrap()
    }

    #[test]
    fn k_zero_has_only_base() {
        let g = path(5);
        let h = Hierarchy::build(&g, &HierarchyConfig::new(Algorithm::Louvain, 0)).unwrap();
        assert_eq!(h.levels().len(), 1);
        assert!(h.maps().is_empty());
        assert_eq!(h.level(0), &g);
    }

    #[test]
    fn two_cliques_louvain_one_level() {
        let h = Hierarchy::build(&two_cliques(), &HierarchyConfig::new(Algorithm::Louvain, 1)).unwrap();
        assert_eq!(h.levels().len(), 2);
        assert_eq!(h.level(1).num_nodes(), 2);
        assert_eq!(h.level(1).num_edges(), 1);
        assert_eq!(h.ratios(), &[0.25]);
        assert_eq!(h.intra_cluster_edges(), &[12]);
    }

    #[test]
    fn collapse_repeats_trivial_level() {
        let h = Hierarchy::build(&path(2), &HierarchyConfig::new(Algorithm::Hem, 2).ratio(0.5)).unwrap();
        assert_eq!(h.levels().len(), 3);
        assert_eq!(h.level(1).num_nodes(), 1);
        assert_eq!(h.level(2).num_nodes(), 1);
        assert_eq!(h.maps()[1], Partition::whole(1));
    }

    #[test]
    fn composed_projection_matches_assignments() {
        let g = make_named_graph("cycle:16").unwrap();
        let h = Hierarchy::build(&g, &HierarchyConfig::new(Algorithm::Hem, 3).ratio(0.5)).unwrap();
        assert_eq!(h.composed_projection(1).unwrap().raw, h.projections()[0].raw);
        for c in 1..=3 {
            let proj = h.composed_projection(c).unwrap();
            for i in 0..16 {
                let target = h.maps()[..c].iter().fold(i, |v, p| p.cluster_of(v));
                for j in 0..proj.raw.ncols() {
                    assert_eq!(proj.raw[[i, j]], f64::from(u8::from(j == target)));
                }
            }
        }
        assert!(h.composed_projection(0).is_err());
        assert!(h.composed_projection(4).is_err());
    }

    #[test]
    fn composed_projection_over_trivial_level() {
        let h = Hierarchy::build(&path(2), &HierarchyConfig::new(Algorithm::Hem, 2).ratio(0.5)).unwrap();
        let proj = h.composed_projection(2).unwrap();
        assert_eq!(proj.raw, array![[1.0], [1.0]]);
    }

    #[test]
    fn features_follow_normalized_projection() {
        let g = two_cliques().with_features(Array2::from_shape_fn((8, 2), |(i, j)| (i * 2 + j) as f64)).unwrap();
        let h = Hierarchy::build(&g, &HierarchyConfig::new(Algorithm::Louvain, 1)).unwrap();
        let want = h.projections()[0].normalized.t().dot(g.features().unwrap());
        assert_eq!(h.level(1).features().unwrap(), &want);
        let mean = h.mean_features(1).unwrap();
        assert_eq!(mean.row(0).to_vec(), vec![3.0, 4.0]);
        assert_eq!(mean.row(1).to_vec(), vec![11.0, 12.0]);
    }

    #[test]
    fn json_round_trip() {
        let g = make_named_graph("community:24:0.4:0.05:2").unwrap();
        let h = Hierarchy::build(&g, &HierarchyConfig::new(Algorithm::Louvain, 2).seed(9)).unwrap();
        let back = Hierarchy::from_json(&h.to_json()).unwrap();
        assert_eq!(back, h);
        assert_eq!(back.seed(), 9);
    }

    #[test]
    fn corrupted_file_rejected() {
        let h = Hierarchy::build(&two_cliques(), &HierarchyConfig::new(Algorithm::Louvain, 1)).unwrap();
        let mut file = h.to_file();
        file.levels[1].edges.clear();
        assert!(matches!(Hierarchy::from_file(file), Err(CoarsenError::InvalidHierarchy(_))));
        let mut file = h.to_file();
        file.maps[0][0] = 5;
        assert!(Hierarchy::from_file(file).is_err());
    }

    #[test]
    fn permute_keeps_coarse_levels() {
        let g = two_cliques();
        let h = Hierarchy::build(&g, &HierarchyConfig::new(Algorithm::Louvain, 1)).unwrap();
        let sigma = NodePermutation::random(8, 1);
        let hp = h.permute(&sigma).unwrap();
        assert_eq!(hp.level(1), h.level(1));
        for i in 0..8 {
            assert_eq!(hp.maps()[0].cluster_of(sigma.apply(i)), h.maps()[0].cluster_of(i));
        }
    }

    #[test]
    fn newman_seed_changes_only_tie_order() {
        let g = make_named_graph("dodecahedron").unwrap();
        for seed in 0..3 {
            let h = Hierarchy::build(&g, &HierarchyConfig::new(Algorithm::Newman, 1).seed(seed)).unwrap();
            assert_eq!(h.level(1).num_nodes(), 4, "seed {seed}");
        }
    }
}
