//! Shortest-path and hierarchy distances, and the clipped tensors built from
//! them.
//!
//! Integer encoding used by [`HdseTensor`] and [`HighLevelHdseTensor`]:
//! a finite distance `d` is stored as `min(d, L)`, and an unreachable pair
//! as `L + 1`. Keeping the unreachable code apart from the clip value means
//! "far" and "disconnected" stay distinguishable downstream.

use std::collections::VecDeque;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::coarsening::{CoarsenError, Hierarchy};
use crate::graph::Graph;

/// Sentinel for unreachable pairs in a [`DistanceMatrix`].
pub const UNREACHABLE: u32 = u32::MAX;

/// Largest clip length representable with an 8-bit code plus the
/// unreachable code.
pub const MAX_CLIP: u8 = 254;

const MAGIC: &[u8; 4] = b"HDSE";
const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Error)]
pub enum DistanceError {
    #[error("clip length must be in 1..={MAX_CLIP}, got {0}")]
    InvalidClip(usize),
    #[error("base level {level} out of range for hierarchy with max level {max}")]
    BaseLevelOutOfRange { level: usize, max: usize },
    #[error(transparent)]
    Coarsen(#[from] CoarsenError),
    #[error("malformed tensor file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Square matrix of hop counts over one level of a hierarchy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceMatrix {
    n: usize,
    values: Vec<u32>,
    level: usize,
}

impl DistanceMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Raw entry, [`UNREACHABLE`] for disconnected pairs.
    pub fn raw(&self, i: usize, j: usize) -> u32 {
        self.values[i * self.n + j]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<u32> {
        Some(self.raw(i, j)).filter(|&d| d != UNREACHABLE)
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.values
    }
}

fn bfs_row(g: &Graph, source: usize, row: &mut [u32]) {
    row.fill(UNREACHABLE);
    row[source] = 0;
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let next = row[u] + 1;
        for &v in g.neighbors(u) {
            if row[v] == UNREACHABLE {
                row[v] = next;
                queue.push_back(v);
            }
        }
    }
}

/// All-pairs hop distances by one BFS per source. Sources run in parallel;
/// each writes only its own row.
pub fn spd_all_pairs(g: &Graph) -> DistanceMatrix {
    let n = g.num_nodes();
    let mut values = vec![UNREACHABLE; n * n];
    if n > 0 {
        values.par_chunks_mut(n).enumerate().for_each(|(s, row)| bfs_row(g, s, row));
    }
    DistanceMatrix { n, values, level: 0 }
}

/// `GHDᵏ` over base nodes: the level-`k` shortest-path distance between the
/// level-`k` images of two nodes of `G⁰`.
pub fn ghd(h: &Hierarchy, k: usize) -> Result<DistanceMatrix, DistanceError> {
    let image = h.image_at(k)?;
    let coarse = spd_all_pairs(h.level(k));
    Ok(lift(&coarse, image.assign(), image.assign(), k))
}

/// Pulls a level distance matrix back along row and column maps.
fn lift(coarse: &DistanceMatrix, rows: &[usize], cols: &[usize], level: usize) -> DistanceMatrix {
    assert_eq!(rows.len(), cols.len(), "square lift");
    let n = rows.len();
    let mut values = Vec::with_capacity(n * n);
    for &a in rows {
        for &b in cols {
            values.push(coarse.raw(a, b));
        }
    }
    DistanceMatrix { n, values, level }
}

fn encode(d: u32, clip: u8) -> u8 {
    if d == UNREACHABLE {
        clip + 1
    } else {
        d.min(u32::from(clip)) as u8
    }
}

fn check_clip(clip: usize) -> Result<u8, DistanceError> {
    if clip == 0 || clip > usize::from(MAX_CLIP) {
        return Err(DistanceError::InvalidClip(clip));
    }
    Ok(clip as u8)
}

/// Read access shared by the two tensor layouts, used by the attention bias
/// and GD-WL refinement.
pub trait DistanceCodes {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn num_levels(&self) -> usize;
    fn clip(&self) -> u8;
    /// Codes for pair `(i, j)` across all levels.
    fn pair(&self, i: usize, j: usize) -> &[u8];

    fn unreachable_code(&self) -> u8 {
        self.clip() + 1
    }
}

/// Dense `rows × cols × levels` tensor of clipped distance codes, row-major
/// in `(i, j, k)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CodeTensor {
    rows: usize,
    cols: usize,
    levels: usize,
    clip: u8,
    data: Vec<u8>,
}

impl CodeTensor {
    pub fn get(&self, i: usize, j: usize, k: usize) -> u8 {
        self.data[(i * self.cols + j) * self.levels + k]
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.levels)
    }

    /// Builds a tensor from raw codes, checking every code is at most
    /// `clip + 1`.
    pub fn from_raw(rows: usize, cols: usize, levels: usize, clip: u8, data: Vec<u8>) -> Result<Self, DistanceError> {
        check_clip(usize::from(clip))?;
        if data.len() != rows * cols * levels {
            return Err(DistanceError::Format(format!(
                "payload has {} entries, expected {rows}x{cols}x{levels}",
                data.len()
            )));
        }
        if let Some(bad) = data.iter().find(|&&c| c > clip + 1) {
            return Err(DistanceError::Format(format!("code {bad} exceeds unreachable code {}", clip + 1)));
        }
        Ok(Self { rows, cols, levels, clip, data })
    }

    fn from_slices(rows: usize, cols: usize, clip: u8, slices: &[Vec<u32>]) -> Self {
        let levels = slices.len();
        let mut data = vec![0u8; rows * cols * levels];
        for (k, slice) in slices.iter().enumerate() {
            for (cell, &d) in slice.iter().enumerate() {
                data[cell * levels + k] = encode(d, clip);
            }
        }
        Self { rows, cols, levels, clip, data }
    }

    /// Binary layout: magic `HDSE`, u16 version, u32 rows, u32 cols, u8
    /// levels, u8 clip (all little-endian), then the row-major payload.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<(), DistanceError> {
        let levels = u8::try_from(self.levels)
            .map_err(|_| DistanceError::Format(format!("{} levels exceed header capacity", self.levels)))?;
        let to_u32 = |x: usize| {
            u32::try_from(x).map_err(|_| DistanceError::Format(format!("dimension {x} exceeds header capacity")))
        };
        let mut header = Vec::with_capacity(HEADER_LEN);
        header.extend_from_slice(MAGIC);
        header.extend_from_slice(&VERSION.to_le_bytes());
        header.extend_from_slice(&to_u32(self.rows)?.to_le_bytes());
        header.extend_from_slice(&to_u32(self.cols)?.to_le_bytes());
        header.push(levels);
        header.push(self.clip);
        w.write_all(&header)?;
        w.write_all(&self.data)?;
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, DistanceError> {
        let mut header = [0u8; HEADER_LEN];
        r.read_exact(&mut header)?;
        if &header[0..4] != MAGIC {
            return Err(DistanceError::Format("bad magic".into()));
        }
        let version = u16::from_le_bytes([header[4], header[5]]);
        if version != VERSION {
            return Err(DistanceError::Format(format!("unsupported version {version}")));
        }
        let rows = u32::from_le_bytes(header[6..10].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(header[10..14].try_into().unwrap()) as usize;
        let levels = usize::from(header[14]);
        let clip = header[15];
        let mut data = Vec::new();
        r.read_to_end(&mut data)?;
        Self::from_raw(rows, cols, levels, clip, data)
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.data.len());
        self.write_binary(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    /// Nested `[i][j][k]` JSON for inspection.
    pub fn to_debug_json(&self) -> String {
        let nested: Vec<Vec<&[u8]>> =
            (0..self.rows).map(|i| (0..self.cols).map(|j| self.pair(i, j)).collect()).collect();
        serde_json::json!({
            "rows": self.rows,
            "cols": self.cols,
            "levels": self.levels,
            "clip": self.clip,
            "unreachable": self.clip + 1,
            "entries": nested,
        })
        .to_string()
    }
}

impl DistanceCodes for CodeTensor {
    fn rows(&self) -> usize {
        self.rows
    }
    fn cols(&self) -> usize {
        self.cols
    }
    fn num_levels(&self) -> usize {
        self.levels
    }
    fn clip(&self) -> u8 {
        self.clip
    }
    fn pair(&self, i: usize, j: usize) -> &[u8] {
        let start = (i * self.cols + j) * self.levels;
        &self.data[start..start + self.levels]
    }
}

/// `D_{i,j} = [GHD⁰, …, GHDᴷ]_{i,j}` for every pair of base nodes, clipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HdseTensor(pub CodeTensor);

/// Distances from base nodes to level-`c` clusters across levels `c..=K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HighLevelHdseTensor {
    pub codes: CodeTensor,
    pub base_level: usize,
}

impl HdseTensor {
    pub fn max_level(&self) -> usize {
        self.0.levels - 1
    }
}

impl std::ops::Deref for HdseTensor {
    type Target = CodeTensor;
    fn deref(&self) -> &CodeTensor {
        &self.0
    }
}

impl std::ops::Deref for HighLevelHdseTensor {
    type Target = CodeTensor;
    fn deref(&self) -> &CodeTensor {
        &self.codes
    }
}

impl DistanceCodes for HdseTensor {
    fn rows(&self) -> usize {
        self.0.rows
    }
    fn cols(&self) -> usize {
        self.0.cols
    }
    fn num_levels(&self) -> usize {
        self.0.levels
    }
    fn clip(&self) -> u8 {
        self.0.clip
    }
    fn pair(&self, i: usize, j: usize) -> &[u8] {
        self.0.pair(i, j)
    }
}

impl DistanceCodes for HighLevelHdseTensor {
    fn rows(&self) -> usize {
        self.codes.rows
    }
    fn cols(&self) -> usize {
        self.codes.cols
    }
    fn num_levels(&self) -> usize {
        self.codes.levels
    }
    fn clip(&self) -> u8 {
        self.codes.clip
    }
    fn pair(&self, i: usize, j: usize) -> &[u8] {
        self.codes.pair(i, j)
    }
}

/// Stacks `clip(GHD⁰) … clip(GHDᴷ)` into one tensor.
pub fn hdse(h: &Hierarchy, clip: usize) -> Result<HdseTensor, DistanceError> {
    let clip = check_clip(clip)?;
    let n = h.level(0).num_nodes();
    let slices = (0..=h.max_level()).map(|k| ghd(h, k).map(|d| d.values)).collect::<Result<Vec<_>, _>>()?;
    Ok(HdseTensor(CodeTensor::from_slices(n, n, clip, &slices)))
}

/// High-level tensor `D^c`: entry `(i, j, m)` is the level-`(c+m)` distance
/// between the image of base node `i` and the image of level-`c` cluster
/// `j`. With `c = 0` this is the full [`hdse`] tensor.
pub fn high_level_hdse(h: &Hierarchy, base_level: usize, clip: usize) -> Result<HighLevelHdseTensor, DistanceError> {
    let clip = check_clip(clip)?;
    if base_level > h.max_level() {
        return Err(DistanceError::BaseLevelOutOfRange { level: base_level, max: h.max_level() });
    }
    let n = h.level(0).num_nodes();
    let m = h.level(base_level).num_nodes();
    let mut slices = Vec::with_capacity(h.max_level() + 1 - base_level);
    for level in base_level..=h.max_level() {
        let coarse = spd_all_pairs(h.level(level));
        let node_image = h.image_at(level)?;
        let cluster_image = h.image_between(base_level, level)?;
        let mut values = Vec::with_capacity(n * m);
        for i in 0..n {
            let a = node_image.cluster_of(i);
            for j in 0..m {
                values.push(coarse.raw(a, cluster_image.cluster_of(j)));
            }
        }
        slices.push(values);
    }
    Ok(HighLevelHdseTensor { codes: CodeTensor::from_slices(n, m, clip, &slices), base_level })
}
