use std::collections::HashMap;

use ndarray::{s, Array1, Array2, Array3, ArrayViewD, ArrayViewMutD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{AttentionError, ParamSet};
use crate::distance::DistanceCodes;

/// Learnable distance embeddings and the one-hidden-layer MLP that turns
/// their concatenation into one bias per head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasParams {
    pub clip: u8,
    /// One table per hierarchy level, each `(clip + 2) × embed_dim`. Row
    /// `clip + 1` embeds the unreachable code.
    pub embeddings: Vec<Array2<f64>>,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

fn uniform(rng: &mut ChaCha8Rng, shape: (usize, usize), fan_in: usize) -> Array2<f64> {
    let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
    Array2::from_shape_simple_fn(shape, || rng.random_range(-bound..=bound))
}

impl BiasParams {
    /// Seeded uniform(±1/√fan_in) initialization; embeddings have fan-in 1.
    pub fn init(levels: usize, clip: u8, embed_dim: usize, hidden: usize, heads: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows = usize::from(clip) + 2;
        let embeddings = (0..levels).map(|_| uniform(&mut rng, (rows, embed_dim), 1)).collect();
        let width = levels * embed_dim;
        let w1 = uniform(&mut rng, (width, hidden), width);
        let b1 = uniform(&mut rng, (1, hidden), width).remove_axis(ndarray::Axis(0));
        let w2 = uniform(&mut rng, (hidden, heads), hidden);
        let b2 = uniform(&mut rng, (1, heads), hidden).remove_axis(ndarray::Axis(0));
        Self { clip, embeddings, w1, b1, w2, b2 }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            clip: self.clip,
            embeddings: self.embeddings.iter().map(|e| Array2::zeros(e.raw_dim())).collect(),
            w1: Array2::zeros(self.w1.raw_dim()),
            b1: Array1::zeros(self.b1.raw_dim()),
            w2: Array2::zeros(self.w2.raw_dim()),
            b2: Array1::zeros(self.b2.raw_dim()),
        }
    }

    pub fn levels(&self) -> usize {
        self.embeddings.len()
    }

    pub fn embed_dim(&self) -> usize {
        self.embeddings.first().map_or(0, |e| e.ncols())
    }

    pub fn hidden(&self) -> usize {
        self.w1.ncols()
    }

    pub fn heads(&self) -> usize {
        self.w2.ncols()
    }

    pub fn validate(&self) -> Result<(), AttentionError> {
        let rows = usize::from(self.clip) + 2;
        let d_e = self.embed_dim();
        if self.embeddings.is_empty() || self.embeddings.iter().any(|e| e.dim() != (rows, d_e)) {
            return Err(AttentionError::Shape(format!("every embedding table must be {rows}x{d_e}")));
        }
        if self.w1.nrows() != self.levels() * d_e
            || self.b1.len() != self.hidden()
            || self.w2.nrows() != self.hidden()
            || self.b2.len() != self.heads()
        {
            return Err(AttentionError::Shape("bias MLP weights are not congruent".into()));
        }
        Ok(())
    }

    /// Concatenated embeddings for one code vector.
    fn embed(&self, codes: &[u8]) -> Array1<f64> {
        let d_e = self.embed_dim();
        let mut z = Array1::zeros(self.levels() * d_e);
        for (k, &c) in codes.iter().enumerate() {
            z.slice_mut(s![k * d_e..(k + 1) * d_e]).assign(&self.embeddings[k].row(usize::from(c)));
        }
        z
    }
}

impl ParamSet for BiasParams {
    fn tensors(&self) -> Vec<ArrayViewD<'_, f64>> {
        let mut out: Vec<_> = self.embeddings.iter().map(|e| e.view().into_dyn()).collect();
        out.extend([self.w1.view().into_dyn(), self.b1.view().into_dyn(), self.w2.view().into_dyn(), self.b2.view().into_dyn()]);
        out
    }

    fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        let mut out: Vec<_> = self.embeddings.iter_mut().map(|e| e.view_mut().into_dyn()).collect();
        out.extend([
            self.w1.view_mut().into_dyn(),
            self.b1.view_mut().into_dyn(),
            self.w2.view_mut().into_dyn(),
            self.b2.view_mut().into_dyn(),
        ]);
        out
    }

    fn tensor_names(&self) -> Vec<String> {
        let mut out: Vec<String> = (0..self.levels()).map(|k| format!("bias.embedding[{k}]")).collect();
        out.extend(["bias.w1", "bias.b1", "bias.w2", "bias.b2"].map(String::from));
        out
    }
}

/// Output of [`bias_matrix`]: the `rows × cols × heads` bias plus what the
/// backward pass needs. The MLP runs once per distinct code vector.
#[derive(Debug, Clone)]
pub struct BiasMatrix {
    pub h: Array3<f64>,
    /// Distinct code vectors, in first-seen order.
    keys: Vec<Vec<u8>>,
    /// For every `(i, j)` in row-major order, its index into `keys`.
    pair_key: Vec<usize>,
    /// Hidden pre-activations per key.
    pre: Array2<f64>,
}

/// `H[i, j, :] = W₂ᵀ relu(W₁ᵀ z + b₁) + b₂` with `z` the concatenated level
/// embeddings of `D(i, j)`.
pub fn bias_matrix<D: DistanceCodes + ?Sized>(codes: &D, p: &BiasParams) -> Result<BiasMatrix, AttentionError> {
    p.validate()?;
    if codes.clip() != p.clip {
        return Err(AttentionError::Shape(format!("tensor clip {} but bias tables sized for {}", codes.clip(), p.clip)));
    }
    if codes.num_levels() != p.levels() {
        return Err(AttentionError::Shape(format!(
            "tensor has {} levels but bias has {} embedding tables",
            codes.num_levels(),
            p.levels()
        )));
    }
    let (rows, cols) = (codes.rows(), codes.cols());
    let max = p.clip + 1;
    let mut index: HashMap<&[u8], usize> = HashMap::new();
    let mut keys: Vec<Vec<u8>> = Vec::new();
    let mut pair_key = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            let pair = codes.pair(i, j);
            if let Some(k) = pair.iter().position(|&c| c > max) {
                return Err(AttentionError::CodeOutOfRange { code: pair[k], max, i, j, k });
            }
            let next = keys.len();
            let id = *index.entry(pair).or_insert_with(|| {
                keys.push(pair.to_vec());
                next
            });
            pair_key.push(id);
        }
    }

    let mut pre = Array2::zeros((keys.len(), p.hidden()));
    let mut out = Array2::zeros((keys.len(), p.heads()));
    for (u, key) in keys.iter().enumerate() {
        let a = p.embed(key).dot(&p.w1) + &p.b1;
        let r = a.mapv(|x| x.max(0.0));
        out.row_mut(u).assign(&(r.dot(&p.w2) + &p.b2));
        pre.row_mut(u).assign(&a);
    }
    let mut h = Array3::zeros((rows, cols, p.heads()));
    for i in 0..rows {
        for j in 0..cols {
            h.slice_mut(s![i, j, ..]).assign(&out.row(pair_key[i * cols + j]));
        }
    }
    Ok(BiasMatrix { h, keys, pair_key, pre })
}

impl BiasMatrix {
    /// Accumulates parameter gradients given `dL/dH`.
    pub fn backward(&self, p: &BiasParams, d_h: &Array3<f64>) -> Result<BiasParams, AttentionError> {
        if d_h.dim() != self.h.dim() {
            return Err(AttentionError::Shape(format!("bias gradient {:?} vs bias {:?}", d_h.dim(), self.h.dim())));
        }
        let (rows, cols, heads) = self.h.dim();
        // dH summed per distinct key; the MLP backward is linear in it
        let mut per_key = Array2::<f64>::zeros((self.keys.len(), heads));
        for i in 0..rows {
            for j in 0..cols {
                let mut acc = per_key.row_mut(self.pair_key[i * cols + j]);
                acc += &d_h.slice(s![i, j, ..]);
            }
        }
        let mut grad = p.zeros_like();
        let d_e = p.embed_dim();
        for (u, key) in self.keys.iter().enumerate() {
            let g_out = per_key.row(u);
            let a = self.pre.row(u);
            let r = a.mapv(|x| x.max(0.0));
            let z = p.embed(key);
            grad.w2 += &outer(&r, &g_out);
            grad.b2 += &g_out;
            let d_r = p.w2.dot(&g_out);
            let d_a = &d_r * &a.mapv(|x| if x > 0.0 { 1.0 } else { 0.0 });
            grad.w1 += &outer(&z, &d_a);
            grad.b1 += &d_a;
            let d_z = p.w1.dot(&d_a);
            for (k, &c) in key.iter().enumerate() {
                let mut row = grad.embeddings[k].row_mut(usize::from(c));
                row += &d_z.slice(s![k * d_e..(k + 1) * d_e]);
            }
        }
        Ok(grad)
    }
}

fn outer(a: &ndarray::ArrayBase<impl ndarray::Data<Elem = f64>, ndarray::Ix1>, b: &ndarray::ArrayBase<impl ndarray::Data<Elem = f64>, ndarray::Ix1>) -> Array2<f64> {
    let a2 = a.view().insert_axis(ndarray::Axis(1));
    let b2 = b.view().insert_axis(ndarray::Axis(0));
    a2.dot(&b2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distance::CodeTensor;
    use ndarray::array;

    fn tensor(rows: usize, cols: usize, levels: usize, clip: u8, data: Vec<u8>) -> CodeTensor {
        CodeTensor::from_raw(rows, cols, levels, clip, data).unwrap()
    }

    #[test]
    fn zero_output_weights_give_zero_bias() {
        let mut p = BiasParams::init(2, 3, 4, 4, 2, 1);
        p.w2.fill(0.0);
        p.b2.fill(0.0);
        let t = tensor(2, 2, 2, 3, vec![0, 0, 1, 2, 1, 2, 0, 4]);
        let b = bias_matrix(&t, &p).unwrap();
        assert!(b.h.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn equal_rows_give_equal_bias_rows() {
        let p = BiasParams::init(1, 5, 3, 3, 2, 4);
        let t = tensor(3, 3, 1, 5, vec![0, 1, 2, 0, 1, 2, 2, 1, 0]);
        let b = bias_matrix(&t, &p).unwrap();
        assert_eq!(b.h.slice(s![0, .., ..]), b.h.slice(s![1, .., ..]));
    }

    #[test]
    fn scalar_trace_by_hand() {
        // d_e = 1, d_h = 1, one level, one head
        let p = BiasParams {
            clip: 2,
            embeddings: vec![array![[0.5], [-1.5], [2.0], [7.0]]],
            w1: array![[3.0]],
            b1: array![-1.0],
            w2: array![[0.25]],
            b2: array![0.1],
        };
        let t = tensor(1, 2, 1, 2, vec![2, 1]);
        let b = bias_matrix(&t, &p).unwrap();
        // code 2: e = 2.0, hidden = relu(3*2 - 1) = 5, H = 0.25*5 + 0.1
        assert_eq!(b.h[[0, 0, 0]], 1.35);
        // code 1: e = -1.5, hidden = relu(-5.5) = 0, H = b2
        assert_eq!(b.h[[0, 1, 0]], 0.1);
    }

    struct RawCodes(Vec<u8>);

    impl DistanceCodes for RawCodes {
        fn rows(&self) -> usize {
            1
        }
        fn cols(&self) -> usize {
            self.0.len()
        }
        fn num_levels(&self) -> usize {
            1
        }
        fn clip(&self) -> u8 {
            2
        }
        fn pair(&self, _i: usize, j: usize) -> &[u8] {
            &self.0[j..j + 1]
        }
    }

    #[test]
    fn code_out_of_range() {
        let p = BiasParams::init(1, 2, 2, 2, 1, 0);
        assert!(bias_matrix(&RawCodes(vec![0, 3]), &p).is_ok());
        let err = bias_matrix(&RawCodes(vec![0, 4]), &p).unwrap_err();
        assert_eq!(err, AttentionError::CodeOutOfRange { code: 4, max: 3, i: 0, j: 1, k: 0 });
    }

    #[test]
    fn clip_mismatch() {
        let p = BiasParams::init(1, 2, 2, 2, 1, 0);
        let t = tensor(1, 1, 1, 3, vec![4]);
        assert!(matches!(bias_matrix(&t, &p), Err(AttentionError::Shape(_))));
    }

    #[test]
    fn level_mismatch() {
        let p = BiasParams::init(2, 3, 2, 2, 1, 0);
        let t = tensor(1, 1, 1, 3, vec![0]);
        assert!(matches!(bias_matrix(&t, &p), Err(AttentionError::Shape(_))));
    }

    #[test]
    fn unreachable_row_is_used() {
        let mut p = BiasParams::init(1, 2, 1, 1, 1, 0);
        p.embeddings[0] = array![[0.0], [0.0], [0.0], [1.0]];
        p.w1 = array![[1.0]];
        p.b1 = array![0.0];
        p.w2 = array![[1.0]];
        p.b2 = array![0.0];
        let t = tensor(1, 2, 1, 2, vec![2, 3]);
        let b = bias_matrix(&t, &p).unwrap();
        assert_eq!(b.h[[0, 0, 0]], 0.0);
        assert_eq!(b.h[[0, 1, 0]], 1.0);
    }
}
