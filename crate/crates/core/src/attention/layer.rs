use ndarray::{s, Array2, Array3, ArrayViewD, ArrayViewMutD, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bias::{bias_matrix, BiasMatrix, BiasParams};
use super::{check_finite, AttentionError, ParamSet};
use crate::distance::DistanceCodes;

/// Per-head query, key and value projections, each `model_dim × head_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub w_q: Vec<Array2<f64>>,
    pub w_k: Vec<Array2<f64>>,
    pub w_v: Vec<Array2<f64>>,
}

impl AttentionParams {
    pub fn init(model_dim: usize, head_dim: usize, heads: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bound = 1.0 / (model_dim.max(1) as f64).sqrt();
        let mut draw = || -> Vec<Array2<f64>> {
            (0..heads)
                .map(|_| Array2::from_shape_simple_fn((model_dim, head_dim), || rng.random_range(-bound..=bound)))
                .collect()
        };
        let w_q = draw();
        let w_k = draw();
        let w_v = draw();
        Self { w_q, w_k, w_v }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |ws: &[Array2<f64>]| ws.iter().map(|w| Array2::zeros(w.raw_dim())).collect();
        Self { w_q: z(&self.w_q), w_k: z(&self.w_k), w_v: z(&self.w_v) }
    }

    pub fn heads(&self) -> usize {
        self.w_q.len()
    }

    pub fn model_dim(&self) -> usize {
        self.w_q.first().map_or(0, |w| w.nrows())
    }

    pub fn head_dim(&self) -> usize {
        self.w_q.first().map_or(0, |w| w.ncols())
    }

    pub fn output_dim(&self) -> usize {
        self.heads() * self.head_dim()
    }

    pub fn validate(&self) -> Result<(), AttentionError> {
        let shape = (self.model_dim(), self.head_dim());
        if self.heads() == 0 || shape.1 == 0 {
            return Err(AttentionError::Shape("need at least one head of width >= 1".into()));
        }
        if self.w_k.len() != self.heads() || self.w_v.len() != self.heads() {
            return Err(AttentionError::Shape("W_Q, W_K, W_V head counts differ".into()));
        }
        if self.w_q.iter().chain(&self.w_k).chain(&self.w_v).any(|w| w.dim() != shape) {
            return Err(AttentionError::Shape(format!("every projection must be {}x{}", shape.0, shape.1)));
        }
        for w in self.w_q.iter().chain(&self.w_k).chain(&self.w_v) {
            check_finite(w.iter(), "attention weights")?;
        }
        Ok(())
    }
}

impl ParamSet for AttentionParams {
    fn tensors(&self) -> Vec<ArrayViewD<'_, f64>> {
        self.w_q.iter().chain(&self.w_k).chain(&self.w_v).map(|w| w.view().into_dyn()).collect()
    }

    fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        self.w_q.iter_mut().chain(&mut self.w_k).chain(&mut self.w_v).map(|w| w.view_mut().into_dyn()).collect()
    }

    fn tensor_names(&self) -> Vec<String> {
        ["w_q", "w_k", "w_v"]
            .iter()
            .flat_map(|name| (0..self.heads()).map(move |h| format!("attention.{name}[{h}]")))
            .collect()
    }
}

/// Intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct AttentionCache {
    x: Array2<f64>,
    keys: Array2<f64>,
    q: Vec<Array2<f64>>,
    k: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    probs: Vec<Array2<f64>>,
}

impl AttentionCache {
    /// Row-stochastic attention weights of head `h`.
    pub fn probs(&self, h: usize) -> &Array2<f64> {
        &self.probs[h]
    }
}

fn softmax_rows(mut s: Array2<f64>) -> Array2<f64> {
    for mut row in s.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        row.mapv_inplace(|x| (x - max).exp());
        let sum = row.sum();
        row /= sum;
    }
    s
}

/// `softmax(x W_Q (keys W_K)ᵀ / √d′ + H_h) keys W_V` per head, heads
/// concatenated along columns. `keys` is `x` itself for dense attention or
/// the cluster features of a coarser level.
pub fn attention_forward(
    x: &Array2<f64>,
    keys: &Array2<f64>,
    p: &AttentionParams,
    bias: Option<&Array3<f64>>,
) -> Result<(Array2<f64>, AttentionCache), AttentionError> {
    p.validate()?;
    check_finite(x.iter(), "query features")?;
    check_finite(keys.iter(), "key features")?;
    let (n, m, d) = (x.nrows(), keys.nrows(), p.model_dim());
    if x.ncols() != d || keys.ncols() != d {
        return Err(AttentionError::Shape(format!(
            "features have widths {} and {}, projections expect {d}",
            x.ncols(),
            keys.ncols()
        )));
    }
    if let Some(h) = bias {
        if h.dim() != (n, m, p.heads()) {
            return Err(AttentionError::Shape(format!("bias is {:?}, expected {:?}", h.dim(), (n, m, p.heads()))));
        }
        check_finite(h.iter(), "bias")?;
    }
    let scale = 1.0 / (p.head_dim() as f64).sqrt();
    let dh = p.head_dim();
    let mut out = Array2::zeros((n, p.output_dim()));
    let mut cache = AttentionCache {
        x: x.clone(),
        keys: keys.clone(),
        q: Vec::with_capacity(p.heads()),
        k: Vec::with_capacity(p.heads()),
        v: Vec::with_capacity(p.heads()),
        probs: Vec::with_capacity(p.heads()),
    };
    for h in 0..p.heads() {
        let q = x.dot(&p.w_q[h]);
        let k = keys.dot(&p.w_k[h]);
        let v = keys.dot(&p.w_v[h]);
        let mut logits = q.dot(&k.t()) * scale;
        if let Some(b) = bias {
            logits += &b.slice(s![.., .., h]);
        }
        let probs = softmax_rows(logits);
        out.slice_mut(s![.., h * dh..(h + 1) * dh]).assign(&probs.dot(&v));
        cache.q.push(q);
        cache.k.push(k);
        cache.v.push(v);
        cache.probs.push(probs);
    }
    Ok((out, cache))
}

/// Dense biased attention over the nodes of one graph.
pub fn hdse_attention_forward(
    x: &Array2<f64>,
    p: &AttentionParams,
    bias: &Array3<f64>,
) -> Result<Array2<f64>, AttentionError> {
    attention_forward(x, x, p, Some(bias)).map(|(out, _)| out)
}

/// Linear attention from base nodes to the clusters of a coarser level,
/// biased by the high-level distance tensor's bias.
pub fn linear_attention_forward(
    x: &Array2<f64>,
    cluster_features: &Array2<f64>,
    p: &AttentionParams,
    bias: &Array3<f64>,
) -> Result<Array2<f64>, AttentionError> {
    attention_forward(x, cluster_features, p, Some(bias)).map(|(out, _)| out)
}

/// Gradients of [`attention_forward`]'s output with respect to its
/// projections, the bias, and both feature inputs.
#[derive(Debug, Clone)]
pub struct AttentionGrads {
    pub params: AttentionParams,
    pub bias: Array3<f64>,
    pub x: Array2<f64>,
    pub keys: Array2<f64>,
}

impl AttentionCache {
    pub fn backward(&self, p: &AttentionParams, d_out: &Array2<f64>) -> Result<AttentionGrads, AttentionError> {
        let (n, m) = (self.x.nrows(), self.keys.nrows());
        if d_out.dim() != (n, p.output_dim()) {
            return Err(AttentionError::Shape(format!("output gradient {:?}, expected {:?}", d_out.dim(), (n, p.output_dim()))));
        }
        let scale = 1.0 / (p.head_dim() as f64).sqrt();
        let dh = p.head_dim();
        let mut grads = AttentionGrads {
            params: p.zeros_like(),
            bias: Array3::zeros((n, m, p.heads())),
            x: Array2::zeros(self.x.raw_dim()),
            keys: Array2::zeros(self.keys.raw_dim()),
        };
        for h in 0..p.heads() {
            let g = d_out.slice(s![.., h * dh..(h + 1) * dh]);
            let probs = &self.probs[h];
            let d_v = probs.t().dot(&g);
            let d_p = g.dot(&self.v[h].t());
            // softmax backward: dS = P ⊙ (dP − rowsum(P ⊙ dP))
            let row_dot = (probs * &d_p).sum_axis(Axis(1)).insert_axis(Axis(1));
            let d_s = probs * &(&d_p - &row_dot);
            grads.bias.slice_mut(s![.., .., h]).assign(&d_s);
            let d_q = d_s.dot(&self.k[h]) * scale;
            let d_k = d_s.t().dot(&self.q[h]) * scale;
            grads.params.w_q[h] = self.x.t().dot(&d_q);
            grads.params.w_k[h] = self.keys.t().dot(&d_k);
            grads.params.w_v[h] = self.keys.t().dot(&d_v);
            grads.x += &d_q.dot(&p.w_q[h].t());
            grads.keys += &(d_k.dot(&p.w_k[h].t()) + d_v.dot(&p.w_v[h].t()));
        }
        Ok(grads)
    }
}

/// Parameters of a biased attention layer; also the gradient type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub attention: AttentionParams,
    /// `None` means plain attention with `H ≡ 0`.
    pub bias: Option<BiasParams>,
}

impl ParamSet for LayerParams {
    fn tensors(&self) -> Vec<ArrayViewD<'_, f64>> {
        let mut out = self.attention.tensors();
        if let Some(b) = &self.bias {
            out.extend(b.tensors());
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<ArrayViewMutD<'_, f64>> {
        let mut out = self.attention.tensors_mut();
        if let Some(b) = &mut self.bias {
            out.extend(b.tensors_mut());
        }
        out
    }

    fn tensor_names(&self) -> Vec<String> {
        let mut out = self.attention.tensor_names();
        if let Some(b) = &self.bias {
            out.extend(b.tensor_names());
        }
        out
    }
}

/// Gradients of a scalar loss after [`HdseLayer::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: LayerParams,
    /// With respect to the query-side features.
    pub input: Array2<f64>,
    /// With respect to the key/value-side features.
    pub keys: Array2<f64>,
}

/// A biased attention layer that remembers its last forward pass.
#[derive(Debug, Clone)]
pub struct HdseLayer {
    pub params: LayerParams,
    cache: Option<(AttentionCache, Option<BiasMatrix>)>,
}

impl HdseLayer {
    pub fn new(attention: AttentionParams, bias: Option<BiasParams>) -> Result<Self, AttentionError> {
        attention.validate()?;
        if let Some(b) = &bias {
            b.validate()?;
            if b.heads() != attention.heads() {
                return Err(AttentionError::Shape(format!(
                    "bias MLP emits {} heads, attention has {}",
                    b.heads(),
                    attention.heads()
                )));
            }
        }
        Ok(Self { params: LayerParams { attention, bias }, cache: None })
    }

    /// Runs the layer. `codes` must be given exactly when the layer has bias
    /// parameters; its rows index `x` and its columns index `keys`.
    pub fn forward(
        &mut self,
        x: &Array2<f64>,
        keys: &Array2<f64>,
        codes: Option<&dyn DistanceCodes>,
    ) -> Result<Array2<f64>, AttentionError> {
        self.cache = None;
        let bias = match (&self.params.bias, codes) {
            (Some(p), Some(c)) => Some(bias_matrix(c, p)?),
            (None, None) => None,
            (Some(_), None) => return Err(AttentionError::Shape("layer has bias parameters but no distances given".into())),
            (None, Some(_)) => return Err(AttentionError::Shape("distances given to a layer without bias".into())),
        };
        let (out, cache) = attention_forward(x, keys, &self.params.attention, bias.as_ref().map(|b| &b.h))?;
        self.cache = Some((cache, bias));
        Ok(out)
    }

    pub fn backward(&self, d_out: &Array2<f64>) -> Result<Gradients, AttentionError> {
        let (cache, bias) = self.cache.as_ref().ok_or(AttentionError::BackwardBeforeForward)?;
        let g = cache.backward(&self.params.attention, d_out)?;
        let bias_grad = match (bias, &self.params.bias) {
            (Some(b), Some(p)) => Some(b.backward(p, &g.bias)?),
            _ => None,
        };
        Ok(Gradients {
            params: LayerParams { attention: g.params, bias: bias_grad },
            input: g.x,
            keys: g.keys,
        })
    }

    pub fn last_cache(&self) -> Option<&AttentionCache> {
        self.cache.as_ref().map(|(c, _)| c)
    }
}
