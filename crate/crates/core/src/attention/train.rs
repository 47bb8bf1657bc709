//! A one-layer node classifier on synthetic two-community graphs, used to
//! compare attention without bias, with a shortest-path bias and with the
//! hierarchical bias.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bias::{bias_matrix, BiasParams};
use super::layer::{attention_forward, AttentionParams, LayerParams};
use super::{AttentionError, ParamSet};
use crate::coarsening::{Algorithm, Hierarchy, HierarchyConfig};
use crate::distance::{hdse, HdseTensor};
use crate::gdwl::named::community_pair;
use crate::graph::Graph;

/// Which distance bias the attention layer gets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemoEncoding {
    None,
    Spd,
    Hdse,
}

impl DemoEncoding {
    pub const ALL: [DemoEncoding; 3] = [DemoEncoding::None, DemoEncoding::Spd, DemoEncoding::Hdse];
}

impl fmt::Display for DemoEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DemoEncoding::None => "none",
            DemoEncoding::Spd => "spd",
            DemoEncoding::Hdse => "hdse",
        })
    }
}

impl FromStr for DemoEncoding {
    type Err = AttentionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(DemoEncoding::None),
            "spd" => Ok(DemoEncoding::Spd),
            "hdse" => Ok(DemoEncoding::Hdse),
            other => Err(AttentionError::Config(format!("unknown encoding {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DemoConfig {
    pub num_graphs: usize,
    pub nodes: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Distance between the two class means of the node features, in units
    /// of the per-coordinate noise. Zero makes features pure noise.
    pub feature_signal: f64,
    pub heads: usize,
    pub head_dim: usize,
    pub embed_dim: usize,
    pub hidden: usize,
    pub clip: usize,
    pub max_level: usize,
    pub algo: Algorithm,
    pub lr: f64,
    pub epochs: usize,
    pub train_frac: f64,
    pub val_frac: f64,
    /// Replace every graph's labels by a random permutation of them.
    pub shuffle_labels: bool,
}

impl Default for DemoConfig {
    fn default() -> Self {
        Self {
            num_graphs: 20,
            nodes: 30,
            p_in: 0.3,
            p_out: 0.05,
            feature_dim: 8,
            feature_signal: 2.0,
            heads: 4,
            head_dim: 4,
            embed_dim: 16,
            hidden: 16,
            clip: 30,
            max_level: 1,
            algo: Algorithm::Louvain,
            lr: 0.05,
            epochs: 200,
            train_frac: 0.6,
            val_frac: 0.2,
            shuffle_labels: false,
        }
    }
}

impl DemoConfig {
    pub fn validate(&self) -> Result<(), AttentionError> {
        let bad = |msg: String| Err(AttentionError::Config(msg));
        if self.num_graphs == 0 || self.nodes < 2 {
            return bad(format!("need at least one graph of >= 2 nodes, got {} x {}", self.num_graphs, self.nodes));
        }
        if !(0.0..=1.0).contains(&self.p_in) || !(0.0..=1.0).contains(&self.p_out) {
            return bad(format!("edge probabilities must be in [0, 1], got {} and {}", self.p_in, self.p_out));
        }
        if self.feature_dim == 0 || self.heads == 0 || self.head_dim == 0 || self.embed_dim == 0 || self.hidden == 0 {
            return bad("all widths must be >= 1".into());
        }
        if !(self.feature_signal.is_finite() && self.feature_signal >= 0.0) {
            return bad(format!("feature_signal must be finite and >= 0, got {}", self.feature_signal));
        }
        if self.clip == 0 || self.clip > usize::from(crate::distance::MAX_CLIP) {
            return bad(format!("clip must be in 1..={}, got {}", crate::distance::MAX_CLIP, self.clip));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(self.train_frac > 0.0 && self.val_frac >= 0.0 && self.train_frac + self.val_frac < 1.0) {
            return bad(format!("split fractions {} / {} leave no test nodes", self.train_frac, self.val_frac));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
}

/// Trained parameters: the attention layer and the linear read-out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoModel {
    pub layer: LayerParams,
    pub classifier_w: Array2<f64>,
    pub classifier_b: Array1<f64>,
}

impl DemoModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("parameters serialize")
    }
}

#[derive(Debug, Clone)]
pub struct DemoRun {
    pub encoding: DemoEncoding,
    pub seed: u64,
    /// Accuracy on the held-out test nodes after the last update.
    pub test_accuracy: f64,
    pub metrics: Vec<EpochMetrics>,
    pub model: DemoModel,
}

/// `epoch,loss,train_acc,test_acc` rows.
pub fn metrics_csv(metrics: &[EpochMetrics]) -> String {
    let mut out = String::from("epoch,loss,train_acc,test_acc\n");
    for m in metrics {
        out.push_str(&format!("{},{:.6},{:.6},{:.6}\n", m.epoch, m.loss, m.train_acc, m.test_acc));
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Split {
    Train,
    Val,
    Test,
}

struct Sample {
    x: Array2<f64>,
    labels: Vec<usize>,
    split: Vec<Split>,
    codes: Option<HdseTensor>,
}

fn make_dataset(cfg: &DemoConfig, enc: DemoEncoding, seed: u64) -> Result<Vec<Sample>, AttentionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut direction: Array1<f64> = (0..cfg.feature_dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    direction /= direction.dot(&direction).sqrt();
    let mut samples = Vec::with_capacity(cfg.num_graphs);
    for _ in 0..cfg.num_graphs {
        let g = community_pair(cfg.nodes, cfg.p_in, cfg.p_out, rng.random());
        let mut labels = g.labels().expect("community graphs are labeled").to_vec();
        let n = g.num_nodes();
        let x = Array2::from_shape_fn((n, cfg.feature_dim), |(i, c)| {
            let sign = if labels[i] == 1 { 0.5 } else { -0.5 };
            rng.sample::<f64, _>(StandardNormal) + sign * cfg.feature_signal * direction[c]
        });
        if cfg.shuffle_labels {
            labels.shuffle(&mut rng);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let n_train = ((n as f64) * cfg.train_frac).round() as usize;
        let n_val = ((n as f64) * cfg.val_frac).round() as usize;
        let mut split = vec![Split::Test; n];
        for (rank, &v) in order.iter().enumerate() {
            if rank < n_train {
                split[v] = Split::Train;
            } else if rank < n_train + n_val {
                split[v] = Split::Val;
            }
        }
        let codes = encode(&g, cfg, enc, seed)?;
        samples.push(Sample { x, labels, split, codes });
    }
    Ok(samples)
}

fn encode(g: &Graph, cfg: &DemoConfig, enc: DemoEncoding, seed: u64) -> Result<Option<HdseTensor>, AttentionError> {
    let max_level = match enc {
        DemoEncoding::None => return Ok(None),
        DemoEncoding::Spd => 0,
        DemoEncoding::Hdse => cfg.max_level,
    };
    let config = HierarchyConfig::new(cfg.algo, max_level).seed(seed);
    let h = Hierarchy::build(g, &config).map_err(|e| AttentionError::Config(e.to_string()))?;
    let t = hdse(&h, cfg.clip).map_err(|e| AttentionError::Config(e.to_string()))?;
    Ok(Some(t))
}

fn init_model(cfg: &DemoConfig, enc: DemoEncoding, seed: u64) -> DemoModel {
    // Attention and read-out are drawn identically for every encoding, so a
    // seed compares encodings from the same starting point.
    let attention = AttentionParams::init(cfg.feature_dim, cfg.head_dim, cfg.heads, seed ^ 0xA77E);
    let levels = match enc {
        DemoEncoding::None => None,
        DemoEncoding::Spd => Some(1),
        DemoEncoding::Hdse => Some(cfg.max_level + 1),
    };
    let bias = levels.map(|l| BiasParams::init(l, cfg.clip as u8, cfg.embed_dim, cfg.hidden, cfg.heads, seed ^ 0xB1A5));
    let width = cfg.heads * cfg.head_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xC1A5);
    let bound = 1.0 / (width as f64).sqrt();
    let classifier_w = Array2::from_shape_simple_fn((width, 2), || rng.random_range(-bound..=bound));
    DemoModel { layer: LayerParams { attention, bias }, classifier_w, classifier_b: Array1::zeros(2) }
}

struct Step {
    loss: f64,
    train_correct: usize,
    test_correct: usize,
    grad: DemoModel,
}

/// Forward and backward for one graph. The loss is the summed
/// cross-entropy over training nodes, divided by `norm`.
fn step(model: &DemoModel, s: &Sample, norm: f64) -> Result<Step, AttentionError> {
    let bias = match (&model.layer.bias, &s.codes) {
        (Some(p), Some(c)) => Some(bias_matrix(&**c, p)?),
        _ => None,
    };
    let (hidden, cache) = attention_forward(&s.x, &s.x, &model.layer.attention, bias.as_ref().map(|b| &b.h))?;
    let logits = hidden.dot(&model.classifier_w) + &model.classifier_b;

    let mut d_logits = Array2::zeros(logits.raw_dim());
    let (mut loss, mut train_correct, mut test_correct) = (0.0, 0, 0);
    for (i, row) in logits.rows().into_iter().enumerate() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let exp = row.mapv(|v| (v - max).exp());
        let probs = &exp / exp.sum();
        let predicted = usize::from(row[1] > row[0]);
        let correct = predicted == s.labels[i];
        match s.split[i] {
            Split::Train => {
                loss -= probs[s.labels[i]].ln() / norm;
                train_correct += usize::from(correct);
                let mut d = d_logits.row_mut(i);
                d.assign(&(probs / norm));
                d[s.labels[i]] -= 1.0 / norm;
            }
            Split::Test => test_correct += usize::from(correct),
            Split::Val => {}
        }
    }

    let d_hidden = d_logits.dot(&model.classifier_w.t());
    let g = cache.backward(&model.layer.attention, &d_hidden)?;
    let bias_grad = match (&bias, &model.layer.bias) {
        (Some(b), Some(p)) => Some(b.backward(p, &g.bias)?),
        _ => None,
    };
    Ok(Step {
        loss,
        train_correct,
        test_correct,
        grad: DemoModel {
            layer: LayerParams { attention: g.params, bias: bias_grad },
            classifier_w: hidden.t().dot(&d_logits),
            classifier_b: d_logits.sum_axis(Axis(0)),
        },
    })
}

impl ParamSet for DemoModel {
    fn tensors(&self) -> Vec<ndarray::ArrayViewD<'_, f64>> {
        let mut out = self.layer.tensors();
        out.push(self.classifier_w.view().into_dyn());
        out.push(self.classifier_b.view().into_dyn());
        out
    }

    fn tensors_mut(&mut self) -> Vec<ndarray::ArrayViewMutD<'_, f64>> {
        let mut out = self.layer.tensors_mut();
        out.push(self.classifier_w.view_mut().into_dyn());
        out.push(self.classifier_b.view_mut().into_dyn());
        out
    }

    fn tensor_names(&self) -> Vec<String> {
        let mut out = self.layer.tensor_names();
        out.push("classifier.w".into());
        out.push("classifier.b".into());
        out
    }
}

/// Trains one model with full-batch gradient descent over all graphs and
/// reports per-epoch metrics plus the final test accuracy. Deterministic
/// for a given seed; per-graph work runs in parallel but gradients are
/// summed in graph order.
pub fn train_demo(cfg: &DemoConfig, enc: DemoEncoding, seed: u64) -> Result<DemoRun, AttentionError> {
    cfg.validate()?;
    let data = make_dataset(cfg, enc, seed)?;
    let mut model = init_model(cfg, enc, seed);
    let count = |which: Split| data.iter().flat_map(|s| &s.split).filter(|&&t| t == which).count();
    let (n_train, n_test) = (count(Split::Train), count(Split::Test));
    if n_train == 0 || n_test == 0 {
        return Err(AttentionError::Config("split leaves no training or no test nodes".into()));
    }

    let evaluate = |model: &DemoModel| -> Result<(f64, f64, f64, DemoModel), AttentionError> {
        let steps: Vec<Step> = data.par_iter().map(|s| step(model, s, n_train as f64)).collect::<Result<_, _>>()?;
        let mut grad = steps[0].grad.clone();
        for s in &steps[1..] {
            grad.accumulate(&s.grad);
        }
        let loss = steps.iter().map(|s| s.loss).sum();
        let train = steps.iter().map(|s| s.train_correct).sum::<usize>() as f64 / n_train as f64;
        let test = steps.iter().map(|s| s.test_correct).sum::<usize>() as f64 / n_test as f64;
        Ok((loss, train, test, grad))
    };

    let mut metrics = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss, train_acc, test_acc, grad) = evaluate(&model)?;
        metrics.push(EpochMetrics { epoch, loss, train_acc, test_acc });
        model.descend(&grad, cfg.lr);
    }
    let (_, _, test_accuracy, _) = evaluate(&model)?;
    Ok(DemoRun { encoding: enc, seed, test_accuracy, metrics, model })
}

/// Mean final test accuracy over `seeds`.
pub fn mean_accuracy(cfg: &DemoConfig, enc: DemoEncoding, seeds: &[u64]) -> Result<f64, AttentionError> {
    let mut total = 0.0;
    for &seed in seeds {
        total += train_demo(cfg, enc, seed)?.test_accuracy;
    }
    Ok(total / seeds.len().max(1) as f64)
}
