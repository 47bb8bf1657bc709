//! Central finite-difference checks of [`HdseLayer::backward`].
//!
//! The scalar loss is `Σ R ⊙ out` for a fixed random `R`, so the upstream
//! gradient is `R` itself.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AttentionError, HdseLayer, ParamSet};
use crate::distance::DistanceCodes;

/// Relative errors below this magnitude are measured against it instead,
/// so entries whose true gradient is ~0 do not blow up the ratio.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Worst relative error per tensor, by name.
    pub per_tensor: Vec<(String, f64)>,
    pub max_rel_error: f64,
    pub entries_checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

fn loss(layer: &mut HdseLayer, x: &Array2<f64>, keys: &Array2<f64>, codes: Option<&dyn DistanceCodes>, r: &Array2<f64>) -> Result<f64, AttentionError> {
    Ok((layer.forward(x, keys, codes)? * r).sum())
}

/// Compares analytic and numeric gradients for every parameter tensor and
/// both inputs. `keys == None` runs dense self-attention (`keys = x`, and
/// the input gradient is the sum of both paths).
pub fn check_gradients(
    layer: &HdseLayer,
    x: &Array2<f64>,
    keys: Option<&Array2<f64>>,
    codes: Option<&dyn DistanceCodes>,
    step: f64,
    seed: u64,
) -> Result<GradCheckReport, AttentionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layer = layer.clone();
    let self_attention = keys.is_none();
    let keys_owned = keys.cloned().unwrap_or_else(|| x.clone());
    let out = layer.forward(x, &keys_owned, codes)?;
    let r = Array2::from_shape_simple_fn(out.raw_dim(), || rng.random_range(-1.0..1.0));
    let grads = layer.backward(&r)?;

    let mut per_tensor = Vec::new();
    let mut entries = 0;
    let names = layer.params.tensor_names();
    let analytic: Vec<Vec<f64>> = grads.params.tensors().iter().map(|t| t.iter().copied().collect()).collect();
    for (t, name) in names.into_iter().enumerate() {
        let mut worst: f64 = 0.0;
        for (e, &a) in analytic[t].iter().enumerate() {
            let orig = *layer.params.tensors_mut()[t].iter().nth(e).unwrap();
            let probe = |value: f64, layer: &mut HdseLayer| -> Result<f64, AttentionError> {
                *layer.params.tensors_mut()[t].iter_mut().nth(e).unwrap() = value;
                loss(layer, x, &keys_owned, codes, &r)
            };
            let up = probe(orig + step, &mut layer)?;
            let down = probe(orig - step, &mut layer)?;
            probe(orig, &mut layer)?;
            worst = worst.max(relative_error(a, (up - down) / (2.0 * step)));
            entries += 1;
        }
        per_tensor.push((name, worst));
    }

    let input_grad = if self_attention { &grads.input + &grads.keys } else { grads.input.clone() };
    let mut check_input = |name: &str, analytic: &Array2<f64>, perturb_x: bool| -> Result<(), AttentionError> {
        let mut worst: f64 = 0.0;
        for ((i, j), &a) in analytic.indexed_iter() {
            let mut eval = |delta: f64| -> Result<f64, AttentionError> {
                let mut xp = x.clone();
                let mut kp = keys_owned.clone();
                if perturb_x {
                    xp[[i, j]] += delta;
                    if self_attention {
                        kp = xp.clone();
                    }
                } else {
                    kp[[i, j]] += delta;
                }
                loss(&mut layer, &xp, &kp, codes, &r)
            };
            let numeric = (eval(step)? - eval(-step)?) / (2.0 * step);
            worst = worst.max(relative_error(a, numeric));
            entries += 1;
        }
        per_tensor.push((name.to_string(), worst));
        Ok(())
    };
    check_input("input", &input_grad, true)?;
    if !self_attention {
        check_input("keys", &grads.keys, false)?;
    }

    let max_rel_error = per_tensor.iter().map(|(_, e)| *e).fold(0.0, f64::max);
    Ok(GradCheckReport { per_tensor, max_rel_error, entries_checked: entries })
}
