//! Fully-connected network with ReLU hidden layers and a split-Softmax
//! output head: the final pre-activation vector is partitioned into I
//! contiguous groups of J logits and each group is normalized by its own
//! Softmax, so every item's association row sums to 1 by construction.
//!
//! Ships an exact backward pass through the split head, Adam updates, and a
//! versioned JSON checkpoint that round-trips f64 parameters losslessly.

use crate::error::{Error, Result};
use crate::gap::Assignment;
use crate::seed::{stream_rng, TAG_INIT};
use ndarray::{Array1, Array2, ArrayView1, Axis, Zip};
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

/// Per-feature standardization statistics, fitted on the training set and
/// frozen into the checkpoint so inference applies the identical transform.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNorm {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl FeatureNorm {
    /// Population mean/std per column. Near-constant columns (std below
    /// 1e-12) fall back to std 1 so they pass through centered, not blown up.
    pub fn fit(features: &Array2<f64>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::EmptyInput("feature matrix"));
        }
        let n = features.nrows() as f64;
        let mean = features.sum_axis(Axis(0)) / n;
        let mut var = Array1::<f64>::zeros(features.ncols());
        for row in features.rows() {
            Zip::from(&mut var).and(&row).and(&mean).for_each(|v, x, m| {
                let d = x - m;
                *v += d * d;
            });
        }
        let std = var.mapv(|v| {
            let s = (v / n).sqrt();
            if s < 1e-12 {
                1.0
            } else {
                s
            }
        });
        Ok(Self { mean, std })
    }

    pub fn apply(&self, features: &mut Array2<f64>) {
        for mut row in features.rows_mut() {
            Zip::from(&mut row).and(&self.mean).and(&self.std).for_each(|x, m, s| {
                *x = (*x - m) / s;
            });
        }
    }
}

/// The trainable parameters: weights[k] has shape (d_{k+1}, d_k) and acts on
/// row-vector activations as a · Wᵀ + b.
///
/// Fields are public for checkpoint tooling and gradient checking; mutating
/// them must preserve the shape invariants established by [`init_model`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub layer_dims: Vec<usize>,
    pub split: (usize, usize),
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub feature_norm: Option<FeatureNorm>,
}

impl MlpModel {
    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    fn validate_shapes(&self) -> Result<()> {
        let dims = &self.layer_dims;
        if dims.len() < 2 {
            return Err(Error::InvalidValue("need at least an input and an output layer".into()));
        }
        if dims.contains(&0) {
            return Err(Error::InvalidValue("layer dimensions must be positive".into()));
        }
        let (items, groups) = self.split;
        if items * groups != *dims.last().unwrap() {
            return Err(Error::DimensionMismatch(format!(
                "output dim {} is not split {items}×{groups}",
                dims.last().unwrap()
            )));
        }
        if self.weights.len() != dims.len() - 1 || self.biases.len() != dims.len() - 1 {
            return Err(Error::DimensionMismatch("one weight/bias pair per layer".into()));
        }
        for k in 0..self.weights.len() {
            if self.weights[k].dim() != (dims[k + 1], dims[k]) {
                return Err(Error::DimensionMismatch(format!(
                    "layer {k} weights {:?}, expected ({}, {})",
                    self.weights[k].dim(),
                    dims[k + 1],
                    dims[k]
                )));
            }
            if self.biases[k].len() != dims[k + 1] {
                return Err(Error::DimensionMismatch(format!(
                    "layer {k} biases {}, expected {}",
                    self.biases[k].len(),
                    dims[k + 1]
                )));
            }
        }
        if let Some(norm) = &self.feature_norm {
            if norm.mean.len() != dims[0] || norm.std.len() != dims[0] {
                return Err(Error::DimensionMismatch("feature_norm length vs input dim".into()));
            }
        }
        Ok(())
    }
}

/// Glorot-initialized model: weights ~ U(±√(6/(fan_in+fan_out))), biases
/// zero. In the expanding layer stacks used here this scale makes activation
/// magnitudes decay layer by layer, which keeps the softmax head far from
/// saturation during early training — with a strong capacity penalty, larger
/// scales let the logits saturate into a load-balanced but profit-blind
/// assignment within the first epoch, and the softmax Jacobian then freezes
/// it there. Deterministic per seed; the draw order (layer by layer,
/// row-major) is part of the reproducibility contract.
pub fn init_model(layer_dims: &[usize], split: (usize, usize), seed: u64) -> Result<MlpModel> {
    let mut rng = stream_rng(seed, 0, TAG_INIT);
    let mut weights = Vec::with_capacity(layer_dims.len().saturating_sub(1));
    let mut biases = Vec::with_capacity(layer_dims.len().saturating_sub(1));
    for k in 0..layer_dims.len().saturating_sub(1) {
        let (fan_out, fan_in) = (layer_dims[k + 1], layer_dims[k]);
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let uniform = Uniform::new(-limit, limit);
        weights.push(Array2::from_shape_fn((fan_out, fan_in), |_| uniform.sample(&mut rng)));
        biases.push(Array1::zeros(fan_out));
    }
    let model = MlpModel {
        layer_dims: layer_dims.to_vec(),
        split,
        weights,
        biases,
        feature_norm: None,
    };
    model.validate_shapes()?;
    Ok(model)
}

/// Numerically stable Softmax (max-subtraction): positive entries summing
/// to 1 within 1e-9 for any finite input.
pub fn softmax(v: ArrayView1<'_, f64>) -> Array1<f64> {
    let mut out = v.to_owned();
    softmax_in_place(out.as_slice_mut().expect("owned 1-d array is contiguous"));
    out
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// Per-mini-batch intermediates kept for the backward pass:
/// `pre_activations[k]` is z_k, `activations[0]` the (normalized) input,
/// `activations[k+1]` layer k's output, the last one being u.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub pre_activations: Vec<Array2<f64>>,
    pub activations: Vec<Array2<f64>>,
}

fn forward_core(
    model: &MlpModel,
    features: &Array2<f64>,
    keep_cache: bool,
) -> Result<(Array2<f64>, Option<ForwardCache>)> {
    model.validate_shapes()?;
    if features.ncols() != model.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "feature width {} vs input dim {}",
            features.ncols(),
            model.input_dim()
        )));
    }
    let n_layers = model.n_layers();
    let (items, group) = model.split;

    let mut a = features.to_owned();
    if let Some(norm) = &model.feature_norm {
        norm.apply(&mut a);
    }
    let mut pre_activations = Vec::new();
    let mut activations = Vec::new();
    if keep_cache {
        activations.push(a.clone());
    }

    for k in 0..n_layers {
        let mut z = a.dot(&model.weights[k].t());
        z += &model.biases[k];
        if k + 1 < n_layers {
            let act = z.mapv(|x| x.max(0.0));
            if keep_cache {
                pre_activations.push(z);
                activations.push(act.clone());
            }
            a = act;
        } else {
            let mut u = z.clone();
            for mut row in u.rows_mut() {
                let row = row.as_slice_mut().expect("row of standard-layout array");
                for g in 0..items {
                    softmax_in_place(&mut row[g * group..(g + 1) * group]);
                }
            }
            if keep_cache {
                pre_activations.push(z);
                activations.push(u.clone());
            }
            a = u;
        }
    }

    let cache = keep_cache.then_some(ForwardCache { pre_activations, activations });
    Ok((a, cache))
}

/// Forward pass for a batch of feature rows; returns one soft assignment per
/// row plus the cache needed by [`backward`]. Constraint C1 holds for every
/// output row by construction of the split-Softmax head.
pub fn forward(model: &MlpModel, features: &Array2<f64>) -> Result<(Vec<Assignment>, ForwardCache)> {
    let (u, cache) = forward_core(model, features, true)?;
    let assignments = assignments_from_matrix(&u, model.split)?;
    Ok((assignments, cache.expect("cache requested")))
}

/// Cache-free forward pass for inference; returns the raw batch×(I·J)
/// assignment matrix.
pub fn predict(model: &MlpModel, features: &Array2<f64>) -> Result<Array2<f64>> {
    Ok(forward_core(model, features, false)?.0)
}

/// Reshape each row of a batch×(I·J) matrix into an I×J soft assignment.
pub fn assignments_from_matrix(u: &Array2<f64>, split: (usize, usize)) -> Result<Vec<Assignment>> {
    let (items, group) = split;
    if u.ncols() != items * group {
        return Err(Error::DimensionMismatch(format!(
            "matrix width {} vs split {items}×{group}",
            u.ncols()
        )));
    }
    u.rows()
        .into_iter()
        .map(|row| {
            let m = Array2::from_shape_vec((items, group), row.to_vec())
                .expect("row length checked against split");
            Assignment::soft(m)
        })
        .collect()
}

/// Parameter gradients, same shapes as the model's weights and biases.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub d_weights: Vec<Array2<f64>>,
    pub d_biases: Vec<Array1<f64>>,
}

/// Exact backward pass. `dl_du` is ∂L/∂u for the batch (batch×(I·J)); the
/// split-Softmax Jacobian is applied per group,
/// dL/dz_g = u_g ⊙ (dL/du_g − ⟨dL/du_g, u_g⟩), then standard ReLU/linear
/// backprop (ReLU subgradient 0 at 0) yields dL/dW and dL/db per layer.
pub fn backward(model: &MlpModel, cache: &ForwardCache, dl_du: &Array2<f64>) -> Result<Gradients> {
    let n_layers = model.n_layers();
    if cache.pre_activations.len() != n_layers || cache.activations.len() != n_layers + 1 {
        return Err(Error::DimensionMismatch("cache does not match model depth".into()));
    }
    let u = &cache.activations[n_layers];
    if dl_du.dim() != u.dim() {
        return Err(Error::DimensionMismatch(format!(
            "dl_du {:?} vs output {:?}",
            dl_du.dim(),
            u.dim()
        )));
    }
    let (items, group) = model.split;

    let mut delta = Array2::zeros(u.raw_dim());
    for ((mut drow, urow), lrow) in delta
        .rows_mut()
        .into_iter()
        .zip(u.rows())
        .zip(dl_du.rows())
    {
        for g in 0..items {
            let lo = g * group;
            let hi = lo + group;
            let mut dot = 0.0;
            for j in lo..hi {
                dot += lrow[j] * urow[j];
            }
            for j in lo..hi {
                drow[j] = urow[j] * (lrow[j] - dot);
            }
        }
    }

    let mut d_weights_rev = Vec::with_capacity(n_layers);
    let mut d_biases_rev = Vec::with_capacity(n_layers);
    for k in (0..n_layers).rev() {
        let a_prev = &cache.activations[k];
        d_weights_rev.push(delta.t().dot(a_prev));
        d_biases_rev.push(delta.sum_axis(Axis(0)));
        if k > 0 {
            let mut upstream = delta.dot(&model.weights[k]);
            Zip::from(&mut upstream)
                .and(&cache.pre_activations[k - 1])
                .for_each(|d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
            delta = upstream;
        }
    }
    d_weights_rev.reverse();
    d_biases_rev.reverse();
    Ok(Gradients { d_weights: d_weights_rev, d_biases: d_biases_rev })
}

/// Adam optimizer state: first/second moment estimates per parameter plus
/// the step counter driving bias correction.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub first_moment_weights: Vec<Array2<f64>>,
    pub second_moment_weights: Vec<Array2<f64>>,
    pub first_moment_biases: Vec<Array1<f64>>,
    pub second_moment_biases: Vec<Array1<f64>>,
    pub step_count: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
}

impl AdamState {
    /// Zero moments matching the model's shapes; standard defaults
    /// β₁ = 0.9, β₂ = 0.999, ε = 1e-8.
    pub fn new(model: &MlpModel) -> Self {
        Self {
            first_moment_weights: model.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            second_moment_weights: model.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            first_moment_biases: model.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
            second_moment_biases: model.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
            step_count: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
        }
    }
}

/// One bias-corrected Adam update applied in place. Non-finite gradients
/// abort with an error (the training loop's divergence signal).
pub fn adam_step(
    model: &mut MlpModel,
    grads: &Gradients,
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    if grads.d_weights.len() != model.weights.len() || grads.d_biases.len() != model.biases.len() {
        return Err(Error::DimensionMismatch("gradient layer count vs model".into()));
    }
    for k in 0..model.weights.len() {
        if grads.d_weights[k].dim() != model.weights[k].dim()
            || grads.d_biases[k].len() != model.biases[k].len()
        {
            return Err(Error::DimensionMismatch(format!("gradient shapes at layer {k}")));
        }
    }
    let finite = grads.d_weights.iter().all(|g| g.iter().all(|x| x.is_finite()))
        && grads.d_biases.iter().all(|g| g.iter().all(|x| x.is_finite()));
    if !finite {
        return Err(Error::NonFinite("parameter gradient (training diverged)".into()));
    }
    if !lr.is_finite() || lr < 0.0 {
        return Err(Error::InvalidValue(format!("learning rate {lr}")));
    }

    state.step_count += 1;
    let t = state.step_count as f64;
    let bias1 = 1.0 - state.beta1.powf(t);
    let bias2 = 1.0 - state.beta2.powf(t);
    let (beta1, beta2, eps) = (state.beta1, state.beta2, state.eps_adam);

    let update = |param: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *param -= lr * m_hat / (v_hat.sqrt() + eps);
    };

    for k in 0..model.weights.len() {
        Zip::from(&mut model.weights[k])
            .and(&grads.d_weights[k])
            .and(&mut state.first_moment_weights[k])
            .and(&mut state.second_moment_weights[k])
            .for_each(|w, &g, m, v| update(w, g, m, v));
        Zip::from(&mut model.biases[k])
            .and(&grads.d_biases[k])
            .and(&mut state.first_moment_biases[k])
            .and(&mut state.second_moment_biases[k])
            .for_each(|b, &g, m, v| update(b, g, m, v));
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct FeatureNormRepr {
    mean: Vec<f64>,
    std: Vec<f64>,
}

/// Checkpoint wire format, version 1: flat row-major weights per layer.
#[derive(Serialize, Deserialize)]
struct Checkpoint {
    version: u32,
    layer_dims: Vec<usize>,
    split: [usize; 2],
    feature_norm: Option<FeatureNormRepr>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

const CHECKPOINT_VERSION: u32 = 1;

/// Write the model as versioned JSON. serde_json emits shortest
/// round-trip f64 literals, so save → load reproduces parameters bitwise.
pub fn save_checkpoint(model: &MlpModel, path: impl AsRef<Path>) -> Result<()> {
    model.validate_shapes()?;
    let ckpt = Checkpoint {
        version: CHECKPOINT_VERSION,
        layer_dims: model.layer_dims.clone(),
        split: [model.split.0, model.split.1],
        feature_norm: model.feature_norm.as_ref().map(|n| FeatureNormRepr {
            mean: n.mean.to_vec(),
            std: n.std.to_vec(),
        }),
        weights: model.weights.iter().map(|w| w.iter().copied().collect()).collect(),
        biases: model.biases.iter().map(|b| b.to_vec()).collect(),
    };
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer(&mut writer, &ckpt).map_err(|e| Error::Format(e.to_string()))?;
    writer.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<MlpModel> {
    let file = std::fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let ckpt: Checkpoint = serde_json::from_reader(BufReader::new(file))
        .map_err(|e| Error::Format(format!("{}: {e}", path.as_ref().display())))?;
    if ckpt.version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {}, expected {CHECKPOINT_VERSION}",
            ckpt.version
        )));
    }
    let dims = &ckpt.layer_dims;
    if dims.len() < 2 || ckpt.weights.len() != dims.len() - 1 || ckpt.biases.len() != dims.len() - 1
    {
        return Err(Error::Format("checkpoint layer counts are inconsistent".into()));
    }
    let mut weights = Vec::with_capacity(ckpt.weights.len());
    let mut biases = Vec::with_capacity(ckpt.biases.len());
    for (k, (w, b)) in ckpt.weights.into_iter().zip(ckpt.biases).enumerate() {
        let shape = (dims[k + 1], dims[k]);
        weights.push(Array2::from_shape_vec(shape, w).map_err(|e| {
            Error::Format(format!("checkpoint layer {k} weights: {e}"))
        })?);
        if b.len() != dims[k + 1] {
            return Err(Error::Format(format!("checkpoint layer {k} bias length {}", b.len())));
        }
        biases.push(Array1::from_vec(b));
    }
    let model = MlpModel {
        layer_dims: ckpt.layer_dims,
        split: (ckpt.split[0], ckpt.split[1]),
        weights,
        biases,
        feature_norm: ckpt.feature_norm.map(|n| FeatureNorm {
            mean: Array1::from_vec(n.mean),
            std: Array1::from_vec(n.std),
        }),
    };
    model.validate_shapes().map_err(|e| Error::Format(e.to_string()))?;
    Ok(model)
}
