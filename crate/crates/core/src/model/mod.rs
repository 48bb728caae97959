//! Compact 3D encoder-decoder predicting per-class confidence cubes.
//!
//! The 4D input (D, R, A, E) enters as a 3D volume over (R, A, E) with the
//! doppler axis mapped to input channels, so doppler patterns feed every
//! convolution without a doppler axis surviving to the output. Each encoder
//! stage is a stride-2 3x3x3 convolution + ReLU; the decoder mirrors it with
//! nearest-neighbor upsampling, a stride-1 convolution, and a skip
//! connection from the matching encoder resolution passed through a 1x1x1
//! projection before elementwise addition. A 1x1x1 head plus sigmoid emits
//! one confidence volume per class.
//!
//! Training minimizes the mean squared error between predicted and
//! ground-truth cubes, averaged over elements then classes, with plain SGD
//! plus momentum. Everything is deterministic given the seed.

mod vol;

pub use vol::{conv_out_len, ConvParam, Vol};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::FusedCube;
use crate::labels::ConfidenceCube;
use crate::scalar::Real;
use vol::{add, conv3_backward, conv3_forward, relu, relu_backward, sigmoid, upsample2, upsample2_backward};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("input dims {got:?} do not match spec dims {expected:?}")]
    ShapeMismatch {
        expected: [usize; 4],
        got: [usize; 4],
    },
    #[error("invalid network spec: {0}")]
    BadSpec(String),
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    DivergenceDetected { epoch: usize },
    #[error("training dataset is empty")]
    EmptyDataset,
}

/// Architecture description; weights are generated from this plus a seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSpec {
    /// Input dims (D, R, A, E); doppler becomes the input channel count.
    pub input_dims: [usize; 4],
    /// Output channels of each encoder stage; the decoder mirrors them.
    pub stage_channels: Vec<usize>,
    /// Spatial kernel of the encoder/decoder convolutions (odd).
    pub kernel: usize,
    /// Output classes.
    pub classes: usize,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        Self {
            input_dims: [16, 32, 16, 16],
            stage_channels: vec![16, 32, 64],
            kernel: 3,
            classes: 2,
        }
    }
}

impl NetworkSpec {
    pub fn stages(&self) -> usize {
        self.stage_channels.len()
    }

    /// Output dims (classes, R, A, E).
    pub fn output_dims(&self) -> [usize; 4] {
        let [_, r, a, e] = self.input_dims;
        [self.classes, r, a, e]
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::BadSpec(m));
        if self.stage_channels.is_empty() {
            return bad("at least one encoder stage required".into());
        }
        if self.kernel % 2 == 0 || self.kernel == 0 {
            return bad(format!("kernel {} must be odd", self.kernel));
        }
        if self.classes == 0 {
            return bad("classes must be positive".into());
        }
        let down = 1usize << self.stages();
        let [d, r, a, e] = self.input_dims;
        if d == 0 {
            return bad("doppler dim must be positive".into());
        }
        for (name, dim) in [("R", r), ("A", a), ("E", e)] {
            if dim == 0 || dim % down != 0 {
                return bad(format!(
                    "{name} = {dim} must be divisible by 2^stages = {down}"
                ));
            }
        }
        Ok(())
    }

    /// Conv parameter shapes in serialization order:
    /// encoder stages, then decoder stages (deep to shallow), then skip
    /// projections (deep to shallow), then the classification head.
    pub fn layer_shapes(&self) -> Vec<(usize, usize, usize)> {
        let s = self.stages();
        let ch = &self.stage_channels;
        let d = self.input_dims[0];
        let mut shapes = Vec::new();
        for i in 0..s {
            let c_in = if i == 0 { d } else { ch[i - 1] };
            shapes.push((ch[i], c_in, self.kernel));
        }
        for i in (0..s).rev() {
            shapes.push((self.dec_out(i), ch[i], self.kernel));
        }
        for i in (0..s).rev() {
            let src = if i == 0 { d } else { ch[i - 1] };
            shapes.push((self.dec_out(i), src, 1));
        }
        shapes.push((self.classes, ch[0], 1));
        shapes
    }

    /// Output channels of decoder stage `i` (the stage producing the
    /// resolution of encoder input `i`).
    fn dec_out(&self, i: usize) -> usize {
        if i == 0 {
            self.stage_channels[0]
        } else {
            self.stage_channels[i - 1]
        }
    }
}

/// All learnable parameters plus the spec they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights<T: Real> {
    pub spec: NetworkSpec,
    pub params: Vec<ConvParam<T>>,
    pub seed: u64,
}

impl<T: Real> Weights<T> {
    /// Fan-in-scaled uniform initialization, biases zero.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Result<Self, ModelError> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = spec
            .layer_shapes()
            .into_iter()
            .map(|(c_out, c_in, k)| {
                let mut p = ConvParam::zeros(c_out, c_in, k);
                let fan_in = (c_in * k * k * k) as f64;
                let bound = (6.0 / fan_in).sqrt();
                for w in p.w.iter_mut() {
                    *w = T::from_f64_lossy(rng.gen_range(-bound..bound));
                }
                p
            })
            .collect();
        Ok(Self {
            spec: spec.clone(),
            params,
            seed,
        })
    }

    /// Zeroed parameters with the spec's shapes (gradient accumulators).
    pub fn zeros_like(spec: &NetworkSpec) -> Vec<ConvParam<T>> {
        spec.layer_shapes()
            .into_iter()
            .map(|(c_out, c_in, k)| ConvParam::zeros(c_out, c_in, k))
            .collect()
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(ConvParam::len).sum()
    }

    fn enc(&self, i: usize) -> &ConvParam<T> {
        &self.params[i]
    }
    fn dec(&self, i: usize) -> &ConvParam<T> {
        // Decoder params are stored deep-to-shallow after the encoders.
        let s = self.spec.stages();
        &self.params[s + (s - 1 - i)]
    }
    fn skip(&self, i: usize) -> &ConvParam<T> {
        let s = self.spec.stages();
        &self.params[2 * s + (s - 1 - i)]
    }
    fn head(&self) -> &ConvParam<T> {
        &self.params[3 * self.spec.stages()]
    }
}

/// Gradients use the same layout as the weights they correspond to.
pub type Gradients<T> = Vec<ConvParam<T>>;

/// Activations recorded during a forward pass, consumed by backward.
pub struct ForwardCache<T: Real> {
    input: Vol<T>,
    enc_out: Vec<Vol<T>>,
    dec_up: Vec<Option<Vol<T>>>,
    dec_act: Vec<Option<Vol<T>>>,
    output: Vol<T>,
}

fn fused_to_vol<T: Real>(cube: &FusedCube<T>) -> Vol<T> {
    let (d, r, a, e) = cube.dims();
    let data = cube
        .data
        .as_slice()
        .map(<[T]>::to_vec)
        .unwrap_or_else(|| cube.data.iter().copied().collect());
    Vol::from_vec(d, r, a, e, data)
}

fn vol_to_confidence<T: Real>(v: &Vol<T>) -> ConfidenceCube<T> {
    ConfidenceCube {
        data: ndarray::Array4::from_shape_vec((v.c, v.z, v.y, v.x), v.data.clone())
            .expect("volume is dense"),
    }
}

fn check_input<T: Real>(cube: &FusedCube<T>, spec: &NetworkSpec) -> Result<(), ModelError> {
    let (d, r, a, e) = cube.dims();
    let got = [d, r, a, e];
    if got != spec.input_dims {
        return Err(ModelError::ShapeMismatch {
            expected: spec.input_dims,
            got,
        });
    }
    Ok(())
}

fn forward_vol<T: Real>(input: Vol<T>, weights: &Weights<T>) -> ForwardCache<T> {
    let s = weights.spec.stages();

    let mut enc_out = Vec::with_capacity(s);
    let mut cursor = &input;
    for i in 0..s {
        let y = relu(conv3_forward(cursor, weights.enc(i), 2));
        enc_out.push(y);
        cursor = enc_out.last().unwrap();
    }

    let mut dec_up: Vec<Option<Vol<T>>> = (0..s).map(|_| None).collect();
    let mut dec_act: Vec<Option<Vol<T>>> = (0..s).map(|_| None).collect();
    let mut y = enc_out[s - 1].clone();
    for i in (0..s).rev() {
        let up = upsample2(&y);
        let conv = conv3_forward(&up, weights.dec(i), 1);
        let src = if i == 0 { &input } else { &enc_out[i - 1] };
        let skip = conv3_forward(src, weights.skip(i), 1);
        y = relu(add(conv, &skip));
        dec_up[i] = Some(up);
        dec_act[i] = Some(y.clone());
    }

    let output = sigmoid(conv3_forward(&y, weights.head(), 1));
    ForwardCache {
        input,
        enc_out,
        dec_up,
        dec_act,
        output,
    }
}

/// Network prediction for one fused cube: per-class confidences in [0, 1].
pub fn forward<T: Real>(
    cube: &FusedCube<T>,
    weights: &Weights<T>,
) -> Result<ConfidenceCube<T>, ModelError> {
    check_input(cube, &weights.spec)?;
    let cache = forward_vol(fused_to_vol(cube), weights);
    Ok(vol_to_confidence(&cache.output))
}

/// Mean squared error averaged over elements then classes.
pub fn loss<T: Real>(pred: &ConfidenceCube<T>, gt: &ConfidenceCube<T>) -> Result<T, ModelError> {
    if pred.data.dim() != gt.data.dim() {
        let (c, r, a, e) = gt.data.dim();
        let (pc, pr, pa, pe) = pred.data.dim();
        return Err(ModelError::ShapeMismatch {
            expected: [c, r, a, e],
            got: [pc, pr, pa, pe],
        });
    }
    let (classes, r, a, e) = pred.data.dim();
    let n = T::from_usize_lossy(r * a * e);
    let mut total = T::zero();
    for c in 0..classes {
        let mut acc = T::zero();
        for (p, g) in pred
            .data
            .index_axis(ndarray::Axis(0), c)
            .iter()
            .zip(gt.data.index_axis(ndarray::Axis(0), c).iter())
        {
            let diff = *p - *g;
            acc += diff * diff;
        }
        total += acc / n;
    }
    Ok(total / T::from_usize_lossy(classes))
}

/// Loss gradient and full backward pass through the network.
///
/// Returns the per-parameter gradients (weights layout) and the loss value.
pub fn backward<T: Real>(
    cube: &FusedCube<T>,
    gt: &ConfidenceCube<T>,
    weights: &Weights<T>,
) -> Result<(Gradients<T>, T), ModelError> {
    check_input(cube, &weights.spec)?;
    let cache = forward_vol(fused_to_vol(cube), weights);
    let mut grads = Weights::zeros_like(&weights.spec);
    let loss_value = backward_from_cache(&cache, gt, weights, &mut grads)?;
    Ok((grads, loss_value))
}

/// Backward pass reusing a recorded forward; accumulates into `grads`.
fn backward_from_cache<T: Real>(
    cache: &ForwardCache<T>,
    gt: &ConfidenceCube<T>,
    weights: &Weights<T>,
    grads: &mut Gradients<T>,
) -> Result<T, ModelError> {
    let spec = &weights.spec;
    let s = spec.stages();
    let pred = &cache.output;
    let gt_flat: Vec<T> = gt.data.iter().copied().collect();
    if gt_flat.len() != pred.data.len() {
        let (c, r, a, e) = gt.data.dim();
        return Err(ModelError::ShapeMismatch {
            expected: spec.output_dims(),
            got: [c, r, a, e],
        });
    }

    // Loss and d loss / d logits in one sweep:
    // l = mean_cls mean_n (p - g)^2, dl/dp = 2 (p - g) / (cls * n),
    // dp/dlogit = p (1 - p).
    let n = T::from_usize_lossy(pred.z * pred.y * pred.x);
    let classes = T::from_usize_lossy(pred.c);
    let scale = T::from_f64_lossy(2.0) / (n * classes);
    let mut loss_acc = T::zero();
    let mut g_logits = Vol::zeros(pred.c, pred.z, pred.y, pred.x);
    for (i, (&p, &g)) in pred.data.iter().zip(&gt_flat).enumerate() {
        let diff = p - g;
        loss_acc += diff * diff;
        g_logits.data[i] = scale * diff * p * (T::one() - p);
    }
    let loss_value = loss_acc / (n * classes);

    // Head.
    let y_final = cache.dec_act[0].as_ref().unwrap();
    let head_idx = 3 * s;
    let mut g_y = conv3_backward(y_final, weights.head(), 1, &g_logits, &mut grads[head_idx]);

    // Decoder stages, shallow to deep; collect skip gradients on the way.
    let mut g_enc: Vec<Option<Vol<T>>> = (0..s).map(|_| None).collect();
    let mut g_input_unused;
    for i in 0..s {
        let act = cache.dec_act[i].as_ref().unwrap();
        let g_sum = relu_backward(act, g_y);

        let dec_idx = s + (s - 1 - i);
        let skip_idx = 2 * s + (s - 1 - i);

        let src = if i == 0 {
            &cache.input
        } else {
            &cache.enc_out[i - 1]
        };
        let g_src = conv3_backward(src, weights.skip(i), 1, &g_sum, &mut grads[skip_idx]);
        if i == 0 {
            g_input_unused = Some(g_src);
            let _ = g_input_unused;
        } else {
            g_enc[i - 1] = Some(match g_enc[i - 1].take() {
                Some(acc) => add(acc, &g_src),
                None => g_src,
            });
        }

        let up = cache.dec_up[i].as_ref().unwrap();
        let g_up = conv3_backward(up, weights.dec(i), 1, &g_sum, &mut grads[dec_idx]);
        g_y = upsample2_backward(&g_up);
    }
    // After the loop g_y is the gradient at the bottleneck output.
    g_enc[s - 1] = Some(match g_enc[s - 1].take() {
        Some(acc) => add(acc, &g_y),
        None => g_y,
    });

    // Encoder stages, deep to shallow.
    for i in (0..s).rev() {
        let g_out = g_enc[i].take().unwrap();
        let g_pre = relu_backward(&cache.enc_out[i], g_out);
        let src = if i == 0 {
            &cache.input
        } else {
            &cache.enc_out[i - 1]
        };
        let g_src = conv3_backward(src, weights.enc(i), 2, &g_pre, &mut grads[i]);
        if i > 0 {
            g_enc[i - 1] = Some(match g_enc[i - 1].take() {
                Some(acc) => add(acc, &g_src),
                None => g_src,
            });
        }
    }

    Ok(loss_value)
}

/// Optimizer and schedule knobs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Fraction of the dataset held out for the per-epoch validation loss.
    pub validation_split: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            momentum: 0.9,
            batch_size: 8,
            epochs: 30,
            seed: 7,
            validation_split: 0.0,
        }
    }
}

/// Training result: final weights plus per-epoch mean training loss (and
/// validation loss when a split was requested).
pub struct TrainOutcome<T: Real> {
    pub weights: Weights<T>,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

/// SGD-with-momentum training over (fused cube, ground truth) pairs.
///
/// Deterministic given the config seed: shuffling uses a seeded generator
/// and per-sample gradients are reduced in sample order.
pub fn train<T: Real>(
    dataset: &[(FusedCube<T>, ConfidenceCube<T>)],
    spec: &NetworkSpec,
    cfg: &TrainConfig,
) -> Result<TrainOutcome<T>, ModelError> {
    if dataset.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    for (cube, _) in dataset {
        check_input(cube, spec)?;
    }
    let val_count = ((dataset.len() as f64) * cfg.validation_split) as usize;
    let train_count = dataset.len() - val_count;
    if train_count == 0 {
        return Err(ModelError::EmptyDataset);
    }

    let mut weights = Weights::<T>::init(spec, cfg.seed)?;
    let mut velocity = Weights::<T>::zeros_like(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_cafe);
    let lr = T::from_f64_lossy(cfg.learning_rate);
    let momentum = T::from_f64_lossy(cfg.momentum);

    let mut train_curve = Vec::with_capacity(cfg.epochs);
    let mut val_curve = Vec::new();
    let mut order: Vec<usize> = (0..train_count).collect();

    for epoch in 0..cfg.epochs {
        // Fisher-Yates with the epoch RNG stream.
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }

        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for batch in order.chunks(cfg.batch_size.max(1)) {
            let mut grads = Weights::<T>::zeros_like(spec);
            let mut batch_loss = T::zero();
            for &idx in batch {
                let (cube, gt) = &dataset[idx];
                let cache = forward_vol(fused_to_vol(cube), &weights);
                batch_loss += backward_from_cache(&cache, gt, &weights, &mut grads)?;
            }
            let inv = T::one() / T::from_usize_lossy(batch.len());
            scale_grads(&mut grads, inv);
            let batch_loss = batch_loss.to_f64().unwrap() / batch.len() as f64;
            if !batch_loss.is_finite() {
                return Err(ModelError::DivergenceDetected { epoch });
            }
            epoch_loss += batch_loss * batch.len() as f64;
            seen += batch.len();

            for ((p, v), g) in weights
                .params
                .iter_mut()
                .zip(velocity.iter_mut())
                .zip(grads.iter())
            {
                for ((pw, vw), gw) in p.w.iter_mut().zip(v.w.iter_mut()).zip(&g.w) {
                    *vw = momentum * *vw - lr * *gw;
                    *pw += *vw;
                }
                for ((pb, vb), gb) in p.b.iter_mut().zip(v.b.iter_mut()).zip(&g.b) {
                    *vb = momentum * *vb - lr * *gb;
                    *pb += *vb;
                }
            }
        }
        train_curve.push(epoch_loss / seen as f64);

        if val_count > 0 {
            let mut acc = 0.0;
            for (cube, gt) in &dataset[train_count..] {
                let pred = forward(cube, &weights)?;
                acc += loss(&pred, gt)?.to_f64().unwrap();
            }
            val_curve.push(acc / val_count as f64);
        }
    }

    Ok(TrainOutcome {
        weights,
        train_loss: train_curve,
        val_loss: val_curve,
    })
}

fn scale_grads<T: Real>(grads: &mut Gradients<T>, factor: T) {
    for g in grads.iter_mut() {
        g.w.iter_mut().for_each(|v| *v *= factor);
        g.b.iter_mut().for_each(|v| *v *= factor);
    }
}
