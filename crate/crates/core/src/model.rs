//! The classifier: two 3-D convolutional branches (one per grid
//! resolution) whose embeddings are concatenated into a small dense
//! head that outputs class probabilities, plus the training loop,
//! evaluation metrics, weight (de)serialization and the quality score.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::activation::{encode_one_hot_into, grid_stats, GridError, MultiResInput, StateCounts};
use crate::features::{ContactClass, LabelBand};
use crate::neural::{
    conv3d_backward, conv3d_forward, cross_entropy_loss_grad, dense_backward, dense_forward,
    dropout_backward, dropout_forward, maxpool2_backward, maxpool2_forward, relu_backward,
    relu_forward, sigmoid_renorm_loss_grad, sigmoid_renorm_probs, softmax_probs, AdamHyper,
    AdamState, BatchNorm, BnCache, NeuralError, PlateauConfig, PlateauScheduler, Scalar, Tensor,
};

/// Score weight per class index (good, bad, neutral): the expected
/// score is the probability-weighted sum of these.
pub const SCORE_WEIGHTS: [f64; 3] = [100.0, 0.0, 50.0];

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(&'static str),
    #[error("input grid resolution {got} does not match the model's {expected}")]
    ResolutionMismatch { expected: usize, got: usize },
    #[error("probabilities do not form a distribution: {0}")]
    NotADistribution(&'static str),
    #[error("dataset problem: {0}")]
    EmptyDataset(&'static str),
    #[error("training set must contain at least 2 distinct classes")]
    SingleClass,
    #[error("training batch size must be >= 2 for batch normalization, got {0}")]
    BatchTooSmall(usize),
    #[error("unsupported weights format version {0}")]
    UnsupportedVersion(u32),
    #[error("weights mismatch: {0}")]
    WeightsMismatch(String),
    #[error(transparent)]
    Neural(#[from] NeuralError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Final probability layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(rename_all = "lowercase")
)]
pub enum OutputHead {
    /// Softmax over the three logits.
    Softmax,
    /// Elementwise sigmoid renormalized to sum to one.
    Sigmoid,
}

/// Architecture and initialization parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetConfig {
    pub coarse_res: usize,
    pub fine_res: usize,
    pub conv1_channels: usize,
    pub conv2_channels: usize,
    pub fine_embed: usize,
    pub coarse_embed: usize,
    pub head_hidden1: usize,
    pub head_hidden2: usize,
    pub dropout: f64,
    pub head: OutputHead,
    pub bn_momentum: f64,
    pub bn_eps: f64,
    pub seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        NetConfig {
            coarse_res: 8,
            fine_res: 16,
            conv1_channels: 8,
            conv2_channels: 16,
            fine_embed: 64,
            coarse_embed: 32,
            head_hidden1: 64,
            head_hidden2: 32,
            dropout: 0.3,
            head: OutputHead::Softmax,
            bn_momentum: 0.9,
            bn_eps: 1e-5,
            seed: 42,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        // Two stride-2 pools per branch need resolutions divisible by 4.
        for r in [self.coarse_res, self.fine_res] {
            if r < 4 || r % 4 != 0 {
                return Err(ModelError::InvalidConfig(
                    "grid resolutions must be >= 4 and divisible by 4",
                ));
            }
        }
        if self.coarse_res >= self.fine_res {
            return Err(ModelError::InvalidConfig(
                "coarse resolution must be strictly below the fine one",
            ));
        }
        if self.conv1_channels == 0
            || self.conv2_channels == 0
            || self.fine_embed == 0
            || self.coarse_embed == 0
            || self.head_hidden1 == 0
            || self.head_hidden2 == 0
        {
            return Err(ModelError::InvalidConfig("layer widths must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::InvalidConfig("dropout must be in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.bn_momentum) || !(self.bn_eps > 0.0) {
            return Err(ModelError::InvalidConfig(
                "bn_momentum must be in [0, 1) and bn_eps positive",
            ));
        }
        Ok(())
    }

    /// Flattened feature count after a branch's conv/pool stack.
    pub fn branch_flat(&self, res: usize) -> usize {
        let side = res / 4;
        self.conv2_channels * side * side * side
    }

    pub fn concat_width(&self) -> usize {
        self.fine_embed + self.coarse_embed
    }
}

// ---------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------

fn uniform_init<T: Scalar, R: Rng>(rng: &mut R, count: usize, fan_in: usize) -> Vec<T> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    (0..count)
        .map(|_| T::from_f64(rng.gen_range(-bound..bound)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
struct ConvLayer<T> {
    kernels: Tensor<T>,
    bias: Vec<T>,
}

impl<T: Scalar> ConvLayer<T> {
    fn init<R: Rng>(rng: &mut R, c_out: usize, c_in: usize, k: usize) -> Self {
        let fan_in = c_in * k * k * k;
        ConvLayer {
            kernels: Tensor::from_vec(
                &[c_out, c_in, k, k, k],
                uniform_init(rng, c_out * fan_in, fan_in),
            )
            .expect("shape matches the draw count"),
            bias: vec![T::zero(); c_out],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct DenseLayer<T> {
    weights: Tensor<T>,
    bias: Vec<T>,
}

impl<T: Scalar> DenseLayer<T> {
    fn init<R: Rng>(rng: &mut R, f_out: usize, f_in: usize) -> Self {
        DenseLayer {
            weights: Tensor::from_vec(&[f_out, f_in], uniform_init(rng, f_out * f_in, f_in))
                .expect("shape matches the draw count"),
            bias: vec![T::zero(); f_out],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Branch<T> {
    conv1: ConvLayer<T>,
    bn1: BatchNorm<T>,
    conv2: ConvLayer<T>,
    bn2: BatchNorm<T>,
    embed: DenseLayer<T>,
}

struct BranchCache<T> {
    input: Tensor<T>,
    bn1_cache: BnCache<T>,
    bn1_out: Tensor<T>,
    pool1_in_shape: Vec<usize>,
    pool1_argmax: Vec<usize>,
    pool1_out: Tensor<T>,
    bn2_cache: BnCache<T>,
    bn2_out: Tensor<T>,
    pool2_in_shape: Vec<usize>,
    pool2_argmax: Vec<usize>,
    pool2_out_shape: Vec<usize>,
    flat: Tensor<T>,
}

struct BranchGrads<T> {
    conv1_kernels: Tensor<T>,
    conv1_bias: Vec<T>,
    bn1_gamma: Vec<T>,
    bn1_beta: Vec<T>,
    conv2_kernels: Tensor<T>,
    conv2_bias: Vec<T>,
    bn2_gamma: Vec<T>,
    bn2_beta: Vec<T>,
    embed_weights: Tensor<T>,
    embed_bias: Vec<T>,
}

impl<T: Scalar> Branch<T> {
    fn init<R: Rng>(rng: &mut R, config: &NetConfig, res: usize, embed_dim: usize) -> Self {
        let conv1 = ConvLayer::init(rng, config.conv1_channels, 4, 3);
        let conv2 = ConvLayer::init(rng, config.conv2_channels, config.conv1_channels, 3);
        let embed = DenseLayer::init(rng, embed_dim, config.branch_flat(res));
        Branch {
            conv1,
            bn1: BatchNorm::identity(config.conv1_channels, config.bn_momentum, config.bn_eps),
            conv2,
            bn2: BatchNorm::identity(config.conv2_channels, config.bn_momentum, config.bn_eps),
            embed,
        }
    }

    fn forward_train(
        &mut self,
        input: &Tensor<T>,
    ) -> Result<(Tensor<T>, BranchCache<T>), ModelError> {
        let n = input.shape()[0];
        let x1 = conv3d_forward(input, &self.conv1.kernels, &self.conv1.bias, 1)?;
        let (b1, bn1_cache) = self.bn1.forward_train(&x1)?;
        let r1 = relu_forward(&b1);
        let pool1_in_shape = r1.shape().to_vec();
        let (p1, pool1_argmax) = maxpool2_forward(&r1)?;
        let x2 = conv3d_forward(&p1, &self.conv2.kernels, &self.conv2.bias, 1)?;
        let (b2, bn2_cache) = self.bn2.forward_train(&x2)?;
        let r2 = relu_forward(&b2);
        let pool2_in_shape = r2.shape().to_vec();
        let (p2, pool2_argmax) = maxpool2_forward(&r2)?;
        let pool2_out_shape = p2.shape().to_vec();
        let flat = p2.reshaped(&[n, pool2_out_shape[1..].iter().product()])?;
        let out = dense_forward(&flat, &self.embed.weights, &self.embed.bias)?;
        Ok((
            out,
            BranchCache {
                input: input.clone(),
                bn1_cache,
                bn1_out: b1,
                pool1_in_shape,
                pool1_argmax,
                pool1_out: p1,
                bn2_cache,
                bn2_out: b2,
                pool2_in_shape,
                pool2_argmax,
                pool2_out_shape,
                flat,
            },
        ))
    }

    fn forward_eval(&self, input: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        let n = input.shape()[0];
        let x1 = conv3d_forward(input, &self.conv1.kernels, &self.conv1.bias, 1)?;
        let b1 = self.bn1.forward_eval(&x1)?;
        let (p1, _) = maxpool2_forward(&relu_forward(&b1))?;
        let x2 = conv3d_forward(&p1, &self.conv2.kernels, &self.conv2.bias, 1)?;
        let b2 = self.bn2.forward_eval(&x2)?;
        let (p2, _) = maxpool2_forward(&relu_forward(&b2))?;
        let flat_dim = p2.shape()[1..].iter().product();
        let flat = p2.reshaped(&[n, flat_dim])?;
        Ok(dense_forward(&flat, &self.embed.weights, &self.embed.bias)?)
    }

    fn backward(
        &self,
        cache: &BranchCache<T>,
        grad_embed: &Tensor<T>,
    ) -> Result<BranchGrads<T>, ModelError> {
        let (g_flat, embed_weights, embed_bias) =
            dense_backward(&cache.flat, &self.embed.weights, grad_embed)?;
        let g_p2 = g_flat.reshaped(&cache.pool2_out_shape)?;
        let g_r2 = maxpool2_backward(&cache.pool2_in_shape, &cache.pool2_argmax, &g_p2)?;
        let g_b2 = relu_backward(&cache.bn2_out, &g_r2)?;
        let (g_x2, bn2_gamma, bn2_beta) = self.bn2.backward(&cache.bn2_cache, &g_b2)?;
        let (g_p1, conv2_kernels, conv2_bias) =
            conv3d_backward(&cache.pool1_out, &self.conv2.kernels, &g_x2, 1)?;
        let g_r1 = maxpool2_backward(&cache.pool1_in_shape, &cache.pool1_argmax, &g_p1)?;
        let g_b1 = relu_backward(&cache.bn1_out, &g_r1)?;
        let (g_x1, bn1_gamma, bn1_beta) = self.bn1.backward(&cache.bn1_cache, &g_b1)?;
        let (_, conv1_kernels, conv1_bias) =
            conv3d_backward(&cache.input, &self.conv1.kernels, &g_x1, 1)?;
        Ok(BranchGrads {
            conv1_kernels,
            conv1_bias,
            bn1_gamma,
            bn1_beta,
            conv2_kernels,
            conv2_bias,
            bn2_gamma,
            bn2_beta,
            embed_weights,
            embed_bias,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Head<T> {
    fc1: DenseLayer<T>,
    fc2: DenseLayer<T>,
    out: DenseLayer<T>,
}

struct HeadCache<T> {
    concat: Tensor<T>,
    z1: Tensor<T>,
    d1: Tensor<T>,
    mask1: Vec<T>,
    z2: Tensor<T>,
    d2: Tensor<T>,
    mask2: Vec<T>,
}

struct HeadGrads<T> {
    fc1_weights: Tensor<T>,
    fc1_bias: Vec<T>,
    fc2_weights: Tensor<T>,
    fc2_bias: Vec<T>,
    out_weights: Tensor<T>,
    out_bias: Vec<T>,
    concat: Tensor<T>,
}

impl<T: Scalar> Head<T> {
    fn init<R: Rng>(rng: &mut R, config: &NetConfig) -> Self {
        Head {
            fc1: DenseLayer::init(rng, config.head_hidden1, config.concat_width()),
            fc2: DenseLayer::init(rng, config.head_hidden2, config.head_hidden1),
            out: DenseLayer::init(rng, 3, config.head_hidden2),
        }
    }

    fn forward_train<R: Rng>(
        &self,
        concat: &Tensor<T>,
        dropout: f64,
        rng: &mut R,
    ) -> Result<(Tensor<T>, HeadCache<T>), ModelError> {
        let z1 = dense_forward(concat, &self.fc1.weights, &self.fc1.bias)?;
        let (d1, mask1) = dropout_forward(&relu_forward(&z1), dropout, rng)?;
        let z2 = dense_forward(&d1, &self.fc2.weights, &self.fc2.bias)?;
        let (d2, mask2) = dropout_forward(&relu_forward(&z2), dropout, rng)?;
        let logits = dense_forward(&d2, &self.out.weights, &self.out.bias)?;
        Ok((
            logits,
            HeadCache {
                concat: concat.clone(),
                z1,
                d1,
                mask1,
                z2,
                d2,
                mask2,
            },
        ))
    }

    fn forward_eval(&self, concat: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        let a1 = relu_forward(&dense_forward(concat, &self.fc1.weights, &self.fc1.bias)?);
        let a2 = relu_forward(&dense_forward(&a1, &self.fc2.weights, &self.fc2.bias)?);
        Ok(dense_forward(&a2, &self.out.weights, &self.out.bias)?)
    }

    fn backward(
        &self,
        cache: &HeadCache<T>,
        grad_logits: &Tensor<T>,
    ) -> Result<HeadGrads<T>, ModelError> {
        let (g_d2, out_weights, out_bias) =
            dense_backward(&cache.d2, &self.out.weights, grad_logits)?;
        let g_r2 = dropout_backward(&cache.mask2, &g_d2)?;
        let g_z2 = relu_backward(&cache.z2, &g_r2)?;
        let (g_d1, fc2_weights, fc2_bias) = dense_backward(&cache.d1, &self.fc2.weights, &g_z2)?;
        let g_r1 = dropout_backward(&cache.mask1, &g_d1)?;
        let g_z1 = relu_backward(&cache.z1, &g_r1)?;
        let (concat, fc1_weights, fc1_bias) =
            dense_backward(&cache.concat, &self.fc1.weights, &g_z1)?;
        Ok(HeadGrads {
            fc1_weights,
            fc1_bias,
            fc2_weights,
            fc2_bias,
            out_weights,
            out_bias,
            concat,
        })
    }
}

// ---------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------

/// One-hot encoded batch, ready for the two branches.
#[derive(Debug, Clone)]
pub struct BatchInput<T> {
    pub fine: Tensor<T>,
    pub coarse: Tensor<T>,
    pub len: usize,
}

/// Opaque forward state handed back to [`Model::backward`].
pub struct TrainCache<T> {
    fine: BranchCache<T>,
    coarse: BranchCache<T>,
    head: HeadCache<T>,
}

/// All parameter gradients in the model's canonical slot order.
pub struct Gradients<T> {
    fine: BranchGrads<T>,
    coarse: BranchGrads<T>,
    head: HeadGrads<T>,
}

fn branch_grad_slots<T: Scalar>(g: &BranchGrads<T>) -> Vec<&[T]> {
    vec![
        g.conv1_kernels.data(),
        &g.conv1_bias,
        &g.bn1_gamma,
        &g.bn1_beta,
        g.conv2_kernels.data(),
        &g.conv2_bias,
        &g.bn2_gamma,
        &g.bn2_beta,
        g.embed_weights.data(),
        &g.embed_bias,
    ]
}

impl<T: Scalar> Gradients<T> {
    fn slots(&self) -> Vec<&[T]> {
        let mut out = branch_grad_slots(&self.fine);
        out.extend(branch_grad_slots(&self.coarse));
        out.extend([
            self.head.fc1_weights.data(),
            self.head.fc1_bias.as_slice(),
            self.head.fc2_weights.data(),
            self.head.fc2_bias.as_slice(),
            self.head.out_weights.data(),
            self.head.out_bias.as_slice(),
        ]);
        out
    }

    /// Concatenation of every slot, canonical order.
    pub fn flatten(&self) -> Vec<T> {
        let mut out = Vec::new();
        for s in self.slots() {
            out.extend_from_slice(s);
        }
        out
    }
}

fn branch_param_slots<T: Scalar>(br: &Branch<T>) -> Vec<&[T]> {
    vec![
        br.conv1.kernels.data(),
        &br.conv1.bias,
        &br.bn1.gamma,
        &br.bn1.beta,
        br.conv2.kernels.data(),
        &br.conv2.bias,
        &br.bn2.gamma,
        &br.bn2.beta,
        br.embed.weights.data(),
        &br.embed.bias,
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model<T> {
    config: NetConfig,
    fine: Branch<T>,
    coarse: Branch<T>,
    head: Head<T>,
}

impl<T: Scalar> Model<T> {
    /// Fresh model with deterministic initialization from the config
    /// seed: weights uniform in +-1/sqrt(fan_in) drawn in construction
    /// order (fine branch, coarse branch, head), biases zero, batch
    /// norm at identity.
    pub fn build(config: NetConfig) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let fine = Branch::init(&mut rng, &config, config.fine_res, config.fine_embed);
        let coarse = Branch::init(&mut rng, &config, config.coarse_res, config.coarse_embed);
        let head = Head::init(&mut rng, &config);
        Ok(Model {
            config,
            fine,
            coarse,
            head,
        })
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    fn param_slots_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = Vec::with_capacity(26);
        for branch in [&mut self.fine, &mut self.coarse] {
            out.push(branch.conv1.kernels.data_mut());
            out.push(&mut branch.conv1.bias);
            out.push(&mut branch.bn1.gamma);
            out.push(&mut branch.bn1.beta);
            out.push(branch.conv2.kernels.data_mut());
            out.push(&mut branch.conv2.bias);
            out.push(&mut branch.bn2.gamma);
            out.push(&mut branch.bn2.beta);
            out.push(branch.embed.weights.data_mut());
            out.push(&mut branch.embed.bias);
        }
        out.push(self.head.fc1.weights.data_mut());
        out.push(&mut self.head.fc1.bias);
        out.push(self.head.fc2.weights.data_mut());
        out.push(&mut self.head.fc2.bias);
        out.push(self.head.out.weights.data_mut());
        out.push(&mut self.head.out.bias);
        out
    }

    fn param_slots(&self) -> Vec<&[T]> {
        let mut out = branch_param_slots(&self.fine);
        out.extend(branch_param_slots(&self.coarse));
        out.extend([
            self.head.fc1.weights.data(),
            self.head.fc1.bias.as_slice(),
            self.head.fc2.weights.data(),
            self.head.fc2.bias.as_slice(),
            self.head.out.weights.data(),
            self.head.out.bias.as_slice(),
        ]);
        out
    }

    pub fn slot_sizes(&self) -> Vec<usize> {
        self.param_slots().iter().map(|s| s.len()).collect()
    }

    /// Trainable parameter count (batch-norm running stats excluded).
    pub fn num_params(&self) -> usize {
        self.param_slots().iter().map(|s| s.len()).sum()
    }

    /// All trainable parameters flattened in canonical slot order.
    pub fn params_flat(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_params());
        for s in self.param_slots() {
            out.extend_from_slice(s);
        }
        out
    }

    /// Overwrite all trainable parameters from a flat vector laid out
    /// like [`Model::params_flat`].
    pub fn set_params_flat(&mut self, flat: &[T]) -> Result<(), ModelError> {
        if flat.len() != self.num_params() {
            return Err(ModelError::WeightsMismatch(format!(
                "expected {} parameters, got {}",
                self.num_params(),
                flat.len()
            )));
        }
        let mut offset = 0;
        for slot in self.param_slots_mut() {
            slot.copy_from_slice(&flat[offset..offset + slot.len()]);
            offset += slot.len();
        }
        Ok(())
    }

    fn check_batch(&self, batch: &BatchInput<T>) -> Result<(), ModelError> {
        for (t, res) in [
            (&batch.fine, self.config.fine_res),
            (&batch.coarse, self.config.coarse_res),
        ] {
            let s = t.shape();
            if s.len() != 5 || s[1] != 4 || s[2] != res || s[3] != res || s[4] != res {
                return Err(ModelError::ResolutionMismatch {
                    expected: res,
                    got: if s.len() == 5 { s[2] } else { 0 },
                });
            }
            if s[0] != batch.len {
                return Err(ModelError::EmptyDataset("batch length mismatch"));
            }
        }
        Ok(())
    }

    /// Training-mode forward: batch statistics, dropout live, running
    /// stats updated. Returns logits and the cache for `backward`.
    pub fn forward_train<R: Rng>(
        &mut self,
        batch: &BatchInput<T>,
        rng: &mut R,
    ) -> Result<(Tensor<T>, TrainCache<T>), ModelError> {
        self.check_batch(batch)?;
        let (fe, fine) = self.fine.forward_train(&batch.fine)?;
        let (ce, coarse) = self.coarse.forward_train(&batch.coarse)?;
        let concat = concat_cols(&fe, &ce)?;
        let (logits, head) = self.head.forward_train(&concat, self.config.dropout, rng)?;
        Ok((logits, TrainCache { fine, coarse, head }))
    }

    /// Eval-mode forward: running statistics, no dropout, no mutation.
    pub fn forward_eval(&self, batch: &BatchInput<T>) -> Result<Tensor<T>, ModelError> {
        self.check_batch(batch)?;
        let fe = self.fine.forward_eval(&batch.fine)?;
        let ce = self.coarse.forward_eval(&batch.coarse)?;
        let concat = concat_cols(&fe, &ce)?;
        self.head.forward_eval(&concat)
    }

    /// Class probabilities for logits under the configured head.
    pub fn probs(&self, logits: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        Ok(match self.config.head {
            OutputHead::Softmax => softmax_probs(logits)?,
            OutputHead::Sigmoid => sigmoid_renorm_probs(logits)?,
        })
    }

    /// Mean cross-entropy and logit gradient under the configured head.
    pub fn loss_grad(
        &self,
        logits: &Tensor<T>,
        labels: &[usize],
    ) -> Result<(f64, Tensor<T>), ModelError> {
        Ok(match self.config.head {
            OutputHead::Softmax => cross_entropy_loss_grad(logits, labels)?,
            OutputHead::Sigmoid => sigmoid_renorm_loss_grad(logits, labels)?,
        })
    }

    /// Backpropagate a logit gradient through the whole network.
    pub fn backward(
        &self,
        cache: &TrainCache<T>,
        grad_logits: &Tensor<T>,
    ) -> Result<Gradients<T>, ModelError> {
        let head = self.head.backward(&cache.head, grad_logits)?;
        let (g_fine, g_coarse) = split_cols(
            &head.concat,
            self.config.fine_embed,
            self.config.coarse_embed,
        )?;
        let fine = self.fine.backward(&cache.fine, &g_fine)?;
        let coarse = self.coarse.backward(&cache.coarse, &g_coarse)?;
        Ok(Gradients { fine, coarse, head })
    }

    /// One optimizer step from precomputed gradients.
    pub fn apply_gradients(
        &mut self,
        opt: &mut AdamState<T>,
        grads: &Gradients<T>,
    ) -> Result<(), ModelError> {
        let grad_slots = grads.slots();
        let mut params = self.param_slots_mut();
        opt.step(&mut params, &grad_slots)?;
        Ok(())
    }
}

fn concat_cols<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.len() != 2 || sb.len() != 2 || sa[0] != sb[0] {
        return Err(ModelError::Neural(NeuralError::BadShape {
            op: "concat",
            expected: "two rank-2 tensors with equal row counts",
            got: sb.to_vec(),
        }));
    }
    let (n, wa, wb) = (sa[0], sa[1], sb[1]);
    let mut out = Tensor::zeros(&[n, wa + wb]);
    for i in 0..n {
        out.data_mut()[i * (wa + wb)..i * (wa + wb) + wa]
            .copy_from_slice(&a.data()[i * wa..(i + 1) * wa]);
        out.data_mut()[i * (wa + wb) + wa..(i + 1) * (wa + wb)]
            .copy_from_slice(&b.data()[i * wb..(i + 1) * wb]);
    }
    Ok(out)
}

fn split_cols<T: Scalar>(
    joint: &Tensor<T>,
    wa: usize,
    wb: usize,
) -> Result<(Tensor<T>, Tensor<T>), ModelError> {
    let s = joint.shape();
    if s.len() != 2 || s[1] != wa + wb {
        return Err(ModelError::Neural(NeuralError::BadShape {
            op: "split",
            expected: "rank-2 tensor with width wa + wb",
            got: s.to_vec(),
        }));
    }
    let n = s[0];
    let mut a = Tensor::zeros(&[n, wa]);
    let mut b = Tensor::zeros(&[n, wb]);
    for i in 0..n {
        a.data_mut()[i * wa..(i + 1) * wa]
            .copy_from_slice(&joint.data()[i * (wa + wb)..i * (wa + wb) + wa]);
        b.data_mut()[i * wb..(i + 1) * wb]
            .copy_from_slice(&joint.data()[i * (wa + wb) + wa..(i + 1) * (wa + wb)]);
    }
    Ok((a, b))
}

/// One-hot encode grids into a batch; every grid must match the model
/// resolutions.
pub fn encode_batch<T: Scalar>(
    inputs: &[&MultiResInput],
    config: &NetConfig,
) -> Result<BatchInput<T>, ModelError> {
    if inputs.is_empty() {
        return Err(ModelError::EmptyDataset("no inputs to encode"));
    }
    let n = inputs.len();
    let (rf, rc) = (config.fine_res, config.coarse_res);
    let fine_stride = 4 * rf * rf * rf;
    let coarse_stride = 4 * rc * rc * rc;
    let mut fine = Tensor::zeros(&[n, 4, rf, rf, rf]);
    let mut coarse = Tensor::zeros(&[n, 4, rc, rc, rc]);
    for (i, mr) in inputs.iter().enumerate() {
        if mr.fine.resolution() != rf {
            return Err(ModelError::ResolutionMismatch {
                expected: rf,
                got: mr.fine.resolution(),
            });
        }
        if mr.coarse.resolution() != rc {
            return Err(ModelError::ResolutionMismatch {
                expected: rc,
                got: mr.coarse.resolution(),
            });
        }
        encode_one_hot_into(
            &mr.fine,
            &mut fine.data_mut()[i * fine_stride..(i + 1) * fine_stride],
        );
        encode_one_hot_into(
            &mr.coarse,
            &mut coarse.data_mut()[i * coarse_stride..(i + 1) * coarse_stride],
        );
    }
    Ok(BatchInput { fine, coarse, len: n })
}

// ---------------------------------------------------------------------
// Quality score
// ---------------------------------------------------------------------

/// Renormalize probabilities widened from a lower-precision network so
/// they sum to 1 in f64; keeps the folded score inside [0, 100] even
/// when one class saturates.
fn normalized_probabilities(raw: [f64; 3]) -> [f64; 3] {
    let total: f64 = raw.iter().sum();
    [raw[0] / total, raw[1] / total, raw[2] / total]
}

/// Expected score of a class distribution `[p_good, p_bad, p_neutral]`:
/// `100 * p_good + 0 * p_bad + 50 * p_neutral`, always in [0, 100].
pub fn quality_score(probs: &[f64; 3]) -> Result<f64, ModelError> {
    let mut sum = 0.0;
    for &p in probs {
        if !p.is_finite() || !(-1e-9..=1.0 + 1e-9).contains(&p) {
            return Err(ModelError::NotADistribution(
                "probabilities must lie in [0, 1]",
            ));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-6 {
        return Err(ModelError::NotADistribution("probabilities must sum to 1"));
    }
    Ok(SCORE_WEIGHTS[0] * probs[0] + SCORE_WEIGHTS[1] * probs[1] + SCORE_WEIGHTS[2] * probs[2])
}

/// Scoring outcome for one pair.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScoreReport {
    pub probabilities: [f64; 3],
    pub score: f64,
    pub predicted: u8,
    pub coarse_stats: StateCounts,
    pub fine_stats: StateCounts,
}

impl ScoreReport {
    pub fn predicted_class(&self) -> ContactClass {
        ContactClass::from_label(self.predicted).expect("stored label is valid")
    }
}

/// Bin, encode, run the network in eval mode and fold the class
/// probabilities into the score.
pub fn score_input<T: Scalar>(
    model: &Model<T>,
    input: &MultiResInput,
) -> Result<ScoreReport, ModelError> {
    let batch = encode_batch::<T>(&[input], model.config())?;
    let logits = model.forward_eval(&batch)?;
    let probs_t = model.probs(&logits)?;
    let p = probs_t.data();
    let probabilities = normalized_probabilities([p[0].to_f64(), p[1].to_f64(), p[2].to_f64()]);
    let score = quality_score(&probabilities)?;
    let predicted = ContactClass::from_index(crate::neural::argmax_row(p))
        .expect("3 classes")
        .label();
    Ok(ScoreReport {
        probabilities,
        score,
        predicted,
        coarse_stats: grid_stats(&input.coarse),
        fine_stats: grid_stats(&input.fine),
    })
}

// ---------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------

/// One labeled training/evaluation example.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub input: MultiResInput,
    pub class: ContactClass,
    pub band: LabelBand,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Early stop after this many epochs without significant
    /// validation improvement; best weights are restored.
    pub patience: usize,
    pub min_delta: f64,
    pub shuffle_seed: u64,
    pub plateau: PlateauConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            batch_size: 16,
            max_epochs: 200,
            patience: 20,
            min_delta: 1e-4,
            shuffle_seed: 42,
            plateau: PlateauConfig::default(),
        }
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    pub lr: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: Model<T>,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

fn batch_of<T: Scalar>(
    samples: &[TrainSample],
    idxs: &[usize],
    config: &NetConfig,
) -> Result<(BatchInput<T>, Vec<usize>), ModelError> {
    let inputs: Vec<&MultiResInput> = idxs.iter().map(|&i| &samples[i].input).collect();
    let labels: Vec<usize> = idxs.iter().map(|&i| samples[i].class.index()).collect();
    Ok((encode_batch(&inputs, config)?, labels))
}

fn eval_loss_acc<T: Scalar>(
    model: &Model<T>,
    samples: &[TrainSample],
    batch_size: usize,
) -> Result<(f64, f64), ModelError> {
    let idxs: Vec<usize> = (0..samples.len()).collect();
    let mut loss_sum = 0.0;
    let mut correct = 0usize;
    for chunk in idxs.chunks(batch_size.max(1)) {
        let (batch, labels) = batch_of::<T>(samples, chunk, model.config())?;
        let logits = model.forward_eval(&batch)?;
        let (loss, _) = model.loss_grad(&logits, &labels)?;
        loss_sum += loss * chunk.len() as f64;
        for (row, &y) in logits.data().chunks(3).zip(&labels) {
            if crate::neural::argmax_row(row) == y {
                correct += 1;
            }
        }
    }
    Ok((
        loss_sum / samples.len() as f64,
        correct as f64 / samples.len() as f64,
    ))
}

/// Full training loop: shuffled mini-batches, Adam, plateau-scheduled
/// learning rate, early stopping with best-weight restore. Entirely
/// deterministic for a fixed model seed, data and config.
pub fn train<T: Scalar>(
    mut model: Model<T>,
    train_set: &[TrainSample],
    val_set: &[TrainSample],
    config: &TrainConfig,
) -> Result<TrainOutcome<T>, ModelError> {
    if train_set.is_empty() {
        return Err(ModelError::EmptyDataset("training split is empty"));
    }
    if val_set.is_empty() {
        return Err(ModelError::EmptyDataset("validation split is empty"));
    }
    if config.batch_size < 2 {
        return Err(ModelError::BatchTooSmall(config.batch_size));
    }
    {
        let first = train_set[0].class;
        if train_set.iter().all(|s| s.class == first) {
            return Err(ModelError::SingleClass);
        }
    }

    let mut opt = AdamState::<T>::new(
        &model.slot_sizes(),
        AdamHyper {
            lr: config.lr,
            ..AdamHyper::default()
        },
    );
    let mut scheduler = PlateauScheduler::new(config.plateau)?;
    let mut best = model.clone();
    let mut best_val_loss = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut stale = 0usize;
    let mut stopped_early = false;
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=config.max_epochs {
        let epoch_seed = config
            .shuffle_seed
            .wrapping_add((epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed);
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        let mut correct = 0usize;
        for chunk in order.chunks(config.batch_size) {
            if chunk.len() < 2 {
                continue; // batch norm needs at least 2 rows
            }
            let (batch, labels) = batch_of::<T>(train_set, chunk, model.config())?;
            let (logits, cache) = model.forward_train(&batch, &mut rng)?;
            let (loss, grad_logits) = model.loss_grad(&logits, &labels)?;
            for (row, &y) in logits.data().chunks(3).zip(&labels) {
                if crate::neural::argmax_row(row) == y {
                    correct += 1;
                }
            }
            loss_sum += loss * chunk.len() as f64;
            seen += chunk.len();
            let grads = model.backward(&cache, &grad_logits)?;
            model.apply_gradients(&mut opt, &grads)?;
        }
        if seen == 0 {
            return Err(ModelError::EmptyDataset(
                "every batch was smaller than 2; add data or shrink the batch size",
            ));
        }

        let (val_loss, val_accuracy) = eval_loss_acc(&model, val_set, config.batch_size)?;
        let lr_now = scheduler.observe(val_loss, opt.lr());
        opt.set_lr(lr_now);

        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / seen as f64,
            train_accuracy: correct as f64 / seen as f64,
            val_loss,
            val_accuracy,
            lr: lr_now,
        });

        if val_loss < best_val_loss - config.min_delta {
            best_val_loss = val_loss;
            best_epoch = epoch;
            best = model.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                stopped_early = true;
                break;
            }
        }
    }

    Ok(TrainOutcome {
        model: best,
        history,
        best_epoch,
        best_val_loss,
        stopped_early,
    })
}

// ---------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------

/// Per-sample outcome within an evaluation run.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleEval {
    pub label: u8,
    pub predicted: u8,
    pub score: f64,
    pub band_lo: f64,
    pub band_hi: f64,
    pub in_band: bool,
}

/// Aggregate metrics over a labeled set.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub count: usize,
    pub accuracy: f64,
    /// `confusion[true][predicted]`, classes in label order 1, 2, 3.
    pub confusion: [[usize; 3]; 3],
    pub precision: [f64; 3],
    pub recall: [f64; 3],
    pub in_band_rate: f64,
    /// Mean |score - band midpoint|.
    pub mean_band_distance: f64,
    pub samples: Vec<SampleEval>,
}

/// Score every sample in eval mode and compare against its label band.
pub fn evaluate<T: Scalar>(
    model: &Model<T>,
    samples: &[TrainSample],
    batch_size: usize,
) -> Result<EvalReport, ModelError> {
    if samples.is_empty() {
        return Err(ModelError::EmptyDataset("nothing to evaluate"));
    }
    let idxs: Vec<usize> = (0..samples.len()).collect();
    let mut confusion = [[0usize; 3]; 3];
    let mut outcomes = Vec::with_capacity(samples.len());
    let mut in_band_count = 0usize;
    let mut band_dist_sum = 0.0;

    for chunk in idxs.chunks(batch_size.max(1)) {
        let (batch, labels) = batch_of::<T>(samples, chunk, model.config())?;
        let logits = model.forward_eval(&batch)?;
        let probs = model.probs(&logits)?;
        for ((row, &y), &i) in probs.data().chunks(3).zip(&labels).zip(chunk) {
            let p = normalized_probabilities([row[0].to_f64(), row[1].to_f64(), row[2].to_f64()]);
            let score = quality_score(&p)?;
            let pred = crate::neural::argmax_row(row);
            confusion[y][pred] += 1;
            let band = samples[i].band;
            let in_band = band.contains(score);
            if in_band {
                in_band_count += 1;
            }
            band_dist_sum += (score - (band.lo + band.hi) / 2.0).abs();
            outcomes.push(SampleEval {
                label: ContactClass::from_index(y).expect("3 classes").label(),
                predicted: ContactClass::from_index(pred).expect("3 classes").label(),
                score,
                band_lo: band.lo,
                band_hi: band.hi,
                in_band,
            });
        }
    }

    let n = samples.len();
    let correct: usize = (0..3).map(|c| confusion[c][c]).sum();
    let mut precision = [0.0; 3];
    let mut recall = [0.0; 3];
    for c in 0..3 {
        let pred_c: usize = (0..3).map(|t| confusion[t][c]).sum();
        let true_c: usize = confusion[c].iter().sum();
        precision[c] = if pred_c > 0 {
            confusion[c][c] as f64 / pred_c as f64
        } else {
            0.0
        };
        recall[c] = if true_c > 0 {
            confusion[c][c] as f64 / true_c as f64
        } else {
            0.0
        };
    }
    Ok(EvalReport {
        count: n,
        accuracy: correct as f64 / n as f64,
        confusion,
        precision,
        recall,
        in_band_rate: in_band_count as f64 / n as f64,
        mean_band_distance: band_dist_sum / n as f64,
        samples: outcomes,
    })
}

// ---------------------------------------------------------------------
// Weight serialization
// ---------------------------------------------------------------------

pub const WEIGHTS_FORMAT_VERSION: u32 = 1;

/// One named tensor in the portable weights structure.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeightTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f32>,
}

/// Portable snapshot of a trained model: config plus every parameter
/// and batch-norm running statistic as named tensors.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelWeights {
    pub format_version: u32,
    pub config: NetConfig,
    pub tensors: Vec<WeightTensor>,
}

fn tensor_entry(name: &str, shape: &[usize], values: &[f32]) -> WeightTensor {
    WeightTensor {
        name: name.to_string(),
        shape: shape.to_vec(),
        values: values.to_vec(),
    }
}

impl Model<f32> {
    pub fn to_weights(&self) -> ModelWeights {
        let mut tensors = Vec::new();
        for (prefix, br) in [("fine", &self.fine), ("coarse", &self.coarse)] {
            tensors.push(tensor_entry(
                &format!("{prefix}.conv1.kernels"),
                br.conv1.kernels.shape(),
                br.conv1.kernels.data(),
            ));
            tensors.push(tensor_entry(
                &format!("{prefix}.conv1.bias"),
                &[br.conv1.bias.len()],
                &br.conv1.bias,
            ));
            for (bn_name, bn) in [("bn1", &br.bn1), ("bn2", &br.bn2)] {
                tensors.push(tensor_entry(
                    &format!("{prefix}.{bn_name}.gamma"),
                    &[bn.gamma.len()],
                    &bn.gamma,
                ));
                tensors.push(tensor_entry(
                    &format!("{prefix}.{bn_name}.beta"),
                    &[bn.beta.len()],
                    &bn.beta,
                ));
                tensors.push(tensor_entry(
                    &format!("{prefix}.{bn_name}.running_mean"),
                    &[bn.running_mean.len()],
                    &bn.running_mean,
                ));
                tensors.push(tensor_entry(
                    &format!("{prefix}.{bn_name}.running_var"),
                    &[bn.running_var.len()],
                    &bn.running_var,
                ));
            }
            tensors.push(tensor_entry(
                &format!("{prefix}.conv2.kernels"),
                br.conv2.kernels.shape(),
                br.conv2.kernels.data(),
            ));
            tensors.push(tensor_entry(
                &format!("{prefix}.conv2.bias"),
                &[br.conv2.bias.len()],
                &br.conv2.bias,
            ));
            tensors.push(tensor_entry(
                &format!("{prefix}.embed.weights"),
                br.embed.weights.shape(),
                br.embed.weights.data(),
            ));
            tensors.push(tensor_entry(
                &format!("{prefix}.embed.bias"),
                &[br.embed.bias.len()],
                &br.embed.bias,
            ));
        }
        for (name, layer) in [
            ("head.fc1", &self.head.fc1),
            ("head.fc2", &self.head.fc2),
            ("head.out", &self.head.out),
        ] {
            tensors.push(tensor_entry(
                &format!("{name}.weights"),
                layer.weights.shape(),
                layer.weights.data(),
            ));
            tensors.push(tensor_entry(
                &format!("{name}.bias"),
                &[layer.bias.len()],
                &layer.bias,
            ));
        }
        ModelWeights {
            format_version: WEIGHTS_FORMAT_VERSION,
            config: self.config,
            tensors,
        }
    }

    pub fn from_weights(weights: &ModelWeights) -> Result<Model<f32>, ModelError> {
        if weights.format_version != WEIGHTS_FORMAT_VERSION {
            return Err(ModelError::UnsupportedVersion(weights.format_version));
        }
        let mut model = Model::<f32>::build(weights.config)?;
        let expected = model.to_weights();
        if weights.tensors.len() != expected.tensors.len() {
            return Err(ModelError::WeightsMismatch(format!(
                "expected {} tensors, got {}",
                expected.tensors.len(),
                weights.tensors.len()
            )));
        }
        let take = |name: &str, shape: &[usize]| -> Result<Vec<f32>, ModelError> {
            let t = weights
                .tensors
                .iter()
                .find(|t| t.name == name)
                .ok_or_else(|| ModelError::WeightsMismatch(format!("missing tensor '{name}'")))?;
            if t.shape != shape {
                return Err(ModelError::WeightsMismatch(format!(
                    "tensor '{name}' has shape {:?}, expected {:?}",
                    t.shape, shape
                )));
            }
            let count: usize = shape.iter().product();
            if t.values.len() != count {
                return Err(ModelError::WeightsMismatch(format!(
                    "tensor '{name}' has {} values, expected {count}",
                    t.values.len()
                )));
            }
            if t.values.iter().any(|v| !v.is_finite()) {
                return Err(ModelError::WeightsMismatch(format!(
                    "tensor '{name}' contains non-finite values"
                )));
            }
            Ok(t.values.clone())
        };
        {
            let branches: [(&str, &mut Branch<f32>); 2] = [
                ("fine", &mut model.fine),
                ("coarse", &mut model.coarse),
            ];
            for (prefix, br) in branches {
                let v = take(
                    &format!("{prefix}.conv1.kernels"),
                    br.conv1.kernels.shape(),
                )?;
                br.conv1.kernels.data_mut().copy_from_slice(&v);
                br.conv1.bias =
                    take(&format!("{prefix}.conv1.bias"), &[br.conv1.bias.len()])?;
                let v = take(
                    &format!("{prefix}.conv2.kernels"),
                    br.conv2.kernels.shape(),
                )?;
                br.conv2.kernels.data_mut().copy_from_slice(&v);
                br.conv2.bias =
                    take(&format!("{prefix}.conv2.bias"), &[br.conv2.bias.len()])?;
                for (bn_name, bn) in [("bn1", &mut br.bn1), ("bn2", &mut br.bn2)] {
                    let c = bn.gamma.len();
                    bn.gamma = take(&format!("{prefix}.{bn_name}.gamma"), &[c])?;
                    bn.beta = take(&format!("{prefix}.{bn_name}.beta"), &[c])?;
                    bn.running_mean = take(&format!("{prefix}.{bn_name}.running_mean"), &[c])?;
                    bn.running_var = take(&format!("{prefix}.{bn_name}.running_var"), &[c])?;
                }
                let v = take(
                    &format!("{prefix}.embed.weights"),
                    br.embed.weights.shape(),
                )?;
                br.embed.weights.data_mut().copy_from_slice(&v);
                br.embed.bias =
                    take(&format!("{prefix}.embed.bias"), &[br.embed.bias.len()])?;
            }
        }
        for (name, layer) in [
            ("head.fc1", &mut model.head.fc1),
            ("head.fc2", &mut model.head.fc2),
            ("head.out", &mut model.head.out),
        ] {
            let v = take(&format!("{name}.weights"), layer.weights.shape())?;
            layer.weights.data_mut().copy_from_slice(&v);
            layer.bias = take(&format!("{name}.bias"), &[layer.bias.len()])?;
        }
        Ok(model)
    }
}
