use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::{cvrelu, cvrelu_backward};
use super::batchnorm::{cvbn_backward, cvbn_forward, update_running_stats, BnBatchStats, BnCache, BnGrads, CvbnParams};
use super::conv::{cvconv1d_backward, cvconv1d_forward_counted, ConvCache, ConvGrads, ConvLayerParams, Padding};
use super::head::{flatten_and_head, head_backward, DenseHeadParams, HeadCache, HeadGrads};
use super::pool::{magnitude_maxpool, maxpool_backward, PoolCache};
use super::tensor::CTensor;
use super::Mode;
use crate::error::{Error, Result};
use crate::signal_sim::ComplexSignal;

/// Architecture hyperparameters of the embedding network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of conv/ReLU/BN/pool blocks.
    pub depth: usize,
    /// Output channels of every conv layer.
    pub n_ne: usize,
    pub kernel_size: usize,
    pub padding: Padding,
    pub pool_window: usize,
    pub signal_len: usize,
    pub feature_dim: usize,
    /// Auxiliary classes seen by the softmax head and the centers.
    pub class_count: usize,
    pub dropout_rate: f64,
    pub bn_epsilon: f64,
    pub bn_momentum: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            depth: 9,
            n_ne: 16,
            kernel_size: 3,
            padding: Padding::Same,
            pool_window: 2,
            signal_len: 512,
            feature_dim: 1024,
            class_count: 20,
            dropout_rate: 0.5,
            bn_epsilon: 1e-5,
            bn_momentum: 0.9,
        }
    }
}

impl ModelConfig {
    /// Sequence length after the last pooling stage.
    pub fn pooled_len(&self) -> Result<usize> {
        if self.signal_len < self.pool_window.pow(self.depth as u32) {
            return Err(Error::SignalTooShort { len: self.signal_len, depth: self.depth });
        }
        let mut len = self.signal_len;
        for _ in 0..self.depth {
            len = match self.padding {
                Padding::Same => len,
                Padding::Valid => len.saturating_sub(self.kernel_size - 1),
            };
            len /= self.pool_window;
            if len == 0 {
                return Err(Error::SignalTooShort { len: self.signal_len, depth: self.depth });
            }
        }
        Ok(len)
    }

    pub fn flatten_dim(&self) -> Result<usize> {
        Ok(2 * self.pooled_len()? * self.n_ne)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if self.depth == 0 || self.n_ne == 0 || self.kernel_size == 0 || self.feature_dim == 0 {
            return bad("depth, n_ne, kernel_size and feature_dim must be >= 1");
        }
        if self.pool_window < 2 {
            return bad("pool_window must be >= 2");
        }
        if self.class_count < 2 {
            return bad("class_count must be >= 2");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if !(self.bn_epsilon > 0.0) || !(0.0..1.0).contains(&self.bn_momentum) {
            return bad("bn_epsilon must be > 0 and bn_momentum in [0, 1)");
        }
        self.pooled_len().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock {
    pub conv: ConvLayerParams,
    pub bn: CvbnParams,
}

/// All learnable state of the feature embedding: conv blocks, the dense
/// head with its auxiliary classifier, and the class centers.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub config: ModelConfig,
    pub blocks: Vec<ConvBlock>,
    pub head: DenseHeadParams,
    /// `[class_count, feature_dim]`
    pub centers: Array2<f64>,
}

#[derive(Debug, Clone)]
struct BlockCache {
    conv: ConvCache,
    pre_relu: CTensor,
    bn: BnCache,
    pool: PoolCache,
}

#[derive(Debug, Clone)]
struct NetworkCache {
    blocks: Vec<BlockCache>,
    head: HeadCache,
}

/// Result of a forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    pub features: Array2<f64>,
    pub dropped: Array2<f64>,
    pub logits: Array2<f64>,
    /// Per-block batch statistics (train mode only).
    pub bn_stats: Vec<BnBatchStats>,
    cache: Option<NetworkCache>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockGrads {
    pub conv: ConvGrads,
    pub bn: BnGrads,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub blocks: Vec<BlockGrads>,
    pub head: HeadGrads,
    pub input: CTensor,
}

fn flat<D: ndarray::Dimension>(a: &ndarray::Array<f64, D>) -> &[f64] {
    a.as_slice().expect("parameters are kept in standard layout")
}

fn flat_mut<D: ndarray::Dimension>(a: &mut ndarray::Array<f64, D>) -> &mut [f64] {
    a.as_slice_mut().expect("parameters are kept in standard layout")
}

impl ModelGrads {
    /// Gradient tensors in the order of [`EmbeddingModel::named_blocks`]'
    /// trainable entries.
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for b in &self.blocks {
            out.push(flat(&b.conv.kernel_re));
            out.push(flat(&b.conv.kernel_im));
            out.push(flat(&b.conv.bias_re));
            out.push(flat(&b.conv.bias_im));
            out.push(flat(&b.bn.gamma));
            out.push(flat(&b.bn.beta));
        }
        out.push(flat(&self.head.dense_weight));
        out.push(flat(&self.head.dense_bias));
        out.push(flat(&self.head.classifier_weight));
        out.push(flat(&self.head.classifier_bias));
        out
    }
}

/// One named parameter block. Non-trainable blocks (running statistics,
/// centers) are updated by their own rules, not by gradient steps.
pub struct ParamBlock<'a> {
    pub name: String,
    pub values: &'a [f64],
    pub trainable: bool,
}

pub struct ParamBlockMut<'a> {
    pub name: String,
    pub values: &'a mut [f64],
    pub trainable: bool,
}

impl EmbeddingModel {
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut blocks = Vec::with_capacity(config.depth);
        for i in 0..config.depth {
            let n_in = if i == 0 { 1 } else { config.n_ne };
            blocks.push(ConvBlock {
                conv: ConvLayerParams::init(config.n_ne, n_in, config.kernel_size, config.padding, rng),
                bn: CvbnParams::new(config.n_ne, config.bn_epsilon, config.bn_momentum),
            });
        }
        let head =
            DenseHeadParams::init(config.flatten_dim()?, config.feature_dim, config.class_count, config.dropout_rate, rng);
        let centers = Array2::zeros((config.class_count, config.feature_dim));
        Ok(EmbeddingModel { config, blocks, head, centers })
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim
    }

    pub fn named_blocks(&self) -> Vec<ParamBlock<'_>> {
        let mut out: Vec<(String, &[f64], bool)> = Vec::new();
        let mut push = |name: String, values, trainable| out.push((name, values, trainable));
        for (i, b) in self.blocks.iter().enumerate() {
            push(format!("conv{i}.kernel_re"), flat(&b.conv.kernel_re), true);
            push(format!("conv{i}.kernel_im"), flat(&b.conv.kernel_im), true);
            push(format!("conv{i}.bias_re"), flat(&b.conv.bias_re), true);
            push(format!("conv{i}.bias_im"), flat(&b.conv.bias_im), true);
            push(format!("bn{i}.gamma"), flat(&b.bn.gamma), true);
            push(format!("bn{i}.beta"), flat(&b.bn.beta), true);
            push(format!("bn{i}.running_mean"), flat(&b.bn.running_mean), false);
            push(format!("bn{i}.running_cov"), flat(&b.bn.running_cov), false);
        }
        push("head.dense_weight".into(), flat(&self.head.dense_weight), true);
        push("head.dense_bias".into(), flat(&self.head.dense_bias), true);
        push("head.classifier_weight".into(), flat(&self.head.classifier_weight), true);
        push("head.classifier_bias".into(), flat(&self.head.classifier_bias), true);
        push("centers".into(), flat(&self.centers), false);
        out.into_iter().map(|(name, values, trainable)| ParamBlock { name, values, trainable }).collect()
    }

    pub fn named_blocks_mut(&mut self) -> Vec<ParamBlockMut<'_>> {
        let mut out = Vec::new();
        for (i, b) in self.blocks.iter_mut().enumerate() {
            out.push((format!("conv{i}.kernel_re"), flat_mut(&mut b.conv.kernel_re), true));
            out.push((format!("conv{i}.kernel_im"), flat_mut(&mut b.conv.kernel_im), true));
            out.push((format!("conv{i}.bias_re"), flat_mut(&mut b.conv.bias_re), true));
            out.push((format!("conv{i}.bias_im"), flat_mut(&mut b.conv.bias_im), true));
            out.push((format!("bn{i}.gamma"), flat_mut(&mut b.bn.gamma), true));
            out.push((format!("bn{i}.beta"), flat_mut(&mut b.bn.beta), true));
            out.push((format!("bn{i}.running_mean"), flat_mut(&mut b.bn.running_mean), false));
            out.push((format!("bn{i}.running_cov"), flat_mut(&mut b.bn.running_cov), false));
        }
        out.push(("head.dense_weight".into(), flat_mut(&mut self.head.dense_weight), true));
        out.push(("head.dense_bias".into(), flat_mut(&mut self.head.dense_bias), true));
        out.push(("head.classifier_weight".into(), flat_mut(&mut self.head.classifier_weight), true));
        out.push(("head.classifier_bias".into(), flat_mut(&mut self.head.classifier_bias), true));
        out.push(("centers".into(), flat_mut(&mut self.centers), false));
        out.into_iter().map(|(name, values, trainable)| ParamBlockMut { name, values, trainable }).collect()
    }

    /// Runs `depth x (conv -> CVReLU -> CVBN -> pool)`, the flatten and the
    /// head. With `keep_cache` the result can be passed to
    /// [`EmbeddingModel::backward`].
    pub fn forward<R: Rng + ?Sized>(&self, input: &CTensor, mode: Mode, rng: &mut R, keep_cache: bool) -> Result<Forward> {
        if input.len() != self.config.signal_len {
            return Err(Error::ShapeMismatch(format!(
                "model expects signals of length {}, got {}",
                self.config.signal_len,
                input.len()
            )));
        }
        let mut x = input.clone();
        let mut caches = Vec::with_capacity(self.blocks.len());
        let mut stats = Vec::new();
        for block in &self.blocks {
            let (conv_out, conv_cache) = cvconv1d_forward_counted(&x, &block.conv, &mut ())?;
            let act = cvrelu(&conv_out);
            let (bn_out, bn_cache, bn_stats) = cvbn_forward(&act, &block.bn, mode)?;
            let (pooled, pool_cache) = magnitude_maxpool(&bn_out, self.config.pool_window)?;
            if let Some(s) = bn_stats {
                stats.push(s);
            }
            if keep_cache {
                caches.push(BlockCache { conv: conv_cache, pre_relu: conv_out, bn: bn_cache, pool: pool_cache });
            }
            x = pooled;
        }
        let (out, head_cache) = flatten_and_head(&x, &self.head, mode, rng)?;
        let cache = keep_cache.then_some(NetworkCache { blocks: caches, head: head_cache });
        Ok(Forward { features: out.features, dropped: out.dropped, logits: out.logits, bn_stats: stats, cache })
    }

    /// Exact gradients of a scalar loss given its gradients with respect to
    /// the (pre-dropout) features and the logits.
    pub fn backward(&self, fwd: &Forward, grad_features: Option<&Array2<f64>>, grad_logits: &Array2<f64>) -> Result<ModelGrads> {
        let cache = fwd.cache.as_ref().ok_or(Error::MissingCache)?;
        let (mut g, head) = head_backward(&self.head, &cache.head, grad_features, grad_logits)?;
        let mut blocks = Vec::with_capacity(self.blocks.len());
        for (block, bc) in self.blocks.iter().zip(&cache.blocks).rev() {
            let g_bn = maxpool_backward(&g, &bc.pool)?;
            let (g_act, bn) = cvbn_backward(&block.bn, &g_bn, &bc.bn)?;
            let g_conv = cvrelu_backward(&bc.pre_relu, &g_act)?;
            let (g_in, conv) = cvconv1d_backward(&block.conv, &g_conv, &bc.conv)?;
            blocks.push(BlockGrads { conv, bn });
            g = g_in;
        }
        blocks.reverse();
        Ok(ModelGrads { blocks, head, input: g })
    }

    pub fn update_running_stats(&mut self, fwd: &Forward) {
        for (block, stats) in self.blocks.iter_mut().zip(&fwd.bn_stats) {
            update_running_stats(&mut block.bn, stats);
        }
    }

    /// Plain gradient step `w <- w - eta * grad` on every trainable block.
    pub fn apply_sgd(&mut self, grads: &ModelGrads, eta: f64) -> Result<()> {
        let tensors = grads.tensors();
        let mut blocks = self.named_blocks_mut();
        blocks.retain(|b| b.trainable);
        if blocks.len() != tensors.len() {
            return Err(Error::ShapeMismatch("gradient block count differs from model".into()));
        }
        for (block, g) in blocks.into_iter().zip(tensors) {
            if block.values.len() != g.len() {
                return Err(Error::ShapeMismatch(format!("gradient size mismatch for {}", block.name)));
            }
            for (w, &d) in block.values.iter_mut().zip(g) {
                *w -= eta * d;
            }
        }
        Ok(())
    }

    /// Features for a batch of signals: post-dropout in train mode, plain
    /// `ReLU(dense)` in eval mode.
    pub fn embed<R: Rng + ?Sized>(&self, batch: &[&ComplexSignal], mode: Mode, rng: &mut R) -> Result<Array2<f64>> {
        if let Some(s) = batch.iter().find(|s| s.len() != self.config.signal_len) {
            return Err(if s.len() < self.config.pool_window.pow(self.config.depth as u32) {
                Error::SignalTooShort { len: s.len(), depth: self.config.depth }
            } else {
                Error::ShapeMismatch(format!("signal length {} != {}", s.len(), self.config.signal_len))
            });
        }
        let input = CTensor::from_signals(batch)?;
        let fwd = self.forward(&input, mode, rng, false)?;
        Ok(match mode {
            Mode::Train => fwd.dropped,
            Mode::Eval => fwd.features,
        })
    }

    /// Eval-mode features for many signals, processed in fixed-size chunks.
    pub fn embed_all(&self, signals: &[ComplexSignal]) -> Result<Array2<f64>> {
        const CHUNK: usize = 64;
        let mut out = Array2::zeros((signals.len(), self.feature_dim()));
        let mut unused = crate::rng::substream(0, 0);
        for (i, chunk) in signals.chunks(CHUNK).enumerate() {
            let refs: Vec<&ComplexSignal> = chunk.iter().collect();
            let f = self.embed(&refs, Mode::Eval, &mut unused)?;
            out.slice_mut(ndarray::s![i * CHUNK..i * CHUNK + chunk.len(), ..]).assign(&f);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use num_complex::Complex32;

    fn toy_config() -> ModelConfig {
        ModelConfig { depth: 3, n_ne: 4, signal_len: 64, feature_dim: 16, class_count: 3, ..ModelConfig::default() }
    }

    fn signals(n: usize, len: usize) -> Vec<ComplexSignal> {
        (0..n)
            .map(|b| {
                let samples = (0..len)
                    .map(|t| Complex32::new(((t * (b + 2)) as f32 * 0.37).sin(), ((t + b) as f32 * 0.21).cos()))
                    .collect();
                ComplexSignal::new(samples, 4e6)
            })
            .collect()
    }

    #[test]
    fn default_flatten_dim() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.pooled_len().unwrap(), 1);
        assert_eq!(cfg.flatten_dim().unwrap(), 32);
    }

    #[test]
    fn too_short_for_depth() {
        let cfg = ModelConfig { signal_len: 256, ..ModelConfig::default() };
        assert!(matches!(cfg.validate(), Err(Error::SignalTooShort { .. })));
    }

    #[test]
    fn embed_shape_and_determinism() {
        let model = EmbeddingModel::new(toy_config(), &mut substream(1, 0)).unwrap();
        let sigs = signals(5, 64);
        let refs: Vec<_> = sigs.iter().collect();
        let a = model.embed(&refs, Mode::Eval, &mut substream(2, 0)).unwrap();
        let b = model.embed(&refs, Mode::Eval, &mut substream(3, 0)).unwrap();
        assert_eq!(a.dim(), (5, 16));
        assert_eq!(a, b);
        assert_eq!(model.embed_all(&sigs).unwrap(), a);
    }

    #[test]
    fn backward_without_cache() {
        let model = EmbeddingModel::new(toy_config(), &mut substream(1, 0)).unwrap();
        let sigs = signals(2, 64);
        let refs: Vec<_> = sigs.iter().collect();
        let input = CTensor::from_signals(&refs).unwrap();
        let fwd = model.forward(&input, Mode::Train, &mut substream(2, 0), false).unwrap();
        let g = Array2::zeros(fwd.logits.dim());
        assert!(matches!(model.backward(&fwd, None, &g), Err(Error::MissingCache)));
    }

    #[test]
    fn zero_upstream_zero_grads() {
        let model = EmbeddingModel::new(toy_config(), &mut substream(1, 0)).unwrap();
        let sigs = signals(2, 64);
        let refs: Vec<_> = sigs.iter().collect();
        let input = CTensor::from_signals(&refs).unwrap();
        let fwd = model.forward(&input, Mode::Train, &mut substream(2, 0), true).unwrap();
        let g = Array2::zeros(fwd.logits.dim());
        let grads = model.backward(&fwd, None, &g).unwrap();
        assert!(grads.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn sgd_step_is_exact() {
        let mut model = EmbeddingModel::new(toy_config(), &mut substream(1, 0)).unwrap();
        let sigs = signals(4, 64);
        let refs: Vec<_> = sigs.iter().collect();
        let input = CTensor::from_signals(&refs).unwrap();
        let fwd = model.forward(&input, Mode::Train, &mut substream(2, 0), true).unwrap();
        let g = fwd.logits.mapv(|v| v * 0.1 + 0.01);
        let grads = model.backward(&fwd, Some(&fwd.features.mapv(|v| v * 0.5)), &g).unwrap();
        let before: Vec<Vec<f64>> = model.named_blocks().iter().filter(|b| b.trainable).map(|b| b.values.to_vec()).collect();
        let centers = model.centers.clone();
        model.apply_sgd(&grads, 0.001).unwrap();
        let after = model.named_blocks();
        for ((b, a), g) in before.iter().zip(after.iter().filter(|b| b.trainable)).zip(grads.tensors()) {
            for i in 0..b.len() {
                assert_eq!(a.values[i], b[i] - 0.001 * g[i]);
            }
        }
        assert_eq!(model.centers, centers);
    }
}
