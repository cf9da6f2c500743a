//! Finite-difference checks of every layer, loss and the composed network.
//! Each check returns `(tensor name, relative error)` pairs.

use fssei::complex_nn::*;
use fssei::losses::{batch_triplet_loss, center_loss, hybrid_loss, softmax_ce, LossConfig};
use fssei::rng::{substream, SeiRng};
use fssei::trainer::mine_triplets;
use ndarray::{Array1, Array2};

use super::{central_diff, gather, gaussian, pick, random_tensor, readout, rel_err};

const PER_TENSOR: usize = 60;

/// One checked tensor.
#[derive(Debug, Clone)]
pub struct Entry {
    pub name: String,
    pub rel_err: f64,
    pub checked: usize,
    /// Coordinates dropped because the loss is not smooth there.
    pub skipped: usize,
}

pub type Report = Vec<Entry>;

fn check<T>(
    out: &mut Report,
    name: &str,
    analytic: &[f64],
    state: &mut T,
    get: impl Fn(&mut T) -> &mut [f64],
    loss: impl Fn(&T) -> f64,
    rng: &mut SeiRng,
) {
    let len = get(state).len();
    let idx = pick(len, PER_TENSOR, rng);
    let (kept, numeric) = central_diff(state, get, &idx, loss);
    out.push(Entry {
        name: name.to_string(),
        rel_err: rel_err(&gather(analytic, &kept), &numeric),
        checked: kept.len(),
        skipped: idx.len() - kept.len(),
    });
}

fn slice1(a: &mut Array1<f64>) -> &mut [f64] {
    a.as_slice_mut().unwrap()
}

fn slice2(a: &mut Array2<f64>) -> &mut [f64] {
    a.as_slice_mut().unwrap()
}

fn check_tensor_input(out: &mut Report, grad: &CTensor, x: &CTensor, rng: &mut SeiRng, loss: impl Fn(&CTensor) -> f64) {
    let mut state = x.clone();
    check(out, "input.re", grad.re.as_slice().unwrap(), &mut state, |t| slice2(&mut t.re), &loss, rng);
    check(out, "input.im", grad.im.as_slice().unwrap(), &mut state, |t| slice2(&mut t.im), &loss, rng);
}

pub fn conv(seed: u64, padding: Padding) -> Report {
    let mut rng = substream(seed, 101);
    let input = random_tensor(&mut rng, 2, 9, 3);
    let mut params = ConvLayerParams::init(4, 3, 3, padding, &mut rng);
    params.bias_re = gaussian(&mut rng, (1, 4), 0.5).row(0).to_owned();
    params.bias_im = gaussian(&mut rng, (1, 4), 0.5).row(0).to_owned();
    let (y, cache) = cvconv1d_forward_counted(&input, &params, &mut ()).unwrap();
    let w = random_tensor(&mut rng, y.batch(), y.len(), y.channels());
    let (gin, g) = cvconv1d_backward(&params, &w, &cache).unwrap();
    let mut out = Report::new();
    check_tensor_input(&mut out, &gin, &input, &mut rng, |x| readout(&cvconv1d_forward(x, &params).unwrap(), &w));
    let loss = |p: &ConvLayerParams| readout(&cvconv1d_forward(&input, p).unwrap(), &w);
    let mut p = params.clone();
    check(&mut out, "kernel_re", g.kernel_re.as_slice().unwrap(), &mut p, |p| p.kernel_re.as_slice_mut().unwrap(), loss, &mut rng);
    check(&mut out, "kernel_im", g.kernel_im.as_slice().unwrap(), &mut p, |p| p.kernel_im.as_slice_mut().unwrap(), loss, &mut rng);
    check(&mut out, "bias_re", g.bias_re.as_slice().unwrap(), &mut p, |p| slice1(&mut p.bias_re), loss, &mut rng);
    check(&mut out, "bias_im", g.bias_im.as_slice().unwrap(), &mut p, |p| slice1(&mut p.bias_im), loss, &mut rng);
    out
}

pub fn relu(seed: u64) -> Report {
    let mut rng = substream(seed, 102);
    let input = random_tensor(&mut rng, 2, 7, 3);
    let w = random_tensor(&mut rng, 2, 7, 3);
    let gin = cvrelu_backward(&input, &w).unwrap();
    let mut out = Report::new();
    check_tensor_input(&mut out, &gin, &input, &mut rng, |x| readout(&cvrelu(x), &w));
    out
}

pub fn batchnorm(seed: u64, mode: Mode) -> Report {
    let mut rng = substream(seed, 103);
    let input = random_tensor(&mut rng, 4, 5, 2);
    let mut params = CvbnParams::new(2, 1e-5, 0.9);
    params.gamma = gaussian(&mut rng, (2, 4), 0.7).into_shape_with_order((2, 2, 2)).unwrap();
    params.beta = gaussian(&mut rng, (2, 2), 0.5);
    params.running_mean = gaussian(&mut rng, (2, 2), 0.3);
    for c in 0..2 {
        let a = gaussian(&mut rng, (2, 2), 0.4);
        let spd = a.dot(&a.t()) + Array2::<f64>::eye(2);
        params.running_cov.slice_mut(ndarray::s![c, .., ..]).assign(&spd);
    }
    let (y, cache, _) = cvbn_forward(&input, &params, mode).unwrap();
    let w = random_tensor(&mut rng, y.batch(), y.len(), y.channels());
    let (gin, g) = cvbn_backward(&params, &w, &cache).unwrap();
    let mut out = Report::new();
    check_tensor_input(&mut out, &gin, &input, &mut rng, |x| readout(&cvbn_forward(x, &params, mode).unwrap().0, &w));
    let loss = |p: &CvbnParams| readout(&cvbn_forward(&input, p, mode).unwrap().0, &w);
    let mut p = params.clone();
    check(&mut out, "gamma", g.gamma.as_slice().unwrap(), &mut p, |p| p.gamma.as_slice_mut().unwrap(), loss, &mut rng);
    check(&mut out, "beta", g.beta.as_slice().unwrap(), &mut p, |p| slice2(&mut p.beta), loss, &mut rng);
    out
}

pub fn pool(seed: u64) -> Report {
    let mut rng = substream(seed, 104);
    let input = random_tensor(&mut rng, 2, 8, 3);
    let (y, cache) = magnitude_maxpool(&input, 2).unwrap();
    let w = random_tensor(&mut rng, y.batch(), y.len(), y.channels());
    let gin = maxpool_backward(&w, &cache).unwrap();
    let mut out = Report::new();
    check_tensor_input(&mut out, &gin, &input, &mut rng, |x| readout(&magnitude_maxpool(x, 2).unwrap().0, &w));
    out
}

pub fn head(seed: u64) -> Report {
    let mut rng = substream(seed, 105);
    let input = random_tensor(&mut rng, 3, 2, 2);
    let mut params = DenseHeadParams::init(8, 6, 4, 0.5, &mut rng);
    params.dense_bias = gaussian(&mut rng, (1, 6), 0.3).row(0).to_owned();
    params.classifier_bias = gaussian(&mut rng, (1, 4), 0.3).row(0).to_owned();
    let run = |x: &CTensor, p: &DenseHeadParams| flatten_and_head(x, p, Mode::Train, &mut substream(seed, 106)).unwrap();
    let (o, cache) = run(&input, &params);
    let wf = gaussian(&mut rng, o.features.dim(), 1.0);
    let wl = gaussian(&mut rng, o.logits.dim(), 1.0);
    let scalar = |o: &HeadOutput| (&o.features * &wf).sum() + (&o.logits * &wl).sum();
    let (gin, g) = head_backward(&params, &cache, Some(&wf), &wl).unwrap();
    let mut out = Report::new();
    check_tensor_input(&mut out, &gin, &input, &mut rng, |x| scalar(&run(x, &params).0));
    let loss = |p: &DenseHeadParams| scalar(&run(&input, p).0);
    let mut p = params.clone();
    check(&mut out, "dense_weight", g.dense_weight.as_slice().unwrap(), &mut p, |p| slice2(&mut p.dense_weight), loss, &mut rng);
    check(&mut out, "dense_bias", g.dense_bias.as_slice().unwrap(), &mut p, |p| slice1(&mut p.dense_bias), loss, &mut rng);
    check(&mut out, "classifier_weight", g.classifier_weight.as_slice().unwrap(), &mut p, |p| slice2(&mut p.classifier_weight), loss, &mut rng);
    check(&mut out, "classifier_bias", g.classifier_bias.as_slice().unwrap(), &mut p, |p| slice1(&mut p.classifier_bias), loss, &mut rng);
    out
}

pub fn losses(seed: u64) -> Report {
    let mut rng = substream(seed, 107);
    let mut out = Report::new();

    let logits = gaussian(&mut rng, (5, 4), 2.0);
    let labels = [0, 3, 1, 1, 2];
    let (_, g) = softmax_ce(&logits, &labels).unwrap();
    let mut z = logits.clone();
    check(&mut out, "softmax_ce", g.as_slice().unwrap(), &mut z, slice2, |z| softmax_ce(z, &labels).unwrap().0, &mut rng);

    let f = gaussian(&mut rng, (6, 8), 1.0);
    let triplets = [(0, 1, 2), (1, 0, 4), (2, 3, 5), (3, 2, 0), (4, 5, 1), (5, 4, 3)];
    for margin in [0.5, 5.0] {
        let (_, g) = batch_triplet_loss(&f, &triplets, margin).unwrap();
        let mut s = f.clone();
        let name = format!("triplet(margin={margin})");
        check(&mut out, &name, g.as_slice().unwrap(), &mut s, slice2, |s| batch_triplet_loss(s, &triplets, margin).unwrap().0, &mut rng);
    }

    let centers = gaussian(&mut rng, (3, 8), 1.0);
    let labels = [0, 1, 2, 0, 1, 2];
    let (_, g) = center_loss(&f, &labels, &centers).unwrap();
    let mut s = f.clone();
    check(&mut out, "center", g.as_slice().unwrap(), &mut s, slice2, |s| center_loss(s, &labels, &centers).unwrap().0, &mut rng);
    out
}

pub fn toy_config() -> ModelConfig {
    ModelConfig { depth: 3, n_ne: 4, kernel_size: 3, signal_len: 64, feature_dim: 32, class_count: 3, ..ModelConfig::default() }
}

/// Depth-3 network under the full hybrid loss, dropout and batch
/// statistics included.
pub fn network(seed: u64) -> Report {
    let mut rng = substream(seed, 108);
    let mut model = EmbeddingModel::new(toy_config(), &mut rng).unwrap();
    model.centers = gaussian(&mut rng, (3, 32), 0.1);
    let input = random_tensor(&mut rng, 6, 64, 1);
    let labels = [0, 0, 1, 1, 2, 2];
    let triplets = mine_triplets(&labels, &mut substream(seed, 109)).unwrap();
    let cfg = LossConfig { lambda: 0.5, margin: 1.0, use_triplet: true, use_center: true };
    let objective = |m: &EmbeddingModel, x: &CTensor| {
        let fwd = m.forward(x, Mode::Train, &mut substream(seed, 110), false).unwrap();
        hybrid_loss(&fwd.features, &fwd.logits, &labels, &m.centers, &triplets, &cfg).unwrap().total
    };
    let fwd = model.forward(&input, Mode::Train, &mut substream(seed, 110), true).unwrap();
    let loss = hybrid_loss(&fwd.features, &fwd.logits, &labels, &model.centers, &triplets, &cfg).unwrap();
    let grads = model.backward(&fwd, loss.grad_features.as_ref(), &loss.grad_logits).unwrap();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|t| t.to_vec()).collect();

    let mut out = Report::new();
    check_tensor_input(&mut out, &grads.input, &input, &mut rng, |x| objective(&model, x));
    let names: Vec<String> = model.named_blocks().iter().filter(|b| b.trainable).map(|b| b.name.clone()).collect();
    let trainable: Vec<usize> =
        model.named_blocks().iter().enumerate().filter(|(_, b)| b.trainable).map(|(i, _)| i).collect();
    for (k, &bi) in trainable.iter().enumerate() {
        check(
            &mut out,
            &names[k],
            &analytic[k],
            &mut model,
            |m| m.named_blocks_mut().swap_remove(bi).values,
            |m| objective(m, &input),
            &mut rng,
        );
    }
    out
}

pub fn worst(r: &Report) -> (f64, String) {
    r.iter().fold((0.0, String::new()), |acc, e| if e.rel_err > acc.0 { (e.rel_err, e.name.clone()) } else { acc })
}

/// `(skipped, total)` coordinate counts.
pub fn skipped(r: &Report) -> (usize, usize) {
    r.iter().fold((0, 0), |(s, t), e| (s + e.skipped, t + e.skipped + e.checked))
}

/// Largest tolerated share of non-smooth coordinates.
pub const MAX_SKIPPED_SHARE: f64 = 0.10;
