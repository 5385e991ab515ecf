use std::borrow::Cow;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::network::{cross_entropy, Network};
use super::{m1_network, m2_network, Architecture, Model, ModelKind, Standardization};
use crate::sensing::{GestureLabel, N_CONFIG, N_FREQ};
use crate::{labels, rng, Error, Result};

/// Samples with inputs and class indices.
pub trait FeatureSource: Sync {
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn input_len(&self) -> usize;
    fn input(&self, i: usize) -> Result<Cow<'_, [f64]>>;
    fn label(&self, i: usize) -> usize;
}

#[derive(Debug, Clone, PartialEq)]
pub struct InMemory {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl InMemory {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::dims(format!("{} inputs but {} labels", inputs.len(), labels.len())));
        }
        if let Some(first) = inputs.first() {
            if inputs.iter().any(|x| x.len() != first.len()) {
                return Err(Error::dims("inputs have different lengths"));
            }
        }
        if inputs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::data("inputs contain non-finite values"));
        }
        Ok(Self { inputs, labels })
    }
}

impl FeatureSource for InMemory {
    fn len(&self) -> usize {
        self.inputs.len()
    }

    fn input_len(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    fn input(&self, i: usize) -> Result<Cow<'_, [f64]>> {
        Ok(Cow::Borrowed(&self.inputs[i]))
    }

    fn label(&self, i: usize) -> usize {
        self.labels[i]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Per class: shuffle, then `round(n·train)` to training, `round(n·val)` to
/// validation and the remainder to test, so every partition is within one
/// sample of its exact share.
pub fn stratified_split(labels: &[usize], classes: usize, train: f64, val: f64, seed: u64) -> Result<Split> {
    if !(train > 0.0 && val >= 0.0 && train + val < 1.0) {
        return Err(Error::invalid(format!("bad split fractions {train}/{val}")));
    }
    let mut split = Split {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        let n = idx.len();
        let n_train = (n as f64 * train).round() as usize;
        let n_val = (n as f64 * val).round() as usize;
        if n_train == 0 || n_val == 0 || n_train + n_val >= n {
            return Err(Error::data(format!(
                "class {c} has {n} samples, too few to appear in every partition"
            )));
        }
        idx.shuffle(&mut rng::stream(seed, labels!["split", c]));
        split.train.extend_from_slice(&idx[..n_train]);
        split.val.extend_from_slice(&idx[n_train..n_train + n_val]);
        split.test.extend_from_slice(&idx[n_train + n_val..]);
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub kind: ModelKind,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub seed: u64,
    /// Fit a per-feature z-score on the training split (model #1 only).
    pub standardize: bool,
    /// Undo an epoch that raised the training loss and halve the rate.
    pub halve_on_plateau: bool,
    /// Evaluate mini-batch chunks on the thread pool. Chunk partial sums are
    /// combined in a fixed order, so results match the serial run exactly.
    pub parallel: bool,
    /// Image size for model #2.
    pub image_hw: (usize, usize),
}

impl TrainConfig {
    pub fn new(kind: ModelKind, seed: u64) -> Self {
        Self {
            kind,
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            train_fraction: 0.8,
            val_fraction: 0.1,
            seed,
            standardize: kind == ModelKind::M1,
            halve_on_plateau: true,
            parallel: false,
            image_hw: (N_FREQ, N_CONFIG),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<GestureLabel>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub split_sizes: [usize; 3],
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub learning_rate: Vec<f64>,
    /// Epochs whose update was undone.
    pub rollbacks: Vec<usize>,
    pub deterministic: bool,
    pub test: EvalReport,
}

const CHUNK: usize = 8;

struct Ctx<'a> {
    net: &'a Network,
    std: Option<&'a Standardization>,
    src: &'a dyn FeatureSource,
}

impl Ctx<'_> {
    fn prepared(&self, i: usize) -> Result<Vec<f64>> {
        let x = self.src.input(i)?;
        Ok(match self.std {
            Some(s) => s.apply(&x),
            None => x.into_owned(),
        })
    }

    /// Summed loss and gradient of one chunk.
    fn chunk_grad(&self, params: &[f64], idx: &[usize]) -> Result<(f64, Vec<f64>)> {
        let mut g = vec![0.0; params.len()];
        let mut loss = 0.0;
        for &i in idx {
            let x = self.prepared(i)?;
            let tr = self.net.forward(params, &x)?;
            let (l, d) = cross_entropy(tr.logits(), self.src.label(i));
            loss += l;
            self.net.backward(params, &tr, &d, &mut g);
        }
        Ok((loss, g))
    }

    fn chunk_loss(&self, params: &[f64], idx: &[usize]) -> Result<f64> {
        let mut loss = 0.0;
        for &i in idx {
            let x = self.prepared(i)?;
            let tr = self.net.forward(params, &x)?;
            loss += cross_entropy(tr.logits(), self.src.label(i)).0;
        }
        Ok(loss)
    }

    fn batch_grad(&self, params: &[f64], idx: &[usize], parallel: bool) -> Result<(f64, Vec<f64>)> {
        let chunks: Vec<&[usize]> = idx.chunks(CHUNK).collect();
        let parts: Vec<(f64, Vec<f64>)> = if parallel {
            chunks.par_iter().map(|c| self.chunk_grad(params, c)).collect::<Result<_>>()?
        } else {
            chunks.iter().map(|c| self.chunk_grad(params, c)).collect::<Result<_>>()?
        };
        let mut it = parts.into_iter();
        let (mut loss, mut g) = it.next().unwrap_or((0.0, vec![0.0; params.len()]));
        for (l, pg) in it {
            loss += l;
            g.iter_mut().zip(&pg).for_each(|(a, b)| *a += b);
        }
        let n = idx.len() as f64;
        g.iter_mut().for_each(|v| *v /= n);
        Ok((loss / n, g))
    }

    fn mean_loss(&self, params: &[f64], idx: &[usize], parallel: bool) -> Result<f64> {
        if idx.is_empty() {
            return Ok(f64::NAN);
        }
        let chunks: Vec<&[usize]> = idx.chunks(CHUNK).collect();
        let parts: Vec<f64> = if parallel {
            chunks.par_iter().map(|c| self.chunk_loss(params, c)).collect::<Result<_>>()?
        } else {
            chunks.iter().map(|c| self.chunk_loss(params, c)).collect::<Result<_>>()?
        };
        Ok(parts.iter().sum::<f64>() / idx.len() as f64)
    }
}

#[derive(Clone)]
struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], g: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * g[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * g[i] * g[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

fn fit_standardization(src: &dyn FeatureSource, idx: &[usize]) -> Result<Standardization> {
    let d = src.input_len();
    let mut mean = vec![0.0; d];
    let mut sq = vec![0.0; d];
    for &i in idx {
        let x = src.input(i)?;
        for k in 0..d {
            mean[k] += x[k];
        }
    }
    let n = idx.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    for &i in idx {
        let x = src.input(i)?;
        for k in 0..d {
            sq[k] += (x[k] - mean[k]).powi(2);
        }
    }
    let std = sq
        .iter()
        .map(|s| {
            let v = (s / n).sqrt();
            if v > 0.0 && v.is_finite() {
                v
            } else {
                1.0
            }
        })
        .collect();
    Ok(Standardization { mean, std })
}

/// Trains a model on a stratified split of `src` and reports on the test part.
pub fn train(src: &dyn FeatureSource, cfg: &TrainConfig) -> Result<(Model, TrainReport)> {
    let classes = GestureLabel::CLASSES.len();
    if cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::invalid("epochs, batch size and learning rate must be positive"));
    }
    let labels: Vec<usize> = (0..src.len()).map(|i| src.label(i)).collect();
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::invalid(format!("label index {bad} out of range")));
    }
    for c in 0..classes {
        let n = labels.iter().filter(|&&l| l == c).count();
        if n < 10 {
            return Err(Error::data(format!("class {} has {n} samples, need at least 10", GestureLabel::CLASSES[c])));
        }
    }
    let split = stratified_split(&labels, classes, cfg.train_fraction, cfg.val_fraction, cfg.seed)?;
    let net = match cfg.kind {
        ModelKind::M1 => m1_network(src.input_len()),
        ModelKind::M2 => m2_network(cfg.image_hw.0, cfg.image_hw.1)?,
    };
    if net.input_len() != src.input_len() {
        return Err(Error::dims(format!(
            "model expects {} inputs, features have {}",
            net.input_len(),
            src.input_len()
        )));
    }
    let standardization = if cfg.standardize {
        Some(fit_standardization(src, &split.train)?)
    } else {
        None
    };
    let mut params = net.init_params(&mut rng::stream(cfg.seed, labels!["init"]));
    let ctx = Ctx {
        net: &net,
        std: standardization.as_ref(),
        src,
    };
    let mut adam = Adam::new(params.len());
    let mut lr = cfg.learning_rate;
    let mut best_train = ctx.mean_loss(&params, &split.train, cfg.parallel)?;
    let mut train_loss = Vec::with_capacity(cfg.epochs);
    let mut val_loss = Vec::with_capacity(cfg.epochs);
    let mut lrs = Vec::with_capacity(cfg.epochs);
    let mut rollbacks = Vec::new();
    for epoch in 0..cfg.epochs {
        let mut order = split.train.clone();
        order.shuffle(&mut rng::stream(cfg.seed, labels!["epoch", epoch]));
        let snapshot = (params.clone(), adam.clone());
        for batch in order.chunks(cfg.batch_size) {
            let (_, g) = ctx.batch_grad(&params, batch, cfg.parallel)?;
            adam.step(&mut params, &g, lr);
        }
        let mut tl = ctx.mean_loss(&params, &split.train, cfg.parallel)?;
        if !tl.is_finite() {
            return Err(Error::numerical(format!("training loss diverged at epoch {epoch}")));
        }
        lrs.push(lr);
        if cfg.halve_on_plateau && tl >= best_train {
            params = snapshot.0;
            adam = snapshot.1;
            lr *= 0.5;
            tl = best_train;
            rollbacks.push(epoch);
        }
        best_train = best_train.min(tl);
        train_loss.push(tl);
        val_loss.push(ctx.mean_loss(&params, &split.val, cfg.parallel)?);
    }
    let model = Model {
        arch: Architecture {
            kind: cfg.kind,
            network: net.clone(),
            classes: GestureLabel::CLASSES.to_vec(),
            standardization,
            design_frequency_hz: (cfg.kind == ModelKind::M1).then_some(super::DESIGN_FREQUENCY),
            training_seed: cfg.seed,
        },
        params,
    };
    let test = evaluate(&model, src, &split.test)?;
    let report = TrainReport {
        config: cfg.clone(),
        split_sizes: [split.train.len(), split.val.len(), split.test.len()],
        train_loss,
        val_loss,
        learning_rate: lrs,
        rollbacks,
        deterministic: true,
        test,
    };
    Ok((model, report))
}

/// Confusion matrix and derived scores on the samples `idx` of `src`.
pub fn evaluate(model: &Model, src: &dyn FeatureSource, idx: &[usize]) -> Result<EvalReport> {
    if idx.is_empty() {
        return Err(Error::data("cannot evaluate on an empty test set"));
    }
    let k = model.arch.classes.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for &i in idx {
        let p = model.predict(&src.input(i)?)?;
        let t = src.label(i);
        if t >= k {
            return Err(Error::invalid(format!("label index {t} out of range")));
        }
        confusion[t][p] += 1;
    }
    let total = idx.len();
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(EvalReport {
        classes: model.arch.classes.clone(),
        precision: (0..k)
            .map(|c| ratio(confusion[c][c], (0..k).map(|t| confusion[t][c]).sum()))
            .collect(),
        recall: (0..k).map(|c| ratio(confusion[c][c], confusion[c].iter().sum())).collect(),
        accuracy: ratio(correct, total),
        confusion,
        total,
    })
}

/// Largest relative deviation between analytic and central-difference
/// gradients of the mean loss over `src`. Networks with more than
/// `max_params` parameters are checked on an evenly strided subset that
/// always includes every bias.
pub fn gradient_check(
    net: &Network,
    params: &[f64],
    src: &dyn FeatureSource,
    epsilon: f64,
    max_params: usize,
) -> Result<f64> {
    if src.is_empty() {
        return Err(Error::invalid("gradient check needs at least one sample"));
    }
    let ctx = Ctx { net, std: None, src };
    let idx: Vec<usize> = (0..src.len()).collect();
    let (_, analytic) = ctx.batch_grad(params, &idx, false)?;
    let mut which: Vec<usize> = Vec::new();
    for (start, len, is_weight) in net.param_ranges() {
        let stride = if is_weight && params.len() > max_params {
            (len * params.len()).div_ceil(max_params * len).max(1)
        } else {
            1
        };
        which.extend((start..start + len).step_by(stride));
    }
    let mut p = params.to_vec();
    let mut worst = 0.0f64;
    for i in which {
        let orig = p[i];
        p[i] = orig + epsilon;
        let up = ctx.mean_loss(&p, &idx, false)?;
        p[i] = orig - epsilon;
        let down = ctx.mean_loss(&p, &idx, false)?;
        p[i] = orig;
        let numeric = (up - down) / (2.0 * epsilon);
        let a = analytic[i];
        let dev = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(dev);
    }
    Ok(worst)
}
