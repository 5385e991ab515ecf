//! Small feed-forward networks over a flat parameter vector.
//!
//! Activations are kept as flat `Vec<f64>` in channel-major `[c][h][w]`
//! order. Parameters of every layer are stored back to back: dense layers as
//! `W (out × in, row-major)` then `b`, convolutions as
//! `W (out × in × k × k)` then `b`.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense { inputs: usize, outputs: usize },
    /// Stride 1, no padding.
    Conv2d { in_channels: usize, out_channels: usize, kernel: usize },
    /// Non-overlapping window; trailing rows/columns are dropped.
    MaxPool2d { size: usize },
    Relu,
    Flatten,
}

impl LayerSpec {
    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Dense { inputs, outputs } => inputs * outputs + outputs,
            LayerSpec::Conv2d { in_channels, out_channels, kernel } => {
                out_channels * in_channels * kernel * kernel + out_channels
            }
            _ => 0,
        }
    }

    /// Fan-in of the weights, for initialization.
    fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Dense { inputs, .. } => inputs,
            LayerSpec::Conv2d { in_channels, kernel, .. } => in_channels * kernel * kernel,
            _ => 0,
        }
    }

    fn weight_count(&self) -> usize {
        match *self {
            LayerSpec::Dense { inputs, outputs } => inputs * outputs,
            LayerSpec::Conv2d { in_channels, out_channels, kernel } => out_channels * in_channels * kernel * kernel,
            _ => 0,
        }
    }

    pub fn output_shape(&self, s: [usize; 3]) -> Result<[usize; 3]> {
        let [c, h, w] = s;
        match *self {
            LayerSpec::Dense { inputs, outputs } => {
                if c * h * w != inputs {
                    return Err(Error::dims(format!("dense layer expects {inputs} inputs, got {}", c * h * w)));
                }
                Ok([outputs, 1, 1])
            }
            LayerSpec::Conv2d { in_channels, out_channels, kernel } => {
                if c != in_channels || h < kernel || w < kernel || kernel == 0 {
                    return Err(Error::dims(format!("conv layer cannot take shape {s:?}")));
                }
                Ok([out_channels, h - kernel + 1, w - kernel + 1])
            }
            LayerSpec::MaxPool2d { size } => {
                if size == 0 || h < size || w < size {
                    return Err(Error::dims(format!("pool layer cannot take shape {s:?}")));
                }
                Ok([c, h / size, w / size])
            }
            LayerSpec::Relu => Ok(s),
            LayerSpec::Flatten => Ok([c * h * w, 1, 1]),
        }
    }
}

/// Layer list plus input shape; checks that the shapes chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub input_shape: [usize; 3],
    pub layers: Vec<LayerSpec>,
}

/// Per-sample forward state needed by the backward pass.
pub struct Trace {
    acts: Vec<Vec<f64>>,
    shapes: Vec<[usize; 3]>,
    pool_idx: Vec<Vec<usize>>,
}

impl Trace {
    pub fn logits(&self) -> &[f64] {
        self.acts.last().expect("trace has the input at least")
    }
}

impl Network {
    pub fn new(input_shape: [usize; 3], layers: Vec<LayerSpec>) -> Result<Self> {
        let n = Self { input_shape, layers };
        n.shapes()?;
        Ok(n)
    }

    pub fn shapes(&self) -> Result<Vec<[usize; 3]>> {
        let mut s = vec![self.input_shape];
        for l in &self.layers {
            let next = l.output_shape(*s.last().expect("non-empty"))?;
            s.push(next);
        }
        Ok(s)
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    pub fn outputs(&self) -> usize {
        self.shapes().map(|s| s.last().expect("non-empty").iter().product()).unwrap_or(0)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    /// Offsets of each layer's parameters.
    fn offsets(&self) -> Vec<usize> {
        let mut o = Vec::with_capacity(self.layers.len());
        let mut acc = 0;
        for l in &self.layers {
            o.push(acc);
            acc += l.param_count();
        }
        o
    }

    /// `(start, len, is_weight)` ranges, used by initialization and checks.
    pub fn param_ranges(&self) -> Vec<(usize, usize, bool)> {
        let mut out = Vec::new();
        for (l, off) in self.layers.iter().zip(self.offsets()) {
            if l.param_count() > 0 {
                out.push((off, l.weight_count(), true));
                out.push((off + l.weight_count(), l.param_count() - l.weight_count(), false));
            }
        }
        out
    }

    /// He-normal weights, zero biases.
    pub fn init_params(&self, rng: &mut impl rand::Rng) -> Vec<f64> {
        use rand_distr::{Distribution, StandardNormal};
        let mut p = vec![0.0; self.param_count()];
        for (l, off) in self.layers.iter().zip(self.offsets()) {
            let fan = l.fan_in();
            if fan == 0 {
                continue;
            }
            let sd = (2.0 / fan as f64).sqrt();
            for v in &mut p[off..off + l.weight_count()] {
                let z: f64 = StandardNormal.sample(rng);
                *v = z * sd;
            }
        }
        p
    }

    pub fn forward(&self, params: &[f64], input: &[f64]) -> Result<Trace> {
        if input.len() != self.input_len() {
            return Err(Error::dims(format!("network expects {} inputs, got {}", self.input_len(), input.len())));
        }
        if params.len() != self.param_count() {
            return Err(Error::dims(format!("network has {} parameters, got {}", self.param_count(), params.len())));
        }
        let shapes = self.shapes()?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        let mut pool_idx = Vec::with_capacity(self.layers.len());
        acts.push(input.to_vec());
        for ((l, off), s) in self.layers.iter().zip(self.offsets()).zip(&shapes) {
            let x = acts.last().expect("non-empty");
            let p = &params[off..off + l.param_count()];
            let (y, idx) = match *l {
                LayerSpec::Dense { inputs, outputs } => (dense_forward(p, x, inputs, outputs), Vec::new()),
                LayerSpec::Conv2d { in_channels, out_channels, kernel } => {
                    (conv_forward(p, x, *s, in_channels, out_channels, kernel), Vec::new())
                }
                LayerSpec::MaxPool2d { size } => pool_forward(x, *s, size),
                LayerSpec::Relu => (x.iter().map(|&v| v.max(0.0)).collect(), Vec::new()),
                LayerSpec::Flatten => (x.clone(), Vec::new()),
            };
            acts.push(y);
            pool_idx.push(idx);
        }
        Ok(Trace { acts, shapes, pool_idx })
    }

    /// Adds `∂L/∂params` to `grad` given `∂L/∂logits`.
    pub fn backward(&self, params: &[f64], trace: &Trace, dlogits: &[f64], grad: &mut [f64]) {
        let mut delta = dlogits.to_vec();
        let offsets = self.offsets();
        for (n, l) in self.layers.iter().enumerate().rev() {
            let off = offsets[n];
            let x = &trace.acts[n];
            let s = trace.shapes[n];
            let p = &params[off..off + l.param_count()];
            let g = &mut grad[off..off + l.param_count()];
            let need_input_grad = n > 0;
            delta = match *l {
                LayerSpec::Dense { inputs, outputs } => dense_backward(p, x, &delta, inputs, outputs, g, need_input_grad),
                LayerSpec::Conv2d { in_channels, out_channels, kernel } => {
                    conv_backward(p, x, s, &delta, in_channels, out_channels, kernel, g, need_input_grad)
                }
                LayerSpec::MaxPool2d { .. } => {
                    let mut d = vec![0.0; x.len()];
                    for (o, &i) in trace.pool_idx[n].iter().enumerate() {
                        d[i] += delta[o];
                    }
                    d
                }
                LayerSpec::Relu => x.iter().zip(&delta).map(|(&v, &d)| if v > 0.0 { d } else { 0.0 }).collect(),
                LayerSpec::Flatten => delta,
            };
        }
    }
}

fn dense_forward(p: &[f64], x: &[f64], inputs: usize, outputs: usize) -> Vec<f64> {
    let (w, b) = p.split_at(inputs * outputs);
    (0..outputs)
        .map(|o| b[o] + w[o * inputs..(o + 1) * inputs].iter().zip(x).map(|(a, v)| a * v).sum::<f64>())
        .collect()
}

fn dense_backward(
    p: &[f64],
    x: &[f64],
    delta: &[f64],
    inputs: usize,
    outputs: usize,
    g: &mut [f64],
    need_input_grad: bool,
) -> Vec<f64> {
    let (gw, gb) = g.split_at_mut(inputs * outputs);
    let w = &p[..inputs * outputs];
    let mut dx = vec![0.0; if need_input_grad { inputs } else { 0 }];
    for o in 0..outputs {
        let d = delta[o];
        gb[o] += d;
        if d == 0.0 {
            continue;
        }
        let row = &mut gw[o * inputs..(o + 1) * inputs];
        for (gv, &xv) in row.iter_mut().zip(x) {
            *gv += d * xv;
        }
        if need_input_grad {
            for (dv, &wv) in dx.iter_mut().zip(&w[o * inputs..(o + 1) * inputs]) {
                *dv += d * wv;
            }
        }
    }
    dx
}

fn conv_forward(p: &[f64], x: &[f64], s: [usize; 3], cin: usize, cout: usize, k: usize) -> Vec<f64> {
    let [_, h, w] = s;
    let (oh, ow) = (h - k + 1, w - k + 1);
    let (wt, b) = p.split_at(cout * cin * k * k);
    let mut y = vec![0.0; cout * oh * ow];
    for o in 0..cout {
        let out = &mut y[o * oh * ow..(o + 1) * oh * ow];
        out.iter_mut().for_each(|v| *v = b[o]);
        for c in 0..cin {
            let plane = &x[c * h * w..(c + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let wv = wt[((o * cin + c) * k + ky) * k + kx];
                    for r in 0..oh {
                        let src = &plane[(r + ky) * w + kx..(r + ky) * w + kx + ow];
                        let dst = &mut out[r * ow..(r + 1) * ow];
                        for (d, &v) in dst.iter_mut().zip(src) {
                            *d += wv * v;
                        }
                    }
                }
            }
        }
    }
    y
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    p: &[f64],
    x: &[f64],
    s: [usize; 3],
    delta: &[f64],
    cin: usize,
    cout: usize,
    k: usize,
    g: &mut [f64],
    need_input_grad: bool,
) -> Vec<f64> {
    let [_, h, w] = s;
    let (oh, ow) = (h - k + 1, w - k + 1);
    let nw = cout * cin * k * k;
    let wt = &p[..nw];
    let (gw, gb) = g.split_at_mut(nw);
    let mut dx = vec![0.0; if need_input_grad { x.len() } else { 0 }];
    for o in 0..cout {
        let d = &delta[o * oh * ow..(o + 1) * oh * ow];
        gb[o] += d.iter().sum::<f64>();
        for c in 0..cin {
            let plane = &x[c * h * w..(c + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let wi = ((o * cin + c) * k + ky) * k + kx;
                    let mut acc = 0.0;
                    for r in 0..oh {
                        let src = &plane[(r + ky) * w + kx..(r + ky) * w + kx + ow];
                        let dr = &d[r * ow..(r + 1) * ow];
                        acc += src.iter().zip(dr).map(|(a, b)| a * b).sum::<f64>();
                    }
                    gw[wi] += acc;
                    if need_input_grad {
                        let wv = wt[wi];
                        let dplane = &mut dx[c * h * w..(c + 1) * h * w];
                        for r in 0..oh {
                            let dst = &mut dplane[(r + ky) * w + kx..(r + ky) * w + kx + ow];
                            for (dv, &dd) in dst.iter_mut().zip(&d[r * ow..(r + 1) * ow]) {
                                *dv += wv * dd;
                            }
                        }
                    }
                }
            }
        }
    }
    dx
}

fn pool_forward(x: &[f64], s: [usize; 3], size: usize) -> (Vec<f64>, Vec<usize>) {
    let [c, h, w] = s;
    let (oh, ow) = (h / size, w / size);
    let mut y = Vec::with_capacity(c * oh * ow);
    let mut idx = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        for r in 0..oh {
            for q in 0..ow {
                let mut best = ch * h * w + r * size * w + q * size;
                for dy in 0..size {
                    for dx in 0..size {
                        let i = ch * h * w + (r * size + dy) * w + q * size + dx;
                        if x[i] > x[best] {
                            best = i;
                        }
                    }
                }
                y.push(x[best]);
                idx.push(best);
            }
        }
    }
    (y, idx)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Cross-entropy of `label` and its gradient with respect to the logits.
pub fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&v| (v - m).exp()).sum::<f64>().ln();
    let loss = lse - logits[label];
    let mut g = softmax(logits);
    g[label] -= 1.0;
    (loss, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{labels, rng};
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn conv_matches_naive_loops() {
        let net = Network::new([2, 5, 6], vec![LayerSpec::Conv2d { in_channels: 2, out_channels: 3, kernel: 3 }]).unwrap();
        let mut g = rng::stream(1, labels!["conv"]);
        let p: Vec<f64> = (0..net.param_count()).map(|_| g.random::<f64>() - 0.5).collect();
        let x: Vec<f64> = (0..60).map(|_| g.random::<f64>()).collect();
        let y = net.forward(&p, &x).unwrap().logits().to_vec();
        assert_eq!(y.len(), 3 * 3 * 4);
        for o in 0..3 {
            for r in 0..3 {
                for q in 0..4 {
                    let mut want = p[54 + o];
                    for c in 0..2 {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                want += p[((o * 2 + c) * 3 + ky) * 3 + kx] * x[c * 30 + (r + ky) * 6 + q + kx];
                            }
                        }
                    }
                    assert!((y[o * 12 + r * 4 + q] - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn pooling_picks_maxima_and_drops_edges() {
        let net = Network::new([1, 3, 5], vec![LayerSpec::MaxPool2d { size: 2 }]).unwrap();
        let x: Vec<f64> = (0..15).map(|v| f64::from(v) * if v % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let y = net.forward(&[], &x).unwrap().logits().to_vec();
        assert_eq!(y, vec![6.0, 8.0]);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        assert!(Network::new([1, 1, 10], vec![LayerSpec::Dense { inputs: 9, outputs: 3 }]).is_err());
        assert!(Network::new([1, 2, 2], vec![LayerSpec::Conv2d { in_channels: 1, out_channels: 1, kernel: 3 }]).is_err());
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one(v in prop::collection::vec(-500.0f64..500.0, 1..8)) {
            let p = softmax(&v);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn argmax_ignores_logit_shift(v in prop::collection::vec(-50.0f64..50.0, 3), c in -1e3f64..1e3) {
            let arg = |x: &[f64]| { let p = softmax(x); (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap() };
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            prop_assert_eq!(arg(&v), arg(&shifted));
        }
    }
}
