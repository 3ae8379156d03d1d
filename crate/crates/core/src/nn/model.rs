use alloc::vec;
use alloc::vec::Vec;

use super::config::{fc_widths, CnnConfig};
use super::data::Samples;
use crate::rng::Rng;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Layer {
    /// 3x3 conv, padding 1, ReLU, 2x2 max pool. `side` is the input side.
    Conv {
        c_in: usize,
        c_out: usize,
        side: usize,
        w_off: usize,
        b_off: usize,
    },
    /// Fully connected; ReLU on hidden layers, raw logit on the last.
    Dense {
        n_in: usize,
        n_out: usize,
        relu: bool,
        w_off: usize,
        b_off: usize,
    },
}

impl Layer {
    fn n_params(&self) -> usize {
        match *self {
            Layer::Conv { c_in, c_out, .. } => c_out * c_in * 9 + c_out,
            Layer::Dense { n_in, n_out, .. } => n_in * n_out + n_out,
        }
    }
}

/// How ReLUs pass gradient backwards.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReluMode {
    Standard,
    /// Only where the forward activation and the incoming gradient are
    /// both positive.
    Guided,
}

#[derive(Clone, Copy, Debug)]
pub struct BackwardOpts {
    pub mode: ReluMode,
    pub input_grad: bool,
    pub record_conv: bool,
}

impl Default for BackwardOpts {
    fn default() -> Self {
        Self {
            mode: ReluMode::Standard,
            input_grad: false,
            record_conv: false,
        }
    }
}

/// Activations kept from a forward pass.
#[derive(Clone, Debug)]
pub struct Trace {
    pub input: Vec<f64>,
    /// Post-ReLU conv outputs before pooling.
    pub conv_act: Vec<Vec<f64>>,
    pub pooled: Vec<Vec<f64>>,
    argmax: Vec<Vec<u32>>,
    /// Post-activation outputs of each dense layer (the last is the logit).
    pub dense_out: Vec<Vec<f64>>,
    pub logit: f64,
}

#[derive(Clone, Debug, Default)]
pub struct BackwardOut {
    pub input_grad: Option<Vec<f64>>,
    /// Gradient w.r.t. each conv layer's post-ReLU activation.
    pub conv_act_grads: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CnnModel {
    cfg: CnnConfig,
    input_side: usize,
    layers: Vec<Layer>,
    params: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of `sigmoid(z)` against `y`, evaluated stably.
pub fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - z * y + libm::log1p(libm::exp(-z.abs()))
}

/// Build the model on the standard 64 px input.
pub fn build_model(cfg: &CnnConfig, rng: &mut Rng) -> Result<CnnModel> {
    CnnModel::build(cfg, super::INPUT_SIDE, rng)
}

impl CnnModel {
    fn layout(cfg: &CnnConfig, input_side: usize) -> Result<(Vec<Layer>, usize)> {
        cfg.validate_trainable(input_side)?;
        let mut layers = Vec::new();
        let mut off = 0usize;
        let mut c_in = 1usize;
        let mut side = input_side;
        for c_out in cfg.channels() {
            let l = Layer::Conv {
                c_in,
                c_out,
                side,
                w_off: off,
                b_off: off + c_out * c_in * 9,
            };
            off += l.n_params();
            layers.push(l);
            c_in = c_out;
            side /= 2;
        }
        let mut n_in = c_in * side * side;
        let widths = fc_widths(n_in, cfg.n_fc_layers as usize);
        let last = widths.len() - 1;
        for (i, n_out) in widths.into_iter().enumerate() {
            if n_out == 0 {
                return Err(Error::invalid("fully connected layer with zero units"));
            }
            let l = Layer::Dense {
                n_in,
                n_out,
                relu: i != last,
                w_off: off,
                b_off: off + n_in * n_out,
            };
            off += l.n_params();
            layers.push(l);
            n_in = n_out;
        }
        Ok((layers, off))
    }

    /// He-uniform weights, zero biases.
    pub fn build(cfg: &CnnConfig, input_side: usize, rng: &mut Rng) -> Result<Self> {
        let (layers, n) = Self::layout(cfg, input_side)?;
        let mut params = vec![0.0; n];
        for l in &layers {
            let (fan_in, w_off, b_off) = match *l {
                Layer::Conv {
                    c_in, w_off, b_off, ..
                } => (c_in * 9, w_off, b_off),
                Layer::Dense {
                    n_in, w_off, b_off, ..
                } => (n_in, w_off, b_off),
            };
            let bound = libm::sqrt(6.0 / fan_in as f64);
            for w in &mut params[w_off..b_off] {
                *w = rng.uniform_in(-bound, bound);
            }
        }
        Ok(Self {
            cfg: *cfg,
            input_side,
            layers,
            params,
        })
    }

    /// Restore a model from a flat parameter vector.
    pub fn from_params(cfg: &CnnConfig, input_side: usize, params: Vec<f64>) -> Result<Self> {
        let (layers, n) = Self::layout(cfg, input_side)?;
        if params.len() != n {
            return Err(Error::dim("model parameters", n, params.len()));
        }
        Ok(Self {
            cfg: *cfg,
            input_side,
            layers,
            params,
        })
    }

    pub fn config(&self) -> &CnnConfig {
        &self.cfg
    }

    pub fn input_side(&self) -> usize {
        self.input_side
    }

    pub fn input_len(&self) -> usize {
        self.input_side * self.input_side
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn n_conv_layers(&self) -> usize {
        self.cfg.n_conv_layers as usize
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn into_params(self) -> Vec<f64> {
        self.params
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_len() {
            return Err(Error::dim("model input", self.input_len(), input.len()));
        }
        Ok(())
    }

    pub fn trace(&self, input: &[f64]) -> Result<Trace> {
        self.check_input(input)?;
        let p = &self.params;
        let mut conv_act = Vec::new();
        let mut pooled = Vec::new();
        let mut argmax = Vec::new();
        let mut dense_out: Vec<Vec<f64>> = Vec::new();
        for l in &self.layers {
            match *l {
                Layer::Conv {
                    c_in,
                    c_out,
                    side,
                    w_off,
                    b_off,
                } => {
                    let x = pooled.last().map(|v: &Vec<f64>| v.as_slice()).unwrap_or(input);
                    let mut act = vec![0.0; c_out * side * side];
                    conv_forward(x, c_in, side, &p[w_off..b_off], &p[b_off..b_off + c_out], &mut act);
                    for a in &mut act {
                        *a = a.max(0.0);
                    }
                    let (pv, am) = pool_forward(&act, c_out, side);
                    conv_act.push(act);
                    pooled.push(pv);
                    argmax.push(am);
                }
                Layer::Dense {
                    n_in,
                    n_out,
                    relu,
                    w_off,
                    b_off,
                } => {
                    let x = dense_out
                        .last()
                        .or(pooled.last())
                        .map(|v| v.as_slice())
                        .unwrap_or(input);
                    let mut out = p[b_off..b_off + n_out].to_vec();
                    for (j, o) in out.iter_mut().enumerate() {
                        *o += dot(&p[w_off + j * n_in..w_off + (j + 1) * n_in], x);
                        if relu {
                            *o = o.max(0.0);
                        }
                    }
                    dense_out.push(out);
                }
            }
        }
        let logit = dense_out.last().map(|v| v[0]).unwrap_or(0.0);
        Ok(Trace {
            input: input.to_vec(),
            conv_act,
            pooled,
            argmax,
            dense_out,
            logit,
        })
    }

    pub fn logit(&self, input: &[f64]) -> Result<f64> {
        Ok(self.trace(input)?.logit)
    }

    /// Probability of the defect class.
    pub fn predict(&self, input: &[f64]) -> Result<f64> {
        Ok(sigmoid(self.logit(input)?))
    }

    pub fn forward(&self, inputs: &[&[f64]]) -> Result<Vec<f64>> {
        inputs.iter().map(|x| self.predict(x)).collect()
    }

    pub fn predict_all(&self, samples: &Samples) -> Result<Vec<f64>> {
        (0..samples.len()).map(|i| self.predict(samples.input(i))).collect()
    }

    /// Backpropagate `d_logit` through a recorded pass. Parameter gradients
    /// are accumulated into `grads` when given.
    pub fn backward(
        &self,
        tr: &Trace,
        d_logit: f64,
        mut grads: Option<&mut [f64]>,
        opts: BackwardOpts,
    ) -> BackwardOut {
        let p = &self.params;
        let guided = opts.mode == ReluMode::Guided;
        let mut out = BackwardOut::default();
        if opts.record_conv {
            out.conv_act_grads = vec![Vec::new(); tr.conv_act.len()];
        }
        let n_conv = tr.conv_act.len();
        let n_dense = tr.dense_out.len();
        let mut g = vec![d_logit];
        let mut di = n_dense;
        let mut ci = n_conv;
        for l in self.layers.iter().rev() {
            match *l {
                Layer::Dense {
                    n_in,
                    n_out,
                    relu,
                    w_off,
                    b_off,
                } => {
                    di -= 1;
                    if relu {
                        relu_backward(&mut g, &tr.dense_out[di], guided);
                    }
                    let x: &[f64] = if di > 0 {
                        &tr.dense_out[di - 1]
                    } else if n_conv > 0 {
                        &tr.pooled[n_conv - 1]
                    } else {
                        &tr.input
                    };
                    if let Some(gr) = grads.as_deref_mut() {
                        for j in 0..n_out {
                            gr[b_off + j] += g[j];
                            axpy(g[j], x, &mut gr[w_off + j * n_in..w_off + (j + 1) * n_in]);
                        }
                    }
                    let mut gx = vec![0.0; n_in];
                    for j in 0..n_out {
                        axpy(g[j], &p[w_off + j * n_in..w_off + (j + 1) * n_in], &mut gx);
                    }
                    g = gx;
                }
                Layer::Conv {
                    c_in,
                    c_out,
                    side,
                    w_off,
                    b_off,
                } => {
                    ci -= 1;
                    // Unpool into the activation, then through the ReLU.
                    let act = &tr.conv_act[ci];
                    let mut ga = vec![0.0; act.len()];
                    for (&k, &v) in tr.argmax[ci].iter().zip(&g) {
                        ga[k as usize] += v;
                    }
                    if opts.record_conv {
                        out.conv_act_grads[ci] = ga.clone();
                    }
                    relu_backward(&mut ga, act, guided);
                    let x: &[f64] = if ci > 0 { &tr.pooled[ci - 1] } else { &tr.input };
                    if let Some(gr) = grads.as_deref_mut() {
                        let (gw, gb) = gr[w_off..b_off + c_out].split_at_mut(b_off - w_off);
                        conv_backward_params(x, c_in, side, &ga, c_out, gw, gb);
                    }
                    if ci > 0 || opts.input_grad {
                        let mut gx = vec![0.0; c_in * side * side];
                        conv_backward_input(&p[w_off..b_off], c_in, side, &ga, c_out, &mut gx);
                        g = gx;
                    } else {
                        g = Vec::new();
                    }
                }
            }
        }
        if opts.input_grad {
            out.input_grad = Some(g);
        }
        out
    }

    /// Mean binary cross-entropy over `idx`; writes its gradient into `grads`.
    pub fn loss_and_grad(&self, samples: &Samples, idx: &[usize], grads: &mut [f64]) -> Result<f64> {
        if grads.len() != self.params.len() {
            return Err(Error::dim("gradient buffer", self.params.len(), grads.len()));
        }
        if idx.is_empty() {
            return Err(Error::Insufficient("empty batch".into()));
        }
        grads.fill(0.0);
        let scale = 1.0 / idx.len() as f64;
        let mut loss = 0.0;
        for &i in idx {
            let tr = self.trace(samples.input(i))?;
            let y = samples.target(i);
            loss += bce_with_logit(tr.logit, y);
            let d = (sigmoid(tr.logit) - y) * scale;
            self.backward(&tr, d, Some(grads), BackwardOpts::default());
        }
        Ok(loss * scale)
    }

    /// Mean binary cross-entropy over `idx`.
    pub fn loss(&self, samples: &Samples, idx: &[usize]) -> Result<f64> {
        if idx.is_empty() {
            return Err(Error::Insufficient("empty batch".into()));
        }
        let mut loss = 0.0;
        for &i in idx {
            loss += bce_with_logit(self.logit(samples.input(i))?, samples.target(i));
        }
        Ok(loss / idx.len() as f64)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn relu_backward(g: &mut [f64], act: &[f64], guided: bool) {
    for (gi, &a) in g.iter_mut().zip(act) {
        if a <= 0.0 || (guided && *gi <= 0.0) {
            *gi = 0.0;
        }
    }
}

/// Valid output range along one axis for kernel offset `k`.
#[inline]
fn span(k: usize, side: usize) -> (usize, usize) {
    match k {
        0 => (1.min(side), side),
        1 => (0, side),
        _ => (0, side.saturating_sub(1)),
    }
}

fn conv_forward(x: &[f64], c_in: usize, side: usize, w: &[f64], b: &[f64], out: &mut [f64]) {
    let s2 = side * side;
    for (co, o) in out.chunks_exact_mut(s2).enumerate() {
        o.fill(b[co]);
        for ci in 0..c_in {
            let xp = &x[ci * s2..(ci + 1) * s2];
            for ky in 0..3 {
                let (y0, y1) = span(ky, side);
                for kx in 0..3 {
                    let (x0, x1) = span(kx, side);
                    if x0 >= x1 {
                        continue;
                    }
                    let wv = w[((co * c_in + ci) * 3 + ky) * 3 + kx];
                    for y in y0..y1 {
                        let iy = y + ky - 1;
                        let orow = &mut o[y * side + x0..y * side + x1];
                        let irow = &xp[iy * side + x0 + kx - 1..iy * side + x1 + kx - 1];
                        axpy(wv, irow, orow);
                    }
                }
            }
        }
    }
}

fn conv_backward_params(
    x: &[f64],
    c_in: usize,
    side: usize,
    gz: &[f64],
    c_out: usize,
    gw: &mut [f64],
    gb: &mut [f64],
) {
    let s2 = side * side;
    for co in 0..c_out {
        let gp = &gz[co * s2..(co + 1) * s2];
        gb[co] += gp.iter().sum::<f64>();
        for ci in 0..c_in {
            let xp = &x[ci * s2..(ci + 1) * s2];
            for ky in 0..3 {
                let (y0, y1) = span(ky, side);
                for kx in 0..3 {
                    let (x0, x1) = span(kx, side);
                    if x0 >= x1 {
                        continue;
                    }
                    let mut acc = 0.0;
                    for y in y0..y1 {
                        let iy = y + ky - 1;
                        acc += dot(
                            &gp[y * side + x0..y * side + x1],
                            &xp[iy * side + x0 + kx - 1..iy * side + x1 + kx - 1],
                        );
                    }
                    gw[((co * c_in + ci) * 3 + ky) * 3 + kx] += acc;
                }
            }
        }
    }
}

fn conv_backward_input(w: &[f64], c_in: usize, side: usize, gz: &[f64], c_out: usize, gx: &mut [f64]) {
    let s2 = side * side;
    for co in 0..c_out {
        let gp = &gz[co * s2..(co + 1) * s2];
        for ci in 0..c_in {
            let xg = &mut gx[ci * s2..(ci + 1) * s2];
            for ky in 0..3 {
                let (y0, y1) = span(ky, side);
                for kx in 0..3 {
                    let (x0, x1) = span(kx, side);
                    if x0 >= x1 {
                        continue;
                    }
                    let wv = w[((co * c_in + ci) * 3 + ky) * 3 + kx];
                    for y in y0..y1 {
                        let iy = y + ky - 1;
                        axpy(
                            wv,
                            &gp[y * side + x0..y * side + x1],
                            &mut xg[iy * side + x0 + kx - 1..iy * side + x1 + kx - 1],
                        );
                    }
                }
            }
        }
    }
}

/// 2x2 max pool; odd trailing rows and columns are dropped. Ties go to the
/// first position in row-major order.
pub(crate) fn pool_forward(act: &[f64], channels: usize, side: usize) -> (Vec<f64>, Vec<u32>) {
    let ps = side / 2;
    let s2 = side * side;
    let mut out = Vec::with_capacity(channels * ps * ps);
    let mut idx = Vec::with_capacity(channels * ps * ps);
    for c in 0..channels {
        for py in 0..ps {
            for px in 0..ps {
                let base = c * s2 + 2 * py * side + 2 * px;
                let mut best = base;
                for k in [base + 1, base + side, base + side + 1] {
                    if act[k] > act[best] {
                        best = k;
                    }
                }
                out.push(act[best]);
                idx.push(best as u32);
            }
        }
    }
    (out, idx)
}
