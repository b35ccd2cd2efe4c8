use std::ops::Range;

use ndarray::{concatenate, s, Array1, Array3, ArrayView1, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::layers::{dropout_mask, fill_uniform, max_pool, max_pool_backward, relu_mask, Conv2d, Dense};
use super::lstm::{LstmCell, LstmStep};
use super::params::ParamLayout;
use crate::error::{Error, Result};
use crate::topomap::TopoMap;

/// Layer sizes of both networks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Architecture {
    pub grid: usize,
    pub bands: usize,
    /// Number of input maps of the recurrent model.
    pub sequence: usize,
    /// Filters of each 3×3 convolution, grouped into blocks that each end in
    /// a 2×2 max-pool.
    pub blocks: Vec<Vec<usize>>,
    pub lstm_hidden: usize,
    pub variation_filters: usize,
    pub dense: usize,
    pub dropout: f64,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            grid: 32,
            bands: 5,
            sequence: 7,
            blocks: vec![vec![32, 32, 32, 32], vec![64, 64], vec![128]],
            lstm_hidden: 128,
            variation_filters: 64,
            dense: 512,
            dropout: 0.5,
        }
    }
}

impl Architecture {
    /// 8×8×2 maps, one block of two convolutions, hidden size 4.
    pub fn toy() -> Self {
        Architecture {
            grid: 8,
            bands: 2,
            sequence: 7,
            blocks: vec![vec![3, 4]],
            lstm_hidden: 4,
            variation_filters: 3,
            dense: 5,
            dropout: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.grid == 0 || self.bands == 0 || self.sequence == 0 {
            return bad("grid, bands and sequence must be positive".into());
        }
        if self.blocks.is_empty() || self.blocks.iter().any(|b| b.is_empty() || b.contains(&0)) {
            return bad(format!("invalid encoder blocks {:?}", self.blocks));
        }
        if !self.grid.is_multiple_of(1 << self.blocks.len()) {
            return bad(format!("grid {} is not divisible by 2^{}", self.grid, self.blocks.len()));
        }
        if self.feature_side() < 3 {
            return bad(format!("feature maps of side {} are too small for the 3×3 variation layer", self.feature_side()));
        }
        if self.lstm_hidden == 0 || self.variation_filters == 0 || self.dense == 0 {
            return bad("layer widths must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout rate {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }

    pub fn feature_side(&self) -> usize {
        self.grid >> self.blocks.len()
    }

    /// `(channels, side, side)` of one encoder output.
    pub fn feature_shape(&self) -> (usize, usize, usize) {
        let c = *self.blocks.last().and_then(|b| b.last()).unwrap_or(&0);
        (c, self.feature_side(), self.feature_side())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    /// Encoder and regression head on the last map of a sequence.
    Cnn,
    /// Shared encoder on every map, LSTM and variation branch.
    Full,
}

impl NetworkKind {
    pub(crate) fn code(self) -> u8 {
        match self {
            NetworkKind::Cnn => 0,
            NetworkKind::Full => 1,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(NetworkKind::Cnn),
            1 => Some(NetworkKind::Full),
            _ => None,
        }
    }
}

/// Per-band input standardisation and target scaling, fitted on training
/// data and stored with the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub band_mean: Vec<f64>,
    pub band_std: Vec<f64>,
    pub target_mean: f64,
    pub target_std: f64,
}

impl Normalization {
    pub fn identity(bands: usize) -> Self {
        Normalization {
            band_mean: vec![0.0; bands],
            band_std: vec![1.0; bands],
            target_mean: 0.0,
            target_std: 1.0,
        }
    }

    /// Mean and standard deviation per band over every pixel of `maps`, and
    /// of `targets`. Zero spreads are replaced by 1.
    pub fn fit<'a>(maps: impl IntoIterator<Item = &'a TopoMap>, targets: impl IntoIterator<Item = f64>) -> Result<Self> {
        let mut n = 0usize;
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        for m in maps {
            if sum.is_empty() {
                sum = vec![0.0; m.bands()];
                sq = vec![0.0; m.bands()];
            }
            if m.bands() != sum.len() {
                return Err(Error::Shape(format!("{} bands after {}", m.bands(), sum.len())));
            }
            for px in m.data.rows() {
                for (b, &v) in px.iter().enumerate() {
                    sum[b] += v as f64;
                    sq[b] += v as f64 * v as f64;
                }
            }
            n += m.grid() * m.grid();
        }
        let targets: Vec<f64> = targets.into_iter().collect();
        if n == 0 || targets.is_empty() {
            return Err(Error::Empty("normalization data"));
        }
        let spread = |s: f64, q: f64, n: f64| {
            let m = s / n;
            let sd = (q / n - m * m).max(0.0).sqrt();
            (m, if sd > 1e-12 { sd } else { 1.0 })
        };
        let (band_mean, band_std) = sum.iter().zip(&sq).map(|(&s, &q)| spread(s, q, n as f64)).unzip();
        let ts: f64 = targets.iter().sum();
        let tq: f64 = targets.iter().map(|t| t * t).sum();
        let (target_mean, target_std) = spread(ts, tq, targets.len() as f64);
        Ok(Normalization {
            band_mean,
            band_std,
            target_mean,
            target_std,
        })
    }
}

/// VGG-style stack of padded 3×3 convolutions with ReLU, each block
/// closed by a 2×2 max-pool.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnEncoder {
    blocks: Vec<Vec<Conv2d>>,
    input: (usize, usize, usize),
}

/// Activations of one encoder pass.
#[derive(Debug, Clone)]
struct EncoderTrace {
    /// Input of every convolution, in order.
    inputs: Vec<Array3<f64>>,
    /// Output (after ReLU) of every convolution, in order.
    outputs: Vec<Array3<f64>>,
    argmax: Vec<Vec<usize>>,
    out: Array3<f64>,
}

impl CnnEncoder {
    fn new(layout: &mut ParamLayout, arch: &Architecture) -> Self {
        let mut in_c = arch.bands;
        let blocks = arch
            .blocks
            .iter()
            .enumerate()
            .map(|(b, filters)| {
                filters
                    .iter()
                    .enumerate()
                    .map(|(l, &out_c)| {
                        let conv = Conv2d::new(layout, &format!("encoder.block{b}.conv{l}"), in_c, out_c, 3, 1);
                        in_c = out_c;
                        conv
                    })
                    .collect()
            })
            .collect();
        CnnEncoder {
            blocks,
            input: (arch.bands, arch.grid, arch.grid),
        }
    }

    pub fn conv_count(&self) -> usize {
        self.blocks.iter().map(Vec::len).sum()
    }

    fn convs(&self) -> impl Iterator<Item = &Conv2d> {
        self.blocks.iter().flatten()
    }

    fn forward(&self, p: &[f64], x: Array3<f64>) -> Result<EncoderTrace> {
        if x.dim() != self.input {
            return Err(Error::Shape(format!("encoder input {:?}, expected {:?}", x.dim(), self.input)));
        }
        let mut inputs = Vec::with_capacity(self.conv_count());
        let mut outputs = Vec::with_capacity(self.conv_count());
        let mut argmax = Vec::with_capacity(self.blocks.len());
        let mut side = self.input.1;
        let mut cur = x;
        for block in &self.blocks {
            for conv in block {
                let y = conv.forward(p, cur.view());
                inputs.push(cur);
                cur = y.clone();
                outputs.push(y);
            }
            let (pooled, arg) = max_pool(&cur);
            side /= 2;
            if pooled.dim().1 != side || pooled.dim().2 != side {
                return Err(Error::Shape(format!("block output {:?}, expected side {side}", pooled.dim())));
            }
            argmax.push(arg);
            cur = pooled;
        }
        Ok(EncoderTrace {
            inputs,
            outputs,
            argmax,
            out: cur,
        })
    }

    fn backward(&self, p: &[f64], trace: &EncoderTrace, dout: Array3<f64>, g: &mut [f64]) {
        let mut d = dout;
        let mut k = trace.inputs.len();
        for (b, block) in self.blocks.iter().enumerate().rev() {
            let pooled_from = trace.outputs[k - 1].dim();
            d = max_pool_backward(&d, &trace.argmax[b], pooled_from);
            for conv in block.iter().rev() {
                k -= 1;
                d = conv.backward(p, trace.inputs[k].view(), &trace.outputs[k], &d, g);
            }
        }
    }
}

/// `[dropout] → dense(ReLU) → dropout → dense(1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionHead {
    input_dropout: bool,
    rate: f64,
    hidden: Dense,
    output: Dense,
}

#[derive(Debug, Clone)]
struct HeadTrace {
    mask_in: Option<Array1<f64>>,
    masked_in: Array1<f64>,
    hidden: Array1<f64>,
    mask_hidden: Option<Array1<f64>>,
    masked_hidden: Array1<f64>,
}

impl RegressionHead {
    fn new(layout: &mut ParamLayout, inputs: usize, arch: &Architecture, input_dropout: bool) -> Self {
        RegressionHead {
            input_dropout,
            rate: arch.dropout,
            hidden: Dense::new(layout, "head.dense", inputs, arch.dense),
            output: Dense::new(layout, "head.output", arch.dense, 1),
        }
    }

    fn forward(&self, p: &[f64], x: Array1<f64>, rng: Option<&mut ChaCha8Rng>) -> (HeadTrace, f64) {
        let (mask_in, mask_hidden) = match rng {
            Some(rng) => {
                let a = self.input_dropout.then(|| dropout_mask(rng, x.len(), self.rate));
                let b = dropout_mask(rng, self.hidden.outputs, self.rate);
                (a, Some(b))
            }
            None => (None, None),
        };
        let masked_in = match &mask_in {
            Some(m) => x * m,
            None => x,
        };
        let mut hidden = self.hidden.forward(p, masked_in.view());
        hidden.mapv_inplace(|v| v.max(0.0));
        let masked_hidden = match &mask_hidden {
            Some(m) => &hidden * m,
            None => hidden.clone(),
        };
        let raw = self.output.forward(p, masked_hidden.view())[0];
        (
            HeadTrace {
                mask_in,
                masked_in,
                hidden,
                mask_hidden,
                masked_hidden,
            },
            raw,
        )
    }

    fn backward(&self, p: &[f64], t: &HeadTrace, draw: f64, g: &mut [f64]) -> Array1<f64> {
        let dy = Array1::from(vec![draw]);
        let mut d = self.output.backward(p, t.masked_hidden.view(), dy.view(), g);
        if let Some(m) = &t.mask_hidden {
            d *= m;
        }
        relu_mask(&mut d, &t.hidden);
        let mut dx = self.hidden.backward(p, t.masked_in.view(), d.view(), g);
        if let Some(m) = &t.mask_in {
            dx *= m;
        }
        dx
    }
}

/// A regression network over spectral head maps: either the CNN-only model
/// or the full convolutional-recurrent model.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    kind: NetworkKind,
    arch: Architecture,
    layout: ParamLayout,
    params: Vec<f64>,
    norm: Normalization,
    encoder: CnnEncoder,
    lstm: Option<LstmCell>,
    variation: Option<Conv2d>,
    head: RegressionHead,
}

impl Network {
    /// Builds the network with all parameters zero.
    pub fn zeros(kind: NetworkKind, arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let mut layout = ParamLayout::default();
        let encoder = CnnEncoder::new(&mut layout, &arch);
        let (fc, fh, fw) = arch.feature_shape();
        let features = fc * fh * fw;
        let (lstm, variation, head) = match kind {
            NetworkKind::Cnn => (None, None, RegressionHead::new(&mut layout, features, &arch, false)),
            NetworkKind::Full => {
                let lstm = LstmCell::new(&mut layout, "lstm", features, arch.lstm_hidden);
                let var = Conv2d::new(&mut layout, "variation.conv", fc * arch.sequence, arch.variation_filters, 3, 0);
                let (vh, vw) = var.output_size(fh, fw);
                let head_in = arch.lstm_hidden + arch.variation_filters * vh * vw;
                let head = RegressionHead::new(&mut layout, head_in, &arch, true);
                (Some(lstm), Some(var), head)
            }
        };
        Ok(Network {
            kind,
            params: vec![0.0; layout.len()],
            norm: Normalization::identity(arch.bands),
            arch,
            layout,
            encoder,
            lstm,
            variation,
            head,
        })
    }

    /// Builds the network with seeded random initial parameters.
    ///
    /// Convolution and dense weights are uniform in `±√(6/fan_in)` (`±√(3/fan_in)`
    /// for the linear output), biases zero; LSTM input and peephole matrices
    /// are small uniform, recurrent matrices orthogonal, forget bias 1.
    pub fn new(kind: NetworkKind, arch: Architecture, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(kind, arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = &mut net.params;
        for conv in net.encoder.convs().chain(net.variation.as_ref()) {
            let fan_in = conv.in_channels * conv.kernel * conv.kernel;
            fill_uniform(&mut rng, conv.weight.of_mut(p), (6.0 / fan_in as f64).sqrt());
        }
        if let Some(lstm) = &net.lstm {
            for s in lstm.input_matrices() {
                fill_uniform(&mut rng, s.of_mut(p), (1.0 / lstm.inputs as f64).sqrt());
            }
            for s in lstm.recurrent_matrices() {
                orthogonal(&mut rng, lstm.hidden, s.of_mut(p));
            }
            for s in lstm.peephole_matrices() {
                fill_uniform(&mut rng, s.of_mut(p), 0.1 * (3.0 / lstm.hidden as f64).sqrt());
            }
            lstm.forget_bias().of_mut(p).fill(1.0);
        }
        let h = &net.head.hidden;
        fill_uniform(&mut rng, h.weight.of_mut(p), (6.0 / h.inputs as f64).sqrt());
        let o = &net.head.output;
        fill_uniform(&mut rng, o.weight.of_mut(p), (3.0 / o.inputs as f64).sqrt());
        Ok(net)
    }

    pub fn cnn(arch: Architecture, seed: u64) -> Result<Self> {
        Self::new(NetworkKind::Cnn, arch, seed)
    }

    pub fn full(arch: Architecture, seed: u64) -> Result<Self> {
        Self::new(NetworkKind::Full, arch, seed)
    }

    pub fn kind(&self) -> NetworkKind {
        self.kind
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn normalization(&self) -> &Normalization {
        &self.norm
    }

    pub fn set_normalization(&mut self, norm: Normalization) -> Result<()> {
        if norm.band_mean.len() != self.arch.bands || norm.band_std.len() != self.arch.bands {
            return Err(Error::Shape(format!(
                "normalization for {} bands, network has {}",
                norm.band_mean.len(),
                self.arch.bands
            )));
        }
        self.norm = norm;
        Ok(())
    }

    pub fn encoder(&self) -> &CnnEncoder {
        &self.encoder
    }

    /// Parameter range of the encoder; identical in both network kinds.
    pub fn encoder_range(&self) -> Range<usize> {
        let last = self.encoder.convs().last().expect("at least one convolution");
        0..last.bias.offset + last.bias.len
    }

    /// Copies encoder parameters and normalization from another network
    /// with the same encoder.
    pub fn load_encoder_from(&mut self, other: &Network) -> Result<()> {
        if self.encoder != other.encoder {
            return Err(Error::Shape("encoders differ".into()));
        }
        let r = self.encoder_range();
        self.params[r.clone()].copy_from_slice(&other.params[r]);
        self.norm = other.norm.clone();
        Ok(())
    }

    /// Rounds every parameter to `f32`, the precision of model files.
    pub fn round_to_f32(&mut self) {
        for v in &mut self.params {
            *v = *v as f32 as f64;
        }
    }

    /// Standardised `[band, row, col]` input.
    fn prepare(&self, map: &TopoMap) -> Result<Array3<f64>> {
        let expect = (self.arch.grid, self.arch.grid, self.arch.bands);
        if map.data.dim() != expect {
            return Err(Error::Shape(format!("map {:?}, network expects {:?}", map.data.dim(), expect)));
        }
        let n = &self.norm;
        Ok(Array3::from_shape_fn((expect.2, expect.0, expect.1), |(b, r, c)| {
            (map.data[[r, c, b]] as f64 - n.band_mean[b]) / n.band_std[b]
        }))
    }

    fn check_inputs(&self, inputs: &[TopoMap]) -> Result<()> {
        let ok = match self.kind {
            NetworkKind::Cnn => !inputs.is_empty(),
            NetworkKind::Full => inputs.len() == self.arch.sequence,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!("{} input maps for a {:?} network of sequence {}", inputs.len(), self.kind, self.arch.sequence)))
        }
    }

    /// Inference-mode prediction in Hz.
    pub fn predict(&self, inputs: &[TopoMap]) -> Result<f64> {
        self.predict_with(&self.params, inputs, None)
    }

    /// Prediction with explicit parameters; `dropout_seed` switches dropout
    /// on with masks drawn from that seed.
    pub fn predict_with(&self, params: &[f64], inputs: &[TopoMap], dropout_seed: Option<u64>) -> Result<f64> {
        Ok(self.forward(params, inputs, dropout_seed, None)?.prediction)
    }

    /// Inference with a separate encoder parameter vector per input map;
    /// every other layer uses `params`.
    pub fn predict_untied(&self, params: &[f64], encoders: &[Vec<f64>], inputs: &[TopoMap]) -> Result<f64> {
        if encoders.len() != inputs.len() || encoders.iter().any(|e| e.len() != params.len()) {
            return Err(Error::Shape("one full parameter vector per input map is required".into()));
        }
        Ok(self.forward(params, inputs, None, Some(encoders))?.prediction)
    }

    /// Adds `d(scale · (ŷ - target)²)/dθ` to `grad` and returns `ŷ`.
    pub fn accumulate_gradient(
        &self,
        params: &[f64],
        inputs: &[TopoMap],
        target: f64,
        dropout_seed: Option<u64>,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<f64> {
        if params.len() != self.layout.len() || grad.len() != self.layout.len() {
            return Err(Error::Shape(format!(
                "{} params / {} grads for {} parameters",
                params.len(),
                grad.len(),
                self.layout.len()
            )));
        }
        let trace = self.forward(params, inputs, dropout_seed, None)?;
        let dpred = scale * 2.0 * (trace.prediction - target);
        self.backward(params, &trace, dpred, grad);
        Ok(trace.prediction)
    }

    fn forward(&self, p: &[f64], inputs: &[TopoMap], dropout_seed: Option<u64>, untied: Option<&[Vec<f64>]>) -> Result<Trace> {
        self.check_inputs(inputs)?;
        let mut rng = dropout_seed.map(ChaCha8Rng::seed_from_u64);
        let (encoded, lstm, variation, head_in) = match self.kind {
            NetworkKind::Cnn => {
                let pe = untied.and_then(|u| u.last()).map_or(p, |v| v.as_slice());
                let e = self.encoder.forward(pe, self.prepare(inputs.last().expect("checked"))?)?;
                let flat = flatten(&e.out);
                (vec![e], None, None, flat)
            }
            NetworkKind::Full => {
                let lstm = self.lstm.as_ref().expect("full network");
                let var = self.variation.as_ref().expect("full network");
                let encoded = inputs
                    .iter()
                    .enumerate()
                    .map(|(t, m)| self.encoder.forward(untied.map_or(p, |u| u[t].as_slice()), self.prepare(m)?))
                    .collect::<Result<Vec<_>>>()?;
                let xs: Vec<Array1<f64>> = encoded.iter().map(|e| flatten(&e.out)).collect();
                let steps = lstm.forward(p, &xs)?;
                let views: Vec<_> = encoded.iter().map(|e| e.out.view()).collect();
                let stacked = concatenate(Axis(0), &views).expect("equal feature shapes");
                let var_out = var.forward(p, stacked.view());
                let h_last = steps.last().expect("non-empty sequence").h.view();
                let head_in = concatenate(Axis(0), &[h_last, flatten(&var_out).view()]).expect("1-d");
                (encoded, Some(steps), Some((stacked, var_out)), head_in)
            }
        };
        let (head, raw) = self.head.forward(p, head_in, rng.as_mut());
        Ok(Trace {
            encoded,
            lstm,
            variation,
            head,
            prediction: self.norm.target_mean + self.norm.target_std * raw,
        })
    }

    fn backward(&self, p: &[f64], t: &Trace, dpred: f64, g: &mut [f64]) {
        let dhead = self.head.backward(p, &t.head, dpred * self.norm.target_std, g);
        let (fc, fh, fw) = self.arch.feature_shape();
        match self.kind {
            NetworkKind::Cnn => {
                let d = dhead.into_shape_with_order((fc, fh, fw)).expect("feature size");
                self.encoder.backward(p, &t.encoded[0], d, g);
            }
            NetworkKind::Full => {
                let lstm = self.lstm.as_ref().expect("full network");
                let var = self.variation.as_ref().expect("full network");
                let (stacked, var_out) = t.variation.as_ref().expect("full trace");
                let hidden = self.arch.lstm_hidden;
                let dvar = dhead
                    .slice(s![hidden..])
                    .to_owned()
                    .into_shape_with_order(var_out.dim())
                    .expect("variation size");
                let dstacked = var.backward(p, stacked.view(), var_out, &dvar, g);
                let steps = t.lstm.as_ref().expect("full trace");
                let dxs = lstm.backward(p, steps, dhead.slice(s![..hidden]), g);
                for (k, (e, dx)) in t.encoded.iter().zip(dxs).enumerate() {
                    let d = dstacked.slice(s![k * fc..(k + 1) * fc, .., ..]).to_owned()
                        + dx.into_shape_with_order((fc, fh, fw)).expect("feature size");
                    self.encoder.backward(p, e, d, g);
                }
            }
        }
    }
}

struct Trace {
    encoded: Vec<EncoderTrace>,
    lstm: Option<Vec<LstmStep>>,
    variation: Option<(Array3<f64>, Array3<f64>)>,
    head: HeadTrace,
    prediction: f64,
}

fn flatten(a: &Array3<f64>) -> Array1<f64> {
    ArrayView1::from(a.as_slice().expect("standard layout")).to_owned()
}

/// Random orthogonal `n×n` matrix by Gram-Schmidt on Gaussian rows.
fn orthogonal(rng: &mut ChaCha8Rng, n: usize, out: &mut [f64]) {
    loop {
        let mut rows: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| StandardNormal.sample(rng)).collect()).collect();
        let mut ok = true;
        for i in 0..n {
            for j in 0..i {
                let d: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
                let rj = rows[j].clone();
                rows[i].iter_mut().zip(&rj).for_each(|(a, b)| *a -= d * b);
            }
            let norm = rows[i].iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-8 {
                ok = false;
                break;
            }
            rows[i].iter_mut().for_each(|v| *v /= norm);
        }
        if ok {
            out.copy_from_slice(&rows.concat());
            return;
        }
    }
}

/// Exact number of trainable scalars.
pub fn count_parameters(net: &Network) -> usize {
    net.layout().len()
}
