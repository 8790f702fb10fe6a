//! Batched forward pass and backpropagation through time.
//!
//! All parameters of a network live in one flat vector; [`Topology`] records
//! where each layer's tensors sit in it. Sequences are processed time-major:
//! `xs[t]` is the `batch × input` slice at step `t`.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cell::{sigmoid, CellWeights};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkKind {
    Simple,
    Stacked,
    Bidirectional,
    EncoderDecoder,
}

impl NetworkKind {
    pub const ALL: [NetworkKind; 4] = [
        NetworkKind::Simple,
        NetworkKind::Stacked,
        NetworkKind::Bidirectional,
        NetworkKind::EncoderDecoder,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub kind: NetworkKind,
}

impl NetworkConfig {
    pub fn new(kind: NetworkKind) -> Self {
        Self { kind }
    }

    /// Number of recurrent layers. Bidirectional counts its two directions as
    /// one layer, the encoder-decoder pair as two.
    pub fn layers(&self) -> usize {
        match self.kind {
            NetworkKind::Simple | NetworkKind::Bidirectional => 1,
            NetworkKind::Stacked | NetworkKind::EncoderDecoder => 2,
        }
    }
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::new(NetworkKind::Simple)
    }
}

/// Placement of one recurrent layer inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub input: usize,
    pub hidden: usize,
    pub offset: usize,
}

impl LayerSpec {
    fn gates(&self) -> usize {
        4 * self.hidden
    }

    fn wx(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.input * self.gates()
    }

    fn wh(&self) -> std::ops::Range<usize> {
        let start = self.wx().end;
        start..start + self.hidden * self.gates()
    }

    fn bias(&self) -> std::ops::Range<usize> {
        let start = self.wh().end;
        start..start + self.gates()
    }

    fn len(&self) -> usize {
        self.bias().end - self.offset
    }
}

/// Layer layout of a network. Layer roles by kind:
/// Simple `[lstm]`, Stacked `[lower, upper]`, Bidirectional `[forward,
/// backward]`, EncoderDecoder `[encoder, decoder]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    pub kind: NetworkKind,
    pub hidden: usize,
    pub layers: Vec<LayerSpec>,
    pub head_input: usize,
    pub head_offset: usize,
    pub param_count: usize,
}

impl Topology {
    pub fn new(kind: NetworkKind, hidden: usize) -> Self {
        let mut offset = 0;
        let mut layer = |input: usize| {
            let spec = LayerSpec {
                input,
                hidden,
                offset,
            };
            offset += spec.len();
            spec
        };
        let layers = match kind {
            NetworkKind::Simple => vec![layer(1)],
            NetworkKind::Stacked | NetworkKind::EncoderDecoder => vec![layer(1), layer(hidden)],
            NetworkKind::Bidirectional => vec![layer(1), layer(1)],
        };
        let head_input = if kind == NetworkKind::Bidirectional {
            2 * hidden
        } else {
            hidden
        };
        Self {
            kind,
            hidden,
            layers,
            head_input,
            head_offset: offset,
            param_count: offset + head_input + 1,
        }
    }

    /// Named tensors with shapes, in parameter-vector order.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, std::ops::Range<usize>)> {
        let mut out = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            out.push((format!("layer{i}.wx"), vec![l.input, l.gates()], l.wx()));
            out.push((format!("layer{i}.wh"), vec![l.hidden, l.gates()], l.wh()));
            out.push((format!("layer{i}.bias"), vec![l.gates()], l.bias()));
        }
        let h = self.head_offset;
        out.push((
            "head.w".into(),
            vec![self.head_input],
            h..h + self.head_input,
        ));
        out.push((
            "head.bias".into(),
            vec![1],
            h + self.head_input..self.param_count,
        ));
        out
    }

    /// Whether layer `i` carries its state across batches in stateful mode.
    /// Only layers that read the sequence forward in time do.
    pub fn carries_state(&self, i: usize) -> bool {
        match self.kind {
            NetworkKind::Simple | NetworkKind::Stacked => true,
            NetworkKind::Bidirectional | NetworkKind::EncoderDecoder => i == 0,
        }
    }

    /// Glorot-uniform weights, zero biases except a unit forget-gate bias.
    pub fn init_params<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let mut p = vec![0.0; self.param_count];
        for l in &self.layers {
            let g = l.gates();
            let lim_x = (6.0 / (l.input + g) as f64).sqrt();
            let lim_h = (6.0 / (l.hidden + g) as f64).sqrt();
            p[l.wx()]
                .iter_mut()
                .for_each(|w| *w = rng.random_range(-lim_x..lim_x));
            p[l.wh()]
                .iter_mut()
                .for_each(|w| *w = rng.random_range(-lim_h..lim_h));
            let b = l.bias();
            p[b.start + l.hidden..b.start + 2 * l.hidden].fill(1.0);
        }
        let lim = (6.0 / (self.head_input + 1) as f64).sqrt();
        let h = self.head_offset;
        p[h..h + self.head_input]
            .iter_mut()
            .for_each(|w| *w = rng.random_range(-lim..lim));
        p
    }

    /// Copies layer `i`'s weights out of `params`.
    pub fn cell_weights(&self, params: &[f64], i: usize) -> CellWeights {
        let l = &self.layers[i];
        CellWeights {
            input: l.input,
            hidden: l.hidden,
            wx: params[l.wx()].to_vec(),
            wh: params[l.wh()].to_vec(),
            bias: params[l.bias()].to_vec(),
        }
    }
}

/// Hidden and cell state of one layer for a batch, each `batch × hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState {
    pub h: Array2<f64>,
    pub c: Array2<f64>,
}

impl LayerState {
    pub fn zeros(batch: usize, hidden: usize) -> Self {
        Self {
            h: Array2::zeros((batch, hidden)),
            c: Array2::zeros((batch, hidden)),
        }
    }

    /// First `batch` rows, zero-padded if the state is smaller.
    pub fn resized(&self, batch: usize) -> Self {
        let hidden = self.h.ncols();
        let mut out = Self::zeros(batch, hidden);
        let rows = batch.min(self.h.nrows());
        out.h
            .slice_mut(s![..rows, ..])
            .assign(&self.h.slice(s![..rows, ..]));
        out.c
            .slice_mut(s![..rows, ..])
            .assign(&self.c.slice(s![..rows, ..]));
        out
    }
}

/// Inverted-dropout masks for one layer, fixed across the time steps of a
/// sequence: `input` is `batch × input`, `recurrent` is `batch × hidden`.
#[derive(Debug, Clone)]
pub struct LayerMasks {
    pub input: Array2<f64>,
    pub recurrent: Array2<f64>,
}

impl LayerMasks {
    pub fn sample<R: Rng>(
        rng: &mut R,
        batch: usize,
        spec: &LayerSpec,
        dropout: f64,
        recurrent_dropout: f64,
    ) -> Self {
        let mut draw = |shape: (usize, usize), rate: f64| {
            let keep = 1.0 / (1.0 - rate);
            Array2::from_shape_fn(shape, |_| {
                if rate > 0.0 && rng.random::<f64>() < rate {
                    0.0
                } else if rate > 0.0 {
                    keep
                } else {
                    1.0
                }
            })
        };
        let input = draw((batch, spec.input), dropout);
        let recurrent = draw((batch, spec.hidden), recurrent_dropout);
        Self { input, recurrent }
    }
}

struct StepCache {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    gates: Array2<f64>,
    tanh_c: Array2<f64>,
}

pub(crate) struct LayerRun {
    steps: Vec<StepCache>,
    pub outputs: Vec<Array2<f64>>,
    pub last: LayerState,
    masks: Option<LayerMasks>,
}

fn view<'a>(
    params: &'a [f64],
    range: std::ops::Range<usize>,
    shape: (usize, usize),
) -> ArrayView2<'a, f64> {
    ArrayView2::from_shape(shape, &params[range]).expect("tensor shape matches layout")
}

fn view_mut<'a>(
    params: &'a mut [f64],
    range: std::ops::Range<usize>,
    shape: (usize, usize),
) -> ArrayViewMut2<'a, f64> {
    ArrayViewMut2::from_shape(shape, &mut params[range]).expect("tensor shape matches layout")
}

fn layer_forward(
    params: &[f64],
    spec: &LayerSpec,
    xs: &[Array2<f64>],
    init: LayerState,
    masks: Option<LayerMasks>,
) -> LayerRun {
    let hd = spec.hidden;
    let g = spec.gates();
    let wx = view(params, spec.wx(), (spec.input, g));
    let wh = view(params, spec.wh(), (hd, g));
    let bias = view(params, spec.bias(), (1, g));
    let batch = init.h.nrows();

    let mut h = init.h;
    let mut c = init.c;
    let mut steps = Vec::with_capacity(xs.len());
    let mut outputs = Vec::with_capacity(xs.len());
    for x_raw in xs {
        let (x, h_in) = match &masks {
            Some(m) => (x_raw * &m.input, &h * &m.recurrent),
            None => (x_raw.clone(), h.clone()),
        };
        let mut z = Array2::zeros((batch, g));
        z.assign(&bias.broadcast((batch, g)).expect("bias broadcasts"));
        general_mat_mul(1.0, &x, &wx, 1.0, &mut z);
        general_mat_mul(1.0, &h_in, &wh, 1.0, &mut z);

        let mut c_new = Array2::zeros((batch, hd));
        let mut tanh_c = Array2::zeros((batch, hd));
        let mut h_new = Array2::zeros((batch, hd));
        for b in 0..batch {
            let mut zr = z.row_mut(b);
            let zs = zr.as_slice_mut().expect("row-major");
            for j in 0..hd {
                zs[j] = sigmoid(zs[j]);
                zs[hd + j] = sigmoid(zs[hd + j]);
                zs[2 * hd + j] = zs[2 * hd + j].tanh();
                zs[3 * hd + j] = sigmoid(zs[3 * hd + j]);
                let cv = zs[hd + j] * c[[b, j]] + zs[j] * zs[2 * hd + j];
                let tc = cv.tanh();
                c_new[[b, j]] = cv;
                tanh_c[[b, j]] = tc;
                h_new[[b, j]] = zs[3 * hd + j] * tc;
            }
        }
        steps.push(StepCache {
            x,
            h_prev: h_in,
            c_prev: c,
            gates: z,
            tanh_c,
        });
        outputs.push(h_new.clone());
        h = h_new;
        c = c_new;
    }
    LayerRun {
        steps,
        outputs,
        last: LayerState { h, c },
        masks,
    }
}

/// Accumulates parameter gradients into `grads` and returns the gradient with
/// respect to each step's (unmasked) input.
fn layer_backward(
    params: &[f64],
    grads: &mut [f64],
    spec: &LayerSpec,
    run: &LayerRun,
    d_outputs: &[Option<Array2<f64>>],
) -> Vec<Array2<f64>> {
    let hd = spec.hidden;
    let g = spec.gates();
    let wx = view(params, spec.wx(), (spec.input, g));
    let wh = view(params, spec.wh(), (hd, g));
    let batch = run.last.h.nrows();

    let mut dh_next = Array2::<f64>::zeros((batch, hd));
    let mut dc_next = Array2::<f64>::zeros((batch, hd));
    let mut dxs = vec![Array2::zeros((0, 0)); run.steps.len()];
    for t in (0..run.steps.len()).rev() {
        let st = &run.steps[t];
        let mut dh = dh_next;
        if let Some(d) = &d_outputs[t] {
            dh += d;
        }
        let mut dz = Array2::<f64>::zeros((batch, g));
        let mut dc_prev = Array2::<f64>::zeros((batch, hd));
        for b in 0..batch {
            let gs = st.gates.row(b);
            let gs = gs.as_slice().expect("row-major");
            let mut dzr = dz.row_mut(b);
            let dzs = dzr.as_slice_mut().expect("row-major");
            for j in 0..hd {
                let (i_g, f_g, c_g, o_g) = (gs[j], gs[hd + j], gs[2 * hd + j], gs[3 * hd + j]);
                let tc = st.tanh_c[[b, j]];
                let dhv = dh[[b, j]];
                let d_o = dhv * tc;
                let dc = dhv * o_g * (1.0 - tc * tc) + dc_next[[b, j]];
                dzs[j] = dc * c_g * i_g * (1.0 - i_g);
                dzs[hd + j] = dc * st.c_prev[[b, j]] * f_g * (1.0 - f_g);
                dzs[2 * hd + j] = dc * i_g * (1.0 - c_g * c_g);
                dzs[3 * hd + j] = d_o * o_g * (1.0 - o_g);
                dc_prev[[b, j]] = dc * f_g;
            }
        }
        {
            let mut gwx = view_mut(grads, spec.wx(), (spec.input, g));
            general_mat_mul(1.0, &st.x.t(), &dz, 1.0, &mut gwx);
        }
        {
            let mut gwh = view_mut(grads, spec.wh(), (hd, g));
            general_mat_mul(1.0, &st.h_prev.t(), &dz, 1.0, &mut gwh);
        }
        {
            let mut gb = view_mut(grads, spec.bias(), (1, g));
            gb.row_mut(0).scaled_add(1.0, &dz.sum_axis(Axis(0)));
        }
        let mut dx = Array2::zeros((batch, spec.input));
        general_mat_mul(1.0, &dz, &wx.t(), 0.0, &mut dx);
        let mut dh_prev = Array2::zeros((batch, hd));
        general_mat_mul(1.0, &dz, &wh.t(), 0.0, &mut dh_prev);
        if let Some(m) = &run.masks {
            dx *= &m.input;
            dh_prev *= &m.recurrent;
        }
        dxs[t] = dx;
        dh_next = dh_prev;
        dc_next = dc_prev;
    }
    dxs
}

/// Everything the backward pass needs from a forward pass.
pub(crate) struct ForwardPass {
    pub predictions: Vec<f64>,
    runs: Vec<LayerRun>,
    head_in: Array2<f64>,
    steps: usize,
}

impl ForwardPass {
    /// Final states of each layer, for stateful carry-over.
    pub fn final_states(&self) -> Vec<LayerState> {
        self.runs.iter().map(|r| r.last.clone()).collect()
    }
}

/// Runs the network on `inputs` (`batch × window`). `init` gives each layer's
/// starting state (zeros when `None`); `masks` enables dropout.
pub(crate) fn forward(
    topo: &Topology,
    params: &[f64],
    inputs: ArrayView2<'_, f64>,
    init: Option<&[LayerState]>,
    masks: Option<Vec<LayerMasks>>,
) -> ForwardPass {
    let (batch, steps) = inputs.dim();
    let hd = topo.hidden;
    let xs: Vec<Array2<f64>> = (0..steps)
        .map(|t| inputs.slice(s![.., t..t + 1]).to_owned())
        .collect();
    let start = |i: usize| match init {
        Some(states) if topo.carries_state(i) => states[i].resized(batch),
        _ => LayerState::zeros(batch, hd),
    };
    let mut masks = masks.map(|m| m.into_iter().map(Some).collect::<Vec<_>>());
    let mut take_mask = |i: usize| masks.as_mut().and_then(|m| m[i].take());

    let (runs, head_in) = match topo.kind {
        NetworkKind::Simple => {
            let r0 = layer_forward(params, &topo.layers[0], &xs, start(0), take_mask(0));
            let head = r0.last.h.clone();
            (vec![r0], head)
        }
        NetworkKind::Stacked => {
            let r0 = layer_forward(params, &topo.layers[0], &xs, start(0), take_mask(0));
            let r1 = layer_forward(params, &topo.layers[1], &r0.outputs, start(1), take_mask(1));
            let head = r1.last.h.clone();
            (vec![r0, r1], head)
        }
        NetworkKind::Bidirectional => {
            let rev: Vec<Array2<f64>> = xs.iter().rev().cloned().collect();
            let rf = layer_forward(params, &topo.layers[0], &xs, start(0), take_mask(0));
            let rb = layer_forward(params, &topo.layers[1], &rev, start(1), take_mask(1));
            let head = ndarray::concatenate(Axis(1), &[rf.last.h.view(), rb.last.h.view()])
                .expect("equal batch sizes");
            (vec![rf, rb], head)
        }
        NetworkKind::EncoderDecoder => {
            let enc = layer_forward(params, &topo.layers[0], &xs, start(0), take_mask(0));
            let summary = vec![enc.last.h.clone()];
            let dec = layer_forward(params, &topo.layers[1], &summary, start(1), take_mask(1));
            let head = dec.last.h.clone();
            (vec![enc, dec], head)
        }
    };

    let w = &params[topo.head_offset..topo.head_offset + topo.head_input];
    let bias = params[topo.head_offset + topo.head_input];
    let predictions = head_in
        .rows()
        .into_iter()
        .map(|r| r.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + bias)
        .collect();
    ForwardPass {
        predictions,
        runs,
        head_in,
        steps,
    }
}

/// Gradient of a loss with respect to all parameters, given the loss gradient
/// with respect to each prediction.
pub(crate) fn backward(
    topo: &Topology,
    params: &[f64],
    pass: &ForwardPass,
    d_pred: &[f64],
) -> Vec<f64> {
    let mut grads = vec![0.0; topo.param_count];
    let hi = topo.head_input;
    let h = topo.head_offset;
    let batch = d_pred.len();
    for (b, &dp) in d_pred.iter().enumerate() {
        for k in 0..hi {
            grads[h + k] += dp * pass.head_in[[b, k]];
        }
        grads[h + hi] += dp;
    }
    let w = &params[h..h + hi];
    let d_head = Array2::from_shape_fn((batch, hi), |(b, k)| d_pred[b] * w[k]);

    let last_only = |d: Array2<f64>, len: usize| {
        let mut v: Vec<Option<Array2<f64>>> = vec![None; len];
        v[len - 1] = Some(d);
        v
    };
    let steps = pass.steps;
    let hd = topo.hidden;
    match topo.kind {
        NetworkKind::Simple => {
            layer_backward(
                params,
                &mut grads,
                &topo.layers[0],
                &pass.runs[0],
                &last_only(d_head, steps),
            );
        }
        NetworkKind::Stacked => {
            let dx1 = layer_backward(
                params,
                &mut grads,
                &topo.layers[1],
                &pass.runs[1],
                &last_only(d_head, steps),
            );
            let d0: Vec<Option<Array2<f64>>> = dx1.into_iter().map(Some).collect();
            layer_backward(params, &mut grads, &topo.layers[0], &pass.runs[0], &d0);
        }
        NetworkKind::Bidirectional => {
            let df = d_head.slice(s![.., ..hd]).to_owned();
            let db = d_head.slice(s![.., hd..]).to_owned();
            layer_backward(
                params,
                &mut grads,
                &topo.layers[0],
                &pass.runs[0],
                &last_only(df, steps),
            );
            layer_backward(
                params,
                &mut grads,
                &topo.layers[1],
                &pass.runs[1],
                &last_only(db, steps),
            );
        }
        NetworkKind::EncoderDecoder => {
            let mut dx_dec = layer_backward(
                params,
                &mut grads,
                &topo.layers[1],
                &pass.runs[1],
                &[Some(d_head)],
            );
            let d_summary = dx_dec.pop().expect("one decoder step");
            layer_backward(
                params,
                &mut grads,
                &topo.layers[0],
                &pass.runs[0],
                &last_only(d_summary, steps),
            );
        }
    }
    grads
}

/// Mean squared error and its gradient with respect to each prediction.
pub(crate) fn mse_with_grad(pred: &[f64], target: &[f64]) -> (f64, Vec<f64>) {
    let n = pred.len() as f64;
    let loss = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n;
    let grad = pred
        .iter()
        .zip(target)
        .map(|(p, t)| 2.0 * (p - t) / n)
        .collect();
    (loss, grad)
}
