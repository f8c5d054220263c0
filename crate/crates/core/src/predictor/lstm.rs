//! Stacked LSTM with a dense head, decoding autoregressively after the
//! encoder has consumed the observed window.
//!
//! Time steps `0..N` read the observed bone vectors. The head output after
//! step `N-1` is the first prediction; each later step reads the previous
//! prediction. Dropout masks act on every layer output (the head sees the
//! masked top layer) and are held fixed over time, one mask per sequence.

use ndarray::{s, Array1, Array2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{relative_error, uniform_array, Dense, Parameters, WeightFile};

pub const POSE_DIM: usize = 6;
pub const PREDICTOR_VERSION: &str = "hrcplan-lstm-predictor/1";

#[derive(Clone, Debug, PartialEq)]
pub struct LstmLayer {
    /// input × 4h, gate blocks ordered input, forget, cell, output.
    pub w_x: Array2<f64>,
    /// h × 4h
    pub w_h: Array2<f64>,
    pub b: Array1<f64>,
}

impl LstmLayer {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_x: Array2::zeros((input, 4 * hidden)),
            w_h: Array2::zeros((hidden, 4 * hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    pub fn init(input: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut b = Array1::zeros(4 * hidden);
        b.slice_mut(s![hidden..2 * hidden]).fill(1.0);
        Self {
            w_x: uniform_array(input, 4 * hidden, bound, rng),
            w_h: uniform_array(hidden, 4 * hidden, bound, rng),
            b,
        }
    }

    pub fn input(&self) -> usize {
        self.w_x.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.w_h.nrows()
    }

    /// One recurrence step; returns (activated gates, c, tanh c, h).
    fn step(&self, x: &Array2<f64>, h_prev: &Array2<f64>, c_prev: &Array2<f64>) -> StepOut {
        let h = self.hidden();
        let mut gates = x.dot(&self.w_x) + h_prev.dot(&self.w_h) + &self.b;
        for mut row in gates.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = if (2 * h..3 * h).contains(&j) { v.tanh() } else { sigmoid(*v) };
            }
        }
        let i = gates.slice(s![.., 0..h]);
        let f = gates.slice(s![.., h..2 * h]);
        let g = gates.slice(s![.., 2 * h..3 * h]);
        let o = gates.slice(s![.., 3 * h..4 * h]);
        let c = &f * c_prev + &i * &g;
        let tanh_c = c.mapv(f64::tanh);
        let h_new = &o * &tanh_c;
        StepOut {
            gates,
            c,
            tanh_c,
            h: h_new,
        }
    }
}

struct StepOut {
    gates: Array2<f64>,
    c: Array2<f64>,
    tanh_c: Array2<f64>,
    h: Array2<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictorWeights {
    pub version: String,
    pub layers: Vec<LstmLayer>,
    pub head: Dense,
}

impl PredictorWeights {
    pub fn zeros(hidden: &[usize]) -> Self {
        let mut layers = Vec::with_capacity(hidden.len());
        let mut input = POSE_DIM;
        for &h in hidden {
            layers.push(LstmLayer::zeros(input, h));
            input = h;
        }
        Self {
            version: PREDICTOR_VERSION.to_string(),
            layers,
            head: Dense::zeros(input, POSE_DIM),
        }
    }

    pub fn init(hidden: &[usize], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(hidden.len());
        let mut input = POSE_DIM;
        for &h in hidden {
            layers.push(LstmLayer::init(input, h, &mut rng));
            input = h;
        }
        let bound = (6.0 / (input + POSE_DIM) as f64).sqrt();
        Self {
            version: PREDICTOR_VERSION.to_string(),
            layers,
            head: Dense::uniform(input, POSE_DIM, bound, &mut rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(&self.hidden_sizes())
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(LstmLayer::hidden).collect()
    }

    /// `[6, h1, .., hL, 6]`
    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut v = vec![POSE_DIM];
        v.extend(self.hidden_sizes());
        v.push(POSE_DIM);
        v
    }

    pub fn validate(&self) -> Result<()> {
        let mut input = POSE_DIM;
        for (i, l) in self.layers.iter().enumerate() {
            let h = l.hidden();
            if l.input() != input || l.w_x.ncols() != 4 * h || l.w_h.ncols() != 4 * h || l.b.len() != 4 * h {
                return Err(Error::ShapeMismatch(format!("LSTM layer {i} dimensions do not chain")));
            }
            input = h;
        }
        if self.head.w.dim() != (input, POSE_DIM) || self.head.b.len() != POSE_DIM {
            return Err(Error::ShapeMismatch("dense head must map the top hidden state to 6 values".into()));
        }
        Ok(())
    }

    pub fn to_file(&self) -> WeightFile {
        WeightFile::capture(&self.version, self.layer_sizes(), self)
    }

    pub fn from_file(file: &WeightFile) -> Result<Self> {
        let sizes = &file.layer_sizes;
        if sizes.len() < 3 || sizes[0] != POSE_DIM || sizes[sizes.len() - 1] != POSE_DIM {
            return Err(Error::ShapeMismatch(format!("predictor layer sizes {sizes:?}")));
        }
        let mut w = Self::zeros(&sizes[1..sizes.len() - 1]);
        w.version = file.version.clone();
        file.restore_into(&mut w)?;
        Ok(w)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        self.to_file().save(path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_file(&WeightFile::load(path)?)
    }
}

impl Parameters for PredictorWeights {
    fn param_slices(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = Vec::new();
        for l in &self.layers {
            v.push(l.w_x.as_slice().unwrap());
            v.push(l.w_h.as_slice().unwrap());
            v.push(l.b.as_slice().unwrap());
        }
        v.push(self.head.w.as_slice().unwrap());
        v.push(self.head.b.as_slice().unwrap());
        v
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v: Vec<&mut [f64]> = Vec::new();
        for l in &mut self.layers {
            v.push(l.w_x.as_slice_mut().unwrap());
            v.push(l.w_h.as_slice_mut().unwrap());
            v.push(l.b.as_slice_mut().unwrap());
        }
        v.push(self.head.w.as_slice_mut().unwrap());
        v.push(self.head.b.as_slice_mut().unwrap());
        v
    }
}

/// Inverted-dropout masks, one `batch × hidden` array per LSTM layer with
/// entries `0` or `1/(1-p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMasks {
    pub layers: Vec<Array2<f64>>,
}

impl DropoutMasks {
    pub fn sample(hidden: &[usize], batch: usize, p: f64, rng: &mut impl Rng) -> Self {
        assert!((0.0..1.0).contains(&p), "dropout probability must lie in [0, 1)");
        let keep = 1.0 / (1.0 - p);
        Self {
            layers: hidden
                .iter()
                .map(|&h| Array2::from_shape_fn((batch, h), |_| if rng.random::<f64>() < p { 0.0 } else { keep }))
                .collect(),
        }
    }

    /// Expectation masks (all ones).
    pub fn ones(hidden: &[usize], batch: usize) -> Self {
        Self {
            layers: hidden.iter().map(|&h| Array2::ones((batch, h))).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum ForwardMode<'a> {
    Deterministic,
    Train(&'a DropoutMasks),
    MonteCarlo(&'a DropoutMasks),
}

impl<'a> ForwardMode<'a> {
    fn masks(&self) -> Option<&'a DropoutMasks> {
        match *self {
            ForwardMode::Deterministic => None,
            ForwardMode::Train(m) | ForwardMode::MonteCarlo(m) => Some(m),
        }
    }
}

pub(crate) struct LayerStep {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    gates: Array2<f64>,
    tanh_c: Array2<f64>,
}

pub(crate) struct ForwardCache {
    obs_len: usize,
    /// `[t][layer]`
    steps: Vec<Vec<LayerStep>>,
    /// Masked top-layer output feeding the head, per prediction step.
    top: Vec<Array2<f64>>,
}

/// Batched forward pass. `inputs[t]` is `batch × 6`; returns `horizon`
/// arrays of `batch × 6`.
pub(crate) fn forward_batch(
    w: &PredictorWeights,
    inputs: &[Array2<f64>],
    mode: ForwardMode<'_>,
    horizon: usize,
    keep_cache: bool,
) -> (Vec<Array2<f64>>, Option<ForwardCache>) {
    let batch = inputs[0].nrows();
    let n = inputs.len();
    let masks = mode.masks();
    let mut h: Vec<Array2<f64>> = w.layers.iter().map(|l| Array2::zeros((batch, l.hidden()))).collect();
    let mut c = h.clone();
    let mut outputs: Vec<Array2<f64>> = Vec::with_capacity(horizon);
    let mut steps = Vec::new();
    let mut top = Vec::new();
    let total = n + horizon - 1;
    for t in 0..total {
        let mut layer_in = if t < n { inputs[t].clone() } else { outputs[t - n].clone() };
        let mut per_layer = Vec::new();
        for (l, layer) in w.layers.iter().enumerate() {
            let out = layer.step(&layer_in, &h[l], &c[l]);
            let h_prev = std::mem::replace(&mut h[l], out.h);
            let c_prev = std::mem::replace(&mut c[l], out.c);
            let next_in = match masks {
                Some(m) => &h[l] * &m.layers[l],
                None => h[l].clone(),
            };
            if keep_cache {
                per_layer.push(LayerStep {
                    x: layer_in,
                    h_prev,
                    c_prev,
                    gates: out.gates,
                    tanh_c: out.tanh_c,
                });
            }
            layer_in = next_in;
        }
        if keep_cache {
            steps.push(per_layer);
        }
        if t + 1 >= n {
            outputs.push(w.head.forward(&layer_in));
            if keep_cache {
                top.push(layer_in);
            }
        }
    }
    let cache = keep_cache.then_some(ForwardCache {
        obs_len: n,
        steps,
        top,
    });
    (outputs, cache)
}

/// Backpropagation through time, including the path through fed-back
/// predictions. `d_out[m]` is dL/dŷ_m (`batch × 6`).
pub(crate) fn backward(
    w: &PredictorWeights,
    cache: &ForwardCache,
    mode: ForwardMode<'_>,
    d_out: &[Array2<f64>],
) -> PredictorWeights {
    let masks = mode.masks();
    let mut g = w.zeros_like();
    let batch = d_out[0].nrows();
    let n_layers = w.layers.len();
    let first_out = cache.obs_len - 1;
    let mut dh_next: Vec<Array2<f64>> = w.layers.iter().map(|l| Array2::zeros((batch, l.hidden()))).collect();
    let mut dc_next = dh_next.clone();
    let mut carry: Option<Array2<f64>> = None;

    for t in (0..cache.steps.len()).rev() {
        let top_h = w.layers[n_layers - 1].hidden();
        let mut d_above = Array2::<f64>::zeros((batch, top_h));
        if t >= first_out {
            let m = t - first_out;
            let mut dy = d_out[m].clone();
            if let Some(cg) = carry.take() {
                dy += &cg;
            }
            g.head.w += &cache.top[m].t().dot(&dy);
            g.head.b += &dy.sum_axis(Axis(0));
            d_above = dy.dot(&w.head.w.t());
        }
        for l in (0..n_layers).rev() {
            let st = &cache.steps[t][l];
            let layer = &w.layers[l];
            let hd = layer.hidden();
            let mut dh = match masks {
                Some(m) => &d_above * &m.layers[l],
                None => d_above,
            };
            dh += &dh_next[l];
            let gi = st.gates.slice(s![.., 0..hd]);
            let gf = st.gates.slice(s![.., hd..2 * hd]);
            let gg = st.gates.slice(s![.., 2 * hd..3 * hd]);
            let go = st.gates.slice(s![.., 3 * hd..4 * hd]);

            let mut dc = dc_next[l].clone();
            Zip::from(&mut dc)
                .and(&dh)
                .and(&go)
                .and(&st.tanh_c)
                .for_each(|dc, &dh, &o, &tc| *dc += dh * o * (1.0 - tc * tc));

            let mut dz = Array2::<f64>::zeros((batch, 4 * hd));
            Zip::from(dz.slice_mut(s![.., 0..hd]))
                .and(&dc)
                .and(&gg)
                .and(&gi)
                .for_each(|z, &dc, &g_, &i| *z = dc * g_ * i * (1.0 - i));
            Zip::from(dz.slice_mut(s![.., hd..2 * hd]))
                .and(&dc)
                .and(&st.c_prev)
                .and(&gf)
                .for_each(|z, &dc, &cp, &f| *z = dc * cp * f * (1.0 - f));
            Zip::from(dz.slice_mut(s![.., 2 * hd..3 * hd]))
                .and(&dc)
                .and(&gi)
                .and(&gg)
                .for_each(|z, &dc, &i, &g_| *z = dc * i * (1.0 - g_ * g_));
            Zip::from(dz.slice_mut(s![.., 3 * hd..4 * hd]))
                .and(&dh)
                .and(&st.tanh_c)
                .and(&go)
                .for_each(|z, &dh, &tc, &o| *z = dh * tc * o * (1.0 - o));

            dc_next[l] = &dc * &gf;
            let gl = &mut g.layers[l];
            gl.w_x += &st.x.t().dot(&dz);
            gl.w_h += &st.h_prev.t().dot(&dz);
            gl.b += &dz.sum_axis(Axis(0));
            dh_next[l] = dz.dot(&layer.w_h.t());
            d_above = dz.dot(&layer.w_x.t());
        }
        if t >= cache.obs_len {
            carry = Some(d_above);
        }
    }
    g
}

fn probe_loss(w: &PredictorWeights, inputs: &[Array2<f64>], coef: &[Array2<f64>], mode: ForwardMode<'_>) -> f64 {
    let (out, _) = forward_batch(w, inputs, mode, coef.len(), false);
    out.iter().zip(coef).map(|(o, c)| (o * c).sum()).sum()
}

/// Largest relative error between backprop and central differences
/// (h = 1e-5) over every parameter of a small random two-layer network
/// with dropout active. The probe loss is a random linear functional of
/// the outputs, so every path through the recurrence and the feedback
/// loop is exercised.
pub fn gradient_check(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden = [3, 4];
    let mut w = PredictorWeights::init(&hidden, seed);
    for s in w.param_slices_mut() {
        s.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
    }
    let batch = 2;
    let inputs: Vec<Array2<f64>> = (0..3).map(|_| uniform_array(batch, POSE_DIM, 1.0, &mut rng)).collect();
    let coef: Vec<Array2<f64>> = (0..3).map(|_| uniform_array(batch, POSE_DIM, 1.0, &mut rng)).collect();
    let masks = DropoutMasks::sample(&hidden, batch, 0.25, &mut rng);
    let mode = ForwardMode::Train(&masks);

    let (_, cache) = forward_batch(&w, &inputs, mode, coef.len(), true);
    let grads = backward(&w, cache.as_ref().expect("cache requested"), mode, &coef);
    let analytic: Vec<f64> = grads.param_slices().iter().flat_map(|s| s.iter().copied()).collect();

    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut idx = 0;
    let mut probe = w;
    for a in 0..probe.param_slices().len() {
        for k in 0..probe.param_slices()[a].len() {
            let orig = probe.param_slices()[a][k];
            probe.param_slices_mut()[a][k] = orig + h;
            let lp = probe_loss(&probe, &inputs, &coef, mode);
            probe.param_slices_mut()[a][k] = orig - h;
            let lm = probe_loss(&probe, &inputs, &coef, mode);
            probe.param_slices_mut()[a][k] = orig;
            worst = worst.max(relative_error(analytic[idx], (lp - lm) / (2.0 * h)));
            idx += 1;
        }
    }
    worst
}

/// Splits a row-major `len × 6` buffer into a `len × 6` array.
pub fn window_array(flat: &[f64]) -> Result<Array2<f64>> {
    if flat.len() % POSE_DIM != 0 || flat.is_empty() {
        return Err(Error::ShapeMismatch(format!("window of {} values is not a multiple of 6", flat.len())));
    }
    Ok(Array2::from_shape_vec((flat.len() / POSE_DIM, POSE_DIM), flat.to_vec()).expect("shape checked"))
}

/// Packs equal-length windows (each `len × 6` row-major) into per-step batch arrays.
pub(crate) fn batch_by_step(windows: &[&[f64]]) -> Vec<Array2<f64>> {
    let len = windows[0].len() / POSE_DIM;
    (0..len)
        .map(|t| Array2::from_shape_fn((windows.len(), POSE_DIM), |(b, j)| windows[b][t * POSE_DIM + j]))
        .collect()
}

/// Single-window forward pass: `x` is `N × 6`, output is `horizon × 6`.
pub fn lstm_forward(x: &Array2<f64>, w: &PredictorWeights, mode: ForwardMode<'_>, horizon: usize) -> Result<Array2<f64>> {
    if x.ncols() != POSE_DIM || x.nrows() == 0 {
        return Err(Error::ShapeMismatch(format!("input window must be N×6, got {:?}", x.dim())));
    }
    if horizon == 0 {
        return Err(Error::ShapeMismatch("prediction horizon must be positive".into()));
    }
    w.validate()?;
    if let Some(m) = mode.masks() {
        let ok = m.layers.len() == w.layers.len()
            && m.layers.iter().zip(&w.layers).all(|(a, l)| a.dim() == (1, l.hidden()));
        if !ok {
            return Err(Error::ShapeMismatch("dropout masks do not match the layer sizes".into()));
        }
    }
    let inputs: Vec<Array2<f64>> = x.rows().into_iter().map(|r| r.to_owned().insert_axis(Axis(0))).collect();
    let (outs, _) = forward_batch(w, &inputs, mode, horizon, false);
    let mut y = Array2::zeros((horizon, POSE_DIM));
    for (m, o) in outs.iter().enumerate() {
        y.row_mut(m).assign(&o.row(0));
    }
    Ok(y)
}
