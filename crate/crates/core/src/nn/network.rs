use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, Array3, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::activation::{sigmoid, Activation};
use super::loss::{loss_and_grad, LossKind};
use super::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Dense,
    Lstm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub width: usize,
    /// Ignored for LSTM layers, which use the fixed sigmoid/tanh cell.
    pub activation: Activation,
}

impl LayerSpec {
    pub fn dense(width: usize, activation: Activation) -> Self {
        Self { kind: LayerKind::Dense, width, activation }
    }

    pub fn lstm(width: usize) -> Self {
        Self { kind: LayerKind::Lstm, width, activation: Activation::Tanh }
    }
}

/// Layer stack description. Recurrent layers, if any, come first and
/// consume the whole sequence; the final hidden state feeds the dense head.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub layers: Vec<LayerSpec>,
    pub seed: u64,
}

impl NetworkSpec {
    pub fn mlp(input_dim: usize, hidden: &[usize], hidden_act: Activation, output_dim: usize, output_act: Activation, seed: u64) -> Self {
        let mut layers: Vec<LayerSpec> = hidden.iter().map(|&w| LayerSpec::dense(w, hidden_act)).collect();
        layers.push(LayerSpec::dense(output_dim, output_act));
        Self { input_dim, layers, seed }
    }

    pub fn recurrent(input_dim: usize, lstm_widths: &[usize], output_dim: usize, output_act: Activation, seed: u64) -> Self {
        let mut layers: Vec<LayerSpec> = lstm_widths.iter().map(|&w| LayerSpec::lstm(w)).collect();
        layers.push(LayerSpec::dense(output_dim, output_act));
        Self { input_dim, layers, seed }
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.width)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Stable textual form of the architecture (seed excluded).
    pub fn canonical(&self) -> String {
        let mut s = format!("in={}", self.input_dim);
        for l in &self.layers {
            match l.kind {
                LayerKind::Dense => s.push_str(&format!(";dense:{}:{}", l.width, l.activation.name())),
                LayerKind::Lstm => s.push_str(&format!(";lstm:{}", l.width)),
            }
        }
        s
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(NnError::InvalidSpec("input dimension must be at least 1".into()));
        }
        if self.layers.is_empty() {
            return Err(NnError::InvalidSpec("network needs at least one layer".into()));
        }
        let mut seen_dense = false;
        for (i, l) in self.layers.iter().enumerate() {
            if l.width == 0 {
                return Err(NnError::InvalidSpec(format!("layer {i} has width 0")));
            }
            match l.kind {
                LayerKind::Dense => seen_dense = true,
                LayerKind::Lstm if seen_dense => {
                    return Err(NnError::InvalidSpec(format!("lstm layer {i} follows a dense layer")));
                }
                LayerKind::Lstm => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    kind: LayerKind,
    input: usize,
    width: usize,
    activation: Activation,
    offset: usize,
}

impl Slot {
    fn param_count(&self) -> usize {
        match self.kind {
            LayerKind::Dense => self.input * self.width + self.width,
            LayerKind::Lstm => 4 * self.width * (self.input + self.width + 1),
        }
    }

    fn dense_views<'a>(&self, p: &'a [f64]) -> (ArrayView2<'a, f64>, ArrayView1<'a, f64>) {
        let o = self.offset;
        let nw = self.input * self.width;
        let w = ArrayView2::from_shape((self.input, self.width), &p[o..o + nw]).expect("layout");
        let b = ArrayView1::from(&p[o + nw..o + nw + self.width]);
        (w, b)
    }

    fn dense_views_mut<'a>(&self, g: &'a mut [f64]) -> (ArrayViewMut2<'a, f64>, ArrayViewMut1<'a, f64>) {
        let o = self.offset;
        let nw = self.input * self.width;
        let (w, b) = g[o..o + nw + self.width].split_at_mut(nw);
        (ArrayViewMut2::from_shape((self.input, self.width), w).expect("layout"), ArrayViewMut1::from(b))
    }

    fn lstm_views<'a>(&self, p: &'a [f64]) -> (ArrayView2<'a, f64>, ArrayView2<'a, f64>, ArrayView1<'a, f64>) {
        let (h4, o) = (4 * self.width, self.offset);
        let nx = self.input * h4;
        let nh = self.width * h4;
        let wx = ArrayView2::from_shape((self.input, h4), &p[o..o + nx]).expect("layout");
        let wh = ArrayView2::from_shape((self.width, h4), &p[o + nx..o + nx + nh]).expect("layout");
        let b = ArrayView1::from(&p[o + nx + nh..o + nx + nh + h4]);
        (wx, wh, b)
    }

    #[allow(clippy::type_complexity)]
    fn lstm_views_mut<'a>(&self, g: &'a mut [f64]) -> (ArrayViewMut2<'a, f64>, ArrayViewMut2<'a, f64>, ArrayViewMut1<'a, f64>) {
        let (h4, o) = (4 * self.width, self.offset);
        let nx = self.input * h4;
        let nh = self.width * h4;
        let (wx, rest) = g[o..o + nx + nh + h4].split_at_mut(nx);
        let (wh, b) = rest.split_at_mut(nh);
        (
            ArrayViewMut2::from_shape((self.input, h4), wx).expect("layout"),
            ArrayViewMut2::from_shape((self.width, h4), wh).expect("layout"),
            ArrayViewMut1::from(b),
        )
    }
}

/// Flat parameter vector; layer views are defined by the owning [`Network`].
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams(pub Vec<f64>);

impl NetworkParams {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

struct LstmStep {
    x: Array2<f64>,
    h_prev: Array2<f64>,
    c_prev: Array2<f64>,
    i: Array2<f64>,
    f: Array2<f64>,
    g: Array2<f64>,
    o: Array2<f64>,
    tanh_c: Array2<f64>,
}

enum LayerCache {
    Lstm(Vec<LstmStep>),
    Dense { input: Array2<f64>, pre: Array2<f64>, out: Array2<f64> },
}

/// Activations retained by [`Network::forward_cached`] for backpropagation.
pub struct ForwardCache {
    layers: Vec<LayerCache>,
    batch: usize,
    steps: usize,
}

/// Fixed-architecture network: LSTM layers followed by dense layers.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    slots: Vec<Slot>,
    param_count: usize,
}

/// Builds the network for `spec` and draws its seeded initial parameters.
pub fn init_network(spec: &NetworkSpec) -> Result<(Network, NetworkParams)> {
    let net = Network::new(spec.clone())?;
    let params = net.init_params();
    Ok((net, params))
}

impl Network {
    pub fn new(spec: NetworkSpec) -> Result<Self> {
        spec.validate()?;
        let mut slots = Vec::with_capacity(spec.layers.len());
        let mut input = spec.input_dim;
        let mut offset = 0;
        for l in &spec.layers {
            let slot = Slot { kind: l.kind, input, width: l.width, activation: l.activation, offset };
            offset += slot.param_count();
            input = l.width;
            slots.push(slot);
        }
        Ok(Self { spec, slots, param_count: offset })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn param_count(&self) -> usize {
        self.param_count
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim()
    }

    pub fn is_recurrent(&self) -> bool {
        self.slots.first().is_some_and(|s| s.kind == LayerKind::Lstm)
    }

    /// Glorot-uniform weights `U(-sqrt(6 / (fan_in + fan_out)), +...)`, zero
    /// biases, LSTM forget-gate biases at 1.
    pub fn init_params(&self) -> NetworkParams {
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.seed);
        let mut p = vec![0.0; self.param_count];
        for slot in &self.slots {
            let o = slot.offset;
            match slot.kind {
                LayerKind::Dense => {
                    let limit = (6.0 / (slot.input + slot.width) as f64).sqrt();
                    for v in &mut p[o..o + slot.input * slot.width] {
                        *v = rng.gen_range(-limit..limit);
                    }
                }
                LayerKind::Lstm => {
                    let h = slot.width;
                    let nx = slot.input * 4 * h;
                    let nh = h * 4 * h;
                    let lx = (6.0 / (slot.input + h) as f64).sqrt();
                    let lh = (6.0 / (2 * h) as f64).sqrt();
                    for v in &mut p[o..o + nx] {
                        *v = rng.gen_range(-lx..lx);
                    }
                    for v in &mut p[o + nx..o + nx + nh] {
                        *v = rng.gen_range(-lh..lh);
                    }
                    let b = o + nx + nh;
                    for v in &mut p[b + h..b + 2 * h] {
                        *v = 1.0;
                    }
                }
            }
        }
        NetworkParams(p)
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count {
            return Err(NnError::LengthMismatch { expected: self.param_count, got: params.len() });
        }
        Ok(())
    }

    fn check_input(&self, x: &Array3<f64>) -> Result<()> {
        let (batch, steps, features) = x.dim();
        if features != self.spec.input_dim {
            return Err(NnError::ShapeMismatch(format!("input has {features} features, network expects {}", self.spec.input_dim)));
        }
        if batch == 0 || steps == 0 {
            return Err(NnError::EmptyBatch);
        }
        if !self.is_recurrent() && steps != 1 {
            return Err(NnError::ShapeMismatch(format!("feed-forward network given {steps} steps")));
        }
        Ok(())
    }

    pub fn forward(&self, params: &NetworkParams, x: &Array3<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(params, x)?.0)
    }

    /// Feed-forward convenience: rows of `x` are samples.
    pub fn forward_flat(&self, params: &NetworkParams, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.forward(params, &as_steps(x))
    }

    pub fn forward_cached(&self, params: &NetworkParams, x: &Array3<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_params(&params.0)?;
        self.check_input(x)?;
        let p = &params.0;
        let (batch, steps, _) = x.dim();
        let mut layers = Vec::with_capacity(self.slots.len());
        let mut seq: Vec<Array2<f64>> = (0..steps).map(|t| x.slice(s![.., t, ..]).to_owned()).collect();
        let mut flat: Option<Array2<f64>> = None;
        for slot in &self.slots {
            match slot.kind {
                LayerKind::Lstm => {
                    let (cache, outputs) = lstm_forward(slot, p, &seq);
                    layers.push(LayerCache::Lstm(cache));
                    seq = outputs;
                }
                LayerKind::Dense => {
                    let input = flat.take().unwrap_or_else(|| seq.last().expect("non-empty").clone());
                    let (w, b) = slot.dense_views(p);
                    let mut pre = input.dot(&w);
                    pre += &b;
                    let act = slot.activation;
                    let out = pre.mapv(|v| act.apply(v));
                    flat = Some(out.clone());
                    layers.push(LayerCache::Dense { input, pre, out });
                }
            }
        }
        let out = flat.unwrap_or_else(|| seq.pop().expect("non-empty"));
        Ok((out, ForwardCache { layers, batch, steps }))
    }

    /// Backpropagates `d_out` (gradient of the loss w.r.t. the output) and
    /// returns the parameter gradient and the input gradient.
    pub fn backward(&self, params: &NetworkParams, cache: &ForwardCache, d_out: &Array2<f64>) -> Result<(Vec<f64>, Array3<f64>)> {
        self.check_params(&params.0)?;
        if d_out.dim() != (cache.batch, self.output_dim()) {
            return Err(NnError::ShapeMismatch(format!("output gradient shape {:?}", d_out.dim())));
        }
        let p = &params.0;
        let mut grad = vec![0.0; self.param_count];
        let mut d_flat = d_out.clone();
        let mut d_seq: Option<Vec<Array2<f64>>> = None;
        for (slot, cache_l) in self.slots.iter().zip(&cache.layers).rev() {
            match cache_l {
                LayerCache::Dense { input, pre, out } => {
                    let act = slot.activation;
                    let mut d_pre = d_flat;
                    Zip::from(&mut d_pre).and(pre).and(out).for_each(|d, &a, &y| *d *= act.derivative(a, y));
                    let (w, _) = slot.dense_views(p);
                    let (mut gw, mut gb) = slot.dense_views_mut(&mut grad);
                    general_mat_mul(1.0, &input.t(), &d_pre, 1.0, &mut gw);
                    gb += &d_pre.sum_axis(Axis(0));
                    d_flat = d_pre.dot(&w.t());
                }
                LayerCache::Lstm(steps) => {
                    let dh = d_seq.take().unwrap_or_else(|| {
                        let mut v: Vec<Array2<f64>> = (0..cache.steps).map(|_| Array2::zeros((cache.batch, slot.width))).collect();
                        *v.last_mut().expect("non-empty") = d_flat.clone();
                        v
                    });
                    d_seq = Some(lstm_backward(slot, p, steps, &dh, &mut grad));
                }
            }
        }
        let d_input = match d_seq {
            Some(seq) => {
                let mut x = Array3::zeros((cache.batch, cache.steps, self.spec.input_dim));
                for (t, d) in seq.iter().enumerate() {
                    x.slice_mut(s![.., t, ..]).assign(d);
                }
                x
            }
            None => d_flat.insert_axis(Axis(1)),
        };
        Ok((grad, d_input))
    }

    /// Mean batch loss and its exact gradient with respect to the parameters.
    pub fn gradient(&self, params: &NetworkParams, x: &Array3<f64>, targets: &Array2<f64>, loss: LossKind) -> Result<(f64, Vec<f64>)> {
        let (out, cache) = self.forward_cached(params, x)?;
        if targets.dim() != out.dim() {
            return Err(NnError::ShapeMismatch(format!("targets {:?} vs outputs {:?}", targets.dim(), out.dim())));
        }
        let (value, d_out) = loss_and_grad(loss, &out, targets);
        let (grad, _) = self.backward(params, &cache, &d_out)?;
        Ok((value, grad))
    }

    fn require_scalar_dense(&self) -> Result<()> {
        if self.is_recurrent() || self.output_dim() != 1 {
            return Err(NnError::ShapeMismatch("input-gradient penalty needs a feed-forward network with one output".into()));
        }
        Ok(())
    }

    /// Gradient of the (scalar) output with respect to each input row.
    pub fn input_gradient(&self, params: &NetworkParams, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.require_scalar_dense()?;
        let (_, cache) = self.forward_cached(params, &as_steps(x))?;
        let ones = Array2::ones((x.nrows(), 1));
        let (_, d_in) = self.backward(params, &cache, &ones)?;
        Ok(d_in.index_axis_move(Axis(1), 0))
    }

    /// Penalty `mean_b (||grad_x f(x_b)||_2 - 1)^2` together with its
    /// gradient with respect to the parameters (double backpropagation).
    pub fn input_gradient_penalty(&self, params: &NetworkParams, x: &Array2<f64>) -> Result<(f64, Vec<f64>)> {
        self.require_scalar_dense()?;
        self.check_params(&params.0)?;
        let p = &params.0;
        let batch = x.nrows();
        if batch == 0 {
            return Err(NnError::EmptyBatch);
        }
        if x.ncols() != self.spec.input_dim {
            return Err(NnError::ShapeMismatch(format!("input has {} features", x.ncols())));
        }
        let n_layers = self.slots.len();
        // forward: h[0] = x, h[l + 1] = act(h[l] W_l + b_l)
        let mut h = Vec::with_capacity(n_layers + 1);
        let mut d1 = Vec::with_capacity(n_layers);
        let mut d2 = Vec::with_capacity(n_layers);
        h.push(x.clone());
        for slot in &self.slots {
            let (w, b) = slot.dense_views(p);
            let mut pre = h.last().expect("input").dot(&w);
            pre += &b;
            let act = slot.activation;
            let out = pre.mapv(|v| act.apply(v));
            let mut s1 = out.clone();
            Zip::from(&mut s1).and(&pre).for_each(|y, &a| *y = act.derivative(a, *y));
            d1.push(s1);
            d2.push(out.mapv(|y| act.second_derivative(y)));
            h.push(out);
        }
        // input gradient: u[l] = dF/dpre_l, g[l] = dF/dh[l]
        let mut u: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); n_layers];
        let mut g: Vec<Array2<f64>> = vec![Array2::zeros((0, 0)); n_layers + 1];
        g[n_layers] = Array2::ones((batch, 1));
        for l in (0..n_layers).rev() {
            u[l] = &g[l + 1] * &d1[l];
            let (w, _) = self.slots[l].dense_views(p);
            g[l] = u[l].dot(&w.t());
        }
        let norms: Vec<f64> = g[0].rows().into_iter().map(|r| r.dot(&r).sqrt()).collect();
        let bf = batch as f64;
        let penalty = norms.iter().map(|n| (n - 1.0).powi(2)).sum::<f64>() / bf;

        let mut grad = vec![0.0; self.param_count];
        // adjoint of g[0]
        let mut g_bar = g[0].clone();
        for (mut row, &n) in g_bar.rows_mut().into_iter().zip(&norms) {
            let scale = if n > 0.0 { 2.0 * (n - 1.0) / (n * bf) } else { 0.0 };
            row *= scale;
        }
        // reverse through the input-gradient pass, collecting pre-activation adjoints
        let mut pre_bar: Vec<Array2<f64>> = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let (w, _) = self.slots[l].dense_views(p);
            let (mut gw, _) = self.slots[l].dense_views_mut(&mut grad);
            general_mat_mul(1.0, &g_bar.t(), &u[l], 1.0, &mut gw);
            let u_bar = g_bar.dot(&w);
            let mut a_bar = &u_bar * &g[l + 1];
            a_bar *= &d2[l];
            pre_bar.push(a_bar);
            g_bar = u_bar * &d1[l];
        }
        // reverse through the forward pass
        let mut h_bar: Option<Array2<f64>> = None;
        for l in (0..n_layers).rev() {
            let mut a_bar = std::mem::take(&mut pre_bar[l]);
            if let Some(hb) = h_bar.take() {
                a_bar += &(hb * &d1[l]);
            }
            let (w, _) = self.slots[l].dense_views(p);
            let (mut gw, mut gb) = self.slots[l].dense_views_mut(&mut grad);
            general_mat_mul(1.0, &h[l].t(), &a_bar, 1.0, &mut gw);
            gb += &a_bar.sum_axis(Axis(0));
            if l > 0 {
                h_bar = Some(a_bar.dot(&w.t()));
            }
        }
        Ok((penalty, grad))
    }
}

/// Views a `(batch, features)` matrix as single-step sequences.
pub fn as_steps(x: &Array2<f64>) -> Array3<f64> {
    x.clone().insert_axis(Axis(1))
}

fn lstm_forward(slot: &Slot, p: &[f64], seq: &[Array2<f64>]) -> (Vec<LstmStep>, Vec<Array2<f64>>) {
    let hw = slot.width;
    let batch = seq[0].nrows();
    let (wx, wh, b) = slot.lstm_views(p);
    let mut h = Array2::zeros((batch, hw));
    let mut c = Array2::zeros((batch, hw));
    let mut cache = Vec::with_capacity(seq.len());
    let mut outputs = Vec::with_capacity(seq.len());
    for x in seq {
        let mut z = x.dot(&wx);
        general_mat_mul(1.0, &h, &wh, 1.0, &mut z);
        z += &b;
        let i = z.slice(s![.., 0..hw]).mapv(sigmoid);
        let f = z.slice(s![.., hw..2 * hw]).mapv(sigmoid);
        let g = z.slice(s![.., 2 * hw..3 * hw]).mapv(f64::tanh);
        let o = z.slice(s![.., 3 * hw..4 * hw]).mapv(sigmoid);
        let c_new = &f * &c + &i * &g;
        let tanh_c = c_new.mapv(f64::tanh);
        let h_new = &o * &tanh_c;
        cache.push(LstmStep { x: x.clone(), h_prev: h, c_prev: c, i, f, g, o, tanh_c });
        outputs.push(h_new.clone());
        h = h_new;
        c = c_new;
    }
    (cache, outputs)
}

fn lstm_backward(slot: &Slot, p: &[f64], steps: &[LstmStep], dh_above: &[Array2<f64>], grad: &mut [f64]) -> Vec<Array2<f64>> {
    let hw = slot.width;
    let batch = steps[0].x.nrows();
    let (wx, wh, _) = slot.lstm_views(p);
    let (mut gwx, mut gwh, mut gb) = slot.lstm_views_mut(grad);
    let mut dh_next = Array2::<f64>::zeros((batch, hw));
    let mut dc_next = Array2::<f64>::zeros((batch, hw));
    let mut dz = Array2::<f64>::zeros((batch, 4 * hw));
    let mut dx = vec![Array2::zeros((0, 0)); steps.len()];
    for t in (0..steps.len()).rev() {
        let st = &steps[t];
        let dh = &dh_above[t] + &dh_next;
        let d_o = &dh * &st.tanh_c;
        let mut dc = &dh * &st.o;
        dc.zip_mut_with(&st.tanh_c, |d, &tc| *d *= 1.0 - tc * tc);
        dc += &dc_next;
        Zip::from(dz.slice_mut(s![.., 0..hw])).and(&dc).and(&st.g).and(&st.i).for_each(|z, &d, &g, &i| *z = d * g * i * (1.0 - i));
        Zip::from(dz.slice_mut(s![.., hw..2 * hw]))
            .and(&dc)
            .and(&st.c_prev)
            .and(&st.f)
            .for_each(|z, &d, &cp, &f| *z = d * cp * f * (1.0 - f));
        Zip::from(dz.slice_mut(s![.., 2 * hw..3 * hw])).and(&dc).and(&st.i).and(&st.g).for_each(|z, &d, &i, &g| *z = d * i * (1.0 - g * g));
        Zip::from(dz.slice_mut(s![.., 3 * hw..4 * hw])).and(&d_o).and(&st.o).for_each(|z, &d, &o| *z = d * o * (1.0 - o));
        general_mat_mul(1.0, &st.x.t(), &dz, 1.0, &mut gwx);
        general_mat_mul(1.0, &st.h_prev.t(), &dz, 1.0, &mut gwh);
        gb += &dz.sum_axis(Axis(0));
        dx[t] = dz.dot(&wx.t());
        dh_next = dz.dot(&wh.t());
        dc_next = dc * &st.f;
    }
    dx
}
