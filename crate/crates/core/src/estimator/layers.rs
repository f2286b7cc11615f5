//! Neural building blocks shared by the encoder and decoder: fully connected
//! layers, multi-head self-attention, scalar-affine layer normalization, the
//! leaky rectifier, and a shape-preserving 2D convolution.
//!
//! Everything is plain `f64` ndarray math with hand-written backward passes.
//! Gradients reuse the parameter struct types, so an optimizer step is a
//! pairwise walk over tensors via `axpy`.

use ndarray::{s, Array1, Array2, Array3, Array4, Axis};
use rand::Rng;

/// Negative-side slope of the leaky rectifier.
pub const LEAKY_SLOPE: f64 = 0.1;

/// Leaky rectifier `f(x) = max(0.1 x, x)`.
pub fn leaky_relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

pub(crate) fn leaky_relu_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// Logistic sigmoid `1 / (1 + e^{-x})`.
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Fully connected layer `y = W x + b`, with `W` stored out×in.
#[derive(Debug, Clone)]
pub struct LinearLayer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl LinearLayer {
    /// Draws weights and biases uniformly from `[-1/√in, 1/√in]`.
    pub fn init(out_dim: usize, in_dim: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        Self {
            weight: Array2::from_shape_fn((out_dim, in_dim), |_| rng.gen_range(-bound..bound)),
            bias: Array1::from_shape_fn(out_dim, |_| rng.gen_range(-bound..bound)),
        }
    }

    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            weight: Array2::zeros((out_dim, in_dim)),
            bias: Array1::zeros(out_dim),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.out_dim(), self.in_dim())
    }

    pub fn out_dim(&self) -> usize {
        self.weight.nrows()
    }

    pub fn in_dim(&self) -> usize {
        self.weight.ncols()
    }

    pub fn forward(&self, x: &Array1<f64>) -> Array1<f64> {
        self.weight.dot(x) + &self.bias
    }

    /// Applies the layer independently to every row of `x`.
    pub fn forward_rows(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight.t()) + &self.bias
    }

    /// Accumulates parameter gradients for a single-vector application and
    /// returns the gradient with respect to the input.
    pub fn backward(&self, x: &Array1<f64>, d_out: &Array1<f64>, grad: &mut Self) -> Array1<f64> {
        for (mut row, &g) in grad.weight.outer_iter_mut().zip(d_out.iter()) {
            row.scaled_add(g, x);
        }
        grad.bias += d_out;
        self.weight.t().dot(d_out)
    }

    /// Row-wise counterpart of [`backward`](Self::backward).
    pub fn backward_rows(
        &self,
        x: &Array2<f64>,
        d_out: &Array2<f64>,
        grad: &mut Self,
    ) -> Array2<f64> {
        grad.weight += &d_out.t().dot(x);
        grad.bias += &d_out.sum_axis(Axis(0));
        d_out.dot(&self.weight)
    }

    pub(crate) fn axpy(&mut self, scale: f64, other: &Self) {
        self.weight.scaled_add(scale, &other.weight);
        self.bias.scaled_add(scale, &other.bias);
    }
}

/// Projection matrices of one attention head, each d_model × d_head.
#[derive(Debug, Clone)]
pub struct AttentionHead {
    pub w_query: Array2<f64>,
    pub w_key: Array2<f64>,
    pub w_value: Array2<f64>,
}

/// Multi-head self-attention weights. Heads project into disjoint
/// d_model/N_h-wide subspaces; their outputs are concatenated back to
/// d_model, so no extra output projection is needed.
#[derive(Debug, Clone)]
pub struct MhsaParams {
    pub heads: Vec<AttentionHead>,
}

impl MhsaParams {
    pub fn init(d_model: usize, n_heads: usize, rng: &mut impl Rng) -> Self {
        assert!(n_heads > 0 && d_model % n_heads == 0);
        let d_head = d_model / n_heads;
        let bound = 1.0 / (d_model as f64).sqrt();
        let mut mat = || Array2::from_shape_fn((d_model, d_head), |_| rng.gen_range(-bound..bound));
        let heads = (0..n_heads)
            .map(|_| AttentionHead {
                w_query: mat(),
                w_key: mat(),
                w_value: mat(),
            })
            .collect();
        Self { heads }
    }

    pub fn zeros(d_model: usize, n_heads: usize) -> Self {
        assert!(n_heads > 0 && d_model % n_heads == 0);
        let d_head = d_model / n_heads;
        let heads = (0..n_heads)
            .map(|_| AttentionHead {
                w_query: Array2::zeros((d_model, d_head)),
                w_key: Array2::zeros((d_model, d_head)),
                w_value: Array2::zeros((d_model, d_head)),
            })
            .collect();
        Self { heads }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.d_model(), self.n_heads())
    }

    pub fn n_heads(&self) -> usize {
        self.heads.len()
    }

    pub fn d_model(&self) -> usize {
        self.heads[0].w_query.nrows()
    }

    pub fn d_head(&self) -> usize {
        self.heads[0].w_query.ncols()
    }

    pub(crate) fn axpy(&mut self, scale: f64, other: &Self) {
        for (mine, theirs) in self.heads.iter_mut().zip(&other.heads) {
            mine.w_query.scaled_add(scale, &theirs.w_query);
            mine.w_key.scaled_add(scale, &theirs.w_key);
            mine.w_value.scaled_add(scale, &theirs.w_value);
        }
    }
}

pub(crate) struct MhsaCache {
    pub input: Array2<f64>,
    pub queries: Vec<Array2<f64>>,
    pub keys: Vec<Array2<f64>>,
    pub values: Vec<Array2<f64>>,
    pub maps: Vec<Array2<f64>>,
}

/// Runs multi-head self-attention over the rows of `s_in` and returns the
/// concatenated head outputs together with the per-head attention maps.
///
/// Per head k: `Q = S W_q`, `K = S W_k`, `V = S W_v`, map
/// `A = softmax(Q Kᵀ / √d_head)` row-wise, output block `A V`. Every row of
/// every map is a probability vector.
pub fn multi_head_self_attention(
    s_in: &Array2<f64>,
    params: &MhsaParams,
) -> (Array2<f64>, Vec<Array2<f64>>) {
    let (z, cache) = mhsa_forward(s_in, params);
    (z, cache.maps)
}

pub(crate) fn mhsa_forward(s_in: &Array2<f64>, params: &MhsaParams) -> (Array2<f64>, MhsaCache) {
    let d_head = params.d_head();
    let scale = 1.0 / (d_head as f64).sqrt();
    let t = s_in.nrows();
    let mut z = Array2::zeros((t, params.n_heads() * d_head));
    let mut cache = MhsaCache {
        input: s_in.clone(),
        queries: Vec::with_capacity(params.n_heads()),
        keys: Vec::with_capacity(params.n_heads()),
        values: Vec::with_capacity(params.n_heads()),
        maps: Vec::with_capacity(params.n_heads()),
    };
    for (k, head) in params.heads.iter().enumerate() {
        let q = s_in.dot(&head.w_query);
        let key = s_in.dot(&head.w_key);
        let v = s_in.dot(&head.w_value);
        let mut logits = q.dot(&key.t());
        logits *= scale;
        let map = softmax_rows(&logits);
        z.slice_mut(s![.., k * d_head..(k + 1) * d_head])
            .assign(&map.dot(&v));
        cache.queries.push(q);
        cache.keys.push(key);
        cache.values.push(v);
        cache.maps.push(map);
    }
    (z, cache)
}

pub(crate) fn mhsa_backward(
    params: &MhsaParams,
    cache: &MhsaCache,
    d_z: &Array2<f64>,
    grad: &mut MhsaParams,
) -> Array2<f64> {
    let d_head = params.d_head();
    let scale = 1.0 / (d_head as f64).sqrt();
    let mut d_input = Array2::zeros(cache.input.raw_dim());
    for (k, head) in params.heads.iter().enumerate() {
        let d_zk = d_z.slice(s![.., k * d_head..(k + 1) * d_head]);
        let map = &cache.maps[k];
        let d_map = d_zk.dot(&cache.values[k].t());
        let d_v = map.t().dot(&d_zk);
        let mut d_logits = softmax_backward_rows(map, &d_map);
        d_logits *= scale;
        let d_q = d_logits.dot(&cache.keys[k]);
        let d_k = d_logits.t().dot(&cache.queries[k]);
        grad.heads[k].w_query += &cache.input.t().dot(&d_q);
        grad.heads[k].w_key += &cache.input.t().dot(&d_k);
        grad.heads[k].w_value += &cache.input.t().dot(&d_v);
        d_input += &d_q.dot(&head.w_query.t());
        d_input += &d_k.dot(&head.w_key.t());
        d_input += &d_v.dot(&head.w_value.t());
    }
    d_input
}

fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut out = logits.clone();
    for mut row in out.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

fn softmax_backward_rows(probs: &Array2<f64>, d_probs: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(probs.raw_dim());
    for ((p_row, d_row), mut o_row) in probs
        .rows()
        .into_iter()
        .zip(d_probs.rows())
        .zip(out.rows_mut())
    {
        let dot: f64 = p_row.iter().zip(d_row.iter()).map(|(p, d)| p * d).sum();
        for ((o, &p), &d) in o_row.iter_mut().zip(p_row).zip(d_row) {
            *o = p * (d - dot);
        }
    }
    out
}

/// Scalar-affine layer normalization: every row is standardized to zero mean
/// and unit variance (up to `eps`), then rescaled by `kappa` and shifted by
/// `eta`.
#[derive(Debug, Clone, Copy)]
pub struct LayerNormParams {
    pub kappa: f64,
    pub eta: f64,
    pub eps: f64,
}

impl LayerNormParams {
    pub fn identity() -> Self {
        Self {
            kappa: 1.0,
            eta: 0.0,
            eps: 1e-5,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            kappa: 0.0,
            eta: 0.0,
            eps: self.eps,
        }
    }

    pub(crate) fn axpy(&mut self, scale: f64, other: &Self) {
        self.kappa += scale * other.kappa;
        self.eta += scale * other.eta;
    }
}

/// Normalizes each row of `z` to mean 0 and variance 1 (up to `eps`), then
/// applies the affine map `kappa · ẑ + eta`.
pub fn layer_norm(z: &Array2<f64>, kappa: f64, eta: f64, eps: f64) -> Array2<f64> {
    let params = LayerNormParams { kappa, eta, eps };
    layer_norm_forward(z, &params).0
}

pub(crate) struct LayerNormCache {
    pub normalized: Array2<f64>,
    pub inv_std: Array1<f64>,
}

pub(crate) fn layer_norm_forward(
    z: &Array2<f64>,
    params: &LayerNormParams,
) -> (Array2<f64>, LayerNormCache) {
    let d = z.ncols() as f64;
    let mut normalized = z.clone();
    let mut inv_std = Array1::zeros(z.nrows());
    for (mut row, inv) in normalized.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().map(|v| v * v).sum::<f64>() / d;
        *inv = 1.0 / (var + params.eps).sqrt();
        row.mapv_inplace(|v| v * *inv);
    }
    let out = normalized.mapv(|v| params.kappa * v + params.eta);
    (out, LayerNormCache { normalized, inv_std })
}

pub(crate) fn layer_norm_backward(
    params: &LayerNormParams,
    cache: &LayerNormCache,
    d_out: &Array2<f64>,
    grad: &mut LayerNormParams,
) -> Array2<f64> {
    let d = cache.normalized.ncols() as f64;
    grad.eta += d_out.sum();
    grad.kappa += cache
        .normalized
        .iter()
        .zip(d_out.iter())
        .map(|(n, g)| n * g)
        .sum::<f64>();
    let mut d_in = Array2::zeros(cache.normalized.raw_dim());
    for (((n_row, g_row), mut o_row), &inv) in cache
        .normalized
        .rows()
        .into_iter()
        .zip(d_out.rows())
        .zip(d_in.rows_mut())
        .zip(cache.inv_std.iter())
    {
        let mean_g = params.kappa * g_row.sum() / d;
        let mean_gn: f64 = n_row
            .iter()
            .zip(g_row.iter())
            .map(|(n, g)| params.kappa * g * n)
            .sum::<f64>()
            / d;
        for ((o, &n), &g) in o_row.iter_mut().zip(n_row).zip(g_row) {
            *o = inv * (params.kappa * g - mean_g - n * mean_gn);
        }
    }
    d_in
}

/// 2D convolution with an odd square kernel, unit stride, and zero padding
/// chosen so the spatial shape is preserved. Channels map all-to-all; the
/// kernel is stored out-channel × in-channel × k × k.
#[derive(Debug, Clone)]
pub struct Conv2dParams {
    pub kernel: Array4<f64>,
    pub bias: Array1<f64>,
}

impl Conv2dParams {
    pub fn init(out_channels: usize, in_channels: usize, k: usize, rng: &mut impl Rng) -> Self {
        assert!(k % 2 == 1, "kernel side must be odd to preserve shape");
        let bound = 1.0 / ((in_channels * k * k) as f64).sqrt();
        Self {
            kernel: Array4::from_shape_fn((out_channels, in_channels, k, k), |_| {
                rng.gen_range(-bound..bound)
            }),
            bias: Array1::from_shape_fn(out_channels, |_| rng.gen_range(-bound..bound)),
        }
    }

    pub fn zeros(out_channels: usize, in_channels: usize, k: usize) -> Self {
        Self {
            kernel: Array4::zeros((out_channels, in_channels, k, k)),
            bias: Array1::zeros(out_channels),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            kernel: Array4::zeros(self.kernel.raw_dim()),
            bias: Array1::zeros(self.bias.len()),
        }
    }

    pub(crate) fn axpy(&mut self, scale: f64, other: &Self) {
        self.kernel.scaled_add(scale, &other.kernel);
        self.bias.scaled_add(scale, &other.bias);
    }
}

pub(crate) fn conv2d_forward(input: &Array3<f64>, params: &Conv2dParams) -> Array3<f64> {
    let (in_c, h, w) = input.dim();
    let (out_c, kc, k, _) = params.kernel.dim();
    debug_assert_eq!(in_c, kc);
    let pad = (k - 1) / 2;
    let mut out = Array3::zeros((out_c, h, w));
    for o in 0..out_c {
        for i in 0..h {
            for j in 0..w {
                let mut acc = params.bias[o];
                for c in 0..in_c {
                    for u in 0..k {
                        let ii = i + u;
                        if ii < pad || ii - pad >= h {
                            continue;
                        }
                        for v in 0..k {
                            let jj = j + v;
                            if jj < pad || jj - pad >= w {
                                continue;
                            }
                            acc += params.kernel[[o, c, u, v]] * input[[c, ii - pad, jj - pad]];
                        }
                    }
                }
                out[[o, i, j]] = acc;
            }
        }
    }
    out
}

pub(crate) fn conv2d_backward(
    input: &Array3<f64>,
    params: &Conv2dParams,
    d_out: &Array3<f64>,
    grad: &mut Conv2dParams,
) -> Array3<f64> {
    let (in_c, h, w) = input.dim();
    let (out_c, _, k, _) = params.kernel.dim();
    let pad = (k - 1) / 2;
    let mut d_input = Array3::zeros(input.raw_dim());
    for o in 0..out_c {
        for i in 0..h {
            for j in 0..w {
                let g = d_out[[o, i, j]];
                grad.bias[o] += g;
                for c in 0..in_c {
                    for u in 0..k {
                        let ii = i + u;
                        if ii < pad || ii - pad >= h {
                            continue;
                        }
                        for v in 0..k {
                            let jj = j + v;
                            if jj < pad || jj - pad >= w {
                                continue;
                            }
                            grad.kernel[[o, c, u, v]] += g * input[[c, ii - pad, jj - pad]];
                            d_input[[c, ii - pad, jj - pad]] += g * params.kernel[[o, c, u, v]];
                        }
                    }
                }
            }
        }
    }
    d_input
}
