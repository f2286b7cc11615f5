//! Attention decoder reconstructing the channel matrix from de-quantized
//! path parameters.
//!
//! Each path becomes one token: its four parameters are normalized to [0, 1]
//! by the representable ranges and embedded into d_model dimensions. After
//! self-attention over the paths and layer normalization, a fully connected
//! stage expands to a 2-channel N_f × N_t feature map (real and imaginary
//! planes), which a shape-preserving 2D convolution refines into the output.

use ndarray::{Array1, Array2, Array3};
use rand::Rng;

use super::encoder::{
    assign_matrix, assign_vector, check_tensor_names, load_attention_entries, parameter_ranges,
    push_attention_entries, scalar_entry, EstimatorDims,
};
use super::layers::{
    conv2d_backward, conv2d_forward, layer_norm_backward, layer_norm_forward, leaky_relu,
    leaky_relu_grad, mhsa_backward, mhsa_forward, Conv2dParams, LayerNormCache, LayerNormParams,
    LinearLayer, MhsaCache, MhsaParams,
};
use crate::channel::ChannelMatrix;
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::ParametricCsi;
use num_complex::Complex64;

/// Trainable state of the decoder.
#[derive(Debug, Clone)]
pub struct DecoderParams {
    pub dims: EstimatorDims,
    /// Token embedding: 4 normalized parameters → d_model.
    pub token_embed: LinearLayer,
    pub attention: MhsaParams,
    pub norm: LayerNormParams,
    /// Expansion: n_paths·d_model → 2·N_f·N_t.
    pub expand: LinearLayer,
    /// Output refinement, 2 → 2 channels with a 3×3 kernel.
    pub conv: Conv2dParams,
}

impl DecoderParams {
    pub fn init(dims: EstimatorDims, rng: &mut impl Rng) -> Result<Self> {
        dims.validate()?;
        Ok(Self {
            dims,
            token_embed: LinearLayer::init(dims.d_model, 4, rng),
            attention: MhsaParams::init(dims.d_model, dims.n_heads, rng),
            norm: LayerNormParams::identity(),
            expand: LinearLayer::init(
                2 * dims.n_subcarriers * dims.n_tx,
                dims.n_paths * dims.d_model,
                rng,
            ),
            conv: Conv2dParams::init(2, 2, 3, rng),
        })
    }

    /// All-zero parameters with layer norm at identity; shapes only, meant
    /// as a target for checkpoint loading.
    pub fn zeros(dims: EstimatorDims) -> Result<Self> {
        dims.validate()?;
        Ok(Self {
            dims,
            token_embed: LinearLayer::zeros(dims.d_model, 4),
            attention: MhsaParams::zeros(dims.d_model, dims.n_heads),
            norm: LayerNormParams::identity(),
            expand: LinearLayer::zeros(
                2 * dims.n_subcarriers * dims.n_tx,
                dims.n_paths * dims.d_model,
            ),
            conv: Conv2dParams::zeros(2, 2, 3),
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            dims: self.dims,
            token_embed: self.token_embed.zeros_like(),
            attention: self.attention.zeros_like(),
            norm: self.norm.zeros_like(),
            expand: self.expand.zeros_like(),
            conv: self.conv.zeros_like(),
        }
    }

    pub fn axpy(&mut self, scale: f64, other: &Self) {
        self.token_embed.axpy(scale, &other.token_embed);
        self.attention.axpy(scale, &other.attention);
        self.norm.axpy(scale, &other.norm);
        self.expand.axpy(scale, &other.expand);
        self.conv.axpy(scale, &other.conv);
    }

    pub(crate) fn tensor_entries(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = vec![
            (
                "token_embed.weight".into(),
                self.token_embed.weight.iter().copied().collect(),
            ),
            ("token_embed.bias".into(), self.token_embed.bias.to_vec()),
        ];
        push_attention_entries(&mut out, &self.attention);
        out.push(("norm.kappa".into(), vec![self.norm.kappa]));
        out.push(("norm.eta".into(), vec![self.norm.eta]));
        out.push((
            "expand.weight".into(),
            self.expand.weight.iter().copied().collect(),
        ));
        out.push(("expand.bias".into(), self.expand.bias.to_vec()));
        out.push(("conv.kernel".into(), self.conv.kernel.iter().copied().collect()));
        out.push(("conv.bias".into(), self.conv.bias.to_vec()));
        out
    }

    pub(crate) fn load_tensor_entries(&mut self, entries: &[(String, Vec<f64>)]) -> Result<()> {
        let expected = self.tensor_entries();
        check_tensor_names(&expected, entries)?;
        let mut it = entries.iter();
        let mut next = || it.next().map(|(_, v)| v.as_slice()).unwrap();
        assign_matrix(&mut self.token_embed.weight, next())?;
        assign_vector(&mut self.token_embed.bias, next())?;
        load_attention_entries(&mut self.attention, &mut next)?;
        self.norm.kappa = scalar_entry(next())?;
        self.norm.eta = scalar_entry(next())?;
        assign_matrix(&mut self.expand.weight, next())?;
        assign_vector(&mut self.expand.bias, next())?;
        let kernel_values = next();
        if kernel_values.len() != self.conv.kernel.len() {
            return Err(Error::DimensionMismatch(format!(
                "convolution kernel holds {} values, expected {}",
                kernel_values.len(),
                self.conv.kernel.len()
            )));
        }
        for (t, &v) in self.conv.kernel.iter_mut().zip(kernel_values) {
            *t = v;
        }
        assign_vector(&mut self.conv.bias, next())?;
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.tensor_entries().iter().map(|(_, v)| v.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensor_entries()
            .into_iter()
            .flat_map(|(_, v)| v)
            .collect()
    }

    pub fn assign_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        let mut entries = self.tensor_entries();
        let total: usize = entries.iter().map(|(_, v)| v.len()).sum();
        if flat.len() != total {
            return Err(Error::DimensionMismatch(format!(
                "expected {} parameters, got {}",
                total,
                flat.len()
            )));
        }
        let mut offset = 0;
        for (_, values) in entries.iter_mut() {
            let len = values.len();
            values.copy_from_slice(&flat[offset..offset + len]);
            offset += len;
        }
        self.load_tensor_entries(&entries)
    }
}

/// Stacks a channel matrix into a 2 × N_f × N_t real tensor, real plane
/// first.
pub fn channel_to_tensor(h: &ChannelMatrix) -> Array3<f64> {
    let (nf, nt) = h.entries.dim();
    Array3::from_shape_fn((2, nf, nt), |(c, s, n)| {
        let e = h.entries[[s, n]];
        if c == 0 {
            e.re
        } else {
            e.im
        }
    })
}

/// Inverse of [`channel_to_tensor`].
pub fn tensor_to_channel(t: &Array3<f64>) -> ChannelMatrix {
    let (_, nf, nt) = t.dim();
    let mut out = ChannelMatrix::zeros(nf, nt);
    for s in 0..nf {
        for n in 0..nt {
            out.entries[[s, n]] = Complex64::new(t[[0, s, n]], t[[1, s, n]]);
        }
    }
    out
}

/// Normalizes each path's parameters by their representable ranges, giving
/// the n_paths × 4 token matrix.
pub(crate) fn parameter_tokens(cfg: &ScenarioConfig, csi: &ParametricCsi) -> Array2<f64> {
    let ranges = parameter_ranges(cfg);
    let mut tokens = Array2::zeros((csi.n_paths(), 4));
    for (mut row, path) in tokens.rows_mut().into_iter().zip(&csi.paths) {
        row[0] = path.aod_rad / ranges[0];
        row[1] = path.delay_s / ranges[1];
        row[2] = path.path_loss / ranges[2];
        row[3] = path.phase_rad / ranges[3];
    }
    tokens
}

pub(crate) struct DecoderCache {
    pub tokens: Array2<f64>,
    pub mhsa: MhsaCache,
    pub ln: LayerNormCache,
    pub flat: Array1<f64>,
    pub expand_pre: Array1<f64>,
    pub conv_input: Array3<f64>,
}

/// Reconstructs the channel as a 2 × N_f × N_t real tensor from de-quantized
/// path parameters. Also returns the per-head attention maps.
pub fn decoder_forward(
    cfg: &ScenarioConfig,
    csi: &ParametricCsi,
    params: &DecoderParams,
) -> Result<(Array3<f64>, Vec<Array2<f64>>)> {
    let (out, cache) = decoder_forward_cached(cfg, csi, params)?;
    Ok((out, cache.mhsa.maps))
}

pub(crate) fn decoder_forward_cached(
    cfg: &ScenarioConfig,
    csi: &ParametricCsi,
    params: &DecoderParams,
) -> Result<(Array3<f64>, DecoderCache)> {
    let dims = &params.dims;
    if csi.n_paths() != dims.n_paths {
        return Err(Error::DimensionMismatch(format!(
            "decoder expects {} paths, got {}",
            dims.n_paths,
            csi.n_paths()
        )));
    }
    let tokens = parameter_tokens(cfg, csi);
    let embedded = params.token_embed.forward_rows(&tokens);
    let (z, mhsa) = mhsa_forward(&embedded, &params.attention);
    let (normed, ln) = layer_norm_forward(&z, &params.norm);
    let flat = Array1::from_iter(normed.iter().copied());
    let expand_pre = params.expand.forward(&flat);
    let activated = expand_pre.mapv(leaky_relu);
    let conv_input = activated
        .into_shape_with_order((2, dims.n_subcarriers, dims.n_tx))
        .expect("expansion output reshapes to 2 x N_f x N_t");
    let out = conv2d_forward(&conv_input, &params.conv);
    Ok((
        out,
        DecoderCache {
            tokens,
            mhsa,
            ln,
            flat,
            expand_pre,
            conv_input,
        },
    ))
}

pub(crate) fn decoder_backward(
    params: &DecoderParams,
    cache: &DecoderCache,
    d_out: &Array3<f64>,
    grads: &mut DecoderParams,
) {
    let dims = &params.dims;
    let d_conv_in = conv2d_backward(&cache.conv_input, &params.conv, d_out, &mut grads.conv);
    let d_act = Array1::from_iter(d_conv_in.iter().copied());
    let d_pre = &d_act * &cache.expand_pre.mapv(leaky_relu_grad);
    let d_flat = params.expand.backward(&cache.flat, &d_pre, &mut grads.expand);
    let d_normed = d_flat
        .into_shape_with_order((dims.n_paths, dims.d_model))
        .expect("expansion input reshapes back to n_paths x d_model");
    let d_z = layer_norm_backward(&params.norm, &cache.ln, &d_normed, &mut grads.norm);
    let d_embedded = mhsa_backward(&params.attention, &cache.mhsa, &d_z, &mut grads.attention);
    params
        .token_embed
        .backward_rows(&cache.tokens, &d_embedded, &mut grads.token_embed);
}
