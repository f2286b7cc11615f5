//! Attention encoder mapping a window of observed channel matrices to the
//! next slot's path parameters.
//!
//! Each slot is converted to an angle-delay map by a 2D DFT, truncated to the
//! first `n_trunc` delay rows (where the energy concentrates for delays well
//! below the inverse subcarrier spacing), flattened into real features, and
//! embedded into d_model dimensions by two fully connected stages. Multi-head
//! self-attention mixes the slots, and a fully connected head squashes the
//! flattened result into the valid parameter ranges.

use ndarray::{s, Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use std::f64::consts::TAU;

use super::layers::{
    layer_norm_backward, layer_norm_forward, leaky_relu, leaky_relu_grad, mhsa_backward,
    mhsa_forward, sigmoid, LayerNormCache, LayerNormParams, LinearLayer, MhsaCache, MhsaParams,
};
use crate::channel::ChannelMatrix;
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::{ParametricCsi, PathParams};

/// Shape bundle shared by the encoder and decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimatorDims {
    /// History slots fed to the encoder (w).
    pub window_len: usize,
    /// Token width inside the attention stages.
    pub d_model: usize,
    /// Attention heads; must divide `d_model`.
    pub n_heads: usize,
    /// Delay rows kept after the angle-delay transform.
    pub n_trunc: usize,
    pub n_subcarriers: usize,
    pub n_tx: usize,
    pub n_paths: usize,
    /// Adds a learned per-slot embedding so attention can tell slots apart.
    pub use_slot_embedding: bool,
}

impl EstimatorDims {
    /// Default model sizing on top of a scenario: d_model 64, 4 heads, at
    /// most 32 delay rows.
    pub fn for_scenario(cfg: &ScenarioConfig) -> Self {
        Self {
            window_len: cfg.window_len,
            d_model: 64,
            n_heads: 4,
            n_trunc: cfg.n_subcarriers.min(32),
            n_subcarriers: cfg.n_subcarriers,
            n_tx: cfg.n_tx,
            n_paths: cfg.n_paths,
            use_slot_embedding: true,
        }
    }

    /// Smallest configuration used by the gradient checks.
    pub fn micro() -> Self {
        Self {
            window_len: 2,
            d_model: 8,
            n_heads: 2,
            n_trunc: 8,
            n_subcarriers: 8,
            n_tx: 4,
            n_paths: 2,
            use_slot_embedding: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.window_len == 0
            || self.d_model == 0
            || self.n_heads == 0
            || self.n_trunc == 0
            || self.n_subcarriers == 0
            || self.n_tx == 0
            || self.n_paths == 0
        {
            return fail("estimator dimensions must all be positive".into());
        }
        if self.d_model % self.n_heads != 0 {
            return fail(format!(
                "d_model {} is not divisible by {} heads",
                self.d_model, self.n_heads
            ));
        }
        if self.n_trunc > self.n_subcarriers {
            return fail(format!(
                "cannot keep {} delay rows out of {} subcarriers",
                self.n_trunc, self.n_subcarriers
            ));
        }
        Ok(())
    }

    /// Real features per slot after truncation: 2 · n_trunc · n_tx.
    pub fn feature_len(&self) -> usize {
        2 * self.n_trunc * self.n_tx
    }

    pub fn matches_scenario(&self, cfg: &ScenarioConfig) -> bool {
        self.window_len == cfg.window_len
            && self.n_subcarriers == cfg.n_subcarriers
            && self.n_tx == cfg.n_tx
            && self.n_paths == cfg.n_paths
    }
}

/// Unitary DFT matrix of order `n`: `F[m, k] = e^{-j 2π m k / n} / √n`.
fn dft_matrix(n: usize) -> Array2<Complex64> {
    Array2::from_shape_fn((n, n), |(m, k)| {
        Complex64::from_polar(1.0 / (n as f64).sqrt(), -TAU * (m * k) as f64 / n as f64)
    })
}

/// Converts channel matrices to truncated angle-delay features. The DFT
/// matrices are cached, so reuse one extractor across a dataset.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    freq_dft: Array2<Complex64>,
    space_dft: Array2<Complex64>,
    n_trunc: usize,
}

impl FeatureExtractor {
    pub fn new(dims: &EstimatorDims) -> Result<Self> {
        dims.validate()?;
        Ok(Self {
            freq_dft: dft_matrix(dims.n_subcarriers),
            space_dft: dft_matrix(dims.n_tx),
            n_trunc: dims.n_trunc,
        })
    }

    /// Full angle-delay map `F_freq · H · F_space` without truncation.
    pub fn angle_delay_map(&self, h: &ChannelMatrix) -> Result<Array2<Complex64>> {
        if h.n_subcarriers() != self.freq_dft.nrows() || h.n_tx() != self.space_dft.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "channel is {}x{}, extractor expects {}x{}",
                h.n_subcarriers(),
                h.n_tx(),
                self.freq_dft.nrows(),
                self.space_dft.nrows()
            )));
        }
        Ok(self.freq_dft.dot(&h.entries).dot(&self.space_dft))
    }

    /// Flattened real features of one slot: real parts of the first
    /// `n_trunc` delay rows, then imaginary parts, both row-major.
    pub fn features(&self, h: &ChannelMatrix) -> Result<Array1<f64>> {
        let map = self.angle_delay_map(h)?;
        let trunc = map.slice(s![..self.n_trunc, ..]);
        let mut out = Vec::with_capacity(2 * trunc.len());
        out.extend(trunc.iter().map(|c| c.re));
        out.extend(trunc.iter().map(|c| c.im));
        Ok(Array1::from_vec(out))
    }

    /// Stacks per-slot features into a window × feature matrix.
    pub fn sequence_features(&self, seq: &[ChannelMatrix]) -> Result<Array2<f64>> {
        if seq.is_empty() {
            return Err(Error::DimensionMismatch(
                "cannot extract features from an empty window".into(),
            ));
        }
        let feat_len = 2 * self.n_trunc * self.space_dft.nrows();
        let mut out = Array2::zeros((seq.len(), feat_len));
        for (mut row, h) in out.rows_mut().into_iter().zip(seq) {
            row.assign(&self.features(h)?);
        }
        Ok(out)
    }
}

/// Trainable state of the encoder.
#[derive(Debug, Clone)]
pub struct EncoderParams {
    pub dims: EstimatorDims,
    /// First embedding stage: feature_len → 4·d_model.
    pub fc1: LinearLayer,
    /// Second embedding stage: 4·d_model → d_model.
    pub fc2: LinearLayer,
    /// Learned additive per-slot embedding, window × d_model.
    pub slot_embedding: Option<Array2<f64>>,
    pub attention: MhsaParams,
    pub norm: LayerNormParams,
    /// Output head: w·d_model → 4·n_paths logits.
    pub head: LinearLayer,
}

impl EncoderParams {
    pub fn init(dims: EstimatorDims, rng: &mut impl Rng) -> Result<Self> {
        dims.validate()?;
        let hidden = 4 * dims.d_model;
        Ok(Self {
            dims,
            fc1: LinearLayer::init(hidden, dims.feature_len(), rng),
            fc2: LinearLayer::init(dims.d_model, hidden, rng),
            slot_embedding: dims
                .use_slot_embedding
                .then(|| Array2::zeros((dims.window_len, dims.d_model))),
            attention: MhsaParams::init(dims.d_model, dims.n_heads, rng),
            norm: LayerNormParams::identity(),
            head: LinearLayer::init(4 * dims.n_paths, dims.window_len * dims.d_model, rng),
        })
    }

    /// All-zero parameters with layer norm at identity; shapes only, meant
    /// as a target for checkpoint loading.
    pub fn zeros(dims: EstimatorDims) -> Result<Self> {
        dims.validate()?;
        let hidden = 4 * dims.d_model;
        Ok(Self {
            dims,
            fc1: LinearLayer::zeros(hidden, dims.feature_len()),
            fc2: LinearLayer::zeros(dims.d_model, hidden),
            slot_embedding: dims
                .use_slot_embedding
                .then(|| Array2::zeros((dims.window_len, dims.d_model))),
            attention: MhsaParams::zeros(dims.d_model, dims.n_heads),
            norm: LayerNormParams::identity(),
            head: LinearLayer::zeros(4 * dims.n_paths, dims.window_len * dims.d_model),
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            dims: self.dims,
            fc1: self.fc1.zeros_like(),
            fc2: self.fc2.zeros_like(),
            slot_embedding: self
                .slot_embedding
                .as_ref()
                .map(|e| Array2::zeros(e.raw_dim())),
            attention: self.attention.zeros_like(),
            norm: self.norm.zeros_like(),
            head: self.head.zeros_like(),
        }
    }

    /// Adds `scale · other` tensor-by-tensor; `axpy(-lr, grads)` is one
    /// gradient step.
    pub fn axpy(&mut self, scale: f64, other: &Self) {
        self.fc1.axpy(scale, &other.fc1);
        self.fc2.axpy(scale, &other.fc2);
        if let (Some(mine), Some(theirs)) = (&mut self.slot_embedding, &other.slot_embedding) {
            mine.scaled_add(scale, theirs);
        }
        self.attention.axpy(scale, &other.attention);
        self.norm.axpy(scale, &other.norm);
        self.head.axpy(scale, &other.head);
    }

    /// Named tensors in declaration order, flattened row-major.
    pub(crate) fn tensor_entries(&self) -> Vec<(String, Vec<f64>)> {
        let mut out = vec![
            ("fc1.weight".into(), self.fc1.weight.iter().copied().collect()),
            ("fc1.bias".into(), self.fc1.bias.to_vec()),
            ("fc2.weight".into(), self.fc2.weight.iter().copied().collect()),
            ("fc2.bias".into(), self.fc2.bias.to_vec()),
        ];
        if let Some(embed) = &self.slot_embedding {
            out.push(("slot_embedding".into(), embed.iter().copied().collect()));
        }
        push_attention_entries(&mut out, &self.attention);
        out.push(("norm.kappa".into(), vec![self.norm.kappa]));
        out.push(("norm.eta".into(), vec![self.norm.eta]));
        out.push(("head.weight".into(), self.head.weight.iter().copied().collect()));
        out.push(("head.bias".into(), self.head.bias.to_vec()));
        out
    }

    pub(crate) fn load_tensor_entries(&mut self, entries: &[(String, Vec<f64>)]) -> Result<()> {
        let expected = self.tensor_entries();
        check_tensor_names(&expected, entries)?;
        let mut it = entries.iter();
        let mut next = || it.next().map(|(_, v)| v.as_slice()).unwrap();
        assign_matrix(&mut self.fc1.weight, next())?;
        assign_vector(&mut self.fc1.bias, next())?;
        assign_matrix(&mut self.fc2.weight, next())?;
        assign_vector(&mut self.fc2.bias, next())?;
        if let Some(embed) = &mut self.slot_embedding {
            assign_matrix(embed, next())?;
        }
        load_attention_entries(&mut self.attention, &mut next)?;
        self.norm.kappa = scalar_entry(next())?;
        self.norm.eta = scalar_entry(next())?;
        assign_matrix(&mut self.head.weight, next())?;
        assign_vector(&mut self.head.bias, next())?;
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

pub(crate) fn push_attention_entries(out: &mut Vec<(String, Vec<f64>)>, attn: &MhsaParams) {
    for (k, head) in attn.heads.iter().enumerate() {
        out.push((
            format!("attention.head{k}.w_query"),
            head.w_query.iter().copied().collect(),
        ));
        out.push((
            format!("attention.head{k}.w_key"),
            head.w_key.iter().copied().collect(),
        ));
        out.push((
            format!("attention.head{k}.w_value"),
            head.w_value.iter().copied().collect(),
        ));
    }
}

pub(crate) fn load_attention_entries<'a>(
    attn: &mut MhsaParams,
    next: &mut impl FnMut() -> &'a [f64],
) -> Result<()> {
    for head in attn.heads.iter_mut() {
        assign_matrix(&mut head.w_query, next())?;
        assign_matrix(&mut head.w_key, next())?;
        assign_matrix(&mut head.w_value, next())?;
    }
    Ok(())
}

pub(crate) fn check_tensor_names(
    expected: &[(String, Vec<f64>)],
    got: &[(String, Vec<f64>)],
) -> Result<()> {
    if expected.len() != got.len() {
        return Err(Error::MalformedFile {
            what: "checkpoint tensors",
            detail: format!("expected {} tensors, found {}", expected.len(), got.len()),
        });
    }
    for ((en, ev), (gn, gv)) in expected.iter().zip(got) {
        if en != gn {
            return Err(Error::MalformedFile {
                what: "checkpoint tensors",
                detail: format!("expected tensor {en:?}, found {gn:?}"),
            });
        }
        if ev.len() != gv.len() {
            return Err(Error::MalformedFile {
                what: "checkpoint tensors",
                detail: format!("tensor {en:?} has {} values, expected {}", gv.len(), ev.len()),
            });
        }
    }
    Ok(())
}

pub(crate) fn assign_matrix(target: &mut Array2<f64>, values: &[f64]) -> Result<()> {
    if values.len() != target.len() {
        return Err(Error::DimensionMismatch(format!(
            "tensor holds {} values, target shape wants {}",
            values.len(),
            target.len()
        )));
    }
    for (t, &v) in target.iter_mut().zip(values) {
        *t = v;
    }
    Ok(())
}

pub(crate) fn assign_vector(target: &mut Array1<f64>, values: &[f64]) -> Result<()> {
    if values.len() != target.len() {
        return Err(Error::DimensionMismatch(format!(
            "tensor holds {} values, target length is {}",
            values.len(),
            target.len()
        )));
    }
    for (t, &v) in target.iter_mut().zip(values) {
        *t = v;
    }
    Ok(())
}

pub(crate) fn scalar_entry(values: &[f64]) -> Result<f64> {
    if values.len() != 1 {
        return Err(Error::DimensionMismatch(format!(
            "expected a scalar tensor, got {} values",
            values.len()
        )));
    }
    Ok(values[0])
}

/// Upper bounds of the four parameter columns: AoD and phase wrap at 2π,
/// delay and path loss saturate at their configured maxima.
pub(crate) fn parameter_ranges(cfg: &ScenarioConfig) -> [f64; 4] {
    [TAU, cfg.tau_max_s, cfg.beta_max, TAU]
}

pub(crate) struct EncoderCache {
    pub features: Array2<f64>,
    pub fc1_pre: Array2<f64>,
    pub fc1_act: Array2<f64>,
    pub mhsa: MhsaCache,
    pub ln: LayerNormCache,
    pub head_input: Array1<f64>,
    pub sigmoids: Array1<f64>,
}

/// Embeds a window of channel matrices into the w × d_model slot tokens fed
/// to the attention stage.
pub fn input_embedding(seq: &[ChannelMatrix], params: &EncoderParams) -> Result<Array2<f64>> {
    let extractor = FeatureExtractor::new(&params.dims)?;
    let features = extractor.sequence_features(seq)?;
    Ok(embed_features(&features, params).2)
}

fn embed_features(
    features: &Array2<f64>,
    params: &EncoderParams,
) -> (Array2<f64>, Array2<f64>, Array2<f64>) {
    let fc1_pre = params.fc1.forward_rows(features);
    let fc1_act = fc1_pre.mapv(leaky_relu);
    let mut embedded = params.fc2.forward_rows(&fc1_act);
    if let Some(slot) = &params.slot_embedding {
        embedded += slot;
    }
    (fc1_pre, fc1_act, embedded)
}

/// Predicts the next slot's path parameters from a window of observed
/// channels. Also returns the per-head attention maps for inspection.
pub fn encoder_forward(
    cfg: &ScenarioConfig,
    seq: &[ChannelMatrix],
    params: &EncoderParams,
) -> Result<(ParametricCsi, Vec<Array2<f64>>)> {
    let extractor = FeatureExtractor::new(&params.dims)?;
    let features = extractor.sequence_features(seq)?;
    let (csi, cache) = encoder_forward_from_features(cfg, &features, params)?;
    Ok((csi, cache.mhsa.maps))
}

pub(crate) fn encoder_forward_from_features(
    cfg: &ScenarioConfig,
    features: &Array2<f64>,
    params: &EncoderParams,
) -> Result<(ParametricCsi, EncoderCache)> {
    let dims = &params.dims;
    if features.dim() != (dims.window_len, dims.feature_len()) {
        return Err(Error::DimensionMismatch(format!(
            "feature matrix is {:?}, encoder expects ({}, {})",
            features.dim(),
            dims.window_len,
            dims.feature_len()
        )));
    }
    let (fc1_pre, fc1_act, embedded) = embed_features(features, params);
    let (z, mhsa) = mhsa_forward(&embedded, &params.attention);
    let (normed, ln) = layer_norm_forward(&z, &params.norm);
    let head_input = Array1::from_iter(normed.iter().copied());
    let logits = params.head.forward(&head_input);
    let sigmoids = logits.mapv(sigmoid);
    let ranges = parameter_ranges(cfg);
    let paths = (0..dims.n_paths)
        .map(|l| PathParams {
            aod_rad: ranges[0] * sigmoids[4 * l],
            delay_s: ranges[1] * sigmoids[4 * l + 1],
            path_loss: ranges[2] * sigmoids[4 * l + 2],
            phase_rad: ranges[3] * sigmoids[4 * l + 3],
        })
        .collect();
    Ok((
        ParametricCsi { paths },
        EncoderCache {
            features: features.clone(),
            fc1_pre,
            fc1_act,
            mhsa,
            ln,
            head_input,
            sigmoids,
        },
    ))
}

/// Accumulates encoder gradients given the loss gradient with respect to the
/// predicted parameters, laid out path-major as (AoD, delay, path loss,
/// phase) per path.
pub(crate) fn encoder_backward(
    cfg: &ScenarioConfig,
    params: &EncoderParams,
    cache: &EncoderCache,
    d_csi: &[f64],
    grads: &mut EncoderParams,
) {
    let dims = &params.dims;
    debug_assert_eq!(d_csi.len(), 4 * dims.n_paths);
    let ranges = parameter_ranges(cfg);
    let d_logits = Array1::from_shape_fn(4 * dims.n_paths, |i| {
        let sig = cache.sigmoids[i];
        d_csi[i] * ranges[i % 4] * sig * (1.0 - sig)
    });
    let d_flat = params.head.backward(&cache.head_input, &d_logits, &mut grads.head);
    let d_normed = d_flat
        .into_shape_with_order((dims.window_len, dims.d_model))
        .expect("head input reshapes back to window x d_model");
    let d_z = layer_norm_backward(&params.norm, &cache.ln, &d_normed, &mut grads.norm);
    let d_embedded = mhsa_backward(&params.attention, &cache.mhsa, &d_z, &mut grads.attention);
    if let Some(slot_grad) = &mut grads.slot_embedding {
        *slot_grad += &d_embedded;
    }
    let d_act = params.fc2.backward_rows(&cache.fc1_act, &d_embedded, &mut grads.fc2);
    let d_pre = &d_act * &cache.fc1_pre.mapv(leaky_relu_grad);
    params.fc1.backward_rows(&cache.features, &d_pre, &mut grads.fc1);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::assemble_channel;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn micro_cfg() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::desk_scale();
        cfg.n_tx = 4;
        cfg.n_subcarriers = 8;
        cfg.n_paths = 2;
        cfg.window_len = 2;
        cfg
    }

    #[test]
    fn scenario_dims_default_to_capped_truncation() {
        let dims = EstimatorDims::for_scenario(&ScenarioConfig::desk_scale());
        assert_eq!((dims.d_model, dims.n_heads), (64, 4));
        assert_eq!(dims.n_trunc, 32);
        let big = ScenarioConfig::full_scale();
        assert_eq!(EstimatorDims::for_scenario(&big).n_trunc, 32);
        dims.validate().unwrap();
    }

    #[test]
    fn rejects_truncation_beyond_subcarrier_count() {
        let mut dims = EstimatorDims::micro();
        dims.n_trunc = dims.n_subcarriers + 1;
        assert!(dims.validate().is_err());
        assert!(FeatureExtractor::new(&dims).is_err());
    }

    #[test]
    fn feature_vector_counts_two_blocks_per_kept_row() {
        let dims = EstimatorDims::micro();
        assert_eq!(dims.feature_len(), 2 * 8 * 4);
        let extractor = FeatureExtractor::new(&dims).unwrap();
        let h = ChannelMatrix::zeros(8, 4);
        assert_eq!(extractor.features(&h).unwrap().len(), 64);
    }

    #[test]
    fn integer_delay_bin_concentrates_in_one_row() {
        let mut cfg = ScenarioConfig::desk_scale();
        cfg.n_paths = 1;
        // Delay of 30 ns is exactly 3 cycles across the 100 MHz band, so the
        // delay DFT lands on bin 3 with no leakage.
        let csi = ParametricCsi {
            paths: vec![PathParams {
                aod_rad: 0.7,
                delay_s: 30e-9,
                path_loss: 0.9,
                phase_rad: 1.1,
            }],
        };
        let h = assemble_channel(&cfg, &csi).unwrap();
        let dims = EstimatorDims::for_scenario(&cfg);
        let extractor = FeatureExtractor::new(&dims).unwrap();
        let map = extractor.angle_delay_map(&h).unwrap();
        let total: f64 = map.iter().map(|c| c.norm_sqr()).sum();
        let row3: f64 = map.row(3).iter().map(|c| c.norm_sqr()).sum();
        assert_relative_eq!(row3, total, max_relative = 1e-20);
    }

    #[test]
    fn short_delays_concentrate_in_early_rows() {
        let mut cfg = ScenarioConfig::desk_scale();
        cfg.n_paths = 1;
        let csi = ParametricCsi {
            paths: vec![PathParams {
                aod_rad: -0.4,
                delay_s: 23e-9,
                path_loss: 1.0,
                phase_rad: 0.3,
            }],
        };
        let h = assemble_channel(&cfg, &csi).unwrap();
        let mut dims = EstimatorDims::for_scenario(&cfg);
        dims.n_trunc = 16;
        let extractor = FeatureExtractor::new(&dims).unwrap();
        let map = extractor.angle_delay_map(&h).unwrap();
        let total: f64 = map.iter().map(|c| c.norm_sqr()).sum();
        let kept: f64 = map
            .slice(s![..16, ..])
            .iter()
            .map(|c| c.norm_sqr())
            .sum();
        assert!(
            kept > 0.9 * total,
            "first 16 delay rows hold {:.1}% of the energy",
            100.0 * kept / total
        );
    }

    #[test]
    fn zero_window_embeds_to_bias_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut params = EncoderParams::init(EstimatorDims::micro(), &mut rng).unwrap();
        params.fc1.bias.fill(0.0);
        params.fc2.bias.fill(0.0);
        let seq = vec![ChannelMatrix::zeros(8, 4); 2];
        let embedded = input_embedding(&seq, &params).unwrap();
        assert_eq!(embedded.dim(), (2, 8));
        for &v in &embedded {
            assert!(v.abs() < 1e-15);
        }
    }

    #[test]
    fn embedding_shape_is_window_by_model_width() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = micro_cfg();
        let dims = EstimatorDims {
            d_model: 16,
            n_heads: 4,
            ..EstimatorDims::micro()
        };
        let params = EncoderParams::init(dims, &mut rng).unwrap();
        let mut scen_rng = ChaCha8Rng::seed_from_u64(77);
        let sample = crate::channel::channel_sequence(&cfg, &mut scen_rng).unwrap();
        let embedded = input_embedding(&sample.history, &params).unwrap();
        assert_eq!(embedded.dim(), (2, 16));
    }

    #[test]
    fn outputs_stay_inside_parameter_ranges() {
        let cfg = micro_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..50 {
            let params = EncoderParams::init(EstimatorDims::micro(), &mut rng).unwrap();
            let mut scen_rng = ChaCha8Rng::seed_from_u64(1000 + trial);
            let sample = crate::channel::channel_sequence(&cfg, &mut scen_rng).unwrap();
            let (csi, maps) = encoder_forward(&cfg, &sample.history, &params).unwrap();
            assert_eq!(csi.n_paths(), 2);
            assert_eq!(maps.len(), 2);
            csi.validate(&cfg).unwrap();
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let cfg = micro_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params = EncoderParams::init(EstimatorDims::micro(), &mut rng).unwrap();
        let mut scen_rng = ChaCha8Rng::seed_from_u64(5);
        let sample = crate::channel::channel_sequence(&cfg, &mut scen_rng).unwrap();
        let (a, _) = encoder_forward(&cfg, &sample.history, &params).unwrap();
        let (b, _) = encoder_forward(&cfg, &sample.history, &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn flatten_assign_roundtrip_preserves_every_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let params = EncoderParams::init(EstimatorDims::micro(), &mut rng).unwrap();
        let flat = params.flatten();
        assert_eq!(flat.len(), params.param_count());
        let mut other = EncoderParams::init(EstimatorDims::micro(), &mut rng).unwrap();
        other.assign_from_flat(&flat).unwrap();
        assert_eq!(other.flatten(), flat);
        assert!(other.assign_from_flat(&flat[1..]).is_err());
    }
}
