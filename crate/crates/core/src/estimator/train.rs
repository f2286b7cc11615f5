//! Training loop and inference pipeline.
//!
//! Each iteration runs the encoder on a window of observed channels, scores
//! its parameter estimate by the NMSE of the channel it implies (gradients
//! flow through the closed-form channel model via the analytic Jacobians),
//! then feeds the quantize/de-quantize result to the decoder, which is
//! scored by reconstruction NMSE. Both sides take plain SGD steps; the
//! quantizer passes no gradient, so the two losses stay independent.

use ndarray::{Array2, Array3};

use super::decoder::{
    channel_to_tensor, decoder_backward, decoder_forward, decoder_forward_cached, tensor_to_channel,
    DecoderParams,
};
use super::encoder::{
    encoder_backward, encoder_forward, encoder_forward_from_features, EncoderParams,
    FeatureExtractor,
};
use crate::channel::{assemble_channel, ChannelMatrix, SequenceSample};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::perturbation::analytic_jacobians;
use crate::quantizer::{dequantize_csi, quantize_csi, BitAllocation, Codebooks};
use crate::ParametricCsi;

/// Hyperparameters of one training run.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    /// Initial learning rate; decays by `decay_coeff` every `decay_period`
    /// epochs. Zero is allowed and makes every step a no-op.
    pub learning_rate: f64,
    pub epochs: usize,
    pub decay_period: usize,
    pub decay_coeff: f64,
    pub seed: u64,
    /// Feedback quantizer applied between encoder and decoder.
    pub feedback_bits: BitAllocation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            learning_rate: 2e-3,
            epochs: 200,
            decay_period: 50,
            decay_coeff: 0.1,
            seed: 0,
            feedback_bits: BitAllocation::uniform(8),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::InvalidConfig(msg.into()));
        if self.batch_size == 0 {
            return fail("batch size must be at least 1");
        }
        if self.epochs == 0 {
            return fail("epoch count must be at least 1");
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return fail("learning rate must be finite and non-negative");
        }
        if self.decay_period == 0 {
            return fail("decay period must be at least 1");
        }
        if !(self.decay_coeff > 0.0) || !self.decay_coeff.is_finite() {
            return fail("decay coefficient must be finite and positive");
        }
        Ok(())
    }

    /// Learning rate in effect during `epoch` (0-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.decay_coeff.powi((epoch / self.decay_period) as i32)
    }
}

/// One supervised example: the observed window plus the next slot's channel
/// and its generating parameters.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub history: Vec<ChannelMatrix>,
    pub target: ChannelMatrix,
    pub target_csi: ParametricCsi,
}

impl From<SequenceSample> for TrainSample {
    fn from(s: SequenceSample) -> Self {
        Self {
            history: s.history,
            target: s.target,
            target_csi: s.target_csi,
        }
    }
}

impl From<&SequenceSample> for TrainSample {
    fn from(s: &SequenceSample) -> Self {
        Self {
            history: s.history.clone(),
            target: s.target.clone(),
            target_csi: s.target_csi.clone(),
        }
    }
}

/// Per-epoch mean losses, both plain NMSE ratios.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct EpochStats {
    /// 1-based epoch number.
    pub epoch: usize,
    pub learning_rate: f64,
    pub encoder_nmse: f64,
    pub decoder_nmse: f64,
}

pub(crate) struct PreparedSample {
    features: Array2<f64>,
    target: ChannelMatrix,
    target_tensor: Array3<f64>,
    energy: f64,
}

pub(crate) fn prepare_sample(
    extractor: &FeatureExtractor,
    sample: &TrainSample,
) -> Result<PreparedSample> {
    let energy = sample.target.frob_sq();
    if energy <= 0.0 {
        return Err(Error::ZeroEnergyChannel);
    }
    Ok(PreparedSample {
        features: extractor.sequence_features(&sample.history)?,
        target: sample.target.clone(),
        target_tensor: channel_to_tensor(&sample.target),
        energy,
    })
}

/// NMSE between the channel implied by `estimate` and the true channel,
/// together with its gradient in the estimated parameters (path-major: AoD,
/// delay, path loss, phase per path).
pub(crate) fn encoder_loss_and_grad(
    cfg: &ScenarioConfig,
    estimate: &ParametricCsi,
    target: &ChannelMatrix,
    energy: f64,
) -> Result<(f64, Vec<f64>)> {
    let implied = assemble_channel(cfg, estimate)?;
    let n_paths = estimate.n_paths();
    let mut grad = vec![0.0; 4 * n_paths];
    let mut err = 0.0;
    for s in 1..=cfg.n_subcarriers {
        let jac = analytic_jacobians(cfg, estimate, s)?;
        let row = s - 1;
        for n in 0..cfg.n_tx {
            let delta = implied.entries[[row, n]] - target.entries[[row, n]];
            err += delta.norm_sqr();
            let scale = 2.0 / energy;
            for l in 0..n_paths {
                grad[4 * l] += scale * (delta * jac.d_theta[[n, l]]).re;
                grad[4 * l + 1] += scale * (delta * jac.d_tau[[n, l]]).re;
                grad[4 * l + 2] += scale * (delta * jac.d_beta[[n, l]]).re;
                grad[4 * l + 3] += scale * (delta * jac.d_phi[[n, l]]).re;
            }
        }
    }
    Ok((err / energy, grad))
}

/// Runs one sample forward and backward through both networks, accumulating
/// parameter gradients. Returns the encoder and decoder losses.
pub(crate) fn accumulate_sample(
    cfg: &ScenarioConfig,
    books: &Codebooks,
    sample: &PreparedSample,
    encoder: &EncoderParams,
    decoder: &DecoderParams,
    enc_grads: &mut EncoderParams,
    dec_grads: &mut DecoderParams,
) -> Result<(f64, f64)> {
    let (estimate, enc_cache) = encoder_forward_from_features(cfg, &sample.features, encoder)?;
    let (enc_loss, d_csi) = encoder_loss_and_grad(cfg, &estimate, &sample.target, sample.energy)?;
    encoder_backward(cfg, encoder, &enc_cache, &d_csi, enc_grads);

    let fed_back = dequantize_csi(&quantize_csi(&estimate, books), books);
    let (reconstruction, dec_cache) = decoder_forward_cached(cfg, &fed_back, decoder)?;
    let diff = &reconstruction - &sample.target_tensor;
    let dec_loss = diff.iter().map(|v| v * v).sum::<f64>() / sample.energy;
    let d_out = diff.mapv(|v| 2.0 * v / sample.energy);
    decoder_backward(decoder, &dec_cache, &d_out, dec_grads);
    Ok((enc_loss, dec_loss))
}

fn check_finite(loss_name: &'static str, value: f64, epoch: usize, iteration: usize) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteLoss {
            loss_name,
            value,
            epoch,
            iteration,
        })
    }
}

/// Trains both networks in place and returns the per-epoch loss history.
///
/// Batches are taken in dataset order; the update is the batch-mean gradient
/// scaled by the decayed learning rate. A non-finite loss aborts immediately
/// with the offending epoch and iteration.
pub fn train(
    cfg: &ScenarioConfig,
    samples: &[TrainSample],
    encoder: &mut EncoderParams,
    decoder: &mut DecoderParams,
    tc: &TrainConfig,
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    tc.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidConfig("training dataset is empty".into()));
    }
    if !encoder.dims.matches_scenario(cfg) {
        return Err(Error::DimensionMismatch(
            "encoder dimensions do not match the scenario".into(),
        ));
    }
    if !decoder.dims.matches_scenario(cfg) {
        return Err(Error::DimensionMismatch(
            "decoder dimensions do not match the scenario".into(),
        ));
    }
    let books = Codebooks::new(cfg, &tc.feedback_bits);
    let extractor = FeatureExtractor::new(&encoder.dims)?;
    let prepared = samples
        .iter()
        .map(|s| prepare_sample(&extractor, s))
        .collect::<Result<Vec<_>>>()?;
    let n = prepared.len() as f64;

    let mut history = Vec::with_capacity(tc.epochs);
    let mut iteration = 0;
    for epoch in 0..tc.epochs {
        let lr = tc.learning_rate_at(epoch);
        let mut enc_sum = 0.0;
        let mut dec_sum = 0.0;
        for batch in prepared.chunks(tc.batch_size) {
            iteration += 1;
            let mut enc_grads = encoder.zeros_like();
            let mut dec_grads = decoder.zeros_like();
            for sample in batch {
                let (enc_loss, dec_loss) = accumulate_sample(
                    cfg, &books, sample, encoder, decoder, &mut enc_grads, &mut dec_grads,
                )?;
                check_finite("encoder", enc_loss, epoch + 1, iteration)?;
                check_finite("decoder", dec_loss, epoch + 1, iteration)?;
                enc_sum += enc_loss;
                dec_sum += dec_loss;
            }
            let step = -lr / batch.len() as f64;
            encoder.axpy(step, &enc_grads);
            decoder.axpy(step, &dec_grads);
        }
        history.push(EpochStats {
            epoch: epoch + 1,
            learning_rate: lr,
            encoder_nmse: enc_sum / n,
            decoder_nmse: dec_sum / n,
        });
    }
    Ok(history)
}

/// Full feedback pipeline output for one window.
#[derive(Debug, Clone)]
pub struct Prediction {
    /// Raw encoder estimate before quantization.
    pub estimate: ParametricCsi,
    /// Parameters after the quantize/de-quantize roundtrip, as seen by the
    /// base station.
    pub fed_back: ParametricCsi,
    /// Decoder reconstruction of the next slot's channel.
    pub reconstruction: ChannelMatrix,
    /// Encoder attention maps, one window × window matrix per head.
    pub attention: Vec<Array2<f64>>,
    /// Decoder attention maps, one n_paths × n_paths matrix per head.
    pub decoder_attention: Vec<Array2<f64>>,
}

/// Runs encoder → quantizer → decoder on one observed window.
pub fn predict(
    cfg: &ScenarioConfig,
    history: &[ChannelMatrix],
    encoder: &EncoderParams,
    decoder: &DecoderParams,
    books: &Codebooks,
) -> Result<Prediction> {
    let (estimate, attention) = encoder_forward(cfg, history, encoder)?;
    let fed_back = dequantize_csi(&quantize_csi(&estimate, books), books);
    let (tensor, decoder_attention) = decoder_forward(cfg, &fed_back, decoder)?;
    Ok(Prediction {
        estimate,
        fed_back,
        reconstruction: tensor_to_channel(&tensor),
        attention,
        decoder_attention,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::channel_sequence;
    use crate::config::kmh_to_mps;
    use crate::estimator::encoder::EstimatorDims;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Short maximum delay keeps the per-subcarrier phase 2π f τ gentle, so
    // central differences resolve the loss surface instead of its curvature.
    fn micro_cfg() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::desk_scale();
        cfg.n_tx = 4;
        cfg.n_subcarriers = 8;
        cfg.n_paths = 2;
        cfg.window_len = 2;
        cfg.tau_max_s = 0.5e-9;
        cfg
    }

    fn toy_cfg() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::desk_scale();
        cfg.n_tx = 4;
        cfg.n_subcarriers = 8;
        cfg.n_paths = 2;
        cfg.window_len = 4;
        cfg.ue_speed_mps = kmh_to_mps(60.0);
        cfg.slot_period_s = 50e-3;
        cfg.tau_max_s = 0.5e-9;
        cfg.ue_distance_min_m = 10.0;
        cfg.ue_distance_max_m = 40.0;
        cfg
    }

    fn toy_dims(cfg: &ScenarioConfig) -> EstimatorDims {
        EstimatorDims {
            window_len: cfg.window_len,
            d_model: 16,
            n_heads: 2,
            n_trunc: cfg.n_subcarriers,
            n_subcarriers: cfg.n_subcarriers,
            n_tx: cfg.n_tx,
            n_paths: cfg.n_paths,
            use_slot_embedding: true,
        }
    }

    fn make_samples(cfg: &ScenarioConfig, count: usize, seed: u64) -> Vec<TrainSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| channel_sequence(cfg, &mut rng).unwrap().into())
            .collect()
    }

    fn sample_losses_and_grads(
        cfg: &ScenarioConfig,
        sample: &TrainSample,
        encoder: &EncoderParams,
        decoder: &DecoderParams,
        books: &Codebooks,
    ) -> (f64, f64, EncoderParams, DecoderParams) {
        let extractor = FeatureExtractor::new(&encoder.dims).unwrap();
        let prepared = prepare_sample(&extractor, sample).unwrap();
        let mut enc_grads = encoder.zeros_like();
        let mut dec_grads = decoder.zeros_like();
        let (enc_loss, dec_loss) = accumulate_sample(
            cfg,
            books,
            &prepared,
            encoder,
            decoder,
            &mut enc_grads,
            &mut dec_grads,
        )
        .unwrap();
        (enc_loss, dec_loss, enc_grads, dec_grads)
    }

    fn encoder_loss_at(
        cfg: &ScenarioConfig,
        flat: &[f64],
        template: &EncoderParams,
        sample: &TrainSample,
    ) -> f64 {
        let mut params = template.clone();
        params.assign_from_flat(flat).unwrap();
        let extractor = FeatureExtractor::new(&params.dims).unwrap();
        let features = extractor.sequence_features(&sample.history).unwrap();
        let (estimate, _) = encoder_forward_from_features(cfg, &features, &params).unwrap();
        encoder_loss_and_grad(cfg, &estimate, &sample.target, sample.target.frob_sq())
            .unwrap()
            .0
    }

    fn decoder_loss_at(
        cfg: &ScenarioConfig,
        flat: &[f64],
        template: &DecoderParams,
        input: &ParametricCsi,
        sample: &TrainSample,
    ) -> f64 {
        let mut params = template.clone();
        params.assign_from_flat(flat).unwrap();
        let (reconstruction, _) = decoder_forward_cached(cfg, input, &params).unwrap();
        let diff = &reconstruction - &channel_to_tensor(&sample.target);
        diff.iter().map(|v| v * v).sum::<f64>() / sample.target.frob_sq()
    }

    #[test]
    fn encoder_gradient_matches_coordinatewise_finite_differences() {
        let cfg = micro_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let encoder = EncoderParams::init(EstimatorDims::micro(), &mut rng).unwrap();
        let decoder = DecoderParams::init(EstimatorDims::micro(), &mut rng).unwrap();
        let books = Codebooks::new(&cfg, &BitAllocation::uniform(8));
        let sample = make_samples(&cfg, 1, 7)[0].clone();

        let (_, _, enc_grads, _) = sample_losses_and_grads(&cfg, &sample, &encoder, &decoder, &books);
        let analytic = enc_grads.flatten();
        let base = encoder.flatten();
        // Coordinates far below the gradient's own scale cannot be resolved
        // to 1e-4 relative by finite differences in f64, so they get an
        // absolute floor instead.
        let grad_scale = analytic.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        let eps = 1e-6;
        for i in 0..base.len() {
            let mut plus = base.clone();
            plus[i] += eps;
            let mut minus = base.clone();
            minus[i] -= eps;
            let fd = (encoder_loss_at(&cfg, &plus, &encoder, &sample)
                - encoder_loss_at(&cfg, &minus, &encoder, &sample))
                / (2.0 * eps);
            let diff = (analytic[i] - fd).abs();
            let tol = (1e-4 * analytic[i].abs().max(fd.abs())).max(1e-7 * grad_scale);
            assert!(
                diff <= tol,
                "coordinate {i}: analytic {} vs finite difference {}",
                analytic[i],
                fd
            );
        }
    }

    #[test]
    fn encoder_gradient_matches_directional_finite_differences() {
        let cfg = micro_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let books = Codebooks::new(&cfg, &BitAllocation::uniform(8));
        let sample = make_samples(&cfg, 1, 11)[0].clone();

        for draw in 0..100 {
            let mut init_rng = ChaCha8Rng::seed_from_u64(5000 + draw);
            let encoder = EncoderParams::init(EstimatorDims::micro(), &mut init_rng).unwrap();
            let decoder = DecoderParams::init(EstimatorDims::micro(), &mut init_rng).unwrap();
            let (_, _, enc_grads, _) =
                sample_losses_and_grads(&cfg, &sample, &encoder, &decoder, &books);
            let analytic = enc_grads.flatten();
            let base = encoder.flatten();

            let mut dir: Vec<f64> = (0..base.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            dir.iter_mut().for_each(|v| *v /= norm);

            let eps = 1e-6;
            let plus: Vec<f64> = base.iter().zip(&dir).map(|(b, d)| b + eps * d).collect();
            let minus: Vec<f64> = base.iter().zip(&dir).map(|(b, d)| b - eps * d).collect();
            let fd = (encoder_loss_at(&cfg, &plus, &encoder, &sample)
                - encoder_loss_at(&cfg, &minus, &encoder, &sample))
                / (2.0 * eps);
            let along: f64 = analytic.iter().zip(&dir).map(|(g, d)| g * d).sum();
            let diff = (along - fd).abs();
            assert!(
                diff <= 1e-4 * along.abs().max(fd.abs()).max(1e-6),
                "draw {draw}: directional derivative {along} vs finite difference {fd}"
            );
        }
    }

    #[test]
    fn decoder_gradient_matches_coordinatewise_finite_differences() {
        let cfg = micro_cfg();
        let mut rng = ChaCha8Rng::seed_from_u64(44);
        let encoder = EncoderParams::init(EstimatorDims::micro(), &mut rng).unwrap();
        let decoder = DecoderParams::init(EstimatorDims::micro(), &mut rng).unwrap();
        let books = Codebooks::new(&cfg, &BitAllocation::uniform(8));
        let sample = make_samples(&cfg, 1, 13)[0].clone();

        let extractor = FeatureExtractor::new(&encoder.dims).unwrap();
        let features = extractor.sequence_features(&sample.history).unwrap();
        let (estimate, _) = encoder_forward_from_features(&cfg, &features, &encoder).unwrap();
        let fed_back = dequantize_csi(&quantize_csi(&estimate, &books), &books);

        let (_, _, _, dec_grads) = sample_losses_and_grads(&cfg, &sample, &encoder, &decoder, &books);
        let analytic = dec_grads.flatten();
        let base = decoder.flatten();
        let grad_scale = analytic.iter().fold(0.0f64, |a, g| a.max(g.abs()));
        let eps = 1e-6;
        for i in 0..base.len() {
            let mut plus = base.clone();
            plus[i] += eps;
            let mut minus = base.clone();
            minus[i] -= eps;
            let fd = (decoder_loss_at(&cfg, &plus, &decoder, &fed_back, &sample)
                - decoder_loss_at(&cfg, &minus, &decoder, &fed_back, &sample))
                / (2.0 * eps);
            let diff = (analytic[i] - fd).abs();
            let tol = (1e-4 * analytic[i].abs().max(fd.abs())).max(1e-7 * grad_scale);
            assert!(
                diff <= tol,
                "coordinate {i}: analytic {} vs finite difference {}",
                analytic[i],
                fd
            );
        }
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let cfg = toy_cfg();
        let dims = toy_dims(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let mut encoder = EncoderParams::init(dims, &mut rng).unwrap();
        let mut decoder = DecoderParams::init(dims, &mut rng).unwrap();
        let samples = make_samples(&cfg, 8, 51);
        let tc = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let enc_before = encoder.flatten();
        let dec_before = decoder.flatten();
        let stats = train(&cfg, &samples, &mut encoder, &mut decoder, &tc).unwrap();
        assert_eq!(encoder.flatten(), enc_before);
        assert_eq!(decoder.flatten(), dec_before);
        for s in &stats[1..] {
            assert_eq!(s.encoder_nmse, stats[0].encoder_nmse);
            assert_eq!(s.decoder_nmse, stats[0].decoder_nmse);
        }
    }

    #[test]
    fn training_reduces_loss_on_toy_dataset() {
        let cfg = toy_cfg();
        let dims = toy_dims(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        let mut encoder = EncoderParams::init(dims, &mut rng).unwrap();
        let mut decoder = DecoderParams::init(dims, &mut rng).unwrap();
        let samples = make_samples(&cfg, 64, 61);
        let tc = TrainConfig {
            epochs: 200,
            ..TrainConfig::default()
        };
        let stats = train(&cfg, &samples, &mut encoder, &mut decoder, &tc).unwrap();
        let first = &stats[0];
        let last = &stats[stats.len() - 1];
        assert!(
            last.encoder_nmse < first.encoder_nmse,
            "encoder loss went {} -> {}",
            first.encoder_nmse,
            last.encoder_nmse
        );
        assert!(
            last.decoder_nmse < first.decoder_nmse,
            "decoder loss went {} -> {}",
            first.decoder_nmse,
            last.decoder_nmse
        );
    }

    #[test]
    fn same_seed_training_is_bitwise_reproducible() {
        let cfg = toy_cfg();
        let dims = toy_dims(&cfg);
        let samples = make_samples(&cfg, 8, 70);
        let tc = TrainConfig {
            epochs: 2,
            batch_size: 4,
            ..TrainConfig::default()
        };
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(71);
            let mut encoder = EncoderParams::init(dims, &mut rng).unwrap();
            let mut decoder = DecoderParams::init(dims, &mut rng).unwrap();
            let stats = train(&cfg, &samples, &mut encoder, &mut decoder, &tc).unwrap();
            (stats, encoder.flatten(), decoder.flatten())
        };
        let (stats_a, enc_a, dec_a) = run();
        let (stats_b, enc_b, dec_b) = run();
        assert_eq!(stats_a, stats_b);
        assert_eq!(enc_a, enc_b);
        assert_eq!(dec_a, dec_b);
    }

    #[test]
    fn non_finite_loss_aborts_with_location() {
        let cfg = toy_cfg();
        let dims = toy_dims(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(80);
        let mut encoder = EncoderParams::init(dims, &mut rng).unwrap();
        let mut decoder = DecoderParams::init(dims, &mut rng).unwrap();
        encoder.fc1.weight[[0, 0]] = f64::NAN;
        let samples = make_samples(&cfg, 4, 81);
        let tc = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        match train(&cfg, &samples, &mut encoder, &mut decoder, &tc) {
            Err(Error::NonFiniteLoss {
                loss_name,
                epoch,
                iteration,
                ..
            }) => {
                assert_eq!(loss_name, "encoder");
                assert_eq!(epoch, 1);
                assert_eq!(iteration, 1);
            }
            other => panic!("expected a non-finite loss abort, got {other:?}"),
        }
    }

    #[test]
    fn rejects_degenerate_hyperparameters() {
        let mut tc = TrainConfig::default();
        tc.batch_size = 0;
        assert!(tc.validate().is_err());
        let mut tc = TrainConfig::default();
        tc.learning_rate = -0.1;
        assert!(tc.validate().is_err());
        let mut tc = TrainConfig::default();
        tc.decay_period = 0;
        assert!(tc.validate().is_err());
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn learning_rate_decays_every_period() {
        let tc = TrainConfig {
            learning_rate: 1.0,
            decay_period: 50,
            decay_coeff: 0.1,
            ..TrainConfig::default()
        };
        assert_eq!(tc.learning_rate_at(0), 1.0);
        assert_eq!(tc.learning_rate_at(49), 1.0);
        assert!((tc.learning_rate_at(50) - 0.1).abs() < 1e-15);
        assert!((tc.learning_rate_at(149) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn prediction_pipeline_produces_valid_feedback() {
        let cfg = toy_cfg();
        let dims = toy_dims(&cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(90);
        let encoder = EncoderParams::init(dims, &mut rng).unwrap();
        let decoder = DecoderParams::init(dims, &mut rng).unwrap();
        let books = Codebooks::new(&cfg, &BitAllocation::uniform(8));
        let sample = make_samples(&cfg, 1, 91)[0].clone();
        let pred = predict(&cfg, &sample.history, &encoder, &decoder, &books).unwrap();
        pred.estimate.validate(&cfg).unwrap();
        pred.fed_back.validate(&cfg).unwrap();
        assert_eq!(pred.reconstruction.n_subcarriers(), cfg.n_subcarriers);
        assert_eq!(pred.attention.len(), 2);
        assert_eq!(pred.decoder_attention.len(), 2);
    }
}
