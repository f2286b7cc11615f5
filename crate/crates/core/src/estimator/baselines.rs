//! Non-neural reference points.
//!
//! The oracle feeds the ground-truth parameters into the quantizer, so the
//! pipeline downstream of it measures pure quantization distortion. The
//! persistence baseline predicts no change: whatever channel was last
//! observed is the guess for the next slot.

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};
use crate::ParametricCsi;

/// Returns the ground-truth parameters as the "estimate".
pub fn oracle_estimator(target_csi: &ParametricCsi) -> ParametricCsi {
    target_csi.clone()
}

/// Predicts the next slot's channel as the last observed one.
pub fn persistence_baseline(history: &[ChannelMatrix]) -> Result<ChannelMatrix> {
    history.last().cloned().ok_or_else(|| {
        Error::DimensionMismatch("an empty window has no last observation".into())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{assemble_channel, channel_sequence};
    use crate::config::{kmh_to_mps, ScenarioConfig};
    use crate::metrics::{nmse, to_db};
    use crate::quantizer::{dequantize_csi, quantize_csi, BitAllocation, Codebooks};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn oracle_through_fine_quantizer_reconstructs_below_minus_100_db() {
        let cfg = ScenarioConfig::desk_scale();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let sample = channel_sequence(&cfg, &mut rng).unwrap();
        let books = Codebooks::new(&cfg, &BitAllocation::uniform(40));
        let fed_back = dequantize_csi(&quantize_csi(&oracle_estimator(&sample.target_csi), &books), &books);
        let rebuilt = assemble_channel(&cfg, &fed_back).unwrap();
        let err = nmse(&sample.target, &rebuilt).unwrap();
        assert!(
            to_db(err) < -100.0,
            "oracle pipeline NMSE {} dB",
            to_db(err)
        );
    }

    #[test]
    fn persistence_is_exact_for_a_static_ue() {
        let mut cfg = ScenarioConfig::desk_scale();
        cfg.ue_speed_mps = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sample = channel_sequence(&cfg, &mut rng).unwrap();
        let guess = persistence_baseline(&sample.history).unwrap();
        assert_eq!(nmse(&sample.target, &guess).unwrap(), 0.0);
    }

    #[test]
    fn persistence_error_grows_with_ue_speed() {
        let mut mean_errors = Vec::new();
        for kmh in [3.0, 60.0, 108.0] {
            let mut cfg = ScenarioConfig::desk_scale();
            cfg.ue_speed_mps = kmh_to_mps(kmh);
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let mut total = 0.0;
            let scenarios = 50;
            for _ in 0..scenarios {
                let sample = channel_sequence(&cfg, &mut rng).unwrap();
                let guess = persistence_baseline(&sample.history).unwrap();
                total += nmse(&sample.target, &guess).unwrap();
            }
            mean_errors.push(total / scenarios as f64);
        }
        assert!(
            mean_errors[0] < mean_errors[1] && mean_errors[1] < mean_errors[2],
            "persistence NMSE means not increasing: {mean_errors:?}"
        );
    }

    #[test]
    fn empty_window_is_rejected() {
        assert!(persistence_baseline(&[]).is_err());
    }
}
