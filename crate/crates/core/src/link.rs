//! QPSK link-level simulation with beamforming from estimated CSI.
//!
//! Per subcarrier the transmitter beamforms with the normalized channel
//! estimate, `r = ĥ[s]/‖ĥ[s]‖`, so the scalar end-to-end channel is
//! `g = h[s]^H r` and the received symbol is `y = g·x + n` with
//! `n ~ CN(0, σ_n²)`. SNR is defined as transmit symbol energy over σ_n²
//! before beamforming gain; with unit-energy QPSK, `σ_n² = 10^{-SNR/10}`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};

/// Modulation scheme of the link simulation. Gray-mapped QPSK is the only
/// one implemented; the field exists so config files state it explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modulation {
    #[default]
    Qpsk,
}

/// Parameters of a BER sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkSimConfig {
    pub modulation: Modulation,
    /// QPSK symbols transmitted per subcarrier per SNR point.
    pub symbols_per_subcarrier: usize,
    /// SNR grid in dB.
    pub snr_db_grid: Vec<f64>,
}

impl Default for LinkSimConfig {
    fn default() -> Self {
        Self {
            modulation: Modulation::Qpsk,
            symbols_per_subcarrier: 1_000,
            snr_db_grid: vec![0.0, 5.0, 10.0, 15.0, 20.0],
        }
    }
}

impl LinkSimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.snr_db_grid.is_empty() {
            return Err(Error::InvalidConfig("empty SNR grid".into()));
        }
        if self.symbols_per_subcarrier == 0 {
            return Err(Error::InvalidConfig(
                "symbols_per_subcarrier must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Simulate hard-decision QPSK over the true channel, beamformed with the
/// estimate. Returns one bit error rate per SNR grid point.
pub fn simulate_ber<R: Rng>(
    truth: &ChannelMatrix,
    estimate: &ChannelMatrix,
    lc: &LinkSimConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    lc.validate()?;
    if truth.entries.dim() != estimate.entries.dim() {
        return Err(Error::DimensionMismatch(format!(
            "truth is {:?}, estimate is {:?}",
            truth.entries.dim(),
            estimate.entries.dim()
        )));
    }
    let n_subcarriers = truth.n_subcarriers();
    // Effective scalar channel per subcarrier: g = h^H r with r = ĥ/‖ĥ‖.
    // Rows store conjugated vectors, so g = Σ_n row_t[n]·conj(row_e[n])/‖ĥ‖.
    let gains: Vec<Complex64> = (0..n_subcarriers)
        .map(|s| {
            let t_row = truth.entries.row(s);
            let e_row = estimate.entries.row(s);
            let e_norm = e_row.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if e_norm == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            let inner: Complex64 = t_row.iter().zip(e_row).map(|(t, e)| t * e.conj()).sum();
            inner / e_norm
        })
        .collect();

    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let mut bers = Vec::with_capacity(lc.snr_db_grid.len());
    for &snr_db in &lc.snr_db_grid {
        let noise_scale = (10f64.powf(-snr_db / 10.0) / 2.0).sqrt();
        let mut bit_errors = 0u64;
        for &g in &gains {
            let usable_gain = g.norm() > 1e-12;
            for _ in 0..lc.symbols_per_subcarrier {
                let bits = (rng.gen::<bool>(), rng.gen::<bool>());
                let x = Complex64::new(
                    if bits.0 { inv_sqrt2 } else { -inv_sqrt2 },
                    if bits.1 { inv_sqrt2 } else { -inv_sqrt2 },
                );
                let noise = Complex64::new(
                    noise_scale * rng.sample::<f64, _>(StandardNormal),
                    noise_scale * rng.sample::<f64, _>(StandardNormal),
                );
                let y = g * x + noise;
                // Matched-filter phase alignment; an unusable gain leaves
                // the raw observation, which decides from noise alone.
                let decision = if usable_gain { y / g } else { y };
                bit_errors += u64::from((decision.re > 0.0) != bits.0);
                bit_errors += u64::from((decision.im > 0.0) != bits.1);
            }
        }
        let total_bits = 2 * n_subcarriers as u64 * lc.symbols_per_subcarrier as u64;
        bers.push(bit_errors as f64 / total_bits as f64);
    }
    Ok(bers)
}
