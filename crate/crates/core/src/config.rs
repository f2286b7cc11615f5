use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::SPEED_OF_LIGHT;

/// Physical and simulation parameters of one downlink scenario.
///
/// The base station carries a uniform linear array with `n_tx` antennas and
/// transmits OFDM over `n_subcarriers` subcarriers centred on
/// `carrier_freq_hz`. The UE observes `window_len` consecutive slots of
/// history before each feedback instant. All fields are SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Transmit antennas at the base station (N_t).
    pub n_tx: usize,
    /// OFDM subcarriers (N_f).
    pub n_subcarriers: usize,
    /// Carrier frequency f_c in Hz.
    pub carrier_freq_hz: f64,
    /// Total bandwidth B in Hz.
    pub bandwidth_hz: f64,
    /// Antenna element spacing d in metres. Half a wavelength unless a
    /// scenario overrides it.
    pub antenna_spacing_m: f64,
    /// Largest representable path delay in seconds.
    pub tau_max_s: f64,
    /// Largest representable path loss magnitude.
    pub beta_max: f64,
    /// Propagation paths L (one line-of-sight plus L-1 scattered).
    pub n_paths: usize,
    /// UE speed in m/s.
    pub ue_speed_mps: f64,
    /// Slot period Δt between channel observations, seconds.
    pub slot_period_s: f64,
    /// History window length w (slots fed to the estimator).
    pub window_len: usize,
    /// UE start distance is drawn uniformly from this range, metres.
    pub ue_distance_min_m: f64,
    pub ue_distance_max_m: f64,
    /// Seed for every random draw made under this scenario.
    pub rng_seed: u64,
}

impl ScenarioConfig {
    /// Carrier wavelength λ = c / f_c in metres.
    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_freq_hz
    }

    /// Small configuration used throughout the test suite: 16 antennas,
    /// 32 subcarriers, 3 paths at 28 GHz with 100 MHz bandwidth.
    pub fn desk_scale() -> Self {
        let carrier_freq_hz = 28e9;
        let wavelength = SPEED_OF_LIGHT / carrier_freq_hz;
        Self {
            n_tx: 16,
            n_subcarriers: 32,
            carrier_freq_hz,
            bandwidth_hz: 100e6,
            antenna_spacing_m: wavelength / 2.0,
            tau_max_s: 100e-9,
            beta_max: 1.0,
            n_paths: 3,
            ue_speed_mps: kmh_to_mps(3.0),
            slot_period_s: 10e-3,
            window_len: 8,
            ue_distance_min_m: 10.0,
            ue_distance_max_m: 500.0,
            rng_seed: 0,
        }
    }

    /// Full-size configuration: 64 antennas, 1024 subcarriers, up to ten
    /// paths, 20-slot history. Expensive; intended for offline runs.
    pub fn full_scale() -> Self {
        let carrier_freq_hz = 28e9;
        let wavelength = SPEED_OF_LIGHT / carrier_freq_hz;
        Self {
            n_tx: 64,
            n_subcarriers: 1024,
            carrier_freq_hz,
            bandwidth_hz: 100e6,
            antenna_spacing_m: wavelength / 2.0,
            tau_max_s: 100e-9,
            beta_max: 1.0,
            n_paths: 10,
            ue_speed_mps: kmh_to_mps(3.0),
            slot_period_s: 10e-3,
            window_len: 20,
            ue_distance_min_m: 10.0,
            ue_distance_max_m: 500.0,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_tx == 0 || self.n_subcarriers == 0 || self.n_paths == 0 {
            return fail("n_tx, n_subcarriers and n_paths must be positive".into());
        }
        if self.window_len == 0 {
            return fail("window_len must be at least 1".into());
        }
        if !(self.carrier_freq_hz > 0.0) || !(self.bandwidth_hz > 0.0) {
            return fail("carrier frequency and bandwidth must be positive".into());
        }
        if self.bandwidth_hz >= 2.0 * self.carrier_freq_hz {
            return fail(format!(
                "bandwidth {} Hz leaves non-positive subcarrier frequencies at carrier {} Hz",
                self.bandwidth_hz, self.carrier_freq_hz
            ));
        }
        if !(self.antenna_spacing_m > 0.0) {
            return fail("antenna spacing must be positive".into());
        }
        if !(self.tau_max_s > 0.0) || !(self.beta_max > 0.0) {
            return fail("tau_max_s and beta_max must be positive".into());
        }
        if self.ue_speed_mps < 0.0 || !(self.slot_period_s > 0.0) {
            return fail("speed must be non-negative and slot period positive".into());
        }
        if !(self.ue_distance_min_m > 0.0) || self.ue_distance_max_m < self.ue_distance_min_m {
            return fail("UE distance range must satisfy 0 < min <= max".into());
        }
        Ok(())
    }
}

/// Convert a speed given in km/h to m/s.
pub fn kmh_to_mps(kmh: f64) -> f64 {
    kmh / 3.6
}
