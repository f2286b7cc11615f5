//! Layered settings: built-in defaults, then a TOML file, then flags.
//!
//! The file mirrors the config structs section by section and key by key:
//!
//! ```toml
//! [scenario]
//! n_tx = 16
//! rng_seed = 7
//!
//! [train]
//! epochs = 200
//! feedback_bits = { q_theta = 7, q_tau = 16, q_beta = 4, q_phi = 5 }
//!
//! [link]
//! snr_db_grid = [0.0, 10.0, 20.0]
//! ```
//!
//! Every key is optional; command-line flags override file values.

use std::fs;
use std::path::Path;

use anyhow::Context;
use clap::Args;
use parafeed_core::estimator::TrainConfig;
use parafeed_core::link::{LinkSimConfig, Modulation};
use parafeed_core::{BitAllocation, ScenarioConfig};
use serde::Deserialize;

macro_rules! patch {
    ($patch:ident => $target:ident: $($field:ident),+ $(,)?) => {
        $(if let Some(v) = $patch.$field {
            $target.$field = v;
        })+
    };
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub scenario: ScenarioPatch,
    pub train: TrainPatch,
    pub link: LinkPatch,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn scenario(&self, flags: &ScenarioPatch) -> anyhow::Result<ScenarioConfig> {
        let mut cfg = ScenarioConfig::desk_scale();
        self.scenario.apply(&mut cfg);
        flags.apply(&mut cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn train(&self, flags: &TrainPatch) -> anyhow::Result<TrainConfig> {
        let mut tc = TrainConfig::default();
        self.train.apply(&mut tc);
        flags.apply(&mut tc);
        tc.validate()?;
        Ok(tc)
    }

    pub fn link(&self, flags: &LinkPatch) -> anyhow::Result<LinkSimConfig> {
        let mut lc = LinkSimConfig::default();
        self.link.apply(&mut lc);
        flags.apply(&mut lc);
        lc.validate()?;
        Ok(lc)
    }
}

/// Scenario overrides; unset fields keep the file or built-in value.
#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioPatch {
    /// Transmit antennas at the base station.
    #[arg(long)]
    pub n_tx: Option<usize>,
    /// OFDM subcarriers.
    #[arg(long)]
    pub n_subcarriers: Option<usize>,
    /// Carrier frequency in Hz.
    #[arg(long)]
    pub carrier_freq_hz: Option<f64>,
    /// Total bandwidth in Hz.
    #[arg(long)]
    pub bandwidth_hz: Option<f64>,
    /// Antenna element spacing in metres.
    #[arg(long)]
    pub antenna_spacing_m: Option<f64>,
    /// Largest representable path delay in seconds.
    #[arg(long)]
    pub tau_max_s: Option<f64>,
    /// Largest representable path loss magnitude.
    #[arg(long)]
    pub beta_max: Option<f64>,
    /// Propagation paths.
    #[arg(long)]
    pub n_paths: Option<usize>,
    /// UE speed in m/s.
    #[arg(long)]
    pub ue_speed_mps: Option<f64>,
    /// Slot period in seconds.
    #[arg(long)]
    pub slot_period_s: Option<f64>,
    /// History window length in slots.
    #[arg(long)]
    pub window_len: Option<usize>,
    /// Smallest initial UE distance in metres.
    #[arg(long)]
    pub ue_distance_min_m: Option<f64>,
    /// Largest initial UE distance in metres.
    #[arg(long)]
    pub ue_distance_max_m: Option<f64>,
    /// Seed for every random draw made under this scenario.
    #[arg(long)]
    pub rng_seed: Option<u64>,
}

impl ScenarioPatch {
    fn apply(&self, cfg: &mut ScenarioConfig) {
        patch!(self => cfg:
            n_tx, n_subcarriers, carrier_freq_hz, bandwidth_hz, antenna_spacing_m,
            tau_max_s, beta_max, n_paths, ue_speed_mps, slot_period_s, window_len,
            ue_distance_min_m, ue_distance_max_m, rng_seed,
        );
    }
}

/// Training overrides.
#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainPatch {
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Initial SGD learning rate.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Epochs between learning-rate decays.
    #[arg(long)]
    pub decay_period: Option<usize>,
    /// Multiplier applied to the learning rate every decay period.
    #[arg(long)]
    pub decay_coeff: Option<f64>,
    /// Seed for weight init and training randomness.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Uniform feedback bits per parameter family.
    #[serde(skip)]
    #[arg(long)]
    pub feedback_bits: Option<u32>,
    /// Full four-way split; file-only, as `feedback_bits = { q_theta = .. }`.
    #[arg(skip)]
    #[serde(rename = "feedback_bits")]
    pub feedback_split: Option<BitAllocation>,
}

impl TrainPatch {
    fn apply(&self, tc: &mut TrainConfig) {
        patch!(self => tc: batch_size, learning_rate, epochs, decay_period, decay_coeff, seed);
        if let Some(split) = self.feedback_split {
            tc.feedback_bits = split;
        }
        if let Some(bits) = self.feedback_bits {
            tc.feedback_bits = BitAllocation::uniform(bits);
        }
    }
}

/// Link simulation overrides.
#[derive(Debug, Default, Clone, Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkPatch {
    /// File-only; QPSK is the sole implemented scheme.
    #[arg(skip)]
    pub modulation: Option<Modulation>,
    /// QPSK symbols per subcarrier per SNR point.
    #[arg(long)]
    pub symbols_per_subcarrier: Option<usize>,
    /// SNR grid in dB, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub snr_db_grid: Option<Vec<f64>>,
}

impl LinkPatch {
    fn apply(&self, lc: &mut LinkSimConfig) {
        patch!(self => lc: modulation, symbols_per_subcarrier);
        if let Some(grid) = &self.snr_db_grid {
            lc.snr_db_grid = grid.clone();
        }
    }
}
