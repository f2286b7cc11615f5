//! Geometric multipath channel synthesis and UE mobility.
//!
//! The downlink channel between an N_t-antenna uniform linear array and a
//! single-antenna UE is a sum of L planar paths. Per subcarrier s,
//!
//! ```text
//! h[s] = Σ_l  β_l · e^{jφ_l} · e^{-j2π f_s τ_l} · a_t(θ_l)
//! ```
//!
//! with path loss β_l, phase φ_l, delay τ_l and angle of departure θ_l.
//! The channel matrix stacks the Hermitian-transposed per-subcarrier
//! vectors, `H = [h[1] … h[N_f]]^H`, so row s of `H` is `h[s]^H` and the
//! whole matrix factors as `A_f(τ) · diag(β) · diag(e^{-jφ}) · A_t^H(θ)`.
//!
//! Mobility follows a transverse-motion model: each slot the UE advances
//! `v·Δt` along its heading, which is kept perpendicular to the
//! BS-to-UE ray, so the angle and delay increments have the closed forms
//! `Δθ = arctan(v·Δt / r)` and `Δτ = (√(r² + (v·Δt)²) - r) / c`.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::SPEED_OF_LIGHT;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// One propagation path: angle of departure, delay, path loss, phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    /// Angle of departure θ in radians, kept in [0, 2π).
    pub aod_rad: f64,
    /// Path delay τ in seconds, kept in [0, τ_max].
    pub delay_s: f64,
    /// Path loss magnitude β, kept in [0, β_max].
    pub path_loss: f64,
    /// Path phase φ in radians, kept in [0, 2π).
    pub phase_rad: f64,
}

/// The L-path parametric channel state information fed back by the UE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametricCsi {
    pub paths: Vec<PathParams>,
}

impl ParametricCsi {
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    /// Check every parameter against the ranges declared by `cfg`.
    pub fn validate(&self, cfg: &ScenarioConfig) -> Result<()> {
        if self.paths.len() != cfg.n_paths {
            return Err(Error::DimensionMismatch(format!(
                "csi has {} paths, scenario expects {}",
                self.paths.len(),
                cfg.n_paths
            )));
        }
        for (l, p) in self.paths.iter().enumerate() {
            let ok = (0.0..TWO_PI).contains(&p.aod_rad)
                && (0.0..=cfg.tau_max_s).contains(&p.delay_s)
                && (0.0..=cfg.beta_max).contains(&p.path_loss)
                && (0.0..TWO_PI).contains(&p.phase_rad);
            if !ok {
                return Err(Error::InvalidConfig(format!(
                    "path {l} parameters out of range: {p:?}"
                )));
            }
        }
        Ok(())
    }
}

/// Frequency-by-antenna channel matrix, N_f x N_t. Row s holds `h[s]^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    pub entries: Array2<Complex64>,
}

impl ChannelMatrix {
    pub fn zeros(n_subcarriers: usize, n_tx: usize) -> Self {
        Self {
            entries: Array2::zeros((n_subcarriers, n_tx)),
        }
    }

    pub fn n_subcarriers(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.entries.ncols()
    }

    /// Squared Frobenius norm ‖H‖_F².
    pub fn frob_sq(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Frequency of subcarrier `s` (1-based): `f_c - B/2 + (B/N_f)(s-1)`.
pub fn subcarrier_frequency(cfg: &ScenarioConfig, s: usize) -> Result<f64> {
    if s == 0 || s > cfg.n_subcarriers {
        return Err(Error::SubcarrierOutOfRange {
            index: s,
            count: cfg.n_subcarriers,
        });
    }
    Ok(subcarrier_frequency_unchecked(cfg, s))
}

#[inline]
fn subcarrier_frequency_unchecked(cfg: &ScenarioConfig, s: usize) -> f64 {
    cfg.carrier_freq_hz - cfg.bandwidth_hz / 2.0
        + cfg.bandwidth_hz / cfg.n_subcarriers as f64 * (s - 1) as f64
}

/// All N_f subcarrier frequencies in order.
pub fn subcarrier_frequencies(cfg: &ScenarioConfig) -> Vec<f64> {
    (1..=cfg.n_subcarriers)
        .map(|s| subcarrier_frequency_unchecked(cfg, s))
        .collect()
}

/// Transmit array steering vector: element n is `e^{-j n 2π d sin(θ) / λ}`.
pub fn steering_vector(cfg: &ScenarioConfig, aod_rad: f64) -> Vec<Complex64> {
    let phase_step = -TWO_PI * cfg.antenna_spacing_m * aod_rad.sin() / cfg.wavelength_m();
    (0..cfg.n_tx)
        .map(|n| Complex64::from_polar(1.0, n as f64 * phase_step))
        .collect()
}

/// Per-subcarrier delay rotation: element s (1-based) is `e^{j 2π τ f_s}`.
pub fn delay_phase_vector(cfg: &ScenarioConfig, delay_s: f64) -> Vec<Complex64> {
    (1..=cfg.n_subcarriers)
        .map(|s| Complex64::from_polar(1.0, TWO_PI * delay_s * subcarrier_frequency_unchecked(cfg, s)))
        .collect()
}

/// Build the channel matrix `A_f(τ) · diag(β) · diag(e^{-jφ}) · A_t^H(θ)`.
pub fn assemble_channel(cfg: &ScenarioConfig, csi: &ParametricCsi) -> Result<ChannelMatrix> {
    if csi.paths.len() != cfg.n_paths {
        return Err(Error::DimensionMismatch(format!(
            "csi has {} paths, scenario expects {}",
            csi.paths.len(),
            cfg.n_paths
        )));
    }
    let mut h = ChannelMatrix::zeros(cfg.n_subcarriers, cfg.n_tx);
    for p in &csi.paths {
        let a_t = steering_vector(cfg, p.aod_rad);
        let a_f = delay_phase_vector(cfg, p.delay_s);
        let coef = Complex64::from_polar(p.path_loss, -p.phase_rad);
        for (s, af) in a_f.iter().enumerate() {
            let row_coef = coef * af;
            let mut row = h.entries.row_mut(s);
            for (n, at) in a_t.iter().enumerate() {
                row[n] += row_coef * at.conj();
            }
        }
    }
    Ok(h)
}

/// Draw one CSI realisation: θ, φ uniform on [0, 2π), τ uniform on
/// [0, τ_max], β uniform on [0, β_max]. Draw order per path is θ, τ, β, φ.
pub fn sample_parametric_csi<R: Rng>(cfg: &ScenarioConfig, rng: &mut R) -> ParametricCsi {
    let paths = (0..cfg.n_paths)
        .map(|_| PathParams {
            aod_rad: rng.gen::<f64>() * TWO_PI,
            delay_s: rng.gen::<f64>() * cfg.tau_max_s,
            path_loss: rng.gen::<f64>() * cfg.beta_max,
            phase_rad: rng.gen::<f64>() * TWO_PI,
        })
        .collect();
    ParametricCsi { paths }
}

/// UE kinematic state in the BS-centred plane.
///
/// The heading is kept perpendicular to the BS-to-UE ray (transverse
/// motion), which is the regime in which the `Δθ`/`Δτ` closed forms of
/// [`evolve_ue`] are exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UeState {
    /// Distance r from the base station, metres.
    pub distance_m: f64,
    /// Direction of motion, radians.
    pub heading_rad: f64,
    /// Position (x, y) in metres, BS at the origin.
    pub position_m: [f64; 2],
}

impl UeState {
    /// Place the UE at `distance_m` along azimuth `azimuth_rad`, heading
    /// transverse (azimuth + π/2).
    pub fn new(distance_m: f64, azimuth_rad: f64) -> Self {
        Self {
            distance_m,
            heading_rad: wrap_2pi(azimuth_rad + std::f64::consts::FRAC_PI_2),
            position_m: [
                distance_m * azimuth_rad.cos(),
                distance_m * azimuth_rad.sin(),
            ],
        }
    }

    /// Azimuth of the UE as seen from the BS.
    pub fn azimuth_rad(&self) -> f64 {
        wrap_2pi(self.heading_rad - std::f64::consts::FRAC_PI_2)
    }
}

/// Result of advancing the UE by one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeEvolution {
    pub state: UeState,
    /// Angle-of-departure increment `Δθ = arctan(v·Δt / r)`, radians.
    pub delta_aod_rad: f64,
    /// Delay increment `Δτ = (√(r² + (v·Δt)²) - r) / c`, seconds.
    pub delta_delay_s: f64,
}

/// Advance the UE by `dt_s` seconds at `speed_mps` along its heading.
pub fn evolve_ue(state: &UeState, speed_mps: f64, dt_s: f64) -> UeEvolution {
    let r = state.distance_m;
    let step = speed_mps * dt_s;
    let delta_aod_rad = (step / r).atan();
    let new_r = r.hypot(step);
    let delta_delay_s = (new_r - r) / SPEED_OF_LIGHT;
    let azimuth = state.azimuth_rad() + delta_aod_rad;
    UeEvolution {
        state: UeState::new(new_r, azimuth),
        delta_aod_rad,
        delta_delay_s,
    }
}

/// One training/evaluation sample: `w` history slots plus the target slot.
#[derive(Debug, Clone)]
pub struct SequenceSample {
    /// Channel matrices for slots 1..=w.
    pub history: Vec<ChannelMatrix>,
    /// Channel matrix for slot w+1, the one the estimator must predict.
    pub target: ChannelMatrix,
    /// Ground-truth parameters of the target slot.
    pub target_csi: ParametricCsi,
    /// Per-slot parameters for all w+1 slots (history then target).
    pub slot_csi: Vec<ParametricCsi>,
    /// UE state per slot, same length as `slot_csi`.
    pub ue_track: Vec<UeState>,
}

/// Generate one mobility sequence of `w+1` correlated channel slots.
///
/// The initial CSI is drawn by [`sample_parametric_csi`]; the UE starts at
/// a uniform distance in the configured range and a uniform azimuth. Per
/// slot, every path receives the same delay increment and carrier phase
/// rotation `φ ← φ - 2π f_c Δτ (mod 2π)`, path losses rescale by the
/// inverse distance ratio, and angles drift by ±Δθ: the line-of-sight path
/// (index 0) follows the exact geometry while each scattered path keeps an
/// independent random drift sign fixed at scenario creation.
pub fn channel_sequence<R: Rng>(cfg: &ScenarioConfig, rng: &mut R) -> Result<SequenceSample> {
    cfg.validate()?;
    let mut csi = sample_parametric_csi(cfg, rng);
    let distance = cfg.ue_distance_min_m
        + rng.gen::<f64>() * (cfg.ue_distance_max_m - cfg.ue_distance_min_m);
    let azimuth = rng.gen::<f64>() * TWO_PI;
    let mut ue = UeState::new(distance, azimuth);
    let drift_signs: Vec<f64> = (0..cfg.n_paths)
        .map(|l| {
            if l == 0 || rng.gen::<f64>() < 0.5 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();

    let mut slot_csi = Vec::with_capacity(cfg.window_len + 1);
    let mut ue_track = Vec::with_capacity(cfg.window_len + 1);
    let mut channels = Vec::with_capacity(cfg.window_len + 1);
    for slot in 0..=cfg.window_len {
        if slot > 0 {
            let ev = evolve_ue(&ue, cfg.ue_speed_mps, cfg.slot_period_s);
            let distance_ratio = ue.distance_m / ev.state.distance_m;
            for (l, p) in csi.paths.iter_mut().enumerate() {
                p.aod_rad = wrap_2pi(p.aod_rad + drift_signs[l] * ev.delta_aod_rad);
                p.delay_s = (p.delay_s + ev.delta_delay_s).clamp(0.0, cfg.tau_max_s);
                p.phase_rad =
                    wrap_2pi(p.phase_rad - TWO_PI * cfg.carrier_freq_hz * ev.delta_delay_s);
                p.path_loss = (p.path_loss * distance_ratio).clamp(0.0, cfg.beta_max);
            }
            ue = ev.state;
        }
        slot_csi.push(csi.clone());
        ue_track.push(ue);
        channels.push(assemble_channel(cfg, &csi)?);
    }

    let target = channels.pop().expect("w+1 slots were generated");
    let target_csi = slot_csi.last().expect("w+1 slots were generated").clone();
    Ok(SequenceSample {
        history: channels,
        target,
        target_csi,
        slot_csi,
        ue_track,
    })
}

/// Reduce an angle to [0, 2π).
pub fn wrap_2pi(x: f64) -> f64 {
    let y = x.rem_euclid(TWO_PI);
    // rem_euclid can return the modulus itself when x is a tiny negative.
    if y >= TWO_PI {
        0.0
    } else {
        y
    }
}

/// Σ_s f_s over all subcarriers.
pub fn sum_subcarrier_freq(cfg: &ScenarioConfig) -> f64 {
    subcarrier_frequencies(cfg).iter().sum()
}

/// Σ_s f_s² over all subcarriers.
pub fn sum_subcarrier_freq_sq(cfg: &ScenarioConfig) -> f64 {
    subcarrier_frequencies(cfg).iter().map(|f| f * f).sum()
}
