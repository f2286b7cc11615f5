//! First-order sensitivity of the channel to parameter quantization.
//!
//! For each subcarrier the channel vector h[s] is differentiable in every
//! path parameter, and small quantization errors propagate linearly:
//!
//! ```text
//! Δh[s] ≈ (∇_θ h[s])Δθ + (∇_τ h[s])Δτ + (∇_β h[s])Δβ + (∇_φ h[s])Δφ
//! ```
//!
//! with column l of the four N_t×L Jacobians given by
//!
//! ```text
//! ∂h[s]/∂θ_l = -j(2πd cosθ_l/λ) (n ⊙ a_t(θ_l)) β_l e^{j(φ_l - 2πf_s τ_l)}
//! ∂h[s]/∂τ_l = -j 2πf_s a_t(θ_l) β_l e^{j(φ_l - 2πf_s τ_l)}
//! ∂h[s]/∂β_l =  a_t(θ_l) e^{j(φ_l - 2πf_s τ_l)}
//! ∂h[s]/∂φ_l =  j a_t(θ_l) β_l e^{j(φ_l - 2πf_s τ_l)}
//! ```
//!
//! where n = [0, …, N_t-1]. [`monte_carlo_distortion`] turns this into an
//! empirical counterpart of the closed-form distortion terms by sampling
//! channels and uniform half-cell quantization errors.

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;

use crate::channel::{
    assemble_channel, sample_parametric_csi, steering_vector, subcarrier_frequencies,
    subcarrier_frequency, ParametricCsi,
};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::quantizer::{BitAllocation, Codebooks};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const J: Complex64 = Complex64::new(0.0, 1.0);

/// The four Jacobians of h[s] at one subcarrier, N_t×L each, columns in
/// path order.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianSet {
    /// 1-based subcarrier index the set was evaluated at.
    pub subcarrier: usize,
    pub d_theta: Array2<Complex64>,
    pub d_tau: Array2<Complex64>,
    pub d_beta: Array2<Complex64>,
    pub d_phi: Array2<Complex64>,
}

/// Per-path parameter perturbations, one entry per path and family.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamDeltas {
    pub aod_rad: Vec<f64>,
    pub delay_s: Vec<f64>,
    pub path_loss: Vec<f64>,
    pub phase_rad: Vec<f64>,
}

impl ParamDeltas {
    pub fn zeros(n_paths: usize) -> Self {
        Self {
            aod_rad: vec![0.0; n_paths],
            delay_s: vec![0.0; n_paths],
            path_loss: vec![0.0; n_paths],
            phase_rad: vec![0.0; n_paths],
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            aod_rad: self.aod_rad.iter().map(|x| x * factor).collect(),
            delay_s: self.delay_s.iter().map(|x| x * factor).collect(),
            path_loss: self.path_loss.iter().map(|x| x * factor).collect(),
            phase_rad: self.phase_rad.iter().map(|x| x * factor).collect(),
        }
    }

    /// Shift every path parameter by its delta. No wrapping or clamping is
    /// applied; the channel synthesis is periodic in the angles and callers
    /// use this for small perturbations only.
    pub fn apply(&self, csi: &ParametricCsi) -> ParametricCsi {
        ParametricCsi {
            paths: csi
                .paths
                .iter()
                .enumerate()
                .map(|(l, p)| crate::channel::PathParams {
                    aod_rad: p.aod_rad + self.aod_rad[l],
                    delay_s: p.delay_s + self.delay_s[l],
                    path_loss: p.path_loss + self.path_loss[l],
                    phase_rad: p.phase_rad + self.phase_rad[l],
                })
                .collect(),
        }
    }
}

/// Evaluate all four Jacobians of h[s] at subcarrier `s` (1-based).
pub fn analytic_jacobians(
    cfg: &ScenarioConfig,
    csi: &ParametricCsi,
    s: usize,
) -> Result<JacobianSet> {
    let f_s = subcarrier_frequency(cfg, s)?;
    let n_paths = csi.paths.len();
    let mut d_theta = Array2::zeros((cfg.n_tx, n_paths));
    let mut d_tau = Array2::zeros((cfg.n_tx, n_paths));
    let mut d_beta = Array2::zeros((cfg.n_tx, n_paths));
    let mut d_phi = Array2::zeros((cfg.n_tx, n_paths));
    for (l, p) in csi.paths.iter().enumerate() {
        let a_t = steering_vector(cfg, p.aod_rad);
        let phase = Complex64::from_polar(1.0, p.phase_rad - TWO_PI * f_s * p.delay_s);
        let rot = p.path_loss * phase;
        let theta_coef =
            -J * (TWO_PI * cfg.antenna_spacing_m * p.aod_rad.cos() / cfg.wavelength_m()) * rot;
        let tau_coef = -J * TWO_PI * f_s * rot;
        let phi_coef = J * rot;
        for (n, a) in a_t.iter().enumerate() {
            d_theta[[n, l]] = theta_coef * n as f64 * a;
            d_tau[[n, l]] = tau_coef * a;
            d_beta[[n, l]] = phase * a;
            d_phi[[n, l]] = phi_coef * a;
        }
    }
    Ok(JacobianSet {
        subcarrier: s,
        d_theta,
        d_tau,
        d_beta,
        d_phi,
    })
}

/// First-order prediction of the change in h[s] under `deltas`.
pub fn first_order_delta_h(
    cfg: &ScenarioConfig,
    csi: &ParametricCsi,
    deltas: &ParamDeltas,
    s: usize,
) -> Result<Vec<Complex64>> {
    let jac = analytic_jacobians(cfg, csi, s)?;
    let mut out = vec![Complex64::new(0.0, 0.0); cfg.n_tx];
    for l in 0..csi.paths.len() {
        for (n, o) in out.iter_mut().enumerate() {
            *o += jac.d_theta[[n, l]] * deltas.aod_rad[l]
                + jac.d_tau[[n, l]] * deltas.delay_s[l]
                + jac.d_beta[[n, l]] * deltas.path_loss[l]
                + jac.d_phi[[n, l]] * deltas.phase_rad[l];
        }
    }
    Ok(out)
}

/// How [`monte_carlo_distortion`] evaluates each sample's error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistortionMode {
    /// First-order model: per-family squared norms of Jacobian-delta
    /// products, summed over subcarriers.
    Linearized,
    /// Actual quantization: rebuild the channel from codebook values and
    /// measure the true squared-Frobenius error.
    Exact,
}

/// Mean and standard error of one empirical distortion term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalTerm {
    pub mean: f64,
    pub std_error: f64,
}

/// Per-family empirical distortion plus the jointly-perturbed total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalDistortion {
    pub c_theta: EmpiricalTerm,
    pub c_tau: EmpiricalTerm,
    pub c_beta: EmpiricalTerm,
    pub c_phi: EmpiricalTerm,
    /// All four families perturbed (or quantized) at once.
    pub total: EmpiricalTerm,
    pub n_samples: usize,
}

/// Half-cell widths of the four codebooks: quantization errors are uniform
/// on ±half_step (angles wrap, so their half cell is π/2^Q).
pub fn quantization_half_steps(cfg: &ScenarioConfig, alloc: &BitAllocation) -> [f64; 4] {
    [
        std::f64::consts::PI * f64::exp2(-(alloc.q_theta as f64)),
        cfg.tau_max_s / 2.0 * f64::exp2(-(alloc.q_tau as f64)),
        cfg.beta_max / 2.0 * f64::exp2(-(alloc.q_beta as f64)),
        std::f64::consts::PI * f64::exp2(-(alloc.q_phi as f64)),
    ]
}

/// Estimate the four distortion terms by Monte Carlo over random channels
/// and uniform half-cell quantization errors.
///
/// Per sample the draw order is fixed (CSI first, then 4L unit deltas), so
/// two calls with identically seeded RNGs share randomness across different
/// bit allocations; in linearized mode that makes per-term ratios across
/// allocations exact rather than noisy.
pub fn monte_carlo_distortion<R: Rng>(
    cfg: &ScenarioConfig,
    alloc: &BitAllocation,
    n_samples: usize,
    rng: &mut R,
    mode: DistortionMode,
) -> Result<EmpiricalDistortion> {
    if n_samples == 0 {
        return Err(Error::InvalidConfig(
            "monte carlo distortion needs at least one sample".into(),
        ));
    }
    cfg.validate()?;
    let half = quantization_half_steps(cfg, alloc);
    let books = Codebooks::new(cfg, alloc);
    let freqs = subcarrier_frequencies(cfg);
    let mut acc = [Accumulator::default(); 5];
    let mut scratch = LinearizedScratch::new(cfg.n_tx);

    for _ in 0..n_samples {
        let csi = sample_parametric_csi(cfg, rng);
        let mut deltas = ParamDeltas::zeros(cfg.n_paths);
        for l in 0..cfg.n_paths {
            deltas.aod_rad[l] = (rng.gen::<f64>() * 2.0 - 1.0) * half[0];
            deltas.delay_s[l] = (rng.gen::<f64>() * 2.0 - 1.0) * half[1];
            deltas.path_loss[l] = (rng.gen::<f64>() * 2.0 - 1.0) * half[2];
            deltas.phase_rad[l] = (rng.gen::<f64>() * 2.0 - 1.0) * half[3];
        }
        let values = match mode {
            DistortionMode::Linearized => linearized_sample(cfg, &csi, &deltas, &freqs, &mut scratch),
            DistortionMode::Exact => exact_sample(cfg, &csi, &books)?,
        };
        for (a, v) in acc.iter_mut().zip(values) {
            a.push(v);
        }
    }
    Ok(EmpiricalDistortion {
        c_theta: acc[0].term(),
        c_tau: acc[1].term(),
        c_beta: acc[2].term(),
        c_phi: acc[3].term(),
        total: acc[4].term(),
        n_samples,
    })
}

#[derive(Default, Clone, Copy)]
struct Accumulator {
    sum: f64,
    sum_sq: f64,
    n: usize,
}

impl Accumulator {
    fn push(&mut self, x: f64) {
        self.sum += x;
        self.sum_sq += x * x;
        self.n += 1;
    }

    fn term(&self) -> EmpiricalTerm {
        let n = self.n as f64;
        let mean = self.sum / n;
        let var = ((self.sum_sq - n * mean * mean) / (n - 1.0).max(1.0)).max(0.0);
        EmpiricalTerm {
            mean,
            std_error: (var / n).sqrt(),
        }
    }
}

struct LinearizedScratch {
    family: [Vec<Complex64>; 4],
    joint: Vec<Complex64>,
}

impl LinearizedScratch {
    fn new(n_tx: usize) -> Self {
        let zero = vec![Complex64::new(0.0, 0.0); n_tx];
        Self {
            family: [zero.clone(), zero.clone(), zero.clone(), zero.clone()],
            joint: zero,
        }
    }
}

/// Accumulate Σ_s ‖(∇_x h[s]) Δx‖² for each family, plus the joint total,
/// without materialising the Jacobian matrices.
fn linearized_sample(
    cfg: &ScenarioConfig,
    csi: &ParametricCsi,
    deltas: &ParamDeltas,
    freqs: &[f64],
    scratch: &mut LinearizedScratch,
) -> [f64; 5] {
    let a_ts: Vec<Vec<Complex64>> = csi
        .paths
        .iter()
        .map(|p| steering_vector(cfg, p.aod_rad))
        .collect();
    let angle_coef: Vec<f64> = csi
        .paths
        .iter()
        .map(|p| TWO_PI * cfg.antenna_spacing_m * p.aod_rad.cos() / cfg.wavelength_m())
        .collect();
    let mut out = [0.0; 5];
    for &f_s in freqs {
        for buf in scratch.family.iter_mut() {
            buf.fill(Complex64::new(0.0, 0.0));
        }
        for (l, p) in csi.paths.iter().enumerate() {
            let phase = Complex64::from_polar(1.0, p.phase_rad - TWO_PI * f_s * p.delay_s);
            let rot = p.path_loss * phase;
            let coef = [
                -J * angle_coef[l] * rot * deltas.aod_rad[l],
                -J * TWO_PI * f_s * rot * deltas.delay_s[l],
                phase * deltas.path_loss[l],
                J * rot * deltas.phase_rad[l],
            ];
            for (n, a) in a_ts[l].iter().enumerate() {
                scratch.family[0][n] += coef[0] * n as f64 * a;
                scratch.family[1][n] += coef[1] * a;
                scratch.family[2][n] += coef[2] * a;
                scratch.family[3][n] += coef[3] * a;
            }
        }
        for n in 0..cfg.n_tx {
            let mut joint = Complex64::new(0.0, 0.0);
            for (f, buf) in scratch.family.iter().enumerate() {
                out[f] += buf[n].norm_sqr();
                joint += buf[n];
            }
            scratch.joint[n] = joint;
            out[4] += joint.norm_sqr();
        }
    }
    out
}

/// Squared-Frobenius error of actually quantizing each family alone, and
/// all four together.
fn exact_sample(
    cfg: &ScenarioConfig,
    csi: &ParametricCsi,
    books: &Codebooks,
) -> Result<[f64; 5]> {
    let reference = assemble_channel(cfg, csi)?;
    let quantized = |family: usize| -> ParametricCsi {
        ParametricCsi {
            paths: csi
                .paths
                .iter()
                .map(|p| {
                    let mut q = *p;
                    if family == 0 || family == 4 {
                        q.aod_rad = books.theta.value(books.theta.quantize(p.aod_rad));
                    }
                    if family == 1 || family == 4 {
                        q.delay_s = books.tau.value(books.tau.quantize(p.delay_s));
                    }
                    if family == 2 || family == 4 {
                        q.path_loss = books.beta.value(books.beta.quantize(p.path_loss));
                    }
                    if family == 3 || family == 4 {
                        q.phase_rad = books.phi.value(books.phi.quantize(p.phase_rad));
                    }
                    q
                })
                .collect(),
        }
    };
    let mut out = [0.0; 5];
    for (family, o) in out.iter_mut().enumerate() {
        let h_q = assemble_channel(cfg, &quantized(family))?;
        *o = reference
            .entries
            .iter()
            .zip(h_q.entries.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
    }
    Ok(out)
}
