//! Numeric cross-checks behind `parafeed verify`.
//!
//! `jacobians` differentiates the channel synthesis by central finite
//! differences and compares against the analytic Jacobians. `theorem1`
//! measures the four quantization distortion terms by Monte Carlo and
//! compares them with the closed-form expressions, whose derivation
//! bounds each family by an exact constant factor:
//!
//! ```text
//! E‖ΔH‖²_θ / C_θ = (4/3)(2N_t - 1)      E‖ΔH‖²_τ / C_τ = 4
//! E‖ΔH‖²_β / C_β = 1                    E‖ΔH‖²_φ / C_φ = 4
//! ```

use num_complex::Complex64;
use parafeed_core::allocation::{alternate_offsets, distortion_terms, equalizing_offsets};
use parafeed_core::channel::{assemble_channel, sample_parametric_csi};
use parafeed_core::perturbation::{
    analytic_jacobians, monte_carlo_distortion, DistortionMode, EmpiricalTerm, JacobianSet,
    ParamDeltas,
};
use parafeed_core::{BitAllocation, ScenarioConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

const FAMILIES: [&str; 4] = ["theta", "tau", "beta", "phi"];

/// Base finite-difference step; the delay step is scaled by 1/(2π f_c) and
/// the path-loss step by β_max so each family moves a comparable phase.
const FD_STEP: f64 = 1e-5;
const FD_TOLERANCE: f64 = 1e-6;

/// How far a Monte Carlo mean may sit from its closed-form expectation,
/// in standard errors.
const SIGMA_LIMIT: f64 = 5.0;

#[derive(Debug, Serialize)]
pub struct FamilyAgreement {
    pub family: &'static str,
    pub max_relative_error: f64,
    pub mean_relative_error: f64,
}

#[derive(Debug, Serialize)]
pub struct JacobianReport {
    pub what: &'static str,
    pub samples: usize,
    pub seed: u64,
    pub step: f64,
    pub tolerance: f64,
    pub families: Vec<FamilyAgreement>,
    pub pass: bool,
}

/// Frobenius-relative agreement between finite differences and the
/// analytic Jacobians, over `samples` random parameter draws.
pub fn jacobian_report(
    cfg: &ScenarioConfig,
    samples: usize,
    seed: u64,
) -> anyhow::Result<JacobianReport> {
    anyhow::ensure!(samples > 0, "need at least one sample");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps = [
        FD_STEP,
        FD_STEP / (std::f64::consts::TAU * cfg.carrier_freq_hz),
        FD_STEP * cfg.beta_max,
        FD_STEP,
    ];

    let mut max_err = [0.0f64; 4];
    let mut sum_err = [0.0f64; 4];
    for _ in 0..samples {
        let csi = sample_parametric_csi(cfg, &mut rng);
        let jacobians: Vec<JacobianSet> = (1..=cfg.n_subcarriers)
            .map(|s| analytic_jacobians(cfg, &csi, s))
            .collect::<parafeed_core::Result<_>>()?;

        for (family, &h) in steps.iter().enumerate() {
            let mut num = 0.0;
            let mut den = 0.0;
            for l in 0..cfg.n_paths {
                let deltas = single_delta(family, l, cfg.n_paths, h);
                let plus = assemble_channel(cfg, &deltas.apply(&csi))?;
                let minus = assemble_channel(cfg, &deltas.scaled(-1.0).apply(&csi))?;
                for s in 0..cfg.n_subcarriers {
                    let column = match family {
                        0 => &jacobians[s].d_theta,
                        1 => &jacobians[s].d_tau,
                        2 => &jacobians[s].d_beta,
                        _ => &jacobians[s].d_phi,
                    };
                    for n in 0..cfg.n_tx {
                        let fd = (plus.entries[[s, n]] - minus.entries[[s, n]]) / (2.0 * h);
                        // Matrix rows hold h[s]^H while the Jacobians
                        // differentiate h[s], hence the conjugate.
                        let analytic: Complex64 = column[[n, l]].conj();
                        num += (fd - analytic).norm_sqr();
                        den += analytic.norm_sqr();
                    }
                }
            }
            let err = (num / den).sqrt();
            max_err[family] = max_err[family].max(err);
            sum_err[family] += err;
        }
    }

    let families = FAMILIES
        .iter()
        .enumerate()
        .map(|(i, name)| FamilyAgreement {
            family: name,
            max_relative_error: max_err[i],
            mean_relative_error: sum_err[i] / samples as f64,
        })
        .collect();
    Ok(JacobianReport {
        what: "jacobians",
        samples,
        seed,
        step: FD_STEP,
        tolerance: FD_TOLERANCE,
        pass: max_err.iter().all(|e| *e < FD_TOLERANCE),
        families,
    })
}

fn single_delta(family: usize, path: usize, n_paths: usize, h: f64) -> ParamDeltas {
    let mut d = ParamDeltas::zeros(n_paths);
    match family {
        0 => d.aod_rad[path] = h,
        1 => d.delay_s[path] = h,
        2 => d.path_loss[path] = h,
        _ => d.phase_rad[path] = h,
    }
    d
}

#[derive(Debug, Serialize)]
pub struct TermCheck {
    pub family: &'static str,
    /// Closed-form distortion term.
    pub predicted: f64,
    /// Exact constant between the true expectation and the closed form.
    pub expected_ratio: f64,
    pub measured_mean: f64,
    pub measured_ratio: f64,
    pub std_error: f64,
    /// Standard errors between the measured mean and its expectation.
    pub sigma: f64,
}

#[derive(Debug, Serialize)]
pub struct OffsetReport {
    /// Offsets that equalize the four distortion terms; they sum to zero.
    pub equalizing: [f64; 4],
    /// Alternate offsets kept for diagnosis; they overshoot the budget.
    pub alternate: [f64; 4],
    /// alternate - equalizing, in bits per family.
    pub deviation_bits: [f64; 4],
}

#[derive(Debug, Serialize)]
pub struct TheoremReport {
    pub what: &'static str,
    pub samples: usize,
    pub seed: u64,
    pub allocation: BitAllocation,
    pub sigma_limit: f64,
    pub terms: Vec<TermCheck>,
    pub offsets: OffsetReport,
    pub pass: bool,
}

/// Monte Carlo check of the four distortion terms plus the allocation
/// offset comparison, at a uniform 8-bit reference split.
pub fn theorem_report(
    cfg: &ScenarioConfig,
    samples: usize,
    seed: u64,
) -> anyhow::Result<TheoremReport> {
    let alloc = BitAllocation::uniform(8);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let measured =
        monte_carlo_distortion(cfg, &alloc, samples, &mut rng, DistortionMode::Linearized)?;
    let predicted = distortion_terms(cfg, &alloc).as_array();
    let expected_ratios = [
        4.0 / 3.0 * (2.0 * cfg.n_tx as f64 - 1.0),
        4.0,
        1.0,
        4.0,
    ];
    let empirical: [EmpiricalTerm; 4] = [
        measured.c_theta,
        measured.c_tau,
        measured.c_beta,
        measured.c_phi,
    ];

    let terms: Vec<TermCheck> = FAMILIES
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let expected_mean = expected_ratios[i] * predicted[i];
            TermCheck {
                family: name,
                predicted: predicted[i],
                expected_ratio: expected_ratios[i],
                measured_mean: empirical[i].mean,
                measured_ratio: empirical[i].mean / predicted[i],
                std_error: empirical[i].std_error,
                sigma: (empirical[i].mean - expected_mean) / empirical[i].std_error,
            }
        })
        .collect();

    let equalizing = equalizing_offsets(cfg);
    let alternate = alternate_offsets(cfg);
    let mut deviation_bits = [0.0; 4];
    for i in 0..4 {
        deviation_bits[i] = alternate[i] - equalizing[i];
    }

    Ok(TheoremReport {
        what: "theorem1",
        samples,
        seed,
        allocation: alloc,
        sigma_limit: SIGMA_LIMIT,
        pass: terms.iter().all(|t| t.sigma.abs() <= SIGMA_LIMIT),
        terms,
        offsets: OffsetReport {
            equalizing,
            alternate,
            deviation_bits,
        },
    })
}
