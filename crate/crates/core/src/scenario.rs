//! End-to-end scenario runs.
//!
//! [`run_scenario`] drives the whole feedback loop for a grid of seeds, bit
//! budgets, and SNR points: generate a mobility sequence, estimate the next
//! slot's parameters, quantize and pack them, reconstruct the channel at
//! the base station, then score the reconstruction (NMSE, cosine
//! similarity) and simulate the beamformed QPSK link. Results land in one
//! CSV row per (seed, bit budget, SNR point) plus a JSON manifest that
//! pins the exact inputs; identical manifests produce byte-identical CSV.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::allocation::{closed_form_allocation, uniform_allocation};
use crate::channel::{assemble_channel, channel_sequence, ChannelMatrix, SequenceSample};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::estimator::{persistence_baseline, predict, DecoderParams, EncoderParams};
use crate::link::{simulate_ber, LinkSimConfig};
use crate::metrics::{cosine_similarity, db_string, nmse, to_db};
use crate::quantizer::{
    decode_payload, dequantize_csi, encode_payload, quantize_csi, Codebooks,
};

/// Which estimator feeds the quantizer.
#[derive(Debug, Clone)]
pub enum EstimatorChoice {
    /// Feed back the true target parameters; isolates quantization loss.
    Oracle,
    /// Repeat the last observed channel, bypassing the parametric chain.
    Persistence,
    /// A trained encoder/decoder pair, usually loaded from a checkpoint.
    Trained {
        encoder: Box<EncoderParams>,
        decoder: Box<DecoderParams>,
    },
}

impl EstimatorChoice {
    fn name(&self) -> &'static str {
        match self {
            Self::Oracle => "oracle",
            Self::Persistence => "persistence",
            Self::Trained { .. } => "trained",
        }
    }
}

/// How the bit budget splits across the four parameter families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AllocationMethod {
    /// Even split, remainder in θ, τ, β, φ order.
    Uniform,
    /// Distortion-equalizing split via the closed form.
    ClosedForm,
}

/// Everything swept by one scenario run besides the seed list.
#[derive(Debug, Clone)]
pub struct PipelineSpec {
    pub estimator: EstimatorChoice,
    pub allocation: AllocationMethod,
    /// Total feedback bits per path, one run per entry.
    pub total_bits_grid: Vec<u32>,
    pub link: LinkSimConfig,
}

impl PipelineSpec {
    fn validate(&self, cfg: &ScenarioConfig) -> Result<()> {
        if self.total_bits_grid.is_empty() {
            return Err(Error::InvalidConfig("empty bit budget grid".into()));
        }
        self.link.validate()?;
        if let EstimatorChoice::Trained { encoder, decoder } = &self.estimator {
            if !encoder.dims.matches_scenario(cfg) || !decoder.dims.matches_scenario(cfg) {
                return Err(Error::DimensionMismatch(
                    "checkpoint dimensions do not match the scenario".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One CSV row: metrics for a single (seed, bit budget, SNR) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunRecord {
    pub seed: u64,
    pub q_total: u32,
    pub q_theta: u32,
    pub q_tau: u32,
    pub q_beta: u32,
    pub q_phi: u32,
    pub snr_db: f64,
    pub nmse_linear: f64,
    pub nmse_db: f64,
    pub cosine: f64,
    pub ber: f64,
}

/// Inputs echoed next to the CSV so a run can be reproduced exactly.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    /// Crate version plus a config digest prefix, e.g. `v0.1.0-1a2b3c4d`.
    pub run_id: String,
    pub version: String,
    /// SHA-256 over the JSON of (scenario, estimator, allocation, grid,
    /// link, seeds).
    pub config_sha256: String,
    pub scenario: ScenarioConfig,
    pub estimator: String,
    pub allocation: AllocationMethod,
    pub total_bits_grid: Vec<u32>,
    pub link: LinkSimConfig,
    pub seeds: Vec<u64>,
}

const CSV_HEADER: &str =
    "seed,q_total,q_theta,q_tau,q_beta,q_phi,snr_db,nmse_linear,nmse_db,cosine,ber";
const SNR_NOTE: &str =
    "# snr_db is transmit symbol energy over noise variance, before beamforming gain";

/// Run the full feedback chain over `seeds` × bit budgets × SNR grid.
///
/// Writes the CSV to `csv_path` and the manifest next to it with the
/// extension replaced by `manifest.json`; returns the records in file
/// order (seed outermost, SNR innermost).
pub fn run_scenario(
    cfg: &ScenarioConfig,
    pipeline: &PipelineSpec,
    seeds: &[u64],
    csv_path: &Path,
) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    pipeline.validate(cfg)?;
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("empty seed list".into()));
    }

    let mut records = Vec::new();
    for &seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sample = channel_sequence(cfg, &mut rng)?;
        for (q_index, &q_total) in pipeline.total_bits_grid.iter().enumerate() {
            let alloc = match pipeline.allocation {
                AllocationMethod::Uniform => uniform_allocation(q_total),
                AllocationMethod::ClosedForm => closed_form_allocation(cfg, q_total).rounded,
            };
            let books = Codebooks::new(cfg, &alloc);
            let reconstruction = reconstruct(cfg, pipeline, &sample, &books)?;

            let nmse_linear = nmse(&sample.target, &reconstruction)?;
            let cosine = cosine_similarity(&sample.target, &reconstruction)?;
            // Noise draws get their own stream per bit budget so records
            // do not depend on grid order, and estimator choices see
            // common noise at equal (seed, budget).
            let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
            noise_rng.set_stream(1 + q_index as u64);
            let bers = simulate_ber(&sample.target, &reconstruction, &pipeline.link, &mut noise_rng)?;

            let [q_theta, q_tau, q_beta, q_phi] = alloc.as_array();
            for (&snr_db, &ber) in pipeline.link.snr_db_grid.iter().zip(&bers) {
                records.push(RunRecord {
                    seed,
                    q_total,
                    q_theta,
                    q_tau,
                    q_beta,
                    q_phi,
                    snr_db,
                    nmse_linear,
                    nmse_db: to_db(nmse_linear),
                    cosine,
                    ber,
                });
            }
        }
    }

    write_csv(csv_path, &records)?;
    let manifest = build_manifest(cfg, pipeline, seeds);
    let manifest_path = manifest_sibling(csv_path);
    serde_json::to_writer_pretty(BufWriter::new(File::create(&manifest_path)?), &manifest)?;
    Ok(records)
}

/// Manifest path used by [`run_scenario`] for a given CSV path.
pub fn manifest_sibling(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("manifest.json")
}

fn reconstruct(
    cfg: &ScenarioConfig,
    pipeline: &PipelineSpec,
    sample: &SequenceSample,
    books: &Codebooks,
) -> Result<ChannelMatrix> {
    match &pipeline.estimator {
        EstimatorChoice::Oracle => {
            let alloc = books.alloc();
            let quantized = quantize_csi(&sample.target_csi, books);
            let payload = encode_payload(&quantized, &alloc);
            let unpacked = decode_payload(&payload.bytes, &alloc, cfg.n_paths)?;
            assemble_channel(cfg, &dequantize_csi(&unpacked, books))
        }
        EstimatorChoice::Persistence => persistence_baseline(&sample.history),
        EstimatorChoice::Trained { encoder, decoder } => {
            Ok(predict(cfg, &sample.history, encoder, decoder, books)?.reconstruction)
        }
    }
}

fn write_csv(path: &Path, records: &[RunRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{SNR_NOTE}")?;
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.seed,
            r.q_total,
            r.q_theta,
            r.q_tau,
            r.q_beta,
            r.q_phi,
            r.snr_db,
            r.nmse_linear,
            db_string(r.nmse_db),
            r.cosine,
            r.ber
        )?;
    }
    out.flush()?;
    Ok(())
}

fn build_manifest(cfg: &ScenarioConfig, pipeline: &PipelineSpec, seeds: &[u64]) -> RunManifest {
    #[derive(Serialize)]
    struct HashedInputs<'a> {
        scenario: &'a ScenarioConfig,
        estimator: &'a str,
        allocation: AllocationMethod,
        total_bits_grid: &'a [u32],
        link: &'a LinkSimConfig,
        seeds: &'a [u64],
    }
    let inputs = HashedInputs {
        scenario: cfg,
        estimator: pipeline.estimator.name(),
        allocation: pipeline.allocation,
        total_bits_grid: &pipeline.total_bits_grid,
        link: &pipeline.link,
        seeds,
    };
    let digest = Sha256::digest(serde_json::to_string(&inputs).expect("config serializes"));
    let config_sha256 = format!("{digest:x}");
    let version = env!("CARGO_PKG_VERSION").to_string();
    RunManifest {
        run_id: format!("v{version}-{}", &config_sha256[..8]),
        version,
        config_sha256,
        scenario: cfg.clone(),
        estimator: pipeline.estimator.name().to_string(),
        allocation: pipeline.allocation,
        total_bits_grid: pipeline.total_bits_grid.clone(),
        link: pipeline.link.clone(),
        seeds: seeds.to_vec(),
    }
}
