//! `parafeed`: drive the parametric CSI feedback chain from the shell.
//!
//! Every subcommand prints one JSON document to stdout; bulk results
//! (datasets, checkpoints, metric sweeps) go to the files named by flags.
//! Defaults come from the built-in desk-size scenario, overridden first by
//! `--config FILE` (TOML) and then by individual flags.

mod settings;
mod verify;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use parafeed_core::allocation::{
    brute_force_allocation, closed_form_allocation, distortion_terms, uniform_allocation,
};
use parafeed_core::channel::{assemble_channel, sample_parametric_csi};
use parafeed_core::dataset::{generate_samples, read_dataset, write_dataset};
use parafeed_core::estimator::{
    load_checkpoint, persistence_baseline, predict, save_checkpoint, DecoderParams,
    EncoderParams, EstimatorDims, TrainConfig,
};
use parafeed_core::metrics::{cosine_similarity, db_string, nmse, to_db};
use parafeed_core::quantizer::{
    dequantize_csi, encode_payload, payload_bits, quantize_csi, Codebooks,
};
use parafeed_core::scenario::{
    manifest_sibling, run_scenario, AllocationMethod, EstimatorChoice, PipelineSpec,
};
use parafeed_core::{BitAllocation, ScenarioConfig};

use settings::{ConfigFile, LinkPatch, ScenarioPatch, TrainPatch};

#[derive(Parser)]
#[command(
    name = "parafeed",
    version,
    about = "Parametric CSI feedback: channel generation, quantization, estimation, link simulation"
)]
struct Cli {
    /// TOML settings file; command-line flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw correlated channel sequences and write a dataset file.
    Generate {
        #[command(flatten)]
        scenario: ScenarioPatch,
        /// Number of sequences to draw.
        #[arg(long, default_value_t = 2000)]
        count: usize,
        /// Destination dataset file.
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
    },
    /// Split a feedback bit budget across the four parameter families.
    Allocate {
        #[command(flatten)]
        scenario: ScenarioPatch,
        /// Total bits per path.
        #[arg(long)]
        total_bits: u32,
        #[arg(long, value_enum, default_value_t = Method::ClosedForm)]
        method: Method,
    },
    /// Quantize one drawn parameter set and print the payload.
    Quantize {
        #[command(flatten)]
        scenario: ScenarioPatch,
        /// Total bits per path.
        #[arg(long, default_value_t = 32)]
        total_bits: u32,
        #[arg(long, value_enum, default_value_t = Method::ClosedForm)]
        method: Method,
        /// Seed for the parameter draw; defaults to the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check the analytic formulas against numeric baselines.
    Verify {
        #[command(flatten)]
        scenario: ScenarioPatch,
        /// Which formula family to check.
        #[arg(long, value_enum)]
        what: VerifyWhat,
        /// Monte Carlo / finite-difference sample count.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train the estimator on a dataset and save a checkpoint.
    Train {
        #[command(flatten)]
        scenario: ScenarioPatch,
        #[command(flatten)]
        train: TrainPatch,
        /// Dataset file written by `generate`.
        #[arg(long, value_name = "FILE")]
        dataset: PathBuf,
        /// Where to save the trained weights.
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        /// Embedding width; defaults to the scenario preset.
        #[arg(long)]
        d_model: Option<usize>,
        /// Attention heads.
        #[arg(long)]
        n_heads: Option<usize>,
        /// Delay rows kept by the feature extractor.
        #[arg(long)]
        n_trunc: Option<usize>,
    },
    /// Score a checkpoint on a dataset.
    Eval {
        #[command(flatten)]
        scenario: ScenarioPatch,
        #[command(flatten)]
        train: TrainPatch,
        /// Checkpoint written by `train`.
        #[arg(long, value_name = "FILE")]
        checkpoint: PathBuf,
        /// Dataset file written by `generate`.
        #[arg(long, value_name = "FILE")]
        dataset: PathBuf,
        /// Write the first sample's attention maps to a CSV file.
        #[arg(long, value_name = "FILE")]
        dump_attention: Option<PathBuf>,
    },
    /// Run the feedback chain over a seed x budget x SNR grid.
    Simulate {
        #[command(flatten)]
        scenario: ScenarioPatch,
        #[command(flatten)]
        link: LinkPatch,
        #[arg(long, value_enum, default_value_t = Estimator::Oracle)]
        estimator: Estimator,
        /// Checkpoint file, required with `--estimator trained`.
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = SweepMethod::ClosedForm)]
        allocation: SweepMethod,
        /// Bit budgets per path, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "32,64,96,128")]
        bits: Vec<u32>,
        /// Scenario seeds, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3")]
        seeds: Vec<u64>,
        /// CSV destination; the JSON manifest lands next to it.
        #[arg(long, value_name = "FILE")]
        output: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    ClosedForm,
    Uniform,
    BruteForce,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Self::ClosedForm => "closed-form",
            Self::Uniform => "uniform",
            Self::BruteForce => "brute-force",
        }
    }
}

/// Allocation methods cheap enough to recompute per grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepMethod {
    ClosedForm,
    Uniform,
}

impl From<SweepMethod> for AllocationMethod {
    fn from(m: SweepMethod) -> Self {
        match m {
            SweepMethod::ClosedForm => Self::ClosedForm,
            SweepMethod::Uniform => Self::Uniform,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum VerifyWhat {
    Jacobians,
    Theorem1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Estimator {
    Oracle,
    Persistence,
    Trained,
}

fn main() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let file = ConfigFile::load(cli.config.as_deref())?;
    match cli.command {
        Command::Generate {
            scenario,
            count,
            output,
        } => cmd_generate(&file, &scenario, count, &output),
        Command::Allocate {
            scenario,
            total_bits,
            method,
        } => cmd_allocate(&file, &scenario, total_bits, method),
        Command::Quantize {
            scenario,
            total_bits,
            method,
            seed,
        } => cmd_quantize(&file, &scenario, total_bits, method, seed),
        Command::Verify {
            scenario,
            what,
            samples,
            seed,
        } => cmd_verify(&file, &scenario, what, samples, seed),
        Command::Train {
            scenario,
            train,
            dataset,
            checkpoint,
            d_model,
            n_heads,
            n_trunc,
        } => {
            let dims_patch = DimsPatch {
                d_model,
                n_heads,
                n_trunc,
            };
            cmd_train(&file, &scenario, &train, &dataset, &checkpoint, dims_patch)
        }
        Command::Eval {
            scenario,
            train,
            checkpoint,
            dataset,
            dump_attention,
        } => cmd_eval(
            &file,
            &scenario,
            &train,
            &checkpoint,
            &dataset,
            dump_attention.as_deref(),
        ),
        Command::Simulate {
            scenario,
            link,
            estimator,
            checkpoint,
            allocation,
            bits,
            seeds,
            output,
        } => cmd_simulate(
            &file, &scenario, &link, estimator, checkpoint, allocation, bits, seeds, &output,
        ),
    }
}

fn emit(value: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn cmd_generate(
    file: &ConfigFile,
    scenario: &ScenarioPatch,
    count: usize,
    output: &std::path::Path,
) -> anyhow::Result<()> {
    let cfg = file.scenario(scenario)?;
    let samples = generate_samples(&cfg, count)?;
    write_dataset(output, &cfg, &samples)
        .with_context(|| format!("writing {}", output.display()))?;
    let bytes = std::fs::metadata(output)?.len();
    emit(&json!({
        "path": output,
        "samples": count,
        "bytes": bytes,
        "rng_seed": cfg.rng_seed,
    }))
}

fn allocation_for(
    cfg: &ScenarioConfig,
    method: Method,
    total_bits: u32,
) -> anyhow::Result<(BitAllocation, f64, Option<u64>)> {
    Ok(match method {
        Method::ClosedForm => {
            let r = closed_form_allocation(cfg, total_bits);
            (r.rounded, r.objective, None)
        }
        Method::Uniform => {
            let a = uniform_allocation(total_bits);
            (a, distortion_terms(cfg, &a).sum(), None)
        }
        Method::BruteForce => {
            let r = brute_force_allocation(cfg, total_bits)?;
            (r.alloc, r.objective, Some(r.visited))
        }
    })
}

fn cmd_allocate(
    file: &ConfigFile,
    scenario: &ScenarioPatch,
    total_bits: u32,
    method: Method,
) -> anyhow::Result<()> {
    let cfg = file.scenario(scenario)?;
    let (alloc, objective, visited) = allocation_for(&cfg, method, total_bits)?;
    let mut out = json!({
        "method": method.name(),
        "total_bits": total_bits,
        "q_theta": alloc.q_theta,
        "q_tau": alloc.q_tau,
        "q_beta": alloc.q_beta,
        "q_phi": alloc.q_phi,
        "objective": objective,
    });
    if let Some(v) = visited {
        out["visited"] = v.into();
    }
    emit(&out)
}

fn cmd_quantize(
    file: &ConfigFile,
    scenario: &ScenarioPatch,
    total_bits: u32,
    method: Method,
    seed: Option<u64>,
) -> anyhow::Result<()> {
    let cfg = file.scenario(scenario)?;
    let (alloc, _, _) = allocation_for(&cfg, method, total_bits)?;
    let books = Codebooks::new(&cfg, &alloc);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(cfg.rng_seed));
    let csi = sample_parametric_csi(&cfg, &mut rng);
    let quantized = quantize_csi(&csi, &books);
    let payload = encode_payload(&quantized, &alloc);
    let recovered = dequantize_csi(&quantized, &books);
    let distortion = nmse(
        &assemble_channel(&cfg, &csi)?,
        &assemble_channel(&cfg, &recovered)?,
    )?;

    let paths: Vec<_> = csi
        .paths
        .iter()
        .zip(&quantized.paths)
        .zip(&recovered.paths)
        .map(|((truth, idx), back)| json!({"true": truth, "indices": idx, "fed_back": back}))
        .collect();
    emit(&json!({
        "allocation": alloc,
        "payload_bits": payload_bits(&alloc, cfg.n_paths),
        "payload_hex": payload.bytes.iter().map(|b| format!("{b:02x}")).collect::<String>(),
        "paths": paths,
        "channel_nmse": distortion,
        "channel_nmse_db": db_string(to_db(distortion)),
    }))
}

fn cmd_verify(
    file: &ConfigFile,
    scenario: &ScenarioPatch,
    what: VerifyWhat,
    samples: usize,
    seed: u64,
) -> anyhow::Result<()> {
    let cfg = file.scenario(scenario)?;
    match what {
        VerifyWhat::Jacobians => emit(&verify::jacobian_report(&cfg, samples, seed)?),
        VerifyWhat::Theorem1 => emit(&verify::theorem_report(&cfg, samples, seed)?),
    }
}

struct DimsPatch {
    d_model: Option<usize>,
    n_heads: Option<usize>,
    n_trunc: Option<usize>,
}

impl DimsPatch {
    fn apply(&self, dims: &mut EstimatorDims) {
        if let Some(v) = self.d_model {
            dims.d_model = v;
        }
        if let Some(v) = self.n_heads {
            dims.n_heads = v;
        }
        if let Some(v) = self.n_trunc {
            dims.n_trunc = v;
        }
    }
}

fn cmd_train(
    file: &ConfigFile,
    scenario: &ScenarioPatch,
    train: &TrainPatch,
    dataset: &std::path::Path,
    checkpoint: &std::path::Path,
    dims_patch: DimsPatch,
) -> anyhow::Result<()> {
    let cfg = file.scenario(scenario)?;
    let tc: TrainConfig = file.train(train)?;
    let (header, samples) =
        read_dataset(dataset).with_context(|| format!("reading {}", dataset.display()))?;
    header.matches_config(&cfg)?;
    anyhow::ensure!(header.count > 0, "dataset is empty");

    let mut dims = EstimatorDims::for_scenario(&cfg);
    dims_patch.apply(&mut dims);
    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut encoder = EncoderParams::init(dims, &mut rng)?;
    let mut decoder = DecoderParams::init(dims, &mut rng)?;
    let stats = parafeed_core::estimator::train(&cfg, &samples, &mut encoder, &mut decoder, &tc)?;
    save_checkpoint(checkpoint, &encoder, &decoder)
        .with_context(|| format!("writing {}", checkpoint.display()))?;

    emit(&json!({
        "checkpoint": checkpoint,
        "dataset_samples": header.count,
        "parameters": encoder.param_count() + decoder.param_count(),
        "first_epoch": stats.first(),
        "final_epoch": stats.last(),
        "history": stats,
    }))
}

fn cmd_eval(
    file: &ConfigFile,
    scenario: &ScenarioPatch,
    train: &TrainPatch,
    checkpoint: &std::path::Path,
    dataset: &std::path::Path,
    dump_attention: Option<&std::path::Path>,
) -> anyhow::Result<()> {
    let cfg = file.scenario(scenario)?;
    let tc = file.train(train)?;
    let (encoder, decoder) =
        load_checkpoint(checkpoint).with_context(|| format!("reading {}", checkpoint.display()))?;
    anyhow::ensure!(
        encoder.dims.matches_scenario(&cfg),
        "checkpoint was trained for different dimensions: {:?}",
        encoder.dims
    );
    let (header, samples) =
        read_dataset(dataset).with_context(|| format!("reading {}", dataset.display()))?;
    header.matches_config(&cfg)?;
    anyhow::ensure!(header.count > 0, "dataset is empty");

    let books = Codebooks::new(&cfg, &tc.feedback_bits);
    let mut nmse_sum = 0.0;
    let mut cosine_sum = 0.0;
    let mut persistence_sum = 0.0;
    let mut first_maps = None;
    for sample in &samples {
        let prediction = predict(&cfg, &sample.history, &encoder, &decoder, &books)?;
        nmse_sum += nmse(&sample.target, &prediction.reconstruction)?;
        cosine_sum += cosine_similarity(&sample.target, &prediction.reconstruction)?;
        persistence_sum += nmse(&sample.target, &persistence_baseline(&sample.history)?)?;
        if first_maps.is_none() {
            first_maps = Some((prediction.attention, prediction.decoder_attention));
        }
    }
    let n = samples.len() as f64;
    let mean_nmse = nmse_sum / n;
    let mean_persistence = persistence_sum / n;

    if let (Some(path), Some((enc_maps, dec_maps))) = (dump_attention, &first_maps) {
        write_attention_csv(path, enc_maps, dec_maps)
            .with_context(|| format!("writing {}", path.display()))?;
    }

    emit(&json!({
        "samples": samples.len(),
        "feedback_bits": tc.feedback_bits,
        "nmse": mean_nmse,
        "nmse_db": db_string(to_db(mean_nmse)),
        "cosine": cosine_sum / n,
        "persistence_nmse": mean_persistence,
        "persistence_nmse_db": db_string(to_db(mean_persistence)),
        "attention_csv": dump_attention,
    }))
}

fn write_attention_csv(
    path: &std::path::Path,
    encoder_maps: &[Array2<f64>],
    decoder_maps: &[Array2<f64>],
) -> anyhow::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "stage,head,row,col,weight")?;
    for (stage, maps) in [("encoder", encoder_maps), ("decoder", decoder_maps)] {
        for (head, map) in maps.iter().enumerate() {
            for ((row, col), weight) in map.indexed_iter() {
                writeln!(out, "{stage},{head},{row},{col},{weight}")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    file: &ConfigFile,
    scenario: &ScenarioPatch,
    link: &LinkPatch,
    estimator: Estimator,
    checkpoint: Option<PathBuf>,
    allocation: SweepMethod,
    bits: Vec<u32>,
    seeds: Vec<u64>,
    output: &std::path::Path,
) -> anyhow::Result<()> {
    let cfg = file.scenario(scenario)?;
    let link = file.link(link)?;
    let estimator = match estimator {
        Estimator::Oracle => EstimatorChoice::Oracle,
        Estimator::Persistence => EstimatorChoice::Persistence,
        Estimator::Trained => {
            let path = checkpoint
                .as_ref()
                .context("--estimator trained needs --checkpoint")?;
            let (encoder, decoder) =
                load_checkpoint(path).with_context(|| format!("reading {}", path.display()))?;
            EstimatorChoice::Trained {
                encoder: Box::new(encoder),
                decoder: Box::new(decoder),
            }
        }
    };
    let pipeline = PipelineSpec {
        estimator,
        allocation: allocation.into(),
        total_bits_grid: bits,
        link,
    };
    let records = run_scenario(&cfg, &pipeline, &seeds, output)?;
    emit(&json!({
        "csv": output,
        "manifest": manifest_sibling(output),
        "rows": records.len(),
    }))
}
