//! Sample datasets on disk.
//!
//! A dataset file holds correlated channel sequences for estimator training
//! and evaluation:
//!
//! ```text
//! magic    5 bytes "CCSI1"
//! header   5 x u32 little-endian: N_f, N_t, w, L, sample count
//! samples  per sample, w+1 channel matrices (history slots then the
//!          prediction target), each stored row-major as interleaved
//!          re/im f32, followed by the target path parameters as 4L f64
//!          in theta, tau, beta, phi order per path
//! ```
//!
//! Matrices are stored at single precision; the path parameters keep full
//! precision because the quantizer consumes them directly. Every sample is
//! drawn from its own counter-mode RNG stream, so sample `i` of a given
//! scenario is the same no matter how many samples are requested and
//! generation can be split across workers without changing the output.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::channel::{channel_sequence, ChannelMatrix, ParametricCsi, PathParams};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};
use crate::estimator::TrainSample;

const MAGIC: &[u8; 5] = b"CCSI1";
const HEADER_LEN: u64 = 5 + 4 * 5;

/// Dimension record at the front of every dataset file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetHeader {
    pub n_subcarriers: usize,
    pub n_tx: usize,
    pub window_len: usize,
    pub n_paths: usize,
    pub count: usize,
}

impl DatasetHeader {
    pub fn for_config(cfg: &ScenarioConfig, count: usize) -> Self {
        Self {
            n_subcarriers: cfg.n_subcarriers,
            n_tx: cfg.n_tx,
            window_len: cfg.window_len,
            n_paths: cfg.n_paths,
            count,
        }
    }

    /// Error out unless the file dimensions match the scenario.
    pub fn matches_config(&self, cfg: &ScenarioConfig) -> Result<()> {
        let expected = Self::for_config(cfg, self.count);
        if *self != expected {
            return Err(Error::DimensionMismatch(format!(
                "dataset was generated as (N_f, N_t, w, L) = ({}, {}, {}, {}), \
                 scenario expects ({}, {}, {}, {})",
                self.n_subcarriers,
                self.n_tx,
                self.window_len,
                self.n_paths,
                cfg.n_subcarriers,
                cfg.n_tx,
                cfg.window_len,
                cfg.n_paths
            )));
        }
        Ok(())
    }

    /// Stored bytes per sample: w+1 matrices of f32 pairs plus 4L f64.
    fn sample_bytes(&self) -> u64 {
        let matrix = self.n_subcarriers as u64 * self.n_tx as u64 * 8;
        (self.window_len as u64 + 1) * matrix + self.n_paths as u64 * 32
    }
}

/// Draw `count` independent mobility sequences under `cfg`.
///
/// Sample `i` comes from RNG stream `i` of the scenario seed.
pub fn generate_samples(cfg: &ScenarioConfig, count: usize) -> Result<Vec<TrainSample>> {
    cfg.validate()?;
    let mut samples = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        rng.set_stream(i as u64);
        samples.push(channel_sequence(cfg, &mut rng)?.into());
    }
    Ok(samples)
}

/// Write `samples` to `path` in the format described in the module docs.
pub fn write_dataset(path: &Path, cfg: &ScenarioConfig, samples: &[TrainSample]) -> Result<()> {
    cfg.validate()?;
    let header = DatasetHeader::for_config(cfg, samples.len());
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    for v in [
        header.n_subcarriers,
        header.n_tx,
        header.window_len,
        header.n_paths,
        header.count,
    ] {
        out.write_all(&(v as u32).to_le_bytes())?;
    }
    for (i, sample) in samples.iter().enumerate() {
        let shape_err = |detail: String| {
            Err(Error::DimensionMismatch(format!("sample {i}: {detail}")))
        };
        if sample.history.len() != cfg.window_len {
            return shape_err(format!(
                "{} history slots, scenario expects {}",
                sample.history.len(),
                cfg.window_len
            ));
        }
        if sample.target_csi.n_paths() != cfg.n_paths {
            return shape_err(format!(
                "{} paths, scenario expects {}",
                sample.target_csi.n_paths(),
                cfg.n_paths
            ));
        }
        for matrix in sample.history.iter().chain([&sample.target]) {
            if matrix.n_subcarriers() != cfg.n_subcarriers || matrix.n_tx() != cfg.n_tx {
                return shape_err(format!(
                    "matrix is {}x{}, scenario expects {}x{}",
                    matrix.n_subcarriers(),
                    matrix.n_tx(),
                    cfg.n_subcarriers,
                    cfg.n_tx
                ));
            }
            for z in matrix.entries.iter() {
                out.write_all(&(z.re as f32).to_le_bytes())?;
                out.write_all(&(z.im as f32).to_le_bytes())?;
            }
        }
        for p in &sample.target_csi.paths {
            for v in [p.aod_rad, p.delay_s, p.path_loss, p.phase_rad] {
                out.write_all(&v.to_le_bytes())?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Read a dataset written by [`write_dataset`].
pub fn read_dataset(path: &Path) -> Result<(DatasetHeader, Vec<TrainSample>)> {
    let file = File::open(path)?;
    let file_len = file.metadata()?.len();
    let mut input = BufReader::new(file);

    let mut magic = [0u8; 5];
    read_exact(&mut input, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::MalformedFile {
            what: "dataset",
            detail: format!("bad magic {magic:?}"),
        });
    }
    let mut fields = [0usize; 5];
    for f in fields.iter_mut() {
        let mut buf = [0u8; 4];
        read_exact(&mut input, &mut buf, "header")?;
        *f = u32::from_le_bytes(buf) as usize;
    }
    let header = DatasetHeader {
        n_subcarriers: fields[0],
        n_tx: fields[1],
        window_len: fields[2],
        n_paths: fields[3],
        count: fields[4],
    };
    if header.n_subcarriers == 0
        || header.n_tx == 0
        || header.window_len == 0
        || header.n_paths == 0
    {
        return Err(Error::MalformedFile {
            what: "dataset",
            detail: format!("zero dimension in header {header:?}"),
        });
    }
    let expected_len = HEADER_LEN + header.count as u64 * header.sample_bytes();
    if file_len != expected_len {
        return Err(Error::MalformedFile {
            what: "dataset",
            detail: format!(
                "file is {file_len} bytes, header {header:?} implies {expected_len}"
            ),
        });
    }

    let mut samples = Vec::with_capacity(header.count);
    for _ in 0..header.count {
        let mut slots = Vec::with_capacity(header.window_len + 1);
        for _ in 0..=header.window_len {
            let mut matrix = ChannelMatrix::zeros(header.n_subcarriers, header.n_tx);
            for z in matrix.entries.iter_mut() {
                let re = read_f32(&mut input)?;
                let im = read_f32(&mut input)?;
                *z = Complex64::new(re as f64, im as f64);
            }
            slots.push(matrix);
        }
        let target = slots.pop().expect("w+1 slots were read");
        let mut paths = Vec::with_capacity(header.n_paths);
        for _ in 0..header.n_paths {
            let mut values = [0.0f64; 4];
            for v in values.iter_mut() {
                let mut buf = [0u8; 8];
                read_exact(&mut input, &mut buf, "path parameters")?;
                *v = f64::from_le_bytes(buf);
            }
            paths.push(PathParams {
                aod_rad: values[0],
                delay_s: values[1],
                path_loss: values[2],
                phase_rad: values[3],
            });
        }
        samples.push(TrainSample {
            history: slots,
            target,
            target_csi: ParametricCsi { paths },
        });
    }
    Ok((header, samples))
}

fn read_f32(input: &mut impl Read) -> Result<f32> {
    let mut buf = [0u8; 4];
    read_exact(input, &mut buf, "matrix entries")?;
    Ok(f32::from_le_bytes(buf))
}

fn read_exact(input: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    input.read_exact(buf).map_err(|e| Error::MalformedFile {
        what: "dataset",
        detail: format!("truncated while reading {what}: {e}"),
    })
}
