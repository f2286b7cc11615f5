//! Binary weight checkpoints.
//!
//! Layout: 5-byte magic, eight u32 little-endian dimension fields, then the
//! encoder and decoder tensor lists. Each list is a u32 tensor count
//! followed by (u16 name length, UTF-8 name, u32 value count, f64
//! little-endian values) per tensor, in parameter declaration order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::decoder::DecoderParams;
use super::encoder::{EncoderParams, EstimatorDims};
use crate::error::{Error, Result};

const MAGIC: &[u8; 5] = b"PFCP1";
const SLOT_EMBEDDING_FLAG: u32 = 1;

/// Writes both parameter sets to `path`, overwriting any existing file.
pub fn save_checkpoint(
    path: &Path,
    encoder: &EncoderParams,
    decoder: &DecoderParams,
) -> Result<()> {
    if encoder.dims != decoder.dims {
        return Err(Error::DimensionMismatch(
            "encoder and decoder carry different dimension bundles".into(),
        ));
    }
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    let dims = &encoder.dims;
    let flags = if dims.use_slot_embedding {
        SLOT_EMBEDDING_FLAG
    } else {
        0
    };
    for v in [
        dims.window_len,
        dims.d_model,
        dims.n_heads,
        dims.n_trunc,
        dims.n_subcarriers,
        dims.n_tx,
        dims.n_paths,
    ] {
        write_u32(&mut out, v as u32)?;
    }
    write_u32(&mut out, flags)?;
    write_tensor_list(&mut out, &encoder.tensor_entries())?;
    write_tensor_list(&mut out, &decoder.tensor_entries())?;
    out.flush()?;
    Ok(())
}

/// Reads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<(EncoderParams, DecoderParams)> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 5];
    read_exact(&mut input, &mut magic, "magic")?;
    if &magic != MAGIC {
        return Err(Error::MalformedFile {
            what: "checkpoint",
            detail: format!("bad magic {magic:?}"),
        });
    }
    let mut fields = [0u32; 8];
    for f in fields.iter_mut() {
        *f = read_u32(&mut input)?;
    }
    let dims = EstimatorDims {
        window_len: fields[0] as usize,
        d_model: fields[1] as usize,
        n_heads: fields[2] as usize,
        n_trunc: fields[3] as usize,
        n_subcarriers: fields[4] as usize,
        n_tx: fields[5] as usize,
        n_paths: fields[6] as usize,
        use_slot_embedding: fields[7] & SLOT_EMBEDDING_FLAG != 0,
    };
    dims.validate().map_err(|e| Error::MalformedFile {
        what: "checkpoint",
        detail: format!("dimension header rejected: {e}"),
    })?;
    let mut encoder = EncoderParams::zeros(dims)?;
    let mut decoder = DecoderParams::zeros(dims)?;
    let entries = read_tensor_list(&mut input)?;
    encoder.load_tensor_entries(&entries)?;
    let entries = read_tensor_list(&mut input)?;
    decoder.load_tensor_entries(&entries)?;
    let mut trailing = [0u8; 1];
    if input.read(&mut trailing)? != 0 {
        return Err(Error::MalformedFile {
            what: "checkpoint",
            detail: "trailing bytes after the decoder tensors".into(),
        });
    }
    Ok((encoder, decoder))
}

fn write_tensor_list(out: &mut impl Write, entries: &[(String, Vec<f64>)]) -> Result<()> {
    write_u32(out, entries.len() as u32)?;
    for (name, values) in entries {
        let bytes = name.as_bytes();
        out.write_all(&(bytes.len() as u16).to_le_bytes())?;
        out.write_all(bytes)?;
        write_u32(out, values.len() as u32)?;
        for v in values {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_tensor_list(input: &mut impl Read) -> Result<Vec<(String, Vec<f64>)>> {
    let count = read_u32(input)? as usize;
    if count > 4096 {
        return Err(Error::MalformedFile {
            what: "checkpoint",
            detail: format!("implausible tensor count {count}"),
        });
    }
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let mut len_bytes = [0u8; 2];
        read_exact(input, &mut len_bytes, "tensor name length")?;
        let mut name_bytes = vec![0u8; u16::from_le_bytes(len_bytes) as usize];
        read_exact(input, &mut name_bytes, "tensor name")?;
        let name = String::from_utf8(name_bytes).map_err(|_| Error::MalformedFile {
            what: "checkpoint",
            detail: "tensor name is not UTF-8".into(),
        })?;
        let values_len = read_u32(input)? as usize;
        let mut values = Vec::with_capacity(values_len);
        let mut buf = [0u8; 8];
        for _ in 0..values_len {
            read_exact(input, &mut buf, "tensor values")?;
            values.push(f64::from_le_bytes(buf));
        }
        entries.push((name, values));
    }
    Ok(entries)
}

fn write_u32(out: &mut impl Write, v: u32) -> Result<()> {
    out.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_u32(input: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    read_exact(input, &mut buf, "u32 field")?;
    Ok(u32::from_le_bytes(buf))
}

fn read_exact(input: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    input.read_exact(buf).map_err(|e| Error::MalformedFile {
        what: "checkpoint",
        detail: format!("truncated while reading {what}: {e}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fresh_pair(seed: u64, slot_embedding: bool) -> (EncoderParams, DecoderParams) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dims = EstimatorDims {
            use_slot_embedding: slot_embedding,
            ..EstimatorDims::micro()
        };
        (
            EncoderParams::init(dims, &mut rng).unwrap(),
            DecoderParams::init(dims, &mut rng).unwrap(),
        )
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weights.bin");
        for slot_embedding in [true, false] {
            let (encoder, decoder) = fresh_pair(1, slot_embedding);
            save_checkpoint(&path, &encoder, &decoder).unwrap();
            let (enc_back, dec_back) = load_checkpoint(&path).unwrap();
            assert_eq!(enc_back.dims, encoder.dims);
            assert_eq!(enc_back.flatten(), encoder.flatten());
            assert_eq!(dec_back.flatten(), decoder.flatten());
            assert_eq!(enc_back.norm.eps, encoder.norm.eps);
        }
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weights.bin");
        let (encoder, decoder) = fresh_pair(2, true);
        save_checkpoint(&path, &encoder, &decoder).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[0] ^= 0xff;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::MalformedFile { .. })
        ));
    }

    #[test]
    fn rejects_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weights.bin");
        let (encoder, decoder) = fresh_pair(3, true);
        save_checkpoint(&path, &encoder, &decoder).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 9]).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::MalformedFile { .. })
        ));
    }

    #[test]
    fn rejects_renamed_tensor() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("weights.bin");
        let (encoder, decoder) = fresh_pair(4, true);
        save_checkpoint(&path, &encoder, &decoder).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        // First tensor name starts right after magic (5), dims (32), tensor
        // count (4), and the name length prefix (2).
        let name_start = 5 + 32 + 4 + 2;
        assert_eq!(&bytes[name_start..name_start + 10], b"fc1.weight");
        bytes[name_start] = b'x';
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(
            load_checkpoint(&path),
            Err(Error::MalformedFile { .. })
        ));
    }
}
