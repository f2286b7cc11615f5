//! Scalar quantization of path parameters and feedback payload packing.
//!
//! Every parameter family uses a uniform codebook `{q · step : 0 ≤ q < 2^Q}`
//! anchored at zero. Angles (θ, φ) live on a circle, so their codebooks wrap
//! modulo 2^Q; delays and path losses saturate at the domain edges. Codebooks
//! are kept logical (bits plus step width): delay budgets of forty-plus bits
//! are routine and materialising 2^40 entries is neither possible nor needed.

use serde::{Deserialize, Serialize};

use crate::channel::{ParametricCsi, PathParams};
use crate::config::ScenarioConfig;
use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Bits per parameter family, `(Q_θ, Q_τ, Q_β, Q_φ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitAllocation {
    pub q_theta: u32,
    pub q_tau: u32,
    pub q_beta: u32,
    pub q_phi: u32,
}

impl BitAllocation {
    pub fn uniform(bits: u32) -> Self {
        Self {
            q_theta: bits,
            q_tau: bits,
            q_beta: bits,
            q_phi: bits,
        }
    }

    /// Total bits per path.
    pub fn total(&self) -> u32 {
        self.q_theta + self.q_tau + self.q_beta + self.q_phi
    }

    pub fn as_array(&self) -> [u32; 4] {
        [self.q_theta, self.q_tau, self.q_beta, self.q_phi]
    }
}

/// How a codebook treats values outside `[0, 2^Q · step)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EdgeRule {
    /// Periodic domain: indices reduce modulo 2^Q.
    Wrap,
    /// Bounded domain: indices clamp to `[0, 2^Q - 1]`.
    Saturate,
}

/// A uniform scalar codebook stored as bit width and step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarCodebook {
    bits: u32,
    step: f64,
    edge: EdgeRule,
}

impl ScalarCodebook {
    fn new(bits: u32, domain_span: f64, edge: EdgeRule) -> Self {
        Self {
            bits,
            step: domain_span / 2f64.powi(bits as i32),
            edge,
        }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> u64 {
        1u64 << self.bits
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Reconstruction value of index `q`.
    pub fn value(&self, q: u64) -> f64 {
        q as f64 * self.step
    }

    /// Nearest-index quantization with ties resolved toward the lower index.
    pub fn quantize(&self, x: f64) -> u64 {
        let t = x / self.step;
        let base = t.floor();
        let q = base as i64 + i64::from(t - base > 0.5);
        match self.edge {
            EdgeRule::Wrap => (q.rem_euclid(self.len() as i64)) as u64,
            EdgeRule::Saturate => q.clamp(0, self.len() as i64 - 1) as u64,
        }
    }

    /// Full codebook as values. Only sensible for small bit widths; callers
    /// quantizing against realistic budgets should stay on the logical form.
    pub fn materialize(&self) -> Vec<f64> {
        assert!(self.bits <= 24, "codebook too large to materialize");
        (0..self.len()).map(|q| self.value(q)).collect()
    }
}

/// The four per-family codebooks implied by a scenario and a bit split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Codebooks {
    pub theta: ScalarCodebook,
    pub tau: ScalarCodebook,
    pub beta: ScalarCodebook,
    pub phi: ScalarCodebook,
}

impl Codebooks {
    pub fn new(cfg: &ScenarioConfig, alloc: &BitAllocation) -> Self {
        Self {
            theta: ScalarCodebook::new(alloc.q_theta, TWO_PI, EdgeRule::Wrap),
            tau: ScalarCodebook::new(alloc.q_tau, cfg.tau_max_s, EdgeRule::Saturate),
            beta: ScalarCodebook::new(alloc.q_beta, cfg.beta_max, EdgeRule::Saturate),
            phi: ScalarCodebook::new(alloc.q_phi, TWO_PI, EdgeRule::Wrap),
        }
    }

    /// The bit split the books were built with.
    pub fn alloc(&self) -> BitAllocation {
        BitAllocation {
            q_theta: self.theta.bits(),
            q_tau: self.tau.bits(),
            q_beta: self.beta.bits(),
            q_phi: self.phi.bits(),
        }
    }
}

/// Codebook indices for one path, in θ, τ, β, φ order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedPath {
    pub aod_idx: u64,
    pub delay_idx: u64,
    pub path_loss_idx: u64,
    pub phase_idx: u64,
}

/// Quantized CSI for all paths.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedCsi {
    pub paths: Vec<QuantizedPath>,
}

/// Quantize every path parameter against the given codebooks.
pub fn quantize_csi(csi: &ParametricCsi, books: &Codebooks) -> QuantizedCsi {
    QuantizedCsi {
        paths: csi
            .paths
            .iter()
            .map(|p| QuantizedPath {
                aod_idx: books.theta.quantize(p.aod_rad),
                delay_idx: books.tau.quantize(p.delay_s),
                path_loss_idx: books.beta.quantize(p.path_loss),
                phase_idx: books.phi.quantize(p.phase_rad),
            })
            .collect(),
    }
}

/// Reconstruct parameter values from codebook indices.
pub fn dequantize_csi(q: &QuantizedCsi, books: &Codebooks) -> ParametricCsi {
    ParametricCsi {
        paths: q
            .paths
            .iter()
            .map(|p| PathParams {
                aod_rad: books.theta.value(p.aod_idx),
                delay_s: books.tau.value(p.delay_idx),
                path_loss: books.beta.value(p.path_loss_idx),
                phase_rad: books.phi.value(p.phase_idx),
            })
            .collect(),
    }
}

/// Feedback message: packed codebook indices for all paths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackPayload {
    pub bytes: Vec<u8>,
    /// Number of meaningful bits; the final byte is zero-padded.
    pub bit_len: usize,
}

/// Bits a payload occupies before byte padding.
pub fn payload_bits(alloc: &BitAllocation, n_paths: usize) -> usize {
    alloc.total() as usize * n_paths
}

/// Pack indices MSB-first in path order, θ then τ then β then φ per path,
/// zero-padding the final byte.
pub fn encode_payload(q: &QuantizedCsi, alloc: &BitAllocation) -> FeedbackPayload {
    let mut w = BitWriter::default();
    for p in &q.paths {
        w.push(p.aod_idx, alloc.q_theta);
        w.push(p.delay_idx, alloc.q_tau);
        w.push(p.path_loss_idx, alloc.q_beta);
        w.push(p.phase_idx, alloc.q_phi);
    }
    FeedbackPayload {
        bit_len: w.bit_len,
        bytes: w.finish(),
    }
}

/// Inverse of [`encode_payload`]. Fails if `bytes` is too short for
/// `n_paths` paths under `alloc`.
pub fn decode_payload(
    bytes: &[u8],
    alloc: &BitAllocation,
    n_paths: usize,
) -> Result<QuantizedCsi> {
    let needed = payload_bits(alloc, n_paths);
    let available = bytes.len() * 8;
    if available < needed {
        return Err(Error::TruncatedPayload { needed, available });
    }
    let mut r = BitReader { bytes, pos: 0 };
    let paths = (0..n_paths)
        .map(|_| QuantizedPath {
            aod_idx: r.pull(alloc.q_theta),
            delay_idx: r.pull(alloc.q_tau),
            path_loss_idx: r.pull(alloc.q_beta),
            phase_idx: r.pull(alloc.q_phi),
        })
        .collect();
    Ok(QuantizedCsi { paths })
}

/// Feedback volume of the random-vector-quantization baseline,
/// `ceil((N_f N_t - 1) / 3 · SNR_dB)` bits, floored at zero.
pub fn rvq_feedback_bits(n_subcarriers: usize, n_tx: usize, snr_db: f64) -> u64 {
    let dims = (n_subcarriers * n_tx - 1) as f64;
    (dims / 3.0 * snr_db).ceil().max(0.0) as u64
}

#[derive(Default)]
struct BitWriter {
    bytes: Vec<u8>,
    bit_len: usize,
}

impl BitWriter {
    fn push(&mut self, value: u64, bits: u32) {
        debug_assert!(bits == 64 || value < (1u64 << bits), "index overflows width");
        for i in (0..bits).rev() {
            let bit = (value >> i) & 1;
            let byte = self.bit_len / 8;
            if byte == self.bytes.len() {
                self.bytes.push(0);
            }
            self.bytes[byte] |= (bit as u8) << (7 - self.bit_len % 8);
            self.bit_len += 1;
        }
    }

    fn finish(self) -> Vec<u8> {
        self.bytes
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl BitReader<'_> {
    fn pull(&mut self, bits: u32) -> u64 {
        let mut v = 0u64;
        for _ in 0..bits {
            let bit = (self.bytes[self.pos / 8] >> (7 - self.pos % 8)) & 1;
            v = (v << 1) | bit as u64;
            self.pos += 1;
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::sample_parametric_csi;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn desk() -> ScenarioConfig {
        ScenarioConfig::desk_scale()
    }

    #[test]
    fn two_bit_angle_codebook_is_quarter_turns() {
        let books = Codebooks::new(&desk(), &BitAllocation::uniform(2));
        let values = books.theta.materialize();
        let expected = [0.0, TWO_PI / 4.0, TWO_PI / 2.0, 3.0 * TWO_PI / 4.0];
        assert_eq!(values.len(), 4);
        for (v, e) in values.iter().zip(expected) {
            assert_abs_diff_eq!(v, &e, epsilon = 1e-15);
        }
    }

    #[test]
    fn angle_near_full_turn_wraps_to_zero() {
        let books = Codebooks::new(&desk(), &BitAllocation::uniform(3));
        assert_eq!(books.theta.quantize(TWO_PI - 1e-9), 0);
        assert_eq!(books.phi.quantize(TWO_PI + 0.1), 0);
        assert_eq!(books.theta.quantize(-0.1), 0);
    }

    #[test]
    fn bounded_codebooks_saturate() {
        let cfg = desk();
        let books = Codebooks::new(&cfg, &BitAllocation::uniform(2));
        assert_eq!(books.beta.quantize(-0.3), 0);
        assert_eq!(books.beta.quantize(1.2 * cfg.beta_max), 3);
        assert_eq!(books.tau.quantize(cfg.tau_max_s * 2.0), 3);
    }

    #[test]
    fn midpoint_ties_resolve_to_lower_index() {
        // β_max = 1, two bits: step is exactly 0.25 in binary floating point,
        // so 0.375 sits exactly on the cell boundary.
        let books = Codebooks::new(&desk(), &BitAllocation::uniform(2));
        assert_eq!(books.beta.quantize(0.375), 1);
        assert_eq!(books.beta.quantize(0.375 + 1e-12), 2);
    }

    #[test]
    fn top_cell_saturation_costs_up_to_one_full_step() {
        // The uniform grid tops out one step below the domain edge, so the
        // edge itself reconstructs with a full-step error rather than the
        // half-step bound that holds over the covered cells.
        let cfg = desk();
        let books = Codebooks::new(&cfg, &BitAllocation::uniform(4));
        let q = books.tau.quantize(cfg.tau_max_s);
        assert_eq!(q, 15);
        let err = cfg.tau_max_s - books.tau.value(q);
        assert_relative_eq!(err, books.tau.step(), max_relative = 1e-12);
    }

    #[test]
    fn delay_codebook_stays_logical_at_large_widths() {
        let cfg = desk();
        let alloc = BitAllocation {
            q_theta: 20,
            q_tau: 44,
            q_beta: 30,
            q_phi: 34,
        };
        let books = Codebooks::new(&cfg, &alloc);
        assert_eq!(books.tau.len(), 1u64 << 44);
        let idx = books.tau.quantize(0.6 * cfg.tau_max_s);
        let back = books.tau.value(idx);
        assert!((back - 0.6 * cfg.tau_max_s).abs() <= books.tau.step() / 2.0);
    }

    #[test]
    fn golden_single_path_payload() {
        let q = QuantizedCsi {
            paths: vec![QuantizedPath {
                aod_idx: 1,
                delay_idx: 2,
                path_loss_idx: 3,
                phase_idx: 0,
            }],
        };
        let payload = encode_payload(&q, &BitAllocation::uniform(2));
        assert_eq!(payload.bytes, vec![0x6C]);
        assert_eq!(payload.bit_len, 8);
    }

    /// Independent oracle: build the payload as a binary string, then chunk.
    fn encode_by_string(q: &QuantizedCsi, alloc: &BitAllocation) -> Vec<u8> {
        fn field(v: u64, width: u32) -> String {
            // format! prints at least one digit, but a zero-width field
            // contributes no bits at all.
            if width == 0 {
                String::new()
            } else {
                format!("{:0w$b}", v, w = width as usize)
            }
        }
        let mut bits = String::new();
        for p in &q.paths {
            bits += &field(p.aod_idx, alloc.q_theta);
            bits += &field(p.delay_idx, alloc.q_tau);
            bits += &field(p.path_loss_idx, alloc.q_beta);
            bits += &field(p.phase_idx, alloc.q_phi);
        }
        while bits.len() % 8 != 0 {
            bits.push('0');
        }
        bits.as_bytes()
            .chunks(8)
            .map(|c| u8::from_str_radix(std::str::from_utf8(c).unwrap(), 2).unwrap())
            .collect()
    }

    #[test]
    fn payload_matches_bit_string_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let alloc = BitAllocation {
                q_theta: rng.gen_range(0..12),
                q_tau: rng.gen_range(0..20),
                q_beta: rng.gen_range(0..9),
                q_phi: rng.gen_range(0..9),
            };
            let n_paths = rng.gen_range(1..5);
            let q = QuantizedCsi {
                paths: (0..n_paths)
                    .map(|_| QuantizedPath {
                        aod_idx: rng.gen_range(0..1u64 << alloc.q_theta),
                        delay_idx: rng.gen_range(0..1u64 << alloc.q_tau),
                        path_loss_idx: rng.gen_range(0..1u64 << alloc.q_beta),
                        phase_idx: rng.gen_range(0..1u64 << alloc.q_phi),
                    })
                    .collect(),
            };
            let payload = encode_payload(&q, &alloc);
            assert_eq!(payload.bytes, encode_by_string(&q, &alloc));
            assert_eq!(payload.bit_len, payload_bits(&alloc, n_paths));
            let decoded = decode_payload(&payload.bytes, &alloc, n_paths).unwrap();
            assert_eq!(decoded, q);
        }
    }

    #[test]
    fn truncated_payload_is_rejected() {
        let alloc = BitAllocation::uniform(6);
        let q = QuantizedCsi {
            paths: vec![
                QuantizedPath {
                    aod_idx: 5,
                    delay_idx: 9,
                    path_loss_idx: 1,
                    phase_idx: 63,
                },
                QuantizedPath {
                    aod_idx: 0,
                    delay_idx: 0,
                    path_loss_idx: 0,
                    phase_idx: 0,
                },
            ],
        };
        let payload = encode_payload(&q, &alloc);
        let err = decode_payload(&payload.bytes[..payload.bytes.len() - 1], &alloc, 2);
        assert!(matches!(
            err,
            Err(Error::TruncatedPayload {
                needed: 48,
                available: 40
            })
        ));
    }

    #[test]
    fn csi_quantization_round_trips_through_payload() {
        let cfg = desk();
        let alloc = BitAllocation {
            q_theta: 7,
            q_tau: 16,
            q_beta: 4,
            q_phi: 5,
        };
        let books = Codebooks::new(&cfg, &alloc);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let csi = sample_parametric_csi(&cfg, &mut rng);
        let q = quantize_csi(&csi, &books);
        let payload = encode_payload(&q, &alloc);
        let q2 = decode_payload(&payload.bytes, &alloc, cfg.n_paths).unwrap();
        assert_eq!(q, q2);
        let back = dequantize_csi(&q2, &books);
        for (orig, rec) in csi.paths.iter().zip(&back.paths) {
            assert!((orig.delay_s - rec.delay_s).abs() <= books.tau.step() / 2.0);
            assert!((orig.path_loss - rec.path_loss).abs() <= books.beta.step() / 2.0);
        }
    }

    #[test]
    fn rvq_bits_formula() {
        assert_eq!(rvq_feedback_bits(32, 16, 10.0), 1704);
        assert_eq!(rvq_feedback_bits(32, 16, 0.0), 0);
        assert_eq!(rvq_feedback_bits(32, 16, -5.0), 0);
        assert_eq!(rvq_feedback_bits(2, 2, 1.0), 1);
    }

    fn wrapped_error(x: f64, v: f64) -> f64 {
        let d = (x - v).rem_euclid(TWO_PI);
        d.min(TWO_PI - d)
    }

    proptest! {
        #[test]
        fn angle_error_bounded_by_half_step(x in 0.0..TWO_PI, bits in 1u32..12) {
            let books = Codebooks::new(&desk(), &BitAllocation::uniform(bits));
            let q = books.theta.quantize(x);
            prop_assert!(q < books.theta.len());
            let err = wrapped_error(x, books.theta.value(q));
            prop_assert!(err <= books.theta.step() / 2.0 + 1e-12);
        }

        #[test]
        fn bounded_error_half_step_over_covered_cells(u in 0.0..1.0f64, bits in 1u32..16) {
            let cfg = desk();
            let books = Codebooks::new(&cfg, &BitAllocation::uniform(bits));
            // Stay on the covered cells [0, max - step]: the top half cell
            // saturates and is tested separately.
            let x = u * (cfg.tau_max_s - books.tau.step());
            let q = books.tau.quantize(x);
            let err = (x - books.tau.value(q)).abs();
            prop_assert!(err <= books.tau.step() / 2.0 * (1.0 + 1e-12));
        }

        #[test]
        fn quantization_is_idempotent(x in -1.0..10.0f64, bits in 1u32..14) {
            let books = Codebooks::new(&desk(), &BitAllocation::uniform(bits));
            let q = books.theta.quantize(x);
            prop_assert_eq!(books.theta.quantize(books.theta.value(q)), q);
            let qb = books.beta.quantize(x);
            prop_assert_eq!(books.beta.quantize(books.beta.value(qb)), qb);
        }
    }
}
