//! Channel reconstruction quality metrics.

use num_complex::Complex64;

use crate::channel::ChannelMatrix;
use crate::error::{Error, Result};

/// Normalized mean squared error `‖Ĥ-H‖_F² / ‖H‖_F²` of one estimate.
pub fn nmse(truth: &ChannelMatrix, estimate: &ChannelMatrix) -> Result<f64> {
    check_shapes(truth, estimate)?;
    let denom = truth.frob_sq();
    if denom == 0.0 {
        return Err(Error::ZeroEnergyChannel);
    }
    let num: f64 = truth
        .entries
        .iter()
        .zip(estimate.entries.iter())
        .map(|(t, e)| (e - t).norm_sqr())
        .sum();
    Ok(num / denom)
}

/// Mean of per-sample NMSE values over a batch of (truth, estimate) pairs.
pub fn nmse_batch(pairs: &[(&ChannelMatrix, &ChannelMatrix)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::InvalidConfig("empty batch in nmse_batch".into()));
    }
    let mut acc = 0.0;
    for (truth, estimate) in pairs {
        acc += nmse(truth, estimate)?;
    }
    Ok(acc / pairs.len() as f64)
}

/// Linear power ratio to decibels; zero maps to `-inf`.
pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Decibel value as text, with `-inf` spelled out for CSV portability.
pub fn db_string(db: f64) -> String {
    if db == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{db}")
    }
}

/// Mean over subcarriers of `|ĥ[s]^H h[s]| / (‖ĥ[s]‖ ‖h[s]‖)`.
pub fn cosine_similarity(truth: &ChannelMatrix, estimate: &ChannelMatrix) -> Result<f64> {
    check_shapes(truth, estimate)?;
    let mut acc = 0.0;
    for (t_row, e_row) in truth.entries.rows().into_iter().zip(estimate.entries.rows()) {
        // Rows store h[s]^H; the conjugations cancel inside the magnitude.
        let mut inner = Complex64::new(0.0, 0.0);
        let mut t_norm = 0.0;
        let mut e_norm = 0.0;
        for (t, e) in t_row.iter().zip(e_row) {
            inner += e.conj() * t;
            t_norm += t.norm_sqr();
            e_norm += e.norm_sqr();
        }
        if t_norm == 0.0 || e_norm == 0.0 {
            return Err(Error::ZeroEnergyChannel);
        }
        acc += inner.norm() / (t_norm.sqrt() * e_norm.sqrt());
    }
    Ok(acc / truth.n_subcarriers() as f64)
}

fn check_shapes(truth: &ChannelMatrix, estimate: &ChannelMatrix) -> Result<()> {
    if truth.entries.dim() != estimate.entries.dim() {
        return Err(Error::DimensionMismatch(format!(
            "truth is {:?}, estimate is {:?}",
            truth.entries.dim(),
            estimate.entries.dim()
        )));
    }
    Ok(())
}
