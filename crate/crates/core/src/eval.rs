//! Fit scores and dataset splitting.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math::{mean, mean_square};
use crate::model::Dataset;

/// Scores for one identified model on one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    /// Output best-fit rate against the measured output, percent.
    pub bfr_output: f64,
    /// Output best-fit rate against the noise-free output, when it is known.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bfr_output_noise_free: Option<f64>,
    /// Scheduling-path best-fit rate, percent, when the true path is known.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub bfr_scheduling: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub snr_db: Option<f64>,
    /// Fraction of samples whose decoded grid level equals the true level.
    /// Supplementary; not a best-fit rate.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub state_accuracy: Option<f64>,
}

/// Best-fit rate `100 · max(0, 1 - ‖x - x̂‖ / ‖x - mean(x)‖)`.
pub fn bfr(x_true: &[f64], x_est: &[f64]) -> Result<f64> {
    if x_true.len() != x_est.len() {
        return Err(Error::DimensionMismatch {
            expected: x_true.len(),
            actual: x_est.len(),
            context: "estimate length",
        });
    }
    if x_true.len() < 2 {
        return Err(invalid("best-fit rate needs at least two samples"));
    }
    let xbar = mean(x_true);
    let den = x_true.iter().map(|x| (x - xbar).powi(2)).sum::<f64>().sqrt();
    if den == 0.0 || !den.is_finite() {
        return Err(Error::ConstantReference);
    }
    let num = x_true
        .iter()
        .zip(x_est)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    Ok(100.0 * (1.0 - num / den).max(0.0))
}

/// `10·log10(mean(y²) / mean(e²))`.
pub fn snr_db(y_clean: &[f64], e: &[f64]) -> Result<f64> {
    if y_clean.is_empty() || e.is_empty() {
        return Err(invalid("SNR needs non-empty signal and noise"));
    }
    let p_e = mean_square(e);
    if p_e == 0.0 {
        return Err(Error::ZeroNoisePower);
    }
    Ok(10.0 * (mean_square(y_clean) / p_e).log10())
}

/// Contiguous prefix/suffix split. The suffix is a standalone record: its
/// regressors are zero-padded again at its first sample.
pub fn split(data: &Dataset, n_train: usize) -> Result<(Dataset, Dataset)> {
    let n = data.len();
    if n_train == 0 || n_train >= n {
        return Err(invalid(format!(
            "training size {n_train} must lie in [1, {}]",
            n.saturating_sub(1)
        )));
    }
    let part = |r: std::ops::Range<usize>| Dataset {
        u: data.u[r.clone()].to_vec(),
        y: data.y[r.clone()].to_vec(),
        p_true: data.p_true.as_ref().map(|p| p[r].to_vec()),
        seed: data.seed,
    };
    Ok((part(0..n_train), part(n_train..n)))
}

/// Fraction of positions where two equal-length sequences agree exactly.
pub fn agreement(a: &[f64], b: &[f64]) -> f64 {
    let hits = a.iter().zip(b).filter(|(x, y)| x == y).count();
    hits as f64 / a.len().max(1) as f64
}
