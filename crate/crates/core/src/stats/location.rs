use serde::{Deserialize, Serialize};

use super::check_sample;
use crate::error::Result;

/// Tuning constant of the Huber ψ function (95% efficiency at the normal).
pub const HUBER_TUNING: f64 = 1.345;
/// Scales the MAD to a consistent estimate of σ under normality.
pub const MAD_CONSISTENCY: f64 = 1.4826;

const HUBER_TOL: f64 = 1e-9;
const HUBER_MAX_ITER: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocationKind {
    Mean,
    Median,
    Huber,
}

pub fn location_estimate(sample: &[f64], kind: LocationKind) -> Result<f64> {
    check_sample(sample, "location_estimate")?;
    Ok(match kind {
        LocationKind::Mean => mean(sample),
        LocationKind::Median => median(sample),
        LocationKind::Huber => huber_location(sample, HUBER_TUNING),
    })
}

pub fn mean(sample: &[f64]) -> f64 {
    sample.iter().sum::<f64>() / sample.len() as f64
}

/// Median; midpoint of the two central order statistics for even lengths.
pub fn median(sample: &[f64]) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Median absolute deviation from the median (unscaled).
pub fn mad(sample: &[f64]) -> f64 {
    let center = median(sample);
    let dev: Vec<f64> = sample.iter().map(|x| (x - center).abs()).collect();
    median(&dev)
}

/// Huber M-estimate of location with fixed scale `MAD_CONSISTENCY * MAD`.
///
/// Solves `Σ ψ_c((x − θ)/s) = 0` by iteratively reweighted averaging from the
/// median until successive iterates differ by less than 1e-9. A zero scale
/// (at least half the sample equal to the median) returns the median.
pub fn huber_location(sample: &[f64], tuning: f64) -> f64 {
    let mut theta = median(sample);
    let scale = MAD_CONSISTENCY * mad(sample);
    if scale == 0.0 {
        return theta;
    }
    let clip = tuning * scale;
    for _ in 0..HUBER_MAX_ITER {
        let (mut num, mut den) = (0.0, 0.0);
        for &x in sample {
            let r = (x - theta).abs();
            let w = if r <= clip { 1.0 } else { clip / r };
            num += w * x;
            den += w;
        }
        let next = num / den;
        let step = (next - theta).abs();
        theta = next;
        if step < HUBER_TOL {
            break;
        }
    }
    theta
}
