use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::stats::{self, check_sample, phi_upper, Alternative, LocationKind};

/// Default binarization threshold of the truncated mean.
pub const DEFAULT_THRESHOLD: f64 = 0.0;

/// Block summary statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Summary {
    Mean,
    Median,
    Huber,
    /// Fraction of values strictly above `threshold`.
    TruncatedMean { threshold: f64 },
    /// `(mean, truncated mean)`.
    Bivariate { threshold: f64 },
}

impl Summary {
    pub fn truncated() -> Self {
        Summary::TruncatedMean {
            threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn bivariate() -> Self {
        Summary::Bivariate {
            threshold: DEFAULT_THRESHOLD,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Summary::Mean => "mean",
            Summary::Median => "median",
            Summary::Huber => "huber",
            Summary::TruncatedMean { .. } => "truncated_mean",
            Summary::Bivariate { .. } => "bivariate",
        }
    }

    pub fn is_scalar(&self) -> bool {
        !matches!(self, Summary::Bivariate { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SummaryValue {
    Scalar(f64),
    Pair(f64, f64),
}

impl SummaryValue {
    pub fn scalar(self) -> Option<f64> {
        match self {
            SummaryValue::Scalar(v) => Some(v),
            SummaryValue::Pair(..) => None,
        }
    }

    pub fn pair(self) -> Option<(f64, f64)> {
        match self {
            SummaryValue::Pair(a, b) => Some((a, b)),
            SummaryValue::Scalar(_) => None,
        }
    }
}

/// Summary of one block with its index in the partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BlockSummary {
    pub block: usize,
    pub kind: Summary,
    pub value: SummaryValue,
}

pub fn truncated_mean(values: &[f64], threshold: f64) -> f64 {
    values.iter().filter(|&&x| x > threshold).count() as f64 / values.len() as f64
}

pub fn summarize_block(values: &[f64], kind: Summary) -> Result<SummaryValue> {
    check_sample(values, "block summary")?;
    Ok(summarize_unchecked(values, kind))
}

pub(crate) fn summarize_unchecked(values: &[f64], kind: Summary) -> SummaryValue {
    match kind {
        Summary::Mean => SummaryValue::Scalar(stats::mean(values)),
        Summary::Median => SummaryValue::Scalar(stats::median(values)),
        Summary::Huber => {
            SummaryValue::Scalar(stats::huber_location(values, stats::HUBER_TUNING))
        }
        Summary::TruncatedMean { threshold } => {
            SummaryValue::Scalar(truncated_mean(values, threshold))
        }
        Summary::Bivariate { threshold } => {
            SummaryValue::Pair(stats::mean(values), truncated_mean(values, threshold))
        }
    }
}

impl From<LocationKind> for Summary {
    fn from(kind: LocationKind) -> Self {
        match kind {
            LocationKind::Mean => Summary::Mean,
            LocationKind::Median => Summary::Median,
            LocationKind::Huber => Summary::Huber,
        }
    }
}

fn check_level(alpha: f64, count: usize, sigma0: f64, mu0: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(domain(format!("alpha = {alpha} outside (0, 1)")));
    }
    if count == 0 {
        return Err(domain("number of tests must be at least 1"));
    }
    if !(sigma0 > 0.0 && sigma0.is_finite()) || !mu0.is_finite() {
        return Err(domain(format!("need finite mu0 and sigma0 > 0, got ({mu0}, {sigma0})")));
    }
    Ok(())
}

/// Bonferroni critical value of one small-region test: `μ0 + σ0 Φ⁻¹(1 − α/M)`.
pub fn srw_critical_value(alpha: f64, regions: usize, mu0: f64, sigma0: f64) -> Result<f64> {
    check_level(alpha, regions, sigma0, mu0)?;
    Ok(mu0 + sigma0 * stats::normal_upper_quantile(alpha / regions as f64)?)
}

/// Bonferroni critical value of a block mean: `μ0 + (σ0/√b) Φ⁻¹(1 − α/m)`.
pub fn bwa_critical_value(
    alpha: f64,
    blocks: usize,
    block_size: usize,
    mu0: f64,
    sigma0: f64,
) -> Result<f64> {
    check_level(alpha, blocks, sigma0, mu0)?;
    if block_size == 0 {
        return Err(domain("block size must be at least 1"));
    }
    let z = stats::normal_upper_quantile(alpha / blocks as f64)?;
    Ok(mu0 + sigma0 / (block_size as f64).sqrt() * z)
}

/// Standardized block statistic `√b (t − μ0) / σ0`.
pub fn block_z_score(t: f64, block_size: usize, mu0: f64, sigma0: f64) -> Result<f64> {
    if !(sigma0 > 0.0) {
        return Err(domain(format!("sigma0 must be positive, got {sigma0}")));
    }
    if block_size == 0 || !t.is_finite() || !mu0.is_finite() {
        return Err(domain("block_z_score: invalid block size or statistic"));
    }
    Ok((block_size as f64).sqrt() * (t - mu0) / sigma0)
}

/// One-sided p-value `1 − Φ(√b (t − μ0)/σ0)` of a block statistic.
///
/// Exact for the block mean under normal noise. Median and Huber statistics
/// are mapped through the same function; their larger variance makes this
/// conservative.
pub fn block_z_pvalue(t: f64, block_size: usize, mu0: f64, sigma0: f64) -> Result<f64> {
    Ok(phi_upper(block_z_score(t, block_size, mu0, sigma0)?))
}

/// Pooled-variance two-sample z statistic of `treatment` versus `control`
/// and its p-value. With zero pooled variance the comparison is undefined and
/// reported as `(0, 1)`.
pub fn two_sample_z(control: &[f64], treatment: &[f64], alternative: Alternative) -> Result<(f64, f64)> {
    check_sample(control, "two_sample_z control")?;
    check_sample(treatment, "two_sample_z treatment")?;
    let (nc, nt) = (control.len(), treatment.len());
    if nc + nt < 3 {
        return Err(domain("two_sample_z needs at least three observations"));
    }
    Ok(two_sample_z_unchecked(control, treatment, alternative))
}

pub(crate) fn two_sample_z_unchecked(
    control: &[f64],
    treatment: &[f64],
    alternative: Alternative,
) -> (f64, f64) {
    let (nc, nt) = (control.len() as f64, treatment.len() as f64);
    let (mc, mt) = (stats::mean(control), stats::mean(treatment));
    if is_constant(control) && is_constant(treatment) {
        return (0.0, 1.0);
    }
    let ss: f64 = control.iter().map(|x| (x - mc).powi(2)).sum::<f64>()
        + treatment.iter().map(|x| (x - mt).powi(2)).sum::<f64>();
    let pooled_var = ss / (nc + nt - 2.0);
    let se = (pooled_var * (1.0 / nc + 1.0 / nt)).sqrt();
    let z = (mt - mc) / se;
    let p = match alternative {
        Alternative::Greater => phi_upper(z),
        Alternative::Less => phi_upper(-z),
        Alternative::TwoSided => (2.0 * phi_upper(z.abs())).min(1.0),
    };
    (z, p)
}

pub(crate) fn is_constant(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncated_mean_counts_strictly_positive() {
        let v = summarize_block(&[-1.0, 2.0, 3.0, -4.0], Summary::truncated()).unwrap();
        assert_eq!(v, SummaryValue::Scalar(0.5));
        let z = summarize_block(&[0.0; 5], Summary::truncated()).unwrap();
        assert_eq!(z, SummaryValue::Scalar(0.0));
    }

    #[test]
    fn bivariate_pairs_mean_and_fraction() {
        let v = summarize_block(&[-1.0, 2.0, 3.0, -4.0], Summary::bivariate()).unwrap();
        assert_eq!(v, SummaryValue::Pair(0.0, 0.5));
    }

    #[test]
    fn threshold_is_configurable() {
        let v = summarize_block(&[0.5, 1.5, 2.5], Summary::TruncatedMean { threshold: 1.0 });
        assert_eq!(v.unwrap().scalar().unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn srw_critical_values() {
        assert!((srw_critical_value(0.05, 64, 0.0, 1.0).unwrap() - 3.16).abs() < 0.005);
        assert!((srw_critical_value(0.05, 1, 0.0, 1.0).unwrap() - 1.6449).abs() < 0.001);
        let c1 = srw_critical_value(0.05, 100, 2.0, 1.0).unwrap();
        let c2 = srw_critical_value(0.05, 100, 2.0, 2.0).unwrap();
        assert!(((c2 - 2.0) - 2.0 * (c1 - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn bwa_critical_values() {
        assert!((bwa_critical_value(0.05, 6, 12, 0.0, 1.0).unwrap() - 0.691).abs() < 0.001);
        assert!((bwa_critical_value(0.05, 6, 8, 0.0, 1.0).unwrap() - 0.846).abs() < 0.001);
        let srw = srw_critical_value(0.05, 37, 0.3, 1.7).unwrap();
        let bwa = bwa_critical_value(0.05, 37, 1, 0.3, 1.7).unwrap();
        assert_eq!(srw, bwa);
    }

    #[test]
    fn critical_value_domain_errors() {
        assert!(srw_critical_value(0.0, 10, 0.0, 1.0).is_err());
        assert!(srw_critical_value(0.05, 0, 0.0, 1.0).is_err());
        assert!(srw_critical_value(0.05, 10, 0.0, 0.0).is_err());
        assert!(bwa_critical_value(0.05, 10, 0, 0.0, 1.0).is_err());
        assert!(block_z_pvalue(1.0, 4, 0.0, -1.0).is_err());
    }

    #[test]
    fn z_pvalue_boundaries() {
        assert_eq!(block_z_pvalue(0.3, 9, 0.3, 2.0).unwrap(), 0.5);
        let c = bwa_critical_value(0.05, 6, 12, 0.0, 1.0).unwrap();
        let p = block_z_pvalue(c, 12, 0.0, 1.0).unwrap();
        assert!((p - 0.05 / 6.0).abs() < 1e-12);
        // top-left block of the 8x8 example: mean 36.07/12
        let p = block_z_pvalue(36.07 / 12.0, 12, 0.0, 1.0).unwrap();
        assert!(p < 1e-20 && p > 0.0);
    }

    #[test]
    fn two_sample_z_constant_groups() {
        let (z, p) = two_sample_z(&[1.0; 4], &[1.0; 4], Alternative::Greater).unwrap();
        assert_eq!((z, p), (0.0, 1.0));
        let (_, p) = two_sample_z(&[0.0; 4], &[2.0; 4], Alternative::Greater).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn two_sample_z_direction() {
        let c = [0.1, -0.2, 0.05, 0.0, -0.1];
        let t = [1.1, 0.9, 1.2, 0.8, 1.0];
        let (z, p) = two_sample_z(&c, &t, Alternative::Greater).unwrap();
        assert!(z > 5.0 && p < 1e-6);
        let (_, p_less) = two_sample_z(&c, &t, Alternative::Less).unwrap();
        assert!(p_less > 0.99);
    }
}
