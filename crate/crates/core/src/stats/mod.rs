//! Numerical primitives shared by every analysis: normal and Fisher
//! distribution functions, location estimators, the Wilcoxon–Mann–Whitney
//! rank test and seeded random streams.

mod distribution;
mod location;
mod rank;
mod rng;

pub use distribution::{
    f_cdf, f_sf, normal_cdf, normal_quantile, normal_sf, normal_upper_quantile,
};
pub use location::{
    huber_location, location_estimate, mad, mean, median, LocationKind, HUBER_TUNING,
    MAD_CONSISTENCY,
};
pub use rank::{wmw_test, wmw_test_using, Alternative, WmwMethod, EXACT_WMW_MAX_TOTAL};
pub use rng::{mix_seed, sample_normal, RngStream};

pub(crate) use distribution::phi_upper;

use crate::error::{domain, Result};

pub(crate) fn check_sample(sample: &[f64], what: &str) -> Result<()> {
    if sample.is_empty() {
        return Err(domain(format!("{what}: empty sample")));
    }
    if let Some(i) = sample.iter().position(|v| !v.is_finite()) {
        return Err(domain(format!("{what}: non-finite value at index {i}")));
    }
    Ok(())
}
