use serde::{Deserialize, Serialize};

use super::{check_sample, phi_upper};
use crate::error::Result;

/// Largest combined sample size for which [`wmw_test`] enumerates the exact
/// null distribution.
pub const EXACT_WMW_MAX_TOTAL: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    /// `x` tends to be larger than `y`.
    Greater,
    /// `x` tends to be smaller than `y`.
    Less,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WmwMethod {
    /// Exact when `|x| + |y| <= EXACT_WMW_MAX_TOTAL`, normal approximation otherwise.
    Auto,
    Exact,
    Normal,
}

/// Wilcoxon–Mann–Whitney rank-sum test of `x` against `y`.
pub fn wmw_test(x: &[f64], y: &[f64], alternative: Alternative) -> Result<f64> {
    wmw_test_using(x, y, alternative, WmwMethod::Auto)
}

pub fn wmw_test_using(
    x: &[f64],
    y: &[f64],
    alternative: Alternative,
    method: WmwMethod,
) -> Result<f64> {
    check_sample(x, "wmw_test x")?;
    check_sample(y, "wmw_test y")?;
    let n = x.len() + y.len();
    let exact = match method {
        WmwMethod::Auto => n <= EXACT_WMW_MAX_TOTAL,
        WmwMethod::Exact => true,
        WmwMethod::Normal => false,
    };
    let ranks = doubled_midranks(x, y);
    Ok(if exact {
        exact_p(&ranks, x.len(), alternative)
    } else {
        normal_p(&ranks, x.len(), y.len(), alternative)
    })
}

/// Pooled midranks times two (so ties stay integral), `x` first then `y`.
fn doubled_midranks(x: &[f64], y: &[f64]) -> Vec<u64> {
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&a, &b| pooled[a].total_cmp(&pooled[b]));
    let mut ranks = vec![0u64; pooled.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && pooled[order[j]] == pooled[order[i]] {
            j += 1;
        }
        // ranks i+1..=j share (i + 1 + j) / 2
        let doubled = (i + 1 + j) as u64;
        for &k in &order[i..j] {
            ranks[k] = doubled;
        }
        i = j;
    }
    ranks
}

fn exact_p(ranks: &[u64], nx: usize, alternative: Alternative) -> f64 {
    let n = ranks.len();
    assert!(n < 64, "exact enumeration limited to small samples");
    let observed: u64 = ranks[..nx].iter().sum();
    // doubled expectation of the rank sum: nx (n + 1)
    let center = (nx * (n + 1)) as i64;
    let obs_dev = (observed as i64 - center).abs();
    let (mut hits, mut total) = (0u64, 0u64);
    for mask in 0u64..(1u64 << n) {
        if mask.count_ones() as usize != nx {
            continue;
        }
        let w: u64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        total += 1;
        let hit = match alternative {
            Alternative::Greater => w >= observed,
            Alternative::Less => w <= observed,
            Alternative::TwoSided => (w as i64 - center).abs() >= obs_dev,
        };
        hits += u64::from(hit);
    }
    hits as f64 / total as f64
}

fn normal_p(ranks: &[u64], nx: usize, ny: usize, alternative: Alternative) -> f64 {
    let n = (nx + ny) as f64;
    let (fx, fy) = (nx as f64, ny as f64);
    let w = ranks[..nx].iter().sum::<u64>() as f64 / 2.0;
    let u = w - fx * (fx + 1.0) / 2.0;
    let mu = fx * fy / 2.0;

    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&r| r == sorted[i]).count();
        let t = j as f64;
        tie_term += t * t * t - t;
        i += j;
    }
    let var = fx * fy / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0)));
    if var <= 0.0 {
        return 1.0;
    }
    let sd = var.sqrt();
    match alternative {
        Alternative::Greater => phi_upper((u - mu - 0.5) / sd),
        Alternative::Less => phi_upper((mu - u - 0.5) / sd),
        Alternative::TwoSided => {
            let z = ((u - mu).abs() - 0.5).max(0.0) / sd;
            (2.0 * phi_upper(z)).min(1.0)
        }
    }
}
