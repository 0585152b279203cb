//! Two-sample test on bivariate block summaries (a two-dimensional
//! Hotelling-type statistic with pooled covariance).

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::stats::f_sf;

/// Scaling constant applied to the Mahalanobis distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FConstant {
    /// `(n − 3) / (2 (n − 2))`, the two-sample Hotelling reduction (`n = n_c + n_t`).
    #[default]
    Standard,
    /// `(n − 3) / (2 (n − 1))`.
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BivariateF {
    pub f: f64,
    pub p_value: f64,
    pub df: (u32, u32),
}

/// Which component of the pooled covariance is degenerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Degeneracy {
    /// First component constant within both groups.
    First,
    /// Second component constant within both groups.
    Second,
    Both,
    /// Both components vary but are perfectly correlated.
    Collinear,
}

impl Degeneracy {
    pub fn describe(self) -> &'static str {
        match self {
            Degeneracy::First => "component 1 (mean) has zero pooled variance",
            Degeneracy::Second => "component 2 (truncated mean) has zero pooled variance",
            Degeneracy::Both => "both components have zero pooled variance",
            Degeneracy::Collinear => "components are collinear",
        }
    }
}

const COLLINEAR_TOL: f64 = 1e-10;

struct Moments {
    mean: (f64, f64),
    // sums of squared / cross deviations
    sxx: f64,
    syy: f64,
    sxy: f64,
    n: usize,
    const_x: bool,
    const_y: bool,
}

fn moments(group: &[(f64, f64)]) -> Moments {
    let n = group.len() as f64;
    let mx = group.iter().map(|p| p.0).sum::<f64>() / n;
    let my = group.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in group {
        let (dx, dy) = (x - mx, y - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    Moments {
        mean: (mx, my),
        sxx,
        syy,
        sxy,
        n: group.len(),
        const_x: group.windows(2).all(|w| w[0].0 == w[1].0),
        const_y: group.windows(2).all(|w| w[0].1 == w[1].1),
    }
}

/// Classifies the pooled covariance of two groups, `None` when invertible.
pub fn degeneracy(control: &[(f64, f64)], treatment: &[(f64, f64)]) -> Option<Degeneracy> {
    let (c, t) = (moments(control), moments(treatment));
    classify(&c, &t)
}

fn classify(c: &Moments, t: &Moments) -> Option<Degeneracy> {
    let flat_x = c.const_x && t.const_x;
    let flat_y = c.const_y && t.const_y;
    match (flat_x, flat_y) {
        (true, true) => return Some(Degeneracy::Both),
        (true, false) => return Some(Degeneracy::First),
        (false, true) => return Some(Degeneracy::Second),
        _ => {}
    }
    let (sxx, syy, sxy) = (c.sxx + t.sxx, c.syy + t.syy, c.sxy + t.sxy);
    if sxx * syy - sxy * sxy <= COLLINEAR_TOL * sxx * syy {
        return Some(Degeneracy::Collinear);
    }
    None
}

/// Two-sample test on `(t¹, t²)` summaries of one block.
///
/// `f = (n_c n_t/(n_c + n_t)) dᵀ S⁻¹ d · k`, where `d` is the difference of
/// the group mean vectors, `S` the pooled covariance and `k` the selected
/// [`FConstant`]; the p-value is the upper tail of F(2, n_c + n_t − 3).
pub fn bivariate_f_test(
    control: &[(f64, f64)],
    treatment: &[(f64, f64)],
    constant: FConstant,
) -> Result<BivariateF> {
    if control.len() < 2 || treatment.len() < 2 {
        return Err(domain(format!(
            "bivariate test needs at least two subjects per group, got ({}, {})",
            control.len(),
            treatment.len()
        )));
    }
    if control
        .iter()
        .chain(treatment)
        .any(|(a, b)| !a.is_finite() || !b.is_finite())
    {
        return Err(domain("bivariate test: non-finite summary"));
    }
    let (c, t) = (moments(control), moments(treatment));
    if let Some(kind) = classify(&c, &t) {
        return Err(Error::Singular {
            component: kind.describe().to_string(),
        });
    }
    let n = (c.n + t.n) as f64;
    let dof = n - 2.0;
    let (s11, s22, s12) = ((c.sxx + t.sxx) / dof, (c.syy + t.syy) / dof, (c.sxy + t.sxy) / dof);
    let det = s11 * s22 - s12 * s12;
    let d1 = t.mean.0 - c.mean.0;
    let d2 = t.mean.1 - c.mean.1;
    let quad = (s22 * d1 * d1 - 2.0 * s12 * d1 * d2 + s11 * d2 * d2) / det;
    let scale = (c.n * t.n) as f64 / n;
    let k = match constant {
        FConstant::Standard => (n - 3.0) / (2.0 * (n - 2.0)),
        FConstant::Printed => (n - 3.0) / (2.0 * (n - 1.0)),
    };
    let f = (scale * quad * k).max(0.0);
    let df2 = (c.n + t.n - 3) as u32;
    Ok(BivariateF {
        f,
        p_value: f_sf(f, 2, df2)?,
        df: (2, df2),
    })
}
