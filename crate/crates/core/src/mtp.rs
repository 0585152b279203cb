//! Multiple-testing procedures.
//!
//! Every procedure is exposed through adjusted p-values: rejecting the
//! hypotheses whose adjusted value is at most `alpha` is the same decision as
//! running the procedure's step rule at level `alpha`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcedureKind {
    /// Single-step, FWER.
    Bonferroni,
    /// Single-step, FWER under independence.
    Sidak,
    /// Step-down, FWER.
    Holm,
    /// Step-up, FWER under independence.
    Hochberg,
    /// Benjamini–Hochberg step-up, FDR.
    Bh95,
    /// Benjamini–Yekutieli step-up, FDR under arbitrary dependence.
    By01,
}

impl ProcedureKind {
    pub const ALL: [ProcedureKind; 6] = [
        ProcedureKind::Bonferroni,
        ProcedureKind::Sidak,
        ProcedureKind::Holm,
        ProcedureKind::Hochberg,
        ProcedureKind::Bh95,
        ProcedureKind::By01,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProcedureKind::Bonferroni => "bonferroni",
            ProcedureKind::Sidak => "sidak",
            ProcedureKind::Holm => "holm",
            ProcedureKind::Hochberg => "hochberg",
            ProcedureKind::Bh95 => "bh95",
            ProcedureKind::By01 => "by01",
        }
    }
}

impl fmt::Display for ProcedureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProcedureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "bonferroni" => ProcedureKind::Bonferroni,
            "sidak" => ProcedureKind::Sidak,
            "holm" => ProcedureKind::Holm,
            "hochberg" => ProcedureKind::Hochberg,
            "bh95" | "bh" | "fdr" => ProcedureKind::Bh95,
            "by01" | "by" => ProcedureKind::By01,
            other => return Err(domain(format!("unknown procedure '{other}'"))),
        })
    }
}

/// A validated vector of p-values, each in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PValueVector(Vec<f64>);

impl PValueVector {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = p.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(domain(format!("p-value at index {i} is outside [0, 1]: {v}")));
        }
        Ok(Self(p))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// `c(m) = Σ_{i=1..m} 1/i`, the Benjamini–Yekutieli dependence factor.
pub fn by_factor(m: usize) -> f64 {
    (1..=m).map(|i| 1.0 / i as f64).sum()
}

pub fn adjust_pvalues(pv: &PValueVector, method: ProcedureKind) -> PValueVector {
    PValueVector(adjust_slice(pv.as_slice(), method))
}

/// Convenience wrapper validating a raw slice.
pub fn adjust(p: &[f64], method: ProcedureKind) -> Result<Vec<f64>> {
    let pv = PValueVector::new(p.to_vec())?;
    Ok(adjust_slice(pv.as_slice(), method))
}

pub(crate) fn adjust_slice(p: &[f64], method: ProcedureKind) -> Vec<f64> {
    let m = p.len();
    if m == 0 {
        return Vec::new();
    }
    let mf = m as f64;
    match method {
        ProcedureKind::Bonferroni => p.iter().map(|&x| (mf * x).min(1.0)).collect(),
        ProcedureKind::Sidak => p
            .iter()
            .map(|&x| (-(mf * (-x).ln_1p()).exp_m1()).clamp(0.0, 1.0))
            .collect(),
        ProcedureKind::Holm => step_down(p, |rank, x| (m - rank + 1) as f64 * x),
        ProcedureKind::Hochberg => step_up(p, |rank, x| (m - rank + 1) as f64 * x),
        ProcedureKind::Bh95 => step_up(p, |rank, x| x * mf / rank as f64),
        ProcedureKind::By01 => {
            let c = by_factor(m);
            step_up(p, |rank, x| c * (x * mf / rank as f64))
        }
    }
}

/// Ascending order of `p`, ties kept in index order.
fn sorted_order(p: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.sort_by(|&a, &b| p[a].total_cmp(&p[b]));
    order
}

// `raw(rank, p_(rank))` with 1-based rank; running max from the smallest p.
fn step_down(p: &[f64], raw: impl Fn(usize, f64) -> f64) -> Vec<f64> {
    let order = sorted_order(p);
    let mut out = vec![0.0; p.len()];
    let mut running = 0.0_f64;
    for (pos, &idx) in order.iter().enumerate() {
        running = running.max(raw(pos + 1, p[idx]).min(1.0));
        out[idx] = running;
    }
    out
}

// Running min from the largest p.
fn step_up(p: &[f64], raw: impl Fn(usize, f64) -> f64) -> Vec<f64> {
    let order = sorted_order(p);
    let mut out = vec![0.0; p.len()];
    let mut running = 1.0_f64;
    for (pos, &idx) in order.iter().enumerate().rev() {
        running = running.min(raw(pos + 1, p[idx]).min(1.0));
        out[idx] = running;
    }
    out
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("alpha = {alpha} outside (0, 1)")))
    }
}

/// Indices (ascending) rejected by `method` at level `alpha`.
pub fn reject(pv: &PValueVector, method: ProcedureKind, alpha: f64) -> Result<Vec<usize>> {
    check_alpha(alpha)?;
    Ok(reject_adjusted(&adjust_slice(pv.as_slice(), method), alpha))
}

pub(crate) fn reject_adjusted(adjusted: &[f64], alpha: f64) -> Vec<usize> {
    adjusted
        .iter()
        .enumerate()
        .filter(|(_, &a)| a <= alpha)
        .map(|(i, _)| i)
        .collect()
}

/// Outcome counts of a multiple test against known ground truth.
///
/// | null hypotheses | not rejected | rejected | total |
/// |-----------------|--------------|----------|-------|
/// | true            | `u`          | `v`      | `m0`  |
/// | false           | `t`          | `s`      | `m1`  |
/// | total           | `m - r`      | `r`      | `m`   |
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DecisionTable {
    pub u: usize,
    pub v: usize,
    pub t: usize,
    pub s: usize,
    pub m0: usize,
    pub m1: usize,
    pub m: usize,
    pub r: usize,
}

impl DecisionTable {
    pub fn is_consistent(&self) -> bool {
        self.u + self.v == self.m0
            && self.t + self.s == self.m1
            && self.m0 + self.m1 == self.m
            && self.r == self.v + self.s
            && self.m - self.r == self.u + self.t
    }
}

fn membership(indices: &[usize], m: usize, what: &str) -> Result<Vec<bool>> {
    let mut mask = vec![false; m];
    for &i in indices {
        if i >= m {
            return Err(domain(format!("{what} index {i} out of range for m = {m}")));
        }
        mask[i] = true;
    }
    Ok(mask)
}

/// Cross-tabulates rejections against the set of false null hypotheses.
pub fn tabulate(rejected: &[usize], false_nulls: &[usize], m: usize) -> Result<DecisionTable> {
    let rej = membership(rejected, m, "rejected")?;
    let alt = membership(false_nulls, m, "false-null")?;
    let mut table = DecisionTable {
        m,
        ..Default::default()
    };
    for (&r, &a) in rej.iter().zip(&alt) {
        match (a, r) {
            (false, false) => table.u += 1,
            (false, true) => table.v += 1,
            (true, false) => table.t += 1,
            (true, true) => table.s += 1,
        }
    }
    table.m0 = table.u + table.v;
    table.m1 = table.t + table.s;
    table.r = table.v + table.s;
    Ok(table)
}

/// Empirical error rates of one table. Rates whose denominator is zero are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorRates {
    /// `V / m0`
    pub type_i: Option<f64>,
    /// `T / m1`
    pub type_ii: Option<f64>,
    /// `S / m1`
    pub power: Option<f64>,
    /// `V / max(R, 1)`
    pub fdp: f64,
    /// `V >= 1`
    pub any_false_positive: bool,
}

pub fn empirical_rates(table: &DecisionTable) -> ErrorRates {
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    ErrorRates {
        type_i: ratio(table.v, table.m0),
        type_ii: ratio(table.t, table.m1),
        power: ratio(table.s, table.m1),
        fdp: table.v as f64 / table.r.max(1) as f64,
        any_false_positive: table.v >= 1,
    }
}
