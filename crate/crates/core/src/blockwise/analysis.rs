use serde::{Deserialize, Serialize};

use super::bivariate::{bivariate_f_test, degeneracy, Degeneracy, FConstant};
use super::partition::{checked_layout, BlockPartition, GlobalRegion};
use super::summary::{
    block_z_score, summarize_unchecked, two_sample_z_unchecked, Summary, SummaryValue,
};
use crate::error::{Error, Result};
use crate::exec::{map_slice, Execution};
use crate::mtp::{self, empirical_rates, tabulate, DecisionTable, ErrorRates, ProcedureKind};
use crate::stats::{phi_upper, wmw_test, Alternative};

/// Observations entering a block analysis.
#[derive(Debug, Clone, Copy)]
pub enum BlockData<'a> {
    /// One observed map, e.g. a z-map compared to a reference.
    OneSample(&'a GlobalRegion),
    /// Two groups of subjects sharing one region layout.
    TwoGroup {
        control: &'a [GlobalRegion],
        treatment: &'a [GlobalRegion],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "test", rename_all = "snake_case")]
pub enum BlockTest {
    /// One-sided z test of the block statistic against N(μ0, σ0²/b).
    OneSampleZ { mu0: f64, sigma0: f64 },
    /// Pooled two-sample z test on per-subject block summaries.
    TwoSampleZ { alternative: Alternative },
    /// Wilcoxon–Mann–Whitney test on per-subject block summaries.
    RankSum { alternative: Alternative },
    /// Bivariate F test on `(mean, truncated mean)`; `alternative` applies to
    /// the univariate fallback used when the pooled covariance is singular.
    BivariateF {
        constant: FConstant,
        alternative: Alternative,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisPlan {
    pub summary: Summary,
    pub test: BlockTest,
    pub method: ProcedureKind,
    pub alpha: f64,
}

/// Raw result of one block test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockTestResult {
    /// One-sample analyses only.
    pub summary: Option<SummaryValue>,
    /// z for z tests, f for the bivariate test, treatment minus control
    /// mean summary for the rank test.
    pub statistic: f64,
    pub p_value: f64,
    /// Set when a singular covariance forced a univariate test.
    pub fallback: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockOutcome {
    pub block: usize,
    pub label: String,
    pub size: usize,
    #[serde(flatten)]
    pub test: BlockTestResult,
    pub adjusted: f64,
    pub rejected: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockAnalysis {
    pub method: ProcedureKind,
    pub alpha: f64,
    pub outcomes: Vec<BlockOutcome>,
    /// Rejected block indices, ascending.
    pub rejected: Vec<usize>,
    pub table: Option<DecisionTable>,
    pub rates: Option<ErrorRates>,
}

fn incompatible(summary: Summary, test: &BlockTest) -> Error {
    Error::Config(format!(
        "summary '{}' cannot be combined with test {test:?}",
        summary.name()
    ))
}

/// Summarizes every block and computes its p-value (no multiplicity correction).
pub fn test_blocks(
    data: BlockData<'_>,
    part: &BlockPartition,
    summary: Summary,
    test: BlockTest,
    exec: Execution,
) -> Result<Vec<BlockTestResult>> {
    match data {
        BlockData::OneSample(region) => {
            let BlockTest::OneSampleZ { mu0, sigma0 } = test else {
                return Err(incompatible(summary, &test));
            };
            if !matches!(summary, Summary::Mean | Summary::Median | Summary::Huber) {
                return Err(incompatible(summary, &test));
            }
            checked_layout(region.len(), region.mask(), part)?;
            part.blocks()
                .iter()
                .map(|block| {
                    let values: Vec<f64> =
                        block.members.iter().map(|&r| region.values()[r]).collect();
                    let value = summarize_unchecked(&values, summary);
                    let t = value.scalar().expect("scalar summary");
                    let z = block_z_score(t, values.len(), mu0, sigma0)?;
                    Ok(BlockTestResult {
                        summary: Some(value),
                        statistic: z,
                        p_value: phi_upper(z),
                        fallback: None,
                    })
                })
                .collect()
        }
        BlockData::TwoGroup { control, treatment } => {
            check_groups(control, treatment)?;
            match (summary, test) {
                (Summary::Bivariate { .. }, BlockTest::BivariateF { .. }) => {}
                (Summary::Bivariate { .. }, _) | (_, BlockTest::BivariateF { .. }) => {
                    return Err(incompatible(summary, &test))
                }
                (_, BlockTest::OneSampleZ { .. }) => return Err(incompatible(summary, &test)),
                _ => {}
            }
            let first = &control[0];
            checked_layout(first.len(), first.mask(), part)?;
            let summarize = |group: &[GlobalRegion], members: &[usize]| -> Vec<SummaryValue> {
                let mut buf = Vec::with_capacity(members.len());
                group
                    .iter()
                    .map(|subject| {
                        buf.clear();
                        buf.extend(members.iter().map(|&r| subject.values()[r]));
                        summarize_unchecked(&buf, summary)
                    })
                    .collect()
            };
            let results = map_slice(part.blocks(), exec, |block| {
                let c = summarize(control, &block.members);
                let t = summarize(treatment, &block.members);
                two_group_test(&c, &t, test)
            });
            results.into_iter().collect()
        }
    }
}

fn check_groups(control: &[GlobalRegion], treatment: &[GlobalRegion]) -> Result<()> {
    if control.len() < 2 || treatment.len() < 2 {
        return Err(Error::Config(format!(
            "two-group analysis needs at least two subjects per group, got ({}, {})",
            control.len(),
            treatment.len()
        )));
    }
    let first = &control[0];
    for (i, subject) in control.iter().chain(treatment).enumerate() {
        if subject.len() != first.len() || subject.mask() != first.mask() {
            return Err(Error::Config(format!(
                "subject {i} does not share the region layout of subject 0"
            )));
        }
    }
    Ok(())
}

fn scalars(values: &[SummaryValue]) -> Vec<f64> {
    values.iter().map(|v| v.scalar().expect("scalar summary")).collect()
}

fn two_group_test(
    control: &[SummaryValue],
    treatment: &[SummaryValue],
    test: BlockTest,
) -> Result<BlockTestResult> {
    let result = |statistic, p_value, fallback| BlockTestResult {
        summary: None,
        statistic,
        p_value,
        fallback,
    };
    match test {
        BlockTest::TwoSampleZ { alternative } => {
            let (z, p) = two_sample_z_unchecked(&scalars(control), &scalars(treatment), alternative);
            Ok(result(z, p, None))
        }
        BlockTest::RankSum { alternative } => {
            let (c, t) = (scalars(control), scalars(treatment));
            let p = wmw_test(&t, &c, alternative)?;
            let diff = crate::stats::mean(&t) - crate::stats::mean(&c);
            Ok(result(diff, p, None))
        }
        BlockTest::BivariateF {
            constant,
            alternative,
        } => {
            let pairs = |v: &[SummaryValue]| -> Vec<(f64, f64)> {
                v.iter().map(|s| s.pair().expect("bivariate summary")).collect()
            };
            let (c, t) = (pairs(control), pairs(treatment));
            match bivariate_f_test(&c, &t, constant) {
                Ok(r) => Ok(result(r.f, r.p_value, None)),
                Err(Error::Singular { .. }) => {
                    let kind = degeneracy(&c, &t).unwrap_or(Degeneracy::Collinear);
                    let (stat, p, via) = univariate_fallback(&c, &t, alternative)?;
                    Ok(result(stat, p, Some(format!("{}; {}", kind.describe(), via))))
                }
                Err(e) => Err(e),
            }
        }
        BlockTest::OneSampleZ { .. } => unreachable!("rejected by test_blocks"),
    }
}

// With a singular pooled covariance, a component that takes one value in
// every subject carries no information and is dropped; the other is tested
// on its own (z on the mean, rank test on the truncated mean). When both
// components vary, the two univariate p-values are Bonferroni-combined.
fn univariate_fallback(
    control: &[(f64, f64)],
    treatment: &[(f64, f64)],
    alternative: Alternative,
) -> Result<(f64, f64, &'static str)> {
    let split = |v: &[(f64, f64)]| -> (Vec<f64>, Vec<f64>) { v.iter().copied().unzip() };
    let ((c1, c2), (t1, t2)) = (split(control), split(treatment));
    let informative = |c: &[f64], t: &[f64]| {
        let first = c[0];
        c.iter().chain(t).any(|&x| x != first)
    };
    let z_mean = || two_sample_z_unchecked(&c1, &t1, alternative);
    let rank_trunc = || -> Result<(f64, f64)> {
        let p = wmw_test(&t2, &c2, alternative)?;
        Ok((crate::stats::mean(&t2) - crate::stats::mean(&c2), p))
    };
    Ok(match (informative(&c1, &t1), informative(&c2, &t2)) {
        (true, false) => {
            let (z, p) = z_mean();
            (z, p, "two-sample z on the mean")
        }
        (false, true) => {
            let (d, p) = rank_trunc()?;
            (d, p, "rank test on the truncated mean")
        }
        (false, false) => (0.0, 1.0, "no test (both components constant across subjects)"),
        (true, true) => {
            let (z, p1) = z_mean();
            let (_, p2) = rank_trunc()?;
            (
                z,
                (2.0 * p1.min(p2)).min(1.0),
                "Bonferroni-combined z on the mean and rank test on the truncated mean",
            )
        }
    })
}

/// Applies a multiple-testing procedure to block p-values and, when the
/// truly affected blocks are known, tabulates the outcome.
pub fn decide(
    part: &BlockPartition,
    results: Vec<BlockTestResult>,
    method: ProcedureKind,
    alpha: f64,
    false_null_blocks: Option<&[usize]>,
) -> Result<BlockAnalysis> {
    let pvals = mtp::PValueVector::new(results.iter().map(|r| r.p_value).collect())?;
    let adjusted = mtp::adjust_pvalues(&pvals, method).into_vec();
    let rejected = mtp::reject(&pvals, method, alpha)?;
    let table = false_null_blocks
        .map(|truth| tabulate(&rejected, truth, part.len()))
        .transpose()?;
    let rates = table.as_ref().map(empirical_rates);
    let outcomes = results
        .into_iter()
        .zip(adjusted)
        .enumerate()
        .map(|(i, (test, adj))| BlockOutcome {
            block: i,
            label: part.blocks()[i].label.clone(),
            size: part.blocks()[i].members.len(),
            test,
            adjusted: adj,
            rejected: adj <= alpha,
        })
        .collect();
    Ok(BlockAnalysis {
        method,
        alpha,
        outcomes,
        rejected,
        table,
        rates,
    })
}

/// Summaries, block tests and a multiplicity correction in one call.
pub fn run_block_analysis(
    data: BlockData<'_>,
    part: &BlockPartition,
    plan: &AnalysisPlan,
    false_null_blocks: Option<&[usize]>,
    exec: Execution,
) -> Result<BlockAnalysis> {
    let results = test_blocks(data, part, plan.summary, plan.test, exec)?;
    decide(part, results, plan.method, plan.alpha, false_null_blocks)
}
