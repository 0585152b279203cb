use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::hierarchy::MatrixBlocks;
use super::matrix::ConnectivityMatrix;
use super::synth::GroundTruth;
use crate::blockwise::{
    decide, test_blocks, Block, BlockAnalysis, BlockData, BlockPartition, BlockTest, FConstant,
    Summary, DEFAULT_THRESHOLD,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::io::{fmt_f64, fmt_opt};
use crate::mtp::ProcedureKind;
use crate::stats::Alternative;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConnectomeStrategy {
    /// Two-sample z test on every analyzed cell.
    Srw,
    /// Two-sample z test on block means.
    MeanBwa,
    /// Rank test on the fraction of block cells above the threshold.
    TruncatedBwa,
    /// F test on (block mean, truncated mean).
    BivariateBwa,
}

impl ConnectomeStrategy {
    pub const ALL: [ConnectomeStrategy; 4] = [
        ConnectomeStrategy::Srw,
        ConnectomeStrategy::MeanBwa,
        ConnectomeStrategy::TruncatedBwa,
        ConnectomeStrategy::BivariateBwa,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ConnectomeStrategy::Srw => "srw",
            ConnectomeStrategy::MeanBwa => "mean_bwa",
            ConnectomeStrategy::TruncatedBwa => "truncated_bwa",
            ConnectomeStrategy::BivariateBwa => "bivariate_bwa",
        }
    }

    /// Test unit: `cell` for SRW, `block` otherwise.
    pub fn unit(self) -> &'static str {
        match self {
            ConnectomeStrategy::Srw => "cell",
            _ => "block",
        }
    }

    fn plan(self, opts: &CompareOptions) -> (Summary, BlockTest) {
        let alternative = opts.alternative;
        match self {
            ConnectomeStrategy::Srw | ConnectomeStrategy::MeanBwa => {
                (Summary::Mean, BlockTest::TwoSampleZ { alternative })
            }
            ConnectomeStrategy::TruncatedBwa => (
                Summary::TruncatedMean {
                    threshold: opts.threshold,
                },
                BlockTest::RankSum { alternative },
            ),
            ConnectomeStrategy::BivariateBwa => (
                Summary::Bivariate {
                    threshold: opts.threshold,
                },
                BlockTest::BivariateF {
                    constant: opts.f_constant,
                    alternative,
                },
            ),
        }
    }
}

impl fmt::Display for ConnectomeStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ConnectomeStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "srw" => Ok(Self::Srw),
            "mean" | "mean_bwa" => Ok(Self::MeanBwa),
            "truncated" | "truncated_bwa" => Ok(Self::TruncatedBwa),
            "bivariate" | "bivariate_bwa" => Ok(Self::BivariateBwa),
            other => Err(Error::Config(format!("unknown strategy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareOptions {
    pub alpha: f64,
    /// Truncation threshold of the truncated mean.
    pub threshold: f64,
    pub f_constant: FConstant,
    /// Direction of the univariate tests (treatment against control).
    pub alternative: Alternative,
}

impl Default for CompareOptions {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            threshold: DEFAULT_THRESHOLD,
            f_constant: FConstant::Standard,
            alternative: Alternative::Greater,
        }
    }
}

/// One strategy under one multiplicity correction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyOutcome {
    pub strategy: ConnectomeStrategy,
    pub unit: &'static str,
    pub analysis: BlockAnalysis,
    /// `S/m1` against the ground truth, in the strategy's test units.
    pub power: Option<f64>,
    /// Whether any true null was rejected (ground truth supplied).
    pub any_false_positive: Option<bool>,
    /// Blocks whose bivariate covariance was singular.
    pub fallbacks: usize,
}

fn srw_partition(blocks: &MatrixBlocks) -> (BlockPartition, Vec<usize>) {
    let mut position = vec![usize::MAX; blocks.cell_count()];
    let cells: Vec<Block> = (0..blocks.cell_count())
        .filter(|&i| blocks.mask[i])
        .enumerate()
        .map(|(pos, i)| {
            position[i] = pos;
            let (k, l) = blocks.cell_coords(i);
            Block {
                label: format!("{k},{l}"),
                members: vec![i],
            }
        })
        .collect();
    (BlockPartition::new(cells), position)
}

/// Runs each strategy once and applies every method to its p-values.
/// Outcomes are ordered strategy-major, in the given orders.
pub fn compare_all(
    controls: &[ConnectivityMatrix],
    treatments: &[ConnectivityMatrix],
    blocks: &MatrixBlocks,
    strategies: &[ConnectomeStrategy],
    methods: &[ProcedureKind],
    opts: &CompareOptions,
    truth: Option<&GroundTruth>,
    exec: Execution,
) -> Result<Vec<StrategyOutcome>> {
    let control = blocks.regions(controls)?;
    let treatment = blocks.regions(treatments)?;
    let data = BlockData::TwoGroup {
        control: &control,
        treatment: &treatment,
    };
    let mut out = Vec::new();
    for &strategy in strategies {
        let (summary, test) = strategy.plan(opts);
        let (partition, false_nulls) = match strategy {
            ConnectomeStrategy::Srw => {
                let (part, position) = srw_partition(blocks);
                let nulls = truth.map(|t| {
                    let mut v: Vec<usize> =
                        t.injected_cells.iter().map(|&c| position[c]).collect();
                    v.sort_unstable();
                    v
                });
                (part, nulls)
            }
            _ => (
                blocks.partition.clone(),
                truth.map(|t| t.affected_blocks.clone()),
            ),
        };
        if let Some(nulls) = &false_nulls {
            if nulls.iter().any(|&i| i >= partition.len()) {
                return Err(Error::Config(
                    "ground truth refers to cells outside the analyzed blocks".into(),
                ));
            }
        }
        let results = test_blocks(data, &partition, summary, test, exec)?;
        let fallbacks = results.iter().filter(|r| r.fallback.is_some()).count();
        for &method in methods {
            let analysis = decide(
                &partition,
                results.clone(),
                method,
                opts.alpha,
                false_nulls.as_deref(),
            )?;
            let power = analysis.rates.as_ref().and_then(|r| r.power);
            let any_false_positive = analysis.table.map(|t| t.v > 0);
            out.push(StrategyOutcome {
                strategy,
                unit: strategy.unit(),
                analysis,
                power,
                any_false_positive,
                fallbacks,
            });
        }
    }
    Ok(out)
}

/// Single strategy and method.
pub fn compare_groups(
    controls: &[ConnectivityMatrix],
    treatments: &[ConnectivityMatrix],
    blocks: &MatrixBlocks,
    strategy: ConnectomeStrategy,
    method: ProcedureKind,
    alpha: f64,
    truth: Option<&GroundTruth>,
) -> Result<StrategyOutcome> {
    let opts = CompareOptions {
        alpha,
        ..CompareOptions::default()
    };
    Ok(compare_all(
        controls,
        treatments,
        blocks,
        &[strategy],
        &[method],
        &opts,
        truth,
        Execution::default(),
    )?
    .remove(0))
}

pub const SUMMARY_CSV_HEADER: &str =
    "strategy,method,unit,tests,rejected,power,v,s,m1,any_false_positive,fallbacks";
pub const RESULTS_CSV_HEADER: &str =
    "strategy,method,unit,index,label,size,statistic,p_value,adjusted,rejected,truly_affected,fallback";

/// One line per (strategy, method).
pub fn summary_csv(outcomes: &[StrategyOutcome]) -> String {
    let mut out = format!("{SUMMARY_CSV_HEADER}\n");
    for o in outcomes {
        let t = o.analysis.table;
        let row = [
            o.strategy.name().to_string(),
            o.analysis.method.name().to_string(),
            o.unit.to_string(),
            o.analysis.outcomes.len().to_string(),
            o.analysis.rejected.len().to_string(),
            fmt_opt(o.power),
            t.map_or("NA".into(), |t| t.v.to_string()),
            t.map_or("NA".into(), |t| t.s.to_string()),
            t.map_or("NA".into(), |t| t.m1.to_string()),
            o.any_false_positive.map_or("NA".into(), |b| u8::from(b).to_string()),
            o.fallbacks.to_string(),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One line per test of every (strategy, method).
pub fn results_csv(outcomes: &[StrategyOutcome], truth: Option<&GroundTruth>, blocks: &MatrixBlocks) -> String {
    let mut out = format!("{RESULTS_CSV_HEADER}\n");
    for o in outcomes {
        for b in &o.analysis.outcomes {
            let affected = truth.map(|t| match o.strategy {
                ConnectomeStrategy::Srw => {
                    let (k, l) = parse_cell_label(&b.label);
                    t.injected_cells.binary_search(&blocks.cell_index(k, l)).is_ok()
                }
                _ => t.affected_blocks.binary_search(&b.block).is_ok(),
            });
            let row = [
                o.strategy.name().to_string(),
                o.analysis.method.name().to_string(),
                o.unit.to_string(),
                b.block.to_string(),
                csv_text(&b.label),
                b.size.to_string(),
                fmt_f64(b.test.statistic),
                fmt_f64(b.test.p_value),
                fmt_f64(b.adjusted),
                u8::from(b.rejected).to_string(),
                affected.map_or("NA".into(), |a| u8::from(a).to_string()),
                csv_text(b.test.fallback.as_deref().unwrap_or("")),
            ];
            out.push_str(&row.join(","));
            out.push('\n');
        }
    }
    out
}

fn parse_cell_label(label: &str) -> (usize, usize) {
    let (k, l) = label.split_once(',').expect("cell label");
    (k.parse().expect("row"), l.parse().expect("col"))
}

/// Equal-width histogram over `[lo, hi]`; the last bin is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub name: String,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

pub fn histogram(name: &str, values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Histogram> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::Config(format!(
            "histogram needs bins >= 1 and hi > lo, got {bins}, [{lo}, {hi}]"
        )));
    }
    let width = (hi - lo) / bins as f64;
    let edges = (0..=bins).map(|i| lo + width * i as f64).collect();
    let mut counts = vec![0; bins];
    for &v in values {
        if v >= lo && v <= hi {
            let i = (((v - lo) / width) as usize).min(bins - 1);
            counts[i] += 1;
        }
    }
    Ok(Histogram {
        name: name.to_string(),
        edges,
        counts,
    })
}

impl Histogram {
    pub fn to_csv_rows(&self) -> String {
        self.counts
            .iter()
            .enumerate()
            .map(|(i, c)| {
                format!(
                    "{},{},{},{}\n",
                    self.name,
                    fmt_f64(self.edges[i]),
                    fmt_f64(self.edges[i + 1]),
                    c
                )
            })
            .collect()
    }
}

/// Histograms of analyzed block sizes, affected block sizes and the
/// realized affected fractions `k_i/b_i`.
pub fn design_histograms(blocks: &MatrixBlocks, truth: &GroundTruth, bins: usize) -> Result<Vec<Histogram>> {
    let sizes: Vec<f64> = blocks.block_sizes().iter().map(|&s| s as f64).collect();
    let max = sizes.iter().copied().fold(1.0, f64::max);
    let affected_sizes: Vec<f64> = truth
        .affected
        .iter()
        .map(|a| blocks.partition.blocks()[a.block].members.len() as f64)
        .collect();
    let fractions: Vec<f64> = truth
        .affected
        .iter()
        .zip(&truth.injected_per_block)
        .map(|(a, &k)| k as f64 / blocks.partition.blocks()[a.block].members.len() as f64)
        .collect();
    Ok(vec![
        histogram("block_size", &sizes, 0.0, max, bins)?,
        histogram("affected_block_size", &affected_sizes, 0.0, max, bins)?,
        histogram("affected_fraction", &fractions, 0.0, 1.0, bins)?,
    ])
}

pub const HISTOGRAM_CSV_HEADER: &str = "histogram,lower,upper,count";

pub fn histograms_csv(histograms: &[Histogram]) -> String {
    let mut out = format!("{HISTOGRAM_CSV_HEADER}\n");
    for h in histograms {
        out.push_str(&h.to_csv_rows());
    }
    out
}
