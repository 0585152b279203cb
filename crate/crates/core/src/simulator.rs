//! Analytic power of small-region-wise and block-wise testing, and seeded
//! Monte Carlo sweeps that estimate power, FWER and FDR.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::blockwise::{BlockPartition, GlobalRegion};
use crate::error::{domain, Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::io::{fmt_f64, fmt_opt};
use crate::mtp::{adjust_slice, ProcedureKind};
use crate::stats::{mix_seed, normal_upper_quantile, phi_upper, RngStream};

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} must be positive and finite, got {x}")))
    }
}

fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(domain(format!("alpha = {alpha} outside (0, 1)")))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("delta must be finite, got {delta}")))
    }
}

/// Per-region power of SRW with a Bonferroni threshold over `m_total` tests:
/// `1 − Φ((σ0·Φ⁻¹(1 − α/M) − Δ)/σ1)`.
pub fn analytic_power_srw(
    delta: f64,
    alpha: f64,
    m_total: usize,
    sigma0: f64,
    sigma1: f64,
) -> Result<f64> {
    analytic_power_bwa_full(delta, alpha, m_total, 1, sigma0, sigma1)
}

/// Per-block power of mean-BWA for a fully affected block of size `b`
/// among `m` blocks: `1 − Φ((σ0·Φ⁻¹(1 − α/m) − Δ√b)/σ1)`.
pub fn analytic_power_bwa_full(
    delta: f64,
    alpha: f64,
    m: usize,
    b: usize,
    sigma0: f64,
    sigma1: f64,
) -> Result<f64> {
    analytic_power_bwa_partial(delta, alpha, m, b, b, sigma0, sigma1)
}

/// Standard deviation of one observation drawn from a block in which `k` of
/// `b` regions carry the shift `delta`:
/// `σ_k² = (k/b)σ1² + (1 − k/b)σ0² + Δ²(k/b)(1 − k/b)`.
pub fn mixture_sigma(delta: f64, sigma0: f64, sigma1: f64, k: usize, b: usize) -> Result<f64> {
    check_delta(delta)?;
    check_positive("sigma0", sigma0)?;
    check_positive("sigma1", sigma1)?;
    if b == 0 || k > b {
        return Err(domain(format!("need 0 <= k <= b and b >= 1, got k={k}, b={b}")));
    }
    let f = k as f64 / b as f64;
    Ok((f * sigma1 * sigma1 + (1.0 - f) * sigma0 * sigma0 + delta * delta * f * (1.0 - f)).sqrt())
}

/// Power of mean-BWA for a partially affected block, treating its block
/// mean as `N(μ0 + (k/b)Δ, σ_k²/b)`:
/// `1 − Φ((σ0·Φ⁻¹(1 − α/m) − (k/b)Δ√b)/σ_k)`.
pub fn analytic_power_bwa_partial(
    delta: f64,
    alpha: f64,
    m: usize,
    b: usize,
    k: usize,
    sigma0: f64,
    sigma1: f64,
) -> Result<f64> {
    check_level(alpha)?;
    if m == 0 {
        return Err(domain("number of tests must be at least 1"));
    }
    let sigma_k = mixture_sigma(delta, sigma0, sigma1, k, b)?;
    let z = normal_upper_quantile(alpha / m as f64)?;
    let shift = k as f64 / b as f64 * delta * (b as f64).sqrt();
    Ok(phi_upper((sigma0 * z - shift) / sigma_k))
}

/// Power of mean-BWA when exactly `k` fixed regions of the block are
/// affected. The block mean is then exactly normal with variance
/// `((k/b)σ1² + (1 − k/b)σ0²)/b`.
pub fn analytic_power_bwa_fixed(
    delta: f64,
    alpha: f64,
    m: usize,
    b: usize,
    k: usize,
    sigma0: f64,
    sigma1: f64,
) -> Result<f64> {
    check_level(alpha)?;
    let _ = mixture_sigma(delta, sigma0, sigma1, k, b)?;
    if m == 0 {
        return Err(domain("number of tests must be at least 1"));
    }
    let f = k as f64 / b as f64;
    let sigma_eff = (f * sigma1 * sigma1 + (1.0 - f) * sigma0 * sigma0).sqrt();
    let z = normal_upper_quantile(alpha / m as f64)?;
    Ok(phi_upper((sigma0 * z - f * delta * (b as f64).sqrt()) / sigma_eff))
}

/// Smallest `k/b`, `k ∈ 1..=b`, at which the partial-block mean-BWA power
/// reaches the SRW power. `None` when `delta == 0` (nothing to detect) or
/// when no grid point qualifies.
pub fn crossover_fraction(
    delta: f64,
    alpha: f64,
    m: usize,
    b: usize,
    m_total: usize,
    sigma0: f64,
    sigma1: f64,
) -> Result<Option<f64>> {
    let grid: Vec<usize> = (1..=b).collect();
    crossover_fraction_on(delta, alpha, m, b, m_total, sigma0, sigma1, &grid)
}

/// [`crossover_fraction`] restricted to the affected counts in `ks`.
#[allow(clippy::too_many_arguments)]
pub fn crossover_fraction_on(
    delta: f64,
    alpha: f64,
    m: usize,
    b: usize,
    m_total: usize,
    sigma0: f64,
    sigma1: f64,
    ks: &[usize],
) -> Result<Option<f64>> {
    let srw = analytic_power_srw(delta, alpha, m_total, sigma0, sigma1)?;
    if delta == 0.0 {
        return Ok(None);
    }
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    for k in ks {
        if k == 0 {
            continue;
        }
        if analytic_power_bwa_partial(delta, alpha, m, b, k, sigma0, sigma1)? >= srw {
            return Ok(Some(k as f64 / b as f64));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// One test per small region.
    Srw,
    /// One-sided z test of each block mean.
    MeanBwa,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Srw => "srw",
            Strategy::MeanBwa => "mean_bwa",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "srw" => Ok(Strategy::Srw),
            "mean_bwa" | "bwa" | "mean" => Ok(Strategy::MeanBwa),
            other => Err(Error::Config(format!("unknown strategy '{other}'"))),
        }
    }
}

/// How observations in a partially affected block are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartialModel {
    /// The first `k` regions of the block are drawn from `N(μ0 + Δ, σ1²)`,
    /// the rest from `N(μ0, σ0²)`.
    #[default]
    Exact,
    /// Every region of the block is drawn from the moment-matched normal
    /// `N(μ0 + (k/b)Δ, σ_k²)`. Only the block-wise strategy sees these
    /// values; SRW always uses the exact placement.
    Moment,
}

impl PartialModel {
    pub fn name(self) -> &'static str {
        match self {
            PartialModel::Exact => "exact",
            PartialModel::Moment => "moment",
        }
    }
}

impl FromStr for PartialModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(PartialModel::Exact),
            "moment" => Ok(PartialModel::Moment),
            other => Err(Error::Config(format!("unknown partial model '{other}'"))),
        }
    }
}

/// One simulated scenario: `m_total / block_size` equal blocks, of which the
/// first `full_blocks` are fully affected and the next `partial_blocks`
/// carry the effect in `k` regions each. With `delta == 0` every null is true.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub m_total: usize,
    pub block_size: usize,
    pub mu0: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub delta: f64,
    pub full_blocks: usize,
    pub partial_blocks: usize,
    pub k: usize,
    pub alpha: f64,
    pub n_sim: usize,
    pub seed: u64,
    #[serde(default)]
    pub partial_model: PartialModel,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            m_total: 1000,
            block_size: 5,
            mu0: 0.0,
            sigma0: 1.0,
            sigma1: 1.0,
            delta: 0.0,
            full_blocks: 20,
            partial_blocks: 0,
            k: 0,
            alpha: 0.05,
            n_sim: 10_000,
            seed: 1,
            partial_model: PartialModel::Exact,
        }
    }
}

impl ScenarioConfig {
    pub fn blocks(&self) -> usize {
        self.m_total / self.block_size
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.block_size == 0 || self.m_total == 0 || self.m_total % self.block_size != 0 {
            return bad(format!(
                "block size {} must divide the region count {}",
                self.block_size, self.m_total
            ));
        }
        if self.full_blocks + self.partial_blocks > self.blocks() {
            return bad(format!(
                "{} full + {} partial affected blocks exceed {} blocks",
                self.full_blocks,
                self.partial_blocks,
                self.blocks()
            ));
        }
        if self.k > self.block_size {
            return bad(format!("k = {} exceeds block size {}", self.k, self.block_size));
        }
        if self.n_sim == 0 {
            return bad("n_sim must be at least 1".into());
        }
        if !self.mu0.is_finite() || !(self.delta >= 0.0) || !self.delta.is_finite() {
            return bad(format!("need finite mu0 and delta >= 0, got ({}, {})", self.mu0, self.delta));
        }
        check_positive("sigma0", self.sigma0)?;
        check_positive("sigma1", self.sigma1)?;
        check_level(self.alpha)
    }

    fn has_effect(&self) -> bool {
        self.delta > 0.0
    }

    /// Whether region `j` carries the shift.
    fn region_affected(&self, j: usize) -> bool {
        if !self.has_effect() {
            return false;
        }
        let (block, offset) = (j / self.block_size, j % self.block_size);
        block < self.full_blocks
            || (block < self.full_blocks + self.partial_blocks && offset < self.k)
    }

    /// Truly affected small regions, ascending.
    pub fn affected_regions(&self) -> Vec<usize> {
        (0..self.m_total).filter(|&j| self.region_affected(j)).collect()
    }

    /// Truly affected blocks (at least one affected region), ascending.
    pub fn affected_blocks(&self) -> Vec<usize> {
        if !self.has_effect() {
            return Vec::new();
        }
        let partial = if self.k > 0 { self.partial_blocks } else { 0 };
        (0..self.full_blocks + partial).collect()
    }

    /// Fraction of affected regions in partial blocks, or 1 for scenarios
    /// with fully affected blocks only.
    pub fn k_over_b(&self) -> f64 {
        if self.partial_blocks > 0 {
            self.k as f64 / self.block_size as f64
        } else {
            1.0
        }
    }

    // Seeds depend on the data-generating parameters only, so every
    // (strategy, method) pair of a scenario sees the same draws.
    fn data_tag(&self) -> u64 {
        [
            self.m_total as u64,
            self.block_size as u64,
            self.mu0.to_bits(),
            self.sigma0.to_bits(),
            self.sigma1.to_bits(),
            self.delta.to_bits(),
            self.full_blocks as u64,
            self.partial_blocks as u64,
            self.k as u64,
            self.partial_model as u64,
        ]
        .iter()
        .fold(0x5eed_b10c_u64, |acc, &x| mix_seed(acc, x))
    }

    fn analytic(&self, strategy: Strategy, method: ProcedureKind) -> Result<Option<f64>> {
        if method != ProcedureKind::Bonferroni || !self.has_effect() {
            return Ok(None);
        }
        let (d, a, s0, s1) = (self.delta, self.alpha, self.sigma0, self.sigma1);
        match strategy {
            Strategy::Srw => {
                if self.affected_regions().is_empty() {
                    return Ok(None);
                }
                analytic_power_srw(d, a, self.m_total, s0, s1).map(Some)
            }
            Strategy::MeanBwa => {
                let (m, b) = (self.blocks(), self.block_size);
                let partial = if self.k > 0 { self.partial_blocks } else { 0 };
                let total = self.full_blocks + partial;
                if total == 0 {
                    return Ok(None);
                }
                let full = analytic_power_bwa_full(d, a, m, b, s0, s1)?;
                let part = if partial == 0 {
                    0.0
                } else {
                    match self.partial_model {
                        PartialModel::Moment => {
                            analytic_power_bwa_partial(d, a, m, b, self.k, s0, s1)?
                        }
                        PartialModel::Exact => analytic_power_bwa_fixed(d, a, m, b, self.k, s0, s1)?,
                    }
                };
                Ok(Some(
                    (self.full_blocks as f64 * full + partial as f64 * part) / total as f64,
                ))
            }
        }
    }
}

/// Monte Carlo estimates for one (scenario, strategy, method) combination.
///
/// Power is the average of `S/m1` over replications, counted in regions for
/// SRW and in blocks for mean-BWA. FWER is the fraction of replications with
/// `V ≥ 1`; FDR is the average of `V/max(R, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub strategy: Strategy,
    pub method: ProcedureKind,
    pub delta: f64,
    pub k_over_b: f64,
    /// Block size; 1 for SRW rows.
    pub b: usize,
    pub avg_power: Option<f64>,
    pub fwer: f64,
    pub fdr: f64,
    pub se_power: Option<f64>,
    pub se_fwer: f64,
    pub se_fdr: f64,
    pub n_sim: usize,
    /// Closed-form power (Bonferroni rows only).
    pub analytic_power: Option<f64>,
    pub partial_model: PartialModel,
}

#[derive(Debug, Clone, Copy, Default)]
struct RepStat {
    power: f64,
    false_positive: bool,
    fdp: f64,
}

struct Truth {
    regions: Vec<bool>,
    blocks: Vec<bool>,
    n_regions: usize,
    n_blocks: usize,
}

fn stat_for(p: &[f64], truth: &[bool], n_false: usize, method: ProcedureKind, alpha: f64) -> RepStat {
    let adjusted = adjust_slice(p, method);
    let (mut v, mut s) = (0usize, 0usize);
    for (a, &is_false) in adjusted.iter().zip(truth) {
        if *a <= alpha {
            if is_false {
                s += 1;
            } else {
                v += 1;
            }
        }
    }
    let r = v + s;
    RepStat {
        power: if n_false > 0 { s as f64 / n_false as f64 } else { 0.0 },
        false_positive: v > 0,
        fdp: v as f64 / r.max(1) as f64,
    }
}

fn replicate(
    cfg: &ScenarioConfig,
    truth: &Truth,
    pairs: &[(Strategy, ProcedureKind)],
    stream: RngStream,
) -> Vec<RepStat> {
    let b = cfg.block_size;
    let mut main = stream.derive(0);
    let x: Vec<f64> = (0..cfg.m_total)
        .map(|j| {
            let z = main.standard_normal();
            if truth.regions[j] {
                cfg.mu0 + cfg.delta + cfg.sigma1 * z
            } else {
                cfg.mu0 + cfg.sigma0 * z
            }
        })
        .collect();

    let need_srw = pairs.iter().any(|(s, _)| *s == Strategy::Srw);
    let need_bwa = pairs.iter().any(|(s, _)| *s == Strategy::MeanBwa);
    let srw_p: Vec<f64> = if need_srw {
        x.iter().map(|&v| phi_upper((v - cfg.mu0) / cfg.sigma0)).collect()
    } else {
        Vec::new()
    };
    let bwa_p: Vec<f64> = if need_bwa {
        let moment = cfg.partial_model == PartialModel::Moment
            && cfg.has_effect()
            && cfg.partial_blocks > 0;
        let mut partial_rng = stream.derive(1);
        let (f, sigma_k) = (
            cfg.k as f64 / b as f64,
            mixture_sigma(cfg.delta, cfg.sigma0, cfg.sigma1, cfg.k, b).unwrap_or(cfg.sigma0),
        );
        let scale = (b as f64).sqrt() / cfg.sigma0;
        x.chunks(b)
            .enumerate()
            .map(|(i, values)| {
                let is_partial =
                    i >= cfg.full_blocks && i < cfg.full_blocks + cfg.partial_blocks;
                let mean = if moment && is_partial {
                    let mu = cfg.mu0 + f * cfg.delta;
                    (0..b).map(|_| mu + sigma_k * partial_rng.standard_normal()).sum::<f64>()
                        / b as f64
                } else {
                    values.iter().sum::<f64>() / b as f64
                };
                phi_upper(scale * (mean - cfg.mu0))
            })
            .collect()
    } else {
        Vec::new()
    };

    pairs
        .iter()
        .map(|&(strategy, method)| match strategy {
            Strategy::Srw => stat_for(&srw_p, &truth.regions, truth.n_regions, method, cfg.alpha),
            Strategy::MeanBwa => {
                stat_for(&bwa_p, &truth.blocks, truth.n_blocks, method, cfg.alpha)
            }
        })
        .collect()
}

/// Runs `cfg.n_sim` replications and evaluates every (strategy, method)
/// pair on the same draws. Replications are reduced in index order, so the
/// result does not depend on the execution mode or thread count.
pub fn simulate_pairs(
    cfg: &ScenarioConfig,
    pairs: &[(Strategy, ProcedureKind)],
    exec: Execution,
) -> Result<Vec<SweepCell>> {
    cfg.validate()?;
    let affected = cfg.affected_regions();
    let mut regions = vec![false; cfg.m_total];
    for &j in &affected {
        regions[j] = true;
    }
    let affected_blocks = cfg.affected_blocks();
    let mut blocks = vec![false; cfg.blocks()];
    for &i in &affected_blocks {
        blocks[i] = true;
    }
    let truth = Truth {
        regions,
        blocks,
        n_regions: affected.len(),
        n_blocks: affected_blocks.len(),
    };
    let root = RngStream::new(cfg.seed).derive(cfg.data_tag());
    let reps = map_indexed(cfg.n_sim, exec, |rep| {
        replicate(cfg, &truth, pairs, root.derive(rep as u64))
    });

    let n = cfg.n_sim as f64;
    pairs
        .iter()
        .enumerate()
        .map(|(idx, &(strategy, method))| {
            let (mut sp, mut sp2, mut fp, mut sf, mut sf2) = (0.0, 0.0, 0usize, 0.0, 0.0);
            for rep in &reps {
                let st = rep[idx];
                sp += st.power;
                sp2 += st.power * st.power;
                fp += usize::from(st.false_positive);
                sf += st.fdp;
                sf2 += st.fdp * st.fdp;
            }
            let sd_err = |sum: f64, sum2: f64| {
                if cfg.n_sim < 2 {
                    return 0.0;
                }
                let mean = sum / n;
                let var = ((sum2 - n * mean * mean) / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            };
            let n_false = match strategy {
                Strategy::Srw => truth.n_regions,
                Strategy::MeanBwa => truth.n_blocks,
            };
            let fwer = fp as f64 / n;
            Ok(SweepCell {
                strategy,
                method,
                delta: cfg.delta,
                k_over_b: cfg.k_over_b(),
                b: match strategy {
                    Strategy::Srw => 1,
                    Strategy::MeanBwa => cfg.block_size,
                },
                avg_power: (n_false > 0).then(|| sp / n),
                fwer,
                fdr: sf / n,
                se_power: (n_false > 0).then(|| sd_err(sp, sp2)),
                se_fwer: (fwer * (1.0 - fwer) / n).sqrt(),
                se_fdr: sd_err(sf, sf2),
                n_sim: cfg.n_sim,
                analytic_power: cfg.analytic(strategy, method)?,
                partial_model: cfg.partial_model,
            })
        })
        .collect()
}

/// Single-pair convenience wrapper around [`simulate_pairs`].
pub fn simulate_scenario(
    cfg: &ScenarioConfig,
    strategy: Strategy,
    method: ProcedureKind,
) -> Result<SweepCell> {
    Ok(simulate_pairs(cfg, &[(strategy, method)], Execution::default())?.remove(0))
}

/// A grid of scenarios.
///
/// Without `fractions`, each block size `b` gets `affected_regions / b`
/// fully affected blocks. With `fractions`, there are no fully affected
/// blocks and `m / partial_divisor` blocks carry `k = f·b` affected regions.
/// SRW pairs are evaluated once per grid point, on the first block size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub m_total: usize,
    pub affected_regions: usize,
    pub mu0: f64,
    pub sigma0: f64,
    pub sigma1: f64,
    pub alpha: f64,
    pub deltas: Vec<f64>,
    pub block_sizes: Vec<usize>,
    pub fractions: Option<Vec<f64>>,
    pub partial_divisor: usize,
    pub pairs: Vec<(Strategy, ProcedureKind)>,
    pub partial_model: PartialModel,
    pub n_sim: usize,
    pub seed: u64,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            m_total: 1000,
            affected_regions: 100,
            mu0: 0.0,
            sigma0: 1.0,
            sigma1: 1.0,
            alpha: 0.05,
            deltas: (0..=10).map(|i| i as f64 * 0.5).collect(),
            block_sizes: vec![5, 4, 2],
            fractions: None,
            partial_divisor: 5,
            pairs: vec![
                (Strategy::MeanBwa, ProcedureKind::Bonferroni),
                (Strategy::Srw, ProcedureKind::Bonferroni),
            ],
            partial_model: PartialModel::Exact,
            n_sim: 10_000,
            seed: 1,
        }
    }
}

impl SweepGrid {
    /// Expands the grid into scenarios, each with the pairs it evaluates.
    pub fn scenarios(&self) -> Result<Vec<(ScenarioConfig, Vec<(Strategy, ProcedureKind)>)>> {
        if self.deltas.is_empty() || self.block_sizes.is_empty() || self.pairs.is_empty() {
            return Err(Error::Config(
                "sweep grid needs at least one delta, block size and (strategy, method) pair"
                    .into(),
            ));
        }
        if self.fractions.as_ref().is_some_and(|f| f.is_empty()) {
            return Err(Error::Config("empty fraction grid".into()));
        }
        let bwa_pairs: Vec<_> = self
            .pairs
            .iter()
            .copied()
            .filter(|(s, _)| *s == Strategy::MeanBwa)
            .collect();
        let fractions: Vec<Option<f64>> = match &self.fractions {
            Some(f) => f.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        let mut out = Vec::new();
        for &delta in &self.deltas {
            for &fraction in &fractions {
                for (bi, &b) in self.block_sizes.iter().enumerate() {
                    let pairs = if bi == 0 { self.pairs.clone() } else { bwa_pairs.clone() };
                    if pairs.is_empty() {
                        continue;
                    }
                    let cfg = self.scenario(delta, b, fraction)?;
                    cfg.validate()?;
                    out.push((cfg, pairs));
                }
            }
        }
        Ok(out)
    }

    fn scenario(&self, delta: f64, b: usize, fraction: Option<f64>) -> Result<ScenarioConfig> {
        if b == 0 || self.m_total % b != 0 {
            return Err(Error::Config(format!(
                "block size {b} must divide the region count {}",
                self.m_total
            )));
        }
        let m = self.m_total / b;
        let (full, partial, k) = match fraction {
            None => {
                if self.affected_regions % b != 0 {
                    return Err(Error::Config(format!(
                        "block size {b} must divide the affected region count {}",
                        self.affected_regions
                    )));
                }
                (self.affected_regions / b, 0, 0)
            }
            Some(f) => {
                let exact = f * b as f64;
                let k = exact.round();
                if !(f > 0.0 && f <= 1.0) || (exact - k).abs() > 1e-6 {
                    return Err(Error::Config(format!(
                        "fraction {f} is not a multiple of 1/{b} in (0, 1]"
                    )));
                }
                if self.partial_divisor == 0 {
                    return Err(Error::Config("partial divisor must be at least 1".into()));
                }
                (0, m / self.partial_divisor, k as usize)
            }
        };
        Ok(ScenarioConfig {
            m_total: self.m_total,
            block_size: b,
            mu0: self.mu0,
            sigma0: self.sigma0,
            sigma1: self.sigma1,
            delta,
            full_blocks: full,
            partial_blocks: partial,
            k,
            alpha: self.alpha,
            n_sim: self.n_sim,
            seed: self.seed,
            partial_model: self.partial_model,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub grid: SweepGrid,
    pub cells: Vec<SweepCell>,
}

pub const SWEEP_CSV_HEADER: &str = "strategy,method,delta,k_over_b,b,avg_power,fwer,fdr,se_power,n_sim,analytic_power,se_fwer,se_fdr,partial_model";

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            let row = [
                c.strategy.name().to_string(),
                c.method.name().to_string(),
                fmt_f64(c.delta),
                fmt_f64(c.k_over_b),
                c.b.to_string(),
                fmt_opt(c.avg_power),
                fmt_f64(c.fwer),
                fmt_f64(c.fdr),
                fmt_opt(c.se_power),
                c.n_sim.to_string(),
                fmt_opt(c.analytic_power),
                fmt_f64(c.se_fwer),
                fmt_f64(c.se_fdr),
                c.partial_model.name().to_string(),
            ];
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep result serializes")
    }

    /// Cells matching a strategy, method, delta and block size, ordered by `k_over_b`.
    pub fn series(&self, strategy: Strategy, method: ProcedureKind, delta: f64, b: usize) -> Vec<&SweepCell> {
        let mut cells: Vec<&SweepCell> = self
            .cells
            .iter()
            .filter(|c| c.strategy == strategy && c.method == method && c.delta == delta && c.b == b)
            .collect();
        cells.sort_by(|x, y| x.k_over_b.total_cmp(&y.k_over_b));
        cells
    }

    /// Smallest `k/b` at which the Monte Carlo power of mean-BWA (block
    /// size `b`, `bwa_method`) exceeds that of SRW (`srw_method`).
    pub fn crossover(
        &self,
        delta: f64,
        b: usize,
        bwa_method: ProcedureKind,
        srw_method: ProcedureKind,
    ) -> Option<f64> {
        let srw = self.series(Strategy::Srw, srw_method, delta, 1);
        self.series(Strategy::MeanBwa, bwa_method, delta, b)
            .into_iter()
            .find(|bwa| {
                srw.iter().any(|s| {
                    (s.k_over_b - bwa.k_over_b).abs() < 1e-9
                        && matches!((bwa.avg_power, s.avg_power), (Some(x), Some(y)) if x > y)
                })
            })
            .map(|c| c.k_over_b)
    }
}

/// Runs every scenario of the grid.
pub fn power_sweep(grid: &SweepGrid, exec: Execution) -> Result<SweepResult> {
    let mut cells = Vec::new();
    for (cfg, pairs) in grid.scenarios()? {
        cells.extend(simulate_pairs(&cfg, &pairs, exec)?);
    }
    Ok(SweepResult {
        grid: grid.clone(),
        cells,
    })
}

/// Parameter presets for the published power figures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Figure {
    /// Bonferroni: mean-BWA with b ∈ {5, 4, 2} against SRW.
    F1a,
    /// As `F1a` with BH95.
    F1b,
    /// mean-BWA (b = 2) with Bonferroni against SRW with BH95, power panel.
    F1c,
    /// Same runs as `F1c`, FWER panel.
    F1d,
    /// Partially affected blocks: m1 = 0, m2 = m/5, curves over k/b.
    F2,
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "1a" => Ok(Figure::F1a),
            "1b" => Ok(Figure::F1b),
            "1c" => Ok(Figure::F1c),
            "1d" => Ok(Figure::F1d),
            "2" => Ok(Figure::F2),
            other => Err(Error::Config(format!(
                "unknown figure '{other}' (expected 1a, 1b, 1c, 1d or 2)"
            ))),
        }
    }
}

impl Figure {
    pub fn grid(self) -> SweepGrid {
        use ProcedureKind::{Bh95, Bonferroni};
        let base = SweepGrid::default();
        match self {
            Figure::F1a => base,
            Figure::F1b => SweepGrid {
                pairs: vec![(Strategy::MeanBwa, Bh95), (Strategy::Srw, Bh95)],
                ..base
            },
            Figure::F1c | Figure::F1d => SweepGrid {
                block_sizes: vec![2],
                pairs: vec![(Strategy::MeanBwa, Bonferroni), (Strategy::Srw, Bh95)],
                ..base
            },
            Figure::F2 => SweepGrid {
                deltas: vec![2.0, 3.0],
                block_sizes: vec![10, 20],
                fractions: Some((1..=10).map(|i| i as f64 / 10.0).collect()),
                pairs: vec![(Strategy::MeanBwa, Bonferroni), (Strategy::Srw, Bh95)],
                partial_model: PartialModel::Moment,
                ..base
            },
        }
    }
}

/// Label of each block of the worked 8×8 example, row-major.
pub const EXAMPLE2_LABELS: [&str; 6] = [
    "top-left",
    "top-middle",
    "top-right",
    "bottom-left",
    "bottom-middle",
    "bottom-right",
];

#[rustfmt::skip]
const EXAMPLE2_VALUES: [f64; 64] = [
    3.26, 4.48, 2.27, -0.83, 0.06, 0.32, 6.32, 1.07,
    2.17, 4.26, 4.21, 0.67, -1.39, 0.69, -0.62, -1.1,
    4.48, 1.47, 2.1, -2.58, 1.36, 6.23, 0.72, 0.46,
    2.89, 2.74, 1.74, 0.86, 2.2, 1.01, 0.5, -1.79,
    -0.29, 1.06, 2.73, -0.49, 1.13, 0.72, 9.18, -1.73,
    0.22, -0.28, -0.16, 0.45, -5.45, -0.7, -0.19, -1.27,
    -0.49, 0.51, -0.64, 0.2, 0.44, 0.18, -0.63, 0.59,
    -1.87, 1.29, -0.23, 0.6, 1.37, 1.94, -1.91, -0.33,
];

/// The worked 8×8 example: observed values, six blocks (rows split 4/4,
/// columns split 3/2/3) and the truly affected top-left block.
#[derive(Debug, Clone)]
pub struct Example2 {
    pub region: GlobalRegion,
    pub partition: BlockPartition,
    /// Row-major indices of the 12 affected regions.
    pub affected_regions: Vec<usize>,
    pub affected_blocks: Vec<usize>,
    pub rows: usize,
    pub cols: usize,
}

impl Example2 {
    /// Value at 1-based `(row, col)`.
    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.region.values()[(row - 1) * self.cols + (col - 1)]
    }
}

fn example2_block(row: usize, col: usize) -> usize {
    let band = usize::from(row >= 4);
    let column = match col {
        0..=2 => 0,
        3..=4 => 1,
        _ => 2,
    };
    band * 3 + column
}

pub fn example2_fixture() -> Example2 {
    let (rows, cols) = (8, 8);
    let region = GlobalRegion::new(EXAMPLE2_VALUES.to_vec()).expect("finite fixture");
    let partition = BlockPartition::from_labels(
        (0..rows * cols).map(|j| (j, EXAMPLE2_LABELS[example2_block(j / cols, j % cols)])),
    );
    let affected_regions = (0..rows * cols)
        .filter(|&j| example2_block(j / cols, j % cols) == 0)
        .collect();
    Example2 {
        region,
        partition,
        affected_regions,
        affected_blocks: vec![0],
        rows,
        cols,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blockwise::validate_partition;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn srw_power_examples() {
        let a = analytic_power_srw(0.0, 0.05, 1000, 1.0, 1.0).unwrap();
        assert!(close(a, 0.05 / 1000.0, 1e-15));
        let c = normal_upper_quantile(0.05 / 1000.0).unwrap();
        assert!(close(analytic_power_srw(c, 0.05, 1000, 1.0, 1.0).unwrap(), 0.5, 1e-12));
        assert!(close(analytic_power_srw(3.0, 0.05, 1000, 1.0, 1.0).unwrap(), 0.186, 0.001));
    }

    #[test]
    fn bwa_power_examples() {
        assert!(close(
            analytic_power_bwa_full(1.0, 0.05, 200, 5, 1.0, 1.0).unwrap(),
            0.107,
            0.001
        ));
        assert!(close(
            analytic_power_bwa_partial(3.0, 0.05, 50, 20, 2, 1.0, 1.0).unwrap(),
            0.097,
            0.001
        ));
        assert_eq!(
            analytic_power_bwa_full(2.0, 0.05, 1000, 1, 1.0, 1.0).unwrap(),
            analytic_power_srw(2.0, 0.05, 1000, 1.0, 1.0).unwrap()
        );
    }

    #[test]
    fn mixture_sigma_examples() {
        assert_eq!(mixture_sigma(2.0, 1.0, 1.5, 4, 4).unwrap(), 1.5);
        assert_eq!(mixture_sigma(2.0, 0.7, 1.5, 0, 4).unwrap(), 0.7);
        assert!(close(mixture_sigma(2.0, 1.0, 1.0, 1, 2).unwrap(), 2f64.sqrt(), 1e-15));
        assert!(mixture_sigma(1.0, 1.0, 1.0, 3, 2).is_err());
    }

    #[test]
    fn crossover_examples() {
        assert_eq!(crossover_fraction(0.0, 0.05, 200, 5, 1000, 1.0, 1.0).unwrap(), None);
        assert_eq!(crossover_fraction(6.0, 0.05, 200, 5, 1000, 1.0, 1.0).unwrap(), Some(0.8));
        assert_eq!(crossover_fraction(1.0, 0.05, 200, 5, 1000, 1.0, 1.0).unwrap(), Some(0.2));
    }

    #[test]
    fn scenario_truth() {
        let cfg = ScenarioConfig {
            m_total: 20,
            block_size: 4,
            delta: 1.0,
            full_blocks: 1,
            partial_blocks: 2,
            k: 1,
            ..Default::default()
        };
        assert_eq!(cfg.affected_regions(), vec![0, 1, 2, 3, 4, 8]);
        assert_eq!(cfg.affected_blocks(), vec![0, 1, 2]);
        let null = ScenarioConfig { delta: 0.0, ..cfg };
        assert!(null.affected_regions().is_empty());
        assert!(ScenarioConfig { k: 5, ..cfg }.validate().is_err());
        assert!(ScenarioConfig { block_size: 3, ..cfg }.validate().is_err());
    }

    #[test]
    fn simulation_is_deterministic_across_modes() {
        let cfg = ScenarioConfig {
            delta: 2.0,
            n_sim: 300,
            ..Default::default()
        };
        let pairs = [
            (Strategy::MeanBwa, ProcedureKind::Bonferroni),
            (Strategy::Srw, ProcedureKind::Bh95),
        ];
        let a = simulate_pairs(&cfg, &pairs, Execution::Sequential).unwrap();
        let b = simulate_pairs(&cfg, &pairs, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|c| c.fwer <= 1.0 && c.avg_power.unwrap() <= 1.0));
    }

    #[test]
    fn grid_expansion() {
        let grid = Figure::F1a.grid();
        let scenarios = grid.scenarios().unwrap();
        assert_eq!(scenarios.len(), 11 * 3);
        assert_eq!(scenarios[0].1.len(), 2);
        assert_eq!(scenarios[1].1.len(), 1);
        assert_eq!(scenarios[0].0.full_blocks, 20);
        let f2 = Figure::F2.grid().scenarios().unwrap();
        assert_eq!(f2.len(), 2 * 10 * 2);
        assert_eq!(f2[1].0.partial_blocks, 10);
        assert_eq!(f2[1].0.k, 2);
        let bad = SweepGrid { block_sizes: vec![3], ..SweepGrid::default() };
        assert!(bad.scenarios().is_err());
    }

    #[test]
    fn fixture_layout() {
        let ex = example2_fixture();
        assert_eq!(ex.entry(1, 1), 3.26);
        assert_eq!(ex.entry(6, 5), -5.45);
        let check = validate_partition(&ex.region, &ex.partition).unwrap();
        assert_eq!(check.total, 64);
        assert_eq!(ex.partition.sizes(), vec![12, 8, 12, 12, 8, 12]);
        assert_eq!(ex.affected_regions.len(), 12);
        assert_eq!(ex.partition.blocks()[0].label, "top-left");
    }
}
