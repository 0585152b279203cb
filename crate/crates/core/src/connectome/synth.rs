use serde::{Deserialize, Serialize};

use super::hierarchy::MatrixBlocks;
use super::matrix::ConnectivityMatrix;
use crate::error::{Error, Result};
use crate::io::split_fields;
use crate::stats::{mean, RngStream};

/// Parameters of the synthetic (non-clinical) control-group generator.
///
/// ROIs sit on a line; `d = |k − l|/N`. A connection exists with probability
/// `presence_floor + (1 − presence_floor)·exp(−d/presence_decay)` and is then
/// present in every subject. Its typical density is log-normal,
/// `density_scale·exp(−d/density_decay + density_spread·Z)`, and each
/// subject draws `max(0, μ·(1 + cv·Z))` with a per-connection coefficient of
/// variation `cv ~ U(cv_min, cv_max)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlModel {
    pub presence_floor: f64,
    pub presence_decay: f64,
    pub density_scale: f64,
    pub density_decay: f64,
    pub density_spread: f64,
    pub cv_min: f64,
    pub cv_max: f64,
}

impl Default for ControlModel {
    fn default() -> Self {
        Self {
            presence_floor: 0.2,
            presence_decay: 0.15,
            density_scale: 6.0,
            density_decay: 0.5,
            density_spread: 0.5,
            cv_min: 0.15,
            cv_max: 0.6,
        }
    }
}

impl ControlModel {
    fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.presence_floor)
            && self.presence_decay > 0.0
            && self.density_scale > 0.0
            && self.density_decay > 0.0
            && self.density_spread >= 0.0
            && self.cv_min >= 0.0
            && self.cv_max >= self.cv_min;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid control model {self:?}")))
        }
    }
}

/// Connection structure of a synthetic population: which cells exist and
/// their typical density and spread.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPopulation {
    n: usize,
    /// `(μ, sd)` per cell `k < l`, row-major upper triangle; `μ = 0` marks an
    /// absent connection.
    cells: Vec<(f64, f64)>,
}

impl SyntheticPopulation {
    pub fn new(n: usize, model: &ControlModel, seed: u64) -> Result<Self> {
        model.validate()?;
        if n < 2 {
            return Err(Error::Config(format!("need at least 2 ROIs, got {n}")));
        }
        let mut rng = RngStream::new(seed);
        let mut cells = Vec::with_capacity(n * (n - 1) / 2);
        for k in 0..n {
            for l in k + 1..n {
                let d = (l - k) as f64 / n as f64;
                let presence = model.presence_floor
                    + (1.0 - model.presence_floor) * (-d / model.presence_decay).exp();
                let present = rng.uniform() < presence;
                let z = rng.standard_normal();
                let cv = model.cv_min + (model.cv_max - model.cv_min) * rng.uniform();
                cells.push(if present {
                    let mu = model.density_scale
                        * (-d / model.density_decay + model.density_spread * z).exp();
                    (mu, mu * cv)
                } else {
                    (0.0, 0.0)
                });
            }
        }
        Ok(Self { n, cells })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Fraction of cells with a connection.
    pub fn density(&self) -> f64 {
        self.cells.iter().filter(|c| c.0 > 0.0).count() as f64 / self.cells.len() as f64
    }

    /// `n_subjects` independent subjects: each present cell is
    /// `max(0, μ + sd·Z)`, absent cells and the diagonal are 0.
    pub fn draw(&self, n_subjects: usize, seed: u64) -> Result<Vec<ConnectivityMatrix>> {
        let root = RngStream::new(seed);
        (0..n_subjects)
            .map(|s| {
                let mut rng = root.derive(s as u64);
                let mut cells = self.cells.iter();
                ConnectivityMatrix::from_upper(self.n, |k, l| {
                    if k == l {
                        return 0.0;
                    }
                    let &(mu, sd) = cells.next().expect("one entry per cell");
                    if mu == 0.0 {
                        0.0
                    } else {
                        (mu + sd * rng.standard_normal()).max(0.0)
                    }
                })
            })
            .collect()
    }
}

/// Draws `n_subjects` control matrices with `n` ROIs from a population
/// whose structure is also derived from `seed`.
pub fn synthesize_controls(
    n: usize,
    n_subjects: usize,
    model: &ControlModel,
    seed: u64,
) -> Result<Vec<ConnectivityMatrix>> {
    if n_subjects == 0 {
        return Err(Error::Config("need at least one subject".into()));
    }
    let root = RngStream::new(seed);
    SyntheticPopulation::new(n, model, root.derive(0).seed())?.draw(n_subjects, root.derive(1).seed())
}

/// A block receiving the effect in a fraction of its cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffectedBlock {
    pub block: usize,
    pub fraction: f64,
}

/// Picks `round(share·m)` blocks at random, each with an affected fraction
/// drawn uniformly from `fraction_range`. Sorted by block index.
pub fn choose_affected_blocks(
    blocks: &MatrixBlocks,
    share: f64,
    fraction_range: (f64, f64),
    seed: u64,
) -> Result<Vec<AffectedBlock>> {
    let (lo, hi) = fraction_range;
    if !(0.0..=1.0).contains(&share) || !(lo > 0.0 && lo <= hi && hi <= 1.0) {
        return Err(Error::Config(format!(
            "need share in [0, 1] and 0 < fraction range <= 1, got {share}, ({lo}, {hi})"
        )));
    }
    let m = blocks.partition.len();
    let count = (share * m as f64).round() as usize;
    let mut rng = RngStream::new(seed);
    let chosen = rng.choose_indices(m, count.min(m));
    Ok(chosen
        .into_iter()
        .map(|block| AffectedBlock {
            block,
            fraction: lo + (hi - lo) * rng.uniform(),
        })
        .collect())
}

/// Parses an affected-blocks file: `P Q fraction` per line, parcels by label.
pub fn parse_affected_blocks(text: &str, blocks: &MatrixBlocks) -> Result<Vec<AffectedBlock>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |detail: String| Error::Parse { line: i + 1, detail };
        let fields = split_fields(line);
        if fields.len() != 3 {
            return Err(err(format!("expected 'P Q fraction', got '{line}'")));
        }
        let block = blocks
            .find_block(fields[0], fields[1])
            .ok_or_else(|| err(format!("no analyzed block for parcels ({}, {})", fields[0], fields[1])))?;
        let fraction: f64 = fields[2]
            .parse()
            .map_err(|_| err(format!("'{}' is not a number", fields[2])))?;
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(err(format!("fraction {fraction} outside (0, 1]")));
        }
        if out.iter().any(|a: &AffectedBlock| a.block == block) {
            return Err(err(format!("block ({}, {}) listed twice", fields[0], fields[1])));
        }
        out.push(AffectedBlock { block, fraction });
    }
    out.sort_by_key(|a| a.block);
    Ok(out)
}

pub fn write_affected_blocks(affected: &[AffectedBlock], blocks: &MatrixBlocks) -> String {
    affected
        .iter()
        .map(|a| {
            let (p, q) = blocks.pairs[a.block];
            format!(
                "{} {} {}\n",
                blocks.parcel_labels[p],
                blocks.parcel_labels[q],
                crate::io::fmt_f64(a.fraction)
            )
        })
        .collect()
}

/// Which blocks and cells carry the injected effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub affected: Vec<AffectedBlock>,
    /// Blocks with at least one injected cell, ascending.
    pub affected_blocks: Vec<usize>,
    /// Injected cells (region indices), ascending.
    pub injected_cells: Vec<usize>,
    /// Injected cell count of each entry of `affected`.
    pub injected_per_block: Vec<usize>,
}

impl GroundTruth {
    pub fn none() -> Self {
        Self {
            affected: Vec::new(),
            affected_blocks: Vec::new(),
            injected_cells: Vec::new(),
            injected_per_block: Vec::new(),
        }
    }
}

/// Cell-wise mean and sample standard deviation over a group.
pub fn cell_moments(group: &[ConnectivityMatrix]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = group.first().map(ConnectivityMatrix::n).unwrap_or(0);
    if group.len() < 2 {
        return Err(Error::Config(format!(
            "need at least 2 control matrices to estimate cell spreads, got {}",
            group.len()
        )));
    }
    if group.iter().any(|m| m.n() != n) {
        return Err(Error::Config("control matrices differ in size".into()));
    }
    let mut means = vec![0.0; n * n];
    let mut sds = vec![0.0; n * n];
    let mut buf = vec![0.0; group.len()];
    for k in 0..n {
        for l in k..n {
            for (slot, m) in buf.iter_mut().zip(group) {
                *slot = m.get(k, l);
            }
            let mu = mean(&buf);
            let var =
                buf.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (buf.len() - 1) as f64;
            means[k * n + l] = mu;
            sds[k * n + l] = var.sqrt();
        }
    }
    Ok((means, sds))
}

/// Generates `n_t` treatment matrices from control cell moments.
///
/// Every cell is drawn from `N(M̄(k,l), s(k,l))` and clamped at 0. In each
/// affected block, `⌈fraction·b⌉` cells (the same cells for every subject)
/// additionally receive an independent `N(delta, s(k,l))` draw, again
/// clamped at 0. With `delta == 0` no cell is injected and the ground truth
/// is empty.
pub fn synthesize_treatment_group(
    controls: &[ConnectivityMatrix],
    blocks: &MatrixBlocks,
    affected: &[AffectedBlock],
    delta: f64,
    n_t: usize,
    seed: u64,
) -> Result<(Vec<ConnectivityMatrix>, GroundTruth)> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::Config(format!("delta must be finite and >= 0, got {delta}")));
    }
    if n_t == 0 {
        return Err(Error::Config("treatment group must have at least one subject".into()));
    }
    let (means, sds) = cell_moments(controls)?;
    let n = controls[0].n();
    if n != blocks.n {
        return Err(Error::Config(format!(
            "control matrices have {n} ROIs, block layout expects {}",
            blocks.n
        )));
    }
    let root = RngStream::new(seed);
    let mut truth = GroundTruth::none();
    let mut injected = vec![false; blocks.cell_count()];
    if delta > 0.0 {
        let mut chooser = root.derive(0);
        for a in affected {
            let members = &blocks
                .partition
                .blocks()
                .get(a.block)
                .ok_or_else(|| Error::Config(format!("affected block {} does not exist", a.block)))?
                .members;
            if !(a.fraction > 0.0 && a.fraction <= 1.0) {
                return Err(Error::Config(format!(
                    "affected fraction {} of block {} outside (0, 1]",
                    a.fraction, a.block
                )));
            }
            let b = members.len();
            let k = ((a.fraction * b as f64 - 1e-9).ceil() as usize).clamp(1, b);
            for pos in chooser.choose_indices(b, k) {
                injected[members[pos]] = true;
            }
            truth.affected.push(*a);
            truth.injected_per_block.push(k);
        }
        truth.affected_blocks = affected.iter().map(|a| a.block).collect();
        truth.affected_blocks.sort_unstable();
        truth.affected_blocks.dedup();
        truth.injected_cells = (0..injected.len()).filter(|&i| injected[i]).collect();
    }

    let group = (0..n_t)
        .map(|t| {
            let mut base = root.derive_path(&[1, t as u64]);
            let mut effect = root.derive_path(&[2, t as u64]);
            ConnectivityMatrix::from_upper(n, |k, l| {
                let (mu, sd) = (means[k * n + l], sds[k * n + l]);
                let mut x = (mu + sd * base.standard_normal()).max(0.0);
                if k != l && injected[blocks.cell_index(k, l)] {
                    x = (x + delta + sd * effect.standard_normal()).max(0.0);
                }
                x
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((group, truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectome::{blocks_from_hierarchy, ParcellationHierarchy};

    fn layout() -> MatrixBlocks {
        let h = ParcellationHierarchy::synthetic(&[20, 4], 3).unwrap();
        blocks_from_hierarchy(&h, 20, 4, false).unwrap()
    }

    #[test]
    fn controls_are_valid_and_seeded() {
        let a = synthesize_controls(20, 5, &ControlModel::default(), 9).unwrap();
        let b = synthesize_controls(20, 5, &ControlModel::default(), 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        let zeros = a[0].upper_triangle().iter().filter(|&&x| x == 0.0).count();
        assert!(zeros > 0 && zeros < 190, "{zeros}");
    }

    #[test]
    fn constant_cells_get_exact_shift() {
        let blocks = layout();
        let controls = vec![ConnectivityMatrix::from_upper(20, |k, l| if k == l { 0.0 } else { 2.0 }).unwrap(); 3];
        let affected = vec![AffectedBlock { block: 0, fraction: 1.0 }];
        let (treat, truth) =
            synthesize_treatment_group(&controls, &blocks, &affected, 1.5, 4, 1).unwrap();
        assert_eq!(truth.injected_cells, blocks.partition.blocks()[0].members);
        for m in &treat {
            let upper = m.upper_triangle();
            for (i, &x) in upper.iter().enumerate() {
                let expected = if truth.injected_cells.contains(&i) { 3.5 } else { 2.0 };
                assert_eq!(x, expected);
            }
        }
    }

    #[test]
    fn treatment_is_seeded_and_non_negative() {
        let blocks = layout();
        let controls = synthesize_controls(20, 6, &ControlModel::default(), 2).unwrap();
        let affected = choose_affected_blocks(&blocks, 0.5, (0.1, 1.0), 4).unwrap();
        let run = || synthesize_treatment_group(&controls, &blocks, &affected, 1.0, 6, 8).unwrap();
        let (a, ta) = run();
        let (b, tb) = run();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        assert!(a.iter().all(|m| m.upper_triangle().iter().all(|&x| x >= 0.0)));
        for (ab, &k) in ta.affected.iter().zip(&ta.injected_per_block) {
            let b = blocks.partition.blocks()[ab.block].members.len();
            assert_eq!(k, ((ab.fraction * b as f64) - 1e-9).ceil() as usize);
        }
        let (_, null) =
            synthesize_treatment_group(&controls, &blocks, &affected, 0.0, 6, 8).unwrap();
        assert!(null.affected_blocks.is_empty());
    }

    #[test]
    fn affected_file_round_trip() {
        let blocks = layout();
        let affected = choose_affected_blocks(&blocks, 0.5, (0.1, 1.0), 4).unwrap();
        let text = write_affected_blocks(&affected, &blocks);
        assert_eq!(parse_affected_blocks(&text, &blocks).unwrap(), affected);
        assert!(parse_affected_blocks("P1 P1 0.5", &blocks).is_err());
        assert!(parse_affected_blocks("P1 P2 1.5", &blocks).is_err());
    }
}
