use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::io::split_fields;

/// The global region of interest: one scalar per small region, with an
/// optional mask (`true` = region takes part in the analysis).
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalRegion {
    values: Vec<f64>,
    mask: Option<Vec<bool>>,
}

impl GlobalRegion {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(domain(format!("region value {i} is not finite")));
        }
        if values.is_empty() {
            return Err(domain("global region must contain at least one small region"));
        }
        Ok(Self { values, mask: None })
    }

    pub fn with_mask(values: Vec<f64>, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != values.len() {
            return Err(domain(format!(
                "mask length {} does not match {} regions",
                mask.len(),
                values.len()
            )));
        }
        if !mask.iter().any(|&m| m) {
            return Err(domain("mask excludes every region"));
        }
        let mut region = Self::new(values)?;
        region.mask = Some(mask);
        Ok(region)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mask(&self) -> Option<&[bool]> {
        self.mask.as_deref()
    }

    /// Number of indexed regions, masked ones included.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.mask.as_ref().is_none_or(|m| m[i])
    }

    /// `M`, the number of regions inside the mask.
    pub fn active_count(&self) -> usize {
        self.mask
            .as_ref()
            .map_or(self.values.len(), |m| m.iter().filter(|&&x| x).count())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub label: String,
    pub members: Vec<usize>,
}

/// Blocks `B_1..B_m` over region indices. Construction does not validate;
/// use [`validate_partition`] against a region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockPartition {
    blocks: Vec<Block>,
}

impl BlockPartition {
    pub fn new(blocks: Vec<Block>) -> Self {
        Self { blocks }
    }

    /// Consecutive blocks of `block_size` over `0..total`; the last block
    /// takes the remainder.
    pub fn contiguous(total: usize, block_size: usize) -> Self {
        assert!(block_size > 0);
        let blocks = (0..total)
            .step_by(block_size)
            .enumerate()
            .map(|(i, start)| Block {
                label: format!("B{}", i + 1),
                members: (start..(start + block_size).min(total)).collect(),
            })
            .collect();
        Self { blocks }
    }

    /// One block per active region.
    pub fn singletons(region_len: usize, mask: Option<&[bool]>) -> Self {
        let blocks = (0..region_len)
            .filter(|&i| mask.is_none_or(|m| m[i]))
            .map(|i| Block {
                label: i.to_string(),
                members: vec![i],
            })
            .collect();
        Self { blocks }
    }

    /// Groups `(region, label)` records; blocks appear in first-seen label order.
    pub fn from_labels<'a>(records: impl IntoIterator<Item = (usize, &'a str)>) -> Self {
        let mut index: BTreeMap<&str, usize> = BTreeMap::new();
        let mut blocks: Vec<Block> = Vec::new();
        for (region, label) in records {
            let b = *index.entry(label).or_insert_with(|| {
                blocks.push(Block {
                    label: label.to_string(),
                    members: Vec::new(),
                });
                blocks.len() - 1
            });
            blocks[b].members.push(region);
        }
        Self { blocks }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.members.len()).collect()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.label == label)
    }

    /// Applies a region relabelling `old → new` to every member.
    pub fn permuted(&self, new_index: &[usize]) -> Self {
        let blocks = self
            .blocks
            .iter()
            .map(|b| Block {
                label: b.label.clone(),
                members: b.members.iter().map(|&r| new_index[r]).collect(),
            })
            .collect();
        Self { blocks }
    }
}

/// Everything wrong with a partition relative to a region.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct PartitionViolation {
    /// Regions claimed by more than one block, with the block indices.
    pub overlaps: Vec<(usize, Vec<usize>)>,
    /// Active regions not covered by any block.
    pub gaps: Vec<usize>,
    /// Member indices beyond the region.
    pub out_of_range: Vec<usize>,
    /// Masked-out regions that were assigned to a block.
    pub masked_members: Vec<usize>,
    pub empty_blocks: Vec<usize>,
}

impl PartitionViolation {
    fn is_clean(&self) -> bool {
        self.overlaps.is_empty()
            && self.gaps.is_empty()
            && self.out_of_range.is_empty()
            && self.masked_members.is_empty()
            && self.empty_blocks.is_empty()
    }
}

fn preview(items: &[usize]) -> String {
    let shown: Vec<String> = items.iter().take(8).map(|i| i.to_string()).collect();
    let more = if items.len() > 8 { ", ..." } else { "" };
    format!("[{}{}]", shown.join(", "), more)
}

impl fmt::Display for PartitionViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if !self.overlaps.is_empty() {
            let regions: Vec<usize> = self.overlaps.iter().map(|(r, _)| *r).collect();
            parts.push(format!("regions in several blocks {}", preview(&regions)));
        }
        if !self.gaps.is_empty() {
            parts.push(format!("unassigned regions {}", preview(&self.gaps)));
        }
        if !self.out_of_range.is_empty() {
            parts.push(format!("out-of-range regions {}", preview(&self.out_of_range)));
        }
        if !self.masked_members.is_empty() {
            parts.push(format!("masked regions assigned {}", preview(&self.masked_members)));
        }
        if !self.empty_blocks.is_empty() {
            parts.push(format!("empty blocks {}", preview(&self.empty_blocks)));
        }
        f.write_str(&parts.join("; "))
    }
}

/// Accepted partition: `M` and the block sizes `b_i` (summing to `M`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PartitionCheck {
    pub total: usize,
    pub sizes: Vec<usize>,
}

pub fn validate_partition(
    region: &GlobalRegion,
    part: &BlockPartition,
) -> std::result::Result<PartitionCheck, PartitionViolation> {
    validate_layout(region.len(), region.mask(), part)
}

/// Disjoint-cover check against a region of `len` indices and optional mask.
pub fn validate_layout(
    len: usize,
    mask: Option<&[bool]>,
    part: &BlockPartition,
) -> std::result::Result<PartitionCheck, PartitionViolation> {
    let mut owners: Vec<Vec<usize>> = vec![Vec::new(); len];
    let mut violation = PartitionViolation::default();
    for (b, block) in part.blocks.iter().enumerate() {
        if block.members.is_empty() {
            violation.empty_blocks.push(b);
        }
        for &r in &block.members {
            if r >= len {
                violation.out_of_range.push(r);
            } else {
                owners[r].push(b);
            }
        }
    }
    for (r, own) in owners.into_iter().enumerate() {
        let active = mask.is_none_or(|m| m[r]);
        match (active, own.len()) {
            (true, 0) => violation.gaps.push(r),
            (false, n) if n > 0 => violation.masked_members.push(r),
            _ => {}
        }
        if own.len() > 1 {
            violation.overlaps.push((r, own));
        }
    }
    if violation.is_clean() {
        let sizes = part.sizes();
        Ok(PartitionCheck {
            total: sizes.iter().sum(),
            sizes,
        })
    } else {
        Err(violation)
    }
}

pub(crate) fn checked_layout(
    len: usize,
    mask: Option<&[bool]>,
    part: &BlockPartition,
) -> Result<PartitionCheck> {
    validate_layout(len, mask, part).map_err(Error::Partition)
}

/// Region reference in a partition file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegionKey {
    Index(usize),
    /// Matrix cell `(row, col)`.
    Cell(usize, usize),
}

/// Parses partition records: `index label` or `row col label` per line.
/// Fields are separated by commas or whitespace; `#` starts a comment.
pub fn parse_partition_records(text: &str) -> Result<Vec<(usize, RegionKey, String)>> {
    let mut records = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let line_no = lineno + 1;
        let fields = split_fields(line);
        let parse = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                detail: format!("expected a non-negative integer, found '{s}'"),
            })
        };
        let key = match fields.len() {
            2 => RegionKey::Index(parse(fields[0])?),
            3 => RegionKey::Cell(parse(fields[0])?, parse(fields[1])?),
            n => {
                return Err(Error::Parse {
                    line: line_no,
                    detail: format!("expected 2 or 3 fields, found {n}"),
                })
            }
        };
        records.push((line_no, key, fields[fields.len() - 1].to_string()));
    }
    if records.is_empty() {
        return Err(domain("partition file contains no records"));
    }
    Ok(records)
}

/// Builds a partition from parsed records; `resolve` maps a key to a region index.
pub fn partition_from_records(
    records: &[(usize, RegionKey, String)],
    resolve: impl Fn(RegionKey) -> Option<usize>,
) -> Result<BlockPartition> {
    let mut resolved = Vec::with_capacity(records.len());
    for (line, key, label) in records {
        let idx = resolve(*key).ok_or_else(|| Error::Parse {
            line: *line,
            detail: format!("region {key:?} does not exist"),
        })?;
        resolved.push((idx, label.as_str()));
    }
    Ok(BlockPartition::from_labels(resolved))
}

/// Reads and validates a partition file against `region`.
pub fn load_partition(
    path: &Path,
    region: &GlobalRegion,
    resolve: impl Fn(RegionKey) -> Option<usize>,
) -> Result<BlockPartition> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Load {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    let part = partition_from_records(&parse_partition_records(&text)?, resolve)?;
    validate_partition(region, &part).map_err(Error::Partition)?;
    Ok(part)
}

/// Serializes as `index,label` records.
pub fn write_partition(part: &BlockPartition) -> String {
    let mut rows: Vec<(usize, &str)> = part
        .blocks
        .iter()
        .flat_map(|b| b.members.iter().map(move |&r| (r, b.label.as_str())))
        .collect();
    rows.sort();
    rows.iter().map(|(r, l)| format!("{r},{l}\n")).collect()
}
