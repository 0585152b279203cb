use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::matrix::ConnectivityMatrix;
use crate::blockwise::{validate_layout, Block, BlockPartition, GlobalRegion};
use crate::error::{Error, Result};
use crate::io::split_fields;
use crate::stats::RngStream;

/// Nested parcellations of one set of ROIs.
///
/// Level 0 is the ROI level itself; every further level assigns each ROI to
/// a parcel. Levels are listed from fine to coarse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParcellationHierarchy {
    names: Vec<String>,
    /// `labels[level][parcel]`.
    labels: Vec<Vec<String>>,
    /// `assign[level][roi]`, dense parcel index.
    assign: Vec<Vec<usize>>,
}

impl ParcellationHierarchy {
    /// Builds a hierarchy from per-level parcel labels of each ROI, in ROI
    /// order. Parcels are indexed in order of first appearance.
    pub fn from_labels(names: Vec<String>, roi_labels: Vec<Vec<String>>) -> Result<Self> {
        let n = roi_labels.len();
        if n == 0 {
            return Err(Error::Config("hierarchy has no ROIs".into()));
        }
        let depth = names.len();
        if depth == 0 || roi_labels.iter().any(|r| r.len() != depth) {
            return Err(Error::Config(format!(
                "every ROI needs one label per level ({depth})"
            )));
        }
        let mut labels = vec![Vec::new(); depth];
        let mut assign = vec![Vec::with_capacity(n); depth];
        for level in 0..depth {
            let mut index: HashMap<&str, usize> = HashMap::new();
            for roi in &roi_labels {
                let name = roi[level].as_str();
                let next = index.len();
                let id = *index.entry(name).or_insert(next);
                if id == labels[level].len() {
                    labels[level].push(name.to_string());
                }
                assign[level].push(id);
            }
        }
        if labels[0].len() != n {
            return Err(Error::Config("ROI identifiers must be unique".into()));
        }
        Ok(Self {
            names,
            labels,
            assign,
        })
    }

    /// Parses a hierarchy file: a header row naming the levels, then one
    /// record per ROI (`roi, parcel, parcel, ...`). ROI identifiers must be
    /// integers; ROIs are ordered by identifier, which gives the matrix
    /// row order.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            detail: "missing header row".into(),
        })?;
        let names: Vec<String> = split_fields(header).iter().map(|s| s.to_string()).collect();
        let mut rows: Vec<(i64, Vec<String>)> = Vec::new();
        for (i, line) in lines {
            let fields = split_fields(line);
            if fields.len() != names.len() {
                return Err(Error::Parse {
                    line: i + 1,
                    detail: format!("expected {} fields, got {}", names.len(), fields.len()),
                });
            }
            let id: i64 = fields[0].parse().map_err(|_| Error::Parse {
                line: i + 1,
                detail: format!("ROI identifier '{}' is not an integer", fields[0]),
            })?;
            rows.push((id, fields.iter().map(|s| s.to_string()).collect()));
        }
        rows.sort_by_key(|r| r.0);
        if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Config(format!("ROI {} listed twice", w[0].0)));
        }
        Self::from_labels(names, rows.into_iter().map(|r| r.1).collect())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Load {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })?;
        Self::parse(&text).map_err(|e| Error::Load {
            path: path.to_path_buf(),
            detail: e.to_string(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = self.names.join(",");
        out.push('\n');
        for roi in 0..self.n_rois() {
            let row: Vec<&str> = (0..self.depth())
                .map(|lev| self.labels[lev][self.assign[lev][roi]].as_str())
                .collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Nested synthetic hierarchy with `sizes[0]` ROIs; each coarser level
    /// merges runs of neighbouring parcels of the previous level, with run
    /// lengths drawn at random.
    pub fn synthetic(sizes: &[usize], seed: u64) -> Result<Self> {
        if sizes.is_empty() || sizes[0] == 0 || sizes.windows(2).any(|w| w[1] == 0 || w[1] > w[0])
        {
            return Err(Error::Config(format!(
                "level sizes must be positive and non-increasing, got {sizes:?}"
            )));
        }
        let n = sizes[0];
        let mut rng = RngStream::new(seed);
        let mut assign = vec![(0..n).collect::<Vec<usize>>()];
        for w in sizes.windows(2) {
            let (prev, next) = (w[0], w[1]);
            let cuts = rng.choose_indices(prev - 1, next - 1);
            let mut group_of = vec![0; prev];
            let mut g = 0;
            for (p, slot) in group_of.iter_mut().enumerate() {
                *slot = g;
                if cuts.binary_search(&p).is_ok() {
                    g += 1;
                }
            }
            let last = assign.last().expect("non-empty");
            assign.push(last.iter().map(|&p| group_of[p]).collect());
        }
        let names = sizes
            .iter()
            .enumerate()
            .map(|(i, s)| if i == 0 { "roi".to_string() } else { format!("parcel_{s}") })
            .collect();
        let rows = (0..n)
            .map(|roi| {
                assign
                    .iter()
                    .enumerate()
                    .map(|(lev, a)| if lev == 0 { roi.to_string() } else { format!("P{}", a[roi] + 1) })
                    .collect()
            })
            .collect();
        Self::from_labels(names, rows)
    }

    pub fn n_rois(&self) -> usize {
        self.assign[0].len()
    }

    pub fn depth(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Number of parcels per level.
    pub fn sizes(&self) -> Vec<usize> {
        self.labels.iter().map(Vec::len).collect()
    }

    /// First level with `size` parcels.
    pub fn level_of_size(&self, size: usize) -> Result<usize> {
        self.sizes().iter().position(|&s| s == size).ok_or_else(|| {
            Error::Config(format!(
                "no level with {size} parcels (levels: {:?})",
                self.sizes()
            ))
        })
    }

    pub fn assignment(&self, level: usize) -> &[usize] {
        &self.assign[level]
    }

    pub fn labels(&self, level: usize) -> &[String] {
        &self.labels[level]
    }

    /// Map from parcels of `fine` to parcels of `coarse`; fails unless every
    /// fine parcel lies inside a single coarse parcel.
    pub fn nesting(&self, fine: usize, coarse: usize) -> Result<Vec<usize>> {
        let mut map: Vec<Option<usize>> = vec![None; self.labels[fine].len()];
        for roi in 0..self.n_rois() {
            let (f, c) = (self.assign[fine][roi], self.assign[coarse][roi]);
            match map[f] {
                None => map[f] = Some(c),
                Some(prev) if prev != c => {
                    return Err(Error::Config(format!(
                        "level '{}' is not nested in '{}': parcel '{}' spans '{}' and '{}'",
                        self.names[fine],
                        self.names[coarse],
                        self.labels[fine][f],
                        self.labels[coarse][prev],
                        self.labels[coarse][c]
                    )))
                }
                _ => {}
            }
        }
        Ok(map.into_iter().map(|c| c.expect("every parcel has a ROI")).collect())
    }
}

/// Blocks of matrix cells defined by pairs of coarse parcels.
///
/// Regions are the upper-triangle cells `(k, l)`, `k < l`, of the fine-level
/// matrix in row-major order. Cells outside every block are masked.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixBlocks {
    pub n: usize,
    pub include_diagonal: bool,
    pub parcel_labels: Vec<String>,
    /// Parcel of each fine-level ROI.
    pub parcel_of: Vec<usize>,
    /// Coarse parcel pair `(P, Q)`, `P <= Q`, of each block.
    pub pairs: Vec<(usize, usize)>,
    pub partition: BlockPartition,
    pub mask: Vec<bool>,
}

impl MatrixBlocks {
    pub fn cell_count(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    /// Region index of cell `(k, l)`, `k != l`.
    pub fn cell_index(&self, k: usize, l: usize) -> usize {
        let (k, l) = if k < l { (k, l) } else { (l, k) };
        k * (2 * self.n - k - 1) / 2 + (l - k - 1)
    }

    /// Cell `(k, l)`, `k < l`, of a region index.
    pub fn cell_coords(&self, index: usize) -> (usize, usize) {
        let mut k = 0;
        let mut start = 0;
        loop {
            let row = self.n - k - 1;
            if index < start + row {
                return (k, k + 1 + index - start);
            }
            start += row;
            k += 1;
        }
    }

    pub fn analyzed_cells(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.partition.sizes()
    }

    /// Block joining two parcels given by label, in either order.
    pub fn find_block(&self, p: &str, q: &str) -> Option<usize> {
        let pi = self.parcel_labels.iter().position(|l| l == p)?;
        let qi = self.parcel_labels.iter().position(|l| l == q)?;
        let key = (pi.min(qi), pi.max(qi));
        self.pairs.iter().position(|&pair| pair == key)
    }

    /// The matrix's upper triangle as a masked region.
    pub fn region(&self, matrix: &ConnectivityMatrix) -> Result<GlobalRegion> {
        if matrix.n() != self.n {
            return Err(Error::Config(format!(
                "matrix size {} does not match the {}-ROI block layout",
                matrix.n(),
                self.n
            )));
        }
        GlobalRegion::with_mask(matrix.upper_triangle(), self.mask.clone())
    }

    pub fn regions(&self, group: &[ConnectivityMatrix]) -> Result<Vec<GlobalRegion>> {
        group.iter().map(|m| self.region(m)).collect()
    }
}

/// Groups the upper-triangle cells of the `fine_size`-ROI matrix by pairs of
/// `coarse_size` parcels. Within-parcel blocks are kept only when
/// `include_diagonal` is set.
pub fn blocks_from_hierarchy(
    hier: &ParcellationHierarchy,
    fine_size: usize,
    coarse_size: usize,
    include_diagonal: bool,
) -> Result<MatrixBlocks> {
    let fine = hier.level_of_size(fine_size)?;
    let coarse = hier.level_of_size(coarse_size)?;
    if fine_size < coarse_size {
        return Err(Error::Config(format!(
            "fine level ({fine_size}) must not be coarser than the block level ({coarse_size})"
        )));
    }
    let parcel_of = hier.nesting(fine, coarse)?;
    let n = fine_size;
    if n < 2 {
        return Err(Error::Config("need at least two ROIs".into()));
    }
    let mut by_pair: std::collections::BTreeMap<(usize, usize), Vec<usize>> = Default::default();
    let mut mask = vec![false; n * (n - 1) / 2];
    let mut idx = 0;
    for k in 0..n {
        for l in k + 1..n {
            let (p, q) = (parcel_of[k], parcel_of[l]);
            let key = (p.min(q), p.max(q));
            if include_diagonal || key.0 != key.1 {
                by_pair.entry(key).or_default().push(idx);
                mask[idx] = true;
            }
            idx += 1;
        }
    }
    let labels = hier.labels(coarse).to_vec();
    let (pairs, blocks): (Vec<_>, Vec<_>) = by_pair
        .into_iter()
        .map(|(key, members)| {
            let block = Block {
                label: format!("{}:{}", labels[key.0], labels[key.1]),
                members,
            };
            (key, block)
        })
        .unzip();
    let partition = BlockPartition::new(blocks);
    validate_layout(mask.len(), Some(&mask), &partition).map_err(Error::Partition)?;
    Ok(MatrixBlocks {
        n,
        include_diagonal,
        parcel_labels: labels,
        parcel_of,
        pairs,
        partition,
        mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_rois() -> ParcellationHierarchy {
        ParcellationHierarchy::parse("roi,parcel\n1,A\n2,A\n3,B\n4,B\n").unwrap()
    }

    #[test]
    fn small_hierarchy_blocks() {
        let h = four_rois();
        assert_eq!(h.sizes(), vec![4, 2]);
        let with_diag = blocks_from_hierarchy(&h, 4, 2, true).unwrap();
        let mut sizes = with_diag.block_sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 1, 4]);
        let off = blocks_from_hierarchy(&h, 4, 2, false).unwrap();
        assert_eq!(off.block_sizes(), vec![4]);
        assert_eq!(off.analyzed_cells(), 4);
        assert_eq!(off.find_block("B", "A"), Some(0));
    }

    #[test]
    fn identity_grouping() {
        let h = four_rois();
        let b = blocks_from_hierarchy(&h, 4, 4, true).unwrap();
        assert_eq!(b.partition.len(), 6);
        assert!(b.block_sizes().iter().all(|&s| s == 1));
    }

    #[test]
    fn cell_indexing_round_trips() {
        let h = ParcellationHierarchy::synthetic(&[9, 3], 1).unwrap();
        let b = blocks_from_hierarchy(&h, 9, 3, true).unwrap();
        for idx in 0..b.cell_count() {
            let (k, l) = b.cell_coords(idx);
            assert!(k < l && l < 9);
            assert_eq!(b.cell_index(k, l), idx);
            assert_eq!(b.cell_index(l, k), idx);
        }
    }

    #[test]
    fn synthetic_is_nested() {
        let h = ParcellationHierarchy::synthetic(&[60, 30, 24, 12], 7).unwrap();
        assert_eq!(h.sizes(), vec![60, 30, 24, 12]);
        for f in 0..4 {
            for c in f..4 {
                h.nesting(f, c).unwrap();
            }
        }
        let again = ParcellationHierarchy::parse(&h.to_text()).unwrap();
        assert_eq!(again, h);
        let b = blocks_from_hierarchy(&h, 60, 12, false).unwrap();
        assert_eq!(b.partition.len(), 66);
    }

    #[test]
    fn non_nested_rejected() {
        let h = ParcellationHierarchy::parse("roi,a,b\n0,X,U\n1,X,V\n2,Y,V\n").unwrap();
        assert!(h.nesting(1, 2).is_err());
    }

    #[test]
    fn parse_errors() {
        assert!(ParcellationHierarchy::parse("").is_err());
        assert!(ParcellationHierarchy::parse("roi,p\n1,A\n1,B\n").is_err());
        assert!(ParcellationHierarchy::parse("roi,p\nx,A\n").is_err());
        assert!(ParcellationHierarchy::parse("roi,p\n1\n").is_err());
    }
}
