use serde::{Deserialize, Serialize};

use super::hierarchy::{blocks_from_hierarchy, MatrixBlocks, ParcellationHierarchy};
use super::matrix::ConnectivityMatrix;
use super::synth::{
    choose_affected_blocks, synthesize_controls, synthesize_treatment_group, AffectedBlock,
    ControlModel, GroundTruth,
};
use crate::error::{Error, Result};
use crate::stats::RngStream;

/// A complete synthetic two-group study: hierarchy, synthetic controls and
/// a treatment group generated from the control moments with an injected
/// effect in a random subset of blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticStudy {
    /// Hierarchy level sizes, finest first; `levels[0]` is the ROI count and
    /// the last level defines the blocks.
    pub levels: Vec<usize>,
    pub n_controls: usize,
    pub n_treatments: usize,
    pub delta: f64,
    /// Share of blocks receiving the effect.
    pub affected_share: f64,
    /// Range of the affected fraction within an affected block.
    pub fraction_range: (f64, f64),
    pub include_diagonal: bool,
    pub model: ControlModel,
    pub seed: u64,
}

impl Default for SyntheticStudy {
    fn default() -> Self {
        Self {
            levels: vec![60, 24, 12],
            n_controls: 15,
            n_treatments: 15,
            delta: 1.5,
            affected_share: 0.2,
            fraction_range: (0.1, 1.0),
            include_diagonal: false,
            model: ControlModel::default(),
            seed: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StudyData {
    pub hierarchy: ParcellationHierarchy,
    pub blocks: MatrixBlocks,
    pub controls: Vec<ConnectivityMatrix>,
    pub treatments: Vec<ConnectivityMatrix>,
    pub affected: Vec<AffectedBlock>,
    pub truth: GroundTruth,
}

pub fn synthesize_study(study: &SyntheticStudy) -> Result<StudyData> {
    let (&n, &coarse) = match (study.levels.first(), study.levels.last()) {
        (Some(n), Some(c)) if study.levels.len() >= 2 => (n, c),
        _ => {
            return Err(Error::Config(format!(
                "need at least two hierarchy levels, got {:?}",
                study.levels
            )))
        }
    };
    let root = RngStream::new(study.seed);
    let hierarchy = ParcellationHierarchy::synthetic(&study.levels, root.derive(0).seed())?;
    let blocks = blocks_from_hierarchy(&hierarchy, n, coarse, study.include_diagonal)?;
    let controls = synthesize_controls(n, study.n_controls, &study.model, root.derive(1).seed())?;
    let affected = choose_affected_blocks(
        &blocks,
        study.affected_share,
        study.fraction_range,
        root.derive(2).seed(),
    )?;
    let (treatments, truth) = synthesize_treatment_group(
        &controls,
        &blocks,
        &affected,
        study.delta,
        study.n_treatments,
        root.derive(3).seed(),
    )?;
    Ok(StudyData {
        hierarchy,
        blocks,
        controls,
        treatments,
        affected,
        truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_study_shape() {
        let s = synthesize_study(&SyntheticStudy::default()).unwrap();
        assert_eq!(s.blocks.partition.len(), 66);
        assert_eq!(s.controls.len(), 15);
        assert_eq!(s.treatments.len(), 15);
        assert_eq!(s.affected.len(), 13);
        assert!(!s.truth.injected_cells.is_empty());
        let again = synthesize_study(&SyntheticStudy::default()).unwrap();
        assert_eq!(again.treatments, s.treatments);
    }

    #[test]
    fn null_study_has_no_truth() {
        let s = synthesize_study(&SyntheticStudy {
            delta: 0.0,
            ..SyntheticStudy::default()
        })
        .unwrap();
        assert!(s.truth.affected_blocks.is_empty());
    }
}
