//! Connectivity matrices, parcel-pair blocks, synthetic group generation and
//! the four-strategy group comparison.

mod compare;
mod hierarchy;
mod matrix;
mod study;
mod synth;

pub use compare::{
    compare_all, compare_groups, design_histograms, histogram, histograms_csv, results_csv,
    summary_csv, CompareOptions, ConnectomeStrategy, Histogram, StrategyOutcome,
    HISTOGRAM_CSV_HEADER, RESULTS_CSV_HEADER, SUMMARY_CSV_HEADER,
};
pub use hierarchy::{blocks_from_hierarchy, MatrixBlocks, ParcellationHierarchy};
pub use matrix::{
    connection_density, group_files, load_group, read_matrix, write_group, write_matrix,
    ConnectivityMatrix, FiberBundle, SYMMETRY_TOLERANCE,
};
pub use study::{synthesize_study, StudyData, SyntheticStudy};
pub use synth::{
    cell_moments, choose_affected_blocks, parse_affected_blocks, synthesize_controls,
    synthesize_treatment_group, write_affected_blocks, AffectedBlock, ControlModel, GroundTruth,
    SyntheticPopulation,
};
