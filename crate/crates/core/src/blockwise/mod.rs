//! Block partitions, block summary statistics and block-level tests.

mod analysis;
mod bivariate;
mod partition;
mod summary;

pub use analysis::{
    decide, run_block_analysis, test_blocks, AnalysisPlan, BlockAnalysis, BlockData,
    BlockOutcome, BlockTest, BlockTestResult,
};
pub use bivariate::{bivariate_f_test, degeneracy, BivariateF, Degeneracy, FConstant};
pub use partition::{
    load_partition, parse_partition_records, partition_from_records, validate_layout,
    validate_partition, write_partition, Block, BlockPartition, GlobalRegion, PartitionCheck,
    PartitionViolation, RegionKey,
};
pub use summary::{
    block_z_pvalue, block_z_score, bwa_critical_value, srw_critical_value, summarize_block,
    truncated_mean, two_sample_z, BlockSummary, Summary, SummaryValue, DEFAULT_THRESHOLD,
};

