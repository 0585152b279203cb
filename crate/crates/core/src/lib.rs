//! Block-wise multiple testing for large correlated datasets.
//!
//! Small regions (voxels, matrix cells) are grouped into blocks that follow
//! the structure of the problem; one summary statistic per block is tested
//! instead of every region, and the family of block tests is corrected with a
//! classical FWER or FDR procedure.
//!
//! * [`stats`]: distribution functions, location estimators, rank test, RNG
//! * [`mtp`]: Bonferroni, Šidák, Holm, Hochberg, BH95, BY01 and outcome tables
//! * [`blockwise`]: partitions, block summaries, critical values, block tests
//! * [`simulator`]: analytic power and seeded Monte Carlo sweeps
//! * [`connectome`]: connectivity matrices, parcel blocks, group comparison

pub mod blockwise;
pub mod connectome;
pub mod error;
pub mod exec;
pub mod io;
pub mod mtp;
pub mod simulator;
pub mod stats;

pub use error::{Error, Result};
pub use exec::Execution;
pub use mtp::{DecisionTable, PValueVector, ProcedureKind};
