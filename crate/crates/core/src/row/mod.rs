//! Tuple-at-a-time operators of the legacy executor.

pub mod join;
pub mod ops;
pub mod scan;

pub use join::{RowHashJoin, RowMergeJoin};
pub use ops::{RowDistinct, RowFilter, RowHashGroup, RowLimit, RowProject, RowSort, RowUnion};
pub use scan::RowScan;
