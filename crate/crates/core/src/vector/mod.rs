//! Vectorized operators exchanging [`ColumnBatch`](crate::batch::ColumnBatch)es.

pub(crate) mod cursor;
pub mod distinct;
pub mod filter;
pub mod group;
pub mod merge_join;
pub mod project;
pub mod scan;
pub mod sizer;
pub mod sort;
pub mod union;

pub use distinct::VDistinct;
pub use filter::VFilter;
pub use group::VGroup;
pub use merge_join::VMergeJoin;
pub use project::{VLimit, VProject};
pub use scan::VScan;
pub use sizer::AdaptiveSizer;
pub use sort::VSort;
pub use union::VUnion;
