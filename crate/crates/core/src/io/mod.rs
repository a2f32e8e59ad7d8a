//! Output files, run lifecycle, comparisons and figures.

pub mod compare;
pub mod frames;
pub mod plots;
pub mod run;
pub mod summary;
