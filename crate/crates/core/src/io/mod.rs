//! File formats: Sherlock networks, JSON specifications and reports, CSV
//! projections.

pub mod csv;
pub mod report;
pub mod sherlock;
pub mod spec_file;
