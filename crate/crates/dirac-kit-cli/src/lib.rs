//! Scenario files, catalog suites and reports for the `dirac-kit` command.

pub mod catalog;
pub mod report;
pub mod scenario;
