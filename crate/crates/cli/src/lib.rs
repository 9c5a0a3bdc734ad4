//! Campaign runner for the memory-link simulator: configuration, duty-cycle
//! scheduling, the scenario catalog, calibration and reports.

pub mod calibrate;
pub mod campaign;
pub mod config;
pub mod report;
pub mod scenarios;
pub mod timeline;
