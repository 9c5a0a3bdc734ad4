//! Measurement settings, click records and the end-to-end link model.

pub mod model;
pub mod records;
pub mod settings;

pub use model::{
    bell_delay, DetectorParams, LinkModel, LinkParams, Measurement, PatternProbabilities, Station, TrialContext, TrialResult,
};
pub use records::{
    accumulate, export_records, to_grid_ns, Click, ClickRecord, CountsTable, Detector, SettingCounts, Window, TIME_RESOLUTION_NS,
};
pub use settings::{project_basis, BasisSetting, NodeBasis, SignConvention};
