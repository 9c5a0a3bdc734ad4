//! Campaign configuration: one TOML file with named sections.

use std::path::Path;

use memlink_core::detection::LinkParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::timeline::TrialTimeline;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Sweep axes for the scenarios that scan a delay or a field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    /// Lifetime scan as multiples of the theoretical 1/e time.
    pub lifetime_span: f64,
    pub lifetime_points: usize,
    /// Explicit readout delays for the lifetime scan, µs; overrides the span.
    pub lifetime_delays_us: Option<Vec<f64>>,
    /// Fine ⟨XX⟩ scan resolving the Larmor oscillation.
    pub oscillation_span_us: f64,
    pub oscillation_points: usize,
    /// Coarse ⟨XX⟩/⟨ZZ⟩ scan at multiples of the Larmor period.
    pub envelope_span_us: f64,
    pub envelope_points: usize,
    /// Envelope scans for the mains comparison, free-running then synchronized.
    pub mains_unsynced_span_us: f64,
    pub mains_synced_span_us: f64,
    /// Mains amplitudes compared by the `mains` scenario, G.
    pub mains_unsynced_amplitude: f64,
    pub mains_synced_amplitude: f64,
    /// Magnetometer trace: sampling rate (Hz), duration (s) and noise (G).
    pub field_sample_rate: f64,
    pub field_duration: f64,
    pub field_noise: f64,
    /// Fiber lengths for the direct-fiber comparison, km.
    pub fiber_lengths_km: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lifetime_span: 2.0,
            lifetime_points: 11,
            lifetime_delays_us: None,
            oscillation_span_us: 30.0,
            oscillation_points: 61,
            envelope_span_us: 1000.0,
            envelope_points: 11,
            mains_unsynced_span_us: 150.0,
            mains_synced_span_us: 1000.0,
            mains_unsynced_amplitude: 1.61e-3,
            mains_synced_amplitude: 0.35e-3,
            field_sample_rate: 1000.0,
            field_duration: 0.2,
            field_noise: 0.05e-3,
            fiber_lengths_km: vec![0.0, 5.0, 10.0, 20.5, 30.0, 50.0],
        }
    }
}

/// Acceptance bands: target value and its quoted one-sigma uncertainty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcceptanceBands {
    pub chsh: [f64; 2],
    pub fidelity: [f64; 2],
    pub g2: [[f64; 2]; 3],
    /// Relative tolerance on a fitted lifetime against theory.
    pub lifetime_tolerance: f64,
    /// Accepted 1/e range of the unfrozen memory, s.
    pub unfrozen_range: [f64; 2],
    pub coherence_tolerance: f64,
    pub frequency_tolerance: f64,
    pub mains_ratio: f64,
    /// Largest accepted |z| between Monte Carlo and analytic expectations.
    pub agreement_sigmas: f64,
    /// Channel efficiency target and absolute tolerance.
    pub channel_efficiency: [f64; 2],
    /// Measured Remote coincidence probability and the node efficiencies it is divided by.
    pub coincidence: f64,
    pub node_a_retrieval: f64,
    pub node_b_retrieval: f64,
}

impl Default for AcceptanceBands {
    fn default() -> Self {
        Self {
            chsh: [2.73, 0.20],
            fidelity: [0.90, 0.03],
            g2: [[14.2, 0.5], [13.2, 1.4], [12.6, 2.0]],
            lifetime_tolerance: 0.10,
            unfrozen_range: [30e-6, 45e-6],
            coherence_tolerance: 0.05,
            frequency_tolerance: 0.01,
            mains_ratio: 5.0,
            agreement_sigmas: 4.0,
            channel_efficiency: [0.04, 0.001],
            coincidence: 6.1e-6,
            node_a_retrieval: 0.15,
            node_b_retrieval: 0.13,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    /// Monte Carlo trials per setting and sweep point.
    pub trials: u64,
    pub seed: u64,
    /// Trials in the `bell` and `fidelity` campaigns.
    pub bell_trials: u64,
    pub out: String,
    pub timeline: TrialTimeline,
    pub sweep: SweepConfig,
    pub acceptance: AcceptanceBands,
    pub link: LinkParams,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            trials: 1_000_000,
            seed: 1,
            bell_trials: 10_000_000,
            out: "out".into(),
            timeline: TrialTimeline::default(),
            sweep: SweepConfig::default(),
            acceptance: AcceptanceBands::default(),
            link: LinkParams::default(),
        }
    }
}

/// The calibrated configuration shipped as `configs/default.toml`.
pub const SHIPPED_TOML: &str = include_str!("../configs/default.toml");

impl CampaignConfig {
    /// Parses [`SHIPPED_TOML`]. `Default` carries the uncalibrated noise values instead.
    pub fn shipped() -> Self {
        Self::parse(SHIPPED_TOML).expect("shipped configuration is valid")
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg = Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.display().to_string(),
                message,
            },
            other => other,
        })?;
        Ok(cfg)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: "<config>".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.link.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.timeline.validate().map_err(ConfigError::Invalid)?;
        if self.trials == 0 || self.bell_trials == 0 {
            return Err(ConfigError::Invalid("trial counts must be positive".into()));
        }
        let l = &self.link;
        if l.source.bias_field != l.coherence.bias_field {
            return Err(ConfigError::Invalid(format!(
                "bias field differs between source ({}) and coherence ({})",
                l.source.bias_field, l.coherence.bias_field
            )));
        }
        if (l.channel.latency - self.timeline.distribution_time).abs() > 1e-12 {
            return Err(ConfigError::Invalid(
                "channel latency and timeline distribution_time disagree".into(),
            ));
        }
        if l.analysis_delay > self.timeline.analysis_delay {
            return Err(ConfigError::Invalid(format!(
                "analysis delay {} s exceeds the timeline bound {} s",
                l.analysis_delay, self.timeline.analysis_delay
            )));
        }
        let s = &self.sweep;
        if s.lifetime_points < 4 || s.envelope_points < 4 || s.oscillation_points < 8 {
            return Err(ConfigError::Invalid("too few sweep points for a fit".into()));
        }
        if !(s.lifetime_span > 0.0 && s.oscillation_span_us > 0.0 && s.envelope_span_us > 0.0) {
            return Err(ConfigError::Invalid("sweep spans must be positive".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical serialization, so formatting and comments do not matter.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }
}
