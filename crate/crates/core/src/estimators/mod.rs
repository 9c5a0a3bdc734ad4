//! Figures of merit with photon-counting error bars, curve fits and sweep tables.

mod fit;
mod sweep;

pub use fit::{fit_decay, fit_mains, fit_oscillation, least_squares, FitModel, FitParam, FitResult, Minimum};
pub use sweep::{format_sig, read_sweep, write_sweep, SweepPoint};

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::detection::{BasisSetting, CountsTable, SettingCounts};
use crate::error::EstimateError;

type Result<T> = std::result::Result<T, EstimateError>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub sigma: f64,
    pub n_samples: u64,
}

impl EstimateWithError {
    pub fn new(value: f64, sigma: f64, n_samples: u64) -> Self {
        Self { value, sigma, n_samples }
    }

    /// Distance to `target` in units of the combined one-sigma band.
    pub fn pull(&self, target: f64, target_sigma: f64) -> f64 {
        let s = self.sigma.hypot(target_sigma);
        if s == 0.0 {
            if self.value == target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.value - target) / s
        }
    }
}

impl fmt::Display for EstimateWithError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ± {}", format_sig(self.value, 4), format_sig(self.sigma, 2))
    }
}

/// Signal-to-noise ratio; without a single noise count only a lower bound exists.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Snr {
    Finite(EstimateWithError),
    Unbounded { signal: u64 },
}

impl Snr {
    pub fn value(&self) -> Option<f64> {
        match self {
            Snr::Finite(e) => Some(e.value),
            Snr::Unbounded { .. } => None,
        }
    }
}

impl fmt::Display for Snr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Snr::Finite(e) => e.fmt(f),
            Snr::Unbounded { signal } => write!(f, "unbounded ({signal} signal counts, no noise counts)"),
        }
    }
}

/// Signal-window over noise-window photon counts.
pub fn snr(c: &SettingCounts) -> Snr {
    let (s, n) = (c.singles_w, c.noise_w);
    if n == 0 {
        return Snr::Unbounded { signal: s };
    }
    let value = s as f64 / n as f64;
    let rel = if s == 0 {
        1.0 / n as f64
    } else {
        1.0 / s as f64 + 1.0 / n as f64
    };
    Snr::Finite(EstimateWithError::new(value, value * rel.sqrt(), s + n))
}

/// `P(a∧w) / (P(a)·P(w))` with Poisson propagation.
pub fn g2_wr(c: &SettingCounts) -> Result<EstimateWithError> {
    if c.singles_a == 0 {
        return Err(EstimateError::ZeroSingles("node-A readout"));
    }
    if c.singles_w == 0 {
        return Err(EstimateError::ZeroSingles("photon detection"));
    }
    let (n, na, nw, naw) = (c.trials as f64, c.singles_a as f64, c.singles_w as f64, c.coincidences as f64);
    let scale = n / (na * nw);
    let value = naw * scale;
    // An empty coincidence bucket still carries a one-count uncertainty.
    let sigma = if c.coincidences == 0 {
        scale
    } else {
        value * (1.0 / naw + 1.0 / na + 1.0 / nw).sqrt()
    };
    Ok(EstimateWithError::new(value, sigma, c.coincidences))
}

/// `(N₊₊ + N₋₋ − N₊₋ − N₋₊) / N` with multinomial error.
pub fn correlator_counts(label: &str, c: &SettingCounts) -> Result<EstimateWithError> {
    let [pp, pm, mp, mm] = c.n();
    let n = pp + pm + mp + mm;
    if n == 0 {
        return Err(EstimateError::EmptySetting(label.to_string()));
    }
    let (agree, disagree) = (pp + mm, pm + mp);
    let e = (agree as f64 - disagree as f64) / n as f64;
    // 1 − E² = 4q(1 − q) for the minority fraction q. A sample where every
    // pair agrees still carries a one-count uncertainty.
    let q = (agree.min(disagree).max(1) as f64 / n as f64).min(0.5);
    Ok(EstimateWithError::new(e, (4.0 * q * (1.0 - q) / n as f64).sqrt(), n))
}

pub fn correlator(t: &CountsTable, setting: &BasisSetting) -> Result<EstimateWithError> {
    let c = t
        .get(&setting.label)
        .ok_or_else(|| EstimateError::EmptySetting(setting.label.clone()))?;
    correlator_counts(&setting.label, c)
}

/// `|⟨A0B0⟩ + ⟨A0B1⟩ + ⟨A1B0⟩ − ⟨A1B1⟩|`.
pub fn chsh(c00: EstimateWithError, c01: EstimateWithError, c10: EstimateWithError, c11: EstimateWithError) -> EstimateWithError {
    let all = [c00, c01, c10, c11];
    EstimateWithError::new(
        (c00.value + c01.value + c10.value - c11.value).abs(),
        all.iter().map(|c| c.sigma * c.sigma).sum::<f64>().sqrt(),
        all.iter().map(|c| c.n_samples).sum(),
    )
}

/// Fidelity with the target Bell state, `(1 + ⟨XX⟩ − ⟨YY⟩ + ⟨ZZ⟩) / 4`.
pub fn fidelity(xx: EstimateWithError, yy: EstimateWithError, zz: EstimateWithError) -> EstimateWithError {
    EstimateWithError::new(
        0.25 * (1.0 + xx.value - yy.value + zz.value),
        0.25 * (xx.sigma * xx.sigma + yy.sigma * yy.sigma + zz.sigma * zz.sigma).sqrt(),
        xx.n_samples + yy.n_samples + zz.n_samples,
    )
}

/// CHSH from a table holding the four CHSH settings.
pub fn chsh_from_table(t: &CountsTable) -> Result<EstimateWithError> {
    let [a, b, c, d] = BasisSetting::chsh().map(|s| correlator(t, &s));
    Ok(chsh(a?, b?, c?, d?))
}

/// Fidelity from a table holding the XX, YY and ZZ settings.
pub fn fidelity_from_table(t: &CountsTable) -> Result<EstimateWithError> {
    let [xx, yy, zz] = BasisSetting::fidelity().map(|s| correlator(t, &s));
    Ok(fidelity(xx?, yy?, zz?))
}
