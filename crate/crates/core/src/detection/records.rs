//! Click records, the counts table built from them, and the record export format.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::settings::{BasisSetting, NodeBasis};
use crate::error::EstimateError;
use crate::quantum::Outcome;

/// Timestamp resolution of the acquisition clock, ns.
pub const TIME_RESOLUTION_NS: f64 = 2.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Detector {
    /// Node-A readout, `+1` port.
    APlus,
    /// Node-A readout, `−1` port.
    AMinus,
    /// Photon detection (write-out at the station, or node-B readout), `+1` port.
    WPlus,
    WMinus,
}

impl Detector {
    pub const ALL: [Detector; 4] = [Detector::APlus, Detector::AMinus, Detector::WPlus, Detector::WMinus];

    pub fn bit(self) -> u8 {
        1 << (self as u8)
    }

    pub fn label(self) -> &'static str {
        match self {
            Detector::APlus => "a+",
            Detector::AMinus => "a-",
            Detector::WPlus => "w+",
            Detector::WMinus => "w-",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Window {
    Signal,
    /// Off-signal window on the photon detectors, used for the SNR.
    Noise,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Click {
    pub detector: Detector,
    pub window: Window,
    pub timestamp_ns: f64,
}

/// Everything observed in one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClickRecord {
    pub trial_id: u64,
    pub setting: BasisSetting,
    pub clicks: Vec<Click>,
    pub outcome_a: Option<Outcome>,
    pub outcome_w: Option<Outcome>,
    /// Both nodes clicked in the signal window.
    pub post_selected: bool,
}

impl ClickRecord {
    pub fn noise_click(&self) -> bool {
        self.clicks
            .iter()
            .any(|c| c.window == Window::Noise && matches!(c.detector, Detector::WPlus | Detector::WMinus))
    }
}

/// Counts of one basis setting.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettingCounts {
    pub node_a: Option<NodeBasis>,
    pub node_b: Option<NodeBasis>,
    pub trials: u64,
    pub singles_a: u64,
    pub singles_w: u64,
    pub coincidences: u64,
    /// Coincidences by outcome, indexed `[a][w]` with 0 = `+1`.
    pub outcomes: [[u64; 2]; 2],
    pub noise_w: u64,
}

fn idx(o: Outcome) -> usize {
    match o {
        Outcome::Plus => 0,
        Outcome::Minus => 1,
    }
}

impl SettingCounts {
    pub fn for_setting(s: &BasisSetting) -> Self {
        Self {
            node_a: Some(s.node_a),
            node_b: Some(s.node_b),
            ..Default::default()
        }
    }

    /// Tally one trial from its resolved outcomes.
    pub fn add_trial(&mut self, outcome_a: Option<Outcome>, outcome_w: Option<Outcome>, noise_w: bool) {
        self.trials += 1;
        self.singles_a += outcome_a.is_some() as u64;
        self.singles_w += outcome_w.is_some() as u64;
        self.noise_w += noise_w as u64;
        if let (Some(a), Some(w)) = (outcome_a, outcome_w) {
            self.coincidences += 1;
            self.outcomes[idx(a)][idx(w)] += 1;
        }
    }

    /// `N₊₊, N₊₋, N₋₊, N₋₋`.
    pub fn n(&self) -> [u64; 4] {
        let o = self.outcomes;
        [o[0][0], o[0][1], o[1][0], o[1][1]]
    }

    /// Add `other` into `self`; both must describe the same setting.
    pub fn merge(&mut self, label: &str, other: &Self) -> Result<(), EstimateError> {
        for (mine, theirs) in [(&mut self.node_a, other.node_a), (&mut self.node_b, other.node_b)] {
            match (*mine, theirs) {
                (Some(a), Some(b)) if a != b => {
                    return Err(EstimateError::InconsistentSetting {
                        label: label.to_string(),
                        detail: format!("bases {a} and {b} share a label"),
                    })
                }
                (None, Some(b)) => *mine = Some(b),
                _ => {}
            }
        }
        self.trials += other.trials;
        self.singles_a += other.singles_a;
        self.singles_w += other.singles_w;
        self.coincidences += other.coincidences;
        self.noise_w += other.noise_w;
        for a in 0..2 {
            for w in 0..2 {
                self.outcomes[a][w] += other.outcomes[a][w];
            }
        }
        Ok(())
    }
}

/// Per-setting counts keyed by setting label.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountsTable {
    pub settings: BTreeMap<String, SettingCounts>,
}

impl CountsTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, label: &str) -> Option<&SettingCounts> {
        self.settings.get(label)
    }

    pub fn insert(&mut self, label: &str, counts: SettingCounts) -> Result<(), EstimateError> {
        self.settings.entry(label.to_string()).or_default().merge(label, &counts)
    }

    /// Commutative, associative union.
    pub fn merge(&mut self, other: &CountsTable) -> Result<(), EstimateError> {
        for (label, c) in &other.settings {
            self.insert(label, c.clone())?;
        }
        Ok(())
    }

    /// Sum over all settings.
    pub fn total(&self) -> SettingCounts {
        let mut t = SettingCounts::default();
        for c in self.settings.values() {
            t.trials += c.trials;
            t.singles_a += c.singles_a;
            t.singles_w += c.singles_w;
            t.coincidences += c.coincidences;
            t.noise_w += c.noise_w;
            for a in 0..2 {
                for w in 0..2 {
                    t.outcomes[a][w] += c.outcomes[a][w];
                }
            }
        }
        t
    }
}

/// Bin records by setting label and outcome sign.
pub fn accumulate(records: &[ClickRecord]) -> Result<CountsTable, EstimateError> {
    let mut table = CountsTable::new();
    for r in records {
        let mut c = SettingCounts::for_setting(&r.setting);
        c.add_trial(r.outcome_a, r.outcome_w, r.noise_click());
        table.insert(&r.setting.label, c)?;
    }
    Ok(table)
}

/// One line per click: `trial_id,setting,detector,timestamp_ns,post_selected`.
pub fn export_records<W: Write>(records: &[ClickRecord], out: W) -> Result<(), EstimateError> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| EstimateError::Csv(e.to_string());
    w.write_record(["trial_id", "setting", "detector", "timestamp_ns", "post_selected"])
        .map_err(err)?;
    for r in records {
        for c in &r.clicks {
            let det = match c.window {
                Window::Signal => c.detector.label().to_string(),
                Window::Noise => format!("{}~", c.detector.label()),
            };
            w.write_record([
                r.trial_id.to_string(),
                r.setting.label.clone(),
                det,
                c.timestamp_ns.to_string(),
                (r.post_selected as u8).to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| EstimateError::Csv(e.to_string()))
}

/// Quantize a time in seconds onto the acquisition grid.
pub fn to_grid_ns(t: f64) -> f64 {
    (t * 1e9 / TIME_RESOLUTION_NS + 1e-9).floor() * TIME_RESOLUTION_NS
}

#[cfg(test)]
mod tests {
    use super::*;
    use NodeBasis::*;

    fn rec(id: u64, s: &BasisSetting, a: Option<Outcome>, w: Option<Outcome>) -> ClickRecord {
        ClickRecord {
            trial_id: id,
            setting: s.clone(),
            clicks: vec![],
            outcome_a: a,
            outcome_w: w,
            post_selected: a.is_some() && w.is_some(),
        }
    }

    #[test]
    fn empty_input_gives_empty_table() {
        let t = accumulate(&[]).unwrap();
        assert_eq!(t.total(), SettingCounts::default());
    }

    #[test]
    fn four_record_fixture() {
        use Outcome::*;
        let zz = BasisSetting::new(Z, Z);
        let records = vec![
            rec(0, &zz, Some(Plus), Some(Plus)),
            rec(1, &zz, Some(Minus), Some(Minus)),
            rec(2, &zz, Some(Plus), None),
            rec(3, &zz, None, None),
        ];
        let t = accumulate(&records).unwrap();
        let c = t.get("ZZ").unwrap();
        assert_eq!(c.n(), [1, 0, 0, 1]);
        assert_eq!((c.trials, c.singles_a, c.singles_w, c.coincidences), (4, 3, 2, 2));
    }

    #[test]
    fn conflicting_labels_rejected() {
        let mut odd = BasisSetting::new(X, X);
        odd.label = "ZZ".into();
        let records = vec![rec(0, &BasisSetting::new(Z, Z), None, None), rec(1, &odd, None, None)];
        assert!(matches!(accumulate(&records), Err(EstimateError::InconsistentSetting { .. })));
    }

    #[test]
    fn export_writes_one_line_per_click() {
        let mut r = rec(7, &BasisSetting::new(Z, Z), Some(Outcome::Plus), Some(Outcome::Minus));
        r.clicks = vec![
            Click {
                detector: Detector::APlus,
                window: Window::Signal,
                timestamp_ns: 105_000.0,
            },
            Click {
                detector: Detector::WMinus,
                window: Window::Signal,
                timestamp_ns: 50.0,
            },
        ];
        let mut buf = Vec::new();
        export_records(&[r], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "trial_id,setting,detector,timestamp_ns,post_selected");
        assert_eq!(lines[1], "7,ZZ,a+,105000,1");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn grid_is_2_5_ns() {
        assert_eq!(to_grid_ns(12.4e-9), 10.0);
        assert_eq!(to_grid_ns(12.5e-9), 12.5);
        assert_eq!(to_grid_ns(103e-6), 103_000.0);
    }
}
