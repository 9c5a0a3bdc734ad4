//! Duty cycle: a 10 Hz sequence with 97 ms of preparation and a 3 ms run window.

use std::f64::consts::TAU;

use memlink_core::detection::TrialContext;
use memlink_core::memory_a::{CoherenceParams, MainsPhases};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Keeps the per-cycle mains phases off the trial streams.
const MAINS_SALT: u64 = 0x6d61_696e_7300_0000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialTimeline {
    /// Cycles per second.
    pub cycle_rate: f64,
    pub prep_time: f64,
    pub run_window: f64,
    /// Fiber delay of the distributed photon, s.
    pub distribution_time: f64,
    /// Upper bound on the checkpoint analysis delay, s.
    pub analysis_delay: f64,
    /// Write attempts per run window. Chosen, not measured.
    pub attempts_per_window: u32,
    /// Start every run window at the same mains phase.
    pub mains_synced: bool,
}

impl Default for TrialTimeline {
    fn default() -> Self {
        Self {
            cycle_rate: 10.0,
            prep_time: 97e-3,
            run_window: 3e-3,
            distribution_time: 103e-6,
            analysis_delay: 5e-6,
            attempts_per_window: 25,
            mains_synced: true,
        }
    }
}

impl TrialTimeline {
    pub fn period(&self) -> f64 {
        1.0 / self.cycle_rate
    }

    pub fn attempt_spacing(&self) -> f64 {
        self.run_window / self.attempts_per_window as f64
    }

    pub fn trials_per_second(&self) -> f64 {
        self.cycle_rate * self.attempts_per_window as f64
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.cycle_rate > 0.0 && self.prep_time >= 0.0 && self.run_window > 0.0) {
            return Err("timeline rates and durations must be positive".into());
        }
        if ((self.prep_time + self.run_window) * self.cycle_rate - 1.0).abs() > 1e-6 {
            return Err(format!(
                "prep_time + run_window = {} s does not fill the {} s cycle",
                self.prep_time + self.run_window,
                self.period()
            ));
        }
        if self.attempts_per_window == 0 {
            return Err("attempts_per_window must be positive".into());
        }
        if !(0.0..=5e-6).contains(&self.analysis_delay) {
            return Err(format!("analysis_delay {} s outside [0, 5 µs]", self.analysis_delay));
        }
        if self.distribution_time.is_nan() || self.distribution_time < 0.0 {
            return Err("distribution_time must be non-negative".into());
        }
        Ok(())
    }
}

/// Maps trial ids onto the duty cycle. Trial `n` is attempt `n mod k` of cycle
/// `n / k`, so the mapping does not depend on how a campaign is sharded.
///
/// A synchronized campaign sees one mains phase, the one at the window
/// opening: the 20 ms mains period is long against the 3 ms window, and the
/// memory model fixes the phase per campaign. A free-running campaign draws a
/// fresh phase per cycle and advances it across the window.
#[derive(Clone, Debug)]
pub struct Schedule {
    tl: TrialTimeline,
    mains_freq: f64,
    mains_phase: f64,
    seed: u64,
}

impl Schedule {
    pub fn new(tl: &TrialTimeline, c: &CoherenceParams, seed: u64) -> Self {
        Self {
            tl: tl.clone(),
            mains_freq: c.mains_freq,
            mains_phase: c.mains_phase,
            seed,
        }
    }

    pub fn timeline(&self) -> &TrialTimeline {
        &self.tl
    }

    /// Opening of the run window in cycle `c`. Synchronized runs wait for the
    /// next instant at which the mains phase matches the first window.
    pub fn window_open(&self, cycle: u64) -> f64 {
        let nominal = cycle as f64 * self.tl.period() + self.tl.prep_time;
        if !self.tl.mains_synced {
            return nominal;
        }
        let mains_period = 1.0 / self.mains_freq;
        let first = self.tl.prep_time;
        let lag = (first - nominal).rem_euclid(mains_period);
        // Rounding can leave a full mains period where zero was meant.
        if mains_period - lag < 1e-12 {
            nominal
        } else {
            nominal + lag
        }
    }

    /// Mains phase at the window opening of cycle `c`.
    pub fn window_phase(&self, cycle: u64) -> f64 {
        if self.tl.mains_synced {
            return self.mains_phase.rem_euclid(TAU);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ MAINS_SALT);
        rng.set_word_pos(2 * cycle as u128);
        rng.random::<f64>() * TAU
    }

    pub fn context(&self, trial_id: u64) -> TrialContext {
        let k = self.tl.attempts_per_window as u64;
        let (cycle, slot) = (trial_id / k, trial_id % k);
        let offset = slot as f64 * self.tl.attempt_spacing();
        let drift = if self.tl.mains_synced {
            0.0
        } else {
            TAU * self.mains_freq * offset
        };
        let phase = self.window_phase(cycle) + drift;
        TrialContext {
            trial_id,
            start_time: self.window_open(cycle) + offset,
            mains_phase: Some(phase.rem_euclid(TAU)),
        }
    }

    /// Phase distribution the analytic model averages over.
    pub fn mains_phases(&self) -> MainsPhases {
        if self.tl.mains_synced {
            MainsPhases::Discrete(vec![self.window_phase(0)])
        } else {
            MainsPhases::Uniform
        }
    }
}

/// Start times of every trial in the first `n_cycles` cycles.
pub fn schedule_trials(tl: &TrialTimeline, c: &CoherenceParams, n_cycles: u64, seed: u64) -> Vec<f64> {
    let s = Schedule::new(tl, c, seed);
    let n = n_cycles * tl.attempts_per_window as u64;
    (0..n).map(|id| s.context(id).start_time).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_cycle_fits_one_window() {
        let tl = TrialTimeline::default();
        let t = schedule_trials(&tl, &CoherenceParams::default(), 1, 0);
        assert_eq!(t.len(), 25);
        assert!(t.iter().all(|&x| (97e-3..100e-3).contains(&x)));
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn trials_stay_inside_run_windows() {
        for synced in [true, false] {
            let tl = TrialTimeline {
                mains_synced: synced,
                cycle_rate: 9.7,
                prep_time: 1.0 / 9.7 - 3e-3,
                ..Default::default()
            };
            let s = Schedule::new(&tl, &CoherenceParams::default(), 4);
            for id in 0..2000 {
                let c = id / 25;
                let t = s.context(id).start_time;
                let open = s.window_open(c);
                assert!(t >= open && t < open + tl.run_window);
                // Synchronized windows may be delayed, never past the next cycle.
                assert!(open < (c + 1) as f64 * tl.period() + tl.prep_time);
            }
        }
    }

    #[test]
    fn synced_windows_share_a_mains_phase() {
        // An incommensurate cycle rate forces the trigger to wait.
        let tl = TrialTimeline {
            cycle_rate: 9.7,
            prep_time: 1.0 / 9.7 - 3e-3,
            ..Default::default()
        };
        let s = Schedule::new(&tl, &CoherenceParams::default(), 0);
        let first = s.window_open(0) % 20e-3;
        for c in 1..50 {
            let r = s.window_open(c) % 20e-3;
            let d = (r - first).abs();
            assert!(d < 1e-9 || (20e-3 - d) < 1e-9, "cycle {c}: {r} vs {first}");
            assert_eq!(s.context(c * 25).mains_phase, s.context(0).mains_phase);
        }
    }

    #[test]
    fn free_running_phases_vary_but_replay() {
        let tl = TrialTimeline {
            mains_synced: false,
            ..Default::default()
        };
        let a = Schedule::new(&tl, &CoherenceParams::default(), 9);
        let phases: Vec<f64> = (0..20).map(|c| a.window_phase(c)).collect();
        let mean = phases.iter().sum::<f64>() / 20.0;
        assert!(phases.iter().any(|p| (p - mean).abs() > 0.5));
        let b = Schedule::new(&tl, &CoherenceParams::default(), 9);
        assert_eq!(phases, (0..20).map(|c| b.window_phase(c)).collect::<Vec<_>>());
        assert_eq!(a.mains_phases(), MainsPhases::Uniform);
    }

    #[test]
    fn cycle_must_add_up() {
        let tl = TrialTimeline {
            prep_time: 90e-3,
            ..Default::default()
        };
        assert!(tl.validate().is_err());
        assert!(TrialTimeline::default().validate().is_ok());
    }

    #[test]
    fn attempt_rate_bookkeeping() {
        let tl = TrialTimeline::default();
        assert_eq!(tl.trials_per_second(), 250.0);
        assert!((tl.attempt_spacing() - 120e-6).abs() < 1e-15);
    }
}
